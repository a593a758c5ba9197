//! `fdp-accountant`: privacy bounds for noisy gradient descent from the
//! command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod verify;

use clap::{Args, Parser, Subcommand};
use config::{Globals, Object, RunConfig};
use fdp_core::Error;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_ACCURACY: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "fdp-accountant",
    version,
    about = "f-DP accounting for noisy gradient descent"
)]
struct Cli {
    /// JSON file with default values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Uniform grid size for tradeoff curves.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Privacy bound for one optimizer configuration, as a JSON report.
    Bound(BoundArgs),
    /// Tradeoff curve as `alpha,f` CSV.
    Curve(CurveArgs),
    /// Convert between Gaussian DP, (eps, delta) and Renyi DP.
    Convert(ConvertArgs),
    /// Reproduce the reference bound tables as CSV.
    Table(TableArgs),
    /// Check the bounds against Monte-Carlo simulations.
    Verify(VerifyArgs),
    /// Privacy curve at every coupling start tau, as `tau,eps,delta` CSV.
    SweepTau(BoundArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Debug, Serialize)]
struct BoundArgs {
    /// gd, cgd or sgd.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    /// Gradient sensitivity.
    #[arg(long = "L")]
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l_sens: Option<f64>,
    /// Strong convexity modulus.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
    /// Smoothness modulus.
    #[arg(long = "M")]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    smooth: Option<f64>,
    /// Diameter of the constraint set.
    #[arg(long = "D")]
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    diameter: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    constrained: bool,
    /// Sets L = leff * batch * sigma; batch and sigma default to 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    leff: Option<f64>,
    /// Strongly convex bound.
    #[arg(long, group = "mode_flag")]
    #[serde(skip)]
    sc: bool,
    /// Constrained convex bound.
    #[arg(long, group = "mode_flag")]
    #[serde(skip)]
    proj: bool,
    /// Plain composition bound.
    #[arg(long, group = "mode_flag")]
    #[serde(skip)]
    composition: bool,
    /// Approximate minibatch bound from the central limit regime.
    #[arg(long, group = "mode_flag")]
    #[serde(skip)]
    clt: bool,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<&'static str>,
    /// Coupling start; without it the best of a logarithmic grid is used.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<u64>,
    /// Report epsilon at this delta (repeatable).
    #[arg(long = "delta")]
    #[serde(rename = "deltas", skip_serializing_if = "Vec::is_empty")]
    deltas: Vec<f64>,
    /// Report delta at this epsilon (repeatable).
    #[arg(long = "eps")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    eps: Vec<f64>,
    /// Privacy-loss grid spacing for composite bounds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mesh: Option<f64>,
    /// Also write the tradeoff curve of a Gaussian bound to this CSV file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    curve_out: Option<PathBuf>,
}

impl BoundArgs {
    fn resolve_mode(&mut self) {
        self.mode = [
            (self.sc, "sc"),
            (self.proj, "proj"),
            (self.composition, "composition"),
            (self.clt, "clt"),
        ]
        .into_iter()
        .find_map(|(set, name)| set.then_some(name));
    }
}

#[derive(Args, Debug, Serialize)]
struct CurveArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    /// Subsampling rate applied to G(mu).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    /// The identity curve 1 - alpha.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    identity: bool,
}

#[derive(Args, Debug, Serialize)]
struct ConvertArgs {
    /// gdp, eps-delta or rdp.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    from: Option<String>,
    /// gdp, eps-delta or rdp.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    to: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    /// Renyi slope: (alpha, rho * alpha)-RDP for every alpha.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[arg(long = "delta")]
    #[serde(rename = "deltas", skip_serializing_if = "Vec::is_empty")]
    deltas: Vec<f64>,
    #[arg(long = "eps")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    eps: Vec<f64>,
    /// Renyi order (repeatable).
    #[arg(long = "alpha")]
    #[serde(rename = "alphas", skip_serializing_if = "Vec::is_empty")]
    alphas: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct TableArgs {
    /// gd-sc, cgd-sc, gd-proj, cgd-proj or all.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    which: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Simulated runs per check.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    /// Scale every bound by this factor before checking it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tamper: Option<f64>,
}

#[derive(Serialize)]
struct GlobalArgs<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<&'a PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Accuracy(_) => EXIT_ACCURACY,
        Error::Io(_) => EXIT_FAILURE,
        _ => EXIT_VALIDATION,
    }
}

fn install_thread_pool() -> Result<(), Error> {
    let Ok(raw) = std::env::var("FDP_ACCOUNTANT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t >= 1).ok_or_else(|| {
        Error::Config(format!(
            "FDP_ACCOUNTANT_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Merges config file, global flags and subcommand flags into one object.
fn merged(cli: &Cli, flags: &impl Serialize) -> Result<Object, Error> {
    let base = cli.config.as_deref().map(config::load).transpose()?;
    let globals = GlobalArgs {
        out: cli.out.as_ref(),
        seed: cli.seed,
        grid: cli.grid,
    };
    config::overlay(Some(config::overlay(base, &globals)?), flags)
}

fn merged_split(cli: &Cli, flags: &impl Serialize) -> Result<(Globals, Object), Error> {
    let mut map = merged(cli, flags)?;
    let globals = config::split(&mut map, &Globals::KEYS)?;
    Ok((globals, map))
}

fn run(mut cli: Cli) -> Result<u8, Error> {
    install_thread_pool()?;
    let command = std::mem::replace(&mut cli.command, Command::Table(TableArgs { which: None }));
    match command {
        Command::Bound(mut args) => {
            args.resolve_mode();
            let cfg = RunConfig::from_object(merged(&cli, &args)?)?;
            let report = commands::bound(&cfg)?;
            commands::emit(cfg.globals.out.as_deref(), &commands::to_json(&report)?)?;
        }
        Command::SweepTau(mut args) => {
            args.resolve_mode();
            let cfg = RunConfig::from_object(merged(&cli, &args)?)?;
            let csv = commands::sweep(&cfg)?;
            commands::emit(cfg.globals.out.as_deref(), &csv)?;
        }
        Command::Curve(args) => {
            let (globals, map) = merged_split(&cli, &args)?;
            let csv = commands::curve(&config::finish(map)?, &globals)?;
            commands::emit(globals.out.as_deref(), &csv)?;
        }
        Command::Convert(args) => {
            let (globals, map) = merged_split(&cli, &args)?;
            let rows = commands::convert(&config::finish(map)?)?;
            commands::emit(globals.out.as_deref(), &commands::to_json(&rows)?)?;
        }
        Command::Table(args) => {
            let (globals, map) = merged_split(&cli, &args)?;
            let csv = commands::tables(&config::finish(map)?)?;
            commands::emit(globals.out.as_deref(), &csv)?;
        }
        Command::Verify(args) => {
            let (globals, map) = merged_split(&cli, &args)?;
            let report = verify::run(&config::finish(map)?, globals.seed.unwrap_or(0))?;
            commands::emit(globals.out.as_deref(), &commands::to_json(&report)?)?;
            if !report.passed {
                eprintln!("verification failed");
                return Ok(EXIT_VERIFICATION);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
