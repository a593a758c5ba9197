//! The subcommands other than `verify`.

use crate::config::{Globals, Mode, RunConfig};
use fdp_core::accountant::{
    bound_cgd_composition, bound_cgd_proj, bound_cgd_sc, bound_gd_composition, bound_gd_proj,
    bound_gd_sc, bound_sgd_composition, bound_sgd_proj, bound_sgd_sc, clt_sgd_proj, clt_sgd_sc,
    AlgoParams, CompositeBound, Kind,
};
use fdp_core::conversions::{
    gdp_mu_from_delta, gdp_to_delta, gdp_to_eps, gdp_to_rdp, rdp_to_epsdelta, ConversionRow,
};
use fdp_core::io::{fmt_sig17, write_curve_csv};
use fdp_core::prv::{evaluate_composite_curves, GridSpec};
use fdp_core::report::PrivacyReport;
use fdp_core::sweep::{best_gdp_over_tau, sweep_tau, tau_candidates, MAX_TAU_CANDIDATES};
use fdp_core::tables::{table, write_table_csv, Table};
use fdp_core::tradeoff::{
    curve_of_gdp, subsample, GdpParam, SubsampleRate, TradeoffCurve, DEFAULT_GRID_SIZE,
};
use fdp_core::{Error, Result};
use rayon::prelude::*;
use serde::Deserialize;
use std::io::Write;
use std::path::Path;

/// Writes to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn to_json(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    Ok(text)
}

fn grid_spec(mesh: Option<f64>) -> GridSpec {
    mesh.map_or_else(GridSpec::default, GridSpec::with_mesh)
}

fn grid_size(globals: &Globals) -> usize {
    globals.grid.unwrap_or(DEFAULT_GRID_SIZE)
}

fn strongly_convex(p: &AlgoParams) -> bool {
    p.m.is_some_and(|m| m > 0.0)
}

type ProjBound = fn(&AlgoParams, Option<u64>) -> Result<GdpParam>;

/// A constrained GDP bound at the requested τ, or the best over the plateau
/// form and a logarithmic τ grid.
fn best_proj(cfg: &RunConfig, bound: ProjBound, horizon: u64) -> Result<(Option<u64>, GdpParam)> {
    match cfg.tau {
        Some(tau) => Ok((Some(tau), bound(&cfg.params, Some(tau))?)),
        None => best_gdp_over_tau(horizon, |tau| bound(&cfg.params, tau), MAX_TAU_CANDIDATES),
    }
}

fn sgd_builder(cfg: &RunConfig) -> impl Fn(u64) -> Result<CompositeBound> + Sync + '_ {
    move |tau| match cfg.mode {
        Mode::Sc => bound_sgd_sc(&cfg.params, tau),
        _ => bound_sgd_proj(&cfg.params, tau),
    }
}

fn gdp_report(cfg: &RunConfig, mu: GdpParam, tau: Option<u64>) -> Result<PrivacyReport> {
    let mut report = PrivacyReport::from_gdp(mu, tau, &cfg.deltas, &cfg.eps)?;
    if let Some(path) = &cfg.curve_out {
        let mut buf = Vec::new();
        write_curve_csv(&curve_of_gdp(mu, grid_size(&cfg.globals))?, &mut buf)?;
        std::fs::write(path, buf)?;
        report.curve_ref = Some(path.display().to_string());
    }
    Ok(report)
}

fn composite_report(
    cfg: &RunConfig,
    cb: CompositeBound,
    tau: Option<u64>,
) -> Result<PrivacyReport> {
    if cfg.curve_out.is_some() {
        return Err(Error::InvalidParams(
            "curve_out needs a Gaussian bound; this one is a composite".into(),
        ));
    }
    PrivacyReport::from_composite(cb, tau, &cfg.deltas, &cfg.eps, &grid_spec(cfg.mesh))
}

pub fn bound(cfg: &RunConfig) -> Result<PrivacyReport> {
    let p = &cfg.params;
    let kind = p.kind.expect("kind is checked with the config");
    match (kind, cfg.mode) {
        (Kind::Gd, Mode::Composition) => gdp_report(cfg, bound_gd_composition(p)?, None),
        (Kind::Gd, Mode::Sc) => gdp_report(cfg, bound_gd_sc(p)?, None),
        (Kind::Gd, Mode::Proj) => {
            let (tau, mu) = best_proj(cfg, bound_gd_proj, p.steps()?)?;
            gdp_report(cfg, mu, tau)
        }
        (Kind::Cgd, Mode::Composition) => gdp_report(cfg, bound_cgd_composition(p)?, None),
        (Kind::Cgd, Mode::Sc) => gdp_report(cfg, bound_cgd_sc(p)?, None),
        (Kind::Cgd, Mode::Proj) => {
            let (tau, mu) = best_proj(cfg, bound_cgd_proj, p.epochs()?)?;
            gdp_report(cfg, mu, tau)
        }
        (Kind::Sgd, Mode::Composition) => composite_report(cfg, bound_sgd_composition(p)?, None),
        (Kind::Sgd, Mode::Sc | Mode::Proj) => match cfg.tau {
            Some(tau) => composite_report(cfg, sgd_builder(cfg)(tau)?, Some(tau)),
            None => {
                if cfg.curve_out.is_some() {
                    return Err(Error::InvalidParams(
                        "curve_out needs a Gaussian bound; this one is a composite".into(),
                    ));
                }
                let sweep = sweep_tau(
                    p.steps()?,
                    sgd_builder(cfg),
                    &cfg.eps,
                    &cfg.deltas,
                    &grid_spec(cfg.mesh),
                    MAX_TAU_CANDIDATES,
                )?;
                Ok(PrivacyReport::from_sweep(sweep))
            }
        },
        (Kind::Sgd, Mode::Clt) => {
            let t = p.steps()?;
            let (h, mu) = if strongly_convex(p) {
                clt_sgd_sc(p)?
            } else {
                clt_sgd_proj(p)?
            };
            gdp_report(cfg, mu, Some(t - h))
        }
        (_, Mode::Clt) => unreachable!("rejected with the config"),
    }
}

struct SweepRow {
    tau: Option<u64>,
    eps: f64,
    delta: f64,
}

/// Every τ candidate's privacy curve, as `tau,eps,delta` rows. Candidates
/// whose evaluation runs out of accuracy budget are left out.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<u8>> {
    let p = &cfg.params;
    let kind = p.kind.expect("kind is checked with the config");
    let rows = match (kind, cfg.mode) {
        (Kind::Sgd, Mode::Sc | Mode::Proj) => {
            let build = sgd_builder(cfg);
            let spec = grid_spec(cfg.mesh);
            let evaluated: Vec<(u64, Result<_>)> = tau_candidates(p.steps()?, MAX_TAU_CANDIDATES)
                .into_par_iter()
                .map(|tau| {
                    (
                        tau,
                        build(tau).and_then(|cb| {
                            evaluate_composite_curves(&cb, &cfg.eps, &cfg.deltas, &spec)
                        }),
                    )
                })
                .collect();
            let mut rows = Vec::new();
            let mut kept = 0;
            for (tau, outcome) in evaluated {
                let (by_eps, by_delta) = match outcome {
                    Ok(v) => v,
                    Err(Error::Accuracy(_)) => continue,
                    Err(e) => return Err(e),
                };
                kept += 1;
                rows.extend(by_delta.iter().map(|r| SweepRow {
                    tau: Some(tau),
                    eps: r.eps,
                    delta: r.delta,
                }));
                rows.extend(by_eps.iter().map(|r| SweepRow {
                    tau: Some(tau),
                    eps: r.eps,
                    delta: r.delta,
                }));
            }
            if kept == 0 {
                return Err(Error::Accuracy(
                    "every τ candidate exceeded the accuracy budget".into(),
                ));
            }
            rows
        }
        (Kind::Gd | Kind::Cgd, Mode::Proj) => {
            let (bound, horizon): (ProjBound, u64) = match kind {
                Kind::Gd => (bound_gd_proj, p.steps()?),
                _ => (bound_cgd_proj, p.epochs()?),
            };
            let options = std::iter::once(None).chain(
                tau_candidates(horizon, MAX_TAU_CANDIDATES)
                    .into_iter()
                    .map(Some),
            );
            let mut rows = Vec::new();
            for tau in options {
                // The plateau form needs a long enough run; skip it otherwise.
                let Ok(mu) = bound(p, tau) else { continue };
                for &delta in &cfg.deltas {
                    rows.push(SweepRow {
                        tau,
                        eps: gdp_to_eps(mu.mu(), delta)?,
                        delta,
                    });
                }
                for &eps in &cfg.eps {
                    rows.push(SweepRow {
                        tau,
                        eps,
                        delta: gdp_to_delta(mu.mu(), eps)?,
                    });
                }
            }
            if rows.is_empty() {
                bound(p, None)?;
            }
            rows
        }
        _ => {
            return Err(Error::InvalidParams(
                "sweep-tau needs a constrained bound, or a strongly convex one for sgd".into(),
            ))
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tau", "eps", "delta"])
        .map_err(Error::from)?;
    for r in rows {
        let tau = r.tau.map_or_else(String::new, |t| t.to_string());
        w.write_record([tau, fmt_sig17(r.eps), fmt_sig17(r.delta)])
            .map_err(Error::from)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub mu: Option<f64>,
    /// Subsampling rate applied to `G(mu)`.
    pub p: Option<f64>,
    #[serde(default)]
    pub identity: bool,
}

pub fn curve(cfg: &CurveConfig, globals: &Globals) -> Result<Vec<u8>> {
    let grid = grid_size(globals);
    let f = match (cfg.identity, cfg.mu) {
        (true, None) if cfg.p.is_none() => TradeoffCurve::identity(grid)?,
        (true, _) => {
            return Err(Error::InvalidParams(
                "identity takes neither mu nor p".into(),
            ))
        }
        (false, None) => return Err(Error::InvalidParams("curve needs mu, or identity".into())),
        (false, Some(mu)) => {
            let g = curve_of_gdp(GdpParam::new(mu)?, grid)?;
            match cfg.p {
                Some(p) => subsample(&g, SubsampleRate::new(p)?)?,
                None => g,
            }
        }
    };
    let mut buf = Vec::new();
    write_curve_csv(&f, &mut buf)?;
    Ok(buf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Notion {
    Gdp,
    EpsDelta,
    Rdp,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertConfig {
    pub from: Notion,
    pub to: Notion,
    pub mu: Option<f64>,
    /// RDP slope: the mechanism is `(α, ρα)`-RDP for every order `α`.
    pub rho: Option<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidParams(format!("this conversion needs {name}")))
}

fn nonempty<'a>(v: &'a [f64], name: &str) -> Result<&'a [f64]> {
    if v.is_empty() {
        return Err(Error::InvalidParams(format!(
            "this conversion needs at least one {name}"
        )));
    }
    Ok(v)
}

pub fn convert(cfg: &ConvertConfig) -> Result<Vec<ConversionRow>> {
    let mut rows = Vec::new();
    match (cfg.from, cfg.to) {
        (Notion::Gdp, Notion::EpsDelta) => {
            let mu = need(cfg.mu, "mu")?;
            if cfg.deltas.is_empty() && cfg.eps.is_empty() {
                return Err(Error::InvalidParams(
                    "gdp to eps-delta needs delta or eps values".into(),
                ));
            }
            for &delta in &cfg.deltas {
                rows.push(ConversionRow::new(
                    "gdp",
                    "eps",
                    &[("mu", mu), ("delta", delta)],
                    gdp_to_eps(mu, delta)?,
                ));
            }
            for &eps in &cfg.eps {
                rows.push(ConversionRow::new(
                    "gdp",
                    "delta",
                    &[("mu", mu), ("eps", eps)],
                    gdp_to_delta(mu, eps)?,
                ));
            }
        }
        (Notion::Gdp, Notion::Rdp) => {
            let mu = need(cfg.mu, "mu")?;
            for &alpha in nonempty(&cfg.alphas, "alpha")? {
                rows.push(ConversionRow::new(
                    "gdp",
                    "rdp",
                    &[("mu", mu), ("alpha", alpha)],
                    gdp_to_rdp(mu, alpha)?.eps,
                ));
            }
        }
        (Notion::Rdp, Notion::EpsDelta) => {
            let rho = need(cfg.rho, "rho")?;
            for &delta in nonempty(&cfg.deltas, "delta")? {
                rows.push(ConversionRow::new(
                    "rdp",
                    "eps",
                    &[("rho", rho), ("delta", delta)],
                    rdp_to_epsdelta(rho, delta)?,
                ));
            }
        }
        (Notion::EpsDelta, Notion::Gdp) => {
            if cfg.eps.len() != cfg.deltas.len() || cfg.eps.is_empty() {
                return Err(Error::InvalidParams(
                    "eps-delta to gdp needs matching eps and delta lists".into(),
                ));
            }
            for (&eps, &delta) in cfg.eps.iter().zip(&cfg.deltas) {
                let mu = gdp_mu_from_delta(eps, delta)?;
                rows.push(ConversionRow::new(
                    "eps-delta",
                    "gdp",
                    &[("eps", eps), ("delta", delta)],
                    mu,
                ));
            }
        }
        (from, to) => {
            return Err(Error::Unsupported(format!(
                "no conversion from {from:?} to {to:?}"
            )))
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    /// A table name, or `all`.
    pub which: Option<String>,
}

pub fn tables(cfg: &TableConfig) -> Result<Vec<u8>> {
    let which: Vec<Table> = match cfg.which.as_deref() {
        None | Some("all") => Table::ALL.to_vec(),
        Some(name) => vec![name.parse()?],
    };
    let parts: Vec<_> = which.par_iter().map(|&t| table(t)).collect::<Result<_>>()?;
    let mut buf = Vec::new();
    write_table_csv(&parts.concat(), &mut buf)?;
    Ok(buf)
}
