//! Merging of a JSON config file with command-line flags.
//!
//! Flags are serialized into a JSON object and laid over the config file's
//! object key by key. The merged object is then deserialized once, so both
//! sources go through the same validation.

use fdp_core::accountant::{AlgoParams, Kind};
use fdp_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

pub type Object = Map<String, Value>;

/// Reads a config file; it must hold a single JSON object.
pub fn load(path: &Path) -> Result<Object> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text)? {
        Value::Object(map) => Ok(map),
        _ => Err(Error::Config(format!(
            "config {} must be a JSON object",
            path.display()
        ))),
    }
}

/// Lays `flags` over `base`. Absent flags serialize to nothing and leave the
/// config value in place.
pub fn overlay(base: Option<Object>, flags: &impl Serialize) -> Result<Object> {
    let mut merged = base.unwrap_or_default();
    match serde_json::to_value(flags)? {
        Value::Object(top) => merged.extend(top),
        _ => unreachable!("flag structs serialize to objects"),
    }
    Ok(merged)
}

/// Removes `keys` from `map` and deserializes them as `T`; the rest stays.
pub fn split<T: DeserializeOwned>(map: &mut Object, keys: &[&str]) -> Result<T> {
    let part: Object = keys
        .iter()
        .filter_map(|k| map.remove(*k).map(|v| ((*k).to_owned(), v)))
        .collect();
    Ok(serde_json::from_value(Value::Object(part))?)
}

pub fn finish<T: DeserializeOwned>(map: Object) -> Result<T> {
    Ok(serde_json::from_value(Value::Object(map))?)
}

/// Options shared by every subcommand.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct Globals {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
}

impl Globals {
    pub const KEYS: [&'static str; 3] = ["out", "seed", "grid"];
}

/// Which family of bound to report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Composition,
    Sc,
    Proj,
    Clt,
}

/// Everything `bound` and `sweep-tau` take besides the optimizer parameters.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOptions {
    pub mode: Option<Mode>,
    pub tau: Option<u64>,
    /// `L/(nσ)` for full batch runs, `L/(bσ)` otherwise.
    pub leff: Option<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    pub mesh: Option<f64>,
    pub curve_out: Option<PathBuf>,
}

impl BoundOptions {
    pub const KEYS: [&'static str; 7] =
        ["mode", "tau", "leff", "deltas", "eps", "mesh", "curve_out"];
}

pub const DEFAULT_DELTA: f64 = 1e-5;

/// A validated `bound` request.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub globals: Globals,
    pub params: AlgoParams,
    pub mode: Mode,
    pub tau: Option<u64>,
    pub deltas: Vec<f64>,
    pub eps: Vec<f64>,
    pub mesh: Option<f64>,
    pub curve_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_object(mut map: Object) -> Result<Self> {
        let globals: Globals = split(&mut map, &Globals::KEYS)?;
        let opts: BoundOptions = split(&mut map, &BoundOptions::KEYS)?;
        let mut params: AlgoParams = finish(map)?;
        if let Some(leff) = opts.leff {
            apply_leff(&mut params, leff)?;
        }
        let mode = opts.mode.unwrap_or_else(|| default_mode(&params));
        check_mode(&params, mode)?;
        let deltas = if opts.deltas.is_empty() && opts.eps.is_empty() {
            vec![DEFAULT_DELTA]
        } else {
            opts.deltas
        };
        Ok(RunConfig {
            globals,
            params,
            mode,
            tau: opts.tau,
            deltas,
            eps: opts.eps,
            mesh: opts.mesh,
            curve_out: opts.curve_out,
        })
    }
}

/// Sets `L` from the normalized rate, filling in unit batch and noise when
/// they are not given.
fn apply_leff(p: &mut AlgoParams, leff: f64) -> Result<()> {
    if p.l_sens.is_some() {
        return Err(Error::InvalidParams(
            "give either L or leff, not both".into(),
        ));
    }
    if !(leff >= 0.0) || !leff.is_finite() {
        return Err(Error::InvalidParams(format!(
            "leff must be finite and >= 0, got {leff}"
        )));
    }
    let sigma = *p.sigma.get_or_insert(1.0);
    let batch = match p.kind.unwrap_or(Kind::Gd) {
        Kind::Gd => *p.n.get_or_insert(1),
        Kind::Cgd | Kind::Sgd => match (p.b, p.n) {
            (Some(b), _) => b,
            (None, None) => {
                p.n = Some(1);
                *p.b.insert(1)
            }
            (None, Some(_)) => {
                return Err(Error::InvalidParams(
                    "leff for a minibatch run needs b".into(),
                ))
            }
        },
    };
    p.l_sens = Some(leff * batch as f64 * sigma);
    Ok(())
}

fn default_mode(p: &AlgoParams) -> Mode {
    if p.constrained == Some(true) || (p.diameter.is_some() && p.m.is_none()) {
        Mode::Proj
    } else if p.m.is_some() {
        Mode::Sc
    } else {
        Mode::Composition
    }
}

fn check_mode(p: &AlgoParams, mode: Mode) -> Result<()> {
    let kind = p
        .kind
        .ok_or_else(|| Error::InvalidParams("missing field `kind` (gd, cgd or sgd)".into()))?;
    if p.constrained == Some(false) && mode == Mode::Proj {
        return Err(Error::InvalidParams(
            "constrained is false but a constrained bound was requested".into(),
        ));
    }
    if mode == Mode::Clt && kind != Kind::Sgd {
        return Err(Error::Unsupported(
            "the approximate (clt) bounds cover sgd only".into(),
        ));
    }
    Ok(())
}
