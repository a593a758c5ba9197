//! Sweeps over the coupling start τ.
//!
//! The τ-parametrized bounds hold for every τ at once, so the pointwise
//! minimum of their privacy curves over any set of τ is again a valid bound.

use crate::accountant::CompositeBound;
use crate::error::{Error, Result};
use crate::io::{DeltaRow, EpsRow};
use crate::prv::{evaluate_composite_curves, GridSpec};
use crate::tradeoff::GdpParam;
use rayon::prelude::*;
use serde::Serialize;

/// Default cap on the number of τ values evaluated.
pub const MAX_TAU_CANDIDATES: usize = 64;

/// τ values whose horizons `t − τ` are spread logarithmically over `[1, t]`,
/// at most `max` of them, in increasing order.
pub fn tau_candidates(t: u64, max: usize) -> Vec<u64> {
    if t == 0 || max == 0 {
        return Vec::new();
    }
    let k = max.max(2);
    let mut horizons: Vec<u64> = (0..k)
        .map(|i| ((t as f64).powf(i as f64 / (k - 1) as f64).round() as u64).clamp(1, t))
        .collect();
    horizons.sort_unstable();
    horizons.dedup();
    let mut taus: Vec<u64> = horizons.into_iter().map(|h| t - h).collect();
    taus.sort_unstable();
    taus
}

/// δ(ε) row with the τ that attains it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepDeltaRow {
    pub eps: f64,
    pub delta: f64,
    pub uncertainty: f64,
    pub tau: u64,
}

/// ε(δ) row with the τ that attains it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepEpsRow {
    pub delta: f64,
    pub eps: f64,
    pub tau: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauSweep {
    pub candidates: Vec<u64>,
    /// Candidates whose evaluation exceeded the accuracy budget.
    pub skipped: Vec<u64>,
    pub delta_at_eps: Vec<SweepDeltaRow>,
    pub eps_at_delta: Vec<SweepEpsRow>,
}

impl TauSweep {
    pub fn delta_rows(&self) -> Vec<DeltaRow> {
        self.delta_at_eps
            .iter()
            .map(|r| DeltaRow {
                eps: r.eps,
                delta: r.delta,
                uncertainty: r.uncertainty,
            })
            .collect()
    }
}

type Curves = (Vec<DeltaRow>, Vec<EpsRow>);

/// Evaluates `build(τ)` for every candidate τ below `t` and keeps the
/// pointwise-best δ(ε) and ε(δ). Candidates that exceed the accuracy budget
/// are skipped; if all of them do, the last accuracy error is returned.
pub fn sweep_tau<F>(
    t: u64,
    build: F,
    eps_list: &[f64],
    deltas: &[f64],
    spec: &GridSpec,
    max_candidates: usize,
) -> Result<TauSweep>
where
    F: Fn(u64) -> Result<CompositeBound> + Sync,
{
    let candidates = tau_candidates(t, max_candidates);
    if candidates.is_empty() {
        return Err(Error::InvalidParams(
            "no τ candidates: need steps >= 1".into(),
        ));
    }
    let evaluated: Vec<(u64, Result<Curves>)> = candidates
        .par_iter()
        .map(|&tau| {
            (
                tau,
                build(tau).and_then(|cb| evaluate_composite_curves(&cb, eps_list, deltas, spec)),
            )
        })
        .collect();

    let mut skipped = Vec::new();
    let mut last_err = None;
    let mut delta_at_eps: Vec<Option<SweepDeltaRow>> = vec![None; eps_list.len()];
    let mut eps_at_delta: Vec<Option<SweepEpsRow>> = vec![None; deltas.len()];
    for (tau, outcome) in evaluated {
        let (rows, eps_rows) = match outcome {
            Ok(v) => v,
            Err(e @ Error::Accuracy(_)) => {
                skipped.push(tau);
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        for (slot, r) in delta_at_eps.iter_mut().zip(rows) {
            if slot.is_none_or(|best| r.delta < best.delta) {
                *slot = Some(SweepDeltaRow {
                    eps: r.eps,
                    delta: r.delta,
                    uncertainty: r.uncertainty,
                    tau,
                });
            }
        }
        for (slot, r) in eps_at_delta.iter_mut().zip(eps_rows) {
            if slot.is_none_or(|best| r.eps < best.eps) {
                *slot = Some(SweepEpsRow {
                    delta: r.delta,
                    eps: r.eps,
                    tau,
                });
            }
        }
    }
    if skipped.len() == candidates.len() {
        return Err(last_err.expect("at least one candidate"));
    }
    Ok(TauSweep {
        candidates,
        skipped,
        delta_at_eps: delta_at_eps
            .into_iter()
            .map(|r| r.expect("filled"))
            .collect(),
        eps_at_delta: eps_at_delta
            .into_iter()
            .map(|r| r.expect("filled"))
            .collect(),
    })
}

/// Smallest Gaussian DP parameter among the plateau form (`None`) and the
/// τ-parametrized forms for the candidates below `t`. Forms whose validity
/// conditions fail are ignored.
pub fn best_gdp_over_tau<F>(
    t: u64,
    build: F,
    max_candidates: usize,
) -> Result<(Option<u64>, GdpParam)>
where
    F: Fn(Option<u64>) -> Result<GdpParam>,
{
    let mut best: Option<(Option<u64>, GdpParam)> = None;
    let mut first_err = None;
    let options =
        std::iter::once(None).chain(tau_candidates(t, max_candidates).into_iter().map(Some));
    for tau in options {
        match build(tau) {
            Ok(mu) => {
                if best.is_none_or(|(_, b)| mu.mu() < b.mu()) {
                    best = Some((tau, mu));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least the plateau form was tried"))
}
