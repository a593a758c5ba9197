//! Monte-Carlo checks of the closed-form bounds.
//!
//! Each check simulates a pair of noisy runs, estimates their tradeoff curve
//! with a uniform confidence band and compares it to the bound. `tamper`
//! scales every bound before comparison, which lets a caller confirm that the
//! suite rejects a bound that is too small.

use fdp_core::accountant::{bound_gd_proj, bound_gd_sc, AlgoParams, Kind};
use fdp_core::oracle::{
    brute_force_schedule, check_alphas, check_gdpinf, empirical_tradeoff, simulate, LrMethod,
    ShiftLaw, SimSpec,
};
use fdp_core::schedule::sc_sum_sq;
use fdp_core::tradeoff::gdp_eval;
use fdp_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TRIALS: usize = 200_000;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub trials: Option<usize>,
    /// Factor applied to every bound before it is checked.
    pub tamper: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub ci_halfwidth: f64,
    /// Distance by which the estimate leaves the allowed region; ≤ 0 passes.
    pub max_excess: f64,
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub tamper: f64,
    pub passed: bool,
    pub max_ci_halfwidth: f64,
    pub checks: Vec<CheckResult>,
}

/// Worst-case quadratic pair for full-batch descent at `c = 0.95`,
/// `L/(nσ) = 0.1`, `t = 160`.
fn sc_spec(trials: usize, seed: u64) -> (SimSpec, AlgoParams) {
    let spec = SimSpec {
        kind: Kind::Gd,
        dimension: 1,
        eta: 0.05,
        sigma: 1.0,
        n: 1,
        b: 1,
        l_sens: 0.1,
        m: 1.0,
        diameter: None,
        steps: 160,
        trials,
        seed,
        sensitive_batch: 0,
        coupled: false,
    };
    let params = AlgoParams {
        kind: Some(Kind::Gd),
        eta: Some(0.05),
        sigma: Some(1.0),
        n: Some(1),
        steps: Some(160),
        l_sens: Some(0.1),
        m: Some(1.0),
        smooth: Some(10.0),
        ..Default::default()
    };
    (spec, params)
}

pub fn run(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let tamper = cfg.tamper.unwrap_or(1.0);
    if !(tamper > 0.0) || !tamper.is_finite() {
        return Err(Error::InvalidParams(format!(
            "tamper must be a positive factor, got {tamper}"
        )));
    }
    let alphas = check_alphas();
    let mut checks = Vec::new();

    let (spec, params) = sc_spec(trials, seed);
    let mu = bound_gd_sc(&params)?.mu() * tamper;
    let sim = simulate(&spec)?;
    let first = |x: &[f64]| x[0];
    let est = empirical_tradeoff(&sim.p, &sim.q, LrMethod::ExactLr(&first))?;
    let band = est.within_levy_band(|a| gdp_eval(mu, a).expect("alpha in range"), &alphas);
    checks.push(CheckResult {
        name: "strongly convex worst-case pair".into(),
        passed: band.holds,
        ci_halfwidth: band.ci_halfwidth,
        max_excess: band.max_excess,
        mu: Some(mu),
    });

    for (steps, tau) in [(40u64, None), (10, Some(0u64)), (10, Some(5))] {
        let spec = SimSpec {
            m: 0.0,
            diameter: Some(1.0),
            l_sens: 0.5,
            eta: 0.1,
            sigma: 2.0,
            steps,
            ..spec.clone()
        };
        let params = AlgoParams {
            kind: Some(Kind::Gd),
            eta: Some(0.1),
            sigma: Some(2.0),
            n: Some(1),
            steps: Some(steps),
            l_sens: Some(0.5),
            diameter: Some(1.0),
            ..Default::default()
        };
        let mu = bound_gd_proj(&params, tau)?.mu() * tamper;
        let sim = simulate(&spec)?;
        let est = empirical_tradeoff(&sim.p, &sim.q, LrMethod::HistogramLr { bins: None })?;
        let check = est.above(|a| gdp_eval(mu, a).expect("alpha in range"), &alphas);
        let at = tau.map_or_else(|| "plateau".to_owned(), |t| format!("tau {t}"));
        checks.push(CheckResult {
            name: format!("constrained run, {steps} steps, {at}"),
            passed: check.holds,
            ci_halfwidth: check.ci_halfwidth,
            max_excess: check.max_excess,
            mu: Some(mu),
        });
    }

    let shift = check_gdpinf(
        0.5,
        1.0,
        &ShiftLaw::Uniform { lo: -0.5, hi: 0.5 },
        trials,
        seed,
    )?;
    checks.push(CheckResult {
        name: "bounded random shift".into(),
        passed: shift.passes,
        ci_halfwidth: shift.ci_halfwidth,
        max_excess: -shift.margin,
        mu: Some(0.5),
    });

    let mut worst = 0.0f64;
    for c in [0.3, 0.7] {
        let found = brute_force_schedule(c, &[1.0; 5], 0.0, 32, seed)?;
        let closed = sc_sum_sq(c, 1.0, 5) * tamper * tamper;
        worst = worst.max((found.sum_sq - closed).abs() / closed);
    }
    checks.push(CheckResult {
        name: "shift schedule optimality".into(),
        passed: worst <= 1e-6,
        ci_halfwidth: 0.0,
        max_excess: worst - 1e-6,
        mu: None,
    });

    Ok(VerifyReport {
        seed,
        trials,
        tamper,
        passed: checks.iter().all(|c| c.passed),
        max_ci_halfwidth: checks.iter().map(|c| c.ci_halfwidth).fold(0.0, f64::max),
        checks,
    })
}
