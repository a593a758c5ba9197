//! Conversions between Gaussian DP, tradeoff curves, (ε, δ)-DP and Rényi DP.

use crate::error::{domain, Result};
use crate::normal;
use crate::tradeoff::TradeoffCurve;
use serde::Serialize;
use std::collections::BTreeMap;

/// An (ε, δ) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsDelta {
    pub eps: f64,
    pub delta: f64,
}

impl EpsDelta {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return domain(format!("epsilon must be >= 0, got {eps}"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return domain(format!("delta must lie in [0, 1], got {delta}"));
        }
        Ok(Self { eps, delta })
    }
}

/// A Rényi DP guarantee of order `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RdpPoint {
    pub alpha: f64,
    pub eps: f64,
}

/// One conversion, as reported by the command line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConversionRow {
    pub notion_from: String,
    pub notion_to: String,
    pub inputs: BTreeMap<String, f64>,
    pub output: f64,
}

impl ConversionRow {
    pub fn new(from: &str, to: &str, inputs: &[(&str, f64)], output: f64) -> Self {
        Self {
            notion_from: from.to_owned(),
            notion_to: to.to_owned(),
            inputs: inputs.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect(),
            output,
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0) {
        return domain(format!("GDP parameter must be >= 0, got {mu}"));
    }
    Ok(())
}

/// Tightest δ at level ε for a μ-GDP mechanism:
/// `Φ(−ε/μ + μ/2) − e^ε Φ(−ε/μ − μ/2)`.
pub fn gdp_to_delta(mu: f64, eps: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(eps >= 0.0) {
        return domain(format!("epsilon must be >= 0, got {eps}"));
    }
    Ok(gdp_delta_unchecked(mu, eps))
}

fn gdp_delta_unchecked(mu: f64, eps: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    if mu.is_infinite() {
        return 1.0;
    }
    let hi = -eps / mu + mu / 2.0;
    let lo = -eps / mu - mu / 2.0;
    // Φ(hi)·(1 − e^{ε + log Φ(lo) − log Φ(hi)}) keeps precision when the two
    // terms nearly cancel.
    let lhi = normal::log_cdf(hi);
    let ratio = eps + normal::log_cdf(lo) - lhi;
    (lhi.exp() * -ratio.exp_m1()).clamp(0.0, 1.0)
}

/// Smallest ε ≥ 0 with `gdp_to_delta(μ, ε) ≤ δ`.
pub fn gdp_to_eps(mu: f64, delta: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    if mu == 0.0 || gdp_delta_unchecked(mu, 0.0) <= delta {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0f64.max(mu);
    while gdp_delta_unchecked(mu, hi) > delta {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return domain("epsilon search diverged");
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gdp_delta_unchecked(mu, mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// The μ whose Gaussian privacy curve passes through `(ε, δ)`; δ(ε) is
/// increasing in μ, so this is a bisection.
pub fn gdp_mu_from_delta(eps: f64, delta: f64) -> Result<f64> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return domain(format!("epsilon must be finite and >= 0, got {eps}"));
    }
    if !(0.0..1.0).contains(&delta) {
        return domain(format!("delta must lie in [0, 1), got {delta}"));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while gdp_delta_unchecked(hi, eps) < delta {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return domain("mu search diverged");
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gdp_delta_unchecked(mid, eps) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A μ-GDP mechanism is `(α, μ²α/2)`-RDP.
pub fn gdp_to_rdp(mu: f64, alpha: f64) -> Result<RdpPoint> {
    check_mu(mu)?;
    if !(alpha > 1.0) {
        return domain(format!("Renyi order must be > 1, got {alpha}"));
    }
    Ok(RdpPoint {
        alpha,
        eps: 0.5 * mu * mu * alpha,
    })
}

const LOG_ORDER_RANGE: (f64, f64) = (-12.0, 12.0);

/// `ε = ρα + log(1/δ)/(α − 1)`.
fn rdp_classic(rho: f64, log_inv_delta: f64, alpha: f64) -> f64 {
    rho * alpha + log_inv_delta / (alpha - 1.0)
}

/// `ε = ρα + log(1/(δα))/(α − 1) + log(1 − 1/α)`.
fn rdp_refined(rho: f64, log_inv_delta: f64, alpha: f64) -> f64 {
    rho * alpha + (log_inv_delta - alpha.ln()) / (alpha - 1.0) + (-1.0 / alpha).ln_1p()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(lo)).min(f(hi))
}

/// ε at level δ for a mechanism that is `(α, ρα)`-RDP for every `α > 1`;
/// the smaller of two standard conversions, each optimised over `α`.
pub fn rdp_to_epsdelta(rho: f64, delta: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return domain(format!("RDP slope must be finite and >= 0, got {rho}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    let lid = -delta.ln();
    let order = |u: f64| 1.0 + u.exp();
    let (lo, hi) = LOG_ORDER_RANGE;
    let classic = golden_section(|u| rdp_classic(rho, lid, order(u)), lo, hi);
    let refined = golden_section(|u| rdp_refined(rho, lid, order(u)), lo, hi);
    let mut best = classic.min(refined);
    if rho > 0.0 {
        let star = 1.0 + (lid / rho).sqrt();
        best = best
            .min(rdp_classic(rho, lid, star))
            .min(rdp_refined(rho, lid, star));
    }
    Ok(best.max(0.0))
}

/// `δ(ε) = sup_α {1 − e^ε α − f(α)}` for a discretized curve. The objective
/// is concave and piecewise linear, so the supremum sits on a grid point.
pub fn curve_to_delta(f: &TradeoffCurve, eps: f64) -> f64 {
    let scale = eps.exp();
    f.points()
        .map(|(a, v)| 1.0 - scale * a - v)
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn delta_is_monotone(mu in 0.01f64..10.0, eps in 0.0f64..10.0, step in 0.001f64..1.0) {
            let d = gdp_to_delta(mu, eps).unwrap();
            prop_assert!(gdp_to_delta(mu, eps + step).unwrap() <= d);
            prop_assert!(gdp_to_delta(mu + step, eps).unwrap() >= d);
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn epsilon_round_trips(mu in 0.05f64..8.0, delta in 1e-10f64..0.3) {
            let eps = gdp_to_eps(mu, delta).unwrap();
            if eps > 0.0 {
                let back = gdp_to_delta(mu, eps).unwrap();
                prop_assert!((back - delta).abs() <= 1e-9 * delta.max(1e-3));
            } else {
                prop_assert!(gdp_to_delta(mu, 0.0).unwrap() <= delta);
            }
        }

        #[test]
        fn renyi_route_is_never_tighter(mu in 0.05f64..8.0, delta in 1e-10f64..0.1) {
            let fdp = gdp_to_eps(mu, delta).unwrap();
            let rdp = rdp_to_epsdelta(mu * mu / 2.0, delta).unwrap();
            prop_assert!(rdp >= fdp - 1e-9);
        }

        #[test]
        fn renyi_monotone_in_rho(rho in 0.001f64..20.0, extra in 0.001f64..5.0, delta in 1e-10f64..0.1) {
            prop_assert!(rdp_to_epsdelta(rho + extra, delta).unwrap() >= rdp_to_epsdelta(rho, delta).unwrap());
        }
    }
}
