//! Privacy bounds for noisy gradient descent and its cyclic and stochastic
//! variants.
//!
//! Every bound is a function of [`AlgoParams`]. Full-batch and cyclic bounds
//! are Gaussian DP parameters; stochastic bounds are products of Gaussian and
//! subsampled-Gaussian factors ([`CompositeBound`]) that are evaluated
//! numerically by [`crate::prv`].

use crate::error::{domain, Error, Result};
use crate::normal;
use crate::schedule::{cgd_sc_sum_sq, sc_sum_sq};
use crate::tradeoff::GdpParam;
use serde::{Deserialize, Serialize};

/// Relative guard used when rounding a ratio up to an integer: values within
/// this distance of an integer are treated as that integer.
pub const CEIL_SNAP: f64 = 1e-9;

/// `⌈x⌉`, except that values within [`CEIL_SNAP`] (relative) of an integer
/// snap to it.
pub fn ceil_snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= CEIL_SNAP * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Which optimizer was run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[serde(alias = "GD")]
    Gd,
    #[serde(alias = "CGD")]
    Cgd,
    #[serde(alias = "SGD")]
    Sgd,
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Kind::Gd),
            "cgd" => Ok(Kind::Cgd),
            "sgd" => Ok(Kind::Sgd),
            other => domain(format!(
                "unknown algorithm kind `{other}` (expected gd, cgd or sgd)"
            )),
        }
    }
}

/// Description of a private optimizer run. Fields are optional so that a
/// bound can report exactly which one it is missing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoParams {
    pub kind: Option<Kind>,
    /// Step size.
    pub eta: Option<f64>,
    /// Noise rate: the update is `x − η(∇F + Z)` with `Z ~ N(0, σ²I)`.
    pub sigma: Option<f64>,
    pub n: Option<u64>,
    pub b: Option<u64>,
    pub epochs: Option<u64>,
    pub steps: Option<u64>,
    /// Gradient sensitivity.
    #[serde(rename = "L")]
    pub l_sens: Option<f64>,
    /// Strong convexity modulus.
    pub m: Option<f64>,
    /// Smoothness modulus.
    #[serde(rename = "M")]
    pub smooth: Option<f64>,
    /// Diameter of the constraint set.
    #[serde(rename = "D")]
    pub diameter: Option<f64>,
    pub constrained: Option<bool>,
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParams(format!("missing field `{name}`")))
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParams(format!(
            "`{name}` must be finite and > 0, got {v}"
        )))
    }
}

fn non_negative(v: f64, name: &str) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParams(format!(
            "`{name}` must be finite and >= 0, got {v}"
        )))
    }
}

impl AlgoParams {
    pub fn eta(&self) -> Result<f64> {
        positive(need(self.eta, "eta")?, "eta")
    }

    pub fn sigma(&self) -> Result<f64> {
        positive(need(self.sigma, "sigma")?, "sigma")
    }

    pub fn sensitivity(&self) -> Result<f64> {
        non_negative(need(self.l_sens, "L")?, "L")
    }

    pub fn diameter(&self) -> Result<f64> {
        non_negative(need(self.diameter, "D")?, "D")
    }

    pub fn n(&self) -> Result<u64> {
        match need(self.n, "n")? {
            0 => Err(Error::InvalidParams("`n` must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn b(&self) -> Result<u64> {
        let (n, b) = (self.n()?, need(self.b, "b")?);
        if b == 0 || b > n {
            return Err(Error::InvalidParams(format!(
                "batch size must satisfy 1 <= b <= n, got b = {b}, n = {n}"
            )));
        }
        Ok(b)
    }

    /// Batches per epoch, `n / b`, which must be an integer.
    pub fn batches(&self) -> Result<u64> {
        let (n, b) = (self.n()?, self.b()?);
        if n % b != 0 {
            return Err(Error::InvalidParams(format!(
                "cyclic batches need b to divide n, got n = {n}, b = {b}"
            )));
        }
        Ok(n / b)
    }

    /// Number of steps; for the cyclic method `steps = l·E`.
    pub fn steps(&self) -> Result<u64> {
        if self.kind == Some(Kind::Cgd) {
            return Ok(self.epochs()? * self.batches()?);
        }
        match need(self.steps, "steps")? {
            0 => Err(Error::InvalidParams("`steps` must be at least 1".into())),
            t => Ok(t),
        }
    }

    /// Number of epochs of the cyclic method.
    pub fn epochs(&self) -> Result<u64> {
        let l = self.batches()?;
        let e = match (self.epochs, self.steps) {
            (Some(e), Some(t)) if t != e * l => {
                return Err(Error::InvalidParams(format!(
                    "cyclic runs need steps = l*epochs, got {t} != {l}*{e}"
                )))
            }
            (Some(e), _) => e,
            (None, Some(t)) if t % l == 0 => t / l,
            (None, Some(t)) => {
                return Err(Error::InvalidParams(format!(
                    "steps {t} is not a whole number of epochs of {l} batches"
                )))
            }
            (None, None) => return Err(Error::InvalidParams("missing field `epochs`".into())),
        };
        if e == 0 {
            return Err(Error::InvalidParams("`epochs` must be at least 1".into()));
        }
        Ok(e)
    }

    /// Contraction factor `max(|1 − ηm|, |1 − ηM|)` of one gradient step;
    /// requires `m > 0` and `0 < η < 2/M`.
    pub fn contraction(&self) -> Result<f64> {
        let m = positive(need(self.m, "m")?, "m")?;
        let big = positive(need(self.smooth, "M")?, "M")?;
        let eta = self.eta()?;
        if big < m {
            return Err(Error::InvalidParams(format!(
                "smoothness M = {big} is below strong convexity m = {m}"
            )));
        }
        if eta >= 2.0 / big {
            return Err(Error::InvalidParams(format!(
                "strongly convex bounds need 0 < eta < 2/M, got eta = {eta}, 2/M = {}",
                2.0 / big
            )));
        }
        let c = (1.0 - eta * m).abs().max((1.0 - eta * big).abs());
        if c >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "contraction factor c = {c} is not below 1; use the constrained bound"
            )));
        }
        Ok(c)
    }

    /// Checks `η ≤ 2/M` when the smoothness is given.
    fn check_constrained_step(&self) -> Result<f64> {
        let eta = self.eta()?;
        if let Some(big) = self.smooth {
            let big = positive(big, "M")?;
            if eta > 2.0 / big {
                return Err(Error::InvalidParams(format!(
                    "constrained bounds need eta <= 2/M, got eta = {eta}, 2/M = {}",
                    2.0 / big
                )));
            }
        }
        Ok(eta)
    }

    fn per_sample_rate(&self) -> Result<f64> {
        Ok(self.sensitivity()? / (self.n()? as f64 * self.sigma()?))
    }

    fn per_batch_rate(&self) -> Result<f64> {
        Ok(self.sensitivity()? / (self.b()? as f64 * self.sigma()?))
    }

    fn sample_rate(&self) -> Result<f64> {
        Ok(self.b()? as f64 / self.n()? as f64)
    }
}

/// One factor of a product tradeoff function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    Gdp { mu: f64 },
    SubsampledGdp { mu: f64, p: f64, multiplicity: u64 },
}

impl Factor {
    pub fn multiplicity(&self) -> u64 {
        match self {
            Factor::Gdp { .. } => 1,
            Factor::SubsampledGdp { multiplicity, .. } => *multiplicity,
        }
    }
}

/// `G(μ₁) ⊗ … ⊗ C_p(G(ν))^{⊗k} ⊗ …`, awaiting numerical evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositeBound {
    pub factors: Vec<Factor>,
}

impl CompositeBound {
    pub fn validate(&self) -> Result<()> {
        for f in &self.factors {
            match *f {
                Factor::Gdp { mu } => {
                    GdpParam::new(mu)?;
                }
                Factor::SubsampledGdp {
                    mu,
                    p,
                    multiplicity,
                } => {
                    GdpParam::new(mu)?;
                    if !(0.0..=1.0).contains(&p) {
                        return domain(format!("subsampling rate must lie in [0, 1], got {p}"));
                    }
                    if multiplicity == 0 {
                        return domain("factor multiplicity must be at least 1");
                    }
                }
            }
        }
        Ok(())
    }
}

/// `μ = L√t/(nσ)`.
pub fn bound_gd_composition(p: &AlgoParams) -> Result<GdpParam> {
    GdpParam::new(p.per_sample_rate()? * (p.steps()? as f64).sqrt())
}

/// `μ = √((1 − cᵗ)/(1 + cᵗ) · (1 + c)/(1 − c)) · L/(nσ)`.
pub fn bound_gd_sc(p: &AlgoParams) -> Result<GdpParam> {
    let c = p.contraction()?;
    GdpParam::new(sc_sum_sq(c, 1.0, p.steps()? as usize).sqrt() * p.per_sample_rate()?)
}

/// Constrained full-batch bound.
///
/// Without `tau` this is the plateau `(1/σ)√(3LD/(ηn) + (L/n)²⌈Dn/(ηL)⌉)`,
/// valid once `t ≥ Dn/(ηL)`. With `tau` it is the bound for a coupling that
/// starts at step `τ`: `L√(t−τ)/(nσ) + D/(ησ√(t−τ))`.
pub fn bound_gd_proj(p: &AlgoParams, tau: Option<u64>) -> Result<GdpParam> {
    let eta = p.check_constrained_step()?;
    let (l, d, n, sigma, t) = (
        p.sensitivity()?,
        p.diameter()?,
        p.n()? as f64,
        p.sigma()?,
        p.steps()?,
    );
    if let Some(tau) = tau {
        if tau >= t {
            return Err(Error::InvalidParams(format!(
                "tau must be below steps, got tau = {tau}, steps = {t}"
            )));
        }
        let h = (t - tau) as f64;
        return GdpParam::new(l * h.sqrt() / (n * sigma) + d / (eta * sigma * h.sqrt()));
    }
    if l == 0.0 {
        return GdpParam::new(0.0);
    }
    let k = gd_proj_threshold(p)?;
    if (t as f64) < k {
        return Err(Error::InvalidParams(format!(
            "the plateau bound needs steps >= ceil(Dn/(eta L)) = {k}; pass tau for shorter runs"
        )));
    }
    let s = l / n;
    GdpParam::new((3.0 * l * d / (eta * n) + s * s * k).sqrt() / sigma)
}

/// `max(1, ⌈Dn/(ηL)⌉)`: the horizon at which the full-batch constrained bound
/// stops growing.
pub fn gd_proj_threshold(p: &AlgoParams) -> Result<f64> {
    let (l, d, n, eta) = (p.sensitivity()?, p.diameter()?, p.n()? as f64, p.eta()?);
    if l == 0.0 {
        return Err(Error::InvalidParams(
            "threshold is undefined for L = 0".into(),
        ));
    }
    Ok(ceil_snap(d * n / (eta * l)).max(1.0))
}

/// `μ = L√E/(bσ)`.
pub fn bound_cgd_composition(p: &AlgoParams) -> Result<GdpParam> {
    GdpParam::new(p.per_batch_rate()? * (p.epochs()? as f64).sqrt())
}

/// `μ = L/(bσ)·√(1 + c^{2l−2}(1−c²)/(1−c^l)² · (1−c^{l(E−1)})/(1+c^{l(E−1)}))`.
pub fn bound_cgd_sc(p: &AlgoParams) -> Result<GdpParam> {
    let c = p.contraction()?;
    let (l, e) = (p.batches()? as usize, p.epochs()? as usize);
    GdpParam::new(p.per_batch_rate()? * (1.0 + cgd_sc_sum_sq(c, 1.0, l, e)).sqrt())
}

/// `⌈Db/(ηL)⌉`: the number of trailing epochs the cyclic constrained bound
/// couples over.
pub fn cgd_proj_threshold(p: &AlgoParams) -> Result<f64> {
    let (l, d, b, eta) = (p.sensitivity()?, p.diameter()?, p.b()? as f64, p.eta()?);
    if l == 0.0 {
        return Err(Error::InvalidParams(
            "threshold is undefined for L = 0".into(),
        ));
    }
    Ok(ceil_snap(d * b / (eta * l)))
}

/// Constrained cyclic bound.
///
/// Without `tau` this is the plateau
/// `(1/σ)√((L/b)² + 3LD/(ηbl) + (L/b)²/l·⌈Db/(ηL)⌉)`, valid once
/// `E ≥ Db/(ηL)`. With `tau` it is
/// `(1/σ)√((L/b)² + (D/η + L(E−τ)/b)²/(l(E−τ)))` for `1 ≤ τ < E`, and
/// `(L/(bσ))√(1 + (E−1)/l)` for `τ = 0`.
pub fn bound_cgd_proj(p: &AlgoParams, tau: Option<u64>) -> Result<GdpParam> {
    let eta = p.check_constrained_step()?;
    let (l_sens, d, b, sigma) = (p.sensitivity()?, p.diameter()?, p.b()? as f64, p.sigma()?);
    let (l, e) = (p.batches()? as f64, p.epochs()?);
    let s = l_sens / b;
    match tau {
        Some(0) => GdpParam::new(s * (1.0 + (e - 1) as f64 / l).sqrt() / sigma),
        Some(tau) if tau >= e => Err(Error::InvalidParams(format!(
            "tau must be below epochs, got tau = {tau}, epochs = {e}"
        ))),
        Some(tau) => {
            let h = (e - tau) as f64;
            let shift = d / eta + s * h;
            GdpParam::new((s * s + shift * shift / (l * h)).sqrt() / sigma)
        }
        None => {
            if l_sens == 0.0 {
                return GdpParam::new(0.0);
            }
            let k = cgd_proj_threshold(p)?;
            if (e as f64) < k {
                return Err(Error::InvalidParams(format!(
                    "the plateau bound needs epochs >= ceil(Db/(eta L)) = {k}; pass tau for shorter runs"
                )));
            }
            GdpParam::new((s * s + 3.0 * l_sens * d / (eta * b * l) + s * s / l * k).sqrt() / sigma)
        }
    }
}

/// `C_{b/n}(G(L/(bσ)))^{⊗t}`.
pub fn bound_sgd_composition(p: &AlgoParams) -> Result<CompositeBound> {
    Ok(CompositeBound {
        factors: vec![Factor::SubsampledGdp {
            mu: p.per_batch_rate()?,
            p: p.sample_rate()?,
            multiplicity: p.steps()?,
        }],
    })
}

fn check_tau(tau: u64, t: u64) -> Result<u64> {
    if tau >= t {
        return Err(Error::InvalidParams(format!(
            "tau must lie in 0..steps, got tau = {tau}, steps = {t}"
        )));
    }
    Ok(t - tau)
}

/// Strongly convex stochastic bound for a coupling from step `τ`:
/// `G(2√2·L/(bσ)·(c^{t−τ+1} − cᵗ)/(1−c)) ⊗ C_p(G(2√2·L/(bσ))) ⊗ C_p(G(2L/(bσ)))^{⊗(t−τ)}`.
/// At `τ = 0` the runs start together and the first factor is `G(0)`.
pub fn bound_sgd_sc(p: &AlgoParams, tau: u64) -> Result<CompositeBound> {
    let c = p.contraction()?;
    let t = p.steps()?;
    let h = check_tau(tau, t)?;
    let (rate, q) = (p.per_batch_rate()?, p.sample_rate()?);
    let coeff = ((c.powi(h as i32 + 1) - c.powi(t as i32)) / (1.0 - c)).max(0.0);
    Ok(CompositeBound {
        factors: vec![
            Factor::Gdp {
                mu: 2.0 * std::f64::consts::SQRT_2 * rate * coeff,
            },
            Factor::SubsampledGdp {
                mu: 2.0 * std::f64::consts::SQRT_2 * rate,
                p: q,
                multiplicity: 1,
            },
            Factor::SubsampledGdp {
                mu: 2.0 * rate,
                p: q,
                multiplicity: h,
            },
        ],
    })
}

/// Constrained stochastic bound for a coupling from step `τ`:
/// `G(√2·D/(ησ√(t−τ))) ⊗ C_p(G(2√2·L/(bσ)))^{⊗(t−τ)}`.
pub fn bound_sgd_proj(p: &AlgoParams, tau: u64) -> Result<CompositeBound> {
    let eta = p.check_constrained_step()?;
    let t = p.steps()?;
    let h = check_tau(tau, t)?;
    let (rate, q, d, sigma) = (
        p.per_batch_rate()?,
        p.sample_rate()?,
        p.diameter()?,
        p.sigma()?,
    );
    Ok(CompositeBound {
        factors: vec![
            Factor::Gdp {
                mu: std::f64::consts::SQRT_2 * d / (eta * sigma * (h as f64).sqrt()),
            },
            Factor::SubsampledGdp {
                mu: 2.0 * std::f64::consts::SQRT_2 * rate,
                p: q,
                multiplicity: h,
            },
        ],
    })
}

/// `e^{μ²}Φ(1.5μ) + 3Φ(−0.5μ) − 2`, the per-step variance term of the
/// central limit for subsampled Gaussians.
fn clt_kernel(mu: f64) -> f64 {
    ((mu * mu).exp() * normal::cdf(1.5 * mu) + 3.0 * normal::cdf(-0.5 * mu) - 2.0).max(0.0)
}

/// Central-limit approximation of `C_p(G(μ))^{⊗t}`:
/// `G(√2·p√t·√(e^{μ²}Φ(1.5μ) + 3Φ(−0.5μ) − 2))`.
pub fn clt_subsampled(mu: f64, p: f64, t: u64) -> Result<GdpParam> {
    GdpParam::new(mu)?;
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("subsampling rate must lie in [0, 1], got {p}"));
    }
    GdpParam::new(std::f64::consts::SQRT_2 * p * (t as f64).sqrt() * clt_kernel(mu).sqrt())
}

/// Evaluates a one-dimensional objective at the floor and ceiling of a
/// continuous minimiser clamped to `[1, t]`, keeping the better one.
fn round_horizon(x: f64, t: u64, mu_of: impl Fn(f64) -> f64) -> (u64, GdpParam) {
    let x = if x.is_finite() {
        x.clamp(1.0, t as f64)
    } else {
        t as f64
    };
    let mut best = (0, f64::INFINITY);
    for h in [x.floor(), x.ceil()] {
        let h = h.clamp(1.0, t as f64);
        let mu = mu_of(h);
        if mu < best.1 {
            best = (h as u64, mu);
        }
    }
    (
        best.0,
        GdpParam::new(best.1).expect("objective is non-negative"),
    )
}

/// Approximate strongly convex stochastic bound with the horizon `t − τ`
/// chosen to minimise `8(L/(bσ)·c^{t−τ+1}/(1−c))² + 2(b/n)²(t−τ)·K`.
pub fn clt_sgd_sc(p: &AlgoParams) -> Result<(u64, GdpParam)> {
    let c = p.contraction()?;
    let t = p.steps()?;
    let (rate, q) = (p.per_batch_rate()?, p.sample_rate()?);
    let a = 8.0 * (rate * c / (1.0 - c)).powi(2);
    let b = 2.0 * q * q * clt_kernel(2.0 * rate);
    let mu_of = |h: f64| (a * c.powf(2.0 * h) + b * h).sqrt();
    if a == 0.0 || b == 0.0 {
        return Ok(round_horizon(1.0, t, mu_of));
    }
    let x = (b / (2.0 * a * (1.0 / c).ln())).ln() / (2.0 * c.ln());
    Ok(round_horizon(x, t, mu_of))
}

/// Approximate constrained stochastic bound with the horizon
/// `t − τ = Dn/(bησ√K)` minimising `2D²/(η²σ²(t−τ)) + 2(b/n)²(t−τ)·K`.
pub fn clt_sgd_proj(p: &AlgoParams) -> Result<(u64, GdpParam)> {
    let eta = p.check_constrained_step()?;
    let t = p.steps()?;
    let (rate, q, d, sigma) = (
        p.per_batch_rate()?,
        p.sample_rate()?,
        p.diameter()?,
        p.sigma()?,
    );
    if d == 0.0 {
        return Err(Error::InvalidParams(
            "the approximate constrained bound needs D > 0".into(),
        ));
    }
    let k = clt_kernel(2.0 * std::f64::consts::SQRT_2 * rate);
    let mu_of =
        |h: f64| (2.0 * d * d / (eta * eta * sigma * sigma * h) + 2.0 * q * q * h * k).sqrt();
    if k == 0.0 {
        return Ok(round_horizon(t as f64, t, mu_of));
    }
    let x = d / (q * eta * sigma * k.sqrt());
    Ok(round_horizon(x, t, mu_of))
}

/// Exponential mechanism on an `m`-strongly convex, `L`-sensitive loss:
/// `G(L/√m)`.
pub fn expmech_sc(l: f64, m: f64) -> Result<GdpParam> {
    let l = non_negative(l, "L")?;
    let m = positive(m, "m")?;
    GdpParam::new(l / m.sqrt())
}

fn lmc_contraction(m: f64, eta: f64) -> Result<f64> {
    let c = (1.0 - eta * m).abs();
    if !(c < 1.0) {
        return Err(Error::InvalidParams(format!(
            "LMC needs 0 < eta*m < 2, got {}",
            eta * m
        )));
    }
    Ok(c)
}

/// Langevin Monte Carlo after `t` steps: the strongly convex full-batch bound
/// with `n = 1` and noise rate `√(2/η)`.
pub fn lmc_sc(l: f64, m: f64, eta: f64, t: u64) -> Result<GdpParam> {
    let (l, m, eta) = (
        non_negative(l, "L")?,
        positive(m, "m")?,
        positive(eta, "eta")?,
    );
    let c = lmc_contraction(m, eta)?;
    if t == 0 {
        return Err(Error::InvalidParams("`steps` must be at least 1".into()));
    }
    GdpParam::new(sc_sum_sq(c, 1.0, t as usize).sqrt() * l * (eta / 2.0).sqrt())
}

/// Limit of [`lmc_sc`] as `t → ∞`; equals `√((2−ηm)/2)·L/√m` for `ηm ≤ 1`.
pub fn lmc_stationary_sc(l: f64, m: f64, eta: f64) -> Result<GdpParam> {
    let (l, m, eta) = (
        non_negative(l, "L")?,
        positive(m, "m")?,
        non_negative(eta, "eta")?,
    );
    if eta == 0.0 {
        return expmech_sc(l, m);
    }
    lmc_contraction(m, eta)?;
    // 1 ± c written without cancellation.
    let x = eta * m;
    let ratio = if x <= 1.0 {
        (2.0 - x) / x
    } else {
        x / (2.0 - x)
    };
    GdpParam::new(ratio.sqrt() * l * (eta / 2.0).sqrt())
}

/// Exponential mechanism on a convex loss over a set of diameter `D`:
/// `G(2√(LD))`, or the stationary LMC value `G(√(4LD + 2ηL²))` when a step
/// size is given.
pub fn expmech_convex(l: f64, d: f64, eta: Option<f64>) -> Result<GdpParam> {
    let (l, d) = (non_negative(l, "L")?, non_negative(d, "D")?);
    let eta = non_negative(eta.unwrap_or(0.0), "eta")?;
    GdpParam::new((4.0 * l * d + 2.0 * eta * l * l).sqrt())
}

/// Root `c*` of `e^{2x} = (1 − Φ(−√x))/Φ(−√x)`: for `LD` above it the
/// Gaussian bound `G(2√(LD))` beats the pure-DP bound of the exponential
/// mechanism.
pub fn expmech_pure_dp_threshold() -> f64 {
    let gap = |x: f64| 2.0 * x - (normal::cdf(x.sqrt()).ln() - normal::cdf(-x.sqrt()).ln());
    let (mut lo, mut hi) = (0.01, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `t ≥ 1` with `rate·√t ≥ μ`, i.e. `⌈(μ/rate)²⌉`.
pub fn crossover_step(convergent_mu: f64, composition_rate: f64) -> Result<u64> {
    let mu = non_negative(convergent_mu, "mu")?;
    let rate = positive(composition_rate, "rate")?;
    Ok(ceil_snap((mu / rate).powi(2)).max(1.0) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gd(c_eta: f64, t: u64, leff: f64) -> AlgoParams {
        // m = 1, M large enough that c = 1 − ηm.
        AlgoParams {
            kind: Some(Kind::Gd),
            eta: Some(c_eta),
            sigma: Some(1.0),
            n: Some(1),
            steps: Some(t),
            l_sens: Some(leff),
            m: Some(1.0),
            smooth: Some(1.0),
            ..Default::default()
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ceil_snap_examples() {
        assert_eq!(ceil_snap(80.000_000_000_01), 80.0);
        assert_eq!(ceil_snap(79.999_999_999_99), 80.0);
        assert_eq!(ceil_snap(80.001), 81.0);
        assert_eq!(ceil_snap(0.0), 0.0);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("GD".parse::<Kind>().unwrap(), Kind::Gd);
        assert_eq!(serde_json::from_str::<Kind>("\"SGD\"").unwrap(), Kind::Sgd);
        assert_eq!(serde_json::from_str::<Kind>("\"cgd\"").unwrap(), Kind::Cgd);
        assert!("adam".parse::<Kind>().is_err());
    }

    #[test]
    fn params_json_field_names() {
        let text = r#"{"kind":"gd","eta":0.05,"sigma":1,"n":1,"steps":160,"L":0.1,"m":1,"M":10}"#;
        let p: AlgoParams = serde_json::from_str(text).unwrap();
        assert_eq!(p.l_sens, Some(0.1));
        assert_eq!(p.smooth, Some(10.0));
        assert!((bound_gd_sc(&p).unwrap().mu() - 0.624_329_486_0).abs() < 1e-9);
        assert!(serde_json::from_str::<AlgoParams>(r#"{"c":0.5}"#).is_err());
    }

    #[test]
    fn composition_examples() {
        let p = gd(0.08, 100, 0.1);
        assert!(close(bound_gd_composition(&p).unwrap().mu(), 1.0, 1e-15));
        let p1 = gd(0.08, 1, 0.1);
        assert!(close(bound_gd_composition(&p1).unwrap().mu(), 0.1, 1e-15));
        let p0 = AlgoParams {
            l_sens: Some(0.0),
            ..p
        };
        assert_eq!(bound_gd_composition(&p0).unwrap().mu(), 0.0);
        let missing = AlgoParams {
            sigma: None,
            ..gd(0.08, 1, 0.1)
        };
        assert!(
            matches!(bound_gd_composition(&missing), Err(Error::InvalidParams(m)) if m.contains("sigma"))
        );
    }

    #[test]
    fn gd_sc_examples() {
        assert!(close(
            bound_gd_sc(&gd(0.08, 10, 0.1)).unwrap().mu(),
            0.308,
            5e-4
        ));
        assert!(close(
            bound_gd_sc(&gd(0.08, 1, 0.1)).unwrap().mu(),
            0.1,
            1e-15
        ));
        let limit = 0.1 * (1.92f64 / 0.08).sqrt();
        assert!(close(
            bound_gd_sc(&gd(0.08, 1000, 0.1)).unwrap().mu(),
            limit,
            1e-12
        ));
        assert!(close(limit, 0.490, 5e-4));
    }

    #[test]
    fn contraction_validation() {
        let base = gd(0.08, 10, 0.1);
        let flat = AlgoParams {
            m: Some(0.0),
            ..base.clone()
        };
        assert!(bound_gd_sc(&flat).is_err());
        let too_big = AlgoParams {
            eta: Some(2.5),
            smooth: Some(1.0),
            ..base.clone()
        };
        let err = bound_gd_sc(&too_big).unwrap_err().to_string();
        assert!(err.contains("eta < 2/M"), "{err}");
        let no_m = AlgoParams { m: None, ..base };
        assert!(bound_gd_sc(&no_m).unwrap_err().to_string().contains("`m`"));
    }

    fn gd_proj(ln: f64, eta: f64) -> AlgoParams {
        AlgoParams {
            kind: Some(Kind::Gd),
            eta: Some(eta),
            sigma: Some(8.0),
            n: Some(1),
            steps: Some(100_000),
            l_sens: Some(ln),
            diameter: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn gd_proj_examples() {
        assert!(close(
            bound_gd_proj(&gd_proj(0.5, 0.1), None).unwrap().mu(),
            0.559,
            5e-4
        ));
        assert!(close(
            bound_gd_proj(&gd_proj(0.25, 0.2), None).unwrap().mu(),
            0.280,
            5e-4
        ));
        let flat = AlgoParams {
            diameter: Some(0.0),
            ..gd_proj(0.5, 0.1)
        };
        assert!(close(
            bound_gd_proj(&flat, None).unwrap().mu(),
            0.5 / 8.0,
            1e-15
        ));
        let short = AlgoParams {
            steps: Some(10),
            ..gd_proj(0.5, 0.1)
        };
        assert!(bound_gd_proj(&short, None).is_err());
        let general = bound_gd_proj(&short, Some(6)).unwrap().mu();
        assert!(close(general, (0.5 * 2.0 + 1.0 / (0.1 * 2.0)) / 8.0, 1e-15));
        assert!(bound_gd_proj(&short, Some(10)).is_err());
        let silent = AlgoParams {
            l_sens: Some(0.0),
            ..gd_proj(0.5, 0.1)
        };
        assert_eq!(bound_gd_proj(&silent, None).unwrap().mu(), 0.0);
    }

    #[test]
    fn crossover_examples() {
        let p = gd_proj(0.5, 0.1);
        let mu = bound_gd_proj(&p, None).unwrap().mu();
        assert_eq!(crossover_step(mu, 0.5 / 8.0).unwrap(), 80);
        let p = gd_proj(0.25, 0.2);
        let mu = bound_gd_proj(&p, None).unwrap().mu();
        assert_eq!(crossover_step(mu, 0.25 / 8.0).unwrap(), 80);
        assert_eq!(crossover_step(0.3, 0.3).unwrap(), 1);
        assert_eq!(crossover_step(0.0, 0.3).unwrap(), 1);
        assert!(crossover_step(1.0, 0.0).is_err());
    }

    fn cgd(l: u64, c: f64, e: u64, rate: f64) -> AlgoParams {
        AlgoParams {
            kind: Some(Kind::Cgd),
            eta: Some(1.0 - c),
            sigma: Some(1.0),
            n: Some(l),
            b: Some(1),
            epochs: Some(e),
            l_sens: Some(rate),
            m: Some(1.0),
            smooth: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn cgd_examples() {
        assert!(close(
            bound_cgd_composition(&cgd(10, 0.98, 5, 0.2)).unwrap().mu(),
            0.2 * 5f64.sqrt(),
            1e-15
        ));
        assert!(close(
            bound_cgd_composition(&cgd(10, 0.98, 1, 0.2)).unwrap().mu(),
            0.2,
            1e-15
        ));
        assert!(close(
            bound_cgd_sc(&cgd(10, 0.98, 5, 0.2)).unwrap().mu(),
            0.229,
            5e-4
        ));
        assert!(close(
            bound_cgd_sc(&cgd(40, 0.995, 500, 0.2)).unwrap().mu(),
            0.219,
            5e-4
        ));
        assert_eq!(bound_cgd_sc(&cgd(10, 0.98, 1, 0.2)).unwrap().mu(), 0.2);
        let bad = AlgoParams {
            b: Some(3),
            ..cgd(10, 0.98, 5, 0.2)
        };
        assert!(bound_cgd_sc(&bad)
            .unwrap_err()
            .to_string()
            .contains("divide"));
        let mismatch = AlgoParams {
            steps: Some(7),
            ..cgd(10, 0.98, 5, 0.2)
        };
        assert!(bound_cgd_sc(&mismatch).is_err());
        let by_steps = AlgoParams {
            epochs: None,
            steps: Some(50),
            ..cgd(10, 0.98, 5, 0.2)
        };
        assert_eq!(by_steps.epochs().unwrap(), 5);
    }

    fn cgd_proj(l: u64, lb: f64, eta: f64) -> AlgoParams {
        AlgoParams {
            kind: Some(Kind::Cgd),
            eta: Some(eta),
            sigma: Some(3.0),
            n: Some(l),
            b: Some(1),
            epochs: Some(10_000),
            l_sens: Some(lb),
            diameter: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn cgd_proj_examples() {
        assert!(close(
            bound_cgd_proj(&cgd_proj(20, 0.5, 0.02), None).unwrap().mu(),
            0.764,
            5e-4
        ));
        let mu = bound_cgd_proj(&cgd_proj(10, 1.0, 0.04), None).unwrap().mu();
        assert!(close(mu, 11f64.sqrt() / 3.0, 1e-12));
        let flat = AlgoParams {
            diameter: Some(0.0),
            ..cgd_proj(10, 1.0, 0.04)
        };
        assert!(close(
            bound_cgd_proj(&flat, None).unwrap().mu(),
            1.0 / 3.0,
            1e-15
        ));
        let short = AlgoParams {
            epochs: Some(3),
            ..cgd_proj(10, 1.0, 0.04)
        };
        assert!(bound_cgd_proj(&short, None).is_err());
        assert!(bound_cgd_proj(&short, Some(1)).is_ok());
        assert!(bound_cgd_proj(&short, Some(3)).is_err());
    }

    fn sgd(tau_steps: u64) -> AlgoParams {
        AlgoParams {
            kind: Some(Kind::Sgd),
            eta: Some(0.1),
            sigma: Some(2.0),
            n: Some(1000),
            b: Some(10),
            steps: Some(tau_steps),
            l_sens: Some(10.0),
            m: Some(1.0),
            smooth: Some(5.0),
            diameter: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn sgd_structures() {
        let one = bound_sgd_composition(&sgd(1)).unwrap();
        assert_eq!(
            one.factors,
            vec![Factor::SubsampledGdp {
                mu: 0.5,
                p: 0.01,
                multiplicity: 1
            }]
        );

        let p = sgd(50);
        let c = p.contraction().unwrap();
        let last = bound_sgd_sc(&p, 49).unwrap();
        assert_eq!(last.factors.len(), 3);
        match last.factors[0] {
            Factor::Gdp { mu } => {
                let want = 2.0 * 2f64.sqrt() * 0.5 * (c * c - c.powi(50)) / (1.0 - c);
                assert!(close(mu, want, 1e-13 * want));
            }
            _ => panic!("first factor must be Gaussian"),
        }
        assert_eq!(last.factors[2].multiplicity(), 1);
        assert_eq!(
            bound_sgd_sc(&p, 0).unwrap().factors[0],
            Factor::Gdp { mu: 0.0 }
        );
        assert!(bound_sgd_sc(&p, 50).is_err());

        let proj = bound_sgd_proj(&p, 49).unwrap();
        assert_eq!(proj.factors.len(), 2);
        let flat = AlgoParams {
            diameter: Some(0.0),
            ..p.clone()
        };
        assert_eq!(
            bound_sgd_proj(&flat, 10).unwrap().factors[0],
            Factor::Gdp { mu: 0.0 }
        );
        assert!(bound_sgd_proj(&p, 0).unwrap().validate().is_ok());
    }

    #[test]
    fn clt_examples() {
        assert_eq!(clt_subsampled(0.0, 0.3, 100).unwrap().mu(), 0.0);
        // √2·√(e·Φ(1.5) + 3Φ(−0.5) − 2), evaluated independently.
        let v = clt_subsampled(1.0, 0.01, 10_000).unwrap().mu();
        assert!(close(v, 1.710_142_475_595_330_7, 1e-12));
    }

    #[test]
    fn clt_sgd_sc_is_locally_optimal() {
        for t in [10_000, 100_000] {
            let p = AlgoParams {
                steps: Some(t),
                ..sgd(t)
            };
            let c = p.contraction().unwrap();
            let (h, mu) = clt_sgd_sc(&p).unwrap();
            let (rate, q) = (0.5, 0.01);
            let k = clt_kernel(2.0 * rate);
            let f = |h: f64| {
                (8.0 * (rate * c.powf(h + 1.0) / (1.0 - c)).powi(2) + 2.0 * q * q * h * k).sqrt()
            };
            assert!(close(mu.mu(), f(h as f64), 1e-14));
            assert!(mu.mu() <= f((h - 1) as f64) && mu.mu() <= f((h + 1) as f64));
        }
    }

    #[test]
    fn clt_sgd_proj_is_locally_optimal() {
        let p = sgd(100_000);
        let (h, mu) = clt_sgd_proj(&p).unwrap();
        let k = clt_kernel(2.0 * 2f64.sqrt() * 0.5);
        let f = |h: f64| (2.0 / (0.01 * 4.0 * h) + 2.0 * 1e-4 * h * k).sqrt();
        assert!(close(mu.mu(), f(h as f64), 1e-14));
        assert!(mu.mu() <= f((h - 1) as f64) && mu.mu() <= f((h + 1) as f64));
        // Convex in the horizon.
        let vals: Vec<f64> = (1..200).map(|h| f(h as f64 * 10.0).powi(2)).collect();
        assert!(vals.windows(3).all(|w| w[0] + w[2] >= 2.0 * w[1] - 1e-12));
        let flat = AlgoParams {
            diameter: Some(0.0),
            ..p
        };
        assert!(clt_sgd_proj(&flat).is_err());
    }

    #[test]
    fn exponential_mechanism_examples() {
        assert_eq!(expmech_sc(1.0, 1.0).unwrap().mu(), 1.0);
        assert_eq!(lmc_stationary_sc(2.0, 4.0, 0.0).unwrap().mu(), 1.0);
        assert!(close(
            lmc_stationary_sc(2.0, 4.0, 1e-12).unwrap().mu(),
            1.0,
            1e-9
        ));
        let (l, m, eta) = (1.5, 2.0, 0.1);
        let want = ((2.0 - eta * m) / 2.0f64).sqrt() * l / m.sqrt();
        assert!(close(
            lmc_stationary_sc(l, m, eta).unwrap().mu(),
            want,
            1e-14
        ));
        assert!(close(
            lmc_sc(l, m, eta, 1_000_000).unwrap().mu(),
            want,
            1e-9
        ));
        assert_eq!(expmech_convex(1.0, 1.0, None).unwrap().mu(), 2.0);
        assert_eq!(expmech_convex(1.0, 1.0, Some(0.0)).unwrap().mu(), 2.0);
        assert!(close(
            expmech_convex(2.0, 0.5, Some(0.1)).unwrap().mu(),
            4.8f64.sqrt(),
            1e-15
        ));
    }

    #[test]
    fn pure_dp_threshold() {
        let c = expmech_pure_dp_threshold();
        assert!((0.675..=0.678).contains(&c));
        let gap = |x: f64| (2.0 * x).exp() - normal::cdf(x.sqrt()) / normal::cdf(-x.sqrt());
        assert!(gap(c - 1e-6) < 0.0 && gap(c + 1e-6) > 0.0);
        assert!(gap(0.1) < 0.0);
    }
}
