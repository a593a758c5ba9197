//! Independent checks: explicit worst-case Gaussian pairs, Monte-Carlo
//! simulation of the noisy optimizers on quadratic losses, empirical
//! tradeoff estimation and a brute-force schedule optimizer.
//!
//! Empirical curves are estimates with a confidence band. They are never
//! certified bounds.

use crate::accountant::Kind;
use crate::error::{domain, Error, Result};
use crate::normal;
use crate::schedule::recurse_schedule;
use crate::tradeoff::{convexify_onto, gdp_eval, GdpParam, TradeoffCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Confidence level of the uniform bands.
pub const CONFIDENCE: f64 = 0.99;
/// Trials per random stream. Fixed so results do not depend on the thread
/// count.
pub const CHUNK: usize = 4096;
/// Smallest histogram size.
pub const MIN_BINS: usize = 64;
/// Inflation of the band for histogram estimates, whose binning is a
/// heuristic.
pub const HISTOGRAM_CI_FACTOR: f64 = 1.5;
/// Points of the uniform grid empirical curves are reported on.
pub const EMPIRICAL_GRID: usize = 1001;

/// Law of the terminal iterate of full-batch noisy GD on the worst-case
/// quadratic pair, returned as the Gaussian DP parameter of the pair
/// `N(0, v)` vs `N((1−cᵗ)/(1−c)·s, v)` with `v = (1−c^{2t})/(1−c²)·σ²`.
pub fn worst_case_gd_sc_curve(c: f64, s: f64, sigma: f64, t: u64) -> Result<GdpParam> {
    if !(c > 0.0 && c < 1.0) {
        return domain(format!("contraction must lie in (0, 1), got {c}"));
    }
    if !(sigma > 0.0) || !(s >= 0.0) || t == 0 {
        return domain("need sigma > 0, s >= 0 and t >= 1");
    }
    let ti = t as i32;
    let mean = (1.0 - c.powi(ti)) / (1.0 - c) * s;
    let var = (1.0 - c.powi(2 * ti)) / (1.0 - c * c) * sigma * sigma;
    GdpParam::new(mean / var.sqrt())
}

fn default_dimension() -> usize {
    1
}

/// A simulated pair of runs on adjacent datasets.
///
/// Every sample loss is `m/2·‖x‖²`; on the second dataset the distinguished
/// sample's gradient is shifted by `−L·e₁`. The update is
/// `x ← Π(x − η(ḡ_B(x) + Z))` with `Z ~ N(0, σ²I)` and `Π` the projection
/// onto the ball of diameter `D` when one is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub kind: Kind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub eta: f64,
    pub sigma: f64,
    pub n: u64,
    pub b: u64,
    #[serde(rename = "L")]
    pub l_sens: f64,
    pub m: f64,
    #[serde(rename = "D", default)]
    pub diameter: Option<f64>,
    pub steps: u64,
    pub trials: usize,
    pub seed: u64,
    /// Batch holding the distinguished sample in cyclic runs.
    #[serde(default)]
    pub sensitive_batch: u64,
    /// Share the noise stream between the two runs of a trial.
    #[serde(default)]
    pub coupled: bool,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if !(self.eta > 0.0) || !(self.sigma >= 0.0) || !(self.l_sens >= 0.0) || !(self.m >= 0.0) {
            return bad("need eta > 0, sigma >= 0, L >= 0 and m >= 0".into());
        }
        if self.n == 0 || self.b == 0 || self.b > self.n {
            return bad(format!(
                "need 1 <= b <= n, got b = {}, n = {}",
                self.b, self.n
            ));
        }
        if self.kind == Kind::Gd && self.b != self.n {
            return bad("full-batch runs need b = n".into());
        }
        if self.kind == Kind::Cgd
            && (!self.n.is_multiple_of(self.b) || self.sensitive_batch >= self.n / self.b)
        {
            return bad("cyclic runs need b | n and sensitive_batch < n/b".into());
        }
        if let Some(d) = self.diameter {
            if !(d >= 0.0) {
                return bad(format!("diameter must be >= 0, got {d}"));
            }
        }
        Ok(())
    }
}

/// Terminal iterates of one process, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub dimension: usize,
    pub values: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.values.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dimension)
    }
}

/// Terminal iterates on the original (`p`) and the adjacent (`q`) dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SimPair {
    pub p: Samples,
    pub q: Samples,
}

impl SimPair {
    /// Writes `trial,x_final,process` rows (first coordinate only).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "x_final", "process"])?;
        for (name, s) in [("p", &self.p), ("q", &self.q)] {
            for (i, row) in s.rows().enumerate() {
                w.write_record([
                    i.to_string(),
                    crate::io::fmt_sig17(row[0]),
                    name.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn project(x: &mut [f64], radius: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let scale = radius / norm;
        x.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Runs one trajectory and writes the terminal iterate into `x`.
fn run(
    spec: &SimSpec,
    shifted: bool,
    noise: &mut ChaCha8Rng,
    batches: &mut ChaCha8Rng,
    x: &mut [f64],
) {
    x.iter_mut().for_each(|v| *v = 0.0);
    let c = 1.0 - spec.eta * spec.m;
    let shift = spec.eta * spec.l_sens / spec.b as f64;
    let include_p = spec.b as f64 / spec.n as f64;
    let l = spec.n / spec.b;
    let radius = spec.diameter.map(|d| d / 2.0);
    for k in 0..spec.steps {
        let hit = match spec.kind {
            Kind::Gd => true,
            Kind::Cgd => k % l == spec.sensitive_batch,
            Kind::Sgd => batches.gen::<f64>() < include_p,
        };
        for (j, v) in x.iter_mut().enumerate() {
            let z: f64 = noise.sample(StandardNormal);
            *v = c * *v - spec.eta * spec.sigma * z;
            if shifted && hit && j == 0 {
                *v += shift;
            }
        }
        if let Some(r) = radius {
            project(x, r);
        }
    }
}

/// Simulates `trials` independent runs on each dataset. Chunk `i` of
/// [`CHUNK`] trials draws from streams derived from `(seed, i)`, so output
/// is reproducible and independent of the thread count. With
/// `coupled = true` both runs of a trial share their noise and batches.
pub fn simulate(spec: &SimSpec) -> Result<SimPair> {
    spec.validate()?;
    let d = spec.dimension;
    let chunks = spec.trials.div_ceil(CHUNK);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let count = CHUNK.min(spec.trials - i * CHUNK);
            let base = 4 * i as u64;
            let (mut np, mut bp) = (stream(spec.seed, base), stream(spec.seed, base + 1));
            let (mut nq, mut bq) = if spec.coupled {
                (stream(spec.seed, base), stream(spec.seed, base + 1))
            } else {
                (stream(spec.seed, base + 2), stream(spec.seed, base + 3))
            };
            let mut p = vec![0.0; count * d];
            let mut q = vec![0.0; count * d];
            for (xp, xq) in p.chunks_exact_mut(d).zip(q.chunks_exact_mut(d)) {
                run(spec, false, &mut np, &mut bp, xp);
                run(spec, true, &mut nq, &mut bq, xq);
            }
            (p, q)
        })
        .collect();
    let (mut p, mut q) = (
        Vec::with_capacity(spec.trials * d),
        Vec::with_capacity(spec.trials * d),
    );
    for (a, b) in parts {
        p.extend(a);
        q.extend(b);
    }
    Ok(SimPair {
        p: Samples {
            dimension: d,
            values: p,
        },
        q: Samples {
            dimension: d,
            values: q,
        },
    })
}

/// How the rejection region of the estimated tests is chosen.
#[derive(Clone, Copy)]
pub enum LrMethod<'a> {
    /// Threshold a statistic that is non-decreasing in the likelihood ratio
    /// `dQ/dP`.
    ExactLr(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
    /// One-dimensional histogram density ratio; Freedman–Diaconis bins
    /// (at least [`MIN_BINS`]) unless a count is given.
    HistogramLr { bins: Option<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    ExactLr,
    HistogramLr,
}

/// Estimated tradeoff curve with a uniform confidence half-width.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalCurve {
    pub curve: TradeoffCurve,
    pub ci_halfwidth: f64,
    pub method: MethodKind,
}

/// Dvoretzky–Kiefer–Wolfowitz half-width for `n` samples at [`CONFIDENCE`].
pub fn dkw_halfwidth(n: usize) -> f64 {
    ((2.0 / (1.0 - CONFIDENCE)).ln() / (2.0 * n as f64)).sqrt()
}

fn uniform_grid() -> Vec<f64> {
    (0..EMPIRICAL_GRID)
        .map(|i| i as f64 / (EMPIRICAL_GRID - 1) as f64)
        .collect()
}

/// Error pairs of the tests `{T > θ}` for every threshold `θ`, from both
/// statistic samples sorted ascending.
fn threshold_points(tp: &[f64], tq: &[f64]) -> Vec<(f64, f64)> {
    let (np, nq) = (tp.len() as f64, tq.len() as f64);
    let mut pts = Vec::with_capacity(tp.len() + tq.len() + 2);
    pts.push((1.0, 0.0));
    let (mut i, mut j) = (0, 0);
    while i < tp.len() || j < tq.len() {
        let theta = match (tp.get(i), tq.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < tp.len() && tp[i] <= theta {
            i += 1;
        }
        while j < tq.len() && tq[j] <= theta {
            j += 1;
        }
        // Reject P when T > θ.
        pts.push((1.0 - i as f64 / np, j as f64 / nq));
    }
    pts.push((0.0, 1.0));
    pts
}

/// Freedman–Diaconis bin count for pooled one-dimensional data.
fn fd_bins(sorted: &[f64]) -> usize {
    let n = sorted.len();
    let q = |f: f64| sorted[((n - 1) as f64 * f).round() as usize];
    let iqr = q(0.75) - q(0.25);
    let range = sorted[n - 1] - sorted[0];
    if !(iqr > 0.0) || !(range > 0.0) {
        return MIN_BINS;
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    ((range / width).ceil() as usize).max(MIN_BINS)
}

/// Histogram log-ratio statistic fitted on one sample half. Unseen bins
/// get add-one smoothing, so the statistic is finite everywhere.
fn histogram_statistic(fp: &[f64], fq: &[f64], bins: Option<usize>) -> impl Fn(f64) -> f64 {
    let mut pooled: Vec<f64> = fp.iter().chain(fq).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let k = bins.unwrap_or_else(|| fd_bins(&pooled)).max(1);
    let (lo, hi) = (pooled[0], pooled[pooled.len() - 1]);
    let width = if hi > lo { (hi - lo) / k as f64 } else { 1.0 };
    let bin = move |x: f64| (((x - lo) / width).max(0.0) as usize).min(k - 1);
    let (mut cp, mut cq) = (vec![1.0; k], vec![1.0; k]);
    fp.iter().for_each(|&x| cp[bin(x)] += 1.0);
    fq.iter().for_each(|&x| cq[bin(x)] += 1.0);
    let (np, nq) = (fp.len() as f64 + k as f64, fq.len() as f64 + k as f64);
    let score: Vec<f64> = cp
        .iter()
        .zip(&cq)
        .map(|(a, b)| (b / nq).ln() - (a / np).ln())
        .collect();
    move |x| score[bin(x)]
}

/// Estimates `T(P, Q)` from samples of both distributions.
///
/// The band is the DKW half-width for the smaller sample, inflated by
/// [`HISTOGRAM_CI_FACTOR`] for histogram estimates. DKW bounds the error
/// rates of every threshold test, i.e. both coordinates of each curve point,
/// so the guarantee is a Lévy band: for exact likelihood-ratio statistics
/// the true curve `f` satisfies `f(α + ci) − ci ≤ f̂(α) ≤ f(α − ci) + ci`
/// with probability about [`CONFIDENCE`]². Any fixed statistic yields tests
/// whose errors lie on or above `f`, so the lower half of the band holds
/// for histogram estimates too.
pub fn empirical_tradeoff(
    p: &Samples,
    q: &Samples,
    method: LrMethod<'_>,
) -> Result<EmpiricalCurve> {
    if p.is_empty() || q.is_empty() {
        return domain("both sample sets must be nonempty");
    }
    if p.dimension != q.dimension {
        return domain("sample sets have different dimensions");
    }
    let ci = dkw_halfwidth(p.len().min(q.len()));
    let (points, ci, kind) = match method {
        LrMethod::ExactLr(stat) => {
            let mut tp: Vec<f64> = p.rows().map(stat).collect();
            let mut tq: Vec<f64> = q.rows().map(stat).collect();
            if tp.iter().chain(&tq).any(|v| v.is_nan()) {
                return domain("likelihood-ratio statistic returned NaN");
            }
            tp.sort_by(f64::total_cmp);
            tq.sort_by(f64::total_cmp);
            (threshold_points(&tp, &tq), ci, MethodKind::ExactLr)
        }
        LrMethod::HistogramLr { bins } => {
            if p.dimension > 1 {
                return Err(Error::Unsupported(
                    "histogram estimates are one-dimensional only".into(),
                ));
            }
            if p.len() < 2 || q.len() < 2 {
                return domain("histogram estimates need at least two samples per distribution");
            }
            // The ratio is fitted on the first half and the errors of the
            // resulting tests are counted on the second, so the estimate is
            // that of a fixed test.
            let (fp, ep) = p.values.split_at(p.len() / 2);
            let (fq, eq) = q.values.split_at(q.len() / 2);
            let stat = histogram_statistic(fp, fq, bins);
            let mut tp: Vec<f64> = ep.iter().map(|&x| stat(x)).collect();
            let mut tq: Vec<f64> = eq.iter().map(|&x| stat(x)).collect();
            tp.sort_by(f64::total_cmp);
            tq.sort_by(f64::total_cmp);
            let ci = dkw_halfwidth(ep.len().min(eq.len())) * HISTOGRAM_CI_FACTOR;
            (threshold_points(&tp, &tq), ci, MethodKind::HistogramLr)
        }
    };
    Ok(EmpiricalCurve {
        curve: convexify_onto(&points, uniform_grid())?,
        ci_halfwidth: ci,
        method: kind,
    })
}

/// Result of comparing an estimate against a reference curve on a set of
/// type-I errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandCheck {
    pub holds: bool,
    /// Largest distance by which the estimate leaves the band (≤ 0 when it
    /// holds).
    pub max_excess: f64,
    pub ci_halfwidth: f64,
}

impl EmpiricalCurve {
    /// `|f̂(α) − f(α)| ≤ ci` at every given α.
    pub fn within_vertical_band(
        &self,
        reference: impl Fn(f64) -> f64,
        alphas: &[f64],
    ) -> BandCheck {
        let ci = self.ci_halfwidth;
        let excess = alphas
            .iter()
            .map(|&a| (self.curve.eval(a) - reference(a)).abs() - ci)
            .fold(f64::NEG_INFINITY, f64::max);
        BandCheck {
            holds: excess <= 0.0,
            max_excess: excess,
            ci_halfwidth: ci,
        }
    }

    /// `f(α + ci) − ci ≤ f̂(α) ≤ f(α − ci) + ci` at every given α, with `f`
    /// clamped to the unit interval.
    pub fn within_levy_band(&self, reference: impl Fn(f64) -> f64, alphas: &[f64]) -> BandCheck {
        let ci = self.ci_halfwidth;
        let f = |a: f64| reference(a.clamp(0.0, 1.0));
        let excess = alphas
            .iter()
            .map(|&a| {
                let est = self.curve.eval(a);
                (f(a + ci) - ci - est).max(est - f(a - ci) - ci)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        BandCheck {
            holds: excess <= 0.0,
            max_excess: excess,
            ci_halfwidth: ci,
        }
    }

    /// `f̂(α) ≥ f(α + ci) − ci` at every given α: the lower half of the
    /// band, i.e. the bound `f` is not contradicted by the estimate.
    pub fn above(&self, bound: impl Fn(f64) -> f64, alphas: &[f64]) -> BandCheck {
        let ci = self.ci_halfwidth;
        let excess = alphas
            .iter()
            .map(|&a| bound((a + ci).min(1.0)) - ci - self.curve.eval(a))
            .fold(f64::NEG_INFINITY, f64::max);
        BandCheck {
            holds: excess <= 0.0,
            max_excess: excess,
            ci_halfwidth: ci,
        }
    }
}

/// `α ∈ {0.05, 0.10, …, 0.95}`.
pub fn check_alphas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// A bounded one-dimensional law for the shift `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShiftLaw {
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

impl ShiftLaw {
    pub fn point(w: f64) -> Self {
        ShiftLaw::Discrete {
            atoms: vec![w],
            weights: vec![1.0],
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            ShiftLaw::Discrete { atoms, .. } => atoms.iter().fold(0.0, |m, a| m.max(a.abs())),
            ShiftLaw::Uniform { lo, hi } => lo.abs().max(hi.abs()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ShiftLaw::Discrete { atoms, weights } => {
                if atoms.is_empty()
                    || atoms.len() != weights.len()
                    || weights.iter().any(|w| !(*w >= 0.0))
                {
                    return domain("discrete law needs matching atoms and non-negative weights");
                }
                if !(weights.iter().sum::<f64>() > 0.0) {
                    return domain("discrete law needs positive total weight");
                }
            }
            ShiftLaw::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return domain("uniform law needs lo < hi");
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ShiftLaw::Discrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                for (a, w) in atoms.iter().zip(weights) {
                    if u < *w {
                        return *a;
                    }
                    u -= w;
                }
                *atoms.last().unwrap()
            }
            ShiftLaw::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
        }
    }

    /// `log(dQ/dP)(x)` for `Q = law(W + Z)`, `P = N(0, σ²)`.
    fn log_ratio(&self, x: f64, sigma: f64) -> f64 {
        match self {
            ShiftLaw::Discrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let terms: Vec<f64> = atoms
                    .iter()
                    .zip(weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(a, w)| (w / total).ln() + (x * a - 0.5 * a * a) / (sigma * sigma))
                    .collect();
                let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
            }
            ShiftLaw::Uniform { lo, hi } => {
                // q(x) = [Φ((x−lo)/σ) − Φ((x−hi)/σ)]·σ/(hi−lo)·φ_σ(x)/φ(x/σ)/σ.
                let (u, v) = ((x - lo) / sigma, (x - hi) / sigma);
                let mass = if v > 0.0 {
                    normal::sf(v) - normal::sf(u)
                } else {
                    normal::cdf(u) - normal::cdf(v)
                };
                mass.ln() + (sigma / (hi - lo)).ln() - normal::pdf(x / sigma).ln()
            }
        }
    }
}

/// Outcome of the Gaussian-shift check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftCheck {
    /// The estimate lies above the lower band of `G(s/σ)`.
    pub passes: bool,
    /// `min_α (f̂(α) − G(s/σ)(α))` over the check grid.
    pub margin: f64,
    pub ci_halfwidth: f64,
}

/// Checks empirically that `T(W + Z, Z) ≥ G(s/σ)` whenever `|W| ≤ s`, with
/// `Z ~ N(0, σ²)`, using `N` draws per distribution and the exact
/// likelihood ratio.
pub fn check_gdpinf(s: f64, sigma: f64, law: &ShiftLaw, n: usize, seed: u64) -> Result<ShiftCheck> {
    law.validate()?;
    if !(sigma > 0.0) || !(s >= 0.0) || n == 0 {
        return domain("need sigma > 0, s >= 0 and N >= 1");
    }
    if law.max_abs() > s * (1.0 + 1e-12) {
        return domain(format!("shift law is not bounded by s = {s}"));
    }
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let count = CHUNK.min(n - i * CHUNK);
            let mut rng = stream(seed, i as u64);
            let mut p = Vec::with_capacity(count);
            let mut q = Vec::with_capacity(count);
            for _ in 0..count {
                let z: f64 = rng.sample(StandardNormal);
                p.push(sigma * z);
                let w = law.sample(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                q.push(w + sigma * z);
            }
            (p, q)
        })
        .collect();
    let (p, q): (Vec<Vec<f64>>, Vec<Vec<f64>>) = parts.into_iter().unzip();
    let p = Samples {
        dimension: 1,
        values: p.concat(),
    };
    let q = Samples {
        dimension: 1,
        values: q.concat(),
    };
    let stat = |x: &[f64]| law.log_ratio(x[0], sigma);
    let est = empirical_tradeoff(&p, &q, LrMethod::ExactLr(&stat))?;
    let mu = s / sigma;
    let g = |a: f64| gdp_eval(mu, a).expect("valid");
    let alphas = check_alphas();
    let margin = alphas
        .iter()
        .map(|&a| est.curve.eval(a) - g(a))
        .fold(f64::INFINITY, f64::min);
    let passes = est.above(g, &alphas).holds;
    Ok(ShiftCheck {
        passes,
        margin,
        ci_halfwidth: est.ci_halfwidth,
    })
}

/// Best schedule found by [`brute_force_schedule`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForce {
    pub sum_sq: f64,
    /// `λ_1, …, λ_t` with `λ_t = 1`.
    pub lambdas: Vec<f64>,
}

fn schedule_cost(c: f64, s_seq: &[f64], lambdas: &[f64], z_start: f64) -> f64 {
    let mut z = z_start;
    let mut total = 0.0;
    for (s, lam) in s_seq.iter().zip(lambdas) {
        let u = c * z + s;
        total += (lam * u) * (lam * u);
        z = (1.0 - lam) * u;
    }
    total
}

/// Largest number of free shift weights [`brute_force_schedule`] accepts.
pub const BRUTE_FORCE_MAX_STEPS: usize = 12;

/// Minimises `Σa²` over the shift weights `λ ∈ [0,1]^{t−1}` (with `λ_t = 1`,
/// which closes the coupling) by multi-start coordinate descent.
///
/// With the other weights fixed the cost is a quadratic polynomial in each
/// `λ_k`, so every coordinate step is an exact three-point parabola
/// minimisation clamped to `[0, 1]`.
pub fn brute_force_schedule(
    c: f64,
    s_seq: &[f64],
    z_start: f64,
    restarts: usize,
    seed: u64,
) -> Result<BruteForce> {
    let t = s_seq.len();
    if t == 0 || t > BRUTE_FORCE_MAX_STEPS {
        return domain(format!(
            "brute force needs 1 <= t <= {BRUTE_FORCE_MAX_STEPS}, got {t}"
        ));
    }
    if !(c >= 0.0) || s_seq.iter().any(|s| !(*s >= 0.0)) || !(z_start >= 0.0) {
        return domain("need c >= 0, s_k >= 0 and z >= 0");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..restarts.max(1))
        .map(|r| {
            let mut lam: Vec<f64> = (0..t).map(|_| rng.gen::<f64>()).collect();
            if r == 0 {
                lam.iter_mut().for_each(|v| *v = 1.0 / t as f64);
            }
            lam[t - 1] = 1.0;
            lam
        })
        .collect();
    let best = starts
        .into_par_iter()
        .map(|mut lam| {
            let mut cost = schedule_cost(c, s_seq, &lam, z_start);
            for _ in 0..100_000 {
                let before = cost;
                for k in 0..t - 1 {
                    let mut at = |v: f64| {
                        lam[k] = v;
                        schedule_cost(c, s_seq, &lam, z_start)
                    };
                    let (f0, fh, f1) = (at(0.0), at(0.5), at(1.0));
                    // f(v) = f0 + βv + γv².
                    let gamma = 2.0 * (f1 - 2.0 * fh + f0);
                    let beta = f1 - f0 - gamma;
                    let mut v = if gamma > 0.0 {
                        (-beta / (2.0 * gamma)).clamp(0.0, 1.0)
                    } else if f1 < f0 {
                        1.0
                    } else {
                        0.0
                    };
                    let fv = at(v);
                    if fv > f0.min(f1) {
                        v = if f0 <= f1 { 0.0 } else { 1.0 };
                    }
                    lam[k] = v;
                    cost = schedule_cost(c, s_seq, &lam, z_start);
                }
                if before - cost <= 1e-16 * before.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            (cost, lam)
        })
        .reduce_with(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one start");
    // Sanity: the reported weights reproduce the reported cost.
    let sched = recurse_schedule(c, s_seq.to_vec(), best.1.clone(), z_start)?;
    debug_assert!((sched.sum_sq() - best.0).abs() <= 1e-12 * best.0.max(1.0));
    Ok(BruteForce {
        sum_sq: best.0,
        lambdas: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::sc_sum_sq;

    fn gd_spec(trials: usize) -> SimSpec {
        SimSpec {
            kind: Kind::Gd,
            dimension: 1,
            eta: 0.05,
            sigma: 1.0,
            n: 1,
            b: 1,
            l_sens: 0.1,
            m: 1.0,
            diameter: None,
            steps: 20,
            trials,
            seed: 7,
            sensitive_batch: 0,
            coupled: false,
        }
    }

    #[test]
    fn worst_case_examples() {
        let (c, t) = (0.9, 50);
        let mu = worst_case_gd_sc_curve(c, 1.0, 10.0, t).unwrap().mu();
        assert!((mu - sc_sum_sq(c, 1.0, t as usize).sqrt() / 10.0).abs() < 1e-14);
        assert!((worst_case_gd_sc_curve(0.5, 2.0, 4.0, 1).unwrap().mu() - 0.5).abs() < 1e-15);
        assert!((worst_case_gd_sc_curve(0.92, 0.1, 1.0, 10).unwrap().mu() - 0.308).abs() < 5e-4);
        assert!(worst_case_gd_sc_curve(1.0, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate(&gd_spec(5000)).unwrap();
        let b = simulate(&gd_spec(5000)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&SimSpec {
            seed: 8,
            ..gd_spec(5000)
        })
        .unwrap();
        assert_ne!(a.p.values, c.p.values);
    }

    #[test]
    fn unconstrained_moments_match() {
        let spec = gd_spec(200_000);
        let sim = simulate(&spec).unwrap();
        let c: f64 = 1.0 - spec.eta * spec.m;
        let t = spec.steps as i32;
        let var = (1.0 - c.powi(2 * t)) / (1.0 - c * c) * (spec.eta * spec.sigma).powi(2);
        let shift = (1.0 - c.powi(t)) / (1.0 - c) * spec.eta * spec.l_sens;
        let n = sim.p.len() as f64;
        for (s, want) in [(&sim.p, 0.0), (&sim.q, shift)] {
            let mean = s.values.iter().sum::<f64>() / n;
            let v = s.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(
                (mean - want).abs() < 4.0 * (var / n).sqrt(),
                "mean {mean} vs {want}"
            );
            assert!(
                (v - var).abs() < 4.0 * var * (2.0 / n).sqrt(),
                "var {v} vs {var}"
            );
        }
    }

    #[test]
    fn projection_keeps_samples_inside() {
        let spec = SimSpec {
            m: 0.0,
            diameter: Some(1.0),
            sigma: 5.0,
            l_sens: 3.0,
            ..gd_spec(2000)
        };
        let sim = simulate(&spec).unwrap();
        assert!(sim
            .p
            .values
            .iter()
            .chain(&sim.q.values)
            .all(|x| x.abs() <= 0.5));
        let spec3 = SimSpec {
            dimension: 3,
            ..spec
        };
        let sim = simulate(&spec3).unwrap();
        assert!(sim
            .q
            .rows()
            .all(|r| r.iter().map(|v| v * v).sum::<f64>() <= 0.25 + 1e-12));
    }

    #[test]
    fn coupled_runs_share_noise() {
        let spec = SimSpec {
            coupled: true,
            ..gd_spec(100)
        };
        let sim = simulate(&spec).unwrap();
        let c: f64 = 0.95;
        let shift = (1.0 - c.powi(20)) / (1.0 - c) * 0.005;
        assert!(sim
            .p
            .values
            .iter()
            .zip(&sim.q.values)
            .all(|(a, b)| (b - a - shift).abs() < 1e-12));
    }

    #[test]
    fn validation() {
        assert!(simulate(&gd_spec(0)).is_err());
        assert!(simulate(&SimSpec {
            b: 2,
            n: 3,
            ..gd_spec(1)
        })
        .is_err());
        let cgd = SimSpec {
            kind: Kind::Cgd,
            n: 4,
            b: 2,
            sensitive_batch: 2,
            ..gd_spec(1)
        };
        assert!(simulate(&cgd).is_err());
    }

    #[test]
    fn sim_csv_rows() {
        let sim = simulate(&gd_spec(3)).unwrap();
        let mut buf = Vec::new();
        sim.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("trial,x_final,process"));
        assert_eq!(text.lines().count(), 7);
    }

    fn gaussian_samples(mean: f64, n: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Samples {
            dimension: 1,
            values: (0..n)
                .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }

    #[test]
    fn identical_laws_give_identity() {
        let p = gaussian_samples(0.0, 50_000, 1);
        let q = gaussian_samples(0.0, 50_000, 2);
        let stat = |x: &[f64]| x[0];
        let est = empirical_tradeoff(&p, &q, LrMethod::ExactLr(&stat)).unwrap();
        assert!(est.within_vertical_band(|a| 1.0 - a, &check_alphas()).holds);
        let hist = empirical_tradeoff(&p, &q, LrMethod::HistogramLr { bins: None }).unwrap();
        assert!(hist.ci_halfwidth > est.ci_halfwidth);
        assert!(hist.above(|a| 1.0 - a, &check_alphas()).holds);
    }

    #[test]
    fn unit_shift_matches_gdp() {
        let p = gaussian_samples(0.0, 200_000, 3);
        let q = gaussian_samples(1.0, 200_000, 4);
        let stat = |x: &[f64]| x[0];
        let est = empirical_tradeoff(&p, &q, LrMethod::ExactLr(&stat)).unwrap();
        let g = |a: f64| gdp_eval(1.0, a).unwrap();
        assert!(est.within_levy_band(g, &check_alphas()).holds);
        assert!(est.curve.invariants().passes(1e-12));
        let hist = empirical_tradeoff(&p, &q, LrMethod::HistogramLr { bins: None }).unwrap();
        assert!(hist.within_vertical_band(g, &check_alphas()).holds);
    }

    #[test]
    fn histogram_rejects_vectors() {
        let p = Samples {
            dimension: 2,
            values: vec![0.0; 4],
        };
        assert!(matches!(
            empirical_tradeoff(&p, &p, LrMethod::HistogramLr { bins: None }),
            Err(Error::Unsupported(_))
        ));
        let empty = Samples {
            dimension: 1,
            values: vec![],
        };
        let stat = |x: &[f64]| x[0];
        assert!(empirical_tradeoff(&empty, &empty, LrMethod::ExactLr(&stat)).is_err());
    }

    #[test]
    fn dkw_width() {
        assert!((dkw_halfwidth(1_000_000) - 0.001_627_6).abs() < 1e-6);
    }

    #[test]
    fn shift_check_cases() {
        let point = check_gdpinf(1.0, 1.0, &ShiftLaw::point(1.0), 100_000, 0).unwrap();
        assert!(point.passes);
        assert!(point.margin.abs() <= 3.0 * point.ci_halfwidth);
        let spread = check_gdpinf(
            1.0,
            1.0,
            &ShiftLaw::Uniform { lo: -1.0, hi: 1.0 },
            100_000,
            0,
        )
        .unwrap();
        assert!(spread.passes && spread.margin > 3.0 * spread.ci_halfwidth);
        let zero = check_gdpinf(0.0, 1.0, &ShiftLaw::point(0.0), 50_000, 0).unwrap();
        assert!(zero.passes);
        assert!(check_gdpinf(0.5, 1.0, &ShiftLaw::point(1.0), 10, 0).is_err());
    }

    #[test]
    fn uniform_log_ratio_integrates_to_one() {
        // E_P[dQ/dP] = 1.
        let law = ShiftLaw::Uniform { lo: -0.7, hi: 1.3 };
        let h = 1e-3;
        let total: f64 = (-12_000..12_000)
            .map(|i| {
                let x = i as f64 * h;
                law.log_ratio(x, 1.5).exp() * normal::pdf(x / 1.5) / 1.5 * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_examples() {
        let one = brute_force_schedule(0.7, &[1.3], 0.0, 4, 0).unwrap();
        assert!((one.sum_sq - 1.69).abs() < 1e-15);
        let two = brute_force_schedule(0.5, &[1.0, 1.0], 0.0, 20, 0).unwrap();
        assert!((two.sum_sq - 1.8).abs() < 1e-9);
        // One-dimensional scan of λ₁ for the same problem.
        let scan = (0..=100_000)
            .map(|i| schedule_cost(0.5, &[1.0, 1.0], &[i as f64 / 1e5, 1.0], 0.0))
            .fold(f64::INFINITY, f64::min);
        assert!((scan - 1.8).abs() < 1e-8);
        assert!(brute_force_schedule(0.5, &[1.0; 13], 0.0, 1, 0).is_err());
    }
}
