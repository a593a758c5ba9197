//! Privacy-loss random variables on a uniform grid.
//!
//! A symmetric tradeoff function is encoded by the law of its privacy loss
//! `Y`; composing mechanisms adds independent losses, and the privacy curve
//! is `δ(ε) = E[(1 − e^{ε − Y})₊]`. Grids are aligned to integer multiples
//! of the mesh so that every grid contains the point 0 and any two grids
//! with the same mesh convolve without resampling.

use crate::accountant::{CompositeBound, Factor};
use crate::error::{domain, Error, Result};
use crate::io::{DeltaRow, EpsRow};
use crate::normal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Discretization and truncation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Grid spacing in privacy-loss units.
    pub mesh: f64,
    /// Half-width of the composition window in standard deviations.
    pub n_sigmas: f64,
    /// Largest total truncated or aliased mass before giving up.
    pub tail_budget: f64,
    /// Largest FFT length.
    pub max_bins: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            mesh: 1e-3,
            n_sigmas: 12.0,
            tail_budget: 1e-12,
            max_bins: 1 << 23,
        }
    }
}

impl GridSpec {
    pub fn with_mesh(mesh: f64) -> Self {
        Self {
            mesh,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mesh > 0.0) || !self.mesh.is_finite() {
            return Err(Error::Config(format!(
                "mesh must be > 0, got {}",
                self.mesh
            )));
        }
        if !(self.n_sigmas > 0.0) {
            return Err(Error::Config(format!(
                "window must be > 0 sigmas, got {}",
                self.n_sigmas
            )));
        }
        if !(self.tail_budget > 0.0 && self.tail_budget < 1.0) {
            return Err(Error::Config(format!(
                "tail budget must lie in (0, 1), got {}",
                self.tail_budget
            )));
        }
        if self.max_bins < 16 {
            return Err(Error::Config("max_bins must be at least 16".into()));
        }
        Ok(())
    }
}

/// A discretized privacy-loss distribution. Point `i` sits at
/// `(offset + i)·mesh`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrvGrid {
    mesh: f64,
    offset: i64,
    pmf: Vec<f64>,
    /// Probability removed by truncation or bounded aliasing, both sides.
    tail_mass: f64,
    /// The part of `tail_mass` that may lie above the grid.
    upper_tail: f64,
}

impl PrvGrid {
    /// All mass at zero loss (perfect privacy).
    pub fn point_mass(mesh: f64) -> Self {
        Self {
            mesh,
            offset: 0,
            pmf: vec![1.0],
            tail_mass: 0.0,
            upper_tail: 0.0,
        }
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn lo(&self) -> f64 {
        self.offset as f64 * self.mesh
    }

    pub fn hi(&self) -> f64 {
        (self.offset + self.pmf.len() as i64 - 1) as f64 * self.mesh
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .map(move |(i, p)| ((self.offset + i as i64) as f64 * self.mesh, *p))
    }

    /// Mass at grid point `k·mesh`, or 0 off the grid.
    pub fn mass_at(&self, k: i64) -> f64 {
        let i = k - self.offset;
        if i < 0 {
            return 0.0;
        }
        self.pmf.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(t, p)| t * p).sum::<f64>() / self.total_mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support()
            .map(|(t, p)| (t - m) * (t - m) * p)
            .sum::<f64>()
            / self.total_mass()
    }

    fn log_mgf(&self, lambda: f64) -> f64 {
        let terms: Vec<f64> = self
            .support()
            .filter(|(_, p)| *p > 0.0)
            .map(|(t, p)| p.ln() + lambda * t)
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + terms.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
    }

    /// Drops end points whose cumulative mass is below `threshold`.
    fn trim(mut self, threshold: f64) -> Self {
        let mut dropped_lo = 0.0;
        let mut start = 0;
        while start + 1 < self.pmf.len() && dropped_lo + self.pmf[start] <= threshold {
            dropped_lo += self.pmf[start];
            start += 1;
        }
        let mut dropped_hi = 0.0;
        let mut end = self.pmf.len();
        while end > start + 1 && dropped_hi + self.pmf[end - 1] <= threshold {
            dropped_hi += self.pmf[end - 1];
            end -= 1;
        }
        self.pmf = self.pmf[start..end].to_vec();
        self.offset += start as i64;
        self.tail_mass += dropped_lo + dropped_hi;
        self.upper_tail += dropped_hi;
        self
    }
}

fn check_mesh_for(mu: f64, spec: &GridSpec) -> Result<()> {
    spec.validate()?;
    if mu > 0.0 && spec.mesh > mu / 10.0 {
        return Err(Error::Config(format!(
            "mesh {} is too coarse for GDP parameter {mu}; need mesh <= {}",
            spec.mesh,
            mu / 10.0
        )));
    }
    Ok(())
}

/// CDF and survival function of a privacy loss.
trait LossLaw: Sync {
    fn cdf(&self, t: f64) -> f64;
    fn sf(&self, t: f64) -> f64;
    /// Grid range outside which each tail has mass at most `q`.
    fn range(&self, q: f64) -> (f64, f64);
}

struct GaussianLoss {
    mu: f64,
}

impl LossLaw for GaussianLoss {
    fn cdf(&self, t: f64) -> f64 {
        normal::cdf((t - 0.5 * self.mu * self.mu) / self.mu)
    }

    fn sf(&self, t: f64) -> f64 {
        normal::sf((t - 0.5 * self.mu * self.mu) / self.mu)
    }

    fn range(&self, q: f64) -> (f64, f64) {
        let z = normal::upper_quantile(q);
        let m = 0.5 * self.mu * self.mu;
        (m - z * self.mu, m + z * self.mu)
    }
}

/// Loss of the symmetrized subsampled Gaussian.
struct SubsampledLoss {
    mu: f64,
    p: f64,
}

impl SubsampledLoss {
    /// `log(1 + (e^u − 1)/p)` for `u ≥ 0`.
    fn g(&self, u: f64) -> f64 {
        if u > 1.0 {
            u - self.p.ln() + (-(1.0 - self.p) * (-u).exp()).ln_1p()
        } else {
            (u.exp_m1() / self.p).ln_1p()
        }
    }

    /// Inverse of `g`: `log(p·e^e + 1 − p)`.
    fn g_inv(&self, e: f64) -> f64 {
        e + (self.p + (1.0 - self.p) * (-e).exp()).ln()
    }
}

impl LossLaw for SubsampledLoss {
    fn cdf(&self, t: f64) -> f64 {
        let (mu, p) = (self.mu, self.p);
        if t > 0.0 {
            let e = self.g(t);
            p * normal::cdf(e / mu - mu / 2.0) + (1.0 - p) * normal::cdf(e / mu + mu / 2.0)
        } else {
            let e = self.g(-t);
            normal::cdf(-e / mu - mu / 2.0)
        }
    }

    fn sf(&self, t: f64) -> f64 {
        let (mu, p) = (self.mu, self.p);
        if t > 0.0 {
            let e = self.g(t);
            p * normal::sf(e / mu - mu / 2.0) + (1.0 - p) * normal::sf(e / mu + mu / 2.0)
        } else {
            let e = self.g(-t);
            normal::sf(-e / mu - mu / 2.0)
        }
    }

    fn range(&self, q: f64) -> (f64, f64) {
        let z = normal::upper_quantile(q);
        let mu = self.mu;
        // Lower tail: Φ(−ε⁻/μ − μ/2) ≤ q once ε⁻ ≥ μ(z − μ/2).
        let lo = -self.g_inv((mu * (z - mu / 2.0)).max(0.0));
        // Upper tail: both mixture terms are at most Φ(μ/2 − ε⁺/μ).
        let hi = self.g_inv(mu * (z + mu / 2.0));
        (lo, hi)
    }
}

/// Cell-centred discretization: grid point `k·h` receives the mass of
/// `((k − ½)h, (k + ½)h]`. Masses are differenced on whichever side of the
/// median avoids cancellation.
fn discretize(law: &dyn LossLaw, h: f64, q: f64) -> PrvGrid {
    let (lo, hi) = law.range(q);
    let k_lo = (lo / h).floor() as i64;
    let k_hi = (hi / h).ceil() as i64;
    let edge = |k: i64| (k as f64 + 0.5) * h;
    let n = (k_hi - k_lo + 1) as usize;
    let pmf: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = k_lo + i as i64;
            let (a, b) = (edge(k - 1), edge(k));
            let fa = law.cdf(a);
            let mass = if fa < 0.5 {
                law.cdf(b) - fa
            } else {
                law.sf(a) - law.sf(b)
            };
            mass.max(0.0)
        })
        .collect();
    let below = law.cdf(edge(k_lo - 1));
    let above = law.sf(edge(k_hi));
    PrvGrid {
        mesh: h,
        offset: k_lo,
        pmf,
        tail_mass: below + above,
        upper_tail: above,
    }
}

fn gdp_grid(mu: f64, h: f64, q: f64) -> PrvGrid {
    if mu == 0.0 {
        return PrvGrid::point_mass(h);
    }
    discretize(&GaussianLoss { mu }, h, q)
}

fn subsampled_grid(mu: f64, p: f64, h: f64, q: f64) -> PrvGrid {
    if mu == 0.0 || p == 0.0 {
        return PrvGrid::point_mass(h);
    }
    if p == 1.0 {
        return gdp_grid(mu, h, q);
    }
    discretize(&SubsampledLoss { mu, p }, h, q)
}

fn check_gdp(mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return domain(format!("GDP parameter must be finite and >= 0, got {mu}"));
    }
    Ok(())
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("subsampling rate must lie in [0, 1], got {p}"));
    }
    Ok(())
}

/// Privacy loss of `G(μ)`: `N(μ²/2, μ²)`.
pub fn prv_of_gdp(mu: f64, spec: &GridSpec) -> Result<PrvGrid> {
    check_gdp(mu)?;
    check_mesh_for(mu, spec)?;
    Ok(gdp_grid(mu, spec.mesh, spec.tail_budget / 4.0))
}

/// Privacy loss of `C_p(G(μ))`.
pub fn prv_of_subsampled_gdp(mu: f64, p: f64, spec: &GridSpec) -> Result<PrvGrid> {
    check_gdp(mu)?;
    check_rate(p)?;
    check_mesh_for(mu, spec)?;
    Ok(subsampled_grid(mu, p, spec.mesh, spec.tail_budget / 4.0))
}

fn next_pow2(n: usize) -> usize {
    n.max(2).next_power_of_two()
}

/// Chernoff bound on `P(S ≥ x)` (upper) or `P(S ≤ x)` (lower) for a sum of
/// independent copies of the factors.
fn chernoff(factors: &[(&PrvGrid, u64)], x: f64, upper: bool, mean: f64, var: f64) -> f64 {
    let dist = (x - mean).abs();
    if var <= 0.0 {
        return if dist > 0.0 { 0.0 } else { 1.0 };
    }
    let base = dist / var;
    let sign = if upper { 1.0 } else { -1.0 };
    (-24..=24)
        .map(|j| {
            let lambda = sign * base * 2f64.powf(j as f64 / 4.0);
            let log_mgf: f64 = factors
                .iter()
                .map(|(g, k)| *k as f64 * g.log_mgf(lambda))
                .sum();
            (log_mgf - lambda * x).exp()
        })
        .fold(1.0, f64::min)
}

/// Distribution of the sum of `k_i` independent copies of each factor.
fn compose(factors: &[(&PrvGrid, u64)], spec: &GridSpec) -> Result<PrvGrid> {
    spec.validate()?;
    let h = spec.mesh;
    let factors: Vec<(&PrvGrid, u64)> = factors.iter().copied().filter(|(_, k)| *k > 0).collect();
    if factors.is_empty() {
        return Ok(PrvGrid::point_mass(h));
    }
    if factors.iter().any(|(g, _)| (g.mesh - h).abs() > 1e-12 * h) {
        return Err(Error::Config("all factors must share the grid mesh".into()));
    }
    if let [(g, 1)] = factors.as_slice() {
        return Ok((*g).clone());
    }

    let mean: f64 = factors.iter().map(|(g, k)| *k as f64 * g.mean()).sum();
    let var: f64 = factors.iter().map(|(g, k)| *k as f64 * g.variance()).sum();
    let full_span: u128 = factors
        .iter()
        .map(|(g, k)| *k as u128 * (g.pmf.len() as u128 - 1))
        .sum::<u128>()
        + 1;
    let truncated: f64 = factors.iter().map(|(g, k)| *k as f64 * g.tail_mass).sum();
    let truncated_upper: f64 = factors.iter().map(|(g, k)| *k as f64 * g.upper_tail).sum();

    let window_bins = (2.0 * spec.n_sigmas * var.sqrt() / h).ceil() as usize + 1;
    let mut n = next_pow2(window_bins);
    let (origin, alias_lo, alias_hi) = loop {
        if full_span <= n as u128 {
            // The whole support fits: no wrap-around at all.
            let origin: i64 = factors.iter().map(|(g, k)| *k as i64 * g.offset).sum();
            break (origin, 0.0, 0.0);
        }
        let origin = (mean / h).round() as i64 - (n / 2) as i64;
        let lo_edge = (origin as f64 - 1.0) * h;
        let hi_edge = (origin + n as i64) as f64 * h;
        let a_lo = chernoff(&factors, lo_edge, false, mean, var);
        let a_hi = chernoff(&factors, hi_edge, true, mean, var);
        if truncated + a_lo + a_hi <= spec.tail_budget {
            break (origin, a_lo, a_hi);
        }
        if 2 * n > spec.max_bins {
            return Err(Error::Accuracy(format!(
                "tail mass {:e} exceeds budget {:e} at {n} bins",
                truncated + a_lo + a_hi,
                spec.tail_budget
            )));
        }
        n *= 2;
    };
    if n > spec.max_bins {
        return Err(Error::Accuracy(format!(
            "composition needs {n} bins, above the limit {}",
            spec.max_bins
        )));
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectra: Vec<Vec<Complex<f64>>> = factors
        .par_iter()
        .map(|(g, k)| {
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            // Shift each factor so that its first point lands on index 0;
            // the shifts are added back through `origin`.
            for (i, p) in g.pmf.iter().enumerate() {
                buf[i % n].re += p;
            }
            fwd.process(&mut buf);
            let k = u32::try_from(*k).unwrap_or(u32::MAX);
            buf.iter_mut().for_each(|z| *z = z.powu(k));
            buf
        })
        .collect();
    let mut acc = spectra[0].clone();
    for s in &spectra[1..] {
        acc.iter_mut().zip(s).for_each(|(a, b)| *a *= b);
    }
    inv.process(&mut acc);

    let shift: i64 = factors.iter().map(|(g, k)| *k as i64 * g.offset).sum();
    let scale = 1.0 / n as f64;
    let mut pmf = vec![0.0; n];
    for (j, slot) in pmf.iter_mut().enumerate() {
        // Value index v = origin + j; its residue relative to the shifted sum.
        let v = origin + j as i64;
        let idx = (v - shift).rem_euclid(n as i64) as usize;
        *slot = (acc[idx].re * scale).max(0.0);
    }
    let out = PrvGrid {
        mesh: h,
        offset: origin,
        pmf,
        tail_mass: truncated + alias_lo + alias_hi,
        upper_tail: truncated_upper + alias_hi,
    };
    Ok(out.trim(1e-300))
}

/// `k`-fold composition of a privacy loss with itself.
pub fn self_compose(prv: &PrvGrid, k: u64, spec: &GridSpec) -> Result<PrvGrid> {
    if k == 0 {
        return domain("composition count must be at least 1");
    }
    let spec = GridSpec {
        mesh: prv.mesh,
        ..*spec
    };
    compose(&[(prv, k)], &spec)
}

/// Moves each point's mass onto the two nearest points of a grid with a
/// different mesh, preserving the mean.
fn rebin(g: &PrvGrid, mesh: f64) -> PrvGrid {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for (t, _) in g.support() {
        let x = t / mesh;
        lo = lo.min(x.floor() as i64);
        hi = hi.max(x.ceil() as i64);
    }
    let mut pmf = vec![0.0; (hi - lo + 1) as usize];
    for (t, p) in g.support() {
        let x = t / mesh;
        let k = x.floor();
        let w = x - k;
        let i = (k as i64 - lo) as usize;
        pmf[i] += (1.0 - w) * p;
        if w > 0.0 {
            pmf[i + 1] += w * p;
        }
    }
    PrvGrid {
        mesh,
        offset: lo,
        pmf,
        tail_mass: g.tail_mass,
        upper_tail: g.upper_tail,
    }
}

/// Distribution of the sum of two independent privacy losses. `b` is
/// re-binned onto `a`'s mesh if they differ.
pub fn convolve(a: &PrvGrid, b: &PrvGrid, spec: &GridSpec) -> Result<PrvGrid> {
    let spec = GridSpec {
        mesh: a.mesh,
        ..*spec
    };
    if (a.mesh - b.mesh).abs() > 1e-12 * a.mesh {
        let b = rebin(b, a.mesh);
        return compose(&[(a, 1), (&b, 1)], &spec);
    }
    compose(&[(a, 1), (b, 1)], &spec)
}

/// `δ(ε) = Σ_{t > ε} (1 − e^{ε − t})·pmf(t)`, plus any mass that may have been
/// cut off above the grid.
pub fn prv_delta(prv: &PrvGrid, eps: f64) -> f64 {
    let inner: f64 = prv
        .support()
        .filter(|(t, _)| *t > eps)
        .map(|(t, p)| -(eps - t).exp_m1() * p)
        .sum();
    (inner + prv.upper_tail).clamp(0.0, 1.0)
}

/// Smallest ε with `prv_delta(ε) ≤ δ`.
pub fn prv_eps(prv: &PrvGrid, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    if prv_delta(prv, 0.0) <= delta {
        return Ok(0.0);
    }
    let mut hi = prv.hi().max(1.0);
    if prv_delta(prv, hi) > delta {
        return Err(Error::Accuracy(format!(
            "delta {delta:e} is below the truncated mass {:e}",
            prv.upper_tail
        )));
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if prv_delta(prv, mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Builds and composes every factor of a bound at one mesh.
pub fn compose_bound(cb: &CompositeBound, spec: &GridSpec) -> Result<PrvGrid> {
    spec.validate()?;
    let h = spec.mesh;
    let draws: u64 = cb
        .factors
        .iter()
        .map(Factor::multiplicity)
        .sum::<u64>()
        .max(1);
    let q = spec.tail_budget / (4.0 * draws as f64);

    // Gaussian factors far below the mesh are merged by quadrature into the
    // largest Gaussian factor, which composes them exactly.
    let floor = 10.0 * h;
    let mut gdp: Vec<f64> = cb
        .factors
        .iter()
        .filter_map(|f| match f {
            Factor::Gdp { mu } if *mu > 0.0 => Some(*mu),
            _ => None,
        })
        .collect();
    let small: f64 = gdp.iter().filter(|m| **m < floor).map(|m| m * m).sum();
    gdp.retain(|m| *m >= floor);
    if small > 0.0 {
        match gdp.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            Some(big) => *big = big.hypot(small.sqrt()),
            None => gdp.push(small.sqrt()),
        }
    }
    let has_subsampled = cb
        .factors
        .iter()
        .any(|f| matches!(f, Factor::SubsampledGdp { .. }));
    if !has_subsampled {
        if let Some(m) = gdp.iter().find(|m| **m < floor) {
            check_mesh_for(*m, spec)?;
        }
    }

    let mut grids: Vec<(PrvGrid, u64)> = gdp.iter().map(|&mu| (gdp_grid(mu, h, q), 1)).collect();
    for f in &cb.factors {
        if let Factor::SubsampledGdp {
            mu,
            p,
            multiplicity,
        } = *f
        {
            check_gdp(mu)?;
            check_rate(p)?;
            grids.push((subsampled_grid(mu, p, h, q), multiplicity));
        }
    }
    let refs: Vec<(&PrvGrid, u64)> = grids.iter().map(|(g, k)| (g, *k)).collect();
    compose(&refs, spec)
}

/// δ(ε) of a composite bound at each requested ε. The uncertainty column is
/// the truncated mass plus the change observed when doubling the mesh.
pub fn evaluate_composite(
    cb: &CompositeBound,
    eps_list: &[f64],
    spec: &GridSpec,
) -> Result<Vec<DeltaRow>> {
    Ok(evaluate_composite_curves(cb, eps_list, &[], spec)?.0)
}

/// [`evaluate_composite`] together with ε(δ) at each requested δ, from the
/// same composed grids.
pub fn evaluate_composite_curves(
    cb: &CompositeBound,
    eps_list: &[f64],
    deltas: &[f64],
    spec: &GridSpec,
) -> Result<(Vec<DeltaRow>, Vec<EpsRow>)> {
    cb.validate()?;
    let fine = compose_bound(cb, spec)?;
    let coarse_spec = GridSpec {
        mesh: 2.0 * spec.mesh,
        ..*spec
    };
    let coarse = compose_bound(cb, &coarse_spec).ok();
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let delta = prv_delta(&fine, eps);
            let halving = coarse
                .as_ref()
                .map_or(0.0, |c| (prv_delta(c, eps) - delta).abs());
            DeltaRow {
                eps,
                delta,
                uncertainty: fine.tail_mass + halving,
            }
        })
        .collect();
    let eps_rows = deltas
        .iter()
        .map(|&delta| {
            Ok(EpsRow {
                delta,
                eps: prv_eps(&fine, delta)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((rows, eps_rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversions::gdp_to_delta;

    fn spec() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn zero_gdp_is_point_mass() {
        let g = prv_of_gdp(0.0, &spec()).unwrap();
        assert_eq!(g.pmf(), &[1.0]);
        assert_eq!(g.lo(), 0.0);
        assert_eq!(prv_delta(&g, 0.0), 0.0);
    }

    #[test]
    fn gdp_moments_and_mass() {
        let g = prv_of_gdp(1.0, &spec()).unwrap();
        assert!((g.total_mass() + g.tail_mass() - 1.0).abs() < 1e-9);
        assert!((g.mean() - 0.5).abs() < spec().mesh);
        assert!((g.variance() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn gdp_delta_matches_closed_form() {
        let g = prv_of_gdp(1.0, &spec()).unwrap();
        for eps in [0.0, 1.0, 2.0] {
            let want = gdp_to_delta(1.0, eps).unwrap();
            assert!((prv_delta(&g, eps) - want).abs() < 1e-5, "ε={eps}");
        }
        assert!((prv_delta(&g, 0.0) - 0.382_924_922_548_026_24).abs() < 1e-5);
    }

    #[test]
    fn coarse_mesh_is_a_configuration_error() {
        assert!(matches!(prv_of_gdp(0.005, &spec()), Err(Error::Config(_))));
        assert!(matches!(prv_of_gdp(-1.0, &spec()), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetric_loss_satisfies_likelihood_identity() {
        for g in [
            prv_of_gdp(1.0, &spec()).unwrap(),
            prv_of_subsampled_gdp(1.5, 0.3, &spec()).unwrap(),
        ] {
            let (m, sd) = (g.mean(), g.variance().sqrt());
            for k in 1..(((m + 5.0 * sd) / g.mesh()) as i64) {
                let (pos, neg) = (g.mass_at(k), g.mass_at(-k));
                if pos > 1e-300 && neg > 1e-300 {
                    let t = k as f64 * g.mesh();
                    let ratio = pos / (t.exp() * neg);
                    assert!((ratio - 1.0).abs() < 1e-6, "t={t}: {ratio}");
                }
            }
        }
    }

    #[test]
    fn subsampled_edge_rates() {
        let full = prv_of_subsampled_gdp(1.0, 1.0, &spec()).unwrap();
        let gdp = prv_of_gdp(1.0, &spec()).unwrap();
        assert_eq!(full, gdp);
        let none = prv_of_subsampled_gdp(1.0, 0.0, &spec()).unwrap();
        assert_eq!(none.pmf(), &[1.0]);
        let g = prv_of_subsampled_gdp(2.0, 0.2, &spec()).unwrap();
        assert!((g.total_mass() + g.tail_mass() - 1.0).abs() < 1e-9);
        // Atom at zero: (1 − p)(Φ(μ/2) − Φ(−μ/2)) plus the adjacent half cells.
        let atom = 0.8 * (normal::cdf(1.0) - normal::cdf(-1.0));
        assert!(g.mass_at(0) >= atom && g.mass_at(0) < atom + 1e-3);
    }

    #[test]
    fn self_compose_cases() {
        let g = prv_of_gdp(1.0, &spec()).unwrap();
        assert_eq!(self_compose(&g, 1, &spec()).unwrap(), g);
        let four = self_compose(&g, 4, &spec()).unwrap();
        let want = 0.509_861_660_054_670_2; // δ of G(2) at ε = 1
        assert!((prv_delta(&four, 1.0) - want).abs() < 1e-4);
        assert!((four.mean() - 4.0 * g.mean()).abs() < 4.0 * spec().mesh);
        assert!(self_compose(&g, 0, &spec()).is_err());
    }

    #[test]
    fn convolve_cases() {
        let s = spec();
        let a = prv_of_gdp(3.0, &s).unwrap();
        let b = prv_of_gdp(4.0, &s).unwrap();
        let ab = convolve(&a, &b, &s).unwrap();
        let ba = convolve(&b, &a, &s).unwrap();
        for eps in [0.0, 1.0, 2.0, 5.0] {
            let want = gdp_to_delta(5.0, eps).unwrap();
            assert!((prv_delta(&ab, eps) - want).abs() < 1e-4);
            assert!((prv_delta(&ab, eps) - prv_delta(&ba, eps)).abs() < 1e-12);
        }
        let zero = PrvGrid::point_mass(s.mesh);
        let same = convolve(&a, &zero, &s).unwrap();
        for eps in [0.0, 3.0] {
            assert!((prv_delta(&same, eps) - prv_delta(&a, eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_is_monotone_and_bounded_by_tail_beyond_range() {
        let g = prv_of_subsampled_gdp(1.0, 0.1, &spec()).unwrap();
        let mut prev = 1.0;
        for i in 0..200 {
            let d = prv_delta(&g, -2.0 + 0.05 * i as f64);
            assert!(d <= prev + 1e-15);
            prev = d;
        }
        assert!(prv_delta(&g, g.hi() + 1.0) <= g.tail_mass());
    }

    #[test]
    fn eps_inverse() {
        let g = prv_of_gdp(1.0, &spec()).unwrap();
        let eps = prv_eps(&g, 1e-5).unwrap();
        assert!((prv_delta(&g, eps) - 1e-5).abs() < 1e-9);
        let exact = crate::conversions::gdp_to_eps(1.0, 1e-5).unwrap();
        assert!((eps - exact).abs() < 1e-2);
    }

    #[test]
    fn rebinning_preserves_mean() {
        let g = prv_of_gdp(1.0, &GridSpec::with_mesh(0.003)).unwrap();
        let r = rebin(&g, 0.002);
        assert!((r.mean() - g.mean()).abs() < 1e-12);
        assert!((r.total_mass() - g.total_mass()).abs() < 1e-12);
    }
}
