//! Tradeoff functions and their arithmetic.
//!
//! A [`TradeoffCurve`] is a piecewise-linear discretization of a tradeoff
//! function `f: [0, 1] → [0, 1]` (non-increasing, convex, `f(α) ≤ 1 − α`).
//! Curves are immutable; every operation returns a new curve.

use crate::error::{domain, Error, Result};
use crate::normal;
use serde::{Deserialize, Serialize};

/// Default number of uniformly spaced grid points.
pub const DEFAULT_GRID_SIZE: usize = 10_001;

/// Geometric refinement points per decade near α = 0 and α = 1.
const REFINE_PER_DECADE: usize = 32;
/// Smallest refined distance from the endpoints.
const REFINE_FLOOR: f64 = 1e-15;

/// Slack used by the invariant checks.
pub const INVARIANT_TOL: f64 = 1e-12;
/// Absolute part of the default comparison tolerance.
pub const COMPARE_TOL: f64 = 1e-9;

/// Gaussian DP parameter μ ≥ 0.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GdpParam(f64);

impl GdpParam {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_nan() || mu < 0.0 {
            return domain(format!("GDP parameter must be >= 0, got {mu}"));
        }
        Ok(Self(mu))
    }

    pub fn mu(self) -> f64 {
        self.0
    }
}

/// Subsampling rate p = b/n.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsampleRate(f64);

impl SubsampleRate {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("subsampling rate must lie in [0, 1], got {p}"));
        }
        Ok(Self(p))
    }

    pub fn p(self) -> f64 {
        self.0
    }
}

/// The α grid: `uniform_points` evenly spaced values on [0, 1] plus a
/// geometric refinement towards both endpoints.
pub fn alpha_grid(uniform_points: usize) -> Result<Vec<f64>> {
    if uniform_points < 3 {
        return domain(format!(
            "grid needs at least 3 points, got {uniform_points}"
        ));
    }
    let last = (uniform_points - 1) as f64;
    let step = 1.0 / last;
    let mut grid: Vec<f64> = (0..uniform_points).map(|i| i as f64 / last).collect();

    let decades = -REFINE_FLOOR.log10();
    let count = (decades * REFINE_PER_DECADE as f64).round() as usize;
    for j in 0..=count {
        let x = REFINE_FLOOR * 10f64.powf(j as f64 / REFINE_PER_DECADE as f64);
        if x >= 0.99 * step {
            break;
        }
        grid.push(x);
        grid.push(1.0 - x);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Result of checking the tradeoff-function invariants on a curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    /// Largest increase `values[i+1] − values[i]`.
    pub max_increase: f64,
    /// Largest amount by which a value exceeds the chord of its neighbours.
    pub max_concavity: f64,
    /// Largest `values[i] − (1 − alphas[i])`.
    pub max_above_identity: f64,
    /// Largest excursion outside [0, 1].
    pub max_out_of_range: f64,
}

impl InvariantReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_increase <= tol
            && self.max_concavity <= tol
            && self.max_above_identity <= tol
            && self.max_out_of_range <= tol
    }
}

/// Outcome of a pointwise comparison `f ≥ g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub holds: bool,
    /// `max_α (g(α) − f(α))`, clamped at zero.
    pub max_violation: f64,
    pub tolerance: f64,
}

#[derive(Deserialize)]
struct RawCurve {
    alphas: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawCurve> for TradeoffCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        Self::new(raw.alphas, raw.values)
    }
}

/// A discretized tradeoff function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct TradeoffCurve {
    alphas: Vec<f64>,
    values: Vec<f64>,
}

impl TradeoffCurve {
    /// Builds a curve, validating every invariant.
    pub fn new(alphas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if alphas.len() != values.len() {
            return domain(format!(
                "alphas ({}) and values ({}) differ in length",
                alphas.len(),
                values.len()
            ));
        }
        if alphas.len() < 2 {
            return domain("a tradeoff curve needs at least two grid points");
        }
        if alphas[0] != 0.0 || *alphas.last().unwrap() != 1.0 {
            return domain("alpha grid must start at 0 and end at 1");
        }
        if alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("alpha grid must be strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("curve values must be finite");
        }
        let curve = Self { alphas, values };
        let report = curve.invariants();
        if !report.passes(INVARIANT_TOL) {
            return domain(format!("not a tradeoff function: {report:?}"));
        }
        Ok(curve)
    }

    /// Builds a curve from values that are known to be a tradeoff function up
    /// to round-off; values are clamped into `[0, 1 − α]` first.
    pub(crate) fn from_clamped(alphas: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        for (v, &a) in values.iter_mut().zip(&alphas) {
            *v = v.clamp(0.0, (1.0 - a).max(0.0));
        }
        Self::new(alphas, values)
    }

    /// Id(α) = 1 − α on the default grid of the given size.
    pub fn identity(grid_size: usize) -> Result<Self> {
        let alphas = alpha_grid(grid_size)?;
        Self::identity_on(alphas)
    }

    pub(crate) fn identity_on(alphas: Vec<f64>) -> Result<Self> {
        let values = alphas.iter().map(|a| 1.0 - a).collect();
        Self::new(alphas, values)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Largest spacing of the α grid.
    pub fn mesh(&self) -> f64 {
        self.alphas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolant at `alpha` (clamped to [0, 1]).
    pub fn eval(&self, alpha: f64) -> f64 {
        interp(&self.alphas, &self.values, alpha.clamp(0.0, 1.0))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alphas.iter().copied().zip(self.values.iter().copied())
    }

    pub fn invariants(&self) -> InvariantReport {
        let mut report = InvariantReport::default();
        for (i, (&a, &v)) in self.alphas.iter().zip(&self.values).enumerate() {
            report.max_above_identity = report.max_above_identity.max(v - (1.0 - a));
            report.max_out_of_range = report.max_out_of_range.max(-v).max(v - 1.0);
            if i + 1 < self.len() {
                report.max_increase = report.max_increase.max(self.values[i + 1] - v);
            }
            if i > 0 && i + 1 < self.len() {
                let (a0, a2) = (self.alphas[i - 1], self.alphas[i + 1]);
                let w = (a - a0) / (a2 - a0);
                let chord = (1.0 - w) * self.values[i - 1] + w * self.values[i + 1];
                report.max_concavity = report.max_concavity.max(v - chord);
            }
        }
        report
    }

    /// Largest `|f(α) − f⁻¹(α)|` on the grid.
    pub fn asymmetry(&self) -> Result<f64> {
        let inv = invert_curve(self)?;
        Ok(self
            .values
            .iter()
            .zip(inv.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let idx = xs.partition_point(|&v| v < x);
    if idx == 0 {
        return ys[0];
    }
    if idx >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    if x1 == x0 {
        return y0.min(y1);
    }
    let w = (x - x0) / (x1 - x0);
    y0 + w * (y1 - y0)
}

/// G(μ)(α) = Φ(Φ⁻¹(1 − α) − μ).
pub fn gdp_eval(mu: f64, alpha: f64) -> Result<f64> {
    GdpParam::new(mu)?;
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    Ok(gdp_value(mu, alpha))
}

fn gdp_value(mu: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    if alpha == 1.0 {
        return 0.0;
    }
    if mu == 0.0 {
        return 1.0 - alpha;
    }
    normal::cdf(normal::upper_quantile(alpha) - mu)
}

/// Composition of two Gaussian tradeoff functions: G(μ₁) ⊗ G(μ₂) = G(√(μ₁² + μ₂²)).
pub fn compose_gdp(mu1: GdpParam, mu2: GdpParam) -> GdpParam {
    GdpParam(mu1.0.hypot(mu2.0))
}

/// n-fold self-composition: G(μ)^{⊗n} = G(μ√n).
pub fn compose_gdp_n(mu: GdpParam, n: u64) -> GdpParam {
    GdpParam(mu.0 * (n as f64).sqrt())
}

/// Discretization of G(μ) on the default α grid.
pub fn curve_of_gdp(mu: GdpParam, grid_size: usize) -> Result<TradeoffCurve> {
    let alphas = alpha_grid(grid_size)?;
    curve_of_gdp_on(mu, alphas)
}

pub(crate) fn curve_of_gdp_on(mu: GdpParam, alphas: Vec<f64>) -> Result<TradeoffCurve> {
    let values = alphas.iter().map(|&a| gdp_value(mu.0, a)).collect();
    TradeoffCurve::from_clamped(alphas, values)
}

/// The left-continuous inverse f⁻¹(β) = inf{α : f(α) ≤ β}, resampled on the
/// input curve's α grid.
pub fn invert_curve(f: &TradeoffCurve) -> Result<TradeoffCurve> {
    // Reflect the polyline across the diagonal. Values are non-increasing, so
    // walking the grid backwards yields non-decreasing abscissae.
    let mut xs: Vec<f64> = Vec::with_capacity(f.len() + 1);
    let mut ys: Vec<f64> = Vec::with_capacity(f.len() + 1);
    for (a, v) in f.alphas.iter().rev().zip(f.values.iter().rev()) {
        match xs.last() {
            Some(&last) if *v <= last => {
                // Repeated abscissa: keep the smallest α (the infimum).
                let y = ys.last_mut().unwrap();
                *y = y.min(*a);
            }
            _ => {
                xs.push(*v);
                ys.push(*a);
            }
        }
    }
    if xs[0] > 0.0 {
        xs.insert(0, 0.0);
        ys.insert(0, 1.0);
    }
    if *xs.last().unwrap() < 1.0 {
        xs.push(1.0);
        ys.push(0.0);
    }
    let values = f.alphas.iter().map(|&a| interp(&xs, &ys, a)).collect();
    TradeoffCurve::from_clamped(f.alphas.clone(), values)
}

/// Greatest convex, non-increasing minorant of a point cloud, evaluated at
/// the distinct abscissae of the cloud.
pub fn convexify(points: &[(f64, f64)]) -> Result<TradeoffCurve> {
    let mut grid: Vec<f64> = points.iter().map(|p| p.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    convexify_onto(points, grid)
}

/// Greatest convex, non-increasing minorant of a point cloud, evaluated on
/// `grid` (which must run from 0 to 1).
pub fn convexify_onto(points: &[(f64, f64)], grid: Vec<f64>) -> Result<TradeoffCurve> {
    let hull = lower_hull(points)?;
    let (hx, hy): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
    if hx[0] > 0.0 || *hx.last().unwrap() < 1.0 {
        return domain("points must cover the interval [0, 1]");
    }
    let mut running = f64::INFINITY;
    let values = grid
        .iter()
        .map(|&a| {
            running = running.min(interp(&hx, &hy, a));
            running
        })
        .collect();
    TradeoffCurve::from_clamped(grid, values)
}

/// Lower convex hull by the monotone-chain scan. Points with equal abscissa
/// keep the lower ordinate.
fn lower_hull(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.is_empty() {
        return domain("cannot convexify an empty point set");
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return domain("points must be finite");
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    sorted.dedup_by(|later, earlier| later.0 == earlier.0);

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(hull)
}

/// The subsampling operator C_p(f) = min{f_p, f_p⁻¹}** with
/// f_p = p·f + (1 − p)·Id, on the grid of `f`.
pub fn subsample(f: &TradeoffCurve, p: SubsampleRate) -> Result<TradeoffCurve> {
    let p = p.p();
    if p == 0.0 {
        return TradeoffCurve::identity_on(f.alphas.clone());
    }
    let mixed: Vec<(f64, f64)> = f
        .points()
        .map(|(a, v)| (a, p * v + (1.0 - p) * (1.0 - a)))
        .collect();
    // The epigraph of the pointwise minimum is the union of both epigraphs,
    // so its convex envelope is the lower hull of both point clouds.
    let mut cloud = Vec::with_capacity(2 * mixed.len());
    cloud.extend(mixed.iter().copied());
    cloud.extend(mixed.iter().map(|&(a, v)| (v, a)));
    convexify_onto(&cloud, f.alphas.clone())
}

/// A unit-variance Gaussian mixture component `weight · N(mean, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
}

impl Component {
    pub fn new(weight: f64, mean: f64) -> Self {
        Self { weight, mean }
    }
}

fn mixture_sf(mix: &[Component], z: f64) -> f64 {
    mix.iter().map(|c| c.weight * normal::sf(z - c.mean)).sum()
}

fn mixture_cdf(mix: &[Component], z: f64) -> f64 {
    mix.iter().map(|c| c.weight * normal::cdf(z - c.mean)).sum()
}

/// Tradeoff curve between two unit-variance Gaussian mixtures whose
/// likelihood ratio is increasing, traced by scanning rejection thresholds
/// `z` (reject the null when `X > z`).
pub fn threshold_scan_tradeoff(
    null: &[Component],
    alt: &[Component],
    alphas: Vec<f64>,
) -> Result<TradeoffCurve> {
    for c in null.iter().chain(alt) {
        if !(c.weight >= 0.0) || !c.mean.is_finite() {
            return domain("mixture components need non-negative weights and finite means");
        }
    }
    let points: Vec<(f64, f64)> = alphas
        .iter()
        .map(|&alpha| {
            if alpha <= 0.0 {
                return (alpha, 1.0);
            }
            if alpha >= 1.0 {
                return (alpha, 0.0);
            }
            // Bisection for the threshold with type-I error alpha.
            let (mut lo, mut hi) = (-80.0f64, 80.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mixture_sf(null, mid) > alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
            }
            let z = 0.5 * (lo + hi);
            (alpha, mixture_cdf(alt, z))
        })
        .collect();
    convexify_onto(&points, alphas)
}

/// Exact T(N(0,1), p·N(μ,1) + (1 − p)·N(0,1)) by threshold scan.
pub fn mixture_gaussian_tradeoff(
    p: SubsampleRate,
    mu: GdpParam,
    grid_size: usize,
) -> Result<TradeoffCurve> {
    let p = p.p();
    let null = [Component::new(1.0, 0.0)];
    let alt = [Component::new(p, mu.mu()), Component::new(1.0 - p, 0.0)];
    threshold_scan_tradeoff(&null, &alt, alpha_grid(grid_size)?)
}

/// Experimental: T(p·N(−μ,1) + (1−p)·N(0,1), p·N(μ,1) + (1−p)·N(0,1)), the
/// pair of opposite constant shifts. Not used by any bound.
pub fn opposite_shift_mixture_tradeoff(
    p: SubsampleRate,
    shift: GdpParam,
    grid_size: usize,
) -> Result<TradeoffCurve> {
    let p = p.p();
    let s = shift.mu();
    let null = [Component::new(p, -s), Component::new(1.0 - p, 0.0)];
    let alt = [Component::new(p, s), Component::new(1.0 - p, 0.0)];
    threshold_scan_tradeoff(&null, &alt, alpha_grid(grid_size)?)
}

/// Pointwise `f ≥ g − tol`, evaluated on the union of both grids. The default
/// tolerance is [`COMPARE_TOL`] plus one mesh width.
pub fn curve_geq(f: &TradeoffCurve, g: &TradeoffCurve, tol: Option<f64>) -> Comparison {
    let tolerance = tol.unwrap_or_else(|| COMPARE_TOL + f.mesh().max(g.mesh()));
    let max_violation = f
        .alphas
        .iter()
        .chain(&g.alphas)
        .map(|&a| g.eval(a) - f.eval(a))
        .fold(0.0, f64::max);
    Comparison {
        holds: max_violation <= tolerance,
        max_violation,
        tolerance,
    }
}

impl TryFrom<(Vec<f64>, Vec<f64>)> for TradeoffCurve {
    type Error = Error;

    fn try_from((alphas, values): (Vec<f64>, Vec<f64>)) -> Result<Self> {
        Self::new(alphas, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu(x: f64) -> GdpParam {
        GdpParam::new(x).unwrap()
    }

    fn rate(x: f64) -> SubsampleRate {
        SubsampleRate::new(x).unwrap()
    }

    #[test]
    fn gdp_eval_examples() {
        assert!((gdp_eval(0.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(gdp_eval(3.7, 0.0).unwrap(), 1.0);
        assert_eq!(gdp_eval(3.7, 1.0).unwrap(), 0.0);
        // Φ(−1)
        assert!((gdp_eval(1.0, 0.5).unwrap() - 0.158_655_253_931_457).abs() < 1e-14);
    }

    #[test]
    fn gdp_eval_rejects_bad_domain() {
        assert!(matches!(gdp_eval(-0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(gdp_eval(1.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(gdp_eval(1.0, -1e-9), Err(Error::Domain(_))));
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose_gdp(mu(3.0), mu(4.0)).mu(), 5.0);
        assert_eq!(compose_gdp(mu(1.25), mu(0.0)).mu(), 1.25);
        // n-fold composition of L/(nσ) reproduces the L√t/(nσ) rate
        let per_step = 0.1;
        assert!((compose_gdp_n(mu(per_step), 100).mu() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_shape() {
        let g = alpha_grid(DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g.contains(&0.5));
        assert!(g[1] <= 1e-14);
        assert!(alpha_grid(2).is_err());
    }

    #[test]
    fn curve_of_gdp_examples() {
        let id = curve_of_gdp(mu(0.0), 101).unwrap();
        for (a, v) in id.points() {
            assert!((v - (1.0 - a)).abs() < 1e-15);
        }
        let g1 = curve_of_gdp(mu(1.0), DEFAULT_GRID_SIZE).unwrap();
        assert!((g1.eval(0.5) - 0.158_655_253_931_457).abs() < 1e-12);
        let g20 = curve_of_gdp(mu(20.0), DEFAULT_GRID_SIZE).unwrap();
        assert!(g20.points().filter(|p| p.0 > 1e-6).all(|p| p.1 < 1e-20));
    }

    #[test]
    fn new_rejects_non_tradeoff_values() {
        let a = vec![0.0, 0.5, 1.0];
        assert!(TradeoffCurve::new(a.clone(), vec![1.0, 0.6, 0.0]).is_err()); // above Id
        assert!(TradeoffCurve::new(a.clone(), vec![0.5, 0.5, 0.0]).is_err()); // concave
        assert!(TradeoffCurve::new(a.clone(), vec![0.2, 0.3, 0.0]).is_err()); // increasing
        assert!(TradeoffCurve::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TradeoffCurve::new(a, vec![1.0, 0.2, 0.0]).is_ok());
    }

    #[test]
    fn inverse_of_symmetric_curves() {
        let id = TradeoffCurve::identity(DEFAULT_GRID_SIZE).unwrap();
        let inv = invert_curve(&id).unwrap();
        assert_eq!(inv.alphas(), id.alphas());
        for (x, y) in inv.values().iter().zip(id.values()) {
            assert!((x - y).abs() < 1e-15);
        }
        let g = curve_of_gdp(mu(1.3), 2001).unwrap();
        let inv = invert_curve(&g).unwrap();
        let mesh = g.mesh();
        for (x, y) in g.values().iter().zip(inv.values()) {
            assert!((x - y).abs() <= mesh, "{x} vs {y}");
        }
    }

    #[test]
    fn inverse_of_asymmetric_curve_matches_coordinate_swap() {
        // f_p for G(2), p = 0.3 is not symmetric.
        let g = curve_of_gdp(mu(2.0), 4001).unwrap();
        let p = 0.3;
        let fp: Vec<f64> = g
            .points()
            .map(|(a, v)| p * v + (1.0 - p) * (1.0 - a))
            .collect();
        let fp = TradeoffCurve::new(g.alphas().to_vec(), fp).unwrap();
        let inv = invert_curve(&fp).unwrap();
        // Oracle: for each grid point (α, f_p(α)), the inverse at f_p(α) is α.
        for (a, v) in fp.points().step_by(37) {
            assert!((inv.eval(v) - a).abs() < 2e-3, "α={a}: {} ", inv.eval(v));
        }
        // Inverting twice returns the original up to interpolation.
        let back = invert_curve(&inv).unwrap();
        let max_err = back
            .values()
            .iter()
            .zip(fp.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-3);
    }

    #[test]
    fn inverse_handles_curves_below_one_at_zero() {
        // f(0) = 0.5: the inverse is 0 on [0.5, 1].
        let c = TradeoffCurve::new(vec![0.0, 0.5, 1.0], vec![0.5, 0.0, 0.0]).unwrap();
        let inv = invert_curve(&c).unwrap();
        assert_eq!(inv.values(), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn convexify_examples() {
        let id = convexify(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(id.values(), &[1.0, 0.0]);

        let g = curve_of_gdp(mu(1.0), 501).unwrap();
        let pts: Vec<_> = g.points().collect();
        let again = convexify(&pts).unwrap();
        for (x, y) in again.values().iter().zip(g.values()) {
            assert!((x - y).abs() < 1e-15);
        }

        // Non-convex cloud: the middle point lifts off.
        let c = convexify(&[(0.0, 1.0), (0.5, 0.6), (0.25, 0.9), (1.0, 0.0)]).unwrap();
        assert!((c.eval(0.5) - 0.5).abs() < 1e-15);
        // Ties keep the lower value.
        let c = convexify(&[(0.0, 1.0), (0.5, 0.4), (0.5, 0.2), (1.0, 0.0)]).unwrap();
        assert!((c.eval(0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn convexify_errors() {
        assert!(matches!(convexify(&[]), Err(Error::Domain(_))));
        assert!(matches!(
            convexify(&[(0.2, 0.5), (1.0, 0.0)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn subsample_edge_rates() {
        let g = curve_of_gdp(mu(1.5), 2001).unwrap();
        let c0 = subsample(&g, rate(0.0)).unwrap();
        assert_eq!(c0, TradeoffCurve::identity(2001).unwrap());
        let c1 = subsample(&g, rate(1.0)).unwrap();
        for (x, y) in c1.values().iter().zip(g.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn subsample_linear_segment_identity() {
        let (p, m) = (0.25, 2.5);
        let g = curve_of_gdp(mu(m), DEFAULT_GRID_SIZE).unwrap();
        let c = subsample(&g, rate(p)).unwrap();
        let lo = normal::cdf(-m / 2.0);
        let hi = p * normal::cdf(-m / 2.0) + (1.0 - p) * normal::cdf(m / 2.0);
        // (1+p)Φ(−μ/2) + (1−p)Φ(μ/2), evaluated independently to 0.8028248868334278
        let expected = 0.802_824_886_833_427_8;
        let mut checked = 0;
        for (a, v) in c.points().filter(|(a, _)| *a > lo + 1e-3 && *a < hi - 1e-3) {
            assert!((a + v - expected).abs() < 1e-6, "α={a}: {}", a + v);
            checked += 1;
        }
        assert!(checked > 1000);
    }

    #[test]
    fn subsample_matches_mixture_scan_oracle() {
        let (p, m) = (0.25, 2.5);
        let g = curve_of_gdp(mu(m), DEFAULT_GRID_SIZE).unwrap();
        let c = subsample(&g, rate(p)).unwrap();
        let mix = mixture_gaussian_tradeoff(rate(p), mu(m), DEFAULT_GRID_SIZE).unwrap();
        let tangent = normal::cdf(-m / 2.0);
        for (a, v) in c.points() {
            let oracle = mix.eval(a);
            assert!(v <= oracle + 1e-9, "α={a}");
            if a <= tangent - 1e-3 {
                assert!((v - oracle).abs() < 1e-7, "α={a}: {v} vs {oracle}");
            }
        }
        // The oracle is f_p itself.
        for (a, v) in mix.points().step_by(101) {
            let fp = p * gdp_value(m, a) + (1.0 - p) * (1.0 - a);
            assert!((v - fp).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_tradeoff_edges() {
        let g = curve_of_gdp(mu(1.7), 1001).unwrap();
        let m1 = mixture_gaussian_tradeoff(rate(1.0), mu(1.7), 1001).unwrap();
        for (x, y) in m1.values().iter().zip(g.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let m0 = mixture_gaussian_tradeoff(rate(0.0), mu(1.7), 1001).unwrap();
        for (a, v) in m0.points() {
            assert!((v - (1.0 - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_shift_curve_is_symmetric_and_above_bound() {
        // The conjectured pair sits above the proven C_p(G(2s)) lower bound.
        let (p, s) = (0.2, 1.0);
        let conj = opposite_shift_mixture_tradeoff(rate(p), mu(s), 2001).unwrap();
        let proven = subsample(&curve_of_gdp(mu(2.0 * s), 2001).unwrap(), rate(p)).unwrap();
        assert!(curve_geq(&conj, &proven, None).holds);
        assert!(conj.asymmetry().unwrap() < 2.0 * conj.mesh());
    }

    #[test]
    fn curve_geq_examples() {
        let id = TradeoffCurve::identity(1001).unwrap();
        let g1 = curve_of_gdp(mu(1.0), 1001).unwrap();
        let g2 = curve_of_gdp(mu(2.0), 1001).unwrap();
        assert!(curve_geq(&id, &g1, None).holds);
        assert!(curve_geq(&g1, &g2, None).holds);
        let cmp = curve_geq(&g2, &g1, None);
        assert!(!cmp.holds);
        let gap = gdp_value(1.0, 0.5) - gdp_value(2.0, 0.5);
        assert!(cmp.max_violation >= gap - 1e-12);
        // The largest gap sits at the threshold 1.5: Φ(0.5) − Φ(−0.5).
        assert!((cmp.max_violation - 0.382_924_922_548_026).abs() < 1e-6);
    }
}
