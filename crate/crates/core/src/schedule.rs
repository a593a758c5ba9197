//! Shifted-interpolation schedules.
//!
//! A schedule couples two noisy iterations that start at distance `z_τ` and
//! see per-step sensitivities `s_k`. At each step a fraction `λ_k` of the
//! current gap `c·z + s` is paid for with Gaussian noise (`a_k`), the rest is
//! carried forward (`z_k`). If the gap is closed at the final step, the
//! output is `G(√Σa² / σ)`.

use crate::error::{domain, Result};
use crate::io::fmt_sig17;
use crate::tradeoff::GdpParam;
use serde::Serialize;
use std::io::Write;

/// Relative slack for `z ≥ 0` and `z_t = 0` checks.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// A validated schedule `{λ_k, a_k, z_k}` over steps `τ+1..=t`.
///
/// `s_seq`, `lambdas` and `a` hold one entry per step `τ+1..=t`; `z` holds
/// `t − τ + 1` entries for indices `τ..=t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftSchedule {
    tau: usize,
    c: f64,
    s_seq: Vec<f64>,
    lambdas: Vec<f64>,
    a: Vec<f64>,
    z: Vec<f64>,
}

/// A schedule together with its objective `Σa²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleSolution {
    pub schedule: ShiftSchedule,
    pub sum_sq: f64,
    /// Real-valued horizon `t − τ` minimising the objective, where one exists.
    pub continuous_horizon: Option<f64>,
}

fn check_common(c: f64, s_seq: &[f64], z_tau: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return domain(format!(
            "contraction factor must be finite and >= 0, got {c}"
        ));
    }
    if !(z_tau >= 0.0) || !z_tau.is_finite() {
        return domain(format!(
            "initial distance must be finite and >= 0, got {z_tau}"
        ));
    }
    if let Some(s) = s_seq.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return domain(format!("sensitivities must be finite and >= 0, got {s}"));
    }
    Ok(())
}

fn scale_of(z_tau: f64, s_seq: &[f64]) -> f64 {
    (z_tau + s_seq.iter().sum::<f64>()).max(f64::MIN_POSITIVE)
}

impl ShiftSchedule {
    /// Runs the recursion forward from `z_τ` with the given shift fractions.
    pub fn recurse(
        tau: usize,
        c: f64,
        s_seq: Vec<f64>,
        lambdas: Vec<f64>,
        z_tau: f64,
    ) -> Result<Self> {
        check_common(c, &s_seq, z_tau)?;
        if s_seq.len() != lambdas.len() {
            return domain("one shift fraction is needed per sensitivity");
        }
        if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return domain(format!("shift fractions must lie in [0, 1], got {l}"));
        }
        let mut z = Vec::with_capacity(s_seq.len() + 1);
        let mut a = Vec::with_capacity(s_seq.len());
        z.push(z_tau);
        for (s, l) in s_seq.iter().zip(&lambdas) {
            let gap = c * z.last().unwrap() + s;
            a.push(l * gap);
            z.push((1.0 - l) * gap);
        }
        Ok(Self {
            tau,
            c,
            s_seq,
            lambdas,
            a,
            z,
        })
    }

    /// Builds a schedule from prescribed shifts `a`, recovering `z` and `λ`.
    /// Fails if some residual distance goes negative beyond round-off.
    pub fn from_shifts(
        tau: usize,
        c: f64,
        s_seq: Vec<f64>,
        a: Vec<f64>,
        z_tau: f64,
    ) -> Result<Self> {
        check_common(c, &s_seq, z_tau)?;
        if s_seq.len() != a.len() {
            return domain("one shift is needed per sensitivity");
        }
        if let Some(x) = a.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return domain(format!("shifts must be finite and >= 0, got {x}"));
        }
        let tol = FEASIBILITY_TOL * scale_of(z_tau, &s_seq);
        let mut z = Vec::with_capacity(s_seq.len() + 1);
        let mut lambdas = Vec::with_capacity(s_seq.len());
        z.push(z_tau);
        for (k, (s, ak)) in s_seq.iter().zip(&a).enumerate() {
            let gap = c * z[k] + s;
            let next = gap - ak;
            if next < -tol {
                return domain(format!(
                    "infeasible schedule: residual distance {next:e} < 0 at step {}",
                    tau + k + 1
                ));
            }
            let lambda = if gap > 0.0 { (ak / gap).min(1.0) } else { 0.0 };
            lambdas.push(lambda);
            z.push(next.max(0.0));
        }
        if let Some(last) = z.last_mut() {
            if *last <= tol {
                *last = 0.0;
            }
        }
        Ok(Self {
            tau,
            c,
            s_seq,
            lambdas,
            a,
            z,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Final step index.
    pub fn t(&self) -> usize {
        self.tau + self.a.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn s_seq(&self) -> &[f64] {
        &self.s_seq
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn z_final(&self) -> f64 {
        *self.z.last().unwrap()
    }

    pub fn sum_sq(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum()
    }

    /// Whether the coupling is closed at the final step (`z_t = 0` up to
    /// round-off).
    pub fn is_terminal(&self) -> bool {
        self.z_final() <= FEASIBILITY_TOL * scale_of(self.z[0], &self.s_seq)
    }

    /// Writes `k,lambda,a,z` rows. The row for `k = τ` has empty `lambda`
    /// and `a` fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "lambda", "a", "z"])?;
        w.write_record([
            self.tau.to_string(),
            String::new(),
            String::new(),
            fmt_sig17(self.z[0]),
        ])?;
        for (i, ((l, a), z)) in self
            .lambdas
            .iter()
            .zip(&self.a)
            .zip(&self.z[1..])
            .enumerate()
        {
            w.write_record([
                (self.tau + i + 1).to_string(),
                fmt_sig17(*l),
                fmt_sig17(*a),
                fmt_sig17(*z),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Recursion from `τ = 0`.
pub fn recurse_schedule(
    c: f64,
    s_seq: Vec<f64>,
    lambdas: Vec<f64>,
    z_tau: f64,
) -> Result<ShiftSchedule> {
    ShiftSchedule::recurse(0, c, s_seq, lambdas, z_tau)
}

/// `μ = √Σa² / σ` for a schedule that closes the gap.
pub fn meta_mu(schedule: &ShiftSchedule, sigma: f64) -> Result<GdpParam> {
    if !(sigma > 0.0) {
        return domain(format!("noise scale must be > 0, got {sigma}"));
    }
    if !schedule.is_terminal() {
        return domain(format!(
            "schedule does not close the gap: final distance {:e}",
            schedule.z_final()
        ));
    }
    GdpParam::new(schedule.sum_sq().sqrt() / sigma)
}

fn check_contraction(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return domain(format!("contraction factor must lie in (0, 1), got {c}"));
    }
    Ok(())
}

fn check_sensitivity(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return domain(format!("sensitivity must be finite and >= 0, got {s}"));
    }
    Ok(())
}

/// Closed-form `Σa²` of the optimal strongly convex schedule:
/// `(1 − cᵗ)/(1 + cᵗ) · (1 + c)/(1 − c) · s²`.
pub fn sc_sum_sq(c: f64, s: f64, t: usize) -> f64 {
    let ct = c.powi(t as i32);
    (1.0 - ct) / (1.0 + ct) * (1.0 + c) / (1.0 - c) * s * s
}

/// Optimal schedule for a `c`-contractive iteration with constant
/// sensitivity `s`, started from identical iterates.
pub fn optimal_sc_schedule(c: f64, s: f64, t: usize) -> Result<ScheduleSolution> {
    check_contraction(c)?;
    check_sensitivity(s)?;
    if t == 0 {
        return domain("horizon must be at least one step");
    }
    let ct = c.powi(t as i32);
    let a = (1..=t)
        .map(|k| c.powi((t - k) as i32) * (1.0 + c) * s / (1.0 + ct))
        .collect();
    let schedule = ShiftSchedule::from_shifts(0, c, vec![s; t], a, 0.0)?;
    Ok(ScheduleSolution {
        schedule,
        sum_sq: sc_sum_sq(c, s, t),
        continuous_horizon: None,
    })
}

/// Optimal schedule for a non-expansive iteration started `D` apart at step
/// `τ`: constant shifts `s + D/(t − τ)`.
pub fn optimal_proj_schedule(s: f64, d: f64, t: usize, tau: usize) -> Result<ScheduleSolution> {
    check_sensitivity(s)?;
    if !(d >= 0.0) || !d.is_finite() {
        return domain(format!("diameter must be finite and >= 0, got {d}"));
    }
    if tau >= t {
        return domain(format!("start step {tau} must precede final step {t}"));
    }
    let h = (t - tau) as f64;
    let shift = s + d / h;
    let schedule = ShiftSchedule::from_shifts(tau, 1.0, vec![s; t - tau], vec![shift; t - tau], d)?;
    Ok(ScheduleSolution {
        schedule,
        sum_sq: shift * shift * h,
        continuous_horizon: (s > 0.0).then(|| d / s),
    })
}

fn check_cyclic(l: usize, epochs: usize, j_star: usize) -> Result<()> {
    if l == 0 || epochs == 0 {
        return domain("batches per epoch and epochs must be at least 1");
    }
    if j_star == 0 || j_star > l {
        return domain(format!(
            "sensitive batch index must lie in 1..={l}, got {j_star}"
        ));
    }
    Ok(())
}

/// Sensitivities for steps `from+1..=to` when only batch `j*` of each epoch
/// touches the differing record.
fn cyclic_sensitivities(s: f64, l: usize, j_star: usize, from: usize, to: usize) -> Vec<f64> {
    (from + 1..=to)
        .map(|k| {
            if (k + l - j_star).is_multiple_of(l) {
                s
            } else {
                0.0
            }
        })
        .collect()
}

/// Closed-form `Σa²` of the cyclic strongly convex schedule, which does not
/// depend on the position of the sensitive batch.
pub fn cgd_sc_sum_sq(c: f64, s: f64, l: usize, epochs: usize) -> f64 {
    let cl = c.powi(l as i32);
    let cn = c.powi((l * (epochs - 1)) as i32);
    c.powi(2 * l as i32 - 2) * (1.0 - c * c) / ((1.0 - cl) * (1.0 - cl)) * (1.0 - cn) / (1.0 + cn)
        * s
        * s
}

/// Cyclic schedule, strongly convex case. Covers steps `1..=lE + j* − l − 1`,
/// i.e. everything before the last sensitive step.
pub fn cgd_sc_schedule(
    c: f64,
    s: f64,
    l: usize,
    epochs: usize,
    j_star: usize,
) -> Result<ScheduleSolution> {
    check_contraction(c)?;
    check_sensitivity(s)?;
    check_cyclic(l, epochs, j_star)?;
    let t = l * epochs;
    let horizon = t + j_star - l - 1;
    let denom = (1.0 - c.powi(l as i32)) * (1.0 + c.powi((t - l) as i32));
    let a = (1..=horizon)
        .map(|k| {
            if k >= j_star {
                c.powi((t + j_star - k - 2) as i32) * (1.0 - c * c) * s / denom
            } else {
                0.0
            }
        })
        .collect();
    let s_seq = cyclic_sensitivities(s, l, j_star, 0, horizon);
    let schedule = ShiftSchedule::from_shifts(0, c, s_seq, a, 0.0)?;
    if !schedule.is_terminal() {
        return domain("cyclic schedule does not close the gap");
    }
    let sum_sq = schedule.sum_sq();
    Ok(ScheduleSolution {
        schedule,
        sum_sq,
        continuous_horizon: None,
    })
}

/// Cyclic schedule, constrained case, coupling from epoch `τ`.
///
/// For `1 ≤ τ ≤ E − 1` the coupling starts `D` apart just before the
/// sensitive step of epoch `τ` and spreads `D + s(E − τ)` evenly over the
/// remaining `l(E − τ)` steps. For `τ = 0` it starts from the identical
/// iterates at step `j* − 1`.
pub fn cgd_proj_schedule(
    s: f64,
    d: f64,
    l: usize,
    epochs: usize,
    tau: usize,
    j_star: usize,
) -> Result<ScheduleSolution> {
    check_sensitivity(s)?;
    if !(d >= 0.0) || !d.is_finite() {
        return domain(format!("diameter must be finite and >= 0, got {d}"));
    }
    check_cyclic(l, epochs, j_star)?;
    if tau >= epochs {
        return domain(format!(
            "start epoch {tau} must be below the epoch count {epochs}"
        ));
    }
    let (start, z0, remaining) = if tau == 0 {
        (j_star - 1, 0.0, epochs - 1)
    } else {
        (j_star - 1 + l * (tau - 1), d, epochs - tau)
    };
    let horizon = start + l * remaining;
    let s_seq = cyclic_sensitivities(s, l, j_star, start, horizon);
    let shift = if remaining == 0 {
        0.0
    } else {
        (z0 + s * remaining as f64) / (l * remaining) as f64
    };
    let schedule = ShiftSchedule::from_shifts(start, 1.0, s_seq, vec![shift; l * remaining], z0)?;
    if !schedule.is_terminal() {
        return domain("cyclic schedule does not close the gap");
    }
    let sum_sq = schedule.sum_sq();
    Ok(ScheduleSolution {
        schedule,
        sum_sq,
        continuous_horizon: (s > 0.0).then(|| d / s),
    })
}
