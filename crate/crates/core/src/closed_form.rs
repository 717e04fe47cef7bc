//! Exact evaluators for guided masked diffusion started from (or passing
//! through) arbitrary distributions, for one and two tokens.
//!
//! In one token the guided generator at time `t` is
//! `c(t) Z_w (p^(w), -1)` in the mask column (unlocking) or
//! `c(t) (p^(w), -1)` (normalized), with `c` the unmasking prefactor. Its
//! integral over `[s, t]` is `-ln(mask_ratio(s, t))` times a fixed matrix,
//! which gives the recursions below.

use crate::ctmc::{DiscreteDistribution, NoiseSchedule, StateSpace};
use crate::guidance::{tilt, TiltedDistribution};
use crate::quadrature::{integrate_dense, integrate_vec, MAX_EVALUATIONS};
use crate::{Error, Result};

/// Lower time bound of the one-token quadrature under a log-linear schedule.
pub const LOG_LINEAR_T_MIN: f64 = 1e-4;

const QUAD_PANELS: usize = 32;

fn require_masked(p: &DiscreteDistribution, dims: usize) -> Result<(StateSpace, usize)> {
    let space = *p.space();
    let mask = space.mask_index().ok_or(Error::ModeMismatch {
        expected: "masked",
        actual: space.mode().name(),
    })?;
    if space.dims() != dims {
        return Err(Error::InvalidSpace(format!(
            "expected {dims} token(s), got {}",
            space.dims()
        )));
    }
    Ok((space, mask))
}

/// Data tables must not put mass on states containing the mask symbol.
fn require_clean(p: &DiscreteDistribution, name: &str) -> Result<()> {
    let space = p.space();
    let dirty: f64 = (0..space.size())
        .filter(|&x| space.masked_count(x) > 0)
        .map(|x| p.prob(x))
        .sum();
    if dirty > 0.0 {
        return Err(Error::InvalidDistribution(format!(
            "{name} puts mass {dirty:e} on masked states"
        )));
    }
    Ok(())
}

fn check_pair(p: &DiscreteDistribution, q: &DiscreteDistribution, dims: usize) -> Result<(StateSpace, usize)> {
    let out = require_masked(p, dims)?;
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    require_clean(p, "p")?;
    require_clean(q, "q")?;
    Ok(out)
}

/// Result of the general one-token evaluator.
#[derive(Debug, Clone)]
pub struct GeneralResult {
    /// `p_t` from the exact solution of the guided dynamics.
    pub distribution: DiscreteDistribution,
    /// `Lambda = int_t^T c(s) Z_{w_s} ds`, so that `p_t(M) = p_T(M) e^{-Lambda}`.
    pub exponent: f64,
    /// `A_i = int_t^T c(s) Z_{w_s} p^(w_s)(i) ds` per token symbol.
    pub unmask_integrals: Vec<f64>,
    /// The averaged form `p_T + p_T(M) (A_i (1 - e^{-Lambda}) / Lambda, e^{-Lambda} - 1)`.
    /// It coincides with `distribution` when `w` is constant on `[t, T]`.
    pub averaged: DiscreteDistribution,
}

/// One-token masked diffusion under unlocking guidance with an arbitrary
/// strength profile `w_of_t` (in diffusion time), from `p_start` at the
/// horizon down to `t`.
///
/// Solves `p_t(i) = p_T(i) + p_T(M) int_t^T c Z p^(w_s)(i) e^{-Lambda(s)} ds`
/// by adaptive quadrature in the variable `u = ln(1 - e^{-sigma_bar})`, for
/// which `c ds = du`. `quad_tol` is the absolute tolerance per component.
pub fn theorem_1d_general(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    p_start: &DiscreteDistribution,
    w_of_t: &dyn Fn(f64) -> f64,
    sched: &NoiseSchedule,
    t: f64,
    quad_tol: f64,
) -> Result<GeneralResult> {
    let (space, mask) = check_pair(p, q, 1)?;
    if p_start.space() != &space {
        return Err(Error::SpaceMismatch);
    }
    let horizon = sched.horizon();
    let t_min = if sched.is_log_linear() { LOG_LINEAR_T_MIN } else { 0.0 };
    if !(t >= t_min && t > 0.0 && t < horizon) {
        return Err(Error::InvalidInterval(format!(
            "need {t_min} <= t < {horizon} with t > 0, got {t}"
        )));
    }
    let u_top = sched.mask_prob(horizon)?.ln();
    let length = u_top - sched.mask_prob(t)?.ln();
    let time_at = |v: f64| -> f64 {
        sched
            .time_for_mask_prob((u_top - v).exp())
            .unwrap_or(horizon)
            .clamp(t, horizon)
    };
    let tilt_at = |v: f64| -> Result<TiltedDistribution> { tilt(p, q, w_of_t(time_at(v))) };
    // Quadrature closures cannot return errors, so degenerate tilts are
    // surfaced before integrating and mapped to NaN inside.
    tilt_at(0.0)?;
    tilt_at(length)?;

    let lambda = integrate_dense(
        |v| tilt_at(v).map(|d| d.partition()).unwrap_or(f64::NAN),
        0.0,
        length,
        quad_tol,
        QUAD_PANELS,
        MAX_EVALUATIONS,
    )?;
    let n = space.size();
    // Components 0..n: e^{-Lambda}-weighted unmasking; n..2n: A_i.
    let integrals = integrate_vec(
        |v, out| match tilt_at(v) {
            Ok(d) => {
                let decay = (-lambda.cumulative(v)).exp();
                let z = d.partition();
                for (i, &pi) in d.values().iter().enumerate() {
                    out[i] = z * pi * decay;
                    out[n + i] = z * pi;
                }
            }
            Err(_) => out.iter_mut().for_each(|x| *x = f64::NAN),
        },
        2 * n,
        0.0,
        length,
        quad_tol,
        QUAD_PANELS,
        MAX_EVALUATIONS - lambda.evaluations(),
    )?;
    let exponent = lambda.total();
    let survive = (-exponent).exp();
    let start = p_start.values();
    let pm = start[mask];
    let mut exact = start.to_vec();
    let mut averaged = start.to_vec();
    let unmask_integrals: Vec<f64> = integrals[n..].to_vec();
    let scale = if exponent > 0.0 { -(-exponent).exp_m1() / exponent } else { 1.0 };
    for i in 0..n {
        if i == mask {
            exact[i] = pm * survive;
            averaged[i] = pm * survive;
        } else {
            exact[i] += pm * integrals[i];
            averaged[i] += pm * unmask_integrals[i] * scale;
        }
    }
    Ok(GeneralResult {
        distribution: DiscreteDistribution::from_weights(space, exact)?,
        exponent,
        unmask_integrals: unmask_integrals
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| i != mask)
            .map(|(_, a)| a)
            .collect(),
        averaged: DiscreteDistribution::from_weights(space, averaged)?,
    })
}

/// Output of the piecewise-constant evaluators.
#[derive(Debug, Clone)]
pub struct PiecewiseResult {
    /// `p_delta`, with the residual mask mass on the mask state.
    pub distribution: DiscreteDistribution,
    /// `(t_i, p_{t_i}(M))` from the horizon down to `delta`.
    pub mask_mass_trace: Vec<(f64, f64)>,
    /// Mass moved onto `p^(w_i)` during segment `(t_i, t_{i+1}]`, indexed by `i`.
    pub per_segment_weights: Vec<f64>,
    /// `Z_{w_i}` per segment.
    pub partitions: Vec<f64>,
}

impl PiecewiseResult {
    pub fn residual_mask_mass(&self) -> f64 {
        self.mask_mass_trace.last().map_or(1.0, |&(_, m)| m)
    }
}

fn check_partition(partition: &[f64], weights: &[f64], sched: &NoiseSchedule) -> Result<()> {
    if partition.len() < 2 || partition.len() != weights.len() + 1 {
        return Err(Error::InvalidInterval(format!(
            "{} partition times for {} weights",
            partition.len(),
            weights.len()
        )));
    }
    if !(partition[0] > 0.0) {
        return Err(Error::InvalidInterval(format!(
            "first partition time must be positive, got {}",
            partition[0]
        )));
    }
    if partition.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInterval("partition must be strictly increasing".into()));
    }
    let last = *partition.last().unwrap();
    if (last - sched.horizon()).abs() > 1e-12 * sched.horizon() {
        return Err(Error::InvalidInterval(format!(
            "partition must end at the horizon {}, got {last}",
            sched.horizon()
        )));
    }
    Ok(())
}

fn piecewise(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    partition: &[f64],
    weights: &[f64],
    sched: &NoiseSchedule,
    normalized: bool,
) -> Result<PiecewiseResult> {
    let (space, mask) = check_pair(p, q, 1)?;
    check_partition(partition, weights, sched)?;
    let k = weights.len();
    let mut out = vec![0.0; space.size()];
    let mut per_segment_weights = vec![0.0; k];
    let mut partitions = vec![0.0; k];
    let mut trace = vec![(partition[k], 1.0)];
    let mut mass = 1.0;
    for i in (0..k).rev() {
        let tl = tilt(p, q, weights[i])?;
        let z = tl.partition();
        partitions[i] = z;
        let ratio = sched.mask_ratio(partition[i], partition[i + 1])?;
        let kept = if normalized { ratio } else { ratio.powf(z) };
        let moved = mass * (1.0 - kept);
        per_segment_weights[i] = moved;
        for (o, &v) in out.iter_mut().zip(tl.values()) {
            *o += moved * v;
        }
        mass *= kept;
        trace.push((partition[i], mass));
    }
    out[mask] += mass;
    Ok(PiecewiseResult {
        distribution: DiscreteDistribution::new(space, out)?,
        mask_mass_trace: trace,
        per_segment_weights,
        partitions,
    })
}

/// Piecewise-constant unlocking guidance from the all-mask state at the
/// horizon: on `(t_i, t_{i+1}]` a fraction `1 - ratio_i^{Z_{w_i}}` of the
/// remaining mask mass moves onto `p^(w_i)`.
pub fn theorem_1d_piecewise_unnormalized(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    partition: &[f64],
    weights: &[f64],
    sched: &NoiseSchedule,
) -> Result<PiecewiseResult> {
    piecewise(p, q, partition, weights, sched, false)
}

/// As [`theorem_1d_piecewise_unnormalized`] for normalized guidance: the
/// exponent `Z_{w_i}` disappears and the mask mass follows the unguided chain.
pub fn theorem_1d_piecewise_normalized(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    partition: &[f64],
    weights: &[f64],
    sched: &NoiseSchedule,
) -> Result<PiecewiseResult> {
    piecewise(p, q, partition, weights, sched, true)
}

fn check_times(sched: &NoiseSchedule, s: f64, t: f64) -> Result<()> {
    sched.check_time(s)?;
    sched.check_time(t)?;
    if !(s < t) || !(t > 0.0) {
        return Err(Error::InvalidInterval(format!("need 0 <= s < t, got s={s}, t={t}")));
    }
    Ok(())
}

/// One-token constant-`w` step from an arbitrary `p_t` at time `t` to time `s`:
/// `p_s(M) = ratio^Z p_t(M)` and `p_s(i) = p_t(i) + (p_t(M) - p_s(M)) p^(w)(i)`,
/// with `Z = 1` when `normalized`.
pub fn corollary_1d_constant(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    w: f64,
    sched: &NoiseSchedule,
    t: f64,
    s: f64,
    p_t: &DiscreteDistribution,
    normalized: bool,
) -> Result<DiscreteDistribution> {
    let (space, mask) = check_pair(p, q, 1)?;
    if p_t.space() != &space {
        return Err(Error::SpaceMismatch);
    }
    check_times(sched, s, t)?;
    let tl = tilt(p, q, w)?;
    let ratio = sched.mask_ratio(s, t)?;
    let kept = if normalized { ratio } else { ratio.powf(tl.partition()) };
    let pm = p_t.prob(mask);
    let moved = pm * (1.0 - kept);
    let mut out = p_t.values().to_vec();
    for (o, &v) in out.iter_mut().zip(tl.values()) {
        *o += moved * v;
    }
    out[mask] = pm * kept;
    DiscreteDistribution::new(space, out)
}

/// Two-token normalized guidance at constant `w` from `p_t` to time `s`.
///
/// With `r = mask_ratio(s, t)`, and the tilt `p^(w)` of the joint tables
/// supplying conditionals and marginals:
/// - `p_s(i,j) = p_t(i,j) + (1-r)^2 p^(w)(i,j) p_t(M,M)
///   + (1-r) [p^(w)(j|i) p_t(i,M) + p^(w)(i|j) p_t(M,j)]`,
/// - `p_s(i,M) = r p_t(i,M) + r (1-r) p^(w)(X1=i) p_t(M,M)`,
/// - `p_s(M,j) = r p_t(M,j) + r (1-r) p^(w)(X2=j) p_t(M,M)`,
/// - `p_s(M,M) = r^2 p_t(M,M)`.
pub fn theorem_2d_constant(
    p_t: &DiscreteDistribution,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    w: f64,
    sched: &NoiseSchedule,
    t: f64,
    s: f64,
) -> Result<DiscreteDistribution> {
    let (space, mask) = check_pair(p, q, 2)?;
    if p_t.space() != &space {
        return Err(Error::SpaceMismatch);
    }
    check_times(sched, s, t)?;
    let r = sched.mask_ratio(s, t)?;
    let tl = tilt(p, q, w)?;
    let joint = tl.values();
    let v = space.vocab_size();
    let m1 = tl.distribution().marginal(0);
    let m2 = tl.distribution().marginal(1);
    let at = |i: usize, j: usize| i * v + j;
    let pt = p_t.values();
    let pmm = pt[at(mask, mask)];
    let mut out = vec![0.0; v * v];
    for i in 0..mask {
        for j in 0..mask {
            let pij = joint[at(i, j)];
            let cond_j_given_i = if m1[i] > 0.0 { pij / m1[i] } else { 0.0 };
            let cond_i_given_j = if m2[j] > 0.0 { pij / m2[j] } else { 0.0 };
            out[at(i, j)] = pt[at(i, j)]
                + (1.0 - r) * (1.0 - r) * pij * pmm
                + (1.0 - r) * (cond_j_given_i * pt[at(i, mask)] + cond_i_given_j * pt[at(mask, j)]);
        }
        out[at(i, mask)] = r * pt[at(i, mask)] + r * (1.0 - r) * m1[i] * pmm;
    }
    for j in 0..mask {
        out[at(mask, j)] = r * pt[at(mask, j)] + r * (1.0 - r) * m2[j] * pmm;
    }
    out[at(mask, mask)] = r * r * pmm;
    DiscreteDistribution::new(space, out)
}

/// Weights of the six components of the three-piece two-token result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePieceCoefficients {
    /// Weight of `p^(w2)`: `a^2` with `a = (t3 - t2)/t3`.
    pub late: f64,
    /// Weight of `p^(w1)`: `b^2` with `b = (t2 - t1)/t3`.
    pub middle: f64,
    /// Weight of `p^(w0)`: `c^2` with `c = (t1 - t0)/t3`.
    pub early: f64,
    /// Weight of `p^(w1,w2)`: `a b`.
    pub late_middle: f64,
    /// Weight of `p^(w0,w2)`: `a c`.
    pub late_early: f64,
    /// Weight of `p^(w0,w1)`: `b c`.
    pub middle_early: f64,
}

impl ThreePieceCoefficients {
    pub fn as_array(&self) -> [f64; 6] {
        [self.late, self.middle, self.early, self.late_middle, self.late_early, self.middle_early]
    }

    pub const NAMES: [&'static str; 6] = ["a2", "b2", "c2", "ab", "ac", "bc"];
}

/// Coefficients for the partition `0 <= t1 <= t2 <= T`. Lengths are measured in
/// the mask probability `1 - e^{-sigma_bar}` relative to its value at `T`,
/// which is `t / T` for a log-linear schedule.
pub fn threepiece_coefficients(sched: &NoiseSchedule, t1: f64, t2: f64) -> Result<ThreePieceCoefficients> {
    let horizon = sched.horizon();
    if !(0.0 <= t1 && t1 <= t2 && t2 <= horizon) {
        return Err(Error::InvalidInterval(format!(
            "need 0 <= t1 <= t2 <= {horizon}, got t1={t1}, t2={t2}"
        )));
    }
    let r1 = sched.mask_ratio(t1, horizon)?;
    let r2 = sched.mask_ratio(t2, horizon)?;
    let (a, b, c) = (1.0 - r2, r2 - r1, r1);
    Ok(ThreePieceCoefficients {
        late: a * a,
        middle: b * b,
        early: c * c,
        late_middle: a * b,
        late_early: a * c,
        middle_early: b * c,
    })
}

/// Three-piece schedule in two tokens from the all-mask state: `w2` on
/// `(t2, T]`, `w1` on `(t1, t2]`, `w0` on `(0, t1]`. Returns the six-term
/// mixture of tilts and combined tables together with its coefficients.
pub fn corollary_2d_threepiece(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    w0: f64,
    w1: f64,
    w2: f64,
    t1: f64,
    t2: f64,
    sched: &NoiseSchedule,
) -> Result<(DiscreteDistribution, ThreePieceCoefficients)> {
    let (space, _) = check_pair(p, q, 2)?;
    if !(0.0 < t1 && t1 < t2 && t2 < sched.horizon()) {
        return Err(Error::InvalidInterval(format!(
            "need 0 < t1 < t2 < {}, got t1={t1}, t2={t2}",
            sched.horizon()
        )));
    }
    let coef = threepiece_coefficients(sched, t1, t2)?;
    let tilts = [tilt(p, q, w0)?, tilt(p, q, w1)?, tilt(p, q, w2)?];
    let combined = |cond: usize, marg: usize| {
        crate::guidance::combined_distribution(p, q, [w0, w1, w2][cond], [w0, w1, w2][marg])
    };
    let terms: [(f64, Vec<f64>); 6] = [
        (coef.late, tilts[2].values().to_vec()),
        (coef.middle, tilts[1].values().to_vec()),
        (coef.early, tilts[0].values().to_vec()),
        (coef.late_middle, combined(1, 2)?.values().to_vec()),
        (coef.late_early, combined(0, 2)?.values().to_vec()),
        (coef.middle_early, combined(0, 1)?.values().to_vec()),
    ];
    let mut out = vec![0.0; space.size()];
    for (c, table) in &terms {
        for (o, v) in out.iter_mut().zip(table) {
            *o += c * v;
        }
    }
    Ok((DiscreteDistribution::new(space, out)?, coef))
}

/// `p_t(M) = mask_ratio(t, T)^{Z}` on a uniform grid of `n_samples` times in
/// `[0, T]`, one column per requested `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmaskCurve {
    pub times: Vec<f64>,
    pub partitions: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

pub fn unmasking_curve(zw_values: &[f64], sched: &NoiseSchedule, n_samples: usize) -> Result<UnmaskCurve> {
    if n_samples < 2 {
        return Err(Error::InvalidConfig("an unmasking curve needs at least two samples".into()));
    }
    if zw_values.iter().any(|z| !(z.is_finite() && *z > 0.0)) {
        return Err(Error::InvalidConfig("partition values must be positive".into()));
    }
    let horizon = sched.horizon();
    let times: Vec<f64> = (0..n_samples)
        .map(|k| if k + 1 == n_samples { horizon } else { horizon * k as f64 / (n_samples - 1) as f64 })
        .collect();
    let ratios = times
        .iter()
        .map(|&t| sched.mask_ratio(t, horizon))
        .collect::<Result<Vec<_>>>()?;
    let columns = zw_values
        .iter()
        .map(|&z| ratios.iter().map(|r| r.powf(z)).collect())
        .collect();
    Ok(UnmaskCurve { times, partitions: zw_values.to_vec(), columns })
}
