use nalgebra::DMatrix;

use super::tilt::{geometric_weight, tilt_weights};
use crate::ctmc::check_rate_scale;
use crate::ctmc::{
    conditional_given_unmasked, reverse_rate_matrix,
    DiscreteDistribution, Mode, NoiseSchedule, RateMatrix, StateSpace, PROBABILITY_FLOOR,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Unlocking,
    Simple,
    Normalized,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Unlocking, Mechanism::Simple, Mechanism::Normalized];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Unlocking => "unlocking",
            Mechanism::Simple => "simple",
            Mechanism::Normalized => "normalized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unlocking" => Ok(Mechanism::Unlocking),
            "simple" => Ok(Mechanism::Simple),
            "normalized" | "normalised" => Ok(Mechanism::Normalized),
            other => Err(Error::Parse(format!("unknown mechanism `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_pair(
    p_t: &DiscreteDistribution,
    q_t: &DiscreteDistribution,
    base: &RateMatrix,
) -> Result<()> {
    if p_t.space() != q_t.space() || p_t.space() != base.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Off-diagonal unlocking rates of one column, tagged with the position that
/// changes (`None` when the jump touches several positions).
fn unlocking_column(
    p: &[f64],
    q: &[f64],
    base: &RateMatrix,
    w: f64,
    sigma_t: f64,
    x: usize,
) -> Vec<(usize, Option<usize>, f64)> {
    let space = base.space();
    let mut out = Vec::new();
    for y in 0..base.side() {
        let fwd = base.rate(x, y);
        if y == x || fwd <= 0.0 {
            continue;
        }
        let rate = sigma_t * fwd * geometric_weight(p[y] / p[x], q[y] / q[x], w);
        out.push((y, space.single_difference(x, y), rate));
    }
    out
}

fn column_is_reachable(p: &[f64], q: &[f64], w: f64, x: usize) -> bool {
    p[x] >= PROBABILITY_FLOOR && (w == 1.0 || q[x] >= PROBABILITY_FLOOR)
}

/// Unlocking guidance:
/// `R(y, x) = sigma_t B(x, y) (p_t(y)/p_t(x))^w (q_t(y)/q_t(x))^{1-w}`.
///
/// At `w = 1` this is [`reverse_rate_matrix`] itself.
pub fn guided_rate_unlocking(
    p_t: &DiscreteDistribution,
    q_t: &DiscreteDistribution,
    base: &RateMatrix,
    w: f64,
    sigma_t: f64,
) -> Result<RateMatrix> {
    check_pair(p_t, q_t, base)?;
    if w == 1.0 {
        return reverse_rate_matrix(p_t, base, sigma_t);
    }
    check_rate_scale(sigma_t)?;
    let (p, q) = (p_t.values(), q_t.values());
    let n = base.side();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    let mut flagged = Vec::new();
    for x in 0..n {
        if !column_is_reachable(p, q, w, x) {
            flagged.push(x);
            continue;
        }
        for (y, _, rate) in unlocking_column(p, q, base, w, sigma_t, x) {
            entries[(y, x)] = rate;
        }
    }
    Ok(RateMatrix::from_off_diagonal(*base.space(), entries, flagged))
}

/// Rescaling applied to the jumps out of `x`:
/// `(sum p)^w (sum q)^{1-w} / sum p^w q^{1-w}` over the destinations reached
/// by the reverse chain from `x`.
///
/// With `position = Some(k)` the sums run over the jumps that change token
/// `k` only; with `None` they run over the whole column. For a single token
/// both coincide.
pub fn column_normalization_factor(
    p_t: &DiscreteDistribution,
    q_t: &DiscreteDistribution,
    base: &RateMatrix,
    w: f64,
    x: usize,
    position: Option<usize>,
) -> Result<f64> {
    check_pair(p_t, q_t, base)?;
    if x >= base.side() {
        return Err(Error::Shape(format!("state {x} outside the space")));
    }
    let (p, q) = (p_t.values(), q_t.values());
    let space = base.space();
    let (mut sp, mut sq, mut den) = (0.0, 0.0, 0.0);
    for y in 0..base.side() {
        if y == x || base.rate(x, y) <= 0.0 {
            continue;
        }
        if position.is_some() && space.single_difference(x, y) != position {
            continue;
        }
        sp += p[y];
        sq += q[y];
        den += geometric_weight(p[y], q[y], w);
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateColumn {
            column: x,
            reason: "no reachable destination has positive tilted weight".into(),
        });
    }
    Ok(geometric_weight(sp, sq, w) / den)
}

/// Normalized guidance: unlocking rates with every single-token jump group of
/// each column multiplied by its [`column_normalization_factor`].
pub fn guided_rate_normalized(
    p_t: &DiscreteDistribution,
    q_t: &DiscreteDistribution,
    base: &RateMatrix,
    w: f64,
    sigma_t: f64,
) -> Result<RateMatrix> {
    check_pair(p_t, q_t, base)?;
    if w == 1.0 {
        return reverse_rate_matrix(p_t, base, sigma_t);
    }
    check_rate_scale(sigma_t)?;
    let (p, q) = (p_t.values(), q_t.values());
    let n = base.side();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    let mut flagged = Vec::new();
    for x in 0..n {
        if !column_is_reachable(p, q, w, x) {
            flagged.push(x);
            continue;
        }
        let column = unlocking_column(p, q, base, w, sigma_t, x);
        let mut groups: Vec<Option<usize>> = column.iter().map(|&(_, g, _)| g).collect();
        groups.sort_unstable();
        groups.dedup();
        for group in groups {
            let factor = match column_normalization_factor(p_t, q_t, base, w, x, group) {
                Ok(f) => f,
                Err(Error::DegenerateColumn { .. }) => 0.0,
                Err(e) => return Err(e),
            };
            for &(y, g, rate) in &column {
                if g == group {
                    entries[(y, x)] = rate * factor;
                }
            }
        }
    }
    Ok(RateMatrix::from_off_diagonal(*base.space(), entries, flagged))
}

fn require_masked(space: &StateSpace) -> Result<usize> {
    space.mask_index().ok_or(Error::ModeMismatch {
        expected: Mode::Masked.name(),
        actual: space.mode().name(),
    })
}

/// Time-free unmasking rates out of the masked state `x`.
///
/// The guided generator of either rate-based mechanism at time `t` is
/// `unmask_prefactor(t)` times these rates. For `Normalized` each masked
/// position contributes the softmax of the interpolated conditional
/// log-probabilities; for `Unlocking` the unnormalized interpolation
/// `p0(v | x^UM)^w q0(v | x^UM)^{1-w}`. Returns `(destination, rate)` pairs,
/// or `None` when `x` is unreachable under `p0` or `q0`.
pub fn masked_unit_column(
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    w: f64,
    mechanism: Mechanism,
    x: usize,
) -> Result<Option<Vec<(usize, f64)>>> {
    if p0.space() != q0.space() {
        return Err(Error::SpaceMismatch);
    }
    let space = *p0.space();
    let mask = require_masked(&space)?;
    if mechanism == Mechanism::Simple {
        return Err(Error::InvalidConfig(
            "simple guidance has no rate matrix; use simple_guidance_transition".into(),
        ));
    }
    let mut out = Vec::new();
    for k in 0..space.dims() {
        if space.token_at(x, k) != mask {
            continue;
        }
        let cond_p = match conditional_given_unmasked(p0, x, k) {
            Ok(c) => c,
            Err(Error::ZeroProbabilityContext) => return Ok(None),
            Err(e) => return Err(e),
        };
        let cond_q = if w == 1.0 {
            cond_p.clone()
        } else {
            match conditional_given_unmasked(q0, x, k) {
                Ok(c) => c,
                Err(Error::ZeroProbabilityContext) => return Ok(None),
                Err(e) => return Err(e),
            }
        };
        let (weights, z) = tilt_weights(&cond_p, &cond_q, w);
        let scale = match mechanism {
            Mechanism::Normalized if z > 0.0 => 1.0 / z,
            Mechanism::Normalized => 0.0,
            _ => 1.0,
        };
        for (v, wt) in weights.into_iter().enumerate() {
            if wt > 0.0 {
                out.push((space.with_token(x, k, v), wt * scale));
            }
        }
    }
    Ok(Some(out))
}

/// Time-free guided generator assembled from [`masked_unit_column`].
pub fn masked_unit_generator(
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    w: f64,
    mechanism: Mechanism,
) -> Result<RateMatrix> {
    let space = *p0.space();
    require_masked(&space)?;
    let n = space.size();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    let mut flagged = Vec::new();
    for x in 0..n {
        match masked_unit_column(p0, q0, w, mechanism, x)? {
            None => flagged.push(x),
            Some(col) => {
                for (y, r) in col {
                    entries[(y, x)] = r;
                }
            }
        }
    }
    Ok(RateMatrix::from_off_diagonal(space, entries, flagged))
}

/// Normalized guidance for masked diffusion through logit interpolation:
/// `unmask_prefactor(t) * softmax(w log p0(.|x^UM) + (1-w) log q0(.|x^UM))`.
pub fn guided_rate_normalized_softmax(
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    sched: &NoiseSchedule,
    t: f64,
    w: f64,
) -> Result<RateMatrix> {
    let unit = masked_unit_generator(p0, q0, w, Mechanism::Normalized)?;
    Ok(unit.scaled(sched.unmask_prefactor(t)?))
}

/// Simple guidance on column-stochastic kernels: each column of
/// `K_p^w K_q^{1-w}` (entrywise) renormalized to sum to one.
pub fn simple_guidance_transition(
    k_p: &DMatrix<f64>,
    k_q: &DMatrix<f64>,
    w: f64,
) -> Result<DMatrix<f64>> {
    if k_p.shape() != k_q.shape() {
        return Err(Error::Shape(format!(
            "kernel shapes differ: {:?} vs {:?}",
            k_p.shape(),
            k_q.shape()
        )));
    }
    for k in [k_p, k_q] {
        for (j, col) in k.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            if col.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!(
                    "column {j} of a transition kernel is not a probability vector"
                )));
            }
        }
    }
    let mut out = DMatrix::<f64>::zeros(k_p.nrows(), k_p.ncols());
    for j in 0..k_p.ncols() {
        let a: Vec<f64> = k_p.column(j).iter().copied().collect();
        let b: Vec<f64> = k_q.column(j).iter().copied().collect();
        let (weights, total) = tilt_weights(&a, &b, w);
        if !(total > 0.0) {
            return Err(Error::DegenerateColumn {
                column: j,
                reason: "interpolated kernel column is identically zero".into(),
            });
        }
        for (i, v) in weights.into_iter().enumerate() {
            out[(i, j)] = v / total;
        }
    }
    Ok(out)
}
