use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use super::distribution::DiscreteDistribution;
use super::expm::matrix_exp;
use super::noise::NoiseSchedule;
use super::rate::RateMatrix;
use super::space::{Mode, StateSpace};
use crate::{Error, Result};

/// Probabilities below this are treated as unreachable when forming ratios.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

const MASS_DRIFT_TOL: f64 = 1e-10;

static MASS_DRIFT_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of times [`forward_evolve`] had to renormalize its output.
pub fn mass_drift_warnings() -> u64 {
    MASS_DRIFT_WARNINGS.load(Ordering::Relaxed)
}

fn require_masked(space: &StateSpace) -> Result<usize> {
    space.mask_index().ok_or(Error::ModeMismatch {
        expected: Mode::Masked.name(),
        actual: space.mode().name(),
    })
}

/// Exact forward propagation `exp((sigma_bar(t1) - sigma_bar(t0)) B) p`.
pub fn forward_evolve(
    p: &DiscreteDistribution,
    base: &RateMatrix,
    sched: &NoiseSchedule,
    t0: f64,
    t1: f64,
) -> Result<DiscreteDistribution> {
    if p.space() != base.space() {
        return Err(Error::SpaceMismatch);
    }
    if t1 < t0 {
        return Err(Error::InvalidInterval(format!(
            "forward evolution needs t0 <= t1, got {t0} > {t1}"
        )));
    }
    let elapsed = sched.sigma_bar(t1)? - sched.sigma_bar(t0)?;
    if elapsed == 0.0 {
        return Ok(p.clone());
    }
    let kernel = matrix_exp(&(base.entries() * elapsed))?;
    let out = kernel * DVector::from_column_slice(p.values());
    let mut values: Vec<f64> = out.iter().map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
    if let Some(bad) = values.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "forward evolution produced a negative entry {bad:e}"
        )));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > MASS_DRIFT_TOL {
        MASS_DRIFT_WARNINGS.fetch_add(1, Ordering::Relaxed);
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(DiscreteDistribution::from_raw(*p.space(), values))
}

/// Law at time `t` of the masking process started from `p0`: every unmasked
/// token is independently masked with probability `1 - e^{-sigma_bar(t)}`.
pub fn masked_forward_marginal(
    p0: &DiscreteDistribution,
    sched: &NoiseSchedule,
    t: f64,
) -> Result<DiscreteDistribution> {
    let space = *p0.space();
    let mask = require_masked(&space)?;
    let keep = sched.keep_prob(t)?;
    let masked = sched.mask_prob(t)?;
    let d = space.dims();
    let mut out = vec![0.0; space.size()];
    let mut unmasked_positions = Vec::with_capacity(d);
    for (y, &py) in p0.values().iter().enumerate() {
        if py == 0.0 {
            continue;
        }
        unmasked_positions.clear();
        unmasked_positions.extend((0..d).filter(|&k| space.token_at(y, k) != mask));
        let u = unmasked_positions.len();
        for pattern in 0u32..(1u32 << u) {
            let mut x = y;
            let n_masked = pattern.count_ones() as i32;
            for (bit, &k) in unmasked_positions.iter().enumerate() {
                if pattern & (1 << bit) != 0 {
                    x = space.with_token(x, k, mask);
                }
            }
            out[x] += py * keep.powi(u as i32 - n_masked) * masked.powi(n_masked);
        }
    }
    Ok(DiscreteDistribution::from_raw(space, out))
}

/// Time reversal of `sigma_t B` under the law `p_t`:
/// `R(y, x) = sigma_t B(x, y) p_t(y) / p_t(x)` off the diagonal.
///
/// Columns of states with `p_t(x) < 1e-300` are zeroed and listed in
/// [`RateMatrix::flagged_columns`].
pub fn reverse_rate_matrix(
    p_t: &DiscreteDistribution,
    base: &RateMatrix,
    sigma_t: f64,
) -> Result<RateMatrix> {
    if p_t.space() != base.space() {
        return Err(Error::SpaceMismatch);
    }
    check_rate_scale(sigma_t)?;
    let n = base.side();
    let p = p_t.values();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    let mut flagged = Vec::new();
    for x in 0..n {
        if p[x] < PROBABILITY_FLOOR {
            flagged.push(x);
            continue;
        }
        for y in 0..n {
            let fwd = base.rate(x, y);
            if y != x && fwd > 0.0 {
                entries[(y, x)] = sigma_t * fwd * (p[y] / p[x]);
            }
        }
    }
    Ok(RateMatrix::from_off_diagonal(*base.space(), entries, flagged))
}

pub(crate) fn check_rate_scale(sigma_t: f64) -> Result<()> {
    if !(sigma_t >= 0.0 && sigma_t.is_finite()) {
        return Err(Error::NonFinite(format!("noise rate {sigma_t}")));
    }
    Ok(())
}

/// Bayes conditional of the clean symbol at `position` given the unmasked
/// coordinates of `x`, over the `V - 1` non-mask symbols.
pub fn conditional_given_unmasked(
    p0: &DiscreteDistribution,
    x: usize,
    position: usize,
) -> Result<Vec<f64>> {
    let space = *p0.space();
    let mask = require_masked(&space)?;
    if x >= space.size() || position >= space.dims() {
        return Err(Error::Shape(format!(
            "state {x} / position {position} outside the space"
        )));
    }
    if space.token_at(x, position) != mask {
        return Err(Error::Shape(format!(
            "position {position} of state {x} is not masked"
        )));
    }
    let d = space.dims();
    let fixed: Vec<(usize, usize)> = (0..d)
        .map(|k| (k, space.token_at(x, k)))
        .filter(|&(_, t)| t != mask)
        .collect();
    let mut out = vec![0.0; mask];
    for (y, &py) in p0.values().iter().enumerate() {
        if py == 0.0 || fixed.iter().any(|&(k, t)| space.token_at(y, k) != t) {
            continue;
        }
        let sym = space.token_at(y, position);
        if sym != mask {
            out[sym] += py;
        }
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroProbabilityContext);
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(out)
}

/// Masked-diffusion score `p_t(x_hat) / p_t(x)` through the time-factorized
/// identity `e^{-sigma_bar}/(1 - e^{-sigma_bar}) * p0(x_hat^i | x^UM)`.
pub fn score_ratio_masked(
    p0: &DiscreteDistribution,
    sched: &NoiseSchedule,
    t: f64,
    x: usize,
    x_hat: usize,
    position: usize,
) -> Result<f64> {
    let space = *p0.space();
    let mask = require_masked(&space)?;
    if x >= space.size() || x_hat >= space.size() || position >= space.dims() {
        return Err(Error::Shape("state or position outside the space".into()));
    }
    if space.single_difference(x, x_hat) != Some(position)
        || space.token_at(x, position) != mask
        || space.token_at(x_hat, position) == mask
    {
        return Err(Error::Shape(format!(
            "states {x} and {x_hat} are not a single unmasking at position {position}"
        )));
    }
    let cond = conditional_given_unmasked(p0, x, position)?;
    let keep = sched.keep_prob(t)?;
    let masked = sched.mask_prob(t)?;
    Ok(keep / masked * cond[space.token_at(x_hat, position)])
}
