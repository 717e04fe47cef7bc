use crate::ctmc::{DiscreteDistribution, PROBABILITY_FLOOR};
use crate::{Error, Result};

/// `base^exponent` with `0^e = 0` for `e > 0`, `0^0 = 1`, and `None` when a
/// zero base meets a negative exponent.
fn power(base: f64, exponent: f64) -> Option<f64> {
    if base > 0.0 {
        Some((exponent * base.ln()).exp())
    } else if exponent > 0.0 {
        Some(0.0)
    } else if exponent == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

/// Geometric interpolation `a^w b^{1-w}` of two nonnegative numbers.
///
/// Returns `a` exactly at `w = 1` and `b` exactly at `w = 0`. A zero raised to
/// a negative exponent removes the entry from the support, reported as 0.
pub fn geometric_weight(a: f64, b: f64, w: f64) -> f64 {
    if w == 1.0 {
        return a;
    }
    if w == 0.0 {
        return b;
    }
    match (power(a, w), power(b, 1.0 - w)) {
        (Some(x), Some(y)) => x * y,
        _ => 0.0,
    }
}

/// Unnormalized tilt of two weight vectors and its total.
pub fn tilt_weights(p: &[f64], q: &[f64], w: f64) -> (Vec<f64>, f64) {
    debug_assert_eq!(p.len(), q.len());
    let weights: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| geometric_weight(a, b, w))
        .collect();
    let total = weights.iter().sum();
    (weights, total)
}

/// `p^(w) = p^w q^{1-w} / Z_w` together with the partition value `Z_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedDistribution {
    values: DiscreteDistribution,
    z_w: f64,
    w: f64,
}

impl TiltedDistribution {
    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.values
    }

    pub fn into_distribution(self) -> DiscreteDistribution {
        self.values
    }

    pub fn partition(&self) -> f64 {
        self.z_w
    }

    pub fn strength(&self) -> f64 {
        self.w
    }

    pub fn values(&self) -> &[f64] {
        self.values.values()
    }
}

pub fn tilt(p: &DiscreteDistribution, q: &DiscreteDistribution, w: f64) -> Result<TiltedDistribution> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    if !w.is_finite() {
        return Err(Error::NonFinite(format!("guidance strength {w}")));
    }
    if w == 1.0 || w == 0.0 {
        let values = if w == 1.0 { p.clone() } else { q.clone() };
        return Ok(TiltedDistribution { values, z_w: 1.0, w });
    }
    let (weights, z_w) = tilt_weights(p.values(), q.values(), w);
    if !(z_w >= PROBABILITY_FLOOR) || !z_w.is_finite() {
        return Err(Error::DegenerateTilt(z_w));
    }
    let values = DiscreteDistribution::from_weights(*p.space(), weights)?;
    Ok(TiltedDistribution { values, z_w, w })
}
