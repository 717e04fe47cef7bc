use crate::ctmc::DiscreteDistribution;
use crate::{Error, Result};

/// `0.5 * sum |a - b|`.
pub fn tv_distance(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<f64> {
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(0.5 * a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// `KL(a || b)`; infinite, with `support_violation` set, when `a` charges a
/// state that `b` does not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDivergence {
    pub value: f64,
    pub support_violation: bool,
}

pub fn kl_divergence(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<KlDivergence> {
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch);
    }
    let mut value = 0.0;
    for (&x, &y) in a.values().iter().zip(b.values()) {
        if x == 0.0 {
            continue;
        }
        if y == 0.0 {
            return Ok(KlDivergence { value: f64::INFINITY, support_violation: true });
        }
        value += x * (x / y).ln();
    }
    Ok(KlDivergence { value: value.max(0.0), support_violation: false })
}
