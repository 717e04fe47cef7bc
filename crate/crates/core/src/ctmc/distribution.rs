use super::space::StateSpace;
use crate::{Error, Result};

/// Accepted deviation of the raw total mass from 1 in [`DiscreteDistribution::new`].
const CONSTRUCTION_MASS_TOL: f64 = 1e-9;
/// Below this deviation [`DiscreteDistribution::new`] keeps the input bits.
const ROUNDING_MASS_TOL: f64 = 1e-13;

/// Exact probability table over a flattened [`StateSpace`].
///
/// Entries are nonnegative and sum to one up to floating-point rounding.
/// Tables off by more than rounding are rescaled by their measured total.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    space: StateSpace,
    values: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates a table that should already be a probability vector.
    pub fn new(space: StateSpace, values: Vec<f64>) -> Result<Self> {
        let values = check_entries(&space, values)?;
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > CONSTRUCTION_MASS_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        if (total - 1.0).abs() <= ROUNDING_MASS_TOL {
            return Ok(Self { space, values });
        }
        Ok(Self::rescaled(space, values, total))
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        let values = check_entries(&space, weights)?;
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self::rescaled(space, values, total))
    }

    pub fn point_mass(space: StateSpace, index: usize) -> Result<Self> {
        if index >= space.size() {
            return Err(Error::Shape(format!(
                "state {index} outside space of size {}",
                space.size()
            )));
        }
        let mut values = vec![0.0; space.size()];
        values[index] = 1.0;
        Ok(Self { space, values })
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.size();
        Self {
            space,
            values: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on the all-mask state.
    pub fn all_mask(space: StateSpace) -> Result<Self> {
        let idx = space.all_mask_state().ok_or(Error::ModeMismatch {
            expected: "masked",
            actual: "uniform",
        })?;
        Self::point_mass(space, idx)
    }

    /// Wraps a table the caller has already checked.
    pub(crate) fn from_raw(space: StateSpace, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), space.size());
        Self { space, values }
    }

    fn rescaled(space: StateSpace, mut values: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            values.iter_mut().for_each(|v| *v /= total);
        }
        Self { space, values }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Marginal law of the symbol at `position` (length `V`).
    pub fn marginal(&self, position: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.vocab_size()];
        for (idx, &p) in self.values.iter().enumerate() {
            out[self.space.token_at(idx, position)] += p;
        }
        out
    }

    /// Expected fraction of positions holding the mask symbol.
    pub fn masked_fraction(&self) -> f64 {
        let d = self.space.dims() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(idx, &p)| p * self.space.masked_count(idx) as f64 / d)
            .sum()
    }

    /// Probability of the all-mask state (zero for uniform spaces).
    pub fn all_mask_mass(&self) -> f64 {
        self.space
            .all_mask_state()
            .map_or(0.0, |idx| self.values[idx])
    }

    /// Largest entry and its index (first index on ties).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

fn check_entries(space: &StateSpace, mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.len() != space.size() {
        return Err(Error::Shape(format!(
            "distribution has {} entries, space has {} states",
            values.len(),
            space.size()
        )));
    }
    for (i, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("entry {i} is {v}")));
        }
        if *v < -1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is negative ({v:e})"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_unnormalized_and_negative() {
        let s = StateSpace::uniform(3, 1).unwrap();
        assert!(DiscreteDistribution::new(s, vec![0.5, 0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::new(s, vec![1.1, -0.1, 0.0]).is_err());
        assert!(DiscreteDistribution::new(s, vec![0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::new(s, vec![f64::NAN, 0.5, 0.5]).is_err());
        let d = DiscreteDistribution::new(s, vec![0.2, 0.3, 0.5]).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginals_and_mask_statistics() {
        let s = StateSpace::masked(3, 2).unwrap();
        let mut w = vec![0.0; 9];
        w[s.flatten(&[0, 2]).unwrap()] = 1.0;
        w[s.flatten(&[2, 2]).unwrap()] = 1.0;
        let d = DiscreteDistribution::from_weights(s, w).unwrap();
        assert_eq!(d.marginal(1), vec![0.0, 0.0, 1.0]);
        assert!((d.masked_fraction() - 0.75).abs() < 1e-15);
        assert!((d.all_mask_mass() - 0.5).abs() < 1e-15);
    }
}
