use crate::ctmc::{DiscreteDistribution, StateSpace};
use crate::{Error, Result};

/// Visit counts per flattened state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    space: StateSpace,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn new(space: StateSpace) -> Self {
        Self { space, counts: vec![0; space.size()], total: 0 }
    }

    pub fn from_counts(space: StateSpace, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != space.size() {
            return Err(Error::Shape(format!(
                "{} counts for a space of {} states",
                counts.len(),
                space.size()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self { space, counts, total })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn record(&mut self, state: usize) {
        self.counts[state] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    /// Fraction of recorded tokens that are the mask symbol.
    pub fn masked_token_fraction(&self) -> f64 {
        let masked: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(x, &c)| c * self.space.masked_count(x) as u64)
            .sum();
        masked as f64 / (self.total as f64 * self.space.dims() as f64)
    }
}

pub fn empirical_to_distribution(e: &EmpiricalDistribution) -> Result<DiscreteDistribution> {
    if e.total == 0 {
        return Err(Error::InvalidDistribution("empirical distribution is empty".into()));
    }
    let n = e.total as f64;
    DiscreteDistribution::from_weights(e.space, e.counts.iter().map(|&c| c as f64 / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies() {
        let s = StateSpace::uniform(3, 1).unwrap();
        let e = EmpiricalDistribution::from_counts(s, vec![1, 1, 2]).unwrap();
        assert_eq!(empirical_to_distribution(&e).unwrap().values(), &[0.25, 0.25, 0.5]);
        let mut one = EmpiricalDistribution::new(s);
        one.record(2);
        assert_eq!(empirical_to_distribution(&one).unwrap().values(), &[0.0, 0.0, 1.0]);
        assert!(empirical_to_distribution(&EmpiricalDistribution::new(s)).is_err());
    }

    #[test]
    fn mask_fraction_counts_tokens() {
        let s = StateSpace::masked(2, 2).unwrap();
        // states: (0,0) (0,M) (M,0) (M,M)
        let e = EmpiricalDistribution::from_counts(s, vec![1, 1, 0, 2]).unwrap();
        assert!((e.masked_token_fraction() - 5.0 / 8.0).abs() < 1e-15);
    }
}
