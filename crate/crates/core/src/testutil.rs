use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctmc::{DiscreteDistribution, StateSpace};

pub fn random_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() + 0.05).collect()
}

/// Random law over all states.
pub fn random_any(space: StateSpace, seed: u64) -> DiscreteDistribution {
    DiscreteDistribution::from_weights(space, random_weights(space.size(), seed)).unwrap()
}

/// Random law with no mass on states that contain the mask symbol.
pub fn random_clean(space: StateSpace, seed: u64) -> DiscreteDistribution {
    let mut w = random_weights(space.size(), seed);
    if let Some(mask) = space.mask_index() {
        for (i, v) in w.iter_mut().enumerate() {
            if (0..space.dims()).any(|k| space.token_at(i, k) == mask) {
                *v = 0.0;
            }
        }
    }
    DiscreteDistribution::from_weights(space, w).unwrap()
}
