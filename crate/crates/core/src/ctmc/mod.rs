//! Continuous-time Markov chain machinery over a flattened token space.

mod distribution;
mod evolve;
mod expm;
mod noise;
mod rate;
mod space;

pub use distribution::DiscreteDistribution;
pub use evolve::{
    conditional_given_unmasked, forward_evolve, mass_drift_warnings, masked_forward_marginal,
    reverse_rate_matrix, score_ratio_masked, PROBABILITY_FLOOR,
};
pub use expm::{matrix_exp, matrix_exp_block4, matrix_exp_rank_one, rank_one_exp_last_column};
pub use noise::{NoiseKind, NoiseSchedule};
pub use rate::{build_masked_base, build_uniform_base, RateMatrix};
pub use space::{Mode, StateSpace, MAX_STATES};
pub(crate) use evolve::check_rate_scale;
