//! Reproducible reverse-time simulation of guided chains.
//!
//! Every trajectory draws from its own ChaCha8 stream keyed by
//! `(seed, trajectory index)`, so results do not depend on how trajectories
//! are spread over threads.

mod config;
mod empirical;
mod simulate;
mod step;

pub use config::{SamplerConfig, SamplerKind};
pub use empirical::{empirical_to_distribution, EmpiricalDistribution};
pub use simulate::{simulate_reverse, time_grid, SimulationOutput};
pub use step::{euler_step, euler_transition, tau_leap_step, Jump, StepOutcome};
