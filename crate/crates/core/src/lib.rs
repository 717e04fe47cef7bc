//! Exact numerical laboratory for classifier-free guidance in masked and
//! uniform discrete diffusion.
//!
//! Everything operates on dense probability tables over a small flattened
//! token space, so every stochastic sampler can be checked against an exact
//! answer: either a matrix exponential of the guided generator or one of the
//! closed-form evaluators in [`closed_form`].
//!
//! Module map:
//! - [`ctmc`]: state spaces, distributions, noise schedules, forward and
//!   reverse generators, matrix exponentials.
//! - [`guidance`]: tilted distributions, the unlocking / simple / normalized
//!   guidance mechanisms and guidance schedules.
//! - [`closed_form`]: exact evaluators for piecewise and general guidance
//!   schedules in one and two token dimensions.
//! - [`sampling`]: reproducible Euler and tau-leaping reverse simulation.
//! - [`analysis`]: the toy dataset, metrics and experiment sweeps.
//! - [`io`]: CSV encoding of distributions and result tables.

pub mod analysis;
pub mod closed_form;
pub mod ctmc;
mod error;
pub mod guidance;
pub mod io;
pub mod quadrature;
pub mod sampling;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};

pub use ctmc::{DiscreteDistribution, Mode, NoiseSchedule, RateMatrix, StateSpace};
pub use guidance::{GuidanceSchedule, Mechanism, TiltedDistribution};
