//! Classifier-free guidance in discrete diffusion.
//!
//! Three mechanisms are provided:
//! - unlocking guidance, which geometrically interpolates the reverse rates
//!   of the conditional and guiding chains;
//! - simple guidance, which interpolates one-step transition kernels;
//! - normalized guidance, which rescales each single-token jump group of an
//!   unlocking column so its total rate matches the unguided chain.

mod combined;
mod mechanisms;
mod schedule;
mod tilt;

pub use combined::{combined_distribution, CombinedTable};
pub use mechanisms::{
    column_normalization_factor, guided_rate_normalized, guided_rate_normalized_softmax,
    guided_rate_unlocking, masked_unit_column, masked_unit_generator, simple_guidance_transition,
    Mechanism,
};
pub use schedule::{progress_to_time, time_to_progress, GuidanceSchedule};
pub use tilt::{geometric_weight, tilt, tilt_weights, TiltedDistribution};
