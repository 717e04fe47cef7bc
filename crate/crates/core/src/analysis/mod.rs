//! Metrics, the two-class toy dataset, and experiment sweeps comparing
//! simulated guidance against exact references.

mod compare;
mod metrics;
mod reference;
mod sweep;
mod toy;

pub use compare::{mechanism_compare, CompareRow};
pub use metrics::{kl_divergence, tv_distance, KlDivergence};
pub use reference::{exact_masked_reference, marginal_convention_gap};
pub use sweep::{coefficient_curves, combined_panels, schedule_sweep, tilted_panels, SweepRow};
pub use toy::{build_toy_dataset, build_toy_dataset_with, Corner, ToyDataset, ToyLayout, BUMP};
