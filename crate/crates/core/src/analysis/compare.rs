use super::metrics::tv_distance;
use crate::closed_form::{theorem_1d_piecewise_normalized, theorem_1d_piecewise_unnormalized};
use crate::ctmc::{DiscreteDistribution, NoiseSchedule, StateSpace};
use crate::guidance::{tilt, GuidanceSchedule, Mechanism};
use crate::sampling::{empirical_to_distribution, simulate_reverse, SamplerConfig};
use crate::{Error, Result};

/// One (mechanism, w) cell of [`mechanism_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub mechanism: Mechanism,
    pub w: f64,
    pub partition: f64,
    /// `unnormalized` or `normalized` closed form at `t_end`; for simple
    /// guidance an independent second run (`resample`).
    pub reference: &'static str,
    /// TV at `t_end`, before the final draw, to the reference.
    pub tv_reference: f64,
    /// TV of the final samples to `p^(w)`.
    pub tv_tilt: f64,
    /// Empirical mask fraction at half the horizon.
    pub mask_mass_mid: f64,
    pub overflow_clips: u64,
    pub degenerate_trajectories: u64,
}

/// Simulates every mechanism at every constant strength in `w_grid` on a
/// one-token masked space and scores it against the exact references.
pub fn mechanism_compare(
    space: StateSpace,
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    w_grid: &[f64],
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Vec<CompareRow>> {
    if space.mask_index().is_none() || space.dims() != 1 {
        return Err(Error::InvalidSpace("mechanism comparison runs on one masked token".into()));
    }
    let horizon = sched.horizon();
    let mid = 0.5 * horizon;
    let mut cfg = cfg.clone();
    for t in [mid, cfg.t_end] {
        if !cfg.snapshots.contains(&t) {
            cfg.snapshots.push(t);
        }
    }
    let snapshot = |out: &crate::sampling::SimulationOutput, t: f64| -> Result<DiscreteDistribution> {
        let (_, e) = out
            .snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * horizon)
            .ok_or_else(|| Error::InvalidConfig(format!("missing snapshot at {t}")))?;
        empirical_to_distribution(e)
    };
    let mut rows = Vec::new();
    for &w in w_grid {
        let schedule = GuidanceSchedule::constant(w)?;
        let tilted = tilt(p0, q0, w)?;
        for mechanism in Mechanism::ALL {
            let out = simulate_reverse(space, p0, q0, mechanism, &schedule, sched, &cfg)?;
            let at_end = snapshot(&out, cfg.t_end)?;
            let (reference, exact) = match mechanism {
                Mechanism::Unlocking => (
                    "unnormalized",
                    theorem_1d_piecewise_unnormalized(p0, q0, &[cfg.t_end, horizon], &[w], sched)?.distribution,
                ),
                Mechanism::Normalized => (
                    "normalized",
                    theorem_1d_piecewise_normalized(p0, q0, &[cfg.t_end, horizon], &[w], sched)?.distribution,
                ),
                Mechanism::Simple => {
                    let mut other = cfg.clone();
                    other.seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
                    let again = simulate_reverse(space, p0, q0, mechanism, &schedule, sched, &other)?;
                    ("resample", snapshot(&again, cfg.t_end)?)
                }
            };
            rows.push(CompareRow {
                mechanism,
                w,
                partition: tilted.partition(),
                reference,
                tv_reference: tv_distance(&at_end, &exact)?,
                tv_tilt: tv_distance(&empirical_to_distribution(&out.final_counts)?, tilted.distribution())?,
                mask_mass_mid: snapshot(&out, mid)?.masked_fraction(),
                overflow_clips: out.overflow_clips,
                degenerate_trajectories: out.degenerate_trajectories,
            });
        }
    }
    Ok(rows)
}
