use rayon::prelude::*;

use super::metrics::tv_distance;
use super::reference::exact_masked_reference;
use crate::closed_form::{corollary_2d_threepiece, threepiece_coefficients, ThreePieceCoefficients};
use crate::ctmc::{DiscreteDistribution, NoiseSchedule, StateSpace};
use crate::guidance::{combined_distribution, progress_to_time, tilt, CombinedTable, GuidanceSchedule, Mechanism};
use crate::io::{Cell, Table};
use crate::sampling::{empirical_to_distribution, simulate_reverse, SamplerConfig};
use crate::{Error, Result};

/// Pieces used to approximate ramps in the exact reference.
const RAMP_STAIRCASE: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub schedule: String,
    /// `w` for constant schedules, the interval or ramp end point otherwise,
    /// NaN for piecewise schedules.
    pub parameter: f64,
    pub mechanism: Mechanism,
    /// TV at `t_end`, before the final draw, to the exact reference (a
    /// second independent run for simple guidance).
    pub tv_reference: f64,
    /// Three-piece coefficients, for two-token constant or three-piece schedules.
    pub coefficients: Option<ThreePieceCoefficients>,
    /// TV of the final samples to the three-piece closed form.
    pub tv_corollary: Option<f64>,
    pub overflow_clips: u64,
}

fn parameter(s: &GuidanceSchedule) -> f64 {
    match s {
        GuidanceSchedule::Constant(w) => *w,
        GuidanceSchedule::PiecewiseConstant { .. } => f64::NAN,
        GuidanceSchedule::LeftInterval { r, .. } | GuidanceSchedule::RampUp { r, .. } => *r,
        GuidanceSchedule::RightInterval { l, .. } | GuidanceSchedule::RampDown { l, .. } => *l,
    }
}

/// `(w0, w1, w2, t1, t2)` when the schedule is a three-piece schedule in
/// diffusion time (constant schedules count, with equal thirds).
fn three_pieces(s: &GuidanceSchedule, horizon: f64) -> Option<(f64, f64, f64, f64, f64)> {
    match s {
        GuidanceSchedule::Constant(w) => Some((*w, *w, *w, horizon / 3.0, 2.0 * horizon / 3.0)),
        GuidanceSchedule::PiecewiseConstant { breakpoints, weights } if weights.len() == 3 => Some((
            weights[2],
            weights[1],
            weights[0],
            progress_to_time(breakpoints[2], horizon),
            progress_to_time(breakpoints[1], horizon),
        )),
        _ => None,
    }
}

/// Simulates each schedule and compares it with the exact law at `t_end`.
/// On two tokens, constant and three-piece schedules are also scored against
/// the three-piece closed form.
pub fn schedule_sweep(
    space: StateSpace,
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    mechanism: Mechanism,
    schedules: &[GuidanceSchedule],
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<Vec<SweepRow>> {
    if space.mask_index().is_none() {
        return Err(Error::InvalidSpace("schedule sweeps run on masked spaces".into()));
    }
    let horizon = sched.horizon();
    let mut cfg = cfg.clone();
    if !cfg.snapshots.contains(&cfg.t_end) {
        cfg.snapshots.push(cfg.t_end);
    }
    let at_end = |out: &crate::sampling::SimulationOutput| -> Result<DiscreteDistribution> {
        let (_, e) = out
            .snapshots
            .iter()
            .find(|(s, _)| (s - cfg.t_end).abs() <= 1e-12 * horizon)
            .ok_or_else(|| Error::InvalidConfig("missing end snapshot".into()))?;
        empirical_to_distribution(e)
    };
    schedules
        .par_iter()
        .map(|schedule| {
            let out = simulate_reverse(space, p0, q0, mechanism, schedule, sched, &cfg)?;
            let end = at_end(&out)?;
            let reference = match mechanism {
                Mechanism::Simple => {
                    let mut other = cfg.clone();
                    other.seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
                    at_end(&simulate_reverse(space, p0, q0, mechanism, schedule, sched, &other)?)?
                }
                _ => exact_masked_reference(p0, q0, mechanism, schedule, sched, cfg.t_end, RAMP_STAIRCASE)?,
            };
            let (coefficients, tv_corollary) = match (space.dims(), three_pieces(schedule, horizon)) {
                (2, Some((w0, w1, w2, t1, t2))) => {
                    let (d, c) = corollary_2d_threepiece(p0, q0, w0, w1, w2, t1, t2, sched)?;
                    let fin = empirical_to_distribution(&out.final_counts)?;
                    (Some(c), Some(tv_distance(&fin, &d)?))
                }
                _ => (None, None),
            };
            Ok(SweepRow {
                schedule: schedule.describe(),
                parameter: parameter(schedule),
                mechanism,
                tv_reference: tv_distance(&end, &reference)?,
                coefficients,
                tv_corollary,
                overflow_clips: out.overflow_clips,
            })
        })
        .collect()
}

/// The six three-piece coefficients as functions of `t1` in `[0, t2]` for
/// each `t2`, sampled at `n` points.
pub fn coefficient_curves(sched: &NoiseSchedule, t2_values: &[f64], n: usize) -> Result<Table> {
    if n < 2 {
        return Err(Error::InvalidConfig("coefficient curves need at least two points".into()));
    }
    let mut cols = vec!["t2".to_string(), "t1".to_string()];
    cols.extend(ThreePieceCoefficients::NAMES.iter().map(|s| s.to_string()));
    let mut table = Table::new(cols);
    for &t2 in t2_values {
        for k in 0..n {
            let t1 = if k + 1 == n { t2 } else { t2 * k as f64 / (n - 1) as f64 };
            let c = threepiece_coefficients(sched, t1, t2)?;
            let mut row: Vec<Cell> = vec![t2.into(), t1.into()];
            row.extend(c.as_array().iter().map(|&v| Cell::Num(v)));
            table.push(row)?;
        }
    }
    Ok(table)
}

/// `p^(w)` for each strength.
pub fn tilted_panels(p: &DiscreteDistribution, q: &DiscreteDistribution, ws: &[f64]) -> Result<Vec<(f64, DiscreteDistribution)>> {
    ws.iter().map(|&w| Ok((w, tilt(p, q, w)?.into_distribution()))).collect()
}

/// `p^(w,gamma)` for each pair.
pub fn combined_panels(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    pairs: &[(f64, f64)],
) -> Result<Vec<CombinedTable>> {
    pairs.iter().map(|&(w, g)| combined_distribution(p, q, w, g)).collect()
}
