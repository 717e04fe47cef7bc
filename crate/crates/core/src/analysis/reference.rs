use crate::ctmc::{DiscreteDistribution, NoiseSchedule};
use crate::guidance::{masked_unit_column, tilt, tilt_weights, GuidanceSchedule, Mechanism};
use crate::{Error, Result};

/// Time-free guided generator in sparse column form.
struct SparseGenerator {
    columns: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl SparseGenerator {
    fn build(p0: &DiscreteDistribution, q0: &DiscreteDistribution, w: f64, mech: Mechanism) -> Result<Self> {
        let n = p0.space().size();
        let mut columns = Vec::with_capacity(n);
        let mut exit = Vec::with_capacity(n);
        for x in 0..n {
            let col = masked_unit_column(p0, q0, w, mech, x)?.unwrap_or_default();
            exit.push(col.iter().map(|&(_, r)| r).sum());
            columns.push(col);
        }
        Ok(Self { columns, exit })
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, (e, x)) in out.iter_mut().zip(self.exit.iter().zip(v)) {
            *o = -e * x;
        }
        for (x, col) in self.columns.iter().enumerate() {
            if v[x] == 0.0 {
                continue;
            }
            for &(y, r) in col {
                out[y] += r * v[x];
            }
        }
    }

    /// `v <- exp(scale G) v` by a Taylor series on substeps of norm at most one.
    fn propagate(&self, v: &mut [f64], scale: f64) {
        let norm = 2.0 * self.exit.iter().cloned().fold(0.0, f64::max) * scale;
        let substeps = norm.ceil().max(1.0) as usize;
        let h = scale / substeps as f64;
        let n = v.len();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        for _ in 0..substeps {
            term.copy_from_slice(v);
            for k in 1..=60 {
                self.apply(&term, &mut next);
                let f = h / k as f64;
                let mut size = 0.0;
                for i in 0..n {
                    term[i] = next[i] * f;
                    v[i] += term[i];
                    size += term[i].abs();
                }
                if size < 1e-18 {
                    break;
                }
            }
        }
    }
}

/// Exact law at `t_end` of masked guided diffusion started from the all-mask
/// state, for unlocking or normalized guidance.
///
/// The guided generator at time `t` is `c(t) G(w_t)` with `G` time-free, so
/// each piece of constant strength is one exponential of `G` scaled by the
/// integrated prefactor. Schedules that are not piecewise constant are
/// replaced by `staircase` equal pieces with the strength at each midpoint.
pub fn exact_masked_reference(
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    mechanism: Mechanism,
    schedule: &GuidanceSchedule,
    sched: &NoiseSchedule,
    t_end: f64,
    staircase: usize,
) -> Result<DiscreteDistribution> {
    if mechanism == Mechanism::Simple {
        return Err(Error::InvalidConfig("simple guidance has no generator reference".into()));
    }
    let space = *p0.space();
    let horizon = sched.horizon();
    if !(t_end > 0.0 && t_end < horizon) {
        return Err(Error::InvalidInterval(format!("t_end must lie in (0, {horizon}), got {t_end}")));
    }
    let (times, weights) = match schedule.piecewise_segments(horizon, t_end) {
        Some(seg) => seg,
        None => {
            let k = staircase.max(1);
            let h = (horizon - t_end) / k as f64;
            let times: Vec<f64> = (0..=k).map(|i| if i == k { horizon } else { t_end + h * i as f64 }).collect();
            let weights = (0..k).map(|i| schedule.at_time(t_end + h * (i as f64 + 0.5), horizon)).collect();
            (times, weights)
        }
    };
    let mut v = DiscreteDistribution::all_mask(space)?.into_values();
    let mut cache: Vec<(f64, SparseGenerator)> = Vec::new();
    for i in (0..weights.len()).rev() {
        let w = weights[i];
        let pos = match cache.iter().position(|(cw, _)| *cw == w) {
            Some(p) => p,
            None => {
                cache.push((w, SparseGenerator::build(p0, q0, w, mechanism)?));
                cache.len() - 1
            }
        };
        let scale = sched.integrated_prefactor(times[i], times[i + 1])?;
        cache[pos].1.propagate(&mut v, scale);
    }
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    DiscreteDistribution::from_weights(space, v)
}

/// Largest total-variation gap, over both positions, between the marginal
/// of the joint tilt `p^(w)` and the tilt of the marginals of `p` and `q`.
/// The first governs the closed-form two-token evaluators, the second the
/// first unmasking of the normalized mechanism from the all-mask state.
pub fn marginal_convention_gap(p: &DiscreteDistribution, q: &DiscreteDistribution, w: f64) -> Result<f64> {
    if p.space().dims() != 2 {
        return Err(Error::InvalidSpace("the convention gap needs two tokens".into()));
    }
    let joint = tilt(p, q, w)?;
    let mut gap: f64 = 0.0;
    for k in 0..2 {
        let of_tilt = joint.distribution().marginal(k);
        let (weights, z) = tilt_weights(&p.marginal(k), &q.marginal(k), w);
        if !(z > 0.0) {
            return Err(Error::DegenerateTilt(z));
        }
        let tv: f64 = 0.5 * of_tilt.iter().zip(&weights).map(|(a, b)| (a - b / z).abs()).sum::<f64>();
        gap = gap.max(tv);
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{theorem_1d_piecewise_normalized, theorem_1d_piecewise_unnormalized, theorem_2d_constant};
    use crate::ctmc::StateSpace;
    use crate::testutil::random_clean;

    #[test]
    fn matches_one_token_closed_forms() {
        let s = StateSpace::masked(5, 1).unwrap();
        let p = random_clean(s, 1);
        let q = random_clean(s, 2);
        let sched = NoiseSchedule::log_linear(0.99, 1.0).unwrap();
        let g = GuidanceSchedule::parse("piecewise:0.3,0.7;1,3,2").unwrap();
        let (times, weights) = g.piecewise_segments(1.0, 0.01).unwrap();
        let a = exact_masked_reference(&p, &q, Mechanism::Unlocking, &g, &sched, 0.01, 0).unwrap();
        let b = theorem_1d_piecewise_unnormalized(&p, &q, &times, &weights, &sched).unwrap();
        assert!(crate::analysis::tv_distance(&a, &b.distribution).unwrap() < 1e-12);
        let a = exact_masked_reference(&p, &q, Mechanism::Normalized, &g, &sched, 0.01, 0).unwrap();
        let b = theorem_1d_piecewise_normalized(&p, &q, &times, &weights, &sched).unwrap();
        assert!(crate::analysis::tv_distance(&a, &b.distribution).unwrap() < 1e-12);
    }

    #[test]
    fn equal_models_match_two_token_theorem() {
        // With p = q every convention agrees.
        let s = StateSpace::masked(4, 2).unwrap();
        let p = random_clean(s, 3);
        let sched = NoiseSchedule::log_linear(0.99, 1.0).unwrap();
        let g = GuidanceSchedule::Constant(2.0);
        let a = exact_masked_reference(&p, &p, Mechanism::Normalized, &g, &sched, 0.2, 0).unwrap();
        let start = DiscreteDistribution::all_mask(s).unwrap();
        let b = theorem_2d_constant(&start, &p, &p, 2.0, &sched, 1.0, 0.2).unwrap();
        assert!(crate::analysis::tv_distance(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn gap_vanishes_for_product_tables() {
        let s1 = StateSpace::masked(4, 1).unwrap();
        let s = StateSpace::masked(4, 2).unwrap();
        let (a, b) = (random_clean(s1, 5), random_clean(s1, 6));
        let (c, d) = (random_clean(s1, 7), random_clean(s1, 8));
        let prod = |x: &DiscreteDistribution, y: &DiscreteDistribution| {
            let v = (0..16).map(|i| x.prob(i / 4) * y.prob(i % 4)).collect();
            DiscreteDistribution::new(s, v).unwrap()
        };
        let gap = marginal_convention_gap(&prod(&a, &b), &prod(&c, &d), 3.0).unwrap();
        assert!(gap < 1e-14);
        let corr = random_clean(s, 9);
        assert!(marginal_convention_gap(&corr, &random_clean(s, 10), 3.0).unwrap() > 1e-4);
    }
}
