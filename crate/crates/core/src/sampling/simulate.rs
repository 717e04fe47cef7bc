use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{SamplerConfig, SamplerKind};
use super::empirical::EmpiricalDistribution;
use super::step::{euler_step, tau_leap_step, Jump};
use crate::ctmc::{
    build_uniform_base, conditional_given_unmasked, forward_evolve, matrix_exp,
    rank_one_exp_last_column, reverse_rate_matrix, DiscreteDistribution, Mode, NoiseSchedule,
    RateMatrix, StateSpace,
};
use crate::guidance::{
    guided_rate_normalized, guided_rate_unlocking, simple_guidance_transition, tilt_weights,
    GuidanceSchedule, Mechanism,
};
use crate::{Error, Result};

/// Result of [`simulate_reverse`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    /// States at the end of the run.
    pub final_counts: EmpiricalDistribution,
    /// States at each requested snapshot time, before any final draw.
    pub snapshots: Vec<(f64, EmpiricalDistribution)>,
    /// Euler steps whose jump probabilities had to be scaled down.
    pub overflow_clips: u64,
    /// Trajectories that reached a state with no usable guided column; they
    /// stop there.
    pub degenerate_trajectories: u64,
    /// Masked positions filled by the final draw at `t_end`.
    pub resolved_at_end: u64,
    /// The descending time grid that was walked.
    pub grid: Vec<f64>,
}

/// Descending grid `T = g_0 > ... > g_K = t_end` of `steps` uniform steps
/// with the snapshot times inserted.
pub fn time_grid(horizon: f64, t_end: f64, steps: usize, snapshots: &[f64]) -> Vec<f64> {
    let h = (horizon - t_end) / steps as f64;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { t_end } else { horizon - h * k as f64 })
        .collect();
    for &s in snapshots {
        if !grid.iter().any(|&g| (g - s).abs() <= 1e-12 * horizon) {
            grid.push(s);
        }
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    grid
}

/// Conditionals of `p0` and `q0` at every masked position of one state.
struct Context {
    positions: Vec<(usize, Vec<f64>, Option<Vec<f64>>)>,
}

enum Model {
    Masked { contexts: Vec<OnceLock<Option<Arc<Context>>>> },
    Uniform { base: RateMatrix },
}

/// Per-step data of the uniform model: rates or a transition kernel.
enum UniformStep {
    Rates(DMatrix<f64>),
    Kernel(DMatrix<f64>),
}

struct Run<'a> {
    space: StateSpace,
    p0: &'a DiscreteDistribution,
    q0: &'a DiscreteDistribution,
    mechanism: Mechanism,
    sched: &'a NoiseSchedule,
    cfg: &'a SamplerConfig,
    model: Model,
}

#[derive(Clone, Copy, Default)]
struct Tally {
    clips: u64,
    resolved: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally {
            clips: self.clips + o.clips,
            resolved: self.resolved + o.resolved,
        }
    }
}

struct Walker {
    state: usize,
    rng: ChaCha8Rng,
    stuck: bool,
}

impl Run<'_> {
    fn context(&self, x: usize) -> Option<Arc<Context>> {
        let Model::Masked { contexts } = &self.model else {
            return None;
        };
        contexts[x]
            .get_or_init(|| {
                let mask = self.space.mask_index()?;
                let mut positions = Vec::new();
                for k in 0..self.space.dims() {
                    if self.space.token_at(x, k) != mask {
                        continue;
                    }
                    let cp = conditional_given_unmasked(self.p0, x, k).ok()?;
                    let cq = conditional_given_unmasked(self.q0, x, k).ok();
                    positions.push((k, cp, cq));
                }
                Some(Arc::new(Context { positions }))
            })
            .clone()
    }

    /// Tilted conditional weights at one position, or `None` if degenerate.
    fn tilted(cp: &[f64], cq: Option<&Vec<f64>>, w: f64) -> Option<(Vec<f64>, f64)> {
        let (weights, z) = if w == 1.0 {
            (cp.to_vec(), cp.iter().sum())
        } else {
            tilt_weights(cp, cq?, w)
        };
        (z > 0.0).then_some((weights, z))
    }

    fn masked_column(&self, ctx: &Context, x: usize, t: f64, w: f64) -> Result<Option<Vec<Jump>>> {
        let pref = self.sched.unmask_prefactor(t)?;
        let mut jumps = Vec::new();
        for (k, cp, cq) in &ctx.positions {
            let Some((weights, z)) = Self::tilted(cp, cq.as_ref(), w) else {
                return Ok(None);
            };
            let scale = match self.mechanism {
                Mechanism::Normalized => pref / z,
                _ => pref,
            };
            for (v, wt) in weights.into_iter().enumerate() {
                if wt > 0.0 {
                    jumps.push(Jump { to: self.space.with_token(x, *k, v), position: *k, rate: wt * scale });
                }
            }
        }
        Ok(Some(jumps))
    }

    fn draw(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last = i;
                acc += w;
                if target < acc {
                    return i;
                }
            }
        }
        last
    }

    fn uniform_step(&self, t: f64, s: f64, w: f64) -> Result<UniformStep> {
        let Model::Uniform { base } = &self.model else {
            unreachable!("uniform step on a masked model")
        };
        let p_t = forward_evolve(self.p0, base, self.sched, 0.0, t)?;
        let q_t = forward_evolve(self.q0, base, self.sched, 0.0, t)?;
        let sigma = self.sched.sigma(t)?;
        Ok(match self.mechanism {
            Mechanism::Unlocking => {
                UniformStep::Rates(guided_rate_unlocking(&p_t, &q_t, base, w, sigma)?.into_entries())
            }
            Mechanism::Normalized => {
                UniformStep::Rates(guided_rate_normalized(&p_t, &q_t, base, w, sigma)?.into_entries())
            }
            Mechanism::Simple => {
                let dt = t - s;
                let kp = matrix_exp(&(reverse_rate_matrix(&p_t, base, sigma)?.into_entries() * dt))?;
                let kq = matrix_exp(&(reverse_rate_matrix(&q_t, base, sigma)?.into_entries() * dt))?;
                let clean = |k: DMatrix<f64>| -> DMatrix<f64> {
                    let mut k = k.map(|v| v.max(0.0));
                    for mut col in k.column_iter_mut() {
                        let total: f64 = col.iter().sum();
                        col /= total;
                    }
                    k
                };
                UniformStep::Kernel(simple_guidance_transition(&clean(kp), &clean(kq), w)?)
            }
        })
    }

    fn advance(&self, walker: &mut Walker, t: f64, s: f64, w: f64, uniform: Option<&UniformStep>) -> Result<Tally> {
        let mut tally = Tally::default();
        if walker.stuck {
            return Ok(tally);
        }
        let x = walker.state;
        let dt = t - s;
        let space = self.space;
        let set_token = |state: usize, pos: usize, to: usize| space.with_token(state, pos, space.token_at(to, pos));
        match uniform {
            None => {
                let Some(ctx) = self.context(x) else {
                    walker.stuck = true;
                    return Ok(tally);
                };
                if ctx.positions.is_empty() {
                    return Ok(tally);
                }
                if self.mechanism == Mechanism::Simple {
                    let lambda = self.sched.integrated_prefactor(s, t)?;
                    let mut next = x;
                    for (k, cp, cq) in &ctx.positions {
                        let kernel = |c: &[f64]| -> Result<Vec<f64>> {
                            let mut v: Vec<f64> = c.iter().map(|a| a * lambda).collect();
                            v.push(-lambda);
                            rank_one_exp_last_column(&v)
                        };
                        let kp = kernel(cp)?;
                        let kq = match cq {
                            Some(c) => kernel(c)?,
                            None if w == 1.0 => kp.clone(),
                            None => {
                                walker.stuck = true;
                                return Ok(tally);
                            }
                        };
                        let (weights, total) = tilt_weights(&kp, &kq, w);
                        if !(total > 0.0) {
                            walker.stuck = true;
                            return Ok(tally);
                        }
                        let v = Self::draw(&weights, total, &mut walker.rng);
                        if v < cp.len() {
                            next = space.with_token(next, *k, v);
                        }
                    }
                    walker.state = next;
                    return Ok(tally);
                }
                let Some(column) = self.masked_column(&ctx, x, t, w)? else {
                    walker.stuck = true;
                    return Ok(tally);
                };
                walker.state = self.sampler_step(x, &column, dt, &mut walker.rng, &mut tally, set_token)?;
            }
            Some(UniformStep::Rates(m)) => {
                let column: Vec<Jump> = (0..m.nrows())
                    .filter(|&y| y != x && m[(y, x)] > 0.0)
                    .map(|y| Jump {
                        to: y,
                        position: space.single_difference(x, y).unwrap_or(0),
                        rate: m[(y, x)],
                    })
                    .collect();
                walker.state = self.sampler_step(x, &column, dt, &mut walker.rng, &mut tally, set_token)?;
            }
            Some(UniformStep::Kernel(k)) => {
                let col: Vec<f64> = k.column(x).iter().copied().collect();
                let total = col.iter().sum();
                walker.state = Self::draw(&col, total, &mut walker.rng);
            }
        }
        Ok(tally)
    }

    fn sampler_step(
        &self,
        x: usize,
        column: &[Jump],
        dt: f64,
        rng: &mut ChaCha8Rng,
        tally: &mut Tally,
        set_token: impl Fn(usize, usize, usize) -> usize,
    ) -> Result<usize> {
        Ok(match self.cfg.kind {
            SamplerKind::Euler => {
                let out = euler_step(x, column, dt, rng)?;
                tally.clips += out.clipped as u64;
                out.state
            }
            SamplerKind::TauLeaping => tau_leap_step(x, column, dt, rng, set_token)?,
        })
    }

    /// Fills every remaining masked position from its tilted conditional.
    fn resolve(&self, walker: &mut Walker, w: f64) -> Tally {
        let mut tally = Tally::default();
        if walker.stuck {
            return tally;
        }
        let Some(ctx) = self.context(walker.state) else {
            walker.stuck = true;
            return tally;
        };
        let mut next = walker.state;
        for (k, cp, cq) in &ctx.positions {
            let Some((weights, z)) = Self::tilted(cp, cq.as_ref(), w) else {
                walker.stuck = true;
                return tally;
            };
            next = self.space.with_token(next, *k, Self::draw(&weights, z, &mut walker.rng));
            tally.resolved += 1;
        }
        walker.state = next;
        tally
    }
}

/// Simulates `cfg.trajectories` reverse trajectories of the guided chain
/// from the horizon down to `cfg.t_end`.
///
/// Masked mode starts from the all-mask state; unlocking and normalized
/// guidance take sampler steps on the guided column of the current state,
/// and simple guidance draws each masked position from the interpolation of
/// the exact one-step kernels of the two models. Uniform mode starts from a
/// uniform draw and uses the full guided matrices at each grid time (simple
/// guidance: exponentials of the two reverse generators over the step).
pub fn simulate_reverse(
    space: StateSpace,
    p0: &DiscreteDistribution,
    q0: &DiscreteDistribution,
    mechanism: Mechanism,
    schedule: &GuidanceSchedule,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
) -> Result<SimulationOutput> {
    if p0.space() != &space || q0.space() != &space {
        return Err(Error::SpaceMismatch);
    }
    let horizon = sched.horizon();
    cfg.validate(horizon)?;
    let model = match space.mode() {
        Mode::Masked => {
            if !(cfg.t_end > 0.0) {
                return Err(Error::InvalidConfig("masked sampling needs t_end > 0".into()));
            }
            Model::Masked { contexts: (0..space.size()).map(|_| OnceLock::new()).collect() }
        }
        Mode::Uniform => Model::Uniform { base: build_uniform_base(&space)? },
    };
    let run = Run { space, p0, q0, mechanism, sched, cfg, model };
    let grid = time_grid(horizon, cfg.t_end, cfg.steps, &cfg.snapshots);

    let mut walkers: Vec<Walker> = (0..cfg.trajectories)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let state = match space.all_mask_state() {
                Some(m) => m,
                None => rng.random_range(0..space.size()),
            };
            Walker { state, rng, stuck: false }
        })
        .collect();

    let snapshot_at = |t: f64| cfg.snapshots.iter().any(|&s| (s - t).abs() <= 1e-12 * horizon);
    let record = |walkers: &[Walker]| {
        let mut e = EmpiricalDistribution::new(space);
        walkers.iter().for_each(|w| e.record(w.state));
        e
    };
    let mut snapshots = Vec::new();
    let mut total = Tally::default();
    if snapshot_at(grid[0]) {
        snapshots.push((grid[0], record(&walkers)));
    }
    for k in 0..grid.len() - 1 {
        let (t, s) = (grid[k], grid[k + 1]);
        let w = schedule.at_time(t, horizon);
        let uniform = match run.model {
            Model::Uniform { .. } => Some(run.uniform_step(t, s, w)?),
            Model::Masked { .. } => None,
        };
        let tally = walkers
            .par_iter_mut()
            .map(|walker| run.advance(walker, t, s, w, uniform.as_ref()))
            .try_reduce(Tally::default, |a, b| Ok(a + b))?;
        total = total + tally;
        if snapshot_at(s) {
            snapshots.push((s, record(&walkers)));
        }
    }
    if space.mode() == Mode::Masked && !cfg.keep_masked_at_end {
        let w = schedule.at_time(cfg.t_end, horizon);
        let tally = walkers
            .par_iter_mut()
            .map(|walker| run.resolve(walker, w))
            .reduce(Tally::default, |a, b| a + b);
        total = total + tally;
    }
    let stuck = walkers.iter().filter(|w| w.stuck).count() as u64;
    Ok(SimulationOutput {
        final_counts: record(&walkers),
        snapshots,
        overflow_clips: total.clips,
        degenerate_trajectories: stuck,
        resolved_at_end: total.resolved,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_clean;

    #[test]
    fn grid_shape() {
        let g = time_grid(1.0, 0.001, 4, &[0.5, 0.75]);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 0.001);
        assert!(g.windows(2).all(|p| p[0] > p[1]));
        assert!(g.contains(&0.5));
    }

    #[test]
    fn runs_are_deterministic_and_monotone() {
        let s = StateSpace::masked(3, 2).unwrap();
        let p = random_clean(s, 1);
        let q = random_clean(s, 2);
        let sched = NoiseSchedule::log_linear(0.99, 1.0).unwrap();
        let g = GuidanceSchedule::Constant(2.0);
        for mech in Mechanism::ALL {
            for kind in [SamplerKind::Euler, SamplerKind::TauLeaping] {
                let cfg = SamplerConfig::new(kind, 20, 500, 7).with_snapshots(vec![0.8, 0.5, 0.2]);
                let a = simulate_reverse(s, &p, &q, mech, &g, &sched, &cfg).unwrap();
                let b = simulate_reverse(s, &p, &q, mech, &g, &sched, &cfg).unwrap();
                assert_eq!(a, b);
                let fractions: Vec<f64> = a.snapshots.iter().map(|(_, e)| e.masked_token_fraction()).collect();
                assert!(fractions.windows(2).all(|f| f[0] >= f[1]));
                assert_eq!(a.final_counts.masked_token_fraction(), 0.0);
                assert_eq!(a.final_counts.total(), 500);
            }
        }
    }

    #[test]
    fn uniform_mode_runs() {
        let s = StateSpace::uniform(3, 1).unwrap();
        let p = DiscreteDistribution::new(s, vec![0.7, 0.2, 0.1]).unwrap();
        let q = DiscreteDistribution::uniform(s);
        let sched = NoiseSchedule::constant(1.0, 5.0).unwrap();
        let g = GuidanceSchedule::Constant(1.0);
        for mech in Mechanism::ALL {
            let cfg = SamplerConfig::new(SamplerKind::Euler, 100, 20_000, 3).with_t_end(0.0);
            let out = simulate_reverse(s, &p, &q, mech, &g, &sched, &cfg).unwrap();
            let e = crate::sampling::empirical_to_distribution(&out.final_counts).unwrap();
            for i in 0..3 {
                assert!((e.prob(i) - p.prob(i)).abs() < 0.03, "{mech} {:?}", e.values());
            }
        }
    }
}
