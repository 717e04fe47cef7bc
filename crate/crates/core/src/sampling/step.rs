use rand::Rng;

use crate::{Error, Result};

/// One off-diagonal generator entry out of the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub to: usize,
    /// Token position changed by the jump.
    pub position: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub state: usize,
    /// `dt` times the exit rate exceeded one and the jump probabilities were
    /// scaled down to sum to one.
    pub clipped: bool,
}

fn check_rates(column: &[Jump], dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {dt}")));
    }
    if let Some(j) = column.iter().find(|j| !(j.rate >= 0.0 && j.rate.is_finite())) {
        return Err(Error::InvalidRateMatrix(format!("rate {} into state {}", j.rate, j.to)));
    }
    Ok(())
}

/// Jump probabilities of a first-order Euler step, scaled down when they
/// would exceed one. The stay probability is what remains.
pub fn euler_transition(column: &[Jump], dt: f64) -> Result<(Vec<f64>, bool)> {
    check_rates(column, dt)?;
    let mut probs: Vec<f64> = column.iter().map(|j| j.rate * dt).collect();
    let total: f64 = probs.iter().sum();
    let clipped = total > 1.0;
    if clipped {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    Ok((probs, clipped))
}

pub fn euler_step<R: Rng + ?Sized>(
    state: usize,
    column: &[Jump],
    dt: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    let (probs, clipped) = euler_transition(column, dt)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in column.iter().zip(&probs) {
        acc += p;
        if u < acc {
            return Ok(StepOutcome { state: j.to, clipped });
        }
    }
    Ok(StepOutcome { state, clipped })
}

/// Tau-leaping: each position fires with probability `1 - e^{-dt lambda_i}`
/// (a Poisson count of at least one) and then takes one jump drawn from its
/// own rates. Fired positions are applied together.
///
/// `set_token(state, position, to)` copies the token of state `to` at
/// `position` into `state`.
pub fn tau_leap_step<R: Rng + ?Sized>(
    state: usize,
    column: &[Jump],
    dt: f64,
    rng: &mut R,
    set_token: impl Fn(usize, usize, usize) -> usize,
) -> Result<usize> {
    check_rates(column, dt)?;
    let mut positions: Vec<usize> = column.iter().map(|j| j.position).collect();
    positions.sort_unstable();
    positions.dedup();
    let mut next = state;
    for pos in positions {
        let lambda: f64 = column.iter().filter(|j| j.position == pos).map(|j| j.rate).sum();
        if lambda <= 0.0 {
            continue;
        }
        let fire = -(-lambda * dt).exp_m1();
        if rng.random::<f64>() >= fire {
            continue;
        }
        let target = rng.random::<f64>() * lambda;
        let mut acc = 0.0;
        let mut chosen = None;
        for j in column.iter().filter(|j| j.position == pos) {
            acc += j.rate;
            chosen = Some(j.to);
            if target < acc {
                break;
            }
        }
        if let Some(to) = chosen {
            next = set_token(next, pos, to);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rates_stay() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let col = [Jump { to: 1, position: 0, rate: 0.0 }, Jump { to: 2, position: 0, rate: 0.0 }];
        for _ in 0..100 {
            assert_eq!(euler_step(0, &col, 0.5, &mut rng).unwrap().state, 0);
            assert_eq!(tau_leap_step(0, &col, 0.5, &mut rng, |_, _, to| to).unwrap(), 0);
        }
    }

    #[test]
    fn saturated_symmetric_step() {
        let col = [Jump { to: 1, position: 0, rate: 2.0 }, Jump { to: 2, position: 0, rate: 2.0 }];
        let (p, clipped) = euler_transition(&col, 0.25).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(!clipped);
        let (p, clipped) = euler_transition(&col, 1.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(clipped);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hits = [0usize; 3];
        for _ in 0..20_000 {
            hits[euler_step(0, &col, 0.25, &mut rng).unwrap().state] += 1;
        }
        assert_eq!(hits[0], 0);
        assert!((hits[1] as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn negative_rates_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col = [Jump { to: 1, position: 0, rate: -1.0 }];
        assert!(euler_step(0, &col, 0.1, &mut rng).is_err());
        assert!(tau_leap_step(0, &col, 0.1, &mut rng, |_, _, to| to).is_err());
    }
}
