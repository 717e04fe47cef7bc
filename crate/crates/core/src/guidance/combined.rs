use super::tilt::tilt;
use crate::ctmc::{DiscreteDistribution, StateSpace};
use crate::{Error, Result};

/// Raw two-token table `p^(w,gamma)`. Its entries sum to 2, so it is kept
/// apart from [`DiscreteDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedTable {
    space: StateSpace,
    values: Vec<f64>,
    w: f64,
    gamma: f64,
}

impl CombinedTable {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.space.vocab_size() + j]
    }

    pub fn strengths(&self) -> (f64, f64) {
        (self.w, self.gamma)
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// The table divided by its mass.
    pub fn normalized(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::from_weights(self.space, self.values.clone())
    }
}

/// `p^(w,gamma)(i,j) = p^(w)(X2=j | X1=i) p^(gamma)(X1=i)
///                   + p^(w)(X1=i | X2=j) p^(gamma)(X2=j)`.
///
/// Conditionals come from the joint tilt at `w`, marginals from the joint
/// tilt at `gamma`. A conditioning row of zero mass contributes nothing.
pub fn combined_distribution(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    w: f64,
    gamma: f64,
) -> Result<CombinedTable> {
    let space = *p.space();
    if space.dims() != 2 {
        return Err(Error::InvalidSpace(format!(
            "combined distribution needs two tokens, got {}",
            space.dims()
        )));
    }
    let tw = tilt(p, q, w)?;
    let tg = tilt(p, q, gamma)?;
    let v = space.vocab_size();
    let (m1w, m2w) = (tw.distribution().marginal(0), tw.distribution().marginal(1));
    let (m1g, m2g) = (tg.distribution().marginal(0), tg.distribution().marginal(1));
    let joint = tw.values();
    let mut values = vec![0.0; v * v];
    for i in 0..v {
        for j in 0..v {
            let pij = joint[i * v + j];
            if pij == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            if m1w[i] > 0.0 {
                acc += pij / m1w[i] * m1g[i];
            }
            if m2w[j] > 0.0 {
                acc += pij / m2w[j] * m2g[j];
            }
            values[i * v + j] = acc;
        }
    }
    Ok(CombinedTable { space, values, w, gamma })
}
