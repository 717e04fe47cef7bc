use nalgebra::{DMatrix, DVector};

use super::space::{Mode, StateSpace};
use crate::{Error, Result};

/// Largest side accepted for a dense generator.
pub(crate) const MAX_DENSE_SIDE: usize = 10_000;

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const COLUMN_SUM_TOL: f64 = 1e-10;

/// Dense CTMC generator over a flattened state space.
///
/// Entry `(x, y)` is the jump rate into state `x` from state `y`, so a
/// distribution evolves as `dp/dt = R p` and every column sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    space: StateSpace,
    entries: DMatrix<f64>,
    flagged: Vec<usize>,
}

impl RateMatrix {
    /// Validates off-diagonal signs and column sums.
    ///
    /// Column sums are checked against `1e-10` scaled by the column's exit
    /// rate when that exceeds one, so very stiff guided columns are not
    /// rejected for rounding alone.
    pub fn new(space: StateSpace, entries: DMatrix<f64>) -> Result<Self> {
        let n = space.size();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Shape(format!(
                "rate matrix is {}x{}, space has {n} states",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for y in 0..n {
            let mut sum = 0.0;
            for x in 0..n {
                let r = entries[(x, y)];
                if !r.is_finite() {
                    return Err(Error::NonFinite(format!("rate ({x}, {y}) is {r}")));
                }
                if x != y && r < -OFF_DIAGONAL_TOL {
                    return Err(Error::InvalidRateMatrix(format!(
                        "off-diagonal rate ({x}, {y}) = {r:e} is negative"
                    )));
                }
                sum += r;
            }
            let scale = entries[(y, y)].abs().max(1.0);
            if sum.abs() > COLUMN_SUM_TOL * scale {
                return Err(Error::InvalidRateMatrix(format!(
                    "column {y} sums to {sum:e}"
                )));
            }
        }
        Ok(Self {
            space,
            entries,
            flagged: Vec::new(),
        })
    }

    /// Builds from off-diagonal rates, filling the diagonal with minus each
    /// column's exit rate.
    pub(crate) fn from_off_diagonal(
        space: StateSpace,
        mut entries: DMatrix<f64>,
        flagged: Vec<usize>,
    ) -> Self {
        let n = entries.ncols();
        for y in 0..n {
            entries[(y, y)] = 0.0;
            let exit: f64 = entries.column(y).iter().sum();
            entries[(y, y)] = -exit;
        }
        Self {
            space,
            entries,
            flagged,
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    /// Rate into `to` from `from`.
    pub fn rate(&self, to: usize, from: usize) -> f64 {
        self.entries[(to, from)]
    }

    /// Total jump rate out of `state`.
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.entries[(state, state)]
    }

    /// Columns that were zeroed because their state had (numerically) zero
    /// probability under the law used to build the generator.
    pub fn flagged_columns(&self) -> &[usize] {
        &self.flagged
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: self.space,
            entries: &self.entries * factor,
            flagged: self.flagged.clone(),
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(p);
        (&self.entries * v).iter().copied().collect()
    }

    /// Largest absolute column sum.
    pub fn max_column_sum(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| c.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Most negative off-diagonal entry (zero if none are negative).
    pub fn min_off_diagonal(&self) -> f64 {
        let n = self.side();
        let mut m: f64 = 0.0;
        for y in 0..n {
            for x in 0..n {
                if x != y {
                    m = m.min(self.entries[(x, y)]);
                }
            }
        }
        m
    }
}

fn check_dense(space: &StateSpace) -> Result<()> {
    if space.size() > MAX_DENSE_SIDE {
        return Err(Error::InvalidSpace(format!(
            "{} states exceeds the dense generator cap of {MAX_DENSE_SIDE}",
            space.size()
        )));
    }
    Ok(())
}

/// Sums the single-position generator over every token position
/// (Kronecker sum), position 0 being the most significant factor.
fn kronecker_sum(space: &StateSpace, one_token: &DMatrix<f64>) -> DMatrix<f64> {
    let v = space.vocab_size();
    let n = space.size();
    let mut total = DMatrix::<f64>::zeros(n, n);
    for k in 0..space.dims() {
        let left = DMatrix::<f64>::identity(v.pow(k as u32), v.pow(k as u32));
        let right_side = v.pow((space.dims() - 1 - k) as u32);
        let right = DMatrix::<f64>::identity(right_side, right_side);
        total += left.kronecker(one_token).kronecker(&right);
    }
    total
}

/// Time-independent masking generator `B`; the forward generator is `sigma_t B`.
pub fn build_masked_base(space: &StateSpace) -> Result<RateMatrix> {
    let mask = space.mask_index().ok_or(Error::ModeMismatch {
        expected: Mode::Masked.name(),
        actual: space.mode().name(),
    })?;
    check_dense(space)?;
    let v = space.vocab_size();
    let mut one = DMatrix::<f64>::zeros(v, v);
    for y in 0..v {
        if y != mask {
            one[(y, y)] = -1.0;
            one[(mask, y)] = 1.0;
        }
    }
    RateMatrix::new(*space, kronecker_sum(space, &one))
}

/// Uniform-noise generator with per-token base `J/V - I`.
pub fn build_uniform_base(space: &StateSpace) -> Result<RateMatrix> {
    if space.mode() != Mode::Uniform {
        return Err(Error::ModeMismatch {
            expected: Mode::Uniform.name(),
            actual: space.mode().name(),
        });
    }
    check_dense(space)?;
    let v = space.vocab_size();
    let one = DMatrix::<f64>::from_element(v, v, 1.0 / v as f64) - DMatrix::<f64>::identity(v, v);
    RateMatrix::new(*space, kronecker_sum(space, &one))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_base_two_symbols() {
        let s = StateSpace::masked(2, 1).unwrap();
        let b = build_masked_base(&s).unwrap();
        assert_eq!(b.entries(), &DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn mask_column_is_absorbing() {
        for v in 2..7 {
            let s = StateSpace::masked(v, 1).unwrap();
            let b = build_masked_base(&s).unwrap();
            assert!(b.entries().column(v - 1).iter().all(|&r| r == 0.0));
        }
    }

    /// Oracle: enumerate all state pairs and add the one-token rate whenever
    /// they differ in exactly one position.
    #[test]
    fn masked_base_matches_single_token_enumeration() {
        let s = StateSpace::masked(3, 2).unwrap();
        let b = build_masked_base(&s).unwrap();
        let mask = 2;
        for y in 0..9 {
            let ty = s.unflatten(y);
            for x in 0..9 {
                let tx = s.unflatten(x);
                let diffs: Vec<usize> = (0..2).filter(|&k| tx[k] != ty[k]).collect();
                let expected = if x == y {
                    -(ty.iter().filter(|&&t| t != mask).count() as f64)
                } else if diffs.len() == 1 && tx[diffs[0]] == mask {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(b.rate(x, y), expected, "entry ({x}, {y})");
            }
        }
    }

    #[test]
    fn uniform_base_small_cases() {
        let s = StateSpace::uniform(2, 1).unwrap();
        let b = build_uniform_base(&s).unwrap();
        assert_eq!(b.entries(), &DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));

        let s = StateSpace::uniform(3, 2).unwrap();
        let b = build_uniform_base(&s).unwrap();
        let u = vec![1.0 / 9.0; 9];
        assert!(b.apply(&u).iter().all(|x| x.abs() < 1e-15));
        assert!(b.max_column_sum() < 1e-14);
    }

    #[test]
    fn wrong_mode_is_rejected() {
        assert!(matches!(
            build_masked_base(&StateSpace::uniform(3, 1).unwrap()),
            Err(Error::ModeMismatch { .. })
        ));
        assert!(matches!(
            build_uniform_base(&StateSpace::masked(3, 1).unwrap()),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn validation_rejects_bad_generators() {
        let s = StateSpace::uniform(2, 1).unwrap();
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        assert!(RateMatrix::new(s, neg).is_err());
        let unbalanced = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.5, 0.0]);
        assert!(RateMatrix::new(s, unbalanced).is_err());
    }
}
