use crate::ctmc::{DiscreteDistribution, StateSpace};
use crate::Result;

/// Bump profile of one cluster.
pub const BUMP: [[f64; 9]; 9] = [
    [0.1, 0.2, 0.3, 0.4, 0.5, 0.4, 0.3, 0.2, 0.1],
    [0.2, 0.4, 0.6, 0.7, 0.8, 0.7, 0.6, 0.4, 0.2],
    [0.3, 0.6, 0.8, 0.9, 1.0, 0.9, 0.8, 0.6, 0.3],
    [0.4, 0.7, 0.9, 1.0, 1.0, 1.0, 0.9, 0.7, 0.4],
    [0.5, 0.8, 1.0, 1.0, 1.0, 1.0, 1.0, 0.8, 0.5],
    [0.4, 0.7, 0.9, 1.0, 1.0, 1.0, 0.9, 0.7, 0.4],
    [0.3, 0.6, 0.8, 0.9, 1.0, 0.9, 0.8, 0.6, 0.3],
    [0.2, 0.4, 0.6, 0.7, 0.8, 0.7, 0.6, 0.4, 0.2],
    [0.1, 0.2, 0.3, 0.4, 0.5, 0.4, 0.3, 0.2, 0.1],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    fn offset(self, side: usize) -> (usize, usize) {
        let far = side - 9;
        match self {
            Corner::TopLeft => (0, 0),
            Corner::TopRight => (0, far),
            Corner::BottomLeft => (far, 0),
            Corner::BottomRight => (far, far),
        }
    }
}

/// Grid size and the corner tile of each class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyLayout {
    pub grid_side: usize,
    pub corners: [Corner; 2],
}

impl Default for ToyLayout {
    fn default() -> Self {
        Self { grid_side: 27, corners: [Corner::TopLeft, Corner::BottomRight] }
    }
}

/// Two classes on a `grid_side x grid_side` grid, encoded as two tokens
/// (row, column) over `grid_side + 1` symbols with the mask last. Each class
/// is a bump on the center tile plus a bump on its own corner tile.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub grid_side: usize,
    pub class_tables: [DiscreteDistribution; 2],
    pub mixture: DiscreteDistribution,
}

impl ToyDataset {
    pub fn space(&self) -> &StateSpace {
        self.mixture.space()
    }

    /// Row marginals as one-token tables: `(class, mixture)`.
    pub fn row_marginals(&self, class: usize) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
        let v = self.space().vocab_size();
        let s1 = StateSpace::masked(v, 1)?;
        Ok((
            DiscreteDistribution::new(s1, self.class_tables[class].marginal(0))?,
            DiscreteDistribution::new(s1, self.mixture.marginal(0))?,
        ))
    }

    /// Mass of a table on the 9x9 tile with top-left cell `(r0, c0)`.
    pub fn tile_mass(&self, table: &DiscreteDistribution, r0: usize, c0: usize) -> f64 {
        let v = self.space().vocab_size();
        (r0..r0 + 9)
            .flat_map(|r| (c0..c0 + 9).map(move |c| r * v + c))
            .map(|i| table.prob(i))
            .sum()
    }
}

pub fn build_toy_dataset() -> Result<ToyDataset> {
    build_toy_dataset_with(ToyLayout::default())
}

pub fn build_toy_dataset_with(layout: ToyLayout) -> Result<ToyDataset> {
    let side = layout.grid_side;
    if side < 18 {
        return Err(crate::Error::InvalidConfig(format!(
            "toy grid side must be at least 18, got {side}"
        )));
    }
    let v = side + 1;
    let space = StateSpace::masked(v, 2)?;
    let center = ((side - 9) / 2, (side - 9) / 2);
    let class = |corner: Corner| -> Result<DiscreteDistribution> {
        let mut w = vec![0.0; space.size()];
        for (r0, c0) in [center, corner.offset(side)] {
            for (r, row) in BUMP.iter().enumerate() {
                for (c, &b) in row.iter().enumerate() {
                    w[(r0 + r) * v + c0 + c] += b;
                }
            }
        }
        DiscreteDistribution::from_weights(space, w)
    };
    let c1 = class(layout.corners[0])?;
    let c2 = class(layout.corners[1])?;
    let mix: Vec<f64> = c1.values().iter().zip(c2.values()).map(|(a, b)| 0.5 * (a + b)).collect();
    let mixture = DiscreteDistribution::new(space, mix)?;
    Ok(ToyDataset { grid_side: side, class_tables: [c1, c2], mixture })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_entries() {
        assert_eq!(BUMP[0][0], 0.1);
        assert_eq!(BUMP[4][4], 1.0);
        assert_eq!(BUMP[4], [0.5, 0.8, 1.0, 1.0, 1.0, 1.0, 1.0, 0.8, 0.5]);
    }

    #[test]
    fn tables_are_normalized_and_clean() {
        let toy = build_toy_dataset().unwrap();
        assert_eq!(toy.space().vocab_size(), 28);
        for t in toy.class_tables.iter().chain([&toy.mixture]) {
            assert!((t.total_mass() - 1.0).abs() < 1e-12);
            let s = t.space();
            for x in 0..s.size() {
                if s.masked_count(x) > 0 {
                    assert_eq!(t.prob(x), 0.0);
                }
            }
        }
    }

    #[test]
    fn center_tile_of_mixture_averages_classes() {
        let toy = build_toy_dataset().unwrap();
        let m = toy.tile_mass(&toy.mixture, 9, 9);
        let a = toy.tile_mass(&toy.class_tables[0], 9, 9);
        let b = toy.tile_mass(&toy.class_tables[1], 9, 9);
        assert!((m - 0.5 * (a + b)).abs() < 1e-15);
        assert!((a - 0.5).abs() < 1e-12);
        assert!((toy.tile_mass(&toy.class_tables[0], 0, 0) - 0.5).abs() < 1e-12);
        assert_eq!(toy.tile_mass(&toy.class_tables[0], 18, 18), 0.0);
    }
}
