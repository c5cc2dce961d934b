use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_len, Error, Result};
use crate::limit_law::validate_alphas;

/// Default cap on lattice points per sampled grid.
pub const GRID_BUDGET: u128 = 1 << 26;

/// Lattice points `(start + i) · spacing`, `i = 0..count`, along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub spacing: f64,
    pub start: i64,
    pub count: usize,
}

impl GridAxis {
    pub fn coordinate(&self, i: usize) -> f64 {
        (self.start + i as i64) as f64 * self.spacing
    }
}

/// Observation lattice `{jq}` with `qᵢ = a · u^{-2/αᵢ}` restricted to a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub u: f64,
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// A lattice with explicit spacings and counts, starting at the origin.
    pub fn from_axes(spacings: &[f64], counts: &[usize]) -> Result<Self> {
        ensure_len("grid counts", spacings.len(), counts.len())?;
        ensure(spacings.iter().all(|&q| q > 0.0 && q.is_finite()), || {
            format!("grid spacings must be positive, got {spacings:?}")
        })?;
        ensure(counts.iter().all(|&c| c > 0), || {
            "every axis needs at least one point".into()
        })?;
        Ok(Self {
            a: f64::NAN,
            u: f64::NAN,
            axes: spacings
                .iter()
                .zip(counts)
                .map(|(&spacing, &count)| GridAxis {
                    spacing,
                    start: 0,
                    count,
                })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.spacing).collect()
    }

    pub fn total_points(&self) -> u128 {
        self.axes.iter().map(|a| a.count as u128).product()
    }

    /// Coordinates of the point with row-major flat index `flat`.
    pub fn point(&self, mut flat: usize, out: &mut [f64]) {
        for (axis, o) in self.axes.iter().zip(out.iter_mut()).rev() {
            let i = flat % axis.count;
            flat /= axis.count;
            *o = axis.coordinate(i);
        }
    }
}

/// Lattice `qᵢ = a · u^{-2/αᵢ}` covering the closed ranges `extents`.
pub fn build_grid(extents: &[(f64, f64)], alphas: &[f64], a: f64, u: f64, budget: u128) -> Result<GridSpec> {
    ensure_len("extents vs alphas", alphas.len(), extents.len())?;
    validate_alphas(alphas)?;
    ensure(a > 0.0 && a.is_finite(), || format!("a must be positive, got {a}"))?;
    ensure(u > 0.0 && u.is_finite(), || format!("u must be positive, got {u}"))?;
    let mut axes = Vec::with_capacity(alphas.len());
    for (&(lo, hi), &alpha) in extents.iter().zip(alphas) {
        ensure(lo <= hi && lo.is_finite() && hi.is_finite(), || {
            format!("invalid extent [{lo}, {hi}]")
        })?;
        let spacing = a * u.powf(-2.0 / alpha);
        let start = (lo / spacing - 1e-9).ceil();
        let end = (hi / spacing + 1e-9).floor();
        ensure(end >= start, || {
            format!("extent [{lo}, {hi}] contains no lattice point at spacing {spacing}")
        })?;
        let count = end - start + 1.0;
        if count > u64::MAX as f64 / 2.0 {
            return Err(Error::Budget {
                what: "observation grid",
                required: u128::MAX,
                budget,
            });
        }
        axes.push(GridAxis {
            spacing,
            start: start as i64,
            count: count as usize,
        });
    }
    let grid = GridSpec { a, u, axes };
    let total = grid.total_points();
    if total > budget {
        return Err(Error::Budget {
            what: "observation grid",
            required: total,
            budget,
        });
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_formula() {
        let g = build_grid(&[(0.0, 1.0)], &[2.0], 0.5, 4.0, GRID_BUDGET).unwrap();
        assert_eq!(g.axes[0].spacing, 0.125);
        assert_eq!(g.axes[0].count, 9);
        let g = build_grid(&[(0.0, 1.0)], &[1.0], 0.5, 4.0, GRID_BUDGET).unwrap();
        assert_eq!(g.axes[0].spacing, 0.03125);
        assert_eq!(g.axes[0].count, 33);
    }

    #[test]
    fn point_count_formula_from_origin() {
        let g = build_grid(&[(0.0, 3.3), (0.0, 2.0)], &[2.0, 1.0], 0.25, 3.0, GRID_BUDGET).unwrap();
        for ax in &g.axes {
            let extent = ax.coordinate(ax.count - 1);
            assert!(extent <= 3.3 + 1e-12);
        }
        let expect: u128 = [(3.3f64, 0.25 / 3.0), (2.0, 0.25 / 9.0)]
            .iter()
            .map(|&(e, q)| ((e / q + 1e-9).floor() as u128) + 1)
            .product();
        assert_eq!(g.total_points(), expect);
    }

    #[test]
    fn halving_a_scales_counts() {
        let big = build_grid(&[(0.0, 10.0), (0.0, 10.0)], &[2.0, 2.0], 0.5, 3.0, GRID_BUDGET).unwrap();
        let small = build_grid(&[(0.0, 10.0), (0.0, 10.0)], &[2.0, 2.0], 0.25, 3.0, GRID_BUDGET).unwrap();
        assert_eq!(small.axes[0].spacing * 2.0, big.axes[0].spacing);
        let ratio = small.total_points() as f64 / big.total_points() as f64;
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn offset_extents_and_budget() {
        let g = build_grid(&[(0.3, 1.0)], &[2.0], 0.5, 4.0, GRID_BUDGET).unwrap();
        assert_eq!(g.axes[0].start, 3);
        assert!(g.axes[0].coordinate(0) >= 0.3);
        assert!(build_grid(&[(0.3, 0.31)], &[2.0], 0.5, 4.0, GRID_BUDGET).is_err());
        let err = build_grid(&[(0.0, 100.0), (0.0, 100.0)], &[2.0, 2.0], 0.01, 4.0, 1000).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn flat_index_to_point() {
        let g = GridSpec::from_axes(&[0.5, 0.25], &[3, 4]).unwrap();
        let mut p = [0.0; 2];
        g.point(7, &mut p);
        assert_eq!(p, [0.5, 0.75]);
    }
}
