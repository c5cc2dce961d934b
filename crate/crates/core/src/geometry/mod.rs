//! Box unions, scaling plans, observation lattices and inner/outer
//! approximations of general regions.

mod approx;
mod grid;
mod jordan;
mod plan;

pub use approx::{inner_outer_approx, Ball, BoxApproximation, CellClass, PredicateRegion, Region, CELL_BUDGET};
pub use grid::{build_grid, GridAxis, GridSpec, GRID_BUDGET};
pub use jordan::{AxisBox, JordanSet};
pub use plan::{ScaleEvaluation, ScalingPlan, SlowFactor, GAMMA_SUM_TOLERANCE};

/// `J^x_m`.
pub fn scale_set(set: &JordanSet, x: &[f64], m_values: &[f64]) -> crate::Result<JordanSet> {
    set.scale(x, m_values)
}
