use alloc::vec::Vec;

use crate::geometry::ball_volume;
use crate::math::ln;
use crate::percolation::ThetaTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpBoundPoint {
    pub lambda: f64,
    /// `log(1 - Theta) / (lambda |B(0,2)|)`; `None` when below resolution.
    pub ratio: Option<f64>,
    /// The estimate of `1 - Theta` was zero at this trial budget.
    pub below_resolution: bool,
}

/// Per-intensity ratio whose large-`lambda` limit is `-1` for the percolation
/// probability of unit balls. Uses the raw hit counts of the table.
pub fn exp_bound_diagnostic(table: &ThetaTable, dim: usize) -> Vec<ExpBoundPoint> {
    let vol = ball_volume(dim, 2.0);
    table
        .lambda_grid
        .iter()
        .zip(&table.raw_estimates)
        .filter(|(l, _)| **l > 0.0)
        .map(|(&lambda, &theta)| {
            let miss = 1.0 - theta;
            if miss <= 0.0 {
                ExpBoundPoint { lambda, ratio: None, below_resolution: true }
            } else {
                ExpBoundPoint { lambda, ratio: Some(ln(miss) / (lambda * vol)), below_resolution: false }
            }
        })
        .collect()
}
