use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{powf, sqrt};
use crate::percolation::ThetaTable;

/// One-arm finite-size exponent `beta / nu` of the percolation universality
/// class: at criticality the probability of reaching distance `L` decays like
/// `L^(-beta/nu)`.
pub fn one_arm_exponent(dim: usize) -> f64 {
    match dim {
        2 => 5.0 / 48.0,
        3 => 0.4181 / 0.8762,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Crossing of the scaled curves of two consecutive box sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCrossing {
    pub small_side: f64,
    pub large_side: f64,
    /// Zero of the interpolated difference inside `[lo, hi]`.
    pub crossing: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalBracket {
    pub lo: f64,
    pub hi: f64,
    pub crossings: Vec<PairCrossing>,
    pub exponent: f64,
}

impl CriticalBracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Brackets the critical intensity from percolation tables at several box sizes.
///
/// The finite-box probability of joining the origin to the box shell decreases
/// with the box side at every intensity, so the raw curves never cross. Scaled
/// by `L^(beta/nu)` they do: below criticality the scaled curve still falls
/// with `L`, above it rises. For each pair of consecutive box sizes the change
/// point of the standardized difference locates the crossing to one grid cell;
/// the returned interval is the hull of those cells.
pub fn estimate_lambda_cr(tables: &[ThetaTable]) -> Result<CriticalBracket> {
    if tables.len() < 2 {
        return Err(invalid("tables", "need at least two box sizes"));
    }
    let grid = &tables[0].lambda_grid;
    if tables.iter().any(|t| &t.lambda_grid != grid || t.dim != tables[0].dim) {
        return Err(invalid("tables", "grids and dimensions must agree"));
    }
    if !(grid[0] <= 0.4 && *grid.last().unwrap() >= 1.0) {
        return Err(invalid("tables", "grid must span (0.4, 1.0)"));
    }
    let mut sorted: Vec<&ThetaTable> = tables.iter().collect();
    sorted.sort_by(|a, b| a.box_half_width.total_cmp(&b.box_half_width));
    if sorted.windows(2).any(|w| w[0].box_half_width == w[1].box_half_width) {
        return Err(invalid("tables", "box sizes must be distinct"));
    }
    let exponent = one_arm_exponent(tables[0].dim);
    let n = grid.len();
    let mut crossings = Vec::new();
    for pair in sorted.windows(2) {
        let (small, large) = (pair[0], pair[1]);
        let ws = powf(small.box_side(), exponent);
        let wl = powf(large.box_side(), exponent);
        let diff: Vec<f64> =
            (0..n).map(|k| wl * large.monotone_fit[k] - ws * small.monotone_fit[k]).collect();
        let z: Vec<f64> = (0..n)
            .map(|k| {
                let s = {
                    let (a, b) = (wl * large.std_errors[k], ws * small.std_errors[k]);
                    sqrt(a * a + b * b)
                };
                if s > 0.0 { diff[k] / s } else { 0.0 }
            })
            .collect();
        // change point maximizing  sum_{k >= s} z_k - sum_{k < s} z_k
        let total: f64 = z.iter().sum();
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut below = 0.0;
        for s in 1..n {
            below += z[s - 1];
            let score = (total - below) - below;
            if score > best.0 {
                best = (score, s);
            }
        }
        let s = best.1;
        let neg = z[..s].iter().any(|&v| v < -2.0);
        let pos = z[s..].iter().any(|&v| v > 2.0);
        if s == 0 || !neg || !pos {
            return Err(Error::NoCrossing);
        }
        let (lo, hi) = (grid[s - 1], grid[s]);
        let (d0, d1) = (diff[s - 1], diff[s]);
        let crossing = if d0 < 0.0 && d1 > 0.0 { lo + (hi - lo) * (-d0) / (d1 - d0) } else { 0.5 * (lo + hi) };
        crossings.push(PairCrossing {
            small_side: small.box_side(),
            large_side: large.box_side(),
            crossing,
            lo,
            hi,
        });
    }
    let lo = crossings.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min);
    let hi = crossings.iter().map(|c| c.hi).fold(f64::NEG_INFINITY, f64::max);
    Ok(CriticalBracket { lo, hi, crossings, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::LAMBDA_CR_REFERENCE;
    use alloc::vec;

    fn synthetic(side: f64, crit: f64, grid: &[f64]) -> ThetaTable {
        // scaled curves cross exactly at `crit`
        let x = one_arm_exponent(2);
        let fit: Vec<f64> = grid
            .iter()
            .map(|&l| {
                let base = 0.5 * powf(side, -x);
                let tilt = 1.0 + (l - crit) * 0.02 * side;
                (base * tilt).clamp(0.0, 1.0)
            })
            .collect();
        let mut fit_mono = fit.clone();
        for i in 1..fit_mono.len() {
            fit_mono[i] = fit_mono[i].max(fit_mono[i - 1]);
        }
        let mut t = ThetaTable::from_fit(grid.to_vec(), fit_mono, 2, LAMBDA_CR_REFERENCE).unwrap();
        t.box_half_width = side / 2.0;
        t.std_errors = vec![1e-3; grid.len()];
        t
    }

    #[test]
    fn finds_synthetic_crossing() {
        let grid: Vec<f64> = (0..=40).map(|k| 0.2 + 0.02 * k as f64).collect();
        let tables = [synthetic(20.0, 0.5, &grid), synthetic(40.0, 0.5, &grid), synthetic(80.0, 0.5, &grid)];
        let b = estimate_lambda_cr(&tables).unwrap();
        assert!(b.contains(0.5), "{b:?}");
        assert!(b.lo < b.hi && b.width() <= 0.0400001);
        for c in &b.crossings {
            assert!((c.crossing - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid: Vec<f64> = (0..=10).map(|k| 0.5 + 0.05 * k as f64).collect();
        let t = synthetic(20.0, 0.7, &grid);
        assert!(estimate_lambda_cr(core::slice::from_ref(&t)).is_err());
        let u = synthetic(40.0, 0.7, &grid);
        assert!(matches!(estimate_lambda_cr(&[t, u]), Err(Error::InvalidParameter { .. })));
        let flat: Vec<f64> = (0..=40).map(|k| 0.2 + 0.02 * k as f64).collect();
        let mut a = ThetaTable::from_fit(flat.clone(), vec![0.0; 41], 2, 0.6).unwrap();
        a.box_half_width = 10.0;
        a.std_errors = vec![1e-3; 41];
        let mut b = a.clone();
        b.box_half_width = 20.0;
        assert_eq!(estimate_lambda_cr(&[a, b]), Err(Error::NoCrossing));
    }
}
