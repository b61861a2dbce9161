use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::exec::TrialRunner;
use crate::geometry::Point;
use crate::math::powi;
use crate::percolation::{isotonic_nondecreasing, label_clusters, sample_poisson, PointCloud};
use crate::rng::StreamKey;
use crate::stats::binomial_std_error;

/// Literature value of the critical intensity for unit balls in the plane, used
/// as the default level-set threshold constant.
pub const LAMBDA_CR_REFERENCE: f64 = 0.6763475;

/// Rigorous bracket for the planar critical intensity of unit balls.
pub const LAMBDA_CR_RIGOROUS: (f64, f64) = (0.174, 0.843);

/// Whether the ball `B(0, radius)` belongs to a cluster that reaches the shell
/// `{|x|_inf >= h - 2 radius}` of the cloud's box.
///
/// The origin is added as an auxiliary point; its component must contain at
/// least one cloud point and touch the shell.
pub fn origin_percolates(cloud: &PointCloud, radius: f64) -> bool {
    if cloud.points.is_empty() {
        return false;
    }
    let mut pts = cloud.points.clone();
    let aux = pts.len();
    pts.push(Point::origin(cloud.points[0].dim()));
    let lab = label_clusters(&pts, radius);
    let comp = lab.labels[aux];
    if lab.sizes[comp] < 2 {
        return false;
    }
    let shell = cloud.box_half_width - 2.0 * radius;
    cloud
        .points
        .iter()
        .zip(&lab.labels)
        .any(|(p, &l)| l == comp && p.sup_norm() >= shell)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: usize,
    pub trials: usize,
}

/// Monte Carlo estimate of the percolation probability at intensity `lambda`
/// and ball radius `radius`, using a box of half width `box_half_width`.
pub fn estimate_theta_bar<E: TrialRunner>(
    lambda: f64,
    radius: f64,
    box_half_width: f64,
    dim: usize,
    trials: usize,
    key: StreamKey,
    runner: &E,
) -> Result<ThetaEstimate> {
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    if !(2.0 * box_half_width > 8.0 * radius) {
        return Err(invalid("box_half_width", "box side must exceed 8 radii"));
    }
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", "must be >= 0"));
    }
    let outcomes = runner.run(trials, |t| {
        let mut rng = key.child(t as u64).rng();
        let cloud = sample_poisson(lambda, box_half_width, dim, &mut rng).expect("validated");
        origin_percolates(&cloud, radius)
    });
    let hits = outcomes.iter().filter(|&&b| b).count();
    Ok(ThetaEstimate {
        estimate: hits as f64 / trials as f64,
        std_error: binomial_std_error(hits, trials),
        hits,
        trials,
    })
}

/// Tabulated percolation probability for unit balls on a grid of normalized
/// intensities `lambda R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    pub lambda_grid: Vec<f64>,
    pub raw_estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub hits: Vec<usize>,
    pub monotone_fit: Vec<f64>,
    pub box_half_width: f64,
    pub trials: usize,
    pub dim: usize,
    pub lambda_cr_const: f64,
    /// One-sided evaluation offset for the left/right-continuous versions.
    pub eps_lambda: f64,
}

impl ThetaTable {
    /// Table from an already fitted, nondecreasing curve (no Monte Carlo data).
    pub fn from_fit(
        lambda_grid: Vec<f64>,
        fit: Vec<f64>,
        dim: usize,
        lambda_cr_const: f64,
    ) -> Result<ThetaTable> {
        validate_grid(&lambda_grid)?;
        if fit.len() != lambda_grid.len() {
            return Err(invalid("fit", "length must match the grid"));
        }
        if fit.windows(2).any(|w| w[0] > w[1]) || fit.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("fit", "must be nondecreasing within [0, 1]"));
        }
        let n = lambda_grid.len();
        Ok(ThetaTable {
            raw_estimates: fit.clone(),
            std_errors: alloc::vec![0.0; n],
            hits: alloc::vec![0; n],
            monotone_fit: fit,
            lambda_grid,
            box_half_width: f64::INFINITY,
            trials: 0,
            dim,
            lambda_cr_const,
            eps_lambda: 1e-6 * lambda_cr_const,
        })
    }

    /// Table that evaluates to `value` everywhere on `[0, inf)`.
    pub fn constant(value: f64, dim: usize, lambda_cr_const: f64) -> ThetaTable {
        ThetaTable::from_fit(alloc::vec![0.0, 1e12], alloc::vec![value, value], dim, lambda_cr_const)
            .expect("constant table is valid")
    }

    pub fn with_lambda_cr(mut self, lambda_cr_const: f64) -> ThetaTable {
        self.lambda_cr_const = lambda_cr_const;
        self.eps_lambda = 1e-6 * lambda_cr_const;
        self
    }

    /// Critical intensity for balls of radius `radius`: `lambda_cr(1) / R^d`.
    pub fn lambda_cr(&self, radius: f64) -> f64 {
        self.lambda_cr_const / powi(radius, self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.lambda_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_grid.is_empty()
    }

    /// Box side length `L`.
    pub fn box_side(&self) -> f64 {
        2.0 * self.box_half_width
    }

    fn interpolate(&self, x: f64) -> Lookup {
        let g = &self.lambda_grid;
        let f = &self.monotone_fit;
        let last = g.len() - 1;
        if x < g[0] {
            // a subcritical first entry has fit 0, so this clamps to 0 there
            return Lookup { value: f[0], extrapolated: true };
        }
        if x > g[last] {
            return Lookup { value: f[last], extrapolated: true };
        }
        let k = g.partition_point(|&v| v <= x).clamp(1, last.max(1));
        if last == 0 {
            return Lookup { value: f[0], extrapolated: false };
        }
        let (x0, x1) = (g[k - 1], g[k]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        let v = f[k - 1] + t * (f[k] - f[k - 1]);
        Lookup { value: v.clamp(0.0, 1.0), extrapolated: false }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("lambda_grid", "must be nonempty"));
    }
    if grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("lambda_grid", "entries must be finite and >= 0"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("lambda_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Estimates the unit-radius percolation probability at every grid point and
/// stores a pool-adjacent-violators monotone fit alongside the raw values.
pub fn build_theta_table<E: TrialRunner>(
    lambda_grid: &[f64],
    trials: usize,
    box_half_width: f64,
    dim: usize,
    key: StreamKey,
    runner: &E,
) -> Result<ThetaTable> {
    validate_grid(lambda_grid)?;
    let mut raw = Vec::with_capacity(lambda_grid.len());
    let mut errs = Vec::with_capacity(lambda_grid.len());
    let mut hits = Vec::with_capacity(lambda_grid.len());
    for (i, &lambda) in lambda_grid.iter().enumerate() {
        let est =
            estimate_theta_bar(lambda, 1.0, box_half_width, dim, trials, key.child(i as u64), runner)?;
        raw.push(est.estimate);
        errs.push(est.std_error);
        hits.push(est.hits);
    }
    let weights = alloc::vec![trials as f64; lambda_grid.len()];
    let monotone_fit = isotonic_nondecreasing(&raw, &weights)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(ThetaTable {
        lambda_grid: lambda_grid.to_vec(),
        raw_estimates: raw,
        std_errors: errs,
        hits,
        monotone_fit,
        box_half_width,
        trials,
        dim,
        lambda_cr_const: LAMBDA_CR_REFERENCE,
        eps_lambda: 1e-6 * LAMBDA_CR_REFERENCE,
    })
}

/// Which one-sided limit of the percolation probability to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `lim_{s -> lambda-}`, used with the strict level set.
    Left,
    /// `lim_{s -> lambda+}`, used with the weak level set.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    /// Set when the query fell outside the tabulated grid and was clamped.
    pub extrapolated: bool,
}

/// Percolation probability at intensity `lambda` and radius `radius`, via the
/// scaling identity `Theta(lambda, R) = Theta(lambda R^d, 1)`.
pub fn theta_lookup(table: &ThetaTable, lambda: f64, radius: f64, side: Side) -> Lookup {
    assert!(!table.is_empty(), "empty theta table");
    let scaled = lambda * powi(radius, table.dim as u32);
    let x = match side {
        Side::Left => scaled - table.eps_lambda,
        Side::Right => scaled + table.eps_lambda,
    };
    table.interpolate(x)
}
