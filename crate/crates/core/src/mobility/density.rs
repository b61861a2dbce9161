use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::exec::TrialRunner;
use crate::geometry::{CellGrid, Point, MAX_DIM};
use crate::math::floor;
use crate::mobility::{simulate_trajectory, InitialState, VelocityLaw, WaypointLaw};
use crate::rng::StreamKey;

/// Monte Carlo work is split into this many fixed batches, independent of
/// the number of workers, so accumulated fields are reproducible.
const BATCHES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityLabel {
    Transient { time: f64 },
    Stationary,
}

/// Piecewise-constant density on the stored cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: CellGrid,
    /// Probability per unit volume, one value per stored cell.
    pub values: Vec<f64>,
    pub sample_count: usize,
    pub label: DensityLabel,
}

impl DensityField {
    pub fn new(grid: CellGrid, values: Vec<f64>, sample_count: usize, label: DensityLabel) -> Result<DensityField> {
        if values.len() != grid.len() {
            return Err(invalid("values", "one value per stored cell"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("values", "must be finite and >= 0"));
        }
        Ok(DensityField { grid, values, sample_count, label })
    }

    /// Field sampled from a density function at cell centres, renormalized to
    /// unit mass over the stored cells.
    pub fn from_fn(grid: CellGrid, label: DensityLabel, f: impl Fn(&Point) -> f64) -> Result<DensityField> {
        let values: Vec<f64> = grid.centers().iter().map(f).collect();
        let mut field = DensityField::new(grid, values, 0, label)?;
        field.normalize();
        Ok(field)
    }

    /// Field with the same value in every cell.
    pub fn constant(grid: CellGrid, value: f64) -> Result<DensityField> {
        let n = grid.len();
        DensityField::new(grid, vec![value; n], 0, DensityLabel::Stationary)
    }

    /// Rescales so that the cell-volume-weighted sum is 1.
    pub fn normalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
    }

    /// Cell-volume-weighted sum of the values.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Value of the cell containing `p` (boundary slivers go to the nearest cell).
    pub fn cell_value(&self, p: &Point) -> f64 {
        self.grid.locate(p).map_or(0.0, |c| self.values[c])
    }

    /// Multilinear interpolation between cell centres. Neighbouring cells that
    /// are not stored (outside the domain) are dropped and the remaining
    /// weights renormalized.
    pub fn value_at(&self, p: &Point) -> f64 {
        let d = self.grid.dim();
        let res = self.grid.resolution();
        let u = self.grid.center_coords(p);
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for i in 0..d {
            let b = floor(u[i]).clamp(0.0, (res.max(2) - 2) as f64);
            base[i] = b as usize;
            frac[i] = (u[i] - b).clamp(0.0, 1.0);
        }
        if res == 1 {
            return self.cell_value(p);
        }
        let (mut acc, mut wsum) = (0.0, 0.0);
        for corner in 0..(1usize << d) {
            let mut idx = base;
            let mut w = 1.0;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    idx[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w == 0.0 {
                continue;
            }
            if let Some(c) = self.grid.cell_at_index(&idx) {
                acc += w * self.values[c];
                wsum += w;
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            self.cell_value(p)
        }
    }

    /// Total-variation distance `1/2 sum |f - g| vol` on a common grid.
    pub fn total_variation(&self, other: &DensityField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(invalid("field", "grids differ"));
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(0.5 * s * self.grid.cell_volume())
    }

    fn from_weights(grid: CellGrid, weights: Vec<f64>, samples: usize, label: DensityLabel) -> Result<DensityField> {
        let total: f64 = weights.iter().sum();
        let vol = grid.cell_volume();
        let values = if total > 0.0 { weights.iter().map(|w| w / (total * vol)).collect() } else { weights };
        DensityField::new(grid, values, samples, label)
    }
}

fn accumulate<E, F>(grid: &CellGrid, samples: usize, key: StreamKey, runner: &E, draw: F) -> Vec<f64>
where
    E: TrialRunner,
    F: Fn(&mut crate::rng::StreamRng) -> Option<(Point, f64)> + Sync + Send,
{
    let per = samples.div_ceil(BATCHES);
    let parts = runner.run(BATCHES, |b| {
        let mut rng = key.child(b as u64).rng();
        let mut hist = vec![0.0; grid.len()];
        let n = per.min(samples.saturating_sub(b * per));
        for _ in 0..n {
            if let Some((p, w)) = draw(&mut rng) {
                if let Some(c) = grid.cell_of(&p) {
                    hist[c] += w;
                }
            }
        }
        hist
    });
    let mut total = vec![0.0; grid.len()];
    for part in parts {
        for (t, h) in total.iter_mut().zip(part) {
            *t += h;
        }
    }
    total
}

/// Monte Carlo estimate of the stationary position density.
///
/// Each sample is a uniform point on a trip `W_0 -> W_1` at speed `V_1`,
/// weighted by the trip duration `|W_1 - W_0| / V_1`. Pairs closer than
/// `1e-9 diam(D)` are redrawn.
pub fn stationary_density<E: TrialRunner>(
    wlaw: &WaypointLaw,
    vlaw: &VelocityLaw,
    grid: &CellGrid,
    samples: usize,
    key: StreamKey,
    runner: &E,
) -> Result<DensityField> {
    if samples < 10_000 {
        return Err(invalid("samples", "need at least 10^4"));
    }
    let guard = 1e-9 * wlaw.domain.diameter();
    let weights = accumulate(grid, samples, key, runner, |rng| {
        let (w0, w1) = loop {
            let a = wlaw.sample(rng);
            let b = wlaw.sample(rng);
            if a.dist(&b) >= guard {
                break (a, b);
            }
        };
        let v = vlaw.sample(rng);
        let s: f64 = rng.random();
        Some((Point::lerp(&w0, &w1, s), w0.dist(&w1) / v))
    });
    DensityField::from_weights(grid.clone(), weights, samples, DensityLabel::Stationary)
}

/// Histogram of the walker position at time `s` over independent paths.
pub fn transient_density<E: TrialRunner>(
    wlaw: &WaypointLaw,
    vlaw: &VelocityLaw,
    s: f64,
    init: InitialState,
    grid: &CellGrid,
    samples: usize,
    key: StreamKey,
    runner: &E,
) -> Result<DensityField> {
    if !(s > 0.0) {
        return Err(invalid("s", "must be positive"));
    }
    if samples < 10_000 {
        return Err(invalid("samples", "need at least 10^4"));
    }
    let weights = accumulate(grid, samples, key, runner, |rng| {
        let t = simulate_trajectory(wlaw, vlaw, s, init, rng).ok()?;
        Some((t.state(s).position, 1.0))
    });
    DensityField::from_weights(grid.clone(), weights, samples, DensityLabel::Transient { time: s })
}

/// Monte Carlo mean trip duration `E|W_1 - W_0| / V`.
pub fn mean_trip_duration<R: Rng + ?Sized>(wlaw: &WaypointLaw, vlaw: &VelocityLaw, samples: usize, rng: &mut R) -> f64 {
    let mut s = 0.0;
    for _ in 0..samples {
        let a = wlaw.sample(rng);
        let b = wlaw.sample(rng);
        s += a.dist(&b);
    }
    s / samples as f64 * vlaw.mean_inverse()
}
