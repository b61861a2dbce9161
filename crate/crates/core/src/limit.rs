//! Deterministic limit objects: level-set connectivity of a density field and
//! the limiting connection times and ergodic constant built on it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::connectivity::time_grid;
use crate::error::{invalid, Error, Result};
use crate::exec::TrialRunner;
use crate::geometry::{Point, MAX_DIM};
use crate::mobility::{DensityField, Trajectory};
use crate::percolation::{theta_lookup, Side, ThetaTable};
use crate::rng::StreamKey;
use crate::stats::Summary;

const BATCHES: usize = 64;

/// Strict (`f > threshold`, left-continuous theta) or weak (`f >= threshold`,
/// right-continuous theta) version of the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Weak,
}

impl Mode {
    pub fn side(self) -> Side {
        match self {
            Mode::Strict => Side::Left,
            Mode::Weak => Side::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Weak => "weak",
        }
    }

    fn admits(self, value: f64, threshold: f64) -> bool {
        match self {
            Mode::Strict => value > threshold,
            Mode::Weak => value >= threshold,
        }
    }
}

/// Face-connected components of the supercritical cells of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetComponents {
    pub field: DensityField,
    pub threshold: f64,
    pub mode: Mode,
    /// Component id per stored cell; `None` for subcritical cells.
    pub cell_labels: Vec<Option<u32>>,
    pub component_count: usize,
}

/// Labels the cells with value above (strict) or at least (weak) `threshold`.
pub fn level_set_components(field: &DensityField, threshold: f64, mode: Mode) -> LevelSetComponents {
    let grid = &field.grid;
    let mut labels: Vec<Option<u32>> = vec![None; grid.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if labels[start].is_some() || !mode.admits(field.values[start], threshold) {
            continue;
        }
        labels[start] = Some(next);
        stack.push(start);
        while let Some(c) = stack.pop() {
            for n in grid.face_neighbors(c) {
                if labels[n].is_none() && mode.admits(field.values[n], threshold) {
                    labels[n] = Some(next);
                    stack.push(n);
                }
            }
        }
        next += 1;
    }
    LevelSetComponents {
        field: field.clone(),
        threshold,
        mode,
        cell_labels: labels,
        component_count: next as usize,
    }
}

impl LevelSetComponents {
    /// Label of the cell holding `p`, without a domain check.
    fn label(&self, p: &Point) -> Option<u32> {
        self.field.grid.locate(p).and_then(|c| self.cell_labels[c])
    }

    fn linked(&self, x: &Point, y: &Point) -> bool {
        match (self.label(x), self.label(y)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }
}

/// Whether `x` and `y` sit in supercritical cells of one component.
pub fn connected_in_level_set(components: &LevelSetComponents, x: &Point, y: &Point) -> Result<bool> {
    let domain = components.field.grid.domain();
    let tol = 1e-9 * domain.diameter();
    if !domain.contains_within(x, tol) || !domain.contains_within(y, tol) {
        return Err(Error::OutsideDomain);
    }
    Ok(components.linked(x, y))
}

/// Fraction of random pairs on which two discretizations disagree.
pub fn level_set_disagreement<R: Rng + ?Sized>(
    a: &LevelSetComponents,
    b: &LevelSetComponents,
    pairs: usize,
    rng: &mut R,
) -> f64 {
    let domain = a.field.grid.domain();
    let mut differ = 0;
    for _ in 0..pairs {
        let x = domain.sample_uniform(rng);
        let y = domain.sample_uniform(rng);
        if a.linked(&x, &y) != b.linked(&x, &y) {
            differ += 1;
        }
    }
    differ as f64 / pairs.max(1) as f64
}

/// One evaluation of the limit integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandRecord {
    pub time: f64,
    pub connected: bool,
    pub theta_x: f64,
    pub theta_y: f64,
}

impl IntegrandRecord {
    pub fn value(&self) -> f64 {
        if self.connected {
            self.theta_x * self.theta_y
        } else {
            0.0
        }
    }
}

/// A density field together with its level-set components and theta table,
/// ready to evaluate the integrand at pairs of positions.
#[derive(Debug, Clone)]
pub struct Landscape<'a> {
    pub components: LevelSetComponents,
    pub theta: &'a ThetaTable,
    pub radius: f64,
}

impl<'a> Landscape<'a> {
    /// Threshold `lambda_cr(R)` from the table's critical constant.
    pub fn new(field: &DensityField, theta: &'a ThetaTable, radius: f64, mode: Mode) -> Result<Landscape<'a>> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("R", "must be positive and finite"));
        }
        if theta.dim != field.grid.dim() {
            return Err(Error::Dimension { expected: field.grid.dim(), found: theta.dim });
        }
        let components = level_set_components(field, theta.lambda_cr(radius), mode);
        Ok(Landscape { components, theta, radius })
    }

    pub fn mode(&self) -> Mode {
        self.components.mode
    }

    pub fn theta_at(&self, p: &Point) -> f64 {
        let f = self.components.field.value_at(p);
        theta_lookup(self.theta, f, self.radius, self.mode().side()).value
    }

    pub fn record(&self, time: f64, x: &Point, y: &Point) -> IntegrandRecord {
        let connected = self.components.linked(x, y);
        let (theta_x, theta_y) = if connected { (self.theta_at(x), self.theta_at(y)) } else { (0.0, 0.0) };
        IntegrandRecord { time, connected, theta_x, theta_y }
    }

    pub fn integrand(&self, x: &Point, y: &Point) -> f64 {
        self.record(0.0, x, y).value()
    }
}

/// Landscapes indexed by time; lookups go to the nearest stored time.
#[derive(Debug, Clone)]
pub struct LandscapeSeries<'a> {
    times: Vec<f64>,
    landscapes: Vec<Landscape<'a>>,
}

impl<'a> LandscapeSeries<'a> {
    /// Time-independent (stationary) landscape.
    pub fn stationary(landscape: Landscape<'a>) -> LandscapeSeries<'a> {
        LandscapeSeries { times: vec![0.0], landscapes: vec![landscape] }
    }

    /// Landscapes given at strictly increasing times.
    pub fn transient(entries: Vec<(f64, Landscape<'a>)>) -> Result<LandscapeSeries<'a>> {
        if entries.is_empty() {
            return Err(Error::Empty("landscape series"));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("landscape times", "must be strictly increasing"));
        }
        let (times, landscapes) = entries.into_iter().unzip();
        Ok(LandscapeSeries { times, landscapes })
    }

    pub fn at(&self, s: f64) -> &Landscape<'a> {
        let k = self.times.partition_point(|&t| t < s);
        let i = if k == 0 {
            0
        } else if k == self.times.len() || s - self.times[k - 1] <= self.times[k] - s {
            k - 1
        } else {
            k
        };
        &self.landscapes[i]
    }

    pub fn mode(&self) -> Mode {
        self.landscapes[0].mode()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A limiting connection time or connection probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitIntegral {
    pub value: f64,
    pub std_error: Option<f64>,
    pub mode: Mode,
    pub records: Vec<IntegrandRecord>,
}

/// Left-endpoint Riemann sum over `[0, horizon]` of the limit integrand along
/// the tagged pair.
pub fn tau_limit(
    traj1: &Trajectory,
    traj2: &Trajectory,
    landscapes: &LandscapeSeries<'_>,
    horizon: f64,
    step: f64,
) -> Result<LimitIntegral> {
    if horizon > traj1.horizon().min(traj2.horizon()) {
        return Err(Error::TimeOutOfRange { t: horizon, horizon: traj1.horizon().min(traj2.horizon()) });
    }
    let (m, h) = time_grid(horizon, step)?;
    let mut records = Vec::with_capacity(m);
    let mut sum = 0.0;
    for k in 0..m {
        let s = k as f64 * h;
        let x = traj1.state(s).position;
        let y = traj2.state(s).position;
        let r = landscapes.at(s).record(s, &x, &y);
        sum += r.value();
        records.push(r);
    }
    Ok(LimitIntegral { value: sum * h, std_error: None, mode: landscapes.mode(), records })
}

/// Sampler for the probability measure of a piecewise-constant field.
#[derive(Debug, Clone)]
pub struct FieldSampler<'f> {
    field: &'f DensityField,
    cdf: Vec<f64>,
}

impl<'f> FieldSampler<'f> {
    pub fn new(field: &'f DensityField) -> Result<FieldSampler<'f>> {
        let mut cdf = Vec::with_capacity(field.values.len());
        let mut acc = 0.0;
        for v in &field.values {
            acc += v;
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::Empty("field has zero mass"));
        }
        Ok(FieldSampler { field, cdf })
    }

    /// Cell by mass, then a uniform point of that cell inside the domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let total = *self.cdf.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        let c = self.cdf.partition_point(|&v| v <= u).min(self.cdf.len() - 1);
        let grid = &self.field.grid;
        let lower = grid.cell_lower(c);
        let d = grid.dim();
        for _ in 0..64 {
            let mut c = [0.0; MAX_DIM];
            for (i, v) in c.iter_mut().enumerate().take(d) {
                let t: f64 = rng.random();
                *v = lower.coords()[i] + t * grid.side(i);
            }
            let p = Point::new(&c[..d]).expect("grid dimension is valid");
            if grid.domain().contains(&p) {
                return p;
            }
        }
        grid.centers()[c]
    }
}

/// Monte Carlo estimate of the probability that two independent positions
/// drawn from the field's measure are linked, weighted by both theta factors.
pub fn p_star<E: TrialRunner>(
    landscape: &Landscape<'_>,
    samples: usize,
    key: StreamKey,
    runner: &E,
) -> Result<LimitIntegral> {
    if samples < 10_000 {
        return Err(invalid("mc_samples", "need at least 10^4"));
    }
    let sampler = FieldSampler::new(&landscape.components.field)?;
    let per = samples.div_ceil(BATCHES);
    let parts = runner.run(BATCHES, |b| {
        let mut rng = key.child(b as u64).rng();
        let n = per.min(samples.saturating_sub(b * per));
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let x = sampler.sample(&mut rng);
            let y = sampler.sample(&mut rng);
            vals.push(landscape.integrand(&x, &y));
        }
        vals
    });
    let all: Vec<f64> = parts.into_iter().flatten().collect();
    let s = Summary::of(&all);
    Ok(LimitIntegral { value: s.mean, std_error: Some(s.std_error()), mode: landscape.mode(), records: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::geometry::{CellGrid, Domain};
    use crate::mobility::DensityLabel;

    fn square_field(res: usize, f: impl Fn(&Point) -> f64) -> DensityField {
        let g = CellGrid::new(Domain::unit_square(), res).unwrap();
        let values = g.centers().iter().map(f).collect();
        DensityField::new(g, values, 0, DensityLabel::Stationary).unwrap()
    }

    #[test]
    fn constant_field_single_component() {
        let f = square_field(16, |_| 1.0);
        let c = level_set_components(&f, 0.5, Mode::Strict);
        assert_eq!(c.component_count, 1);
        assert!(c.cell_labels.iter().all(|l| *l == Some(0)));
    }

    #[test]
    fn strip_splits() {
        let f = square_field(20, |p| if (p.x() - 0.5).abs() < 0.1 { 0.0 } else { 1.0 });
        let c = level_set_components(&f, 0.5, Mode::Strict);
        assert_eq!(c.component_count, 2);
        let a = Point::xy(0.1, 0.5);
        let b = Point::xy(0.9, 0.5);
        assert!(!connected_in_level_set(&c, &a, &b).unwrap());
        assert!(connected_in_level_set(&c, &a, &a).unwrap());
        assert!(!connected_in_level_set(&c, &Point::xy(0.5, 0.5), &a).unwrap());
        assert!(connected_in_level_set(&c, &Point::xy(1.5, 0.5), &a).is_err());
    }

    #[test]
    fn plateau_merges_only_weakly() {
        let f = square_field(20, |p| if (p.x() - 0.5).abs() < 0.1 { 0.5 } else { 1.0 });
        assert_eq!(level_set_components(&f, 0.5, Mode::Strict).component_count, 2);
        assert_eq!(level_set_components(&f, 0.5, Mode::Weak).component_count, 1);
    }

    #[test]
    fn nearest_time_lookup() {
        let f = square_field(4, |_| 1.0);
        let t = ThetaTable::constant(1.0, 2, 0.5);
        let l = |v: f64| {
            let g = square_field(4, |_| v);
            Landscape::new(&g, &t, 1.0, Mode::Strict).unwrap()
        };
        let s = LandscapeSeries::transient(vec![(1.0, l(0.1)), (2.0, l(1.0)), (3.0, l(0.2))]).unwrap();
        assert_eq!(s.at(0.0).components.field.values[0], 0.1);
        assert_eq!(s.at(1.6).components.field.values[0], 1.0);
        assert_eq!(s.at(2.6).components.field.values[0], 0.2);
        assert_eq!(s.at(9.0).components.field.values[0], 0.2);
        assert!(Landscape::new(&f, &t, 0.0, Mode::Strict).is_err());
    }

    #[test]
    fn p_star_extremes() {
        let t = ThetaTable::constant(1.0, 2, 0.5);
        let f = square_field(8, |_| 1.0);
        let l = Landscape::new(&f, &t, 1.0, Mode::Strict).unwrap();
        let p = p_star(&l, 10_000, StreamKey::new(1), &Sequential).unwrap();
        assert_eq!(p.value, 1.0);
        let l = Landscape::new(&f, &t, 0.5, Mode::Weak).unwrap();
        assert_eq!(p_star(&l, 10_000, StreamKey::new(1), &Sequential).unwrap().value, 0.0);
    }
}
