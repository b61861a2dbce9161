//! Fleets of random waypoint walkers and the connection time of a tagged pair.

use alloc::vec::Vec;

use crate::error::{invalid, Result, Error};
use crate::exec::TrialRunner;
use crate::geometry::Point;
use crate::math::{ceil, powf};
use crate::mobility::{simulate_trajectory, InitialState, Trajectory, VelocityLaw, WaypointLaw};
use crate::percolation::label_clusters;
use crate::rng::{tags, StreamKey};

/// `N` walkers observed on `[0, T]`; walkers 0 and 1 are the tagged pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub trajectories: Vec<Trajectory>,
    /// Dimensionless radius parameter `R`.
    pub comm_scale: f64,
    pub dim: usize,
    pub horizon: f64,
}

impl Fleet {
    /// The horizon is the shortest horizon among the trajectories.
    pub fn new(trajectories: Vec<Trajectory>, comm_scale: f64) -> Result<Fleet> {
        if trajectories.len() < 2 {
            return Err(invalid("fleet", "need at least two walkers"));
        }
        if !(comm_scale > 0.0 && comm_scale.is_finite()) {
            return Err(invalid("R", "must be positive and finite"));
        }
        let dim = trajectories[0].waypoints()[0].dim();
        if let Some(t) = trajectories.iter().find(|t| t.waypoints()[0].dim() != dim) {
            return Err(Error::Dimension { expected: dim, found: t.waypoints()[0].dim() });
        }
        let horizon = trajectories.iter().map(Trajectory::horizon).fold(f64::INFINITY, f64::min);
        Ok(Fleet { trajectories, comm_scale, dim, horizon })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Per-walker ball radius `R N^(-1/d)`; two walkers link below twice this.
    pub fn ball_radius(&self) -> f64 {
        self.comm_scale * powf(self.len() as f64, -1.0 / self.dim as f64)
    }

    pub fn positions_at(&self, s: f64) -> Vec<Point> {
        self.trajectories.iter().map(|t| t.state(s).position).collect()
    }
}

/// Whether points 0 and 1 lie in one component of the union of balls.
pub fn pair_connected(positions: &[Point], ball_radius: f64) -> bool {
    let (a, b) = (positions[0], positions[1]);
    if a == b || a.dist_sq(&b) < 4.0 * ball_radius * ball_radius {
        return true;
    }
    label_clusters(positions, ball_radius).same(0, 1)
}

pub fn connected_at(fleet: &Fleet, s: f64) -> Result<bool> {
    if !(0.0..=fleet.horizon).contains(&s) {
        return Err(Error::TimeOutOfRange { t: s, horizon: fleet.horizon });
    }
    Ok(pair_connected(&fleet.positions_at(s), fleet.ball_radius()))
}

/// Pair connectivity sampled on the left endpoints of a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivitySeries {
    pub times: Vec<f64>,
    pub connected: Vec<bool>,
    pub tau_estimate: f64,
    pub step: f64,
}

/// `m = ceil(T / step)` equal steps of length `T / m`, so the grid always ends
/// exactly at the horizon.
pub(crate) fn time_grid(horizon: f64, step: f64) -> Result<(usize, f64)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    let m = ceil(horizon / step - 1e-9).max(1.0) as usize;
    Ok((m, horizon / m as f64))
}

/// Riemann estimate of the time the tagged pair spends connected.
pub fn connection_time(fleet: &Fleet, step: f64) -> Result<ConnectivitySeries> {
    if step > fleet.horizon / 10.0 * (1.0 + 1e-12) {
        return Err(invalid("dt", "must be at most T/10"));
    }
    let (m, h) = time_grid(fleet.horizon, step)?;
    let radius = fleet.ball_radius();
    let mut times = Vec::with_capacity(m);
    let mut connected = Vec::with_capacity(m);
    let mut positions = Vec::with_capacity(fleet.len());
    for k in 0..m {
        let s = k as f64 * h;
        positions.clear();
        positions.extend(fleet.trajectories.iter().map(|t| t.state(s).position));
        times.push(s);
        connected.push(pair_connected(&positions, radius));
    }
    let count = connected.iter().filter(|c| **c).count();
    Ok(ConnectivitySeries { times, connected, tau_estimate: fleet.horizon * count as f64 / m as f64, step: h })
}

/// Parameters for sampling fleets.
#[derive(Debug, Clone)]
pub struct FleetSpec {
    pub waypoints: WaypointLaw,
    pub velocities: VelocityLaw,
    pub walkers: usize,
    pub comm_scale: f64,
    pub horizon: f64,
    pub init: InitialState,
}

impl FleetSpec {
    fn validate(&self) -> Result<()> {
        if self.walkers < 2 {
            return Err(invalid("N", "must be >= 2"));
        }
        if !(self.comm_scale > 0.0) {
            return Err(invalid("R", "must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("T", "must be positive"));
        }
        Ok(())
    }

    /// The tagged pair drawn from the `TAGGED_PAIR` stream of `key`.
    pub fn tagged_pair(&self, key: StreamKey) -> Result<[Trajectory; 2]> {
        let k = key.child(tags::TAGGED_PAIR);
        Ok([self.walker(k.child(0))?, self.walker(k.child(1))?])
    }

    fn walker(&self, key: StreamKey) -> Result<Trajectory> {
        simulate_trajectory(&self.waypoints, &self.velocities, self.horizon, self.init, &mut key.rng())
    }

    /// Fleet for trial `trial`; the tagged pair is taken from `pair` when
    /// given, otherwise drawn with the rest.
    pub fn fleet(&self, trial: usize, pair: Option<&[Trajectory; 2]>, key: StreamKey) -> Result<Fleet> {
        self.validate()?;
        let k = key.child(tags::FLEET).child(trial as u64);
        let mut trajectories = Vec::with_capacity(self.walkers);
        match pair {
            Some([a, b]) => {
                trajectories.push(a.clone());
                trajectories.push(b.clone());
            }
            None => {
                trajectories.push(self.walker(k.child(0))?);
                trajectories.push(self.walker(k.child(1))?);
            }
        }
        for i in 2..self.walkers {
            trajectories.push(self.walker(k.child(i as u64))?);
        }
        Fleet::new(trajectories, self.comm_scale)
    }
}

/// `tau / T` over independent fleets. With `condition_pair` the tagged pair is
/// fixed across trials (drawn once from `key`) and only walkers `3..N` are
/// resampled.
pub fn connection_time_distribution<E: TrialRunner>(
    spec: &FleetSpec,
    step: f64,
    trials: usize,
    condition_pair: bool,
    key: StreamKey,
    runner: &E,
) -> Result<Vec<f64>> {
    let pair = if condition_pair { Some(spec.tagged_pair(key)?) } else { None };
    connection_times_given(spec, step, trials, pair.as_ref(), key, runner)
}

/// Like [`connection_time_distribution`] with an explicit tagged pair.
pub fn connection_times_given<E: TrialRunner>(
    spec: &FleetSpec,
    step: f64,
    trials: usize,
    pair: Option<&[Trajectory; 2]>,
    key: StreamKey,
    runner: &E,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    spec.validate()?;
    let out = runner.run(trials, |t| {
        let fleet = spec.fleet(t, pair, key)?;
        Ok(connection_time(&fleet, step)?.tau_estimate / fleet.horizon)
    });
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use alloc::vec;

    fn still(p: Point, horizon: f64) -> Trajectory {
        // a very slow walker stays (numerically) at p
        let q = p + Point::xy(1e-12, 0.0);
        Trajectory::from_parts(vec![p, q], vec![1e-13 / horizon], horizon).unwrap()
    }

    #[test]
    fn identical_pair_always_connected() {
        let w = WaypointLaw::uniform(Domain::unit_square());
        let v = VelocityLaw::constant(1.0).unwrap();
        let t = simulate_trajectory(&w, &v, 3.0, InitialState::WaypointStart, &mut StreamKey::new(3).rng()).unwrap();
        let fleet = Fleet::new(vec![t.clone(), t], 1e-6).unwrap();
        let s = connection_time(&fleet, 0.01).unwrap();
        assert_eq!(s.tau_estimate, fleet.horizon);
        assert!(connected_at(&fleet, 1.5).unwrap());
        assert!(connected_at(&fleet, 3.5).is_err());
    }

    #[test]
    fn relay_and_isolation() {
        let n: f64 = 3.0;
        let r = 0.3; // ball radius 0.3 / sqrt(3), reach about 0.346
        let a = still(Point::xy(0.0, 0.0), 1.0);
        let b = still(Point::xy(0.6, 0.0), 1.0);
        let m = still(Point::xy(0.3, 0.0), 1.0);
        let pair = Fleet::new(vec![a.clone(), b.clone()], r).unwrap();
        assert!(!connected_at(&pair, 0.5).unwrap());
        let relay = Fleet::new(vec![a, b, m], r).unwrap();
        assert!((relay.ball_radius() - r / n.sqrt()).abs() < 1e-15);
        assert!(connected_at(&relay, 0.5).unwrap());
        assert_eq!(connection_time(&relay, 0.1).unwrap().tau_estimate, 1.0);
    }

    #[test]
    fn step_validation() {
        let a = still(Point::xy(0.0, 0.0), 1.0);
        let f = Fleet::new(vec![a.clone(), a], 1.0).unwrap();
        assert!(connection_time(&f, 0.2).is_err());
        assert!(connection_time(&f, 0.0).is_err());
        assert_eq!(connection_time(&f, 0.03).unwrap().times.len(), 34);
    }
}
