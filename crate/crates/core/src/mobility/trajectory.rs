use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::mobility::{VelocityLaw, WaypointLaw};

/// Markov state of one walker: position, waypoint it heads to, current speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    pub position: Point,
    pub target: Point,
    pub velocity: f64,
}

/// Piecewise-linear random waypoint path.
///
/// `velocities[k - 1]` is the speed of the trip from waypoint `k - 1` to
/// waypoint `k`, and `arrivals[k]` the time waypoint `k` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<Point>,
    velocities: Vec<f64>,
    arrivals: Vec<f64>,
    horizon: f64,
}

impl Trajectory {
    /// Builds a path from waypoints and trip speeds, deriving arrival times.
    pub fn from_parts(waypoints: Vec<Point>, velocities: Vec<f64>, horizon: f64) -> Result<Trajectory> {
        if waypoints.len() < 2 || velocities.len() + 1 != waypoints.len() {
            return Err(invalid("trajectory", "need n+1 waypoints and n velocities, n >= 1"));
        }
        if !(horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        if velocities.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("trajectory.velocities", "must be positive and finite"));
        }
        let mut arrivals = Vec::with_capacity(waypoints.len());
        arrivals.push(0.0);
        let mut t = 0.0;
        for (k, v) in velocities.iter().enumerate() {
            let len = waypoints[k].dist(&waypoints[k + 1]);
            if len == 0.0 {
                return Err(invalid("trajectory.waypoints", "consecutive waypoints coincide"));
            }
            t += len / v;
            arrivals.push(t);
        }
        if t < horizon {
            return Err(invalid("trajectory", "last arrival precedes the horizon"));
        }
        Ok(Trajectory { waypoints, velocities, arrivals, horizon })
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn trip_count(&self) -> usize {
        self.velocities.len()
    }

    /// Arrival times `R_k`, `k >= 1`, not later than `t`.
    pub fn arrivals_until(&self, t: f64) -> &[f64] {
        let end = self.arrivals.partition_point(|&r| r <= t);
        &self.arrivals[1..end.max(1)]
    }

    /// State at time `t` (right-continuous: at an arrival the walker already
    /// heads to the next waypoint).
    pub fn position_at(&self, t: f64) -> Result<MotionState> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        Ok(self.state(t))
    }

    pub(crate) fn state(&self, t: f64) -> MotionState {
        // N(t) = inf{n : R_n > t}
        let n = self.arrivals.partition_point(|&r| r <= t);
        if n >= self.arrivals.len() {
            let last = *self.waypoints.last().unwrap();
            return MotionState { position: last, target: last, velocity: *self.velocities.last().unwrap() };
        }
        let target = self.waypoints[n];
        let from = self.waypoints[n - 1];
        let v = self.velocities[n - 1];
        let back = from - target;
        let len = back.norm();
        let position = target + back * (v * (self.arrivals[n] - t) / len);
        MotionState { position, target, velocity: v }
    }

    /// Path on `[cut, cut + horizon]`, re-timed to start at 0.
    fn cut(&self, cut: f64, horizon: f64) -> Result<Trajectory> {
        let n = self.arrivals.partition_point(|&r| r <= cut);
        let start = self.state(cut);
        let mut waypoints = Vec::with_capacity(self.waypoints.len() - n + 1);
        waypoints.push(start.position);
        waypoints.extend_from_slice(&self.waypoints[n..]);
        let velocities = self.velocities[n - 1..].to_vec();
        Trajectory::from_parts(waypoints, velocities, horizon)
    }

    /// Longest single trip duration.
    pub fn max_trip_duration(&self) -> f64 {
        self.arrivals.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// How a walker is started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// `X_0 = W_0 ~ mu` at the beginning of a trip.
    WaypointStart,
    /// Run from a waypoint start for `duration`, then re-time so the cut point
    /// is time 0. Long burn-in approximates the stationary regime.
    StationaryBurnIn { duration: f64 },
}

impl InitialState {
    /// Burn-in of `50 diam(D) / v_minus`.
    pub fn stationary_default(wlaw: &WaypointLaw, vlaw: &VelocityLaw) -> InitialState {
        InitialState::StationaryBurnIn { duration: 50.0 * wlaw.domain.diameter() / vlaw.v_minus }
    }
}

fn waypoint_path<R: Rng + ?Sized>(
    wlaw: &WaypointLaw,
    vlaw: &VelocityLaw,
    until: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut waypoints = Vec::new();
    let mut velocities = Vec::new();
    let mut prev = wlaw.sample(rng);
    waypoints.push(prev);
    let mut t = 0.0;
    while t <= until {
        let next = loop {
            let w = wlaw.sample(rng);
            if w != prev {
                break w;
            }
        };
        let v = vlaw.sample(rng);
        t += prev.dist(&next) / v;
        waypoints.push(next);
        velocities.push(v);
        prev = next;
    }
    Trajectory::from_parts(waypoints, velocities, until)
}

/// Random waypoint path covering `[0, horizon]`, strictly beyond the last
/// arrival needed.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    wlaw: &WaypointLaw,
    vlaw: &VelocityLaw,
    horizon: f64,
    init: InitialState,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    match init {
        InitialState::WaypointStart => waypoint_path(wlaw, vlaw, horizon, rng),
        InitialState::StationaryBurnIn { duration } => {
            if !(duration >= 0.0) {
                return Err(invalid("burn_in", "must be >= 0"));
            }
            if duration == 0.0 {
                return waypoint_path(wlaw, vlaw, horizon, rng);
            }
            let long = waypoint_path(wlaw, vlaw, duration + horizon, rng)?;
            long.cut(duration, horizon)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::rng::StreamKey;
    use alloc::vec;

    fn segment() -> Trajectory {
        Trajectory::from_parts(
            vec![Point::xy(0.0, 0.0), Point::xy(1.0, 0.0), Point::xy(1.0, 2.0)],
            vec![1.0, 2.0],
            1.5,
        )
        .unwrap()
    }

    #[test]
    fn injected_arrival() {
        let t = Trajectory::from_parts(vec![Point::xy(0.0, 0.0), Point::xy(3.0, 4.0)], vec![2.0], 2.0).unwrap();
        assert_eq!(t.arrivals(), &[0.0, 2.5]);
    }

    #[test]
    fn positions() {
        let t = segment();
        let s = t.position_at(0.5).unwrap();
        assert_eq!(s.position, Point::xy(0.5, 0.0));
        assert_eq!(t.position_at(0.0).unwrap().position, Point::xy(0.0, 0.0));
        let at = t.position_at(1.0).unwrap();
        assert!(at.position.dist(&Point::xy(1.0, 0.0)) < 1e-15);
        assert_eq!(at.target, Point::xy(1.0, 2.0));
        assert_eq!(at.velocity, 2.0);
        assert!(t.position_at(1.6).is_err());
        assert!(t.position_at(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_parts() {
        assert!(Trajectory::from_parts(vec![Point::xy(0.0, 0.0)], vec![], 1.0).is_err());
        assert!(Trajectory::from_parts(vec![Point::xy(0.0, 0.0), Point::xy(0.0, 0.0)], vec![1.0], 0.5).is_err());
        assert!(Trajectory::from_parts(vec![Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)], vec![1.0], 2.0).is_err());
        let w = WaypointLaw::uniform(Domain::unit_square());
        let v = VelocityLaw::constant(1.0).unwrap();
        let mut rng = StreamKey::new(1).rng();
        assert!(simulate_trajectory(&w, &v, 0.0, InitialState::WaypointStart, &mut rng).is_err());
    }

    #[test]
    fn trip_bound_square() {
        let w = WaypointLaw::uniform(Domain::unit_square());
        let v = VelocityLaw::constant(1.0).unwrap();
        let mut rng = StreamKey::new(7).rng();
        let t = simulate_trajectory(&w, &v, 10.0, InitialState::WaypointStart, &mut rng).unwrap();
        assert!(t.arrivals().windows(2).all(|a| a[1] - a[0] > 0.0 && a[1] - a[0] <= 2f64.sqrt()));
        assert!(*t.arrivals().last().unwrap() > 10.0);
    }

    #[test]
    fn burn_in_cut_is_consistent() {
        let w = WaypointLaw::uniform(Domain::unit_disk());
        let v = VelocityLaw::uniform(1.0, 3.0).unwrap();
        let mut rng = StreamKey::new(8).rng();
        let init = InitialState::stationary_default(&w, &v);
        let t = simulate_trajectory(&w, &v, 5.0, init, &mut rng).unwrap();
        assert_eq!(t.arrivals()[0], 0.0);
        assert!(t.waypoints().iter().all(|p| w.domain.contains_within(p, 1e-12)));
        assert!(t.max_trip_duration() <= 2.0 / 1.0);
    }
}
