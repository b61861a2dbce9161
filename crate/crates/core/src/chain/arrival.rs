use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::limit::Landscape;
use crate::math::sqrt;
use crate::mobility::{MotionState, Trajectory};

/// Joint state of the tagged pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub walkers: [MotionState; 2],
}

impl ChainState {
    pub fn at(t1: &Trajectory, t2: &Trajectory, s: f64) -> ChainState {
        ChainState { walkers: [t1.state(s), t2.state(s)] }
    }
}

/// States of the pair at time 0 and at every waypoint arrival of either walker
/// up to the horizon, plus the state at the horizon itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalChain {
    pub times: Vec<f64>,
    pub states: Vec<ChainState>,
    pub horizon: f64,
    pub closing: ChainState,
}

impl ArrivalChain {
    /// Number of transitions `n`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Consecutive state pairs `(Z_{j-1}, Z_j)`.
    pub fn transitions(&self) -> impl Iterator<Item = (&ChainState, &ChainState)> + '_ {
        self.states.windows(2).map(|w| (&w[0], &w[1]))
    }
}

/// Merges the arrival times of both walkers up to `horizon`; simultaneous
/// arrivals collapse into one step.
pub fn build_arrival_chain(t1: &Trajectory, t2: &Trajectory, horizon: f64) -> Result<ArrivalChain> {
    let cover = t1.horizon().min(t2.horizon());
    if !(horizon > 0.0) || horizon > cover {
        return Err(Error::TimeOutOfRange { t: horizon, horizon: cover });
    }
    let (a, b) = (t1.arrivals_until(horizon), t2.arrivals_until(horizon));
    let mut times = Vec::with_capacity(a.len() + b.len() + 1);
    times.push(0.0);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j == b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if next > *times.last().unwrap() {
            times.push(next);
        }
    }
    let states = times.iter().map(|&s| ChainState::at(t1, t2, s)).collect();
    Ok(ArrivalChain { times, states, horizon, closing: ChainState::at(t1, t2, horizon) })
}

/// Time between two consecutive chain states: walker 1's displacement over the
/// speed it held during the gap (the earlier state's speed).
pub fn m1(prev: &ChainState, next: &ChainState) -> f64 {
    let a = &prev.walkers[0];
    next.walkers[0].position.dist(&a.position) / a.velocity
}

/// Midpoint-rule average of the limit integrand along the straight segments
/// both walkers traverse between two chain states.
pub fn f_diamond(prev: &ChainState, next: &ChainState, landscape: &Landscape<'_>, quad_n: usize) -> Result<f64> {
    if quad_n < 16 {
        return Err(invalid("quad_n", "must be >= 16"));
    }
    Ok(segment_average(prev, next, landscape, quad_n))
}

fn segment_average(prev: &ChainState, next: &ChainState, landscape: &Landscape<'_>, quad_n: usize) -> f64 {
    let (x0, x1) = (prev.walkers[0].position, next.walkers[0].position);
    let (y0, y1) = (prev.walkers[1].position, next.walkers[1].position);
    let mut sum = 0.0;
    for k in 0..quad_n {
        let s = (k as f64 + 0.5) / quad_n as f64;
        sum += landscape.integrand(&Point::lerp(&x0, &x1, s), &Point::lerp(&y0, &y1, s));
    }
    sum / quad_n as f64
}

/// `sum_j M(Z_{j-1}, Z_j) F(Z_{j-1}, Z_j)`: the limiting connection time up
/// to the last arrival.
pub fn tau_via_chain(chain: &ArrivalChain, landscape: &Landscape<'_>, quad_n: usize) -> Result<f64> {
    if quad_n < 16 {
        return Err(invalid("quad_n", "must be >= 16"));
    }
    Ok(chain.transitions().map(|(a, b)| m1(a, b) * segment_average(a, b, landscape, quad_n)).sum())
}

/// [`tau_via_chain`] plus the partial gap from the last arrival to the horizon.
pub fn tau_via_chain_to_horizon(chain: &ArrivalChain, landscape: &Landscape<'_>, quad_n: usize) -> Result<f64> {
    let last = chain.states.last().unwrap();
    let tail = m1(last, &chain.closing);
    let tail = if tail > 0.0 { tail * segment_average(last, &chain.closing, landscape, quad_n) } else { 0.0 };
    Ok(tau_via_chain(chain, landscape, quad_n)? + tail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicEstimate {
    pub value: f64,
    /// Chain-level jackknife standard error (0 for a single chain).
    pub std_error: f64,
    pub chains: usize,
}

/// Pooled ratio `sum M F / sum M` over chains.
pub fn ergodic_ratio(chains: &[ArrivalChain], landscape: &Landscape<'_>, quad_n: usize) -> Result<ErgodicEstimate> {
    if chains.is_empty() {
        return Err(Error::Empty("chains"));
    }
    let mut parts = Vec::with_capacity(chains.len());
    for c in chains {
        let time: f64 = c.transitions().map(|(a, b)| m1(a, b)).sum();
        parts.push((tau_via_chain(c, landscape, quad_n)?, time));
    }
    let (num, den) = parts.iter().fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
    if !(den > 0.0) {
        return Err(Error::Empty("chains have no transitions"));
    }
    let value = num / den;
    let n = parts.len();
    let std_error = if n > 1 {
        let loo: Vec<f64> = parts.iter().map(|(a, b)| (num - a) / (den - b)).collect();
        let mean = loo.iter().sum::<f64>() / n as f64;
        let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
        sqrt((n - 1) as f64 / n as f64 * ss)
    } else {
        0.0
    };
    Ok(ErgodicEstimate { value, std_error, chains: n })
}
