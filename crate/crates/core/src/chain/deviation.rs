use alloc::vec::Vec;

use crate::chain::arrival::{build_arrival_chain, tau_via_chain_to_horizon};
use crate::error::{invalid, Result};
use crate::exec::TrialRunner;
use crate::limit::Landscape;
use crate::math::ln;
use crate::mobility::{simulate_trajectory, InitialState, VelocityLaw, WaypointLaw};
use crate::rng::StreamKey;

/// How the tagged pair is simulated.
#[derive(Debug, Clone)]
pub struct PairSpec {
    pub waypoints: WaypointLaw,
    pub velocities: VelocityLaw,
    pub init: InitialState,
}

/// One `(p, T)` cell of a deviation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationRow {
    pub p: f64,
    pub horizon: f64,
    pub trips: f64,
    pub trials: usize,
    pub hits: usize,
    /// `(1/T) log(hits / trials)`; `None` when there were no hits.
    pub log_prob_over_t: Option<f64>,
    /// For zero-hit cells: the resolution bound `(1/T) log(1/trials)`.
    pub below_resolution: Option<f64>,
}

/// Empirical `(1/T) log P(tau_T <= T p)` for every `p` and horizon, with
/// horizons given in units of the mean trip duration. All `p` values share the
/// simulations of a horizon.
#[allow(clippy::too_many_arguments)]
pub fn deviation_rate_estimate<E: TrialRunner>(
    ps: &[f64],
    trips: &[f64],
    trip_mean: f64,
    trials: usize,
    spec: &PairSpec,
    landscape: &Landscape<'_>,
    quad_n: usize,
    key: StreamKey,
    runner: &E,
) -> Result<Vec<DeviationRow>> {
    if trials < 1000 {
        return Err(invalid("trials", "need at least 10^3"));
    }
    if ps.iter().any(|p| !(*p > 0.0)) {
        return Err(invalid("p", "must be positive"));
    }
    if !(trip_mean > 0.0) || trips.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("T", "horizons must be positive"));
    }
    let mut rows = Vec::new();
    for (ti, &k) in trips.iter().enumerate() {
        let horizon = k * trip_mean;
        let kt = key.child(ti as u64);
        let fractions: Result<Vec<f64>> = runner
            .run(trials, |t| {
                let mut rng = kt.child(t as u64).rng();
                let a = simulate_trajectory(&spec.waypoints, &spec.velocities, horizon, spec.init, &mut rng)?;
                let b = simulate_trajectory(&spec.waypoints, &spec.velocities, horizon, spec.init, &mut rng)?;
                let chain = build_arrival_chain(&a, &b, horizon)?;
                Ok(tau_via_chain_to_horizon(&chain, landscape, quad_n)? / horizon)
            })
            .into_iter()
            .collect();
        let fractions = fractions?;
        for &p in ps {
            let hits = fractions.iter().filter(|f| **f <= p).count();
            let (log_prob_over_t, below_resolution) = if hits == 0 {
                (None, Some(ln(1.0 / trials as f64) / horizon))
            } else {
                (Some(ln(hits as f64 / trials as f64) / horizon), None)
            };
            rows.push(DeviationRow { p, horizon, trips: k, trials, hits, log_prob_over_t, below_resolution });
        }
    }
    Ok(rows)
}
