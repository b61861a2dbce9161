//! The two-walker waypoint-arrival chain and the large-deviation machinery
//! built on its empirical pair measure.
//!
//! Entropy rates are computed on a reduced feature map of the chain state, so
//! they bound the full rate from below.

mod arrival;
mod chi;
mod deviation;
mod entropy;
mod histogram;

pub use arrival::{
    build_arrival_chain, ergodic_ratio, f_diamond, m1, tau_via_chain, tau_via_chain_to_horizon, ArrivalChain,
    ChainState, ErgodicEstimate,
};
pub use chi::{chi_p_bound, verify_chi_solution, ChiOptions, ChiSolution};
pub use deviation::{deviation_rate_estimate, DeviationRow, PairSpec};
pub use entropy::{relative_entropy_rate, EntropyRate};
pub use histogram::{empirical_pair_measure, pair_functionals, BinPair, FeatureBins, PairFunctionals, PairHistogram};
