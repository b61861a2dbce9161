//! Static continuum percolation: Poisson clouds, ball-union clusters and Monte
//! Carlo estimates of the percolation probability.

mod clusters;
mod critical;
mod expbound;
mod isotonic;
mod poisson;
mod theta;

pub use clusters::{label_clusters, ClusterLabeling};
pub use critical::{estimate_lambda_cr, one_arm_exponent, CriticalBracket, PairCrossing};
pub use expbound::{exp_bound_diagnostic, ExpBoundPoint};
pub use isotonic::isotonic_nondecreasing;
pub use poisson::{sample_poisson, PointCloud};
pub use theta::{
    build_theta_table, estimate_theta_bar, origin_percolates, theta_lookup, Lookup, Side,
    ThetaEstimate, ThetaTable, LAMBDA_CR_REFERENCE, LAMBDA_CR_RIGOROUS,
};
