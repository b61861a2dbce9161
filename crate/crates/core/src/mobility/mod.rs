//! Random waypoint mobility: laws, trajectories and position densities.

mod density;
mod disk;
mod laws;
mod trajectory;

pub use density::{
    mean_trip_duration, stationary_density, transient_density, DensityField, DensityLabel,
};
pub use disk::{disk_density_approx, disk_density_closed_form, disk_phi_integral};
pub use laws::{VelocityKind, VelocityLaw, WaypointKind, WaypointLaw};
pub use trajectory::{simulate_trajectory, InitialState, MotionState, Trajectory};
