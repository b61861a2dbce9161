#![allow(dead_code)]

use perconet_core::geometry::{CellGrid, Domain};
use perconet_core::mobility::{disk_density_closed_form, DensityField, DensityLabel, VelocityLaw, WaypointLaw};
use perconet_core::percolation::{ThetaTable, LAMBDA_CR_REFERENCE};

pub fn disk_field(resolution: usize) -> DensityField {
    let grid = CellGrid::new(Domain::unit_disk(), resolution).unwrap();
    DensityField::from_fn(grid, DensityLabel::Stationary, |p| disk_density_closed_form(p).unwrap_or(0.0)).unwrap()
}

/// A fixed monotone table with the shape of a simulated one.
pub fn theta_fixture() -> ThetaTable {
    ThetaTable::from_fit(
        vec![0.0, 0.2, 0.3, 0.36, 0.5, 0.7, 1.0, 2.0, 5.0, 10.0],
        vec![0.0, 0.0, 0.05, 0.3, 0.8, 0.95, 0.99, 1.0, 1.0, 1.0],
        2,
        LAMBDA_CR_REFERENCE,
    )
    .unwrap()
}

/// Communication scale whose level-set threshold is `threshold`.
pub fn radius_for(threshold: f64) -> f64 {
    (LAMBDA_CR_REFERENCE / threshold).sqrt()
}

pub fn disk_laws() -> (WaypointLaw, VelocityLaw) {
    (WaypointLaw::uniform(Domain::unit_disk()), VelocityLaw::constant(1.0).unwrap())
}
