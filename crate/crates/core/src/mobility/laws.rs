use alloc::sync::Arc;
use core::fmt;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::{CellGrid, Domain, Point};
use crate::math::{ln, powf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityKind {
    Uniform,
    /// Density proportional to `v^exponent` on `[v_minus, v_plus]`.
    TruncatedPower { exponent: f64 },
}

/// Law of the trip speeds, supported on `[v_minus, v_plus]`, `v_minus > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityLaw {
    pub v_minus: f64,
    pub v_plus: f64,
    pub kind: VelocityKind,
}

impl VelocityLaw {
    pub fn new(v_minus: f64, v_plus: f64, kind: VelocityKind) -> Result<VelocityLaw> {
        if !(v_minus > 0.0 && v_minus <= v_plus && v_plus.is_finite()) {
            return Err(invalid("velocity", "need 0 < v_minus <= v_plus < inf"));
        }
        if let VelocityKind::TruncatedPower { exponent } = kind {
            if !exponent.is_finite() {
                return Err(invalid("velocity.exponent", "must be finite"));
            }
        }
        Ok(VelocityLaw { v_minus, v_plus, kind })
    }

    pub fn uniform(v_minus: f64, v_plus: f64) -> Result<VelocityLaw> {
        VelocityLaw::new(v_minus, v_plus, VelocityKind::Uniform)
    }

    /// Degenerate law `V = v`.
    pub fn constant(v: f64) -> Result<VelocityLaw> {
        VelocityLaw::uniform(v, v)
    }

    /// Default speeds `[0.5, 1.5] * diam(D)` per unit time.
    pub fn default_for(domain: &Domain) -> VelocityLaw {
        let d = domain.diameter();
        VelocityLaw { v_minus: 0.5 * d, v_plus: 1.5 * d, kind: VelocityKind::Uniform }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.v_minus == self.v_plus {
            return self.v_minus;
        }
        let u: f64 = rng.random();
        let (a, b) = (self.v_minus, self.v_plus);
        match self.kind {
            VelocityKind::Uniform => a + u * (b - a),
            VelocityKind::TruncatedPower { exponent } => {
                let k = exponent + 1.0;
                if k.abs() < 1e-12 {
                    a * powf(b / a, u)
                } else {
                    let (pa, pb) = (powf(a, k), powf(b, k));
                    powf(pa + u * (pb - pa), 1.0 / k).clamp(a, b)
                }
            }
        }
    }

    /// `E[1/V]`.
    pub fn mean_inverse(&self) -> f64 {
        let (a, b) = (self.v_minus, self.v_plus);
        if a == b {
            return 1.0 / a;
        }
        match self.kind {
            VelocityKind::Uniform => ln(b / a) / (b - a),
            VelocityKind::TruncatedPower { exponent } => {
                // E[V^-1] = int v^(e-1) / int v^e
                power_integral(a, b, exponent - 1.0) / power_integral(a, b, exponent)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let (a, b) = (self.v_minus, self.v_plus);
        if a == b {
            return a;
        }
        match self.kind {
            VelocityKind::Uniform => 0.5 * (a + b),
            VelocityKind::TruncatedPower { exponent } => {
                power_integral(a, b, exponent + 1.0) / power_integral(a, b, exponent)
            }
        }
    }
}

fn power_integral(a: f64, b: f64, e: f64) -> f64 {
    let k = e + 1.0;
    if k.abs() < 1e-12 {
        ln(b / a)
    } else {
        (powf(b, k) - powf(a, k)) / k
    }
}

pub type DensityFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum WaypointKind {
    Uniform,
    /// Lebesgue density on the domain together with an upper bound used for
    /// rejection sampling.
    Custom { density: DensityFn, bound: f64 },
}

impl fmt::Debug for WaypointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaypointKind::Uniform => f.write_str("Uniform"),
            WaypointKind::Custom { bound, .. } => write!(f, "Custom {{ bound: {bound} }}"),
        }
    }
}

/// Law of the waypoints on a convex domain.
#[derive(Debug, Clone)]
pub struct WaypointLaw {
    pub domain: Domain,
    pub kind: WaypointKind,
}

impl WaypointLaw {
    pub fn uniform(domain: Domain) -> WaypointLaw {
        WaypointLaw { domain, kind: WaypointKind::Uniform }
    }

    /// Custom density; checked to integrate to 1 within 1% by midpoint
    /// quadrature on a 200-per-axis grid.
    pub fn custom(domain: Domain, density: DensityFn, bound: f64) -> Result<WaypointLaw> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(invalid("waypoint.bound", "must be positive and finite"));
        }
        let law = WaypointLaw { domain, kind: WaypointKind::Custom { density, bound } };
        let mass = law.quadrature_mass(200)?;
        if (mass - 1.0).abs() > 0.01 {
            return Err(invalid("waypoint.density", "does not integrate to 1 within 1%"));
        }
        Ok(law)
    }

    pub fn density_at(&self, p: &Point) -> f64 {
        if !self.domain.contains(p) {
            return 0.0;
        }
        match &self.kind {
            WaypointKind::Uniform => 1.0 / self.domain.volume(),
            WaypointKind::Custom { density, .. } => density(p),
        }
    }

    /// Midpoint-rule integral of the density over the domain.
    pub fn quadrature_mass(&self, resolution: usize) -> Result<f64> {
        let grid = CellGrid::new(self.domain, resolution)?;
        let vol = grid.cell_volume();
        Ok(grid.centers().iter().map(|c| self.density_at(c) * vol).sum())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            WaypointKind::Uniform => self.domain.sample_uniform(rng),
            WaypointKind::Custom { density, bound } => loop {
                let p = self.domain.sample_uniform(rng);
                let u: f64 = rng.random();
                if u * bound < density(&p) {
                    return p;
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn velocity_validation_and_moments() {
        assert!(VelocityLaw::uniform(0.0, 1.0).is_err());
        assert!(VelocityLaw::uniform(2.0, 1.0).is_err());
        let v = VelocityLaw::uniform(1.0, 3.0).unwrap();
        assert!((v.mean_inverse() - (3.0f64).ln() / 2.0).abs() < 1e-15);
        let mut rng = StreamKey::new(2).rng();
        let n = 200_000;
        let mut s = 0.0;
        let p = VelocityLaw::new(1.0, 2.0, VelocityKind::TruncatedPower { exponent: 2.0 }).unwrap();
        for _ in 0..n {
            let x = p.sample(&mut rng);
            assert!((1.0..=2.0).contains(&x));
            s += x;
        }
        // mean of v^2 on [1,2]: (15/4)/(7/3)
        assert!((s / n as f64 - 45.0 / 28.0).abs() < 0.005);
        assert!((p.mean() - 45.0 / 28.0).abs() < 1e-12);
        assert_eq!(VelocityLaw::constant(1.5).unwrap().sample(&mut rng), 1.5);
    }

    #[test]
    fn custom_waypoints() {
        let d = Domain::unit_square();
        let f: DensityFn = Arc::new(|p: &Point| 2.0 * p.x());
        let law = WaypointLaw::custom(d, f, 2.0).unwrap();
        let mut rng = StreamKey::new(3).rng();
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| law.sample(&mut rng).x()).sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01);
        let bad: DensityFn = Arc::new(|_: &Point| 2.0);
        assert!(WaypointLaw::custom(d, bad, 2.0).is_err());
    }
}
