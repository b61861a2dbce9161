use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::geometry::{Point, MAX_DIM};
use crate::math::powi;

/// Homogeneous Poisson points in the box `[-h, h]^d`, `h = box_half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub box_half_width: f64,
    pub intensity: f64,
}

impl PointCloud {
    /// Box side length `L = 2 h`.
    pub fn side(&self) -> f64 {
        2.0 * self.box_half_width
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(
    lambda: f64,
    box_half_width: f64,
    dim: usize,
    rng: &mut R,
) -> Result<PointCloud> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "must be finite and >= 0"));
    }
    if !(box_half_width > 0.0) {
        return Err(invalid("box_half_width", "must be positive"));
    }
    if !(2..=MAX_DIM).contains(&dim) {
        return Err(invalid("dim", "unsupported dimension"));
    }
    let mean = lambda * powi(2.0 * box_half_width, dim as u32);
    let count = if mean > 0.0 {
        let f: f64 = Poisson::new(mean).map_err(|_| invalid("lambda", "mean too large"))?.sample(rng);
        f as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count);
    let mut c = [0.0; MAX_DIM];
    for _ in 0..count {
        for x in c.iter_mut().take(dim) {
            let u: f64 = rng.random();
            *x = (2.0 * u - 1.0) * box_half_width;
        }
        points.push(Point::new(&c[..dim]).expect("finite coordinates"));
    }
    Ok(PointCloud { points, box_half_width, intensity: lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::stats::Summary;

    #[test]
    fn count_moments() {
        let key = StreamKey::new(5);
        let counts: Vec<f64> = (0..10_000)
            .map(|i| sample_poisson(2.0, 5.0, 2, &mut key.child(i).rng()).unwrap().points.len() as f64)
            .collect();
        let s = Summary::of(&counts);
        let sigma = (200.0f64).sqrt() / 100.0;
        assert!((s.mean - 200.0).abs() < 3.0 * sigma, "mean {}", s.mean);

        let counts: Vec<f64> = (0..10_000)
            .map(|i| sample_poisson(1.0, 2.0, 2, &mut key.child(100_000 + i).rng()).unwrap().points.len() as f64)
            .collect();
        let s = Summary::of(&counts);
        assert!((s.sd * s.sd - 16.0).abs() < 1.6, "var {}", s.sd * s.sd);
    }

    #[test]
    fn empty_and_errors() {
        let mut rng = StreamKey::new(1).rng();
        let c = sample_poisson(0.0, 3.0, 2, &mut rng).unwrap();
        assert!(c.points.is_empty());
        assert!(sample_poisson(-1.0, 3.0, 2, &mut rng).is_err());
        let c = sample_poisson(3.0, 2.0, 2, &mut rng).unwrap();
        assert!(c.points.iter().all(|p| p.sup_norm() <= 2.0));
    }
}
