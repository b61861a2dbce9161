//! Stationary position density of the random waypoint walker on the unit disk
//! with uniform waypoints (any speed law independent of the waypoints).

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::math::{cos, sqrt};

/// `int_0^pi sqrt(1 - r^2 cos^2 phi) dphi` by adaptive Simpson quadrature.
pub fn disk_phi_integral(r: f64) -> f64 {
    let r2 = r * r;
    let f = |phi: f64| {
        let c = cos(phi);
        sqrt((1.0 - r2 * c * c).max(0.0))
    };
    // the integrand is symmetric about pi/2
    2.0 * adaptive_simpson(&f, 0.0, 0.5 * PI, 1e-13, 40)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `f_*(x) = 45/(64 pi) (1 - |x|^2) int_0^pi sqrt(1 - |x|^2 cos^2 phi) dphi`.
pub fn disk_density_closed_form(x: &Point) -> Result<f64> {
    let r2 = x.norm_sq();
    if r2 > 1.0 {
        return Err(Error::OutsideDomain);
    }
    Ok(45.0 / (64.0 * PI) * (1.0 - r2) * disk_phi_integral(sqrt(r2)))
}

/// Parabolic approximation `(2/pi)(1 - |x|^2)`.
pub fn disk_density_approx(x: &Point) -> Result<f64> {
    let r2 = x.norm_sq();
    if r2 > 1.0 {
        return Err(Error::OutsideDomain);
    }
    Ok(2.0 / PI * (1.0 - r2))
}
