//! Small summary-statistics helpers.

use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample standard deviation (0 for fewer than two samples).
    pub sd: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary { n, mean: 0.0, sd: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            sqrt(ss / (n - 1) as f64)
        } else {
            0.0
        };
        Summary { n, mean, sd }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sd / sqrt(self.n as f64)
        }
    }
}

/// Binomial standard error of `hits / trials`, floored at the `1/trials`
/// resolution so that empty or full counts still carry an uncertainty.
pub fn binomial_std_error(hits: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    sqrt((p * (1.0 - p)).max(1.0 / n) / n)
}

/// Combined standard error of a difference of independent estimates.
pub fn combined(a: f64, b: f64) -> f64 {
    sqrt(a * a + b * b)
}

/// Pearson correlation; 0 when either side is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / sqrt(sxx * syy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_basic() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - 1.2909944487358056).abs() < 1e-12);
    }

    #[test]
    fn binomial_floor() {
        assert!((binomial_std_error(0, 100) - 0.01).abs() < 1e-15);
        assert!((binomial_std_error(50, 100) - 0.05).abs() < 1e-15);
    }
}
