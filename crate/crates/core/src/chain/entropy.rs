use alloc::vec::Vec;

use crate::chain::histogram::PairHistogram;
use crate::error::{Error, Result};
use crate::math::ln;

/// `H(q | q_bar x P)` for the reduced-feature pair measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRate {
    /// `f64::INFINITY` when `q` charges a pair the reference kernel never visits.
    pub value: f64,
    pub infinite: bool,
    /// Rows of `q` with no reference transitions; their mass is skipped.
    pub excluded_rows: Vec<u32>,
    pub excluded_mass: f64,
}

/// Relative entropy of `q` with respect to its left marginal composed with the
/// kernel estimated from `p_ref`.
pub fn relative_entropy_rate(q: &PairHistogram, p_ref: &PairHistogram) -> Result<EntropyRate> {
    if !(q.total > 0.0) {
        return Err(Error::Empty("histogram q"));
    }
    let ref_left = p_ref.marginal_left();
    let q_left = q.marginal_left();
    let mut sum = 0.0;
    let mut infinite = false;
    let mut excluded_rows = Vec::new();
    let mut excluded_mass = 0.0;
    for (&(a, b), &w) in &q.weights {
        let Some(row) = ref_left.get(&a) else {
            if excluded_rows.last() != Some(&a) {
                excluded_rows.push(a);
            }
            excluded_mass += w / q.total;
            continue;
        };
        let p = p_ref.weights.get(&(a, b)).copied().unwrap_or(0.0) / row;
        if p == 0.0 {
            infinite = true;
            continue;
        }
        // q(a,b) log(q(a,b) / (q_bar(a) P(a,b))) = q(a,b) log(q(b|a) / P(a,b))
        let cond = w / q_left[&a];
        sum += w / q.total * ln(cond / p);
    }
    let value = if infinite { f64::INFINITY } else { sum.max(0.0) };
    Ok(EntropyRate { value, infinite, excluded_rows, excluded_mass })
}
