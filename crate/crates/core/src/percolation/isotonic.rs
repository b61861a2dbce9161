use alloc::vec::Vec;

/// Weighted least-squares nondecreasing fit by pool-adjacent-violators.
pub fn isotonic_nondecreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let tw = bw + cur.1;
            let mean = if tw > 0.0 { (m * bw + cur.0 * cur.1) / tw } else { 0.5 * (m + cur.0) };
            cur = (mean, tw, len + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, len) in blocks {
        out.extend(core::iter::repeat_n(m, len));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pools_violators() {
        let fit = isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0], &[1.0; 4]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 4.0]);
        let fit = isotonic_nondecreasing(&[3.0, 2.0, 1.0], &[1.0, 1.0, 2.0]);
        assert_eq!(fit, vec![1.75; 3]);
    }

    #[test]
    fn monotone_input_untouched() {
        let v = [0.0, 0.1, 0.1, 0.5, 1.0];
        assert_eq!(isotonic_nondecreasing(&v, &[2.0; 5]), v.to_vec());
    }
}
