//! Weighted isotonic regression by pool-adjacent-violators.

use super::MdsError;

/// Non-decreasing fit minimizing `Σ w_i (y_i - f_i)²`.
pub fn pava(values: &[f64], weights: &[f64]) -> Result<Vec<f64>, MdsError> {
    if values.len() != weights.len() {
        return Err(MdsError::LengthMismatch { expected: values.len(), found: weights.len() });
    }
    if let Some(&w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(MdsError::BadWeight(w));
    }
    // (weighted sum, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        blocks.push((w * y, w, 1));
        while blocks.len() > 1 {
            let (s1, w1, n1) = blocks[blocks.len() - 1];
            let (s0, w0, n0) = blocks[blocks.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, w0 + w1, n0 + n1);
        }
    }
    Ok(blocks.iter().flat_map(|&(s, w, n)| std::iter::repeat_n(s / w, n)).collect())
}

/// Unit-weight shorthand.
pub fn pava_unit(values: &[f64]) -> Vec<f64> {
    pava(values, &vec![1.0; values.len()]).expect("unit weights are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Best monotone fit over every partition into contiguous blocks.
    fn exhaustive(values: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for cuts in 0u32..(1 << n.saturating_sub(1)) {
            let mut fit = Vec::with_capacity(n);
            let mut start = 0;
            for end in 1..=n {
                if end == n || cuts & (1 << (end - 1)) != 0 {
                    let sw: f64 = weights[start..end].iter().sum();
                    let swy: f64 = values[start..end].iter().zip(&weights[start..end]).map(|(y, w)| y * w).sum();
                    fit.extend(std::iter::repeat_n(swy / sw, end - start));
                    start = end;
                }
            }
            if fit.windows(2).any(|p| p[0] > p[1]) {
                continue;
            }
            let sse: f64 = fit.iter().zip(values).zip(weights).map(|((f, y), w)| w * (f - y).powi(2)).sum();
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((sse, fit));
            }
        }
        best.map(|(_, f)| f).unwrap_or_default()
    }

    #[test]
    fn sorted_input_unchanged() {
        let v = [1.0, 2.0, 2.0, 5.0];
        assert_eq!(pava_unit(&v), v);
    }

    #[test]
    fn pair_pools_to_the_mean() {
        assert_eq!(pava_unit(&[3.0, 1.0]), vec![2.0, 2.0]);
    }

    #[test]
    fn weights_shift_the_pool() {
        assert_eq!(pava(&[3.0, 0.0], &[2.0, 1.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn bad_weights_rejected() {
        assert_eq!(pava(&[1.0], &[0.0]), Err(MdsError::BadWeight(0.0)));
        assert!(pava(&[1.0, 2.0], &[1.0]).is_err());
        assert!(pava(&[1.0], &[f64::NAN]).is_err());
    }

    proptest! {
        // integer data keep every block mean a single rounding of an exact sum
        #[test]
        fn matches_block_partition_oracle(
            data in (1usize..=10).prop_flat_map(|n| (
                proptest::collection::vec(-20i32..20, n),
                proptest::collection::vec(1u32..5, n),
            ))
        ) {
            let values: Vec<f64> = data.0.iter().map(|&v| f64::from(v)).collect();
            let weights: Vec<f64> = data.1.iter().map(|&w| f64::from(w)).collect();
            prop_assert_eq!(pava(&values, &weights).unwrap(), exhaustive(&values, &weights));
        }

        #[test]
        fn monotone_and_block_means_preserved(values in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
            let fit = pava_unit(&values);
            prop_assert!(fit.windows(2).all(|p| p[0] <= p[1]));
            let mut i = 0;
            while i < fit.len() {
                let mut j = i;
                while j < fit.len() && fit[j] == fit[i] {
                    j += 1;
                }
                let mean = values[i..j].iter().sum::<f64>() / (j - i) as f64;
                prop_assert!((mean - fit[i]).abs() <= 1e-9 * mean.abs().max(1.0));
                i = j;
            }
        }
    }
}
