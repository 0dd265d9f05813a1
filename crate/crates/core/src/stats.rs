//! Order-independent reductions.

/// Arithmetic mean computed over the values sorted ascending, so the result
/// does not depend on input order.
pub fn canonical_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (divisor `N`) around [`canonical_mean`].
pub fn population_variance(values: &[f64]) -> f64 {
    let mean = canonical_mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    canonical_mean(&sq)
}

/// Sample standard deviation (divisor `N - 1`).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    (population_variance(values) * n / (n - 1.0)).sqrt()
}

/// Sum of the `gamma` largest values; all values when fewer are given.
pub fn top_gamma_sum(values: impl IntoIterator<Item = f64>, gamma: usize) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(gamma);
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(canonical_mean(&[1.0, 3.0]), 2.0);
        assert_eq!(population_variance(&[3.0, 1.0]), 1.0);
        assert_eq!(sample_std(&[0.0, 2.0]), 2f64.sqrt());
        assert_eq!(top_gamma_sum([1.0, 5.0, 2.0], 2), 7.0);
    }

    proptest! {
        #[test]
        fn mean_ignores_order(mut v in prop::collection::vec(-1e6f64..1e6, 1..40), seed in any::<u64>()) {
            let a = canonical_mean(&v);
            let k = (seed as usize) % v.len();
            v.rotate_left(k);
            v.reverse();
            prop_assert_eq!(a.to_bits(), canonical_mean(&v).to_bits());
        }
    }
}
