//! Paired significance testing: a sign-flip permutation test (valid at
//! small n) plus the paired t-test for comparability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Two-sided sign-flip permutation p-value for the mean of paired
/// differences, with the add-one smoothing (count + 1) / (resamples + 1).
pub fn paired_permutation_pvalue(diffs: &[f64], resamples: usize, seed: u64) -> f64 {
    if diffs.is_empty() {
        return 1.0;
    }
    let observed = mean(diffs).abs();
    if diffs.iter().all(|&d| d == 0.0) {
        return 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least_as_extreme = 0usize;
    for _ in 0..resamples {
        let flipped: f64 = diffs
            .iter()
            .map(|&d| if rng.gen::<bool>() { d } else { -d })
            .sum::<f64>()
            / diffs.len() as f64;
        if flipped.abs() >= observed - 1e-15 {
            at_least_as_extreme += 1;
        }
    }
    (at_least_as_extreme + 1) as f64 / (resamples + 1) as f64
}

/// Two-sided paired t-test p-value on the differences.
pub fn paired_t_pvalue(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(diffs);
    let sd = std_dev(diffs);
    if sd == 0.0 {
        return if m == 0.0 { 1.0 } else { 0.0 };
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_differences_are_not_significant() {
        let diffs = vec![0.0; 40];
        assert_eq!(paired_permutation_pvalue(&diffs, 1000, 1), 1.0);
        assert_eq!(paired_t_pvalue(&diffs), 1.0);
    }

    #[test]
    fn strong_consistent_differences_are_significant() {
        let diffs: Vec<f64> = (0..60).map(|i| 0.2 + 0.001 * (i % 5) as f64).collect();
        assert!(paired_permutation_pvalue(&diffs, 10_000, 1) < 0.01);
        assert!(paired_t_pvalue(&diffs) < 1e-6);
    }

    #[test]
    fn symmetric_noise_is_not_significant() {
        let diffs: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        assert!(paired_permutation_pvalue(&diffs, 10_000, 2) > 0.5);
        assert!(paired_t_pvalue(&diffs) > 0.5);
    }

    #[test]
    fn permutation_test_is_deterministic_per_seed() {
        let diffs: Vec<f64> = (0..30).map(|i| (i as f64 - 12.0) / 30.0).collect();
        let a = paired_permutation_pvalue(&diffs, 5000, 9);
        let b = paired_permutation_pvalue(&diffs, 5000, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn t_test_matches_known_value() {
        // d = [1, 2, 3, 4, 5]: mean 3, sd sqrt(2.5), t = 3 / (sqrt(2.5)/sqrt(5))
        // = 4.2426..., dof 4, two-sided p ~= 0.0132.
        let diffs = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let p = paired_t_pvalue(&diffs);
        assert!((p - 0.0132).abs() < 0.001, "p = {p}");
    }
}
