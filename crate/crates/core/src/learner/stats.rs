//! Welch's unequal-variance t-test and summary statistics.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least two values (got {0} and {1})")]
    InsufficientSamples(usize, usize),
    /// Both samples are constant with equal means; the conventional p-value
    /// is 0.5.
    #[error("both samples are constant with equal means")]
    DegenerateSamples,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Welch t statistic and Welch–Satterthwaite degrees of freedom.
///
/// `Ok(None)` signals zero pooled variance with different means, where the
/// statistic is infinite.
fn welch_statistic(a: &[f64], b: &[f64]) -> Result<Option<(f64, f64)>, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientSamples(a.len(), b.len()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return if mean(a) == mean(b) {
            Err(StatsError::DegenerateSamples)
        } else {
            Ok(None)
        };
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(Some((t, df)))
}

/// One-sided p-value for the alternative `mean(a) > mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    match welch_statistic(a, b)? {
        Some((t, df)) => Ok(StudentsT::new(0.0, 1.0, df)
            .expect("positive degrees of freedom")
            .sf(t)),
        None => Ok(if mean(a) > mean(b) { 0.0 } else { 1.0 }),
    }
}

/// Two-sided p-value for `mean(a) != mean(b)`.
pub fn welch_t_test_two_sided(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    match welch_statistic(a, b)? {
        Some((t, df)) => Ok(2.0
            * StudentsT::new(0.0, 1.0, df)
                .expect("positive degrees of freedom")
                .sf(t.abs())),
        None => Ok(0.0),
    }
}

/// Two-sided confidence interval for the mean at `level` (e.g. 0.9), using
/// Student's t with `n - 1` degrees of freedom. Returns `(low, high)`.
pub fn confidence_interval(xs: &[f64], level: f64) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, m);
    }
    let sd = std_dev(xs);
    if sd == 0.0 {
        return (m, m);
    }
    let q = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0);
    let half = q * sd / (xs.len() as f64).sqrt();
    (m - half, m + half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_samples_give_half() {
        let a = [1.0, 2.0, 4.0];
        assert_abs_diff_eq!(welch_t_test(&a, &a).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn clear_separation() {
        let p = welch_t_test(&[10.0, 11.0, 12.0, 13.0], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        // t = 10 / sqrt(5/6), df = 6; scipy.stats.ttest_ind(..., equal_var=False,
        // alternative="greater") gives 1.7182014038060735e-05.
        assert!(p < 0.001);
        assert_abs_diff_eq!(p, 1.718_201_403_806_073_5e-5, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_tails_are_complementary() {
        let a = [3.0, 5.0, 4.5, 6.0];
        let b = [2.0, 7.0, 1.0];
        let s = welch_t_test(&a, &b).unwrap() + welch_t_test(&b, &a).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_sided_doubles_smaller_tail() {
        let a = [3.0, 5.0, 4.5, 6.0];
        let b = [2.0, 7.0, 1.0];
        let one = welch_t_test(&a, &b).unwrap().min(welch_t_test(&b, &a).unwrap());
        assert_abs_diff_eq!(welch_t_test_two_sided(&a, &b).unwrap(), 2.0 * one, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_and_insufficient() {
        assert_eq!(welch_t_test(&[1.0, 1.0], &[1.0, 1.0]), Err(StatsError::DegenerateSamples));
        assert_eq!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::InsufficientSamples(1, 2)));
        assert_eq!(welch_t_test(&[2.0, 2.0], &[1.0, 1.0]), Ok(0.0));
        assert_eq!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]), Ok(1.0));
    }

    #[test]
    fn constant_returns_have_zero_width_interval() {
        assert_eq!(confidence_interval(&[7.0; 10], 0.9), (7.0, 7.0));
    }

    #[test]
    fn ninety_percent_interval() {
        // mean 2.5, sd = sqrt(5/3), t_{0.95, 3} = 2.353363
        let (lo, hi) = confidence_interval(&[1.0, 2.0, 3.0, 4.0], 0.9);
        let half = 2.353_363_434_801_826_4 * (5.0f64 / 3.0).sqrt() / 2.0;
        assert_abs_diff_eq!(lo, 2.5 - half, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 2.5 + half, epsilon = 1e-9);
    }
}
