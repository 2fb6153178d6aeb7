//! Componentwise relative-error metrics used by the benchmark comparisons.

use nalgebra::DVector;
#[allow(unused_imports)] // f64 intrinsics need the trait only in no_std builds
use num_traits::Float;

use crate::error::{Error, Result};

/// `sqrt(sum_i ((est_i - true_i) / true_i)^2)` with zero-truth components
/// excluded and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeError {
    pub value: f64,
    /// Components skipped because the true value was zero.
    pub skipped: usize,
}

pub fn relative_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> Result<RelativeError> {
    if estimate.len() != truth.len() {
        return Err(Error::dim(
            None,
            alloc::format!(
                "estimate has {} entries, truth has {}",
                estimate.len(),
                truth.len()
            ),
        ));
    }
    let mut sum = 0.0;
    let mut skipped = 0;
    for (e, t) in estimate.iter().zip(truth.iter()) {
        if *t == 0.0 {
            skipped += 1;
            continue;
        }
        let r = (e - t) / t;
        sum += r * r;
    }
    Ok(RelativeError {
        value: sum.sqrt(),
        skipped,
    })
}

/// Both benchmark error metrics in one call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub e_eta: RelativeError,
    pub e_theta: RelativeError,
}

pub fn relative_errors(
    eta_hat: &DVector<f64>,
    eta_true: &DVector<f64>,
    theta_hat: &DVector<f64>,
    theta_true: &DVector<f64>,
) -> Result<ErrorPair> {
    Ok(ErrorPair {
        e_eta: relative_error(eta_hat, eta_true)?,
        e_theta: relative_error(theta_hat, theta_true)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_estimate_has_zero_error() {
        let t = DVector::from_row_slice(&[1.5, -2.0]);
        let r = relative_error(&t, &t).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn known_perturbations() {
        let truth = DVector::from_row_slice(&[2.0, 5.0]);
        // delta/theta = (0.1, 0)
        let est = DVector::from_row_slice(&[2.2, 5.0]);
        assert_relative_eq!(
            relative_error(&est, &truth).unwrap().value,
            0.1,
            max_relative = 1e-12
        );
        // delta/theta = (0.3, 0.4) -> 0.5
        let est = DVector::from_row_slice(&[2.6, 7.0]);
        assert_relative_eq!(
            relative_error(&est, &truth).unwrap().value,
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_truth_components_are_skipped() {
        let truth = DVector::from_row_slice(&[0.0, 2.0]);
        let est = DVector::from_row_slice(&[1.0, 2.2]);
        let r = relative_error(&est, &truth).unwrap();
        assert_eq!(r.skipped, 1);
        assert_relative_eq!(r.value, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = DVector::zeros(2);
        let b = DVector::zeros(3);
        assert!(relative_error(&a, &b).is_err());
    }
}
