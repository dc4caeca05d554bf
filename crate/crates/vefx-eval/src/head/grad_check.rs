//! Finite-difference verification of the loss gradient.
//!
//! Central differences over every parameter coordinate, compared against
//! the analytic gradient. Coordinates where both values are near zero use
//! an absolute criterion, since the relative error is meaningless there.

use super::{FeatureVector, HeadError, LossNormalization, OrdinalHeadParams};
use crate::types::LabelTriplet;

const ZERO_TOL: f64 = 1e-8;

/// Max relative error between the analytic gradient of the ordinal loss
/// and central finite differences, over all parameter coordinates.
pub fn grad_check(
    params: &OrdinalHeadParams,
    batch: &[(FeatureVector, LabelTriplet)],
    epsilon: f64,
) -> Result<f64, HeadError> {
    let refs: Vec<(&FeatureVector, &LabelTriplet)> = batch.iter().map(|(x, y)| (x, y)).collect();
    let (_, analytic) =
        params.batch_loss_and_gradient(&refs, LossNormalization::FixedKMinus1)?;
    grad_check_against(&analytic, params, batch, epsilon)
}

/// Same comparison against a caller-supplied gradient; lets a corrupted
/// gradient be fed in to prove the check can fail.
pub fn grad_check_against(
    analytic: &[f64],
    params: &OrdinalHeadParams,
    batch: &[(FeatureVector, LabelTriplet)],
    epsilon: f64,
) -> Result<f64, HeadError> {
    if !(epsilon > 1e-7 && epsilon < 1e-3) {
        return Err(HeadError::BadEpsilon { value: epsilon });
    }
    if analytic.len() != params.len() {
        return Err(HeadError::GradientShape {
            expected: params.len(),
            got: analytic.len(),
        });
    }
    let refs: Vec<(&FeatureVector, &LabelTriplet)> = batch.iter().map(|(x, y)| (x, y)).collect();
    let mut probe = params.clone();
    let mut max_error = 0.0f64;
    for (k, &analytic_k) in analytic.iter().enumerate() {
        let original = probe.as_slice()[k];
        probe.as_mut_slice()[k] = original + epsilon;
        let (loss_plus, _) = probe.batch_loss_and_gradient(&refs, LossNormalization::FixedKMinus1)?;
        probe.as_mut_slice()[k] = original - epsilon;
        let (loss_minus, _) =
            probe.batch_loss_and_gradient(&refs, LossNormalization::FixedKMinus1)?;
        probe.as_mut_slice()[k] = original;

        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let scale = analytic_k.abs().max(numeric.abs());
        let error = if scale < ZERO_TOL {
            (analytic_k - numeric).abs()
        } else {
            (analytic_k - numeric).abs() / scale
        };
        max_error = max_error.max(error);
    }
    Ok(max_error)
}
