//! Four-parameter logistic calibration for PLCC/RMSE.
//!
//! Raw judge scores live on an arbitrary monotone scale, so linear
//! agreement is measured after mapping them through
//!
//! ```text
//! q(x) = b1 * (1/2 - 1/(1 + exp(b2 * (x - b3)))) + b4
//! ```
//!
//! fitted by damped Gauss-Newton least squares against the human scores.
//! The (b1, b2) pair carries a sign symmetry, so only the fitted curve is
//! meaningful, never the individual parameters.

use nalgebra::{SMatrix, SVector};
use serde::Serialize;

use super::rank::pearson;
use super::MetricError;

const MAX_ITERATIONS: usize = 200;
const RELATIVE_SSE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
}

impl CalibrationParams {
    /// Evaluate the logistic mapping at one raw score.
    pub fn apply(&self, x: f64) -> f64 {
        self.beta1 * (sigmoid(self.beta2 * (x - self.beta3)) - 0.5) + self.beta4
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Why a fit was discarded in favor of identity calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateReason {
    /// The fitted slope collapsed to zero.
    SlopeZero,
    /// The fit did not beat the constant model.
    WorseThanConstant,
    /// The raw scores already fit better than the curve.
    WorseThanIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// The fitted curve is in use.
    Fitted,
    /// Identity calibration is in use; the row is flagged.
    Identity(DegenerateReason),
}

impl FitStatus {
    pub fn label(&self) -> String {
        match self {
            FitStatus::Fitted => "fitted".to_string(),
            FitStatus::Identity(reason) => format!(
                "identity:{}",
                match reason {
                    DegenerateReason::SlopeZero => "slope_zero",
                    DegenerateReason::WorseThanConstant => "fit_worse_than_constant",
                    DegenerateReason::WorseThanIdentity => "raw_scores_fit_better",
                }
            ),
        }
    }
}

/// Result of [`fit_logistic_4p`]: parameters plus the calibrated outputs.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub params: CalibrationParams,
    pub status: FitStatus,
    /// q(pred_i), or pred_i itself under identity status.
    pub calibrated: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn sse_of(params: &CalibrationParams, pred: &[f64], human: &[f64]) -> f64 {
    pred.iter()
        .zip(human)
        .map(|(&x, &y)| {
            let r = params.apply(x) - y;
            r * r
        })
        .sum()
}

/// Fit the four-parameter logistic mapping by damped Gauss-Newton.
///
/// Degenerate outcomes (zero slope, or a fit no better than the constant
/// model or than the raw scores) fall back to identity calibration and are
/// flagged in the returned status; numbers from a failed fit are never
/// reported silently.
pub fn fit_logistic_4p(pred: &[f64], human: &[f64]) -> Result<Calibration, MetricError> {
    if pred.len() != human.len() {
        return Err(MetricError::LengthMismatch {
            left: pred.len(),
            right: human.len(),
        });
    }
    if pred.len() < 5 {
        return Err(MetricError::TooFewSamples {
            n: pred.len(),
            min: 5,
        });
    }
    if pred.iter().chain(human).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteInput);
    }
    if pred.windows(2).all(|w| w[0] == w[1]) {
        return Err(MetricError::ConstantInput);
    }

    let n = pred.len();
    let h_min = human.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = human.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h_mean = human.iter().sum::<f64>() / n as f64;
    let direction = pearson(pred, human).map(f64::signum).unwrap_or(1.0);
    let mut params = CalibrationParams {
        beta1: (h_max - h_min).max(1e-6),
        beta2: if direction == 0.0 { 1.0 } else { direction },
        beta3: median(pred),
        beta4: h_mean,
    };

    let mut sse = sse_of(&params, pred, human);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;

        // Normal equations J^T J and J^T r from the analytic Jacobian of q.
        let mut jtj = SMatrix::<f64, 4, 4>::zeros();
        let mut jtr = SVector::<f64, 4>::zeros();
        for (&x, &y) in pred.iter().zip(human) {
            let t = params.beta2 * (x - params.beta3);
            let s = sigmoid(t);
            let ds = s * (1.0 - s);
            let row = SVector::<f64, 4>::new(
                s - 0.5,
                params.beta1 * ds * (x - params.beta3),
                -params.beta1 * ds * params.beta2,
                1.0,
            );
            let r = params.beta1 * (s - 0.5) + params.beta4 - y;
            jtj += row * row.transpose();
            jtr += row * r;
        }

        let mut accepted = false;
        for _ in 0..25 {
            let mut damped = jtj;
            for k in 0..4 {
                let scale = if jtj[(k, k)] > 0.0 { jtj[(k, k)] } else { 1.0 };
                damped[(k, k)] += lambda * scale;
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = CalibrationParams {
                beta1: params.beta1 + step[0],
                beta2: params.beta2 + step[1],
                beta3: params.beta3 + step[2],
                beta4: params.beta4 + step[3],
            };
            let candidate_sse = sse_of(&candidate, pred, human);
            if candidate_sse.is_finite() && candidate_sse < sse {
                let gain = (sse - candidate_sse) / sse.max(f64::MIN_POSITIVE);
                params = candidate;
                sse = candidate_sse;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if gain < RELATIVE_SSE_TOL || sse < 1e-28 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            // No descent direction left; treat the current point as final.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let sse_constant: f64 = human.iter().map(|&y| (y - h_mean) * (y - h_mean)).sum();
    let sse_identity: f64 = pred
        .iter()
        .zip(human)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();

    let status = if params.beta2.abs() < 1e-8 {
        FitStatus::Identity(DegenerateReason::SlopeZero)
    } else if sse >= sse_constant && sse_constant > 0.0 {
        FitStatus::Identity(DegenerateReason::WorseThanConstant)
    } else if sse > sse_identity {
        FitStatus::Identity(DegenerateReason::WorseThanIdentity)
    } else {
        FitStatus::Fitted
    };

    let calibrated: Vec<f64> = match status {
        FitStatus::Fitted => pred.iter().map(|&x| params.apply(x)).collect(),
        FitStatus::Identity(_) => pred.to_vec(),
    };
    let sse = match status {
        FitStatus::Fitted => sse,
        FitStatus::Identity(_) => sse_identity,
    };

    Ok(Calibration {
        params,
        status,
        calibrated,
        sse,
        iterations,
        converged,
    })
}

/// Pearson correlation and RMSE between calibrated predictions and human
/// scores; fits the logistic mapping internally.
pub fn plcc_rmse(pred: &[f64], human: &[f64]) -> Result<(f64, f64), MetricError> {
    let cal = fit_logistic_4p(pred, human)?;
    plcc_rmse_calibrated(&cal, human)
}

/// PLCC/RMSE from an existing calibration.
pub fn plcc_rmse_calibrated(cal: &Calibration, human: &[f64]) -> Result<(f64, f64), MetricError> {
    let plcc = pearson(&cal.calibrated, human)?;
    let mse = cal
        .calibrated
        .iter()
        .zip(human)
        .map(|(&c, &y)| (c - y) * (c - y))
        .sum::<f64>()
        / human.len() as f64;
    Ok((plcc, mse.sqrt()))
}
