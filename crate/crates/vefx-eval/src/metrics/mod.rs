//! Global agreement metrics between judge scores and human labels.
//!
//! SRCC and KRCC are computed on raw predictions; PLCC and RMSE are
//! computed after four-parameter logistic calibration. Inter-annotator
//! agreement (exact and within-1-point) lives here too, since it shares
//! the reporting surface.

pub mod calibration;
pub mod rank;

use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

use crate::table::EvalTable;
use crate::types::{overall_human, Dimension, OrdinalScore};
use calibration::{fit_logistic_4p, plcc_rmse_calibrated, CalibrationParams, FitStatus};
use rank::{krcc_tau_b, srcc_with_mode, SrccMode};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("undefined on constant input")]
    ConstantInput,
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("judge '{judge_id}' has no predictions in the table")]
    UnknownJudge { judge_id: String },
    #[error("empty input")]
    EmptyInput,
    #[error("sample '{sample_id}' has {n} raters; agreement needs exactly two")]
    TooManyRaters { sample_id: String, n: usize },
}

/// A reported row: one of the three dimensions, or the overall score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportTarget {
    Dimension(Dimension),
    Overall,
}

impl Serialize for ReportTarget {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl ReportTarget {
    pub const ALL: [ReportTarget; 4] = [
        ReportTarget::Dimension(Dimension::If),
        ReportTarget::Dimension(Dimension::Rq),
        ReportTarget::Dimension(Dimension::Ee),
        ReportTarget::Overall,
    ];
}

impl fmt::Display for ReportTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportTarget::Dimension(d) => d.fmt(f),
            ReportTarget::Overall => f.write_str("Overall"),
        }
    }
}

/// One (judge, target) cell set. Metrics that could not be computed are
/// absent with the reason recorded in `status`, never reported as zero.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub target: ReportTarget,
    pub n: usize,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
    pub plcc: Option<f64>,
    pub rmse: Option<f64>,
    pub fit: Option<CalibrationParams>,
    /// Whether the calibration met its convergence criterion within the
    /// iteration budget; the best-so-far curve is reported either way.
    pub fit_converged: Option<bool>,
    pub fit_sse: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub judge_id: String,
    pub rows: Vec<MetricRow>,
}

fn compute_row(target: ReportTarget, pred: &[f64], human: &[f64], mode: SrccMode) -> MetricRow {
    let n = pred.len();
    let mut issues: Vec<String> = Vec::new();
    if n < 3 {
        return MetricRow {
            target,
            n,
            srcc: None,
            krcc: None,
            plcc: None,
            rmse: None,
            fit: None,
            fit_converged: None,
            fit_sse: None,
            status: "unavailable:n<3".to_string(),
        };
    }
    let srcc = match srcc_with_mode(pred, human, mode) {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(format!("srcc:{e}"));
            None
        }
    };
    let krcc = match krcc_tau_b(pred, human) {
        Ok(v) => Some(v),
        Err(e) => {
            issues.push(format!("krcc:{e}"));
            None
        }
    };
    let (plcc, rmse, fit, fit_converged, fit_sse) = if n < 5 {
        issues.push("plcc:n<5".to_string());
        (None, None, None, None, None)
    } else {
        match fit_logistic_4p(pred, human) {
            Ok(cal) => {
                if let FitStatus::Identity(_) = cal.status {
                    issues.push(cal.status.label());
                }
                match plcc_rmse_calibrated(&cal, human) {
                    Ok((plcc, rmse)) => (
                        Some(plcc),
                        Some(rmse),
                        Some(cal.params),
                        Some(cal.converged),
                        Some(cal.sse),
                    ),
                    Err(e) => {
                        issues.push(format!("plcc:{e}"));
                        (None, None, Some(cal.params), Some(cal.converged), Some(cal.sse))
                    }
                }
            }
            Err(e) => {
                issues.push(format!("fit:{e}"));
                (None, None, None, None, None)
            }
        }
    };
    let status = if issues.is_empty() {
        "ok".to_string()
    } else {
        issues.join(";")
    };
    MetricRow {
        target,
        n,
        srcc,
        krcc,
        plcc,
        rmse,
        fit,
        fit_converged,
        fit_sse,
        status,
    }
}

/// Per-dimension and overall metric rows for one judge.
///
/// The overall human target is the mean of IF, RQ, and EE; the overall
/// prediction is the mean of the dimensions the judge produced, or its
/// native scalar for scalar-only judges.
pub fn metric_report(
    table: &EvalTable,
    judge_id: &str,
    mode: SrccMode,
) -> Result<MetricReport, MetricError> {
    if !table.judges().iter().any(|j| j == judge_id) {
        return Err(MetricError::UnknownJudge {
            judge_id: judge_id.to_string(),
        });
    }
    let mut rows = Vec::with_capacity(4);
    for target in ReportTarget::ALL {
        let mut pred = Vec::new();
        let mut human = Vec::new();
        for sample in table.samples() {
            let Some(prediction) = sample.prediction_for(judge_id) else {
                continue;
            };
            match target {
                ReportTarget::Dimension(dim) => {
                    if let Some(p) = prediction.scores.dimension(dim) {
                        pred.push(p);
                        human.push(sample.labels().get(dim).as_f64());
                    }
                }
                ReportTarget::Overall => {
                    pred.push(prediction.scores.overall());
                    human.push(overall_human(sample.labels()).value());
                }
            }
        }
        rows.push(compute_row(target, &pred, &human, mode));
    }
    Ok(MetricReport {
        judge_id: judge_id.to_string(),
        rows,
    })
}

/// Metric reports for every judge in the table, in sorted judge order.
/// Judges are independent, so they are computed in parallel; each report
/// is internally sequential, so the output is identical regardless of the
/// worker count.
pub fn metric_reports(table: &EvalTable, mode: SrccMode) -> Vec<MetricReport> {
    table
        .judges()
        .par_iter()
        .map(|judge| metric_report(table, judge, mode).expect("judge comes from the table"))
        .collect()
}

/// Exact and within-1-point agreement percentages over label pairs.
pub fn agreement(pairs: &[(OrdinalScore, OrdinalScore)]) -> Result<(f64, f64), MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let mut exact = 0.0;
    let mut within1 = 0.0;
    for (a, b) in pairs {
        let diff = (a.value() as i8 - b.value() as i8).abs();
        if diff == 0 {
            exact += 1.0;
        }
        if diff <= 1 {
            within1 += 1.0;
        }
    }
    Ok((100.0 * exact / n, 100.0 * within1 / n))
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementRow {
    pub dimension: Dimension,
    pub exact_pct: f64,
    pub within1_pct: f64,
    pub n_pairs: usize,
}

/// Inter-annotator agreement per dimension over the double-annotated
/// samples of the table.
pub fn agreement_report(table: &EvalTable) -> Result<Vec<AgreementRow>, MetricError> {
    for sample in table.samples() {
        if sample.annotations.len() > 2 {
            return Err(MetricError::TooManyRaters {
                sample_id: sample.sample_id.clone(),
                n: sample.annotations.len(),
            });
        }
    }
    let mut rows = Vec::with_capacity(3);
    for dim in Dimension::ALL {
        let pairs: Vec<(OrdinalScore, OrdinalScore)> = table
            .double_annotated()
            .map(|s| {
                (
                    s.annotations[0].labels.get(dim),
                    s.annotations[1].labels.get(dim),
                )
            })
            .collect();
        let (exact_pct, within1_pct) = agreement(&pairs)?;
        rows.push(AgreementRow {
            dimension: dim,
            exact_pct,
            within1_pct,
            n_pairs: pairs.len(),
        });
    }
    Ok(rows)
}
