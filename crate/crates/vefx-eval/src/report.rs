//! Report rendering: self-describing CSV and JSON documents.
//!
//! Every CSV starts with a `#` comment line naming the tool, the value
//! units, and the flag values that produced it, followed by the header
//! row. Cells a judge could not populate hold `--`. All formatting is
//! fixed-width decimal so identical inputs render identical bytes.

use serde::Serialize;
use std::io::Write;

use crate::adjust::AdjustedLeaderboard;
use crate::aggregate::{GeoWeights, LeaderboardRow, TaskRow};
use crate::metrics::{AgreementRow, MetricReport};
use crate::preference::PairAccReport;
use crate::table::ValidationSummary;
use crate::types::Dimension;

const UNAVAILABLE: &str = "--";

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| UNAVAILABLE.to_string(), |v| format!("{v:.4}"))
}

fn fmt6(v: Option<f64>) -> String {
    v.map_or_else(|| UNAVAILABLE.to_string(), |v| format!("{v:.6}"))
}

fn csv_document(comment: &str, header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut buf = Vec::new();
    writeln!(buf, "# {comment}").expect("in-memory write");
    let mut writer = csv::Writer::from_writer(buf);
    writer.write_record(header).expect("csv header");
    for row in rows {
        writer.write_record(&row).expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
}

pub fn json_document<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialize");
    text.push('\n');
    text
}

pub fn metrics_csv(reports: &[MetricReport], srcc_mode: &str) -> String {
    let comment = format!(
        "vefx-eval metrics; scores on the 1-4 scale; srcc_mode={srcc_mode}; \
         srcc/krcc on raw predictions, plcc/rmse after 4-parameter logistic calibration"
    );
    let mut rows = Vec::new();
    for report in reports {
        for row in &report.rows {
            rows.push(vec![
                report.judge_id.clone(),
                row.target.to_string(),
                fmt4(row.srcc),
                fmt4(row.krcc),
                fmt4(row.plcc),
                fmt4(row.rmse),
                row.n.to_string(),
                row.status.clone(),
            ]);
        }
    }
    csv_document(
        &comment,
        &["judge_id", "dimension", "srcc", "krcc", "plcc", "rmse", "n", "fit_status"],
        rows,
    )
}

#[derive(Serialize)]
pub struct MetricsJson<'a> {
    pub srcc_mode: &'a str,
    pub judges: &'a [MetricReport],
}

pub fn pairacc_csv(reports: &[PairAccReport], tie_eps: f64) -> String {
    let comment = format!(
        "vefx-eval pairwise accuracy; within-group pair fractions in [0,1]; tie_eps={tie_eps}"
    );
    let mut rows = Vec::new();
    for report in reports {
        rows.push(vec![
            report.judge_id.clone(),
            fmt4(report.cells.get("IF").copied().flatten()),
            fmt4(report.cells.get("RQ").copied().flatten()),
            fmt4(report.cells.get("EE").copied().flatten()),
            fmt4(report.cells.get("Overall").copied().flatten()),
        ]);
    }
    csv_document(
        &comment,
        &["judge_id", "if", "rq", "ee", "overall"],
        rows,
    )
}

pub fn leaderboard_csv(rows: &[LeaderboardRow], weights: &GeoWeights, source: &str) -> String {
    let comment = format!(
        "vefx-eval leaderboard; scores on the 1-4 scale; source={source}; \
         geoagg weights alpha={},beta={},gamma={}; coverage_flag=partial marks systems \
         missing benchmark items",
        weights.alpha, weights.beta, weights.gamma
    );
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.system_id.clone(),
                fmt4(Some(r.geoagg)),
                fmt4(Some(r.mean)),
                fmt4(Some(r.if_mean)),
                fmt4(Some(r.rq_mean)),
                fmt4(Some(r.ee_mean)),
                r.n.to_string(),
                if r.full_coverage { "full" } else { "partial" }.to_string(),
            ]
        })
        .collect();
    csv_document(
        &comment,
        &["system_id", "geoagg", "mean", "if", "rq", "ee", "n", "coverage_flag"],
        body,
    )
}

pub fn leaderboard_by_task_csv(
    rows: &[TaskRow],
    weights: &GeoWeights,
    source: &str,
) -> String {
    let comment = format!(
        "vefx-eval per-task leaderboard; scores on the 1-4 scale; source={source}; \
         geoagg weights alpha={},beta={},gamma={}",
        weights.alpha, weights.beta, weights.gamma
    );
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.system_id.clone(),
                r.task_type.clone(),
                fmt4(Some(r.geoagg)),
                fmt4(Some(r.mean)),
                r.n.to_string(),
            ]
        })
        .collect();
    csv_document(
        &comment,
        &["system_id", "task_type", "geoagg", "mean", "n"],
        body,
    )
}

pub fn adjusted_csv(lb: &AdjustedLeaderboard, source: &str) -> String {
    let fit_for = |dim: Dimension| {
        lb.fits
            .iter()
            .find(|f| f.dimension == dim)
            .expect("three dimension fits")
    };
    let comment = format!(
        "vefx-eval coverage-adjusted leaderboard; scores on the 1-4 scale; source={source}; \
         clip_floor={}; adjusted_flag=* marks systems with incomplete coverage; \
         sigma/converged columns describe the per-dimension mixed-model fits",
        lb.clip_floor
    );
    let mut body: Vec<Vec<String>> = Vec::new();
    for row in &lb.rows {
        let mut record = vec![
            row.system_id.clone(),
            fmt4(row.dims[0]),
            fmt4(row.dims[1]),
            fmt4(row.dims[2]),
            fmt4(row.overall_mean),
            if row.adjusted { "*" } else { "" }.to_string(),
        ];
        for dim in Dimension::ALL {
            let fit = fit_for(dim);
            record.push(fmt6(fit.sigma_u2));
            record.push(fmt6(fit.sigma_e2));
            record.push(
                fit.converged
                    .map_or_else(|| UNAVAILABLE.to_string(), |c| c.to_string()),
            );
        }
        body.push(record);
    }
    csv_document(
        &comment,
        &[
            "system_id",
            "if",
            "rq",
            "ee",
            "overall_mean",
            "adjusted_flag",
            "sigma_u2_if",
            "sigma_e2_if",
            "converged_if",
            "sigma_u2_rq",
            "sigma_e2_rq",
            "converged_rq",
            "sigma_u2_ee",
            "sigma_e2_ee",
            "converged_ee",
        ],
        body,
    )
}

pub fn agreement_csv(rows: &[AgreementRow]) -> String {
    let comment = "vefx-eval inter-annotator agreement; percentages of double-annotated \
                   samples, one decimal"
        .to_string();
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.dimension.to_string(),
                format!("{:.1}", r.exact_pct),
                format!("{:.1}", r.within1_pct),
                r.n_pairs.to_string(),
            ]
        })
        .collect();
    csv_document(
        &comment,
        &["dimension", "exact_pct", "within1_pct", "n_pairs"],
        body,
    )
}

pub fn validation_text(summary: &ValidationSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("samples: {}\n", summary.samples));
    out.push_str(&format!("groups: {}\n", summary.groups));
    out.push_str(&format!("systems: {}\n", summary.systems));
    out.push_str(&format!("annotation rows: {}\n", summary.annotation_rows));
    out.push_str(&format!(
        "double-annotated samples: {}\n",
        summary.double_annotated_samples
    ));
    out.push_str(&format!("prediction rows: {}\n", summary.prediction_rows));
    out.push_str(&format!("items with covariates: {}\n", summary.items));
    for judge in &summary.judges {
        out.push_str(&format!(
            "judge {}: rows={} IF={} RQ={} EE={} scalar_only={}\n",
            judge.judge_id,
            judge.rows,
            judge.if_scored,
            judge.rq_scored,
            judge.ee_scored,
            judge.scalar_only
        ));
    }
    for (group, n) in &summary.per_group {
        out.push_str(&format!("group {group}: {n} samples\n"));
    }
    for (system, n) in &summary.per_system {
        out.push_str(&format!("system {system}: {n} samples\n"));
    }
    out
}
