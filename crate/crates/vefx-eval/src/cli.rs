//! Command-line entry point: ingestion, validation, every metric and
//! aggregation pipeline, and report emission.
//!
//! Subcommands never mutate their inputs, and identical inputs plus flags
//! produce byte-identical outputs. The only randomness in the whole tool
//! is `train-head`'s, and it flows from the `--seed` flag. On failure a
//! machine-readable error record goes to stderr and the exit status is
//! nonzero.

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::adjust::{adjusted_leaderboard, AdjustError, AdjustOptions};
use crate::aggregate::{
    leaderboard, per_task_leaderboard, AggregateError, GeoWeights, ScoreSource,
};
use crate::head::train::{train, TrainConfig};
use crate::head::{read_features, soft_score, HeadError, LossNormalization, OrdinalHeadParams};
use crate::metrics::rank::SrccMode;
use crate::metrics::{agreement_report, metric_report, metric_reports, MetricError, MetricReport};
use crate::preference::pairacc_reports;
use crate::records::{
    read_annotations, read_items, read_predictions, write_canonical_annotations,
    write_canonical_items, write_canonical_predictions, AnnotationRecord, DataError, ItemsFile,
    LoadOptions, PredictionRecord, PredictionScores, RawScore, SourcePos,
};
use crate::report;
use crate::table::{validate_dataset, EvalTable};
use crate::types::Dimension;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
}

impl CliError {
    pub fn error_record(&self) -> ErrorRecord {
        let (kind, pos): (&'static str, Option<&SourcePos>) = match self {
            CliError::Data(e) => ("data", e.provenance()),
            CliError::Metric(_) => ("metric", None),
            CliError::Aggregate(_) => ("aggregate", None),
            CliError::Adjust(_) => ("adjust", None),
            CliError::Head(_) => ("head", None),
            CliError::Write { .. } => ("io", None),
            CliError::Usage(_) => ("usage", None),
        };
        ErrorRecord {
            kind,
            message: self.to_string(),
            file: pos.map(|p| p.file.clone()),
            line: pos.map(|p| p.line),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SrccModeArg {
    /// Pearson correlation of mid-ranks (standard with ties).
    #[default]
    MidRank,
    /// Classical rank-difference formula (exact only without ties).
    RankDiff,
}

impl From<SrccModeArg> for SrccMode {
    fn from(arg: SrccModeArg) -> SrccMode {
        match arg {
            SrccModeArg::MidRank => SrccMode::MidRank,
            SrccModeArg::RankDiff => SrccMode::RankDifference,
        }
    }
}

impl SrccModeArg {
    fn label(self) -> &'static str {
        match self {
            SrccModeArg::MidRank => "mid-rank",
            SrccModeArg::RankDiff => "rank-diff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum LossNormArg {
    /// Divide each dimension's threshold sum by K-1 = 3.
    #[default]
    KMinus1,
    /// Divide by the number of active thresholds (ablation).
    Active,
}

impl From<LossNormArg> for LossNormalization {
    fn from(arg: LossNormArg) -> LossNormalization {
        match arg {
            LossNormArg::KMinus1 => LossNormalization::FixedKMinus1,
            LossNormArg::Active => LossNormalization::ActiveThresholds,
        }
    }
}

fn parse_weights(s: &str) -> Result<GeoWeights, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated positive numbers, e.g. 2,1,1".to_string());
    }
    let parse = |p: &str| p.trim().parse::<f64>().map_err(|e| e.to_string());
    GeoWeights::new(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?)
        .map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "vefx-eval",
    version,
    about = "Quality measurement for instruction-guided video editing: validation, \
             correlation metrics, pairwise preference accuracy, leaderboard aggregation, \
             coverage adjustment, and an ordinal scoring head"
)]
pub struct Cli {
    /// Reject unknown JSON keys instead of warning.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Directory report files are written into.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and join the dataset, printing summary counts.
    Validate {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        items: Option<PathBuf>,
        /// Also write the loaded records back in canonical form.
        #[arg(long)]
        canonical_dir: Option<PathBuf>,
    },
    /// SRCC/KRCC on raw predictions, PLCC/RMSE after 4PL calibration.
    Metrics {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Judges to report (default: every judge in the predictions).
        #[arg(long)]
        judge: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        srcc_mode: SrccModeArg,
    },
    /// Group-wise pairwise preference accuracy.
    Pairacc {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Predicted scores closer than this count as tied.
        #[arg(long, default_value_t = 0.0)]
        tie_eps: f64,
    },
    /// Mean and GeoAgg leaderboards (plus a per-task breakdown with items).
    Aggregate {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        items: Option<PathBuf>,
        /// Score source: "human" or a judge id.
        #[arg(long, default_value = "human")]
        judge: String,
        /// GeoAgg exponents alpha,beta,gamma.
        #[arg(long, value_parser = parse_weights, default_value = "2,1,1")]
        weights: GeoWeights,
    },
    /// Coverage-adjusted per-system estimates (IPW + mixed effects).
    Adjust {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        items: PathBuf,
        /// Score source: "human" or a judge id.
        #[arg(long, default_value = "human")]
        judge: String,
        /// Propensity clipping floor in (0, 1).
        #[arg(long, default_value_t = 0.05)]
        clip_floor: f64,
        /// Mixed-model iteration cap.
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// Relative log-likelihood convergence tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Inter-annotator agreement over double-annotated samples.
    Agreement {
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Train the ordinal head on feature vectors and labels.
    TrainHead {
        #[arg(long)]
        features: PathBuf,
        /// Annotation file supplying the label triplets.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, value_enum, default_value_t)]
        loss_norm: LossNormArg,
        /// Output parameter file (default: <out-dir>/head.params).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score feature vectors with a trained head.
    ScoreHead {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "ordinal-head")]
        judge_id: String,
        /// Output predictions file (default: <out-dir>/predictions.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every pipeline into one output directory.
    Report {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        items: Option<PathBuf>,
        /// Feature vectors; when given, the ordinal head is trained and
        /// applied as part of the report.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        tie_eps: f64,
        #[arg(long, value_parser = parse_weights, default_value = "2,1,1")]
        weights: GeoWeights,
        /// Score source for the leaderboards: "human" or a judge id.
        #[arg(long, default_value = "human")]
        judge: String,
        #[arg(long, default_value_t = 0.05)]
        clip_floor: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Seed for the head-training stage (the only randomness).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        srcc_mode: SrccModeArg,
    },
}

struct LoadedDataset {
    annotations: Vec<AnnotationRecord>,
    predictions: Vec<PredictionRecord>,
    items: Option<ItemsFile>,
}

fn check_readable(path: &Path) -> Result<(), CliError> {
    fs::File::open(path)
        .map(|_| ())
        .map_err(|source| {
            CliError::Data(DataError::Io {
                path: path.display().to_string(),
                source,
            })
        })
}

fn load_dataset(
    annotations: &Path,
    predictions: Option<&Path>,
    items: Option<&Path>,
    opts: LoadOptions,
) -> Result<LoadedDataset, CliError> {
    check_readable(annotations)?;
    if let Some(p) = predictions {
        check_readable(p)?;
    }
    if let Some(p) = items {
        check_readable(p)?;
    }
    let loaded_annotations = read_annotations(annotations, opts)?;
    for w in &loaded_annotations.warnings {
        eprintln!("warning: {w}");
    }
    let loaded_predictions = match predictions {
        Some(path) => {
            let loaded = read_predictions(path, opts)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            loaded.records
        }
        None => Vec::new(),
    };
    let loaded_items = match items {
        Some(path) => {
            let loaded = read_items(path, opts)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            Some(loaded.records)
        }
        None => None,
    };
    Ok(LoadedDataset {
        annotations: loaded_annotations.records,
        predictions: loaded_predictions,
        items: loaded_items,
    })
}

fn build_table(dataset: &LoadedDataset) -> Result<EvalTable, CliError> {
    Ok(validate_dataset(
        dataset.annotations.clone(),
        dataset.predictions.clone(),
        dataset.items.clone(),
    )?)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn score_source(judge: &str, table: &EvalTable) -> Result<ScoreSource, CliError> {
    if judge == "human" {
        return Ok(ScoreSource::HumanLabels);
    }
    if !table.judges().iter().any(|j| j == judge) {
        return Err(CliError::Metric(MetricError::UnknownJudge {
            judge_id: judge.to_string(),
        }));
    }
    Ok(ScoreSource::Judge(judge.to_string()))
}

/// Join feature vectors to the table's primary labels, sorted by sample.
fn feature_dataset(
    features: Vec<crate::head::FeatureVector>,
    table: &EvalTable,
    labels_path: &Path,
) -> Result<Vec<(crate::head::FeatureVector, crate::types::LabelTriplet)>, CliError> {
    let mut dataset = Vec::with_capacity(features.len());
    for fv in features {
        let entry = table
            .samples()
            .binary_search_by(|s| s.sample_id.as_str().cmp(&fv.sample_id))
            .map_err(|_| {
                CliError::Usage(format!(
                    "feature sample '{}' has no labels in {}",
                    fv.sample_id,
                    labels_path.display()
                ))
            })?;
        let labels = *table.sample(entry).labels();
        dataset.push((fv, labels));
    }
    dataset.sort_by(|a, b| a.0.sample_id.cmp(&b.0.sample_id));
    Ok(dataset)
}

fn score_features(
    head: &OrdinalHeadParams,
    features: &[crate::head::FeatureVector],
    judge_id: &str,
) -> Result<Vec<PredictionRecord>, CliError> {
    let mut records = Vec::with_capacity(features.len());
    for fv in features {
        let logits = head.forward(fv)?;
        let score_for = |dim: Dimension| {
            RawScore::from_f64(soft_score(&logits[dim.index()]).value())
                .expect("soft score in range")
        };
        records.push(PredictionRecord {
            sample_id: fv.sample_id.clone(),
            system_id: None,
            judge_id: judge_id.to_string(),
            scores: PredictionScores::PerDimension {
                if_score: Some(score_for(Dimension::If)),
                rq_score: Some(score_for(Dimension::Rq)),
                ee_score: Some(score_for(Dimension::Ee)),
            },
            pos: SourcePos::synthetic(),
        });
    }
    Ok(records)
}

fn write_predictions_file(records: &[PredictionRecord], out_path: &Path) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_canonical_predictions(records, &mut buf).map_err(|source| CliError::Write {
        path: out_path.display().to_string(),
        source,
    })?;
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| CliError::Write {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(out_path, buf).map_err(|source| CliError::Write {
        path: out_path.display().to_string(),
        source,
    })
}

fn selected_metric_reports(
    table: &EvalTable,
    judges: &[String],
    mode: SrccMode,
) -> Result<Vec<MetricReport>, CliError> {
    if judges.is_empty() {
        if table.judges().is_empty() {
            return Err(CliError::Usage(
                "no predictions loaded; nothing to report".to_string(),
            ));
        }
        return Ok(metric_reports(table, mode));
    }
    let mut sorted: Vec<String> = judges.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
        .iter()
        .map(|j| metric_report(table, j, mode).map_err(CliError::from))
        .collect()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let opts = LoadOptions { strict: cli.strict };
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Validate {
            annotations,
            predictions,
            items,
            canonical_dir,
        } => {
            let dataset =
                load_dataset(&annotations, predictions.as_deref(), items.as_deref(), opts)?;
            let table = build_table(&dataset)?;
            print!("{}", report::validation_text(&table.summary()));
            if let Some(dir) = canonical_dir {
                let mut buf = Vec::new();
                write_canonical_annotations(&dataset.annotations, &mut buf).map_err(|source| {
                    CliError::Write {
                        path: "annotations.jsonl".to_string(),
                        source,
                    }
                })?;
                write_file(&dir, "annotations.jsonl", &String::from_utf8(buf).expect("utf8"))?;
                if !dataset.predictions.is_empty() {
                    let mut buf = Vec::new();
                    write_canonical_predictions(&dataset.predictions, &mut buf).map_err(
                        |source| CliError::Write {
                            path: "predictions.jsonl".to_string(),
                            source,
                        },
                    )?;
                    write_file(
                        &dir,
                        "predictions.jsonl",
                        &String::from_utf8(buf).expect("utf8"),
                    )?;
                }
                if let Some(items) = &dataset.items {
                    let mut buf = Vec::new();
                    write_canonical_items(items, &mut buf).map_err(|source| CliError::Write {
                        path: "items.jsonl".to_string(),
                        source,
                    })?;
                    write_file(&dir, "items.jsonl", &String::from_utf8(buf).expect("utf8"))?;
                }
            }
            Ok(())
        }
        Command::Metrics {
            annotations,
            predictions,
            judge,
            srcc_mode,
        } => {
            let dataset = load_dataset(&annotations, Some(&predictions), None, opts)?;
            let table = build_table(&dataset)?;
            let reports = selected_metric_reports(&table, &judge, srcc_mode.into())?;
            let csv = report::metrics_csv(&reports, srcc_mode.label());
            let json = report::json_document(&report::MetricsJson {
                srcc_mode: srcc_mode.label(),
                judges: &reports,
            });
            let csv_path = write_file(&out_dir, "report.csv", &csv)?;
            let json_path = write_file(&out_dir, "report.json", &json)?;
            println!("wrote {}", csv_path.display());
            println!("wrote {}", json_path.display());
            Ok(())
        }
        Command::Pairacc {
            annotations,
            predictions,
            tie_eps,
        } => {
            if !(tie_eps >= 0.0 && tie_eps.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--tie-eps must be a finite nonnegative number, got {tie_eps}"
                )));
            }
            let dataset = load_dataset(&annotations, Some(&predictions), None, opts)?;
            let table = build_table(&dataset)?;
            let reports = pairacc_reports(&table, tie_eps);
            let path = write_file(&out_dir, "pairacc.csv", &report::pairacc_csv(&reports, tie_eps))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Aggregate {
            annotations,
            predictions,
            items,
            judge,
            weights,
        } => {
            let dataset =
                load_dataset(&annotations, predictions.as_deref(), items.as_deref(), opts)?;
            let table = build_table(&dataset)?;
            let source = score_source(&judge, &table)?;
            let rows = leaderboard(&table, &source, &weights)?;
            let path = write_file(
                &out_dir,
                "leaderboard.csv",
                &report::leaderboard_csv(&rows, &weights, source.label()),
            )?;
            println!("wrote {}", path.display());
            if !table.items().is_empty() {
                let tasks = per_task_leaderboard(&table, &source, &weights)?;
                let path = write_file(
                    &out_dir,
                    "leaderboard_by_task.csv",
                    &report::leaderboard_by_task_csv(&tasks, &weights, source.label()),
                )?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Adjust {
            annotations,
            predictions,
            items,
            judge,
            clip_floor,
            max_iter,
            tol,
        } => {
            let dataset =
                load_dataset(&annotations, predictions.as_deref(), Some(&items), opts)?;
            let table = build_table(&dataset)?;
            let source = score_source(&judge, &table)?;
            let adjust_opts = AdjustOptions {
                clip_floor,
                max_iterations: max_iter,
                tolerance: tol,
            };
            let lb = adjusted_leaderboard(&table, &source, &adjust_opts)?;
            let path = write_file(
                &out_dir,
                "adjusted.csv",
                &report::adjusted_csv(&lb, source.label()),
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Agreement { annotations } => {
            let dataset = load_dataset(&annotations, None, None, opts)?;
            let table = build_table(&dataset)?;
            let rows = agreement_report(&table)?;
            let path = write_file(&out_dir, "agreement.csv", &report::agreement_csv(&rows))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::TrainHead {
            features,
            labels,
            epochs,
            seed,
            lr,
            momentum,
            batch_size,
            hidden,
            loss_norm,
            out,
        } => {
            check_readable(&features)?;
            check_readable(&labels)?;
            let feature_rows = read_features(&features, opts)?;
            for w in &feature_rows.warnings {
                eprintln!("warning: {w}");
            }
            let label_rows = read_annotations(&labels, opts)?;
            for w in &label_rows.warnings {
                eprintln!("warning: {w}");
            }
            // primary-rater label semantics come from the joined table
            let label_table = validate_dataset(label_rows.records, Vec::new(), None)?;
            let dataset = feature_dataset(feature_rows.records, &label_table, &labels)?;
            let config = TrainConfig {
                epochs,
                batch_size,
                learning_rate: lr,
                momentum,
                hidden_dim: hidden,
                seed,
                normalization: loss_norm.into(),
            };
            let outcome = train(&dataset, &config)?;
            let out_path = out.unwrap_or_else(|| out_dir.join("head.params"));
            if let Some(parent) = out_path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent).map_err(|source| CliError::Write {
                        path: parent.display().to_string(),
                        source,
                    })?;
                }
            }
            outcome.params.save(&out_path)?;
            println!(
                "trained on {} samples: mean loss {:.6} -> {:.6}",
                dataset.len(),
                outcome.initial_loss,
                outcome.final_loss
            );
            println!("wrote {}", out_path.display());
            Ok(())
        }
        Command::ScoreHead {
            features,
            params,
            judge_id,
            out,
        } => {
            check_readable(&features)?;
            check_readable(&params)?;
            let feature_rows = read_features(&features, opts)?;
            for w in &feature_rows.warnings {
                eprintln!("warning: {w}");
            }
            let head = OrdinalHeadParams::load(&params)?;
            let records = score_features(&head, &feature_rows.records, &judge_id)?;
            let out_path = out.unwrap_or_else(|| out_dir.join("predictions.jsonl"));
            write_predictions_file(&records, &out_path)?;
            println!("scored {} samples", feature_rows.records.len());
            println!("wrote {}", out_path.display());
            Ok(())
        }
        Command::Report {
            annotations,
            predictions,
            items,
            features,
            tie_eps,
            weights,
            judge,
            clip_floor,
            max_iter,
            tol,
            seed,
            srcc_mode,
        } => {
            let dataset =
                load_dataset(&annotations, Some(&predictions), items.as_deref(), opts)?;
            let table = build_table(&dataset)?;
            let mut written = Vec::new();

            written.push(write_file(
                &out_dir,
                "validation.json",
                &report::json_document(&table.summary()),
            )?);

            let reports = selected_metric_reports(&table, &[], srcc_mode.into())?;
            written.push(write_file(
                &out_dir,
                "report.csv",
                &report::metrics_csv(&reports, srcc_mode.label()),
            )?);
            written.push(write_file(
                &out_dir,
                "report.json",
                &report::json_document(&report::MetricsJson {
                    srcc_mode: srcc_mode.label(),
                    judges: &reports,
                }),
            )?);

            let pair = pairacc_reports(&table, tie_eps);
            written.push(write_file(
                &out_dir,
                "pairacc.csv",
                &report::pairacc_csv(&pair, tie_eps),
            )?);

            let source = score_source(&judge, &table)?;
            let rows = leaderboard(&table, &source, &weights)?;
            written.push(write_file(
                &out_dir,
                "leaderboard.csv",
                &report::leaderboard_csv(&rows, &weights, source.label()),
            )?);

            if !table.items().is_empty() {
                let tasks = per_task_leaderboard(&table, &source, &weights)?;
                written.push(write_file(
                    &out_dir,
                    "leaderboard_by_task.csv",
                    &report::leaderboard_by_task_csv(&tasks, &weights, source.label()),
                )?);
                let adjust_opts = AdjustOptions {
                    clip_floor,
                    max_iterations: max_iter,
                    tolerance: tol,
                };
                let lb = adjusted_leaderboard(&table, &source, &adjust_opts)?;
                written.push(write_file(
                    &out_dir,
                    "adjusted.csv",
                    &report::adjusted_csv(&lb, source.label()),
                )?);
            }

            if table.summary().double_annotated_samples > 0 {
                let rows = agreement_report(&table)?;
                written.push(write_file(
                    &out_dir,
                    "agreement.csv",
                    &report::agreement_csv(&rows),
                )?);
            }

            if let Some(features_path) = features {
                check_readable(&features_path)?;
                let feature_rows = read_features(&features_path, opts)?;
                for w in &feature_rows.warnings {
                    eprintln!("warning: {w}");
                }
                let dataset =
                    feature_dataset(feature_rows.records.clone(), &table, &annotations)?;
                let config = TrainConfig {
                    seed,
                    ..TrainConfig::default()
                };
                let outcome = train(&dataset, &config)?;
                let params_path = out_dir.join("head.params");
                outcome.params.save(&params_path)?;
                written.push(params_path);
                let records =
                    score_features(&outcome.params, &feature_rows.records, "ordinal-head")?;
                let predictions_path = out_dir.join("head_predictions.jsonl");
                write_predictions_file(&records, &predictions_path)?;
                written.push(predictions_path);
            }

            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
