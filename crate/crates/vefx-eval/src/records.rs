//! On-disk record formats and their loaders.
//!
//! Three newline-delimited JSON files feed the evaluator:
//!
//! - `annotations.jsonl` holds human labels, one object per line:
//!   `{"sample_id","group_id","system_id","rater_id"?,"IF","RQ","EE"}`
//! - `predictions.jsonl` holds judge scores:
//!   `{"sample_id","system_id"?,"judge_id","IF"?,"RQ"?,"EE"?,"overall"?}`
//!   (at least one dimension, or `overall` alone for scalar-only judges)
//! - `items.jsonl` holds per-item covariates:
//!   `{"item_id","task_type","prompt_length","constraint_count"}`, with an
//!   optional first-line `{"_header": {...}}` object declaring the
//!   prompt-length unit and a closed task vocabulary.
//!
//! Numeric score literals are preserved exactly as written (`"2.50"` stays
//! `"2.50"` through a load/write cycle); the binary conversion happens once
//! and is cached. Unknown keys are rejected in strict mode and reported as
//! warnings otherwise.

use serde::Serialize;
use serde_json::{Map, Number, Value};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use crate::types::{LabelTriplet, OrdinalScore, Triplet};

/// Where a record came from, for error provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePos {
    pub file: String,
    pub line: u64,
}

impl SourcePos {
    pub fn new(file: impl Into<String>, line: u64) -> Self {
        SourcePos {
            file: file.into(),
            line,
        }
    }

    /// Position marker for records built in memory.
    pub fn synthetic() -> Self {
        SourcePos {
            file: "<memory>".to_string(),
            line: 0,
        }
    }
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{pos}: invalid JSON: {message}")]
    Json { pos: SourcePos, message: String },
    #[error("{pos}: record must be a JSON object")]
    NotAnObject { pos: SourcePos },
    #[error("{pos}: missing required key '{key}'")]
    MissingKey { pos: SourcePos, key: String },
    #[error("{pos}: key '{key}' must be a {expected}")]
    WrongType {
        pos: SourcePos,
        key: String,
        expected: &'static str,
    },
    #[error("{pos}: unknown key '{key}' (strict mode)")]
    UnknownKey { pos: SourcePos, key: String },
    #[error("score {value} out of range")]
    ScoreOutOfRange { value: f64 },
    #[error("{pos}: record '{sample_id}': {key} = {value} out of range [1, 4]")]
    RecordScoreOutOfRange {
        pos: SourcePos,
        sample_id: String,
        key: String,
        value: f64,
    },
    #[error("{pos}: prediction must carry at least one of IF/RQ/EE, or 'overall' alone")]
    NoScores { pos: SourcePos },
    #[error("{pos}: prediction mixes per-dimension scores with 'overall'")]
    MixedScores { pos: SourcePos },
    #[error("{pos}: task_type '{task_type}' not in the declared vocabulary")]
    UnknownTaskType { pos: SourcePos, task_type: String },
    #[error("{pos}: duplicate annotation for sample '{sample_id}', rater {rater}")]
    DuplicateAnnotation {
        pos: SourcePos,
        sample_id: String,
        rater: String,
    },
    #[error("{pos}: sample '{sample_id}' has group '{group_id}' but was first seen in group '{expected}'")]
    GroupMismatch {
        pos: SourcePos,
        sample_id: String,
        group_id: String,
        expected: String,
    },
    #[error("{pos}: sample '{sample_id}' names system '{system_id}' but the annotation says '{expected}'")]
    SystemMismatch {
        pos: SourcePos,
        sample_id: String,
        system_id: String,
        expected: String,
    },
    #[error("{pos}: prediction references unknown sample '{sample_id}'")]
    OrphanPrediction { pos: SourcePos, sample_id: String },
    #[error("{pos}: duplicate prediction for sample '{sample_id}' from judge '{judge_id}'")]
    DuplicatePrediction {
        pos: SourcePos,
        sample_id: String,
        judge_id: String,
    },
    #[error("{pos}: duplicate covariates for item '{item_id}'")]
    DuplicateItem { pos: SourcePos, item_id: String },
}

impl DataError {
    /// File/line provenance of the offending input record, when known.
    pub fn provenance(&self) -> Option<&SourcePos> {
        match self {
            DataError::Json { pos, .. }
            | DataError::NotAnObject { pos }
            | DataError::MissingKey { pos, .. }
            | DataError::WrongType { pos, .. }
            | DataError::UnknownKey { pos, .. }
            | DataError::RecordScoreOutOfRange { pos, .. }
            | DataError::NoScores { pos }
            | DataError::MixedScores { pos }
            | DataError::UnknownTaskType { pos, .. }
            | DataError::DuplicateAnnotation { pos, .. }
            | DataError::GroupMismatch { pos, .. }
            | DataError::SystemMismatch { pos, .. }
            | DataError::OrphanPrediction { pos, .. }
            | DataError::DuplicatePrediction { pos, .. }
            | DataError::DuplicateItem { pos, .. } => Some(pos),
            DataError::Io { .. } | DataError::ScoreOutOfRange { .. } => None,
        }
    }
}

/// An exact decimal score as loaded: the original JSON literal plus its
/// one-time binary conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScore {
    literal: Number,
    value: f64,
}

impl RawScore {
    pub fn from_f64(value: f64) -> Result<Self, DataError> {
        if !value.is_finite() || !(1.0..=4.0).contains(&value) {
            return Err(DataError::ScoreOutOfRange { value });
        }
        Ok(RawScore {
            literal: Number::from_f64(value).expect("finite"),
            value,
        })
    }

    fn parse(literal: Number, pos: &SourcePos, sample_id: &str, key: &str) -> Result<Self, DataError> {
        let value = literal.as_f64().unwrap_or(f64::NAN);
        if !value.is_finite() || !(1.0..=4.0).contains(&value) {
            return Err(DataError::RecordScoreOutOfRange {
                pos: pos.clone(),
                sample_id: sample_id.to_string(),
                key: key.to_string(),
                value,
            });
        }
        Ok(RawScore { literal, value })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn literal(&self) -> &Number {
        &self.literal
    }
}

/// One human annotation row.
#[derive(Debug, Clone)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub group_id: String,
    pub system_id: String,
    pub rater_id: Option<String>,
    pub labels: LabelTriplet,
    pub pos: SourcePos,
}

/// Scores carried by one prediction row.
#[derive(Debug, Clone)]
pub enum PredictionScores {
    /// Per-dimension soft scores; dimensions a judge does not produce are
    /// absent and stay absent (never imputed).
    PerDimension {
        if_score: Option<RawScore>,
        rq_score: Option<RawScore>,
        ee_score: Option<RawScore>,
    },
    /// A single scalar from a judge with no per-dimension heads.
    Overall(RawScore),
}

impl PredictionScores {
    pub fn is_scalar_only(&self) -> bool {
        matches!(self, PredictionScores::Overall(_))
    }

    /// The judge's score for one dimension, if it produced one.
    pub fn dimension(&self, dim: crate::types::Dimension) -> Option<f64> {
        match self {
            PredictionScores::Overall(_) => None,
            PredictionScores::PerDimension {
                if_score,
                rq_score,
                ee_score,
            } => [if_score, rq_score, ee_score][dim.index()]
                .as_ref()
                .map(|s| s.value()),
        }
    }

    /// Overall prediction: the native scalar for scalar-only judges,
    /// otherwise the mean of the dimensions the judge produced.
    pub fn overall(&self) -> f64 {
        match self {
            PredictionScores::Overall(s) => s.value(),
            PredictionScores::PerDimension {
                if_score,
                rq_score,
                ee_score,
            } => {
                let present: Vec<f64> = [if_score, rq_score, ee_score]
                    .iter()
                    .filter_map(|s| s.as_ref().map(|s| s.value()))
                    .collect();
                present.iter().sum::<f64>() / present.len() as f64
            }
        }
    }

    /// Full soft triplet when all three dimensions are present.
    pub fn full_triplet(&self) -> Option<Triplet<f64>> {
        match self {
            PredictionScores::PerDimension {
                if_score: Some(i),
                rq_score: Some(r),
                ee_score: Some(e),
            } => Some(Triplet::new(i.value(), r.value(), e.value())),
            _ => None,
        }
    }
}

/// One judge prediction row.
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub sample_id: String,
    /// Optional on load; when present it must match the annotation's
    /// system, when absent it is inherited from the annotation at join.
    pub system_id: Option<String>,
    pub judge_id: String,
    pub scores: PredictionScores,
    pub pos: SourcePos,
}

/// Per-benchmark-item covariates driving the propensity model.
#[derive(Debug, Clone)]
pub struct ItemCovariates {
    pub item_id: String,
    pub task_type: String,
    pub prompt_length: u64,
    pub constraint_count: u64,
    pub pos: SourcePos,
}

/// Optional first-line header of `items.jsonl`.
#[derive(Debug, Clone, Default)]
pub struct ItemsHeader {
    pub prompt_length_unit: Option<String>,
    pub task_vocabulary: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default)]
pub struct ItemsFile {
    pub header: ItemsHeader,
    pub items: Vec<ItemCovariates>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Reject unknown keys instead of warning.
    pub strict: bool,
}

/// Records plus any non-fatal warnings produced while loading.
#[derive(Debug)]
pub struct Loaded<T> {
    pub records: T,
    pub warnings: Vec<String>,
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Iterate the non-empty lines of a JSONL stream as JSON objects.
fn each_object(
    reader: impl BufRead,
    file_label: &str,
    mut f: impl FnMut(SourcePos, Map<String, Value>) -> Result<(), DataError>,
) -> Result<(), DataError> {
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: file_label.to_string(),
            source,
        })?;
        let pos = SourcePos::new(file_label, idx as u64 + 1);
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| DataError::Json {
            pos: pos.clone(),
            message: e.to_string(),
        })?;
        match value {
            Value::Object(map) => f(pos, map)?,
            _ => return Err(DataError::NotAnObject { pos }),
        }
    }
    Ok(())
}

/// Field extraction over a parsed JSON object.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    pos: &'a SourcePos,
}

impl<'a> Obj<'a> {
    fn string(&self, key: &str) -> Result<String, DataError> {
        match self.map.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(DataError::WrongType {
                pos: self.pos.clone(),
                key: key.to_string(),
                expected: "string",
            }),
            None => Err(DataError::MissingKey {
                pos: self.pos.clone(),
                key: key.to_string(),
            }),
        }
    }

    fn opt_string(&self, key: &str) -> Result<Option<String>, DataError> {
        match self.map.get(key) {
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(DataError::WrongType {
                pos: self.pos.clone(),
                key: key.to_string(),
                expected: "string",
            }),
            None => Ok(None),
        }
    }

    fn label(&self, key: &str, sample_id: &str) -> Result<OrdinalScore, DataError> {
        let number = match self.map.get(key) {
            Some(Value::Number(n)) => n,
            Some(_) => {
                return Err(DataError::WrongType {
                    pos: self.pos.clone(),
                    key: key.to_string(),
                    expected: "integer",
                })
            }
            None => {
                return Err(DataError::MissingKey {
                    pos: self.pos.clone(),
                    key: key.to_string(),
                })
            }
        };
        let raw = number.as_i64().ok_or_else(|| DataError::WrongType {
            pos: self.pos.clone(),
            key: key.to_string(),
            expected: "integer",
        })?;
        if !(1..=4).contains(&raw) {
            return Err(DataError::RecordScoreOutOfRange {
                pos: self.pos.clone(),
                sample_id: sample_id.to_string(),
                key: key.to_string(),
                value: raw as f64,
            });
        }
        OrdinalScore::new(raw as u8)
    }

    fn opt_score(&self, key: &str, sample_id: &str) -> Result<Option<RawScore>, DataError> {
        match self.map.get(key) {
            Some(Value::Number(n)) => {
                RawScore::parse(n.clone(), self.pos, sample_id, key).map(Some)
            }
            Some(_) => Err(DataError::WrongType {
                pos: self.pos.clone(),
                key: key.to_string(),
                expected: "number",
            }),
            None => Ok(None),
        }
    }

    fn count(&self, key: &str) -> Result<u64, DataError> {
        match self.map.get(key) {
            Some(Value::Number(n)) => n.as_u64().ok_or_else(|| DataError::WrongType {
                pos: self.pos.clone(),
                key: key.to_string(),
                expected: "nonnegative integer",
            }),
            Some(_) => Err(DataError::WrongType {
                pos: self.pos.clone(),
                key: key.to_string(),
                expected: "nonnegative integer",
            }),
            None => Err(DataError::MissingKey {
                pos: self.pos.clone(),
                key: key.to_string(),
            }),
        }
    }

    fn check_keys(
        &self,
        allowed: &[&str],
        opts: LoadOptions,
        warnings: &mut Vec<String>,
    ) -> Result<(), DataError> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                if opts.strict {
                    return Err(DataError::UnknownKey {
                        pos: self.pos.clone(),
                        key: key.clone(),
                    });
                }
                warnings.push(format!("{}: ignoring unknown key '{}'", self.pos, key));
            }
        }
        Ok(())
    }
}

pub fn read_annotations(
    path: &Path,
    opts: LoadOptions,
) -> Result<Loaded<Vec<AnnotationRecord>>, DataError> {
    let reader = open(path)?;
    read_annotations_from(reader, &path.display().to_string(), opts)
}

pub fn read_annotations_from(
    reader: impl BufRead,
    file_label: &str,
    opts: LoadOptions,
) -> Result<Loaded<Vec<AnnotationRecord>>, DataError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    each_object(reader, file_label, |pos, map| {
        let obj = Obj { map: &map, pos: &pos };
        obj.check_keys(
            &["sample_id", "group_id", "system_id", "rater_id", "IF", "RQ", "EE"],
            opts,
            &mut warnings,
        )?;
        let sample_id = obj.string("sample_id")?;
        let labels = Triplet::new(
            obj.label("IF", &sample_id)?,
            obj.label("RQ", &sample_id)?,
            obj.label("EE", &sample_id)?,
        );
        records.push(AnnotationRecord {
            group_id: obj.string("group_id")?,
            system_id: obj.string("system_id")?,
            rater_id: obj.opt_string("rater_id")?,
            labels,
            sample_id,
            pos,
        });
        Ok(())
    })?;
    Ok(Loaded { records, warnings })
}

pub fn read_predictions(
    path: &Path,
    opts: LoadOptions,
) -> Result<Loaded<Vec<PredictionRecord>>, DataError> {
    let reader = open(path)?;
    read_predictions_from(reader, &path.display().to_string(), opts)
}

pub fn read_predictions_from(
    reader: impl BufRead,
    file_label: &str,
    opts: LoadOptions,
) -> Result<Loaded<Vec<PredictionRecord>>, DataError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    each_object(reader, file_label, |pos, map| {
        let obj = Obj { map: &map, pos: &pos };
        obj.check_keys(
            &["sample_id", "system_id", "judge_id", "IF", "RQ", "EE", "overall"],
            opts,
            &mut warnings,
        )?;
        let sample_id = obj.string("sample_id")?;
        let if_score = obj.opt_score("IF", &sample_id)?;
        let rq_score = obj.opt_score("RQ", &sample_id)?;
        let ee_score = obj.opt_score("EE", &sample_id)?;
        let overall = obj.opt_score("overall", &sample_id)?;
        let any_dim = if_score.is_some() || rq_score.is_some() || ee_score.is_some();
        let scores = match (any_dim, overall) {
            (true, None) => PredictionScores::PerDimension {
                if_score,
                rq_score,
                ee_score,
            },
            (false, Some(overall)) => PredictionScores::Overall(overall),
            (true, Some(_)) => return Err(DataError::MixedScores { pos }),
            (false, None) => return Err(DataError::NoScores { pos }),
        };
        records.push(PredictionRecord {
            system_id: obj.opt_string("system_id")?,
            judge_id: obj.string("judge_id")?,
            scores,
            sample_id,
            pos,
        });
        Ok(())
    })?;
    Ok(Loaded { records, warnings })
}

pub fn read_items(path: &Path, opts: LoadOptions) -> Result<Loaded<ItemsFile>, DataError> {
    let reader = open(path)?;
    read_items_from(reader, &path.display().to_string(), opts)
}

pub fn read_items_from(
    reader: impl BufRead,
    file_label: &str,
    opts: LoadOptions,
) -> Result<Loaded<ItemsFile>, DataError> {
    let mut file = ItemsFile::default();
    let mut warnings = Vec::new();
    let mut first = true;
    each_object(reader, file_label, |pos, map| {
        if first {
            first = false;
            if let Some(Value::Object(header)) = map.get("_header") {
                let obj = Obj { map: header, pos: &pos };
                obj.check_keys(&["prompt_length_unit", "task_vocabulary"], opts, &mut warnings)?;
                file.header.prompt_length_unit = obj.opt_string("prompt_length_unit")?;
                file.header.task_vocabulary = match header.get("task_vocabulary") {
                    Some(Value::Array(values)) => {
                        let mut vocab = Vec::new();
                        for v in values {
                            match v {
                                Value::String(s) => vocab.push(s.clone()),
                                _ => {
                                    return Err(DataError::WrongType {
                                        pos: pos.clone(),
                                        key: "task_vocabulary".to_string(),
                                        expected: "array of strings",
                                    })
                                }
                            }
                        }
                        Some(vocab)
                    }
                    Some(_) => {
                        return Err(DataError::WrongType {
                            pos: pos.clone(),
                            key: "task_vocabulary".to_string(),
                            expected: "array of strings",
                        })
                    }
                    None => None,
                };
                return Ok(());
            }
        }
        let obj = Obj { map: &map, pos: &pos };
        obj.check_keys(
            &["item_id", "task_type", "prompt_length", "constraint_count"],
            opts,
            &mut warnings,
        )?;
        let task_type = obj.string("task_type")?;
        if let Some(vocab) = &file.header.task_vocabulary {
            if !vocab.contains(&task_type) {
                return Err(DataError::UnknownTaskType { pos, task_type });
            }
        }
        file.items.push(ItemCovariates {
            item_id: obj.string("item_id")?,
            prompt_length: obj.count("prompt_length")?,
            constraint_count: obj.count("constraint_count")?,
            task_type,
            pos,
        });
        Ok(())
    })?;
    Ok(Loaded {
        records: file,
        warnings,
    })
}

// Canonical wire forms: declared key order, original numeric literals.

#[derive(Serialize)]
struct AnnotationWire<'a> {
    sample_id: &'a str,
    group_id: &'a str,
    system_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    rater_id: Option<&'a str>,
    #[serde(rename = "IF")]
    if_score: u8,
    #[serde(rename = "RQ")]
    rq_score: u8,
    #[serde(rename = "EE")]
    ee_score: u8,
}

#[derive(Serialize)]
struct PredictionWire<'a> {
    sample_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    system_id: Option<&'a str>,
    judge_id: &'a str,
    #[serde(rename = "IF", skip_serializing_if = "Option::is_none")]
    if_score: Option<&'a Number>,
    #[serde(rename = "RQ", skip_serializing_if = "Option::is_none")]
    rq_score: Option<&'a Number>,
    #[serde(rename = "EE", skip_serializing_if = "Option::is_none")]
    ee_score: Option<&'a Number>,
    #[serde(skip_serializing_if = "Option::is_none")]
    overall: Option<&'a Number>,
}

#[derive(Serialize)]
struct ItemWire<'a> {
    item_id: &'a str,
    task_type: &'a str,
    prompt_length: u64,
    constraint_count: u64,
}

fn write_line(w: &mut impl Write, wire: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer(&mut *w, wire)?;
    writeln!(w)
}

/// Write annotations in canonical form (stable key order, one per line).
pub fn write_canonical_annotations(
    records: &[AnnotationRecord],
    w: &mut impl Write,
) -> io::Result<()> {
    for r in records {
        write_line(
            w,
            &AnnotationWire {
                sample_id: &r.sample_id,
                group_id: &r.group_id,
                system_id: &r.system_id,
                rater_id: r.rater_id.as_deref(),
                if_score: r.labels.if_score().value(),
                rq_score: r.labels.rq_score().value(),
                ee_score: r.labels.ee_score().value(),
            },
        )?;
    }
    Ok(())
}

/// Write predictions in canonical form, preserving score literals exactly.
pub fn write_canonical_predictions(
    records: &[PredictionRecord],
    w: &mut impl Write,
) -> io::Result<()> {
    for r in records {
        let (if_score, rq_score, ee_score, overall) = match &r.scores {
            PredictionScores::PerDimension {
                if_score,
                rq_score,
                ee_score,
            } => (
                if_score.as_ref().map(RawScore::literal),
                rq_score.as_ref().map(RawScore::literal),
                ee_score.as_ref().map(RawScore::literal),
                None,
            ),
            PredictionScores::Overall(s) => (None, None, None, Some(s.literal())),
        };
        write_line(
            w,
            &PredictionWire {
                sample_id: &r.sample_id,
                system_id: r.system_id.as_deref(),
                judge_id: &r.judge_id,
                if_score,
                rq_score,
                ee_score,
                overall,
            },
        )?;
    }
    Ok(())
}

/// Write item covariates in canonical form, header line first when present.
pub fn write_canonical_items(file: &ItemsFile, w: &mut impl Write) -> io::Result<()> {
    if file.header.prompt_length_unit.is_some() || file.header.task_vocabulary.is_some() {
        #[derive(Serialize)]
        struct HeaderBody<'a> {
            #[serde(skip_serializing_if = "Option::is_none")]
            prompt_length_unit: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            task_vocabulary: Option<&'a [String]>,
        }
        #[derive(Serialize)]
        struct HeaderWire<'a> {
            _header: HeaderBody<'a>,
        }
        write_line(
            w,
            &HeaderWire {
                _header: HeaderBody {
                    prompt_length_unit: file.header.prompt_length_unit.as_deref(),
                    task_vocabulary: file.header.task_vocabulary.as_deref(),
                },
            },
        )?;
    }
    for item in &file.items {
        write_line(
            w,
            &ItemWire {
                item_id: &item.item_id,
                task_type: &item.task_type,
                prompt_length: item.prompt_length,
                constraint_count: item.constraint_count,
            },
        )?;
    }
    Ok(())
}
