//! The joined, indexed score table every evaluation stage reads from.
//!
//! [`EvalTable`] is immutable after [`validate_dataset`] builds it, so any
//! number of evaluation workers may read it concurrently. Samples, groups,
//! systems, and judges are held in sorted order; iteration order is part of
//! the determinism contract.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::records::{
    AnnotationRecord, DataError, ItemCovariates, ItemsFile, ItemsHeader, PredictionRecord,
};
use crate::types::LabelTriplet;

/// One sample with its annotation(s) and any joined predictions.
#[derive(Debug, Clone)]
pub struct SampleEntry {
    pub sample_id: String,
    pub group_id: String,
    pub system_id: String,
    /// Sorted by rater id (absent first); the first entry is the primary
    /// label row, later entries come from re-annotation passes.
    pub annotations: Vec<AnnotationRecord>,
    /// Sorted by judge id.
    pub predictions: Vec<PredictionRecord>,
}

impl SampleEntry {
    /// Primary human labels for this sample.
    pub fn labels(&self) -> &LabelTriplet {
        &self.annotations[0].labels
    }

    pub fn prediction_for(&self, judge_id: &str) -> Option<&PredictionRecord> {
        self.predictions
            .iter()
            .find(|p| p.judge_id == judge_id)
    }
}

#[derive(Debug)]
pub struct EvalTable {
    samples: Vec<SampleEntry>,
    groups: BTreeMap<String, Vec<usize>>,
    systems: BTreeMap<String, Vec<usize>>,
    judges: Vec<String>,
    items: BTreeMap<String, ItemCovariates>,
    items_header: ItemsHeader,
}

impl EvalTable {
    /// All samples, sorted by sample id.
    pub fn samples(&self) -> &[SampleEntry] {
        &self.samples
    }

    /// Group id -> indices into [`Self::samples`].
    pub fn groups(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.groups
    }

    /// System id -> indices into [`Self::samples`].
    pub fn systems(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.systems
    }

    /// Every judge id seen in the predictions, sorted.
    pub fn judges(&self) -> &[String] {
        &self.judges
    }

    /// Item covariates, keyed by item id (= group id).
    pub fn items(&self) -> &BTreeMap<String, ItemCovariates> {
        &self.items
    }

    pub fn items_header(&self) -> &ItemsHeader {
        &self.items_header
    }

    pub fn sample(&self, idx: usize) -> &SampleEntry {
        &self.samples[idx]
    }

    /// Samples annotated by exactly two raters, as (sample, first, second).
    pub fn double_annotated(&self) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(|s| s.annotations.len() == 2)
    }

    pub fn summary(&self) -> ValidationSummary {
        let mut per_group = BTreeMap::new();
        for (gid, members) in &self.groups {
            per_group.insert(gid.clone(), members.len());
        }
        let mut per_system = BTreeMap::new();
        for (sid, members) in &self.systems {
            per_system.insert(sid.clone(), members.len());
        }
        let mut judge_counts: BTreeMap<String, JudgeCounts> = BTreeMap::new();
        let mut prediction_rows = 0;
        let mut annotation_rows = 0;
        for sample in &self.samples {
            annotation_rows += sample.annotations.len();
            for pred in &sample.predictions {
                prediction_rows += 1;
                let counts = judge_counts
                    .entry(pred.judge_id.clone())
                    .or_insert_with(|| JudgeCounts {
                        judge_id: pred.judge_id.clone(),
                        ..JudgeCounts::default()
                    });
                counts.rows += 1;
                for dim in crate::types::Dimension::ALL {
                    if pred.scores.dimension(dim).is_some() {
                        match dim {
                            crate::types::Dimension::If => counts.if_scored += 1,
                            crate::types::Dimension::Rq => counts.rq_scored += 1,
                            crate::types::Dimension::Ee => counts.ee_scored += 1,
                        }
                    }
                }
                if pred.scores.is_scalar_only() {
                    counts.scalar_only += 1;
                }
            }
        }
        ValidationSummary {
            samples: self.samples.len(),
            groups: self.groups.len(),
            systems: self.systems.len(),
            annotation_rows,
            double_annotated_samples: self.double_annotated().count(),
            prediction_rows,
            items: self.items.len(),
            judges: judge_counts.into_values().collect(),
            per_group,
            per_system,
        }
    }
}

/// Counts reported by `validate`: per dimension, per group, per system.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub samples: usize,
    pub groups: usize,
    pub systems: usize,
    pub annotation_rows: usize,
    pub double_annotated_samples: usize,
    pub prediction_rows: usize,
    pub items: usize,
    pub judges: Vec<JudgeCounts>,
    pub per_group: BTreeMap<String, usize>,
    pub per_system: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct JudgeCounts {
    pub judge_id: String,
    pub rows: usize,
    pub if_scored: usize,
    pub rq_scored: usize,
    pub ee_scored: usize,
    pub scalar_only: usize,
}

/// Join annotations, predictions, and covariates into an [`EvalTable`].
///
/// Rejects duplicate `(sample_id, rater_id)` rows, predictions referencing
/// unknown samples, and group or system inconsistencies.
pub fn validate_dataset(
    annotations: Vec<AnnotationRecord>,
    predictions: Vec<PredictionRecord>,
    items: Option<ItemsFile>,
) -> Result<EvalTable, DataError> {
    let mut by_sample: BTreeMap<String, SampleEntry> = BTreeMap::new();

    for ann in annotations {
        match by_sample.get_mut(&ann.sample_id) {
            None => {
                by_sample.insert(
                    ann.sample_id.clone(),
                    SampleEntry {
                        sample_id: ann.sample_id.clone(),
                        group_id: ann.group_id.clone(),
                        system_id: ann.system_id.clone(),
                        annotations: vec![ann],
                        predictions: Vec::new(),
                    },
                );
            }
            Some(entry) => {
                if ann.group_id != entry.group_id {
                    return Err(DataError::GroupMismatch {
                        pos: ann.pos,
                        sample_id: ann.sample_id,
                        group_id: ann.group_id,
                        expected: entry.group_id.clone(),
                    });
                }
                if ann.system_id != entry.system_id {
                    return Err(DataError::SystemMismatch {
                        pos: ann.pos,
                        sample_id: ann.sample_id,
                        system_id: ann.system_id,
                        expected: entry.system_id.clone(),
                    });
                }
                if entry
                    .annotations
                    .iter()
                    .any(|a| a.rater_id == ann.rater_id)
                {
                    return Err(DataError::DuplicateAnnotation {
                        pos: ann.pos,
                        rater: ann
                            .rater_id
                            .as_deref()
                            .map_or_else(|| "(none)".to_string(), |r| format!("'{r}'")),
                        sample_id: ann.sample_id,
                    });
                }
                entry.annotations.push(ann);
            }
        }
    }

    for pred in predictions {
        let entry = by_sample
            .get_mut(&pred.sample_id)
            .ok_or_else(|| DataError::OrphanPrediction {
                pos: pred.pos.clone(),
                sample_id: pred.sample_id.clone(),
            })?;
        if let Some(system_id) = &pred.system_id {
            if *system_id != entry.system_id {
                return Err(DataError::SystemMismatch {
                    pos: pred.pos,
                    sample_id: pred.sample_id,
                    system_id: system_id.clone(),
                    expected: entry.system_id.clone(),
                });
            }
        }
        if entry.predictions.iter().any(|p| p.judge_id == pred.judge_id) {
            return Err(DataError::DuplicatePrediction {
                pos: pred.pos,
                judge_id: pred.judge_id,
                sample_id: pred.sample_id,
            });
        }
        entry.predictions.push(pred);
    }

    let mut samples: Vec<SampleEntry> = by_sample.into_values().collect();
    for entry in &mut samples {
        entry.annotations.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
        entry.predictions.sort_by(|a, b| a.judge_id.cmp(&b.judge_id));
    }

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut systems: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut judges: Vec<String> = Vec::new();
    for (idx, entry) in samples.iter().enumerate() {
        groups.entry(entry.group_id.clone()).or_default().push(idx);
        systems.entry(entry.system_id.clone()).or_default().push(idx);
        for pred in &entry.predictions {
            if !judges.contains(&pred.judge_id) {
                judges.push(pred.judge_id.clone());
            }
        }
    }
    judges.sort();

    let (items_map, items_header) = match items {
        Some(file) => {
            let mut map = BTreeMap::new();
            for item in file.items {
                let pos = item.pos.clone();
                let item_id = item.item_id.clone();
                if map.insert(item_id.clone(), item).is_some() {
                    return Err(DataError::DuplicateItem { pos, item_id });
                }
            }
            (map, file.header)
        }
        None => (BTreeMap::new(), ItemsHeader::default()),
    };

    Ok(EvalTable {
        samples,
        groups,
        systems,
        judges,
        items: items_map,
        items_header,
    })
}
