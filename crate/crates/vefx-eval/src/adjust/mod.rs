//! Coverage-adjusted model-level estimates under incomplete benchmark
//! coverage.
//!
//! Some systems cannot produce an output for every benchmark item, and a
//! naive mean over the observed subset is biased when coverage correlates
//! with item difficulty. Incomplete coverage is treated as a missing-data
//! problem: a logistic propensity model explains which (system, item)
//! cells are observed from item covariates, observed scores get clipped
//! inverse-propensity weights, and a weighted mixed-effects model with a
//! random item effect produces the per-system estimates.
//!
//! Fully covered systems bypass the propensity model with weight exactly
//! one; their estimates coincide with their naive means at the joint
//! optimum, which [`adjusted_leaderboard`] verifies and reports.

pub mod mixed;
pub mod propensity;

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

use crate::aggregate::ScoreSource;
use crate::table::EvalTable;
use crate::types::Dimension;
use mixed::{fit_mixed_weighted, MixedOptions, MixedRow};
use propensity::{fit_propensity, ipw_weight, ObservationRow};

#[derive(Debug, thiserror::Error)]
pub enum AdjustError {
    #[error("item '{item_id}' has no covariates")]
    MissingCovariates { item_id: String },
    #[error("no observations")]
    NoObservations,
    #[error("propensity fit failed even with ridge fallback")]
    PropensityFitFailed,
    #[error("clip floor must be in (0, 1), got {value}")]
    BadClipFloor { value: f64 },
    #[error("need at least two systems, got {got}")]
    NeedTwoSystems { got: usize },
    #[error("need at least two items, got {got}")]
    NeedTwoItems { got: usize },
    #[error("system '{system_id}' shares no item with the others; contrasts are unidentifiable")]
    SingularDesign { system_id: String },
    #[error("non-finite response or nonpositive weight for ({system_id}, {item_id})")]
    BadResponse { system_id: String, item_id: String },
    #[error("GLS solve failed")]
    GlsSolveFailed,
    #[error("judge '{judge_id}' is scalar-only; per-dimension adjustment needs dimension scores")]
    ScalarOnlyJudge { judge_id: String },
    #[error("no item covariates loaded; adjustment requires items.jsonl")]
    NoItemCovariates,
}

#[derive(Debug, Clone, Copy)]
pub struct AdjustOptions {
    pub clip_floor: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        AdjustOptions {
            clip_floor: 0.05,
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

/// Per-system adjusted estimates.
#[derive(Debug, Clone, Serialize)]
pub struct AdjustedRow {
    pub system_id: String,
    /// Adjusted IF/RQ/EE; absent where the dimension had no usable data.
    pub dims: [Option<f64>; 3],
    pub overall_mean: Option<f64>,
    /// True for systems with incomplete coverage (the asterisk flag).
    pub adjusted: bool,
}

/// Variance components and solver state of one per-dimension fit.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionFit {
    pub dimension: Dimension,
    pub n_rows: usize,
    pub sigma_u2: Option<f64>,
    pub sigma_e2: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    /// Largest |adjusted - naive| over fully covered systems; a
    /// consistency check on the full-coverage identity.
    pub full_coverage_deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct PropensitySummary {
    pub fitted: bool,
    pub ridge_penalty: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_rows: usize,
    pub n_missing: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjustedLeaderboard {
    pub rows: Vec<AdjustedRow>,
    pub fits: Vec<DimensionFit>,
    pub propensity: PropensitySummary,
    pub clip_floor: f64,
}

/// Per-(system, item) mean scores for one dimension from the chosen source.
fn cell_scores(
    table: &EvalTable,
    source: &ScoreSource,
    dim: Dimension,
) -> BTreeMap<(String, String), f64> {
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for sample in table.samples() {
        let value = match source {
            ScoreSource::HumanLabels => Some(sample.labels().get(dim).as_f64()),
            ScoreSource::Judge(judge_id) => sample
                .prediction_for(judge_id)
                .and_then(|p| p.scores.dimension(dim)),
        };
        if let Some(v) = value {
            let key = (sample.system_id.clone(), sample.group_id.clone());
            let entry = sums.entry(key).or_insert((0.0, 0));
            entry.0 += v;
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

/// Which (system, item) cells carry any scored output at all.
fn coverage(table: &EvalTable, source: &ScoreSource) -> BTreeSet<(String, String)> {
    let mut observed = BTreeSet::new();
    for sample in table.samples() {
        let has_output = match source {
            ScoreSource::HumanLabels => true,
            ScoreSource::Judge(judge_id) => sample.prediction_for(judge_id).is_some(),
        };
        if has_output {
            observed.insert((sample.system_id.clone(), sample.group_id.clone()));
        }
    }
    observed
}

/// Coverage-adjusted per-system estimates for every dimension, plus the
/// overall mean of the adjusted dimensions.
pub fn adjusted_leaderboard(
    table: &EvalTable,
    source: &ScoreSource,
    opts: &AdjustOptions,
) -> Result<AdjustedLeaderboard, AdjustError> {
    if !(opts.clip_floor > 0.0 && opts.clip_floor < 1.0) {
        return Err(AdjustError::BadClipFloor {
            value: opts.clip_floor,
        });
    }
    if table.items().is_empty() {
        return Err(AdjustError::NoItemCovariates);
    }
    for group_id in table.groups().keys() {
        if !table.items().contains_key(group_id) {
            return Err(AdjustError::MissingCovariates {
                item_id: group_id.clone(),
            });
        }
    }
    if let ScoreSource::Judge(judge_id) = source {
        let any_dim = table.samples().iter().any(|s| {
            s.prediction_for(judge_id)
                .map(|p| !p.scores.is_scalar_only())
                .unwrap_or(false)
        });
        if !any_dim {
            return Err(AdjustError::ScalarOnlyJudge {
                judge_id: judge_id.clone(),
            });
        }
    }

    let items: Vec<String> = table.items().keys().cloned().collect();
    let systems: Vec<String> = table.systems().keys().cloned().collect();
    let observed = coverage(table, source);

    let mut fully_covered: BTreeMap<String, bool> = BTreeMap::new();
    for system in &systems {
        let full = items
            .iter()
            .all(|item| observed.contains(&(system.clone(), item.clone())));
        fully_covered.insert(system.clone(), full);
    }
    let n_cells = systems.len() * items.len();
    let n_missing = n_cells - observed.len();

    // Propensity model over every (system, item) cell; skipped entirely
    // under full coverage, where all weights are one by the shortcut.
    let mut propensity_summary = PropensitySummary {
        n_rows: n_cells,
        n_missing,
        ..PropensitySummary::default()
    };
    let model = if n_missing > 0 {
        let mut rows = Vec::with_capacity(n_cells);
        for system in &systems {
            for item in &items {
                rows.push(ObservationRow {
                    system_id: system.clone(),
                    item_id: item.clone(),
                    observed: observed.contains(&(system.clone(), item.clone())),
                });
            }
        }
        let model = fit_propensity(&rows, table.items())?;
        propensity_summary.fitted = true;
        propensity_summary.ridge_penalty = model.ridge_penalty;
        propensity_summary.converged = model.converged;
        propensity_summary.iterations = model.iterations;
        Some(model)
    } else {
        None
    };

    let weight_for = |system: &str, item: &str| -> Result<f64, AdjustError> {
        if fully_covered[system] {
            return Ok(1.0);
        }
        match &model {
            Some(model) => {
                let covariates = &table.items()[item];
                ipw_weight(model.predict(system, covariates), opts.clip_floor)
            }
            None => Ok(1.0),
        }
    };

    let mixed_opts = MixedOptions {
        max_iterations: opts.max_iterations,
        tolerance: opts.tolerance,
    };

    let mut per_system: BTreeMap<String, [Option<f64>; 3]> = systems
        .iter()
        .map(|s| (s.clone(), [None, None, None]))
        .collect();
    let mut fits = Vec::with_capacity(3);

    for dim in Dimension::ALL {
        let scores = cell_scores(table, source, dim);
        let mut rows = Vec::with_capacity(scores.len());
        let mut naive: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for ((system, item), y) in &scores {
            let w = weight_for(system, item)?;
            rows.push(MixedRow {
                system_id: system.clone(),
                item_id: item.clone(),
                y: *y,
                w,
            });
            let entry = naive.entry(system.as_str()).or_insert((0.0, 0.0));
            entry.0 += w * y;
            entry.1 += w;
        }

        if systems.len() == 1 {
            // single-system table: the mixed model is out of reach, the
            // naive mean is the estimate by construction
            let system = &systems[0];
            if let Some((num, den)) = naive.get(system.as_str()) {
                per_system.get_mut(system).unwrap()[dim.index()] = Some(num / den);
                fits.push(DimensionFit {
                    dimension: dim,
                    n_rows: rows.len(),
                    sigma_u2: None,
                    sigma_e2: None,
                    converged: None,
                    iterations: None,
                    full_coverage_deviation: Some(0.0),
                    error: None,
                });
            } else {
                fits.push(DimensionFit {
                    dimension: dim,
                    n_rows: 0,
                    sigma_u2: None,
                    sigma_e2: None,
                    converged: None,
                    iterations: None,
                    full_coverage_deviation: None,
                    error: Some("no data".to_string()),
                });
            }
            continue;
        }

        match fit_mixed_weighted(&rows, &mixed_opts) {
            Ok(fit) => {
                let mut deviation = 0.0f64;
                for (system, mu) in &fit.mu {
                    per_system.get_mut(system).unwrap()[dim.index()] = Some(*mu);
                    if fully_covered[system] {
                        let (num, den) = naive[system.as_str()];
                        deviation = deviation.max((mu - num / den).abs());
                    }
                }
                fits.push(DimensionFit {
                    dimension: dim,
                    n_rows: rows.len(),
                    sigma_u2: Some(fit.sigma_u2),
                    sigma_e2: Some(fit.sigma_e2),
                    converged: Some(fit.converged),
                    iterations: Some(fit.iterations),
                    full_coverage_deviation: Some(deviation),
                    error: None,
                });
            }
            Err(e) => {
                fits.push(DimensionFit {
                    dimension: dim,
                    n_rows: rows.len(),
                    sigma_u2: None,
                    sigma_e2: None,
                    converged: None,
                    iterations: None,
                    full_coverage_deviation: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let rows = systems
        .iter()
        .map(|system| {
            let dims = per_system[system];
            let overall_mean = match dims {
                [Some(a), Some(b), Some(c)] => Some((a + b + c) / 3.0),
                _ => None,
            };
            AdjustedRow {
                system_id: system.clone(),
                dims,
                overall_mean,
                adjusted: !fully_covered[system],
            }
        })
        .collect();

    Ok(AdjustedLeaderboard {
        rows,
        fits,
        propensity: propensity_summary,
        clip_floor: opts.clip_floor,
    })
}
