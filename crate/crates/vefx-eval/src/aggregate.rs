//! Leaderboard aggregation: arithmetic mean and the weighted geometric
//! aggregate (GeoAgg).
//!
//! GeoAgg normalizes each dimension to [0, 1], takes a weighted geometric
//! mean, and maps back to the 1-4 scale:
//!
//! ```text
//! geoagg = 1 + 3 * (i^alpha * r^beta * e^gamma)^(1/(alpha+beta+gamma))
//! ```
//!
//! The multiplicative form keeps a weak dimension from being offset by the
//! others; a dimension at its floor pins the sample aggregate to 1.0
//! (0^positive = 0, no epsilon smoothing). The aggregate is computed per
//! sample and then averaged; applying it to per-dimension means is a
//! different, larger quantity whenever samples are unbalanced.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::table::EvalTable;
use crate::types::{Dimension, Triplet};

#[derive(Debug, thiserror::Error)]
pub enum AggregateError {
    #[error("score {value} outside [1, 4]")]
    OutOfRange { value: f64 },
    #[error("weights must be positive, got ({alpha}, {beta}, {gamma})")]
    NonPositiveWeight { alpha: f64, beta: f64, gamma: f64 },
    #[error("empty sample list")]
    EmptyInput,
    #[error("judge '{judge_id}' has no full-triplet predictions")]
    NoUsableSamples { judge_id: String },
    #[error("group '{group_id}' has no item covariates")]
    MissingCovariates { group_id: String },
}

/// Exponents of the geometric aggregate. IF defaults to twice the weight
/// of RQ and EE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for GeoWeights {
    fn default() -> Self {
        GeoWeights {
            alpha: 2.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl GeoWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, AggregateError> {
        if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0)
            || !(alpha.is_finite() && beta.is_finite() && gamma.is_finite())
        {
            return Err(AggregateError::NonPositiveWeight { alpha, beta, gamma });
        }
        Ok(GeoWeights { alpha, beta, gamma })
    }

    fn total(&self) -> f64 {
        self.alpha + self.beta + self.gamma
    }
}

/// Map a score on [1, 4] to [0, 1].
pub fn normalize_unit(score: f64) -> Result<f64, AggregateError> {
    if !score.is_finite() || !(1.0..=4.0).contains(&score) {
        return Err(AggregateError::OutOfRange { value: score });
    }
    Ok((score - 1.0) / 3.0)
}

/// Weighted geometric aggregate of one soft triplet, on [1, 4].
pub fn geoagg_sample(triplet: &Triplet<f64>, w: &GeoWeights) -> Result<f64, AggregateError> {
    let i = normalize_unit(triplet.if_score())?;
    let r = normalize_unit(triplet.rq_score())?;
    let e = normalize_unit(triplet.ee_score())?;
    let product = i.powf(w.alpha) * r.powf(w.beta) * e.powf(w.gamma);
    Ok(1.0 + 3.0 * product.powf(1.0 / w.total()))
}

/// Mean of per-sample geometric aggregates over an evaluated set.
pub fn geoagg_model(samples: &[Triplet<f64>], w: &GeoWeights) -> Result<f64, AggregateError> {
    if samples.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    let mut sum = 0.0;
    for triplet in samples {
        sum += geoagg_sample(triplet, w)?;
    }
    Ok(sum / samples.len() as f64)
}

/// Per-dimension means and their average.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelMeans {
    pub overall: f64,
    pub if_mean: f64,
    pub rq_mean: f64,
    pub ee_mean: f64,
}

pub fn mean_overall_model(samples: &[Triplet<f64>]) -> Result<ModelMeans, AggregateError> {
    if samples.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    let n = samples.len() as f64;
    let mut sums = [0.0; 3];
    for triplet in samples {
        for dim in Dimension::ALL {
            let v = triplet.get(dim);
            if !(1.0..=4.0).contains(&v) {
                return Err(AggregateError::OutOfRange { value: v });
            }
            sums[dim.index()] += v;
        }
    }
    let if_mean = sums[0] / n;
    let rq_mean = sums[1] / n;
    let ee_mean = sums[2] / n;
    Ok(ModelMeans {
        overall: (if_mean + rq_mean + ee_mean) / 3.0,
        if_mean,
        rq_mean,
        ee_mean,
    })
}

/// Whose scores feed an aggregation: the human labels (converted to soft
/// scores) or one judge's soft predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoreSource {
    HumanLabels,
    Judge(String),
}

impl ScoreSource {
    pub fn label(&self) -> &str {
        match self {
            ScoreSource::HumanLabels => "human",
            ScoreSource::Judge(j) => j,
        }
    }
}

fn triplet_for(sample: &crate::table::SampleEntry, source: &ScoreSource) -> Option<Triplet<f64>> {
    match source {
        ScoreSource::HumanLabels => Some(sample.labels().map(|s| s.as_f64())),
        ScoreSource::Judge(judge_id) => sample
            .prediction_for(judge_id)
            .and_then(|p| p.scores.full_triplet()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LeaderboardRow {
    pub system_id: String,
    pub geoagg: f64,
    pub mean: f64,
    pub if_mean: f64,
    pub rq_mean: f64,
    pub ee_mean: f64,
    pub n: usize,
    pub full_coverage: bool,
}

/// Naive (unadjusted) leaderboard over the table's systems. Coverage is
/// judged against the item universe: the covariate file's items when
/// loaded, otherwise every group present in the table.
pub fn leaderboard(
    table: &EvalTable,
    source: &ScoreSource,
    weights: &GeoWeights,
) -> Result<Vec<LeaderboardRow>, AggregateError> {
    let universe: Vec<&String> = if table.items().is_empty() {
        table.groups().keys().collect()
    } else {
        table.items().keys().collect()
    };
    let mut rows = Vec::new();
    for (system_id, members) in table.systems() {
        let mut triplets = Vec::new();
        let mut covered: BTreeMap<&str, bool> = BTreeMap::new();
        for &idx in members {
            let sample = table.sample(idx);
            if let Some(t) = triplet_for(sample, source) {
                triplets.push(t);
                covered.insert(sample.group_id.as_str(), true);
            }
        }
        if triplets.is_empty() {
            continue;
        }
        let geoagg = geoagg_model(&triplets, weights)?;
        let means = mean_overall_model(&triplets)?;
        let full_coverage = universe.iter().all(|g| covered.contains_key(g.as_str()));
        rows.push(LeaderboardRow {
            system_id: system_id.clone(),
            geoagg,
            mean: means.overall,
            if_mean: means.if_mean,
            rq_mean: means.rq_mean,
            ee_mean: means.ee_mean,
            n: triplets.len(),
            full_coverage,
        });
    }
    if rows.is_empty() {
        return Err(AggregateError::NoUsableSamples {
            judge_id: source.label().to_string(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskRow {
    pub system_id: String,
    pub task_type: String,
    pub geoagg: f64,
    pub mean: f64,
    pub n: usize,
}

/// Per-task breakdown keyed by the items' task type: the table behind the
/// radar-style per-task profiles.
pub fn per_task_leaderboard(
    table: &EvalTable,
    source: &ScoreSource,
    weights: &GeoWeights,
) -> Result<Vec<TaskRow>, AggregateError> {
    let mut buckets: BTreeMap<(String, String), Vec<Triplet<f64>>> = BTreeMap::new();
    for sample in table.samples() {
        let Some(t) = triplet_for(sample, source) else {
            continue;
        };
        let item = table.items().get(&sample.group_id).ok_or_else(|| {
            AggregateError::MissingCovariates {
                group_id: sample.group_id.clone(),
            }
        })?;
        buckets
            .entry((sample.system_id.clone(), item.task_type.clone()))
            .or_default()
            .push(t);
    }
    let mut rows = Vec::new();
    for ((system_id, task_type), triplets) in buckets {
        rows.push(TaskRow {
            system_id,
            task_type,
            geoagg: geoagg_model(&triplets, weights)?,
            mean: mean_overall_model(&triplets)?.overall,
            n: triplets.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn w_default() -> GeoWeights {
        GeoWeights::default()
    }

    #[test]
    fn normalize_unit_endpoints() {
        assert_eq!(normalize_unit(1.0).unwrap(), 0.0);
        assert_eq!(normalize_unit(4.0).unwrap(), 1.0);
        assert_eq!(normalize_unit(2.5).unwrap(), 0.5);
        assert!(normalize_unit(4.5).is_err());
    }

    #[test]
    fn geoagg_sample_exact_values() {
        let w = w_default();
        assert_eq!(
            geoagg_sample(&Triplet::new(4.0, 4.0, 4.0), &w).unwrap(),
            4.0
        );
        // a floor dimension annihilates the product
        assert_eq!(
            geoagg_sample(&Triplet::new(1.0, 3.7, 2.2), &w).unwrap(),
            1.0
        );
        // (4,2,2): 1 + 3 * (1 * (1/3) * (1/3))^(1/4) = 1 + 3^(1/2)
        assert_abs_diff_eq!(
            geoagg_sample(&Triplet::new(4.0, 2.0, 2.0), &w).unwrap(),
            1.0 + 3.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn geoagg_model_averages_samples() {
        let w = w_default();
        let samples = vec![Triplet::new(4.0, 4.0, 4.0), Triplet::new(1.0, 4.0, 4.0)];
        assert_eq!(geoagg_model(&samples, &w).unwrap(), 2.5);
        assert!(matches!(
            geoagg_model(&[], &w),
            Err(AggregateError::EmptyInput)
        ));
    }

    #[test]
    fn mean_overall_examples() {
        let single = mean_overall_model(&[Triplet::new(4.0, 2.0, 3.0)]).unwrap();
        assert_eq!(single.overall, 3.0);
        let two =
            mean_overall_model(&[Triplet::new(4.0, 4.0, 4.0), Triplet::new(2.0, 2.0, 2.0)])
                .unwrap();
        assert_eq!(two.overall, 3.0);
        assert_eq!(two.if_mean, 3.0);
    }

    #[test]
    fn per_sample_aggregate_differs_from_aggregate_of_means() {
        // constructed counterexample for unbalanced samples
        let w = w_default();
        let samples = vec![Triplet::new(4.0, 4.0, 4.0), Triplet::new(1.0, 4.0, 4.0)];
        let per_sample = geoagg_model(&samples, &w).unwrap();
        let means = mean_overall_model(&samples).unwrap();
        let of_means = geoagg_sample(
            &Triplet::new(means.if_mean, means.rq_mean, means.ee_mean),
            &w,
        )
        .unwrap();
        assert!((per_sample - of_means).abs() > 0.5);
    }

    #[test]
    fn scaling_all_weights_is_a_no_op() {
        let a = GeoWeights::new(2.0, 1.0, 1.0).unwrap();
        let b = GeoWeights::new(5.0, 2.5, 2.5).unwrap();
        let t = Triplet::new(3.2, 2.1, 3.9);
        assert_abs_diff_eq!(
            geoagg_sample(&t, &a).unwrap(),
            geoagg_sample(&t, &b).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(GeoWeights::new(0.0, 1.0, 1.0).is_err());
        assert!(GeoWeights::new(2.0, -1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn weighted_am_gm_bound(
            i in 1.0f64..=4.0, r in 1.0f64..=4.0, e in 1.0f64..=4.0,
            alpha in 0.5f64..4.0, beta in 0.5f64..4.0, gamma in 0.5f64..4.0
        ) {
            let w = GeoWeights::new(alpha, beta, gamma).unwrap();
            let geo = geoagg_sample(&Triplet::new(i, r, e), &w).unwrap();
            let (ni, nr, ne) = (
                normalize_unit(i).unwrap(),
                normalize_unit(r).unwrap(),
                normalize_unit(e).unwrap(),
            );
            let am = (alpha * ni + beta * nr + gamma * ne) / (alpha + beta + gamma);
            prop_assert!(geo <= 1.0 + 3.0 * am + 1e-12);
            prop_assert!((1.0..=4.0 + 1e-12).contains(&geo));
        }

        #[test]
        fn symmetric_in_rq_ee_when_weights_match(
            i in 1.0f64..=4.0, r in 1.0f64..=4.0, e in 1.0f64..=4.0
        ) {
            let w = GeoWeights::new(2.0, 1.5, 1.5).unwrap();
            let a = geoagg_sample(&Triplet::new(i, r, e), &w).unwrap();
            let b = geoagg_sample(&Triplet::new(i, e, r), &w).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn strictly_increasing_per_dimension(
            base in 1.01f64..=3.9, bump in 0.01f64..=0.09,
            r in 1.01f64..=4.0, e in 1.01f64..=4.0
        ) {
            let w = w_default();
            let lo = geoagg_sample(&Triplet::new(base, r, e), &w).unwrap();
            let hi = geoagg_sample(&Triplet::new(base + bump, r, e), &w).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn equal_scores_are_a_fixed_point(step in 0usize..=6) {
            let s = 1.0 + 0.5 * step as f64;
            let w = w_default();
            let v = geoagg_sample(&Triplet::new(s, s, s), &w).unwrap();
            prop_assert!((v - s).abs() < 1e-12, "geoagg({s},{s},{s}) = {v}");
        }
    }
}
