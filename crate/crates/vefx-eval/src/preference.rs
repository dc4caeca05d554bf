//! Group-wise pairwise preference accuracy.
//!
//! A ranking group holds all candidate edits that share one raw video and
//! editing instruction; pairs are compared only within their group, never
//! across groups. Tie handling follows two rules: a human tie makes the
//! pair correct regardless of the prediction, and a predicted tie on an
//! untied human pair scores 0.5.
//!
//! Every member pair of a group is enumerated, including candidates from
//! the same system evaluated twice.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::metrics::{MetricError, ReportTarget};
use crate::table::EvalTable;

/// All candidates in one ranking group, with paired human and predicted
/// values on a common comparison scale.
#[derive(Debug, Clone)]
pub struct RankingGroup {
    pub group_id: String,
    /// (sample_id, human value, predicted value)
    pub members: Vec<(String, f64, f64)>,
}

/// Score one candidate pair under the tie rules.
///
/// `tie_eps` widens the predicted-tie test; human ties are exact.
pub fn pair_score(human_i: f64, human_j: f64, pred_i: f64, pred_j: f64, tie_eps: f64) -> f64 {
    if human_i == human_j {
        return 1.0;
    }
    let diff = pred_i - pred_j;
    if diff.abs() <= tie_eps {
        return 0.5;
    }
    if (diff > 0.0) == (human_i > human_j) {
        1.0
    } else {
        0.0
    }
}

/// Pairwise accuracy pooled over groups: total pair score over total pair
/// count. Groups with fewer than two members contribute no pairs.
pub fn pairwise_accuracy(groups: &[RankingGroup], tie_eps: f64) -> Result<f64, MetricError> {
    // Groups are independent; the final ratio is accumulated in group order.
    let per_group: Vec<(f64, usize)> = groups
        .par_iter()
        .map(|group| {
            let members = &group.members;
            let mut sum = 0.0;
            let mut pairs = 0;
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    sum += pair_score(
                        members[i].1,
                        members[j].1,
                        members[i].2,
                        members[j].2,
                        tie_eps,
                    );
                    pairs += 1;
                }
            }
            (sum, pairs)
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for (sum, pairs) in per_group {
        total += sum;
        count += pairs;
    }
    if count == 0 {
        return Err(MetricError::EmptyInput);
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairAccReport {
    pub judge_id: String,
    pub tie_eps: f64,
    /// Accuracy per dimension and overall; absent where the judge produced
    /// no usable pairs (scalar-only judges have no per-dimension entries).
    pub cells: BTreeMap<String, Option<f64>>,
}

/// Build the ranking groups for one judge and target.
///
/// For the overall target, human values are compared as exact label sums
/// (the mean is the sum over three, so ties are decided exactly), and the
/// prediction is the judge's overall score.
fn groups_for(table: &EvalTable, judge_id: &str, target: ReportTarget) -> Vec<RankingGroup> {
    let mut groups = Vec::new();
    for (group_id, members) in table.groups() {
        let mut rows = Vec::new();
        for &idx in members {
            let sample = table.sample(idx);
            let Some(pred) = sample.prediction_for(judge_id) else {
                continue;
            };
            let pair = match target {
                ReportTarget::Dimension(dim) => pred
                    .scores
                    .dimension(dim)
                    .map(|p| (sample.labels().get(dim).as_f64(), p)),
                ReportTarget::Overall => {
                    Some((sample.labels().label_sum() as f64, pred.scores.overall()))
                }
            };
            if let Some((human, pred)) = pair {
                rows.push((sample.sample_id.clone(), human, pred));
            }
        }
        if rows.len() >= 2 {
            groups.push(RankingGroup {
                group_id: group_id.clone(),
                members: rows,
            });
        }
    }
    groups
}

/// Pairwise accuracy for one judge on every dimension and overall.
pub fn per_dimension_pairacc(
    table: &EvalTable,
    judge_id: &str,
    tie_eps: f64,
) -> Result<PairAccReport, MetricError> {
    if !table.judges().iter().any(|j| j == judge_id) {
        return Err(MetricError::UnknownJudge {
            judge_id: judge_id.to_string(),
        });
    }
    let mut cells = BTreeMap::new();
    for target in ReportTarget::ALL {
        let groups = groups_for(table, judge_id, target);
        let value = pairwise_accuracy(&groups, tie_eps).ok();
        cells.insert(target.to_string(), value);
    }
    Ok(PairAccReport {
        judge_id: judge_id.to_string(),
        tie_eps,
        cells,
    })
}

/// Pairwise-accuracy reports for every judge, in sorted judge order.
pub fn pairacc_reports(table: &EvalTable, tie_eps: f64) -> Vec<PairAccReport> {
    table
        .judges()
        .iter()
        .map(|judge| per_dimension_pairacc(table, judge, tie_eps).expect("judge from table"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{
        AnnotationRecord, PredictionRecord, PredictionScores, RawScore, SourcePos,
    };
    use crate::table::validate_dataset;
    use crate::types::{OrdinalScore, Triplet};
    use proptest::prelude::*;

    #[test]
    fn pair_score_rules() {
        // agreeing order
        assert_eq!(pair_score(4.0, 3.0, 0.9, 0.2, 0.0), 1.0);
        // human tie wins regardless of the prediction
        assert_eq!(pair_score(3.0, 3.0, 0.1, 0.9, 0.0), 1.0);
        // predicted tie on an untied human pair
        assert_eq!(pair_score(4.0, 2.0, 1.5, 1.5, 0.0), 0.5);
        // disagreeing order
        assert_eq!(pair_score(4.0, 2.0, 0.2, 0.9, 0.0), 0.0);
    }

    #[test]
    fn two_groups_hand_value() {
        // one perfect group of 3 (3 pairs) + one reversed pair -> 3/4
        let groups = vec![
            RankingGroup {
                group_id: "a".into(),
                members: vec![
                    ("s1".into(), 1.0, 1.1),
                    ("s2".into(), 2.0, 2.2),
                    ("s3".into(), 3.0, 3.3),
                ],
            },
            RankingGroup {
                group_id: "b".into(),
                members: vec![("s4".into(), 1.0, 2.0), ("s5".into(), 2.0, 1.0)],
            },
        ];
        assert_eq!(pairwise_accuracy(&groups, 0.0).unwrap(), 0.75);
    }

    #[test]
    fn no_pairs_is_an_error() {
        let groups = vec![RankingGroup {
            group_id: "a".into(),
            members: vec![("s1".into(), 1.0, 1.0)],
        }];
        assert!(matches!(
            pairwise_accuracy(&groups, 0.0),
            Err(MetricError::EmptyInput)
        ));
    }

    fn fixture_table(preds: &[(&str, f64, f64, f64)]) -> EvalTable {
        // two groups of three samples; labels vary per sample
        let labels = [
            ("s1", "g1", (4, 3, 2)),
            ("s2", "g1", (3, 3, 3)),
            ("s3", "g1", (1, 2, 4)),
            ("s4", "g2", (2, 4, 4)),
            ("s5", "g2", (2, 1, 3)),
            ("s6", "g2", (4, 2, 1)),
        ];
        let anns = labels
            .iter()
            .map(|(sid, gid, l)| AnnotationRecord {
                sample_id: sid.to_string(),
                group_id: gid.to_string(),
                system_id: format!("m-{sid}"),
                rater_id: None,
                labels: Triplet::new(
                    OrdinalScore::new(l.0).unwrap(),
                    OrdinalScore::new(l.1).unwrap(),
                    OrdinalScore::new(l.2).unwrap(),
                ),
                pos: SourcePos::synthetic(),
            })
            .collect();
        let preds = preds
            .iter()
            .map(|(sid, i, r, e)| PredictionRecord {
                sample_id: sid.to_string(),
                system_id: None,
                judge_id: "j".to_string(),
                scores: PredictionScores::PerDimension {
                    if_score: Some(RawScore::from_f64(*i).unwrap()),
                    rq_score: Some(RawScore::from_f64(*r).unwrap()),
                    ee_score: Some(RawScore::from_f64(*e).unwrap()),
                },
                pos: SourcePos::synthetic(),
            })
            .collect();
        validate_dataset(anns, preds, None).unwrap()
    }

    #[test]
    fn judge_equal_to_labels_is_perfect() {
        let table = fixture_table(&[
            ("s1", 4.0, 3.0, 2.0),
            ("s2", 3.0, 3.0, 3.0),
            ("s3", 1.0, 2.0, 4.0),
            ("s4", 2.0, 4.0, 4.0),
            ("s5", 2.0, 1.0, 3.0),
            ("s6", 4.0, 2.0, 1.0),
        ]);
        let report = per_dimension_pairacc(&table, "j", 0.0).unwrap();
        for (cell, value) in &report.cells {
            assert_eq!(*value, Some(1.0), "{cell}");
        }
    }

    #[test]
    fn constant_judge_scores_half_on_untied_pairs() {
        // constant predictor: every untied human pair hits the
        // prediction-tie rule; human-tied pairs score 1.0.
        let table = fixture_table(&[
            ("s1", 2.0, 2.0, 2.0),
            ("s2", 2.0, 2.0, 2.0),
            ("s3", 2.0, 2.0, 2.0),
            ("s4", 2.0, 2.0, 2.0),
            ("s5", 2.0, 2.0, 2.0),
            ("s6", 2.0, 2.0, 2.0),
        ]);
        let report = per_dimension_pairacc(&table, "j", 0.0).unwrap();
        // IF labels: g1 = 4,3,1 (no ties), g2 = 2,2,4 (one tie) -> (3*0.5 + 1 + 2*0.5)/6
        assert_eq!(report.cells["IF"], Some((0.5 * 3.0 + 1.0 + 0.5 * 2.0) / 6.0));
    }

    proptest! {
        #[test]
        fn full_reversal_scores_exactly_the_tied_share(
            rows in proptest::collection::vec((1u8..=4, 1u8..=4), 6..=18)
        ) {
            // a judge that reverses every untied human pair earns credit
            // only on human-tied pairs
            let mut groups = Vec::new();
            let mut tied = 0usize;
            let mut total = 0usize;
            for (gi, chunk) in rows.chunks(3).enumerate() {
                if chunk.len() < 2 {
                    continue;
                }
                let members: Vec<_> = chunk
                    .iter()
                    .enumerate()
                    .map(|(i, (h, _))| (format!("s{gi}-{i}"), *h as f64, -(*h as f64)))
                    .collect();
                for i in 0..members.len() {
                    for j in i + 1..members.len() {
                        total += 1;
                        if members[i].1 == members[j].1 {
                            tied += 1;
                        }
                    }
                }
                groups.push(RankingGroup { group_id: format!("g{gi}"), members });
            }
            let got = pairwise_accuracy(&groups, 0.0).unwrap();
            prop_assert!((got - tied as f64 / total as f64).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transform(
            rows in proptest::collection::vec((1u8..=4, 0.0f64..1.0), 6..=18)
        ) {
            // split into groups of three; apply a strictly increasing map
            let mut base = Vec::new();
            let mut mapped = Vec::new();
            for (gi, chunk) in rows.chunks(3).enumerate() {
                if chunk.len() < 2 {
                    continue;
                }
                let members: Vec<_> = chunk
                    .iter()
                    .enumerate()
                    .map(|(i, (h, p))| (format!("s{gi}-{i}"), *h as f64, *p))
                    .collect();
                let transformed: Vec<_> = members
                    .iter()
                    .map(|(s, h, p)| (s.clone(), *h, p.exp() + 3.0 * p))
                    .collect();
                base.push(RankingGroup { group_id: format!("g{gi}"), members });
                mapped.push(RankingGroup { group_id: format!("g{gi}"), members: transformed });
            }
            let a = pairwise_accuracy(&base, 0.0).unwrap();
            let b = pairwise_accuracy(&mapped, 0.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn group_order_is_irrelevant(
            rows in proptest::collection::vec((1u8..=4, 0.0f64..1.0), 8..=16),
            seed in 0u64..1000
        ) {
            let mut groups = Vec::new();
            for (gi, chunk) in rows.chunks(4).enumerate() {
                if chunk.len() < 2 {
                    continue;
                }
                groups.push(RankingGroup {
                    group_id: format!("g{gi}"),
                    members: chunk
                        .iter()
                        .enumerate()
                        .map(|(i, (h, p))| (format!("s{gi}-{i}"), *h as f64, *p))
                        .collect(),
                });
            }
            let a = pairwise_accuracy(&groups, 0.0).unwrap();
            // rotate group order deterministically from the seed
            let k = (seed as usize) % groups.len().max(1);
            groups.rotate_left(k);
            let b = pairwise_accuracy(&groups, 0.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
