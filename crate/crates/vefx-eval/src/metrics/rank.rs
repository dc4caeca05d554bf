//! Rank correlation coefficients: Spearman (SRCC) and Kendall tau-b (KRCC).
//!
//! Human labels are 4-valued, so ties are pervasive. SRCC therefore
//! defaults to Pearson correlation of mid-ranks, which reduces to the
//! classical rank-difference formula on tie-free data; the rank-difference
//! form stays available behind [`SrccMode::RankDifference`]. KRCC is
//! tau-b, whose tie terms discount pairs tied in either list.

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SrccMode {
    /// Pearson correlation of mid-ranks (standard tie handling).
    #[default]
    MidRank,
    /// 1 - 6*sum(d^2) / (n(n^2-1)) over mid-ranks; exact only without ties.
    RankDifference,
}

fn check_pair(pred: &[f64], human: &[f64], min: usize) -> Result<(), MetricError> {
    if pred.len() != human.len() {
        return Err(MetricError::LengthMismatch {
            left: pred.len(),
            right: human.len(),
        });
    }
    if pred.len() < min {
        return Err(MetricError::TooFewSamples {
            n: pred.len(),
            min,
        });
    }
    if pred.iter().chain(human).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteInput);
    }
    Ok(())
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Mid-ranks (1-based); tied values share the average of their positions.
pub(crate) fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end are 1-based ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson linear correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with the default mid-rank tie handling.
pub fn srcc(pred: &[f64], human: &[f64]) -> Result<f64, MetricError> {
    srcc_with_mode(pred, human, SrccMode::MidRank)
}

pub fn srcc_with_mode(pred: &[f64], human: &[f64], mode: SrccMode) -> Result<f64, MetricError> {
    check_pair(pred, human, 3)?;
    if is_constant(pred) || is_constant(human) {
        return Err(MetricError::ConstantInput);
    }
    let rp = midranks(pred);
    let rh = midranks(human);
    match mode {
        SrccMode::MidRank => pearson(&rp, &rh),
        SrccMode::RankDifference => {
            let n = pred.len() as f64;
            let d2: f64 = rp.iter().zip(&rh).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((1.0 - 6.0 * d2 / (n * (n * n - 1.0))).clamp(-1.0, 1.0))
        }
    }
}

/// Kendall tau-b.
///
/// (Nc - Nd) / sqrt((n0 - T_pred)(n0 - T_human)) with n0 = n(n-1)/2; pairs
/// tied in both lists count toward both tie terms and toward neither Nc
/// nor Nd. Discordant pairs are counted by merge-sort inversion counting,
/// so the whole computation is O(n log n).
pub fn krcc_tau_b(pred: &[f64], human: &[f64]) -> Result<f64, MetricError> {
    check_pair(pred, human, 3)?;
    let n = pred.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pred[a]
            .partial_cmp(&pred[b])
            .expect("finite")
            .then(human[a].partial_cmp(&human[b]).expect("finite"))
    });

    let run_pairs = |len: usize| (len * (len - 1) / 2) as f64;

    // Tie counts over runs in pred order (joint ties are sub-runs).
    let mut tied_pred = 0.0;
    let mut tied_both = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pred[order[end]] == pred[order[start]] {
            end += 1;
        }
        tied_pred += run_pairs(end - start);
        let mut js = start;
        while js < end {
            let mut je = js + 1;
            while je < end && human[order[je]] == human[order[js]] {
                je += 1;
            }
            tied_both += run_pairs(je - js);
            js = je;
        }
        start = end;
    }

    // Stable merge sort of the human values (in pred order), counting the
    // strict inversions; those are exactly the discordant pairs.
    let mut seq: Vec<f64> = order.iter().map(|&i| human[i]).collect();
    let mut buf = vec![0.0; n];
    let mut discordant = 0.0;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                let (mut i, mut j, mut k) = (lo, mid, lo);
                while i < mid || j < hi {
                    if i < mid && (j >= hi || seq[i] <= seq[j]) {
                        buf[k] = seq[i];
                        i += 1;
                    } else {
                        buf[k] = seq[j];
                        discordant += (mid - i) as f64;
                        j += 1;
                    }
                    k += 1;
                }
                seq[lo..hi].copy_from_slice(&buf[lo..hi]);
            }
            lo = hi;
        }
        width *= 2;
    }

    // Tie count over runs of the now-sorted human values.
    let mut tied_human = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && seq[end] == seq[start] {
            end += 1;
        }
        tied_human += run_pairs(end - start);
        start = end;
    }

    let n0 = run_pairs(n);
    let denom = (n0 - tied_pred) * (n0 - tied_human);
    if denom <= 0.0 {
        return Err(MetricError::ConstantInput);
    }
    let concordant_minus_discordant = n0 - tied_pred - tied_human + tied_both - 2.0 * discordant;
    Ok((concordant_minus_discordant / denom.sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn srcc_identical_and_reversed() {
        assert_eq!(srcc(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn srcc_hand_value() {
        // d^2 = 1 + 1 + 0 -> 1 - 6*2/(3*8) = 0.5
        assert_abs_diff_eq!(
            srcc(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn srcc_errors() {
        assert!(matches!(
            srcc(&[1.0, 2.0], &[1.0, 2.0]),
            Err(MetricError::TooFewSamples { .. })
        ));
        assert!(matches!(
            srcc(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::ConstantInput)
        ));
    }

    #[test]
    fn krcc_trivial_cases() {
        assert_eq!(krcc_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(
            krcc_tau_b(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(),
            -1.0
        );
    }

    #[test]
    fn krcc_tie_hand_value() {
        // Nc=4, Nd=0, T_pred=1, T_human=1 over 6 pairs -> 4/sqrt(5*5) = 0.8
        assert_abs_diff_eq!(
            krcc_tau_b(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]).unwrap(),
            0.8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn krcc_fully_tied_is_error() {
        assert!(matches!(
            krcc_tau_b(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::ConstantInput)
        ));
    }

    /// Brute-force tau-b by classifying all pairs.
    fn tau_b_brute(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut nc, mut nd, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 {
                    tx += 1.0;
                }
                if dy == 0.0 {
                    ty += 1.0;
                }
                if dx != 0.0 && dy != 0.0 {
                    if (dx > 0.0) == (dy > 0.0) {
                        nc += 1.0;
                    } else {
                        nd += 1.0;
                    }
                }
            }
        }
        let n0 = (n * (n - 1) / 2) as f64;
        let denom = (n0 - tx) * (n0 - ty);
        if denom <= 0.0 {
            return None;
        }
        Some((nc - nd) / denom.sqrt())
    }

    proptest! {
        #[test]
        fn krcc_matches_brute_force(values in proptest::collection::vec((1u8..=4, 1u8..=4), 3..=8)) {
            let x: Vec<f64> = values.iter().map(|v| v.0 as f64).collect();
            let y: Vec<f64> = values.iter().map(|v| v.1 as f64).collect();
            match (krcc_tau_b(&x, &y), tau_b_brute(&x, &y)) {
                (Ok(fast), Some(brute)) => prop_assert!((fast - brute).abs() < 1e-12),
                (Err(MetricError::ConstantInput), None) => {}
                (fast, brute) => prop_assert!(false, "disagree: {fast:?} vs {brute:?}"),
            }
        }

        #[test]
        fn rank_metrics_invariant_under_increasing_transform(
            values in proptest::collection::vec((0.0f64..4.0, 1u8..=4), 4..=12)
        ) {
            let x: Vec<f64> = values.iter().map(|v| v.0).collect();
            let y: Vec<f64> = values.iter().map(|v| v.1 as f64).collect();
            // strictly increasing transform of the predictions
            let tx: Vec<f64> = x.iter().map(|v| (v * 0.7).exp() + 2.0 * v).collect();
            match (srcc(&x, &y), srcc(&tx, &y)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "srcc disagreement: {other:?}"),
            }
            match (krcc_tau_b(&x, &y), krcc_tau_b(&tx, &y)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "krcc disagreement: {other:?}"),
            }
        }

        #[test]
        fn srcc_modes_agree_without_ties(perm in Just(()).prop_flat_map(|_| {
            proptest::sample::subsequence((0..20u32).collect::<Vec<_>>(), 5..=12)
        })) {
            // distinct integers in both lists => tie-free
            let x: Vec<f64> = perm.iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = perm.iter().map(|&v| ((v * 7 + 3) % 23) as f64).collect();
            let a = srcc_with_mode(&x, &y, SrccMode::MidRank).unwrap();
            let b = srcc_with_mode(&x, &y, SrccMode::RankDifference).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
