//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Every expected value is either computed by an independent oracle inside
//! this file (brute-force pair enumeration, counting-based mid-ranks,
//! direct formula evaluation, Monte-Carlo generators) or verified by hand
//! before being frozen here. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the per-criterion lines).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

use vefx_eval::adjust::mixed::{fit_mixed_weighted, MixedOptions, MixedRow};
use vefx_eval::adjust::propensity::{fit_propensity, ipw_weight, ipw_weights, ObservationRow};
use vefx_eval::aggregate::{geoagg_sample, normalize_unit, GeoWeights};
use vefx_eval::head::grad_check::grad_check;
use vefx_eval::head::train::{generate_synthetic, hard_accuracy, train, SyntheticConfig, TrainConfig};
use vefx_eval::head::{corn_loss, soft_score, ThresholdLogits};
use vefx_eval::metrics::calibration::{fit_logistic_4p, plcc_rmse_calibrated, CalibrationParams};
use vefx_eval::metrics::rank::{krcc_tau_b, pearson, srcc};
use vefx_eval::metrics::{agreement, MetricError};
use vefx_eval::preference::{pairwise_accuracy, RankingGroup};
use vefx_eval::records::{ItemCovariates, SourcePos};
use vefx_eval::types::{OrdinalScore, Triplet};

fn pass(id: u32, name: &str, started: Instant) {
    println!(
        "acceptance {id:02} {name}: PASS ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------- oracles

/// Mid-ranks by counting comparisons (independent of the sorting route).
fn midranks_by_counting(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&x| {
            let less = values.iter().filter(|&&o| o < x).count() as f64;
            let equal = values.iter().filter(|&&o| o == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson by the direct formula.
fn pearson_direct(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Tau-b by classifying every pair.
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

/// Pairwise accuracy by direct enumeration of the tie rules.
fn pairacc_brute(groups: &[RankingGroup], tie_eps: f64) -> Option<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for g in groups {
        for i in 0..g.members.len() {
            for j in i + 1..g.members.len() {
                let (_, hi, pi) = &g.members[i];
                let (_, hj, pj) = &g.members[j];
                total += if hi == hj {
                    1.0
                } else if (pi - pj).abs() <= tie_eps {
                    0.5
                } else if (pi > pj) == (hi > hj) {
                    1.0
                } else {
                    0.0
                };
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        None
    } else {
        Some(total / pairs as f64)
    }
}

// -------------------------------------------------------------- criteria

#[test]
fn criterion_01_rank_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    for case in 0..1000 {
        let n = rng.gen_range(3..=8);
        let discrete = case % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if discrete {
                rng.gen_range(1..=4) as f64
            } else {
                rng.gen_range(0.0..4.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();

        let srcc_ref = pearson_direct(&midranks_by_counting(&x), &midranks_by_counting(&y));
        match (srcc(&x, &y), srcc_ref) {
            (Ok(got), Some(want)) => {
                assert!((got - want).abs() < 1e-12, "srcc {got} vs {want} on {x:?} {y:?}")
            }
            (Err(MetricError::ConstantInput), None) => {}
            (got, want) => panic!("srcc mismatch: {got:?} vs {want:?} on {x:?} {y:?}"),
        }

        match (krcc_tau_b(&x, &y), tau_b_brute(&x, &y)) {
            (Ok(got), Some(want)) => {
                assert!((got - want).abs() < 1e-12, "krcc {got} vs {want} on {x:?} {y:?}")
            }
            (Err(MetricError::ConstantInput), None) => {}
            (got, want) => panic!("krcc mismatch: {got:?} vs {want:?} on {x:?} {y:?}"),
        }
        checked += 1;
    }
    assert_eq!(checked, 1000);
    assert!(started.elapsed().as_secs_f64() < 5.0, "runtime budget exceeded");
    pass(1, "rank-metric oracle equivalence", started);
}

#[test]
fn criterion_02_calibration_recovery() {
    let started = Instant::now();
    let grid: Vec<f64> = (0..60).map(|i| 1.0 + 3.0 * i as f64 / 59.0).collect();
    for (beta1, beta2) in [(3.0, 1.0), (2.5, -1.3)] {
        let truth = CalibrationParams {
            beta1,
            beta2,
            beta3: 2.0,
            beta4: 2.5,
        };
        let human: Vec<f64> = grid.iter().map(|&x| truth.apply(x)).collect();
        let cal = fit_logistic_4p(&grid, &human).expect("fit");
        let (plcc, rmse) = plcc_rmse_calibrated(&cal, &human).expect("plcc");
        assert!(rmse < 1e-6, "rmse {rmse} for beta2 {beta2}");
        assert!(plcc > 1.0 - 1e-9, "plcc {plcc} for beta2 {beta2}");
    }
    assert!(started.elapsed().as_secs_f64() < 1.0, "runtime budget exceeded");
    pass(2, "calibration recovery", started);
}

#[test]
fn criterion_03_pairacc_rules_and_oracle() {
    let started = Instant::now();

    // the three tie-rule cases
    let member = |id: &str, h: f64, p: f64| (id.to_string(), h, p);
    let single = |members: Vec<(String, f64, f64)>| {
        vec![RankingGroup {
            group_id: "g".into(),
            members,
        }]
    };
    // agreeing order
    let g = single(vec![member("a", 4.0, 0.9), member("b", 3.0, 0.2)]);
    assert_eq!(pairwise_accuracy(&g, 0.0).unwrap(), 1.0);
    // human tie: correct regardless of the prediction
    let g = single(vec![member("a", 3.0, 0.1), member("b", 3.0, 0.95)]);
    assert_eq!(pairwise_accuracy(&g, 0.0).unwrap(), 1.0);
    // prediction tie with untied human: exactly 0.5
    let g = single(vec![member("a", 4.0, 1.5), member("b", 2.0, 1.5)]);
    assert_eq!(pairwise_accuracy(&g, 0.0).unwrap(), 0.5);

    // 200 random multi-group tables against the brute-force enumerator
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..200 {
        let n_groups = rng.gen_range(1..=6);
        let tie_eps = if case % 3 == 0 { 0.1 } else { 0.0 };
        let mut groups = Vec::new();
        for gi in 0..n_groups {
            let size = rng.gen_range(2..=5);
            let members: Vec<(String, f64, f64)> = (0..size)
                .map(|k| {
                    (
                        format!("s{gi}-{k}"),
                        rng.gen_range(1..=4) as f64,
                        // mix of continuous scores and exact repeats so
                        // predicted ties actually occur
                        if rng.gen_bool(0.3) {
                            rng.gen_range(1..=4) as f64
                        } else {
                            rng.gen_range(1.0..4.0)
                        },
                    )
                })
                .collect();
            groups.push(RankingGroup {
                group_id: format!("g{gi}"),
                members,
            });
        }
        let got = pairwise_accuracy(&groups, tie_eps).unwrap();
        let want = pairacc_brute(&groups, tie_eps).unwrap();
        assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");
    }
    pass(3, "pairwise accuracy rules and oracle", started);
}

#[test]
fn criterion_04_geoagg() {
    let started = Instant::now();
    let w = GeoWeights::default();

    assert_eq!(geoagg_sample(&Triplet::new(4.0, 4.0, 4.0), &w).unwrap(), 4.0);
    assert_eq!(geoagg_sample(&Triplet::new(1.0, 3.3, 2.8), &w).unwrap(), 1.0);
    let got = geoagg_sample(&Triplet::new(4.0, 2.0, 2.0), &w).unwrap();
    assert!(
        (got - (1.0 + 3.0f64.sqrt())).abs() < 1e-12,
        "(4,2,2) -> {got}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..10_000 {
        let t = Triplet::new(
            rng.gen_range(1.0..=4.0),
            rng.gen_range(1.0..=4.0),
            rng.gen_range(1.0..=4.0),
        );
        let geo = geoagg_sample(&t, &w).unwrap();
        let am = (w.alpha * normalize_unit(t.if_score()).unwrap()
            + w.beta * normalize_unit(t.rq_score()).unwrap()
            + w.gamma * normalize_unit(t.ee_score()).unwrap())
            / (w.alpha + w.beta + w.gamma);
        assert!(geo <= 1.0 + 3.0 * am + 1e-12, "AM-GM violated at {t:?}");
        assert!((1.0..=4.0 + 1e-12).contains(&geo));
    }

    for step in 0..=6 {
        let s = 1.0 + 0.5 * step as f64;
        let got = geoagg_sample(&Triplet::new(s, s, s), &w).unwrap();
        assert!((got - s).abs() < 1e-12, "fixed point {s}: {got}");
    }
    pass(4, "geometric aggregate", started);
}

#[test]
fn criterion_05_corn_correctness() {
    let started = Instant::now();
    let ln2 = std::f64::consts::LN_2;
    let zeros = [ThresholdLogits { z: [0.0; 3] }; 3];
    let label = |v: u8| OrdinalScore::new(v).unwrap();

    // per-dimension hand values isolated via symmetric triplets:
    // (2,2,2) at zero logits = 3 * (2 ln2 / 3); (1,1,1) = 3 * (ln2 / 3)
    let loss_y2 = corn_loss(&zeros, &Triplet::new(label(2), label(2), label(2))) / 3.0;
    assert!((loss_y2 - 2.0 * ln2 / 3.0).abs() < 1e-12, "y=2: {loss_y2}");
    let loss_y1 = corn_loss(&zeros, &Triplet::new(label(1), label(1), label(1))) / 3.0;
    assert!((loss_y1 - ln2 / 3.0).abs() < 1e-12, "y=1: {loss_y1}");

    // conditional-subset property: threshold 3 is excluded when y = 2
    let labels = Triplet::new(label(2), label(3), label(1));
    let base = [
        ThresholdLogits { z: [0.3, -0.7, 0.2] },
        ThresholdLogits { z: [-1.0, 0.9, 0.4] },
        ThresholdLogits { z: [0.1, 0.2, 0.3] },
    ];
    let mut bumped = base;
    bumped[0].z[2] += 123.0; // y_IF = 2 never reaches threshold 3
    assert_eq!(corn_loss(&base, &labels), corn_loss(&bumped, &labels));

    // gradient check on 20 random draws
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for draw in 0..20 {
        let d = rng.gen_range(4..=10);
        let h = rng.gen_range(4..=12);
        let batch = generate_synthetic(&SyntheticConfig {
            n: 4,
            input_dim: d,
            noise: 0.3,
            seed: 1000 + draw,
        });
        let mut params = vefx_eval::head::OrdinalHeadParams::zeros(d, h);
        for v in params.as_mut_slice() {
            *v = rng.gen_range(-0.8..0.8);
        }
        let err = grad_check(&params, &batch, 1e-5).unwrap();
        assert!(err < 1e-4, "draw {draw}: max relative error {err}");
    }
    assert!(started.elapsed().as_secs_f64() < 10.0, "runtime budget exceeded");
    pass(5, "conditional ordinal loss", started);
}

#[test]
fn criterion_06_soft_inference() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..10_000 {
        let logits = ThresholdLogits {
            z: [
                rng.gen_range(-40.0..40.0),
                rng.gen_range(-40.0..40.0),
                rng.gen_range(-40.0..40.0),
            ],
        };
        let p = logits.cumulative_probs();
        assert!(p[0] >= p[1] && p[1] >= p[2], "monotonicity at {logits:?}");
        let s = soft_score(&logits).value();
        assert!((1.0..=4.0).contains(&s));
    }
    // all conditional probabilities 1/2 -> 1 + 1/2 + 1/4 + 1/8 exactly
    let s = soft_score(&ThresholdLogits { z: [0.0; 3] }).value();
    assert_eq!(s, 1.875);
    pass(6, "soft inference", started);
}

#[test]
fn criterion_07_toy_head_learnability() {
    let started = Instant::now();
    let train_set = generate_synthetic(&SyntheticConfig {
        n: 600,
        input_dim: 16,
        noise: 0.25,
        seed: 17,
    });
    let test_set = generate_synthetic(&SyntheticConfig {
        n: 200,
        input_dim: 16,
        noise: 0.25,
        seed: 18,
    });
    let config = TrainConfig::default();
    let outcome = train(&train_set, &config).expect("train");
    assert!(outcome.final_loss < outcome.initial_loss);
    let acc = hard_accuracy(&outcome.params, &test_set).expect("accuracy");
    for (dim, a) in ["IF", "RQ", "EE"].iter().zip(acc) {
        assert!(a >= 0.90, "test accuracy {dim}: {a}");
    }
    let second = train(&train_set, &config).expect("train again");
    assert_eq!(
        outcome.params.to_json(),
        second.params.to_json(),
        "same seed must serialize bit-identical params"
    );
    assert!(started.elapsed().as_secs_f64() < 60.0, "runtime budget exceeded");
    pass(7, "toy head learnability", started);
}

fn item(id: &str, task: &str, len: u64, cons: u64) -> ItemCovariates {
    ItemCovariates {
        item_id: id.to_string(),
        task_type: task.to_string(),
        prompt_length: len,
        constraint_count: cons,
        pos: SourcePos::synthetic(),
    }
}

#[test]
fn criterion_08_coverage_adjustment() {
    let started = Instant::now();

    // (a) full-coverage degeneracy: adjusted equals naive within 1e-6
    {
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let mut rows = Vec::new();
        let mut naive: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for i in 0..40 {
            let u: f64 = rng.gen_range(-0.4..0.4);
            for (sys, mu) in [("a", 3.1), ("b", 2.2)] {
                let y = mu + u + rng.gen_range(-0.2..0.2);
                rows.push(MixedRow {
                    system_id: sys.into(),
                    item_id: format!("i{i:03}"),
                    y,
                    w: 1.0,
                });
                let e = naive.entry(sys).or_insert((0.0, 0.0));
                e.0 += y;
                e.1 += 1.0;
            }
        }
        let fit = fit_mixed_weighted(&rows, &MixedOptions::default()).expect("fit");
        for (sys, (sum, n)) in naive {
            assert!(
                (fit.mu[sys] - sum / n).abs() < 1e-6,
                "{sys}: {} vs naive {}",
                fit.mu[sys],
                sum / n
            );
        }
    }

    // (b) MAR simulation: 2 systems, 200 items, missingness driven by
    // task_type; adjusted beats naive in >= 95 of 100 replicates
    {
        let mu_true = [3.0, 2.4];
        let mut wins = 0;
        for replicate in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + replicate);
            let mut covariates = BTreeMap::new();
            let mut observations = Vec::new();
            let mut rows = Vec::new();
            let mut naive_sum = 0.0;
            let mut naive_n = 0.0;
            for i in 0..200 {
                let id = format!("i{i:03}");
                let hard = i % 2 == 1;
                covariates.insert(
                    id.clone(),
                    item(&id, if hard { "hard" } else { "easy" }, 8 + (i % 7) as u64, (i % 3) as u64),
                );
                let difficulty = if hard { -0.5 } else { 0.5 } + rng.gen_range(-0.15..0.15);
                for (m, &mu) in mu_true.iter().enumerate() {
                    let y = mu + difficulty + rng.gen_range(-0.2..0.2);
                    let observed = if m == 0 {
                        true
                    } else {
                        let logit: f64 = if hard { -0.6 } else { 2.2 };
                        rng.gen::<f64>() < 1.0 / (1.0 + (-logit).exp())
                    };
                    observations.push(ObservationRow {
                        system_id: format!("sys{m}"),
                        item_id: id.clone(),
                        observed,
                    });
                    if observed {
                        rows.push((format!("sys{m}"), id.clone(), y));
                        if m == 1 {
                            naive_sum += y;
                            naive_n += 1.0;
                        }
                    }
                }
            }
            let model = fit_propensity(&observations, &covariates).expect("propensity");
            let observed_keys: Vec<(String, String)> = rows
                .iter()
                .map(|(s, i, _)| (s.clone(), i.clone()))
                .collect();
            let weights = ipw_weights(&model, &observed_keys, &covariates, 0.05).expect("weights");
            let mixed_rows: Vec<MixedRow> = rows
                .iter()
                .zip(&weights)
                .map(|((s, i, y), &w)| MixedRow {
                    system_id: s.clone(),
                    item_id: i.clone(),
                    y: *y,
                    // the fully covered system keeps weight one
                    w: if s == "sys0" { 1.0 } else { w },
                })
                .collect();
            let fit = fit_mixed_weighted(&mixed_rows, &MixedOptions::default()).expect("fit");
            let adjusted_err = (fit.mu["sys1"] - mu_true[1]).abs();
            let naive_err = (naive_sum / naive_n - mu_true[1]).abs();
            if adjusted_err < naive_err {
                wins += 1;
            }
        }
        assert!(wins >= 95, "adjusted beat naive in only {wins}/100 replicates");
    }

    // (c) shift equivariance and weight-scale invariance to 1e-9
    {
        let mut rng = ChaCha8Rng::seed_from_u64(813);
        let mut rows = Vec::new();
        for i in 0..60 {
            let u: f64 = rng.gen_range(-0.5..0.5);
            for (sys, mu) in [("a", 2.9), ("b", 2.3)] {
                if sys == "b" && i % 4 == 0 {
                    continue; // unbalanced on purpose
                }
                rows.push(MixedRow {
                    system_id: sys.into(),
                    item_id: format!("i{i:03}"),
                    y: mu + u + rng.gen_range(-0.25..0.25),
                    w: 0.5 + rng.gen::<f64>(),
                });
            }
        }
        let base = fit_mixed_weighted(&rows, &MixedOptions::default()).expect("fit");
        let shifted: Vec<MixedRow> = rows
            .iter()
            .map(|r| MixedRow {
                y: r.y + 1.3,
                ..r.clone()
            })
            .collect();
        let shifted_fit = fit_mixed_weighted(&shifted, &MixedOptions::default()).expect("fit");
        for (sys, mu) in &base.mu {
            assert!((shifted_fit.mu[sys] - mu - 1.3).abs() < 1e-9, "shift on {sys}");
        }
        assert!((shifted_fit.sigma_u2 - base.sigma_u2).abs() < 1e-9);
        assert!((shifted_fit.sigma_e2 - base.sigma_e2).abs() < 1e-9);

        let scaled: Vec<MixedRow> = rows
            .iter()
            .map(|r| MixedRow {
                w: r.w * 3.7,
                ..r.clone()
            })
            .collect();
        let scaled_fit = fit_mixed_weighted(&scaled, &MixedOptions::default()).expect("fit");
        for (sys, mu) in &base.mu {
            assert!((scaled_fit.mu[sys] - mu).abs() < 1e-9, "weight scale on {sys}");
        }
        for (item, u) in &base.u_hat {
            assert!((scaled_fit.u_hat[item] - u).abs() < 1e-9);
        }

        // clip monotonicity on the weight rule itself
        for p in [0.01, 0.3, 0.97] {
            assert!(ipw_weight(p, 0.10).unwrap() <= ipw_weight(p, 0.02).unwrap());
        }
    }

    assert!(started.elapsed().as_secs_f64() < 120.0, "runtime budget exceeded");
    pass(8, "coverage adjustment", started);
}

#[test]
fn criterion_09_agreement() {
    let started = Instant::now();
    let score = |v: u8| OrdinalScore::new(v).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..500 {
        let n = rng.gen_range(1..=60);
        let pairs: Vec<(OrdinalScore, OrdinalScore)> = (0..n)
            .map(|_| (score(rng.gen_range(1..=4)), score(rng.gen_range(1..=4))))
            .collect();
        let (exact, within1) = agreement(&pairs).unwrap();
        assert!(within1 >= exact);
    }

    let fixture = [(score(4), score(2)), (score(3), score(3))];
    assert_eq!(agreement(&fixture).unwrap(), (50.0, 50.0));

    // Data-dependent reproduction of the published double-annotation
    // percentages: runs only when the raw pairs are supplied.
    match std::env::var("VEFX_IAA_PAIRS") {
        Ok(path) => {
            let loaded = vefx_eval::records::read_annotations(
                std::path::Path::new(&path),
                vefx_eval::records::LoadOptions::default(),
            )
            .expect("read IAA pairs");
            let table = vefx_eval::table::validate_dataset(loaded.records, vec![], None)
                .expect("join IAA pairs");
            let rows = vefx_eval::metrics::agreement_report(&table).expect("agreement");
            let expect = [(75.2, 93.5), (87.2, 97.2), (72.2, 91.7)];
            for (row, (exact, within1)) in rows.iter().zip(expect) {
                let round1 = |v: f64| (v * 10.0).round() / 10.0;
                assert_eq!(round1(row.exact_pct), exact, "{}", row.dimension);
                assert_eq!(round1(row.within1_pct), within1, "{}", row.dimension);
            }
            println!("acceptance 09 note: published agreement table reproduced from supplied pairs");
        }
        Err(_) => {
            println!(
                "acceptance 09 note: VEFX_IAA_PAIRS not set; published-table check skipped (data-dependent)"
            );
        }
    }
    pass(9, "agreement", started);
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let started = Instant::now();
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let bin = env!("CARGO_BIN_EXE_vefx-eval");

    let run_report = |out: &std::path::Path, threads: &str| {
        let status = std::process::Command::new(bin)
            .env("VEFX_EVAL_THREADS", threads)
            .arg("--out-dir")
            .arg(out)
            .arg("report")
            .arg("--annotations")
            .arg(fixtures.join("annotations.jsonl"))
            .arg("--predictions")
            .arg(fixtures.join("predictions.jsonl"))
            .arg("--items")
            .arg(fixtures.join("items.jsonl"))
            .arg("--features")
            .arg(fixtures.join("features.jsonl"))
            .arg("--seed")
            .arg("0")
            .status()
            .expect("spawn vefx-eval");
        assert!(status.success(), "report run failed");
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_report(dir_a.path(), "1");
    run_report(dir_b.path(), "4");

    let list = |dir: &std::path::Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    let names_a = list(dir_a.path());
    let names_b = list(dir_b.path());
    assert_eq!(names_a, names_b, "output trees differ in file sets");
    assert!(!names_a.is_empty());
    for name in &names_a {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "file {name} differs between runs");
    }
    pass(10, "end-to-end determinism", started);
}

#[test]
fn criterion_01b_rank_metric_runtime() {
    // The oracle-equivalence loop above already fits its budget; this
    // spot-checks raw metric speed on one full-width call so regressions
    // show up even if test ordering changes.
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let x: Vec<f64> = (0..2000).map(|_| rng.gen_range(1.0..4.0)).collect();
    let y: Vec<f64> = (0..2000).map(|_| rng.gen_range(1..=4) as f64).collect();
    let _ = krcc_tau_b(&x, &y).unwrap();
    let _ = srcc(&x, &y).unwrap();
    let _ = pearson(&x, &y).unwrap();
    assert!(started.elapsed().as_secs_f64() < 5.0);
}
