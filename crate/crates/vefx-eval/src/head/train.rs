//! Training loop for the ordinal head, plus the synthetic fixture
//! generator used for tests and examples.
//!
//! Training is plain stochastic gradient descent with momentum, single
//! threaded, with every draw (initialization and epoch shuffles) taken
//! from one seeded generator, so two runs with the same seed produce
//! bit-identical parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FeatureVector, HeadError, LossNormalization, OrdinalHeadParams};
use crate::types::{Dimension, LabelTriplet, OrdinalScore, Triplet};

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub hidden_dim: usize,
    pub seed: u64,
    pub normalization: LossNormalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.1,
            momentum: 0.9,
            hidden_dim: 64,
            seed: 0,
            normalization: LossNormalization::FixedKMinus1,
        }
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: OrdinalHeadParams,
    /// Mean dataset loss at initialization.
    pub initial_loss: f64,
    /// Mean dataset loss after the last epoch.
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

fn mean_dataset_loss(
    params: &OrdinalHeadParams,
    dataset: &[(FeatureVector, LabelTriplet)],
    norm: LossNormalization,
) -> Result<f64, HeadError> {
    let refs: Vec<(&FeatureVector, &LabelTriplet)> =
        dataset.iter().map(|(x, y)| (x, y)).collect();
    let (loss, _) = params.batch_loss_and_gradient(&refs, norm)?;
    Ok(loss)
}

fn random_init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> OrdinalHeadParams {
    let mut params = OrdinalHeadParams::zeros(input_dim, hidden_dim);
    let w1_scale = 1.0 / (input_dim as f64).sqrt();
    let w2_scale = 1.0 / (hidden_dim as f64).sqrt();
    let w1_len = hidden_dim * input_dim;
    let q_start = w1_len + hidden_dim;
    let q_len = 3 * hidden_dim;
    let w2_start = q_start + q_len;
    let w2_len = super::NUM_THRESHOLDS * hidden_dim;
    let data = params.as_mut_slice();
    for v in &mut data[..w1_len] {
        *v = rng.gen_range(-1.0..1.0) * w1_scale;
    }
    // hidden bias stays zero
    for v in &mut data[q_start..q_start + q_len] {
        *v = rng.gen_range(-1.0..1.0) * 0.1;
    }
    for v in &mut data[w2_start..w2_start + w2_len] {
        *v = rng.gen_range(-1.0..1.0) * w2_scale;
    }
    // output bias stays zero
    params
}

/// Train the head on (feature, label) pairs. All three dimensions are
/// optimized jointly with equal loss weights; a zero-epoch budget returns
/// the initialization untouched.
pub fn train(
    dataset: &[(FeatureVector, LabelTriplet)],
    config: &TrainConfig,
) -> Result<TrainOutcome, HeadError> {
    if dataset.is_empty() {
        return Err(HeadError::EmptyDataset);
    }
    let input_dim = dataset[0].0.values.len();
    for (x, _) in dataset {
        if x.values.len() != input_dim {
            return Err(HeadError::ShapeMismatch {
                sample_id: x.sample_id.clone(),
                expected: input_dim,
                got: x.values.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = random_init(input_dim, config.hidden_dim, &mut rng);
    let initial_loss = mean_dataset_loss(&params, dataset, config.normalization)?;

    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let batch_size = config.batch_size.max(1);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<(&FeatureVector, &LabelTriplet)> =
                chunk.iter().map(|&i| (&dataset[i].0, &dataset[i].1)).collect();
            let (loss, grad) = params.batch_loss_and_gradient(&batch, config.normalization)?;
            if !loss.is_finite() {
                return Err(HeadError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    sample_id: batch[0].0.sample_id.clone(),
                });
            }
            let data = params.as_mut_slice();
            for (k, g) in grad.iter().enumerate() {
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * g;
                data[k] += velocity[k];
            }
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches.max(1) as f64);
    }

    let final_loss = mean_dataset_loss(&params, dataset, config.normalization)?;
    Ok(TrainOutcome {
        params,
        initial_loss,
        final_loss,
        epoch_losses,
    })
}

/// Configuration of the label-planted synthetic set.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub n: usize,
    pub input_dim: usize,
    /// Gaussian noise added on top of the planted signal.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 600,
            input_dim: 16,
            noise: 0.25,
            seed: 17,
        }
    }
}

/// Generate feature vectors whose dimension labels are planted into
/// disjoint coordinate blocks: block d carries (y_d - 2.5) plus noise,
/// remaining coordinates are pure noise.
pub fn generate_synthetic(config: &SyntheticConfig) -> Vec<(FeatureVector, LabelTriplet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise.max(1e-9)).unwrap();
    let block = (config.input_dim / 4).max(1);
    let mut out = Vec::with_capacity(config.n);
    for idx in 0..config.n {
        let labels = Triplet::new(
            OrdinalScore::new(rng.gen_range(1..=4)).unwrap(),
            OrdinalScore::new(rng.gen_range(1..=4)).unwrap(),
            OrdinalScore::new(rng.gen_range(1..=4)).unwrap(),
        );
        let mut values = vec![0.0; config.input_dim];
        for (pos, v) in values.iter_mut().enumerate() {
            let signal = if pos < 3 * block {
                let dim = Dimension::ALL[pos / block];
                labels.get(dim).as_f64() - 2.5
            } else {
                0.0
            };
            *v = signal + noise.sample(&mut rng);
        }
        out.push((
            FeatureVector {
                sample_id: format!("syn-{idx:05}"),
                values,
            },
            labels,
        ));
    }
    out
}

/// Fraction of samples whose hard-decoded score matches the label, per
/// dimension.
pub fn hard_accuracy(
    params: &OrdinalHeadParams,
    dataset: &[(FeatureVector, LabelTriplet)],
) -> Result<[f64; 3], HeadError> {
    if dataset.is_empty() {
        return Err(HeadError::EmptyDataset);
    }
    let mut hits = [0usize; 3];
    for (x, labels) in dataset {
        let logits = params.forward(x)?;
        for dim in Dimension::ALL {
            if super::hard_score(&logits[dim.index()]) == labels.get(dim) {
                hits[dim.index()] += 1;
            }
        }
    }
    Ok(hits.map(|h| h as f64 / dataset.len() as f64))
}
