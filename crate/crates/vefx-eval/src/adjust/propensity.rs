//! Observation-propensity estimation for incomplete benchmark coverage.
//!
//! Whether a system has a scored output for an item is modeled as a
//! logistic regression on a system indicator plus encoded item covariates
//! (one-hot task type with the first level dropped, standardized prompt
//! length and constraint count). Scores of observed rows are then
//! reweighted by the clipped inverse of the fitted probability.

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

use super::AdjustError;
use crate::records::ItemCovariates;

/// One (system, item) coverage indicator.
#[derive(Debug, Clone)]
pub struct ObservationRow {
    pub system_id: String,
    pub item_id: String,
    pub observed: bool,
}

/// Fitted logistic coverage model.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    feature_names: Vec<String>,
    coefficients: Vec<f64>,
    systems: Vec<String>,
    task_types: Vec<String>,
    /// (mean, sd) per numeric covariate; constant covariates are dropped.
    prompt_length_stats: Option<(f64, f64)>,
    constraint_stats: Option<(f64, f64)>,
    /// Ridge penalty of the fallback fit, when separation or a singular
    /// design forced one.
    pub ridge_penalty: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

const MAX_NEWTON_ITERATIONS: usize = 100;
const GRADIENT_TOL: f64 = 1e-10;
const SEPARATION_COEF_BOUND: f64 = 15.0;
const FALLBACK_RIDGE: f64 = 1e-3;
const PROB_CLAMP: f64 = 1e-12;

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean and standard deviation, or None when the values are constant.
fn standardize(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (sd > 0.0).then_some((mean, sd))
}

impl PropensityModel {
    fn features(&self, system_id: &str, item: &ItemCovariates) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.feature_names.len());
        x.push(1.0);
        for sys in self.systems.iter().skip(1) {
            x.push(if sys == system_id { 1.0 } else { 0.0 });
        }
        for task in self.task_types.iter().skip(1) {
            x.push(if *task == item.task_type { 1.0 } else { 0.0 });
        }
        if let Some((mean, sd)) = self.prompt_length_stats {
            x.push((item.prompt_length as f64 - mean) / sd);
        }
        if let Some((mean, sd)) = self.constraint_stats {
            x.push((item.constraint_count as f64 - mean) / sd);
        }
        x
    }

    /// Fitted observation probability, strictly inside (0, 1).
    pub fn predict(&self, system_id: &str, item: &ItemCovariates) -> f64 {
        let x = self.features(system_id, item);
        let logit: f64 = x
            .iter()
            .zip(&self.coefficients)
            .map(|(xi, ci)| xi * ci)
            .sum();
        sigmoid(logit).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

struct Design {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

fn newton_fit(design: &Design, ridge: f64) -> Option<(Vec<f64>, usize, bool)> {
    let p = design.rows[0].len();
    let mut theta = DVector::<f64>::zeros(p);
    let mut iterations = 0;
    while iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let mut gradient = DVector::<f64>::zeros(p);
        let mut hessian = DMatrix::<f64>::zeros(p, p);
        for (x, &r) in design.rows.iter().zip(&design.targets) {
            let logit: f64 = x.iter().enumerate().map(|(k, xi)| xi * theta[k]).sum();
            let prob = sigmoid(logit);
            let weight = (prob * (1.0 - prob)).max(1e-12);
            for a in 0..p {
                gradient[a] += x[a] * (r - prob);
                for b in 0..p {
                    hessian[(a, b)] += weight * x[a] * x[b];
                }
            }
        }
        if ridge > 0.0 {
            // intercept left unpenalized
            for k in 1..p {
                gradient[k] -= ridge * theta[k];
                hessian[(k, k)] += ridge;
            }
        }
        let grad_norm = gradient.amax();
        if grad_norm < GRADIENT_TOL {
            return Some((theta.iter().cloned().collect(), iterations, true));
        }
        let step = hessian.clone().cholesky().map(|c| c.solve(&gradient))?;
        theta += step;
        if ridge == 0.0 && theta.amax() > SEPARATION_COEF_BOUND {
            return None; // (quasi-)separation: coefficients are diverging
        }
    }
    Some((theta.iter().cloned().collect(), iterations, false))
}

/// Maximum-likelihood logistic fit of the coverage indicator, fitted
/// jointly across systems. Perfect separation (or a singular design)
/// falls back to a ridge-penalized fit; the penalty is carried on the
/// returned model so reports can declare it.
pub fn fit_propensity(
    observations: &[ObservationRow],
    covariates: &BTreeMap<String, ItemCovariates>,
) -> Result<PropensityModel, AdjustError> {
    if observations.is_empty() {
        return Err(AdjustError::NoObservations);
    }
    for row in observations {
        if !covariates.contains_key(&row.item_id) {
            return Err(AdjustError::MissingCovariates {
                item_id: row.item_id.clone(),
            });
        }
    }

    let mut systems: Vec<String> = observations.iter().map(|r| r.system_id.clone()).collect();
    systems.sort();
    systems.dedup();
    let mut task_types: Vec<String> = observations
        .iter()
        .map(|r| covariates[&r.item_id].task_type.clone())
        .collect();
    task_types.sort();
    task_types.dedup();

    let mut item_ids: Vec<&String> = observations.iter().map(|r| &r.item_id).collect();
    item_ids.sort();
    item_ids.dedup();
    let prompt_length_stats = standardize(
        item_ids
            .iter()
            .map(|id| covariates[*id].prompt_length as f64),
    );
    let constraint_stats = standardize(
        item_ids
            .iter()
            .map(|id| covariates[*id].constraint_count as f64),
    );

    let mut feature_names = vec!["intercept".to_string()];
    feature_names.extend(systems.iter().skip(1).map(|s| format!("system:{s}")));
    feature_names.extend(task_types.iter().skip(1).map(|t| format!("task:{t}")));
    if prompt_length_stats.is_some() {
        feature_names.push("prompt_length(std)".to_string());
    }
    if constraint_stats.is_some() {
        feature_names.push("constraint_count(std)".to_string());
    }

    let mut model = PropensityModel {
        feature_names,
        coefficients: Vec::new(),
        systems,
        task_types,
        prompt_length_stats,
        constraint_stats,
        ridge_penalty: None,
        converged: false,
        iterations: 0,
    };

    let design = Design {
        rows: observations
            .iter()
            .map(|r| model.features(&r.system_id, &covariates[&r.item_id]))
            .collect(),
        targets: observations
            .iter()
            .map(|r| if r.observed { 1.0 } else { 0.0 })
            .collect(),
    };

    match newton_fit(&design, 0.0) {
        Some((coefficients, iterations, converged)) => {
            model.coefficients = coefficients;
            model.iterations = iterations;
            model.converged = converged;
        }
        None => {
            let (coefficients, iterations, converged) = newton_fit(&design, FALLBACK_RIDGE)
                .ok_or(AdjustError::PropensityFitFailed)?;
            model.coefficients = coefficients;
            model.iterations = iterations;
            model.converged = converged;
            model.ridge_penalty = Some(FALLBACK_RIDGE);
        }
    }
    Ok(model)
}

/// Clipped inverse-propensity weight: 1 / max(p, clip_floor).
pub fn ipw_weight(p_hat: f64, clip_floor: f64) -> Result<f64, AdjustError> {
    if !(clip_floor > 0.0 && clip_floor < 1.0) {
        return Err(AdjustError::BadClipFloor { value: clip_floor });
    }
    Ok(1.0 / p_hat.max(clip_floor))
}

/// Weights for a batch of observed (system, item) rows.
pub fn ipw_weights(
    model: &PropensityModel,
    observed: &[(String, String)],
    covariates: &BTreeMap<String, ItemCovariates>,
    clip_floor: f64,
) -> Result<Vec<f64>, AdjustError> {
    observed
        .iter()
        .map(|(system_id, item_id)| {
            let item = covariates
                .get(item_id)
                .ok_or_else(|| AdjustError::MissingCovariates {
                    item_id: item_id.clone(),
                })?;
            ipw_weight(model.predict(system_id, item), clip_floor)
        })
        .collect()
}
