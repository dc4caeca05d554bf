//! Weighted linear mixed-effects estimation with a random item intercept:
//!
//! ```text
//! y[m,i] = mu[m] + u[i] + eps,   u[i] ~ N(0, sigma_u^2),
//!                                eps  ~ N(0, sigma_e^2 / w[m,i])
//! ```
//!
//! Weights enter the residual variance as heteroscedastic scaling, the
//! standard weighted-likelihood reading of inverse-propensity weights in a
//! linear model. Estimation alternates a generalized-least-squares solve
//! for `mu` given the variance components with variance-component updates
//! from weighted residual sums of squares (degrees-of-freedom corrected,
//! projected at zero), until the relative log-likelihood change falls
//! under the tolerance; the item effects are then decoded by the
//! closed-form empirical-Bayes update at the final components, so the
//! reported `(mu, u)` jointly satisfy the mixed-model equations.
//!
//! Because items are independent given `u`, the marginal covariance is
//! block-diagonal per item and each block inverts in closed form, so the
//! GLS solve only ever factors a (systems x systems) matrix.

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

use super::AdjustError;

/// One observed response.
#[derive(Debug, Clone)]
pub struct MixedRow {
    pub system_id: String,
    pub item_id: String,
    pub y: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MixedOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for MixedOptions {
    fn default() -> Self {
        MixedOptions {
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixedModelFit {
    /// Fixed effects: the coverage-adjusted per-system estimates.
    pub mu: BTreeMap<String, f64>,
    /// Item-effect variance (>= 0).
    pub sigma_u2: f64,
    /// Residual variance (> 0).
    pub sigma_e2: f64,
    /// Predicted item effects; they sum to zero at the joint optimum.
    pub u_hat: BTreeMap<String, f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl MixedModelFit {
    /// Mean of the predicted item effects; near zero at convergence.
    pub fn u_mean(&self) -> f64 {
        if self.u_hat.is_empty() {
            return 0.0;
        }
        self.u_hat.values().sum::<f64>() / self.u_hat.len() as f64
    }
}

struct Indexed {
    systems: Vec<String>,
    items: Vec<String>,
    /// per item: (system index, y, w)
    item_rows: Vec<Vec<(usize, f64, f64)>>,
    n_rows: usize,
}

fn index_rows(rows: &[MixedRow]) -> Result<Indexed, AdjustError> {
    if rows.is_empty() {
        return Err(AdjustError::NoObservations);
    }
    for row in rows {
        if !row.y.is_finite() || !row.w.is_finite() || row.w <= 0.0 {
            return Err(AdjustError::BadResponse {
                system_id: row.system_id.clone(),
                item_id: row.item_id.clone(),
            });
        }
    }
    let mut systems: Vec<String> = rows.iter().map(|r| r.system_id.clone()).collect();
    systems.sort();
    systems.dedup();
    let mut items: Vec<String> = rows.iter().map(|r| r.item_id.clone()).collect();
    items.sort();
    items.dedup();
    if systems.len() < 2 {
        return Err(AdjustError::NeedTwoSystems { got: systems.len() });
    }
    if items.len() < 2 {
        return Err(AdjustError::NeedTwoItems { got: items.len() });
    }
    let sys_index: BTreeMap<&str, usize> = systems
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let item_index: BTreeMap<&str, usize> = items
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let mut item_rows = vec![Vec::new(); items.len()];
    for row in rows {
        item_rows[item_index[row.item_id.as_str()]].push((
            sys_index[row.system_id.as_str()],
            row.y,
            row.w,
        ));
    }

    // Connectivity: fixed-effect contrasts are identified only if the
    // system-item incidence graph is connected.
    let mut component: Vec<usize> = (0..systems.len()).collect();
    fn find(component: &mut [usize], k: usize) -> usize {
        let mut root = k;
        while component[root] != root {
            root = component[root];
        }
        let mut cur = k;
        while component[cur] != root {
            let next = component[cur];
            component[cur] = root;
            cur = next;
        }
        root
    }
    for members in &item_rows {
        for pair in members.windows(2) {
            let a = find(&mut component, pair[0].0);
            let b = find(&mut component, pair[1].0);
            component[a] = b;
        }
    }
    let root0 = find(&mut component, 0);
    for (k, system) in systems.iter().enumerate().skip(1) {
        if find(&mut component, k) != root0 {
            return Err(AdjustError::SingularDesign {
                system_id: system.clone(),
            });
        }
    }

    Ok(Indexed {
        item_rows,
        n_rows: rows.len(),
        systems,
        items,
    })
}

/// GLS solve for mu given the variance components, using the per-item
/// Woodbury inverse of sigma_e2 * W^-1 + sigma_u2 * 11'.
fn solve_mu(
    idx: &Indexed,
    sigma_u2: f64,
    sigma_e2: f64,
) -> Result<Vec<f64>, AdjustError> {
    let m = idx.systems.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for members in &idx.item_rows {
        let s_i: f64 = members.iter().map(|&(_, _, w)| w / sigma_e2).sum();
        let shrink = sigma_u2 / (1.0 + sigma_u2 * s_i);
        let wy: f64 = members.iter().map(|&(_, y, w)| (w / sigma_e2) * y).sum();
        for &(sys_a, y_a, w_a) in members {
            let d_a = w_a / sigma_e2;
            b[sys_a] += d_a * y_a - shrink * d_a * wy;
            a[(sys_a, sys_a)] += d_a;
            for &(sys_b, _, w_b) in members {
                a[(sys_a, sys_b)] -= shrink * d_a * (w_b / sigma_e2);
            }
        }
    }
    a.clone()
        .cholesky()
        .map(|c| c.solve(&b).iter().cloned().collect())
        .or_else(|| a.lu().solve(&b).map(|v| v.iter().cloned().collect()))
        .ok_or(AdjustError::GlsSolveFailed)
}

/// Empirical-Bayes item effects and their posterior variances.
fn update_u(idx: &Indexed, mu: &[f64], sigma_u2: f64, sigma_e2: f64) -> (Vec<f64>, Vec<f64>) {
    let mut u_hat = vec![0.0; idx.items.len()];
    let mut u_var = vec![0.0; idx.items.len()];
    if sigma_u2 <= 0.0 {
        return (u_hat, u_var);
    }
    for (i, members) in idx.item_rows.iter().enumerate() {
        let precision: f64 =
            members.iter().map(|&(_, _, w)| w / sigma_e2).sum::<f64>() + 1.0 / sigma_u2;
        let score: f64 = members
            .iter()
            .map(|&(sys, y, w)| (w / sigma_e2) * (y - mu[sys]))
            .sum();
        u_hat[i] = score / precision;
        u_var[i] = 1.0 / precision;
    }
    (u_hat, u_var)
}

fn log_likelihood(idx: &Indexed, mu: &[f64], sigma_u2: f64, sigma_e2: f64) -> f64 {
    let mut ll = 0.0;
    for members in &idx.item_rows {
        let mut log_det = 0.0;
        let mut quad = 0.0;
        let mut s_i = 0.0;
        let mut dr = 0.0;
        for &(sys, y, w) in members {
            let d = w / sigma_e2;
            let r = y - mu[sys];
            log_det += (sigma_e2 / w).ln();
            quad += d * r * r;
            s_i += d;
            dr += d * r;
        }
        log_det += (1.0 + sigma_u2 * s_i).ln();
        quad -= sigma_u2 * dr * dr / (1.0 + sigma_u2 * s_i);
        ll += -0.5 * (log_det + quad + members.len() as f64 * (2.0 * std::f64::consts::PI).ln());
    }
    ll
}

/// Fit the weighted mixed model. Variance components stay nonnegative at
/// every iteration; non-convergence returns the best iterate with the
/// `converged` flag cleared rather than an error.
pub fn fit_mixed_weighted(
    rows: &[MixedRow],
    opts: &MixedOptions,
) -> Result<MixedModelFit, AdjustError> {
    let idx = index_rows(rows)?;
    let m = idx.systems.len();
    let q = idx.items.len();
    let n = idx.n_rows;

    // init: weighted per-system means, scale-tracking residual variance,
    // between-item variance of mean residuals
    let mut mu = vec![0.0; m];
    {
        let mut num = vec![0.0; m];
        let mut den = vec![0.0; m];
        for members in &idx.item_rows {
            for &(sys, y, w) in members {
                num[sys] += w * y;
                den[sys] += w;
            }
        }
        // systems are derived from the rows, so every system has weight
        for k in 0..m {
            mu[k] = num[k] / den[k];
        }
    }
    // Residual-variance floor: zero-noise data would otherwise push
    // sigma_e2 to zero and the 1/sigma_e2 terms of the GLS blocks into
    // catastrophic cancellation. The floor follows the data scale (and
    // the weight scale, like sigma_e2 itself), so the shift and
    // weight-scale equivariances survive.
    let sigma_e2_floor = {
        let wsum: f64 = idx.item_rows.iter().flatten().map(|&(_, _, w)| w).sum();
        let grand: f64 = idx
            .item_rows
            .iter()
            .flatten()
            .map(|&(_, y, w)| w * y)
            .sum::<f64>()
            / wsum;
        let scale_ss: f64 = idx
            .item_rows
            .iter()
            .flatten()
            .map(|&(_, y, w)| w * (y - grand) * (y - grand))
            .sum::<f64>()
            / n as f64;
        (1e-8 * scale_ss).max(1e-12)
    };
    let mut sigma_e2 = {
        let ss: f64 = idx
            .item_rows
            .iter()
            .flatten()
            .map(|&(sys, y, w)| w * (y - mu[sys]) * (y - mu[sys]))
            .sum();
        (ss / n as f64).max(sigma_e2_floor)
    };
    let mut sigma_u2 = {
        let mut between = 0.0;
        for members in &idx.item_rows {
            let wsum: f64 = members.iter().map(|&(_, _, w)| w).sum();
            let rbar: f64 = members
                .iter()
                .map(|&(sys, y, w)| w * (y - mu[sys]))
                .sum::<f64>()
                / wsum;
            between += rbar * rbar;
        }
        (between / q as f64).max(1e-10)
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut ll_prev = f64::NEG_INFINITY;
    let mut ll = ll_prev;
    // within-item degrees of freedom after removing item means and the
    // M - 1 system contrasts they absorb
    let df_within = (n as i64 - q as i64 - m as i64 + 1).max(1) as f64;
    while iterations < opts.max_iterations {
        iterations += 1;
        mu = solve_mu(&idx, sigma_u2, sigma_e2)?;

        // Variance updates from weighted residual sums of squares.
        // Within-item deviations estimate sigma_e2; between-item mean
        // residuals estimate sigma_u2 after removing their noise share,
        // projected at zero. sigma_u2 = 0 is an exact fixed point of the
        // projected update.
        let mut within_ss = 0.0;
        let mut item_means = Vec::with_capacity(q);
        for members in &idx.item_rows {
            let m_i: f64 = members.iter().map(|&(_, _, w)| w).sum();
            let rbar: f64 = members
                .iter()
                .map(|&(sys, y, w)| w * (y - mu[sys]))
                .sum::<f64>()
                / m_i;
            for &(sys, y, w) in members {
                let d = y - mu[sys] - rbar;
                within_ss += w * d * d;
            }
            item_means.push((rbar, m_i));
        }
        sigma_e2 = (within_ss / df_within).max(sigma_e2_floor);
        let between: f64 = item_means
            .iter()
            .map(|&(rbar, m_i)| rbar * rbar - sigma_e2 / m_i)
            .sum();
        sigma_u2 = (between / q as f64).max(0.0);

        ll = log_likelihood(&idx, &mu, sigma_u2, sigma_e2);
        if (ll - ll_prev).abs() / (ll_prev.abs() + 1.0) < opts.tolerance {
            converged = true;
            break;
        }
        ll_prev = ll;
    }

    // final joint solve so (mu, u) satisfy the mixed-model equations
    // exactly at the final variance components
    mu = solve_mu(&idx, sigma_u2, sigma_e2)?;
    let (u_hat, _) = update_u(&idx, &mu, sigma_u2, sigma_e2);

    Ok(MixedModelFit {
        mu: idx
            .systems
            .iter()
            .cloned()
            .zip(mu.iter().cloned())
            .collect(),
        sigma_u2,
        sigma_e2,
        u_hat: idx
            .items
            .iter()
            .cloned()
            .zip(u_hat.iter().cloned())
            .collect(),
        converged,
        iterations,
        log_likelihood: ll,
    })
}
