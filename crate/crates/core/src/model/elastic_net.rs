//! Elastic-net logistic regression fitted by cyclic proximal coordinate
//! descent. Each coordinate step minimises a quadratic upper bound on the
//! smooth part (log-loss curvature is at most 1/4), so the penalized
//! objective never increases between sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::folds::deal_stratified_folds;
use crate::eval::metrics::auc_roc;
use crate::tabular::FeatureTable;

/// Floor/ceiling applied to predicted probabilities so they stay inside the
/// open interval (0, 1) and log-losses stay finite.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassWeighting {
    /// Inverse class frequency when positives are below a quarter of the
    /// rows (severe imbalance), uniform otherwise.
    Auto,
    Uniform,
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetConfig {
    /// L1/L2 mix: 0 = pure ridge, 1 = pure lasso.
    pub alpha: f64,
    /// Candidate penalty strengths; the inner CV picks one.
    pub lambda_grid: Vec<f64>,
    pub inner_folds: usize,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
    /// Stop when the objective decrease over one full sweep drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        // 10 log-spaced penalties spanning 1e-4..1.
        let lambda_grid =
            (0..10).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 9.0)).collect();
        ElasticNetConfig {
            alpha: 0.5,
            lambda_grid,
            inner_folds: 3,
            class_weighting: ClassWeighting::Auto,
            seed: 0,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// Fitted model: coefficients over z-scored features, with the
/// standardisation statistics captured from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetLogit {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Zero-variance training features: coefficient pinned to 0.
    pub constant_features: Vec<usize>,
}

// ── Low-level objective / gradient / solver ──────────────────────────────────

#[inline]
fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Numerically stable per-row log-loss: `ln(1 + e^eta) − y·eta`.
#[inline]
fn log_loss(eta: f64, y: f64) -> f64 {
    eta.max(0.0) - y * eta + (-eta.abs()).exp().ln_1p()
}

/// Weighted-mean log-loss plus the ridge term `(l2/2)·‖w‖²` (the smooth part
/// of the penalized objective; `l2 = λ(1−α)`).
pub fn smooth_objective(
    x: &[f64],
    y: &[u8],
    weights: &[f64],
    coef: &[f64],
    intercept: f64,
    l2: f64,
) -> f64 {
    let n = y.len();
    let p = coef.len();
    let total_weight: f64 = weights.iter().sum();
    let mut loss = 0.0;
    for i in 0..n {
        let eta = intercept
            + coef.iter().zip(&x[i * p..(i + 1) * p]).map(|(w, v)| w * v).sum::<f64>();
        loss += weights[i] * log_loss(eta, y[i] as f64);
    }
    loss / total_weight + 0.5 * l2 * coef.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of `smooth_objective` with respect to (coefficients, intercept).
pub fn smooth_gradient(
    x: &[f64],
    y: &[u8],
    weights: &[f64],
    coef: &[f64],
    intercept: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = y.len();
    let p = coef.len();
    let total_weight: f64 = weights.iter().sum();
    let mut grad = vec![0.0; p];
    let mut grad_intercept = 0.0;
    for i in 0..n {
        let row = &x[i * p..(i + 1) * p];
        let eta = intercept + coef.iter().zip(row).map(|(w, v)| w * v).sum::<f64>();
        let resid = weights[i] * (sigmoid(eta) - y[i] as f64);
        grad_intercept += resid;
        for j in 0..p {
            grad[j] += resid * row[j];
        }
    }
    for (j, g) in grad.iter_mut().enumerate() {
        *g = *g / total_weight + l2 * coef[j];
    }
    (grad, grad_intercept / total_weight)
}

/// Full penalized objective: smooth part plus `λα·‖w‖₁`.
pub fn penalized_objective(
    x: &[f64],
    y: &[u8],
    weights: &[f64],
    coef: &[f64],
    intercept: f64,
    alpha: f64,
    lambda: f64,
) -> f64 {
    smooth_objective(x, y, weights, coef, intercept, lambda * (1.0 - alpha))
        + lambda * alpha * coef.iter().map(|w| w.abs()).sum::<f64>()
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct CdFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Penalized objective after each sweep; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Cyclic proximal coordinate descent on the penalized logistic objective.
/// `x` is the row-major n×p design matrix (already standardised by the
/// caller). Stops when the objective decrease over a sweep falls below `tol`.
pub fn coordinate_descent(
    x: &[f64],
    y: &[u8],
    weights: &[f64],
    p: usize,
    alpha: f64,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit> {
    let n = y.len();
    if x.len() != n * p || weights.len() != n {
        return Err(Error::Fit("design matrix shape mismatch".into()));
    }
    if !(0.0..=1.0).contains(&alpha) || !(lambda >= 0.0) {
        return Err(Error::Fit(format!("invalid penalty alpha={alpha} lambda={lambda}")));
    }
    let total_weight: f64 = weights.iter().sum();
    let l2 = lambda * (1.0 - alpha);
    let l1 = lambda * alpha;

    // Per-coordinate curvature bound: (1/4)·E_w[x_j²] + l2.
    let mut col_sq = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            let v = x[i * p + j];
            col_sq[j] += weights[i] * v * v;
        }
    }
    for c in col_sq.iter_mut() {
        *c /= total_weight;
    }

    let mut coef = vec![0.0; p];
    let mut intercept = 0.0;
    let mut eta = vec![0.0; n];
    let mut trace = Vec::new();
    let mut prev = penalized_objective(x, y, weights, &coef, intercept, alpha, lambda);

    for _ in 0..max_iter {
        // Intercept step (unpenalized; curvature bound 1/4).
        let mut g0 = 0.0;
        for i in 0..n {
            g0 += weights[i] * (sigmoid(eta[i]) - y[i] as f64);
        }
        g0 /= total_weight;
        let delta0 = -g0 / 0.25;
        if delta0 != 0.0 {
            intercept += delta0;
            for e in eta.iter_mut() {
                *e += delta0;
            }
        }

        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue; // constant-zero column stays at coefficient 0
            }
            let mut g = 0.0;
            for i in 0..n {
                g += weights[i] * (sigmoid(eta[i]) - y[i] as f64) * x[i * p + j];
            }
            g = g / total_weight + l2 * coef[j];
            let curvature = 0.25 * col_sq[j] + l2;
            let candidate = coef[j] - g / curvature;
            let updated = soft_threshold(candidate, l1 / curvature);
            let delta = updated - coef[j];
            if delta != 0.0 {
                coef[j] = updated;
                for i in 0..n {
                    eta[i] += delta * x[i * p + j];
                }
            }
        }

        let obj = penalized_objective(x, y, weights, &coef, intercept, alpha, lambda);
        debug_assert!(
            obj <= prev + 1e-9 * (1.0 + prev.abs()),
            "objective increased: {prev} -> {obj}"
        );
        trace.push(obj);
        let decrease = prev - obj;
        prev = obj;
        if decrease < tol {
            break;
        }
    }

    Ok(CdFit { coefficients: coef, intercept, objective_trace: trace })
}

// ── Standardisation and weighting ────────────────────────────────────────────

struct Standardized {
    means: Vec<f64>,
    stds: Vec<f64>,
    constant: Vec<bool>,
    /// Row-major z-scores; constant columns are all zeros.
    z: Vec<f64>,
}

/// Weighted mean/std per column so that class weighting and literal row
/// duplication produce identical statistics.
fn standardize(x: &[f64], n: usize, p: usize, weights: &[f64]) -> Standardized {
    let total: f64 = weights.iter().sum();
    let mut means = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            means[j] += weights[i] * x[i * p + j];
        }
    }
    for m in means.iter_mut() {
        *m /= total;
    }
    let mut vars = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            let d = x[i * p + j] - means[j];
            vars[j] += weights[i] * d * d;
        }
    }
    let mut stds = vec![0.0; p];
    let mut constant = vec![false; p];
    for j in 0..p {
        let std = (vars[j] / total).sqrt();
        if std <= 1e-12 * means[j].abs().max(1.0) {
            constant[j] = true;
            stds[j] = 0.0;
        } else {
            stds[j] = std;
        }
    }
    let mut z = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            if !constant[j] {
                z[i * p + j] = (x[i * p + j] - means[j]) / stds[j];
            }
        }
    }
    Standardized { means, stds, constant, z }
}

fn sample_weights(labels: &[u8], strategy: ClassWeighting) -> Vec<f64> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = n - pos;
    let balanced = match strategy {
        ClassWeighting::Uniform => false,
        ClassWeighting::InverseFrequency => true,
        ClassWeighting::Auto => pos / n < 0.25,
    };
    if balanced && pos > 0.0 && neg > 0.0 {
        let w_pos = n / (2.0 * pos);
        let w_neg = n / (2.0 * neg);
        labels.iter().map(|&y| if y == 1 { w_pos } else { w_neg }).collect()
    } else {
        vec![1.0; labels.len()]
    }
}

// ── Fitting ──────────────────────────────────────────────────────────────────

fn validate_config(config: &ElasticNetConfig) -> Result<()> {
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::Fit(format!("alpha must be in [0, 1], got {}", config.alpha)));
    }
    if config.lambda_grid.is_empty() {
        return Err(Error::Fit("lambda grid is empty".into()));
    }
    if config.lambda_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::Fit("lambda grid must be non-negative and finite".into()));
    }
    if !(config.tol > 0.0) {
        return Err(Error::Fit(format!("tol must be > 0, got {}", config.tol)));
    }
    if config.inner_folds < 2 {
        return Err(Error::Fit("inner_folds must be >= 2".into()));
    }
    Ok(())
}

/// Fit on a labelled table: z-score features on the training data, pick λ
/// from the grid by inner stratified K-fold mean AUC (ties favour the larger
/// λ), then solve the penalized objective by coordinate descent.
pub fn fit_elastic_net_logit(
    train: &FeatureTable,
    config: &ElasticNetConfig,
) -> Result<ElasticNetLogit> {
    validate_config(config)?;
    let labels = train
        .labels()
        .ok_or_else(|| Error::Fit("training table has no labels".into()))?
        .to_vec();
    let (pos, neg) = train.class_counts()?;
    if pos == 0 || neg == 0 {
        return Err(Error::Fit(format!(
            "training data is single-class ({pos} positive, {neg} negative)"
        )));
    }
    if train.n_features() == 0 {
        return Err(Error::Fit("training table has no features".into()));
    }

    let n = train.n_rows();
    let p = train.n_features();
    let x = train.feature_matrix();

    let mut grid = config.lambda_grid.clone();
    grid.sort_unstable_by(f64::total_cmp);
    grid.dedup();

    let lambda = if grid.len() == 1 {
        grid[0]
    } else {
        select_lambda(&x, &labels, n, p, &grid, config)?
    };

    let weights = sample_weights(&labels, config.class_weighting);
    let std = standardize(&x, n, p, &weights);
    let fit = coordinate_descent(
        &std.z,
        &labels,
        &weights,
        p,
        config.alpha,
        lambda,
        config.tol,
        config.max_iter,
    )?;

    Ok(ElasticNetLogit {
        feature_names: train.feature_names().to_vec(),
        means: std.means,
        stds: std.stds,
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        lambda,
        alpha: config.alpha,
        constant_features: std
            .constant
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(j, _)| j)
            .collect(),
    })
}

/// Inner stratified CV over the λ grid, scanning ascending so equal mean AUC
/// resolves to the larger (more regularised) penalty. When a class is too
/// small to stratify the inner folds, the largest λ wins outright.
fn select_lambda(
    x: &[f64],
    labels: &[u8],
    n: usize,
    p: usize,
    grid: &[f64],
    config: &ElasticNetConfig,
) -> Result<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = n - pos;
    let folds = config.inner_folds.min(pos).min(neg);
    if folds < 2 {
        return Ok(*grid.last().expect("grid non-empty"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let assignment = deal_stratified_folds(labels, folds, &mut rng);

    let mut best_lambda = grid[0];
    let mut best_auc = f64::NEG_INFINITY;
    for &lambda in grid {
        let mut auc_sum = 0.0;
        for fold in 0..folds {
            let train_rows: Vec<usize> =
                (0..n).filter(|&i| assignment[i] as usize != fold).collect();
            let test_rows: Vec<usize> =
                (0..n).filter(|&i| assignment[i] as usize == fold).collect();

            let sub_y: Vec<u8> = train_rows.iter().map(|&i| labels[i]).collect();
            let mut sub_x = Vec::with_capacity(train_rows.len() * p);
            for &i in &train_rows {
                sub_x.extend_from_slice(&x[i * p..(i + 1) * p]);
            }
            let weights = sample_weights(&sub_y, config.class_weighting);
            let std = standardize(&sub_x, train_rows.len(), p, &weights);
            let fit = coordinate_descent(
                &std.z,
                &sub_y,
                &weights,
                p,
                config.alpha,
                lambda,
                config.tol,
                config.max_iter,
            )?;

            let mut scores = Vec::with_capacity(test_rows.len());
            let mut test_y = Vec::with_capacity(test_rows.len());
            for &i in &test_rows {
                let row = &x[i * p..(i + 1) * p];
                let mut eta = fit.intercept;
                for j in 0..p {
                    if !std.constant[j] {
                        eta += fit.coefficients[j] * (row[j] - std.means[j]) / std.stds[j];
                    }
                }
                scores.push(eta);
                test_y.push(labels[i]);
            }
            auc_sum += auc_roc(&test_y, &scores)?;
        }
        let mean_auc = auc_sum / folds as f64;
        if mean_auc >= best_auc {
            best_auc = mean_auc;
            best_lambda = lambda;
        }
    }
    Ok(best_lambda)
}

// ── Prediction ───────────────────────────────────────────────────────────────

impl ElasticNetLogit {
    /// `sigmoid(intercept + w·z(x))`, matching feature columns by name so
    /// extra unused columns in `rows` are ignored. Probabilities are clamped
    /// to the open interval (0, 1).
    pub fn predict_proba(&self, rows: &FeatureTable) -> Result<Vec<f64>> {
        let mut cols = Vec::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            cols.push(rows.column(name).ok_or_else(|| {
                Error::InvalidInput(format!("prediction rows lack feature column `{name}`"))
            })?);
        }
        let n = rows.n_rows();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut eta = self.intercept;
            for (j, col) in cols.iter().enumerate() {
                if self.stds[j] > 0.0 {
                    eta += self.coefficients[j] * (col[i] - self.means[j]) / self.stds[j];
                }
            }
            out.push(sigmoid(eta).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
        }
        Ok(out)
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────
