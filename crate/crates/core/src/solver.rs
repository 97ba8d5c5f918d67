//! Regularized multinomial logistic regression.
//!
//! The objective is the summed negative log-likelihood plus a penalty on
//! the weights (never the intercepts): `J(W) = sum_i NLL_i + lambda *
//! ||W||_1` or `J(W) = sum_i NLL_i + (lambda / 2) * ||W||_2^2`. Fitting is
//! deterministic full-batch proximal gradient descent with a backtracking
//! line search; the L1 penalty enters through exact soft-thresholding, so
//! pruned weights are exactly zero. Accepted steps never increase the
//! objective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::SparseVector;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("{rows} rows but {labels} labels")]
    RowsLabelsMismatch { rows: usize, labels: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("label {label} out of range for k={k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("row dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite objective: the fit diverged")]
    NonFinite,
    #[error("invalid solver params: {reason}")]
    BadParams { reason: String },
    #[error("penalty lambda must be non-negative, got {lambda}")]
    NegativeLambda { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub lambda: f64,
}

impl PenaltyConfig {
    pub fn l1(lambda: f64) -> Self {
        Self {
            kind: PenaltyKind::L1,
            lambda,
        }
    }

    pub fn l2(lambda: f64) -> Self {
        Self {
            kind: PenaltyKind::L2,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(SolverError::NegativeLambda {
                lambda: self.lambda,
            });
        }
        Ok(())
    }

    /// Stable short label like `l1-10`.
    pub fn label(&self) -> String {
        let kind = match self.kind {
            PenaltyKind::L1 => "l1",
            PenaltyKind::L2 => "l2",
        };
        if self.lambda == self.lambda.trunc() && self.lambda.abs() < 1e15 {
            format!("{kind}-{}", self.lambda as i64)
        } else {
            format!("{kind}-{}", self.lambda)
        }
    }
}

impl std::fmt::Display for PenaltyConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Relative objective-change stopping threshold.
    pub tolerance: f64,
    pub initial_step: f64,
    /// Step shrink factor in (0, 1).
    pub backtrack: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-8,
            initial_step: 1.0,
            backtrack: 0.5,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.tolerance <= 0.0 {
            return Err(SolverError::BadParams {
                reason: format!("tolerance must be > 0, got {}", self.tolerance),
            });
        }
        if !(0.0 < self.backtrack && self.backtrack < 1.0) {
            return Err(SolverError::BadParams {
                reason: format!("backtrack factor must be in (0,1), got {}", self.backtrack),
            });
        }
        if self.initial_step <= 0.0 {
            return Err(SolverError::BadParams {
                reason: format!("initial step must be > 0, got {}", self.initial_step),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Full objective after every accepted step (entry 0 is the start).
    #[serde(skip_serializing, default)]
    pub objective_trace: Vec<f64>,
}

/// Fitted classifier: per-class weights over the feature columns plus
/// unpenalized intercepts. Weight storage is feature-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelWeights {
    pub k: usize,
    pub dim: usize,
    weights: Vec<f64>,
    intercepts: Vec<f64>,
    pub meta: FitMeta,
}

impl ModelWeights {
    pub fn zeros(k: usize, dim: usize) -> Self {
        Self {
            k,
            dim,
            weights: vec![0.0; k * dim],
            intercepts: vec![0.0; k],
            meta: FitMeta {
                iterations: 0,
                final_objective: f64::NAN,
                converged: false,
                objective_trace: Vec::new(),
            },
        }
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[feature * self.k + class]
    }

    pub fn set_weight(&mut self, class: usize, feature: usize, value: f64) {
        self.weights[feature * self.k + class] = value;
    }

    pub fn intercept(&self, class: usize) -> f64 {
        self.intercepts[class]
    }

    pub fn set_intercept(&mut self, class: usize, value: f64) {
        self.intercepts[class] = value;
    }

    /// Count of exactly-zero weight entries (the L1 sparsity report).
    pub fn zero_weight_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w == 0.0).count()
    }

    pub fn nonzero_weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().enumerate().filter_map(move |(i, &w)| {
            (w != 0.0).then_some((i % self.k, i / self.k, w))
        })
    }

    fn scores(&self, vector: &SparseVector, out: &mut [f64]) {
        out.copy_from_slice(&self.intercepts);
        for (j, v) in vector.iter() {
            let base = j as usize * self.k;
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.weights[base + c] * v;
            }
        }
    }
}

fn check_problem(
    rows: &[SparseVector],
    labels: &[usize],
    k: usize,
) -> Result<usize, SolverError> {
    if rows.is_empty() {
        return Err(SolverError::EmptyTrainingData);
    }
    if rows.len() != labels.len() {
        return Err(SolverError::RowsLabelsMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = rows[0].dim;
    for row in rows {
        if row.dim != dim {
            return Err(SolverError::DimensionMismatch {
                expected: dim,
                got: row.dim,
            });
        }
    }
    for &label in labels {
        if label >= k {
            return Err(SolverError::LabelOutOfRange { label, k });
        }
    }
    Ok(dim)
}

#[inline]
fn row_scores(row: &SparseVector, weights: &[f64], intercepts: &[f64], scores: &mut [f64]) {
    let k = scores.len();
    scores.copy_from_slice(intercepts);
    for (&j, &v) in row.indices.iter().zip(&row.values) {
        let base = j as usize * k;
        let wrow = &weights[base..base + k];
        for (s, &w) in scores.iter_mut().zip(wrow) {
            *s += w * v;
        }
    }
}

fn smooth_loss_unchecked(
    rows: &[SparseVector],
    labels: &[usize],
    k: usize,
    weights: &[f64],
    intercepts: &[f64],
    penalty: &PenaltyConfig,
) -> f64 {
    let mut scores = vec![0.0; k];
    let mut nll = 0.0;
    for (row, &y) in rows.iter().zip(labels) {
        row_scores(row, weights, intercepts, &mut scores);
        nll += log_sum_exp(&scores) - scores[y];
    }
    if penalty.kind == PenaltyKind::L2 {
        nll += 0.5 * penalty.lambda * weights.iter().map(|w| w * w).sum::<f64>();
    }
    nll
}

/// Smooth part of the objective: summed NLL, plus the L2 term when the
/// penalty is L2 (the L1 penalty is handled by the proximal step, not the
/// gradient). Weight layout is feature-major, `weights[j * k + c]`.
pub fn smooth_loss(
    rows: &[SparseVector],
    labels: &[usize],
    k: usize,
    weights: &[f64],
    intercepts: &[f64],
    penalty: &PenaltyConfig,
) -> Result<f64, SolverError> {
    check_problem(rows, labels, k)?;
    penalty.validate()?;
    let nll = smooth_loss_unchecked(rows, labels, k, weights, intercepts, penalty);
    if !nll.is_finite() {
        return Err(SolverError::NonFinite);
    }
    Ok(nll)
}

#[allow(clippy::too_many_arguments)]
fn loss_and_grad_into(
    rows: &[SparseVector],
    labels: &[usize],
    k: usize,
    weights: &[f64],
    intercepts: &[f64],
    penalty: &PenaltyConfig,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> f64 {
    grad_w.fill(0.0);
    grad_b.fill(0.0);
    let mut scores = vec![0.0; k];
    let mut probs = vec![0.0; k];
    let mut nll = 0.0;

    for (row, &y) in rows.iter().zip(labels) {
        row_scores(row, weights, intercepts, &mut scores);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, &s) in probs.iter_mut().zip(scores.iter()) {
            *p = (s - max).exp();
            sum += *p;
        }
        nll += max + sum.ln() - scores[y];
        let inv = 1.0 / sum;
        for p in probs.iter_mut() {
            *p *= inv;
        }
        probs[y] -= 1.0;
        for (g, &p) in grad_b.iter_mut().zip(probs.iter()) {
            *g += p;
        }
        for (&j, &v) in row.indices.iter().zip(&row.values) {
            let base = j as usize * k;
            let grow = &mut grad_w[base..base + k];
            for (g, &p) in grow.iter_mut().zip(probs.iter()) {
                *g += p * v;
            }
        }
    }

    if penalty.kind == PenaltyKind::L2 {
        nll += 0.5 * penalty.lambda * weights.iter().map(|w| w * w).sum::<f64>();
        for (g, &w) in grad_w.iter_mut().zip(weights) {
            *g += penalty.lambda * w;
        }
    }
    nll
}

/// Smooth loss together with its analytic gradient
/// (`d/dW = sum_i (p_i - y_i) x_i^T`, plus `lambda W` under L2).
pub fn loss_and_grad(
    rows: &[SparseVector],
    labels: &[usize],
    k: usize,
    weights: &[f64],
    intercepts: &[f64],
    penalty: &PenaltyConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>), SolverError> {
    let dim = check_problem(rows, labels, k)?;
    penalty.validate()?;
    let mut grad_w = vec![0.0; dim * k];
    let mut grad_b = vec![0.0; k];
    let nll = loss_and_grad_into(
        rows, labels, k, weights, intercepts, penalty, &mut grad_w, &mut grad_b,
    );
    if !nll.is_finite() {
        return Err(SolverError::NonFinite);
    }
    Ok((nll, grad_w, grad_b))
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn l1_term(weights: &[f64], penalty: &PenaltyConfig) -> f64 {
    match penalty.kind {
        PenaltyKind::L1 => penalty.lambda * weights.iter().map(|w| w.abs()).sum::<f64>(),
        PenaltyKind::L2 => 0.0,
    }
}

fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// Fits by proximal gradient descent from zero weights. Stops when the
/// relative objective change drops below `params.tolerance` or the
/// iteration budget runs out. The returned trace is monotone
/// non-increasing by construction.
pub fn fit(
    rows: &[SparseVector],
    labels: &[usize],
    k: usize,
    penalty: &PenaltyConfig,
    params: &SolverParams,
) -> Result<ModelWeights, SolverError> {
    let dim = check_problem(rows, labels, k)?;
    penalty.validate()?;
    params.validate()?;
    {
        let mut seen = vec![false; k];
        for &y in labels {
            seen[y] = true;
        }
        if seen.iter().filter(|&&s| s).count() < 2 {
            return Err(SolverError::SingleClass);
        }
    }

    let mut w = vec![0.0f64; dim * k];
    let mut b = vec![0.0f64; k];
    let mut gw = vec![0.0f64; dim * k];
    let mut gb = vec![0.0f64; k];
    let mut f_smooth = loss_and_grad_into(rows, labels, k, &w, &b, penalty, &mut gw, &mut gb);
    if !f_smooth.is_finite() {
        return Err(SolverError::NonFinite);
    }
    let mut objective = f_smooth + l1_term(&w, penalty);
    let mut trace = vec![objective];

    let mut step = params.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let is_l1 = penalty.kind == PenaltyKind::L1;

    let mut w_next = vec![0.0f64; dim * k];
    let mut b_next = vec![0.0f64; k];
    let mut gw_next = vec![0.0f64; dim * k];
    let mut gb_next = vec![0.0f64; k];

    for _ in 0..params.max_iterations {
        iterations += 1;
        // backtrack until the proximal sufficient-decrease condition holds
        // and the full objective does not increase
        let accepted = loop {
            let threshold = if is_l1 { step * penalty.lambda } else { 0.0 };
            for i in 0..w.len() {
                let moved = w[i] - step * gw[i];
                w_next[i] = if is_l1 {
                    soft_threshold(moved, threshold)
                } else {
                    moved
                };
            }
            for i in 0..b.len() {
                b_next[i] = b[i] - step * gb[i];
            }
            let f_next = smooth_loss_unchecked(rows, labels, k, &w_next, &b_next, penalty);
            if !f_next.is_finite() {
                step *= params.backtrack;
                if step < 1e-20 {
                    break None;
                }
                continue;
            }

            let mut linear = 0.0;
            let mut quad = 0.0;
            for i in 0..w.len() {
                let d = w_next[i] - w[i];
                linear += gw[i] * d;
                quad += d * d;
            }
            for i in 0..b.len() {
                let d = b_next[i] - b[i];
                linear += gb[i] * d;
                quad += d * d;
            }
            let bound = f_smooth + linear + quad / (2.0 * step);
            let obj_next = f_next + l1_term(&w_next, penalty);

            if f_next <= bound + 1e-12 * (1.0 + f_smooth.abs()) && obj_next <= objective {
                break Some(obj_next);
            }
            step *= params.backtrack;
            if step < 1e-20 {
                break None;
            }
        };

        let Some(obj_next) = accepted else {
            // no representable step improves the objective: a fixed point
            converged = true;
            break;
        };
        let previous = objective;
        objective = obj_next;
        trace.push(objective);
        if !objective.is_finite() {
            return Err(SolverError::NonFinite);
        }

        let f_next =
            loss_and_grad_into(rows, labels, k, &w_next, &b_next, penalty, &mut gw_next, &mut gb_next);

        // spectral (Barzilai-Borwein) initial step for the next line
        // search: <dw, dg> / <dg, dg>, safeguarded by the backtracking
        // loop above
        let mut s_dot_y = 0.0;
        let mut y_dot_y = 0.0;
        for i in 0..w.len() {
            let s = w_next[i] - w[i];
            let y = gw_next[i] - gw[i];
            s_dot_y += s * y;
            y_dot_y += y * y;
        }
        for i in 0..b.len() {
            let s = b_next[i] - b[i];
            let y = gb_next[i] - gb[i];
            s_dot_y += s * y;
            y_dot_y += y * y;
        }
        if s_dot_y > 0.0 && y_dot_y > 0.0 {
            step = (s_dot_y / y_dot_y).clamp(1e-12, 1e12);
        } else {
            step /= params.backtrack;
        }

        std::mem::swap(&mut w, &mut w_next);
        std::mem::swap(&mut b, &mut b_next);
        std::mem::swap(&mut gw, &mut gw_next);
        std::mem::swap(&mut gb, &mut gb_next);
        f_smooth = f_next;

        let change = previous - objective;
        if change.abs() <= params.tolerance * previous.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(ModelWeights {
        k,
        dim,
        weights: w,
        intercepts: b,
        meta: FitMeta {
            iterations,
            final_objective: objective,
            converged,
            objective_trace: trace,
        },
    })
}

/// Softmax class probabilities; numerically stable, sums to 1.
pub fn predict_proba(model: &ModelWeights, vector: &SparseVector) -> Result<Vec<f64>, SolverError> {
    if vector.dim != model.dim {
        return Err(SolverError::DimensionMismatch {
            expected: model.dim,
            got: vector.dim,
        });
    }
    let mut scores = vec![0.0; model.k];
    model.scores(vector, &mut scores);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
    Ok(scores)
}

/// Argmax class; exact ties break toward the lowest label index.
pub fn predict(model: &ModelWeights, vector: &SparseVector) -> Result<usize, SolverError> {
    let probs = predict_proba(model, vector)?;
    let mut best = 0;
    for (c, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = c;
        }
    }
    Ok(best)
}

pub fn predict_rows(model: &ModelWeights, rows: &[SparseVector]) -> Result<Vec<usize>, SolverError> {
    rows.iter().map(|r| predict(model, r)).collect()
}
