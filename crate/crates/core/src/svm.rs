//! Dual SVM training with the inhomogeneous polynomial kernel.
//!
//! The solver is a plain SMO over the weighted dual
//!
//!   max  Σα_i − ½ ΣΣ α_i α_j y_i y_j κ(x_i, x_j)
//!   s.t. Σ α_i y_i = 0,  0 ≤ α_i ≤ C·w(y_i)
//!
//! with a second-order working set (maximal violator, then the partner with
//! the largest objective gain), which makes every step a deterministic
//! function of the inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polynomial::{expand_classifier, FloatPoly};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub beta: f64,
    pub theta: f64,
    pub m: u32,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { beta: 1.0, theta: 1.0, m: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
    pub weight_pos: f64,
    pub weight_neg: f64,
}

impl TrainingSet {
    /// Weights balance the classes: each positive is weighted by the number
    /// of negatives and vice versa.
    pub fn balanced(positives: Vec<Vec<f64>>, negatives: Vec<Vec<f64>>) -> TrainingSet {
        let weight_pos = negatives.len().max(1) as f64;
        let weight_neg = positives.len().max(1) as f64;
        TrainingSet { positives, negatives, weight_pos, weight_neg }
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `i` in the combined order: positives first, then negatives.
    pub fn point(&self, i: usize) -> &[f64] {
        if i < self.positives.len() {
            &self.positives[i]
        } else {
            &self.negatives[i - self.positives.len()]
        }
    }

    pub fn label(&self, i: usize) -> f64 {
        if i < self.positives.len() {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub kkt_tol: f64,
    /// Cap on pair updates; `None` means 20 000 per training point.
    pub max_passes: Option<usize>,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1e6, kkt_tol: 1e-4, max_passes: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub b: f64,
    pub support_indices: Vec<usize>,
    pub functional_margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvmError {
    #[error("training set needs at least one point per class")]
    EmptyClass,
    #[error("training points have mismatched dimensions")]
    Dimension,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("classifier misclassifies {misclassified} of {total} training points")]
    Failed { misclassified: usize, total: usize },
}

pub fn kernel(x: &[f64], y: &[f64], k: &KernelParams) -> f64 {
    assert_eq!(x.len(), y.len(), "kernel arguments differ in dimension");
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (k.beta * dot + k.theta).powi(k.m as i32)
}

impl DualSolution {
    /// h(x) = Σ α_i y_i κ(x_i, x) + b.
    pub fn decision(&self, ts: &TrainingSet, k: &KernelParams, x: &[f64]) -> f64 {
        self.support_indices
            .iter()
            .map(|&i| self.alphas[i] * ts.label(i) * kernel(ts.point(i), x, k))
            .sum::<f64>()
            + self.b
    }

    /// The classifier as an explicit polynomial in the input variables.
    pub fn expand(&self, ts: &TrainingSet, k: &KernelParams) -> FloatPoly {
        let svs: Vec<Vec<f64>> = self.support_indices.iter().map(|&i| ts.point(i).to_vec()).collect();
        let alphas: Vec<f64> = self.support_indices.iter().map(|&i| self.alphas[i]).collect();
        let labels: Vec<f64> = self.support_indices.iter().map(|&i| ts.label(i)).collect();
        if svs.is_empty() {
            let n = ts.positives.first().map_or(0, Vec::len);
            return FloatPoly::constant(n, self.b);
        }
        expand_classifier(&svs, &alphas, &labels, self.b, k)
    }
}

pub fn train(ts: &TrainingSet, k: &KernelParams, cfg: &SvmConfig) -> Result<DualSolution, SvmError> {
    if ts.positives.is_empty() || ts.negatives.is_empty() {
        return Err(SvmError::EmptyClass);
    }
    if !(cfg.c > 0.0) || !(cfg.kkt_tol > 0.0) {
        return Err(SvmError::Config("C and kkt_tol must be positive"));
    }
    if !(ts.weight_pos > 0.0) || !(ts.weight_neg > 0.0) {
        return Err(SvmError::Config("class weights must be positive"));
    }
    let n = ts.len();
    let dim = ts.point(0).len();
    if (0..n).any(|i| ts.point(i).len() != dim) {
        return Err(SvmError::Dimension);
    }

    let y: Vec<f64> = (0..n).map(|i| ts.label(i)).collect();
    let upper: Vec<f64> = y
        .iter()
        .map(|&l| cfg.c * if l > 0.0 { ts.weight_pos } else { ts.weight_neg })
        .collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(ts.point(i), ts.point(j), k);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let kij = |i: usize, j: usize| q[i * n + j];

    // grad_t = Σ_s α_s y_t y_s K_ts − 1; α starts at zero.
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = cfg.max_passes.unwrap_or(20_000 * n).max(1);
    let mut iterations = 0;
    let in_up = |a: f64, l: f64, u: f64| (l > 0.0 && a < u) || (l < 0.0 && a > 0.0);
    let in_low = |a: f64, l: f64, u: f64| (l > 0.0 && a > 0.0) || (l < 0.0 && a < u);

    while iterations < max_iter {
        // First element: largest −y_t·grad_t over the "up" set. Second: the
        // "low" partner with the largest second-order gain (gap² / curvature).
        // Ties go to the lowest index.
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], upper[t]) && v > gmax {
                gmax = v;
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best_gain = 0.0;
        for t in 0..n {
            if !in_low(alpha[t], y[t], upper[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let gap = gmax - v;
                let curv = (kij(i, i) + kij(t, t) - 2.0 * kij(i, t)).max(1e-12);
                let gain = gap * gap / curv;
                if gain > best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < cfg.kkt_tol {
            break;
        }
        let gmin = -y[j] * grad[j];
        iterations += 1;

        let eta = (kij(i, i) + kij(j, j) - 2.0 * kij(i, j)).max(1e-12);
        // Move along d with d_i = y_i, d_j = −y_j (keeps Σ α y fixed).
        let mut step = (gmax - gmin) / eta;
        let room = |a: f64, dir: f64, u: f64| if dir > 0.0 { u - a } else { a };
        step = step
            .min(room(alpha[i], y[i], upper[i]))
            .min(room(alpha[j], -y[j], upper[j]));
        let step = step.max(0.0);
        let di = y[i] * step;
        let dj = -y[j] * step;
        alpha[i] = (alpha[i] + di).clamp(0.0, upper[i]);
        alpha[j] = (alpha[j] + dj).clamp(0.0, upper[j]);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kij(t, i) * di + y[j] * kij(t, j) * dj);
        }
    }

    // Offset from free vectors when there are any, else the middle of the
    // feasible range.
    let mut sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        if alpha[t] > 0.0 && alpha[t] < upper[t] {
            sum += -y[t] * grad[t];
            free += 1;
        }
    }
    let b = if free > 0 {
        sum / free as f64
    } else {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], upper[t]) {
                lo = lo.max(v);
            }
            if in_low(alpha[t], y[t], upper[t]) {
                hi = hi.min(v);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let mut sol = DualSolution { alphas: alpha, b, support_indices, functional_margin: 0.0, iterations };
    let misclassified = (0..n).filter(|&t| !(y[t] * sol.decision(ts, k, ts.point(t)) > 0.0)).count();
    if misclassified > 0 {
        return Err(SvmError::Failed { misclassified, total: n });
    }
    sol.functional_margin = functional_margin(&sol, ts, k);
    Ok(sol)
}

/// 2·min_i |h(x_i)| / ‖w‖, or 0 when some point lies on the boundary.
pub fn functional_margin(sol: &DualSolution, ts: &TrainingSet, k: &KernelParams) -> f64 {
    let min_h = (0..ts.len())
        .map(|t| sol.decision(ts, k, ts.point(t)).abs())
        .fold(f64::INFINITY, f64::min);
    if min_h == 0.0 || !min_h.is_finite() {
        return 0.0;
    }
    let mut w2 = 0.0;
    for &i in &sol.support_indices {
        for &j in &sol.support_indices {
            w2 += sol.alphas[i] * sol.alphas[j] * ts.label(i) * ts.label(j) * kernel(ts.point(i), ts.point(j), k);
        }
    }
    if w2 <= 0.0 {
        return 0.0;
    }
    2.0 * min_h / w2.sqrt()
}
