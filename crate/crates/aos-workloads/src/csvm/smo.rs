//! SMO solver for the two-class soft-margin SVM dual, using
//! maximal-violating-pair working-set selection. Fully deterministic:
//! selection is by extremal gradient values, no random restarts.
//!
//! Dual problem: min ½·αᵀQα − Σα with Q_ij = y_i y_j K(x_i, x_j),
//! subject to 0 ≤ α ≤ C and Σ α_i y_i = 0. Convergence when
//! m(α) − M(α) < tol with m/M the max/min of y_i − F_i over the up/low
//! index sets (F_i the biasless decision value at point i).

use thiserror::Error;

use crate::par::{for_each_row_mut, map_indexed};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub kernel: Kernel,
    /// 0 = automatic (10·m, at least 2000).
    pub max_iter: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            c: 1.0,
            tol: 1e-3,
            kernel: Kernel::Linear,
            max_iter: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("labels must be ±1 (found {0})")]
    BadLabel(f64),
    #[error("dataset has a single class")]
    SingleClass,
    #[error("dataset shape mismatch: {points} points, {labels} labels")]
    ShapeMismatch { points: usize, labels: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("solver stalled after {iterations} iterations with {violating} KKT violations")]
    SolverStalled { iterations: usize, violating: usize },
    #[error("kernel or penalty mismatch between models")]
    ConfigConflict,
}

/// Trained model: support vectors, their coefficients α_i·y_i, the bias
/// and the kernel/penalty it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Matrix,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c: f64,
}

impl SvmModel {
    pub fn sv_count(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.support_vectors.cols() && self.sv_count() > 0 {
            return Err(SvmError::DimensionMismatch {
                expected: self.support_vectors.cols(),
                actual: x.len(),
            });
        }
        let mut acc = self.bias;
        for (sv, &c) in self.support_vectors.iter_rows().zip(&self.coef) {
            acc += c * self.kernel.eval(sv, x);
        }
        Ok(acc)
    }

    /// Predicted labels (±1; zero decision counts as +1).
    pub fn classify(&self, points: &Matrix) -> Result<Vec<f64>, SvmError> {
        if points.rows() > 0 && self.sv_count() > 0 && points.cols() != self.support_vectors.cols()
        {
            return Err(SvmError::DimensionMismatch {
                expected: self.support_vectors.cols(),
                actual: points.cols(),
            });
        }
        Ok(map_indexed(points.rows(), |i| {
            let d = self.decision(points.row(i)).expect("dims checked");
            if d >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }))
    }

    pub fn training_errors(&self, points: &Matrix, labels: &[f64]) -> Result<usize, SvmError> {
        let predicted = self.classify(points)?;
        Ok(predicted
            .iter()
            .zip(labels)
            .filter(|(p, l)| *p != *l)
            .count())
    }
}

pub fn train_smo(points: &Matrix, labels: &[f64], params: &SmoParams) -> Result<SvmModel, SvmError> {
    let m = points.rows();
    if m != labels.len() {
        return Err(SvmError::ShapeMismatch {
            points: m,
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
        return Err(SvmError::BadLabel(bad));
    }
    if !labels.iter().any(|&l| l > 0.0) || !labels.iter().any(|&l| l < 0.0) {
        return Err(SvmError::SingleClass);
    }

    let c = params.c;
    let tol = params.tol;
    // Kernel matrix; row computation parallelizes over rows.
    let kernel_rows: Vec<Vec<f64>> = map_indexed(m, |i| {
        let xi = points.row(i);
        (0..m).map(|j| params.kernel.eval(xi, points.row(j))).collect()
    });

    let mut alpha = vec![0.0f64; m];
    // grad_i = ∇_i of the dual objective = y_i·F_i − 1; starts at −1.
    let mut grad = vec![-1.0f64; m];
    let max_iter = if params.max_iter == 0 {
        (10 * m).max(2000)
    } else {
        params.max_iter
    };

    let mut iterations = 0usize;
    let (m_val, big_m_val) = loop {
        // Maximal violating pair: i maximizes y−F over I_up, j minimizes
        // it over I_low (y−F = −y·grad).
        let mut i_best: Option<(usize, f64)> = None;
        let mut j_best: Option<(usize, f64)> = None;
        for t in 0..m {
            let yf = -labels[t] * grad[t];
            let in_up = (labels[t] > 0.0 && alpha[t] < c) || (labels[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (labels[t] > 0.0 && alpha[t] > 0.0) || (labels[t] < 0.0 && alpha[t] < c);
            if in_up && i_best.is_none_or(|(_, best)| yf > best) {
                i_best = Some((t, yf));
            }
            if in_low && j_best.is_none_or(|(_, best)| yf < best) {
                j_best = Some((t, yf));
            }
        }
        let (Some((i, m_val)), Some((j, big_m_val))) = (i_best, j_best) else {
            // One side is empty: every α is pinned at a bound feasibly.
            break (0.0, 0.0);
        };
        if m_val - big_m_val < tol {
            break (m_val, big_m_val);
        }
        if iterations >= max_iter {
            let violating = count_kkt_violations_internal(&alpha, &grad, labels, c, tol);
            return Err(SvmError::SolverStalled {
                iterations,
                violating,
            });
        }
        iterations += 1;

        // Two-variable analytic step along α_i += y_i·t, α_j −= y_j·t.
        let eta = (kernel_rows[i][i] + kernel_rows[j][j] - 2.0 * kernel_rows[i][j]).max(1e-12);
        let mut step = (m_val - big_m_val) / eta;
        let room_i = if labels[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if labels[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        step = step.min(room_i).min(room_j);
        alpha[i] += labels[i] * step;
        alpha[j] -= labels[j] * step;

        // grad_t += y_t·step·(K_ti − K_tj); each element is independent.
        let ki = &kernel_rows[i];
        let kj = &kernel_rows[j];
        for_each_row_mut(&mut grad, 1, |t, g| {
            g[0] += labels[t] * step * (ki[t] - kj[t]);
        });
    };

    // Bias from the final optimality interval midpoint: every free SV
    // has y − F within [M, m] of width < tol.
    let bias = (m_val + big_m_val) / 2.0;

    let keep: Vec<usize> = (0..m).filter(|&i| alpha[i] > 1e-12).collect();
    let support_vectors = points.select_rows(&keep);
    let coef: Vec<f64> = keep.iter().map(|&i| alpha[i] * labels[i]).collect();
    Ok(SvmModel {
        support_vectors,
        coef,
        bias,
        kernel: params.kernel,
        c,
    })
}

fn count_kkt_violations_internal(
    alpha: &[f64],
    grad: &[f64],
    labels: &[f64],
    c: f64,
    tol: f64,
) -> usize {
    // Violation relative to the current bias estimate.
    let m = alpha.len();
    let mut m_val = f64::NEG_INFINITY;
    let mut big_m = f64::INFINITY;
    for t in 0..m {
        let yf = -labels[t] * grad[t];
        if (labels[t] > 0.0 && alpha[t] < c) || (labels[t] < 0.0 && alpha[t] > 0.0) {
            m_val = m_val.max(yf);
        }
        if (labels[t] > 0.0 && alpha[t] > 0.0) || (labels[t] < 0.0 && alpha[t] < c) {
            big_m = big_m.min(yf);
        }
    }
    let b = (m_val + big_m) / 2.0;
    (0..m)
        .filter(|&t| {
            // y_t(F_t + b) − 1, with F_t = y_t·grad_t + y_t... derived:
            // y−F = −y·grad  ⇒  y(F+b) − 1 = y·b − (y−F)·1... keep it
            // direct: margin = y_t·F_t + y_t·b where y_t·F_t = grad_t + 1.
            let margin = grad[t] + 1.0 + labels[t] * b;
            if alpha[t] <= 1e-12 {
                margin < 1.0 - tol
            } else if alpha[t] >= c - 1e-12 {
                margin > 1.0 + tol
            } else {
                (margin - 1.0).abs() > tol
            }
        })
        .count()
}

/// KKT check of an already-trained model against labeled points.
///
/// Points are matched to support vectors bit-exactly (they are copies of
/// training rows, so exact float comparison is sound): matched rows use
/// the bounded/free conditions, unmatched rows must satisfy the α = 0
/// condition y·f ≥ 1 − tol.
pub fn kkt_violations(
    model: &SvmModel,
    points: &Matrix,
    labels: &[f64],
    tol: f64,
) -> Result<usize, SvmError> {
    use std::collections::HashMap;
    let mut sv_alpha: HashMap<Vec<u64>, f64> = HashMap::new();
    for (sv, &coef) in model.support_vectors.iter_rows().zip(&model.coef) {
        let key: Vec<u64> = sv.iter().map(|x| x.to_bits()).collect();
        *sv_alpha.entry(key).or_insert(0.0) += coef.abs();
    }
    let mut violations = 0usize;
    for (row, &label) in points.iter_rows().zip(labels) {
        let margin = label * self_decision(model, row)?;
        let key: Vec<u64> = row.iter().map(|x| x.to_bits()).collect();
        let violated = match sv_alpha.get(&key) {
            None => margin < 1.0 - tol,
            Some(&a) if a >= model.c * (1.0 - 1e-9) => margin > 1.0 + tol,
            Some(_) => (margin - 1.0).abs() > tol,
        };
        if violated {
            violations += 1;
        }
    }
    Ok(violations)
}

fn self_decision(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    model.decision(x)
}
