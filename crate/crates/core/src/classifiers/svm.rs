//! Soft-margin SVM with per-class box constraints.
//!
//! Dual problem, with `Q_ij = y_i y_j K(x_i, x_j)` and `y` in {-1, +1}:
//!
//! ```text
//! min_a  0.5 a'Qa - sum(a)
//! s.t.   0 <= a_i <= C * w(y_i),   sum(a_i y_i) = 0
//! ```
//!
//! Solved by pairwise working-set updates. The pair is the maximal violator
//! `i` and the partner `j` giving the largest second-order decrease. No
//! shrinking. The stopping residual is `m(a) - M(a)`, the gap between the
//! largest and smallest `-y_t G_t` over the up and low index sets.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::weights::{require_both_classes, ClassWeights};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

const TAU: f64 = 1e-12;
/// Fresh-gradient restarts allowed when the accumulated gradient drifted.
const MAX_REFRESH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision offset; `f(x) = sum(a_i y_i K(x_i, x)) - rho`.
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[inline]
fn in_up(y: f64, a: f64, ub: f64) -> bool {
    if y > 0.0 {
        a < ub
    } else {
        a > 0.0
    }
}

#[inline]
fn in_low(y: f64, a: f64, ub: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < ub
    }
}

fn full_gradient(k: ArrayView2<f64>, y: &[f64], alpha: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut grad = vec![-1.0; n];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj != 0.0 {
            let col = k.row(j);
            let s = aj * y[j];
            for t in 0..n {
                grad[t] += y[t] * s * col[t];
            }
        }
    }
    grad
}

/// `m(a) - M(a)`; zero or negative means the KKT conditions hold exactly.
pub fn kkt_residual(y: &[f64], upper: &[f64], alpha: &[f64], grad: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    let mut big_m = f64::INFINITY;
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if in_up(y[t], alpha[t], upper[t]) {
            m = m.max(v);
        }
        if in_low(y[t], alpha[t], upper[t]) {
            big_m = big_m.min(v);
        }
    }
    if m == f64::NEG_INFINITY || big_m == f64::INFINITY {
        0.0
    } else {
        m - big_m
    }
}

/// `0.5 a'Qa - sum(a)` for a given kernel matrix.
pub fn dual_objective(k: ArrayView2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let grad = full_gradient(k, y, alpha);
    // G = Qa - 1  =>  0.5 a'Qa - 1'a = 0.5 a'(G - 1)
    alpha
        .iter()
        .zip(&grad)
        .map(|(a, g)| 0.5 * a * (g - 1.0))
        .sum()
}

fn compute_rho(y: &[f64], upper: &[f64], alpha: &[f64], grad: &[f64]) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= upper[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Solves the box-constrained dual for a precomputed kernel matrix.
///
/// `y` holds -1/+1 and `upper` the per-sample box `C * w(y_i)`.
pub fn solve_dual(
    k: ArrayView2<f64>,
    y: &[f64],
    upper: &[f64],
    settings: SolverSettings,
) -> Result<DualSolution> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    if upper.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: upper.len(),
        });
    }
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidParams(format!("tol must be positive, got {}", settings.tol)));
    }

    let diag: Vec<f64> = (0..n).map(|t| k[[t, t]]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0usize;
    let mut refreshes = 0usize;

    let residual = loop {
        // maximal violating index i
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(y[t], alpha[t], upper[t]) {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // second-order choice of j
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            let ki = k.row(i);
            for t in 0..n {
                if in_low(y[t], alpha[t], upper[t]) {
                    let v = y[t] * grad[t];
                    gmax2 = gmax2.max(v);
                    let b = gmax + v;
                    if b > 0.0 {
                        let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                        if a <= 0.0 {
                            a = TAU;
                        }
                        let obj = -(b * b) / a;
                        if obj <= best {
                            best = obj;
                            j = t;
                        }
                    }
                }
            }
        }
        let gap = if i == usize::MAX || gmax2 == f64::NEG_INFINITY {
            0.0
        } else {
            gmax + gmax2
        };
        if gap < settings.tol || j == usize::MAX {
            // confirm on a freshly accumulated gradient before accepting
            let fresh = full_gradient(k, y, &alpha);
            let r = kkt_residual(y, upper, &alpha, &fresh);
            grad = fresh;
            if r < settings.tol {
                break r;
            }
            if refreshes >= MAX_REFRESH {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: r,
                });
            }
            refreshes += 1;
            continue;
        }
        if iterations >= settings.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: gap,
            });
        }
        iterations += 1;

        let (ci, cj) = (upper[i], upper[j]);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let kij = k[[i, j]];
        let mut quad = diag[i] + diag[j] - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_ai) * y[i];
        let dj = (alpha[j] - old_aj) * y[j];
        let (ki, kj) = (k.row(i), k.row(j));
        for t in 0..n {
            grad[t] += y[t] * (di * ki[t] + dj * kj[t]);
        }
    };

    let rho = compute_rho(y, upper, &alpha, &grad);
    let objective = alpha
        .iter()
        .zip(&grad)
        .map(|(a, g)| 0.5 * a * (g - 1.0))
        .sum();
    Ok(DualSolution {
        alpha,
        rho,
        objective,
        iterations,
        residual,
    })
}

pub(crate) fn signed_labels(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect()
}

pub(crate) fn box_bounds(labels: &[u8], c: f64, weights: &ClassWeights) -> Vec<f64> {
    labels.iter().map(|&l| c * weights.get(l)).collect()
}

/// Maps a decision value to a class; exactly 0 goes to class 1.
#[inline]
pub fn decision_to_class(value: f64) -> u8 {
    if value >= 0.0 {
        1
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub weights: ClassWeights,
    /// `a_i y_i` for every support vector.
    pub support_coefficients: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub bias: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub(crate) fn from_solution(
        x: ArrayView2<f64>,
        y: &[f64],
        kernel: Kernel,
        c: f64,
        weights: ClassWeights,
        sol: &DualSolution,
    ) -> Self {
        let mut support_coefficients = Vec::new();
        let mut support_vectors = Vec::new();
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_coefficients.push(a * y[t]);
                support_vectors.push(x.row(t).to_vec());
            }
        }
        Self {
            kernel,
            c,
            weights,
            support_coefficients,
            support_vectors,
            bias: -sol.rho,
            dual_objective: sol.objective,
            iterations: sol.iterations,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    pub fn decision_function(&self, x: ArrayView1<f64>) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: x.len(),
                });
            }
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.support_coefficients)
            .map(|(sv, &coef)| coef * self.kernel.eval(ArrayView1::from(&sv[..]), x))
            .sum();
        Ok(sum + self.bias)
    }

    pub fn decision_values(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.decision_function(r)).collect()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        Ok(self
            .decision_values(x)?
            .into_iter()
            .map(decision_to_class)
            .collect())
    }
}

fn validate_inputs(x: ArrayView2<f64>, labels: &[u8], kernel: Kernel, c: f64) -> Result<()> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: labels.len(),
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParams("labels must be 0 or 1".into()));
    }
    require_both_classes(labels)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!("C must be positive, got {c}")));
    }
    if let Kernel::Rbf { gamma } = kernel {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
    }
    Ok(())
}

/// Fits from a kernel matrix that was already computed for `x`.
pub(crate) fn fit_with_kernel_matrix(
    x: ArrayView2<f64>,
    k: ArrayView2<f64>,
    labels: &[u8],
    kernel: Kernel,
    c: f64,
    weights: &ClassWeights,
    settings: SolverSettings,
) -> Result<(SvmModel, DualSolution)> {
    validate_inputs(x, labels, kernel, c)?;
    let y = signed_labels(labels);
    let upper = box_bounds(labels, c, weights);
    let sol = solve_dual(k, &y, &upper, settings)?;
    let model = SvmModel::from_solution(x, &y, kernel, c, *weights, &sol);
    Ok((model, sol))
}

pub fn train_svm(
    x: ArrayView2<f64>,
    labels: &[u8],
    kernel: Kernel,
    c: f64,
    weights: &ClassWeights,
    settings: SolverSettings,
) -> Result<SvmModel> {
    validate_inputs(x, labels, kernel, c)?;
    let k = kernel.matrix(x);
    fit_with_kernel_matrix(x, k.view(), labels, kernel, c, weights, settings).map(|(m, _)| m)
}
