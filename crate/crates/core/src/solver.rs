//! Adaptive-weight L1-regularized least squares in Gram form.
//!
//! The criterion is
//!
//! ```text
//! J(β) = Σ_k (y_{k+1} − βᵀφ_k)² + λ Σ_l w_l |β_l|
//!      = y_sq − 2βᵀc + βᵀGβ + λ Σ_l w_l |β_l|
//! ```
//!
//! with plain (not halved) squared residuals, so the smooth part has
//! gradient `2(Gβ − c)` and the scalar soft threshold is `λ w_l / 2`.
//! Cyclic coordinate descent with exact soft-threshold updates stores
//! thresholded coordinates as exactly `0.0`, which is what makes the
//! zero-index set well defined without a tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::linalg::{self, Matrix};

pub const DEFAULT_WEIGHT_CAP: f64 = 1e12;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLassoProblem {
    gram: Matrix,
    cross: Vec<f64>,
    y_sq: f64,
    weights: Vec<f64>,
    lambda: f64,
}

impl WeightedLassoProblem {
    pub fn new(
        gram: Matrix,
        cross: Vec<f64>,
        y_sq: f64,
        weights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let r = cross.len();
        if !gram.is_square() || gram.rows() != r {
            return Err(SysIdError::DimensionMismatch {
                expected: r,
                got: gram.rows(),
            });
        }
        if weights.len() != r {
            return Err(SysIdError::DimensionMismatch {
                expected: r,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(SysIdError::InvalidArgument(
                "weights must be finite and positive".into(),
            ));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(SysIdError::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if gram.as_slice().iter().any(|v| !v.is_finite())
            || cross.iter().any(|v| !v.is_finite())
            || !y_sq.is_finite()
        {
            return Err(SysIdError::NonFinite("lasso problem"));
        }
        let asym = gram.relative_asymmetry();
        if asym > 1e-10 {
            return Err(SysIdError::Asymmetric(asym));
        }
        if gram.diag().iter().any(|&d| d < 0.0) {
            return Err(SysIdError::InvalidArgument(
                "Gram diagonal must be nonnegative".into(),
            ));
        }
        Ok(Self {
            gram,
            cross,
            y_sq,
            weights,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.cross.len()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn cross(&self) -> &[f64] {
        &self.cross
    }

    pub fn y_sq(&self) -> f64 {
        self.y_sq
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `2(Gβ − c)`
    fn smooth_gradient(&self, beta: &[f64]) -> Vec<f64> {
        self.gram
            .mul_vec(beta)
            .iter()
            .zip(&self.cross)
            .map(|(gb, c)| 2.0 * (gb - c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Completed coordinate-descent sweeps.
    pub iterations: usize,
    pub converged: bool,
}

/// Weights `1/|θ̂_l|`, clamped above by `cap`.
///
/// Returns the weights and whether the clamp engaged anywhere.
pub fn adaptive_weights(modified: &[f64], cap: f64) -> Result<(Vec<f64>, bool)> {
    let mut clamped = false;
    let mut weights = Vec::with_capacity(modified.len());
    for (l, &m) in modified.iter().enumerate() {
        if m == 0.0 {
            return Err(SysIdError::InvalidArgument(format!(
                "modified estimate is zero at coordinate {}",
                l + 1
            )));
        }
        if !m.is_finite() {
            return Err(SysIdError::NonFinite("modified estimate"));
        }
        let w = 1.0 / m.abs();
        if w > cap {
            clamped = true;
            weights.push(cap);
        } else {
            weights.push(w);
        }
    }
    Ok((weights, clamped))
}

/// `y_sq − 2βᵀc + βᵀGβ + λ Σ w_l |β_l|`
pub fn objective_value(problem: &WeightedLassoProblem, beta: &[f64]) -> f64 {
    assert_eq!(beta.len(), problem.dim());
    let fit = problem.y_sq - 2.0 * linalg::dot(beta, &problem.cross) + problem.gram.quad_form(beta);
    let penalty: f64 = beta
        .iter()
        .zip(&problem.weights)
        .map(|(b, w)| w * b.abs())
        .sum();
    fit + problem.lambda * penalty
}

/// Worst subgradient-optimality violation at `beta`.
pub fn kkt_residual(problem: &WeightedLassoProblem, beta: &[f64]) -> f64 {
    let grad = problem.smooth_gradient(beta);
    grad.iter()
        .zip(beta)
        .zip(&problem.weights)
        .map(|((&g, &b), &w)| {
            let tau = problem.lambda * w;
            if b != 0.0 {
                (g + tau * b.signum()).abs()
            } else {
                (g.abs() - tau).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `sgn(z) · max(|z| − τ, 0)`; exactly zero whenever `|z| ≤ τ`.
pub fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z.abs() <= tau {
        0.0
    } else {
        z.signum() * (z.abs() - tau)
    }
}

pub fn solve_weighted_lasso(
    problem: &WeightedLassoProblem,
    options: SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<LassoSolution> {
    solve_inner(problem, options, warm_start, None)
}

/// Same as [`solve_weighted_lasso`], also returning the objective after
/// every sweep.
pub fn solve_weighted_lasso_traced(
    problem: &WeightedLassoProblem,
    options: SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<(LassoSolution, Vec<f64>)> {
    let mut trace = Vec::new();
    let sol = solve_inner(problem, options, warm_start, Some(&mut trace))?;
    Ok((sol, trace))
}

fn solve_inner(
    problem: &WeightedLassoProblem,
    options: SolverOptions,
    warm_start: Option<&[f64]>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LassoSolution> {
    if !(options.tol > 0.0) {
        return Err(SysIdError::InvalidArgument("tol must be positive".into()));
    }
    let r = problem.dim();
    let gram = &problem.gram;
    for l in 0..r {
        if gram[(l, l)] == 0.0 && problem.cross[l] != 0.0 {
            return Err(SysIdError::Unidentifiable(l + 1));
        }
    }

    let mut beta = match warm_start {
        Some(w) if w.len() == r && w.iter().all(|v| v.is_finite()) => w.to_vec(),
        Some(w) if w.len() != r => {
            return Err(SysIdError::DimensionMismatch {
                expected: r,
                got: w.len(),
            })
        }
        _ => vec![0.0; r],
    };
    for l in 0..r {
        if gram[(l, l)] == 0.0 {
            beta[l] = 0.0;
        }
    }
    let thresholds: Vec<f64> = problem
        .weights
        .iter()
        .map(|w| 0.5 * problem.lambda * w)
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iters {
        // recomputed each sweep so rounding in the incremental update cannot drift
        let mut g_beta = gram.mul_vec(&beta);
        let mut max_change = 0.0f64;
        for l in 0..r {
            let gll = gram[(l, l)];
            if gll == 0.0 {
                continue;
            }
            let old = beta[l];
            let z = problem.cross[l] - (g_beta[l] - gll * old);
            let new = soft_threshold(z, thresholds[l]) / gll;
            if new != old {
                let delta = new - old;
                for (m, gb) in g_beta.iter_mut().enumerate() {
                    *gb += gram[(m, l)] * delta;
                }
                beta[l] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective_value(problem, &beta));
        }
        if max_change <= options.tol * (1.0 + linalg::norm_inf(&beta)) {
            converged = true;
            break;
        }
    }

    Ok(LassoSolution {
        objective: objective_value(problem, &beta),
        kkt_residual: kkt_residual(problem, &beta),
        beta,
        iterations,
        converged,
    })
}

/// 1-based indices of the exactly-zero coordinates.
pub fn support_set(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, &b)| b == 0.0)
        .map(|(j, _)| j + 1)
        .collect()
}
