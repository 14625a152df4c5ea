//! Sufficient statistics and the least-squares side of the identifier.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::linalg::{self, Matrix};

/// Default relative ridge applied while the Gram matrix is not yet full rank.
pub const DEFAULT_RIDGE_FLOOR: f64 = 1e-10;

/// Running sums `Σ φφᵀ`, `Σ φy`, `Σ y²` over accumulated pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramState {
    dim: usize,
    gram: Matrix,
    cross: Vec<f64>,
    y_sq: f64,
    count: usize,
}

impl GramState {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            gram: Matrix::zeros(dim, dim),
            cross: vec![0.0; dim],
            y_sq: 0.0,
            count: 0,
        }
    }

    /// Adds one observation pair `(φ_k, y_{k+1})`.
    pub fn accumulate(&mut self, phi: &[f64], y: f64) -> Result<()> {
        if phi.len() != self.dim {
            return Err(SysIdError::DimensionMismatch {
                expected: self.dim,
                got: phi.len(),
            });
        }
        if !y.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(SysIdError::NonFinite("observation"));
        }
        self.gram.add_outer(phi, 1.0);
        for (c, &p) in self.cross.iter_mut().zip(phi) {
            *c += p * y;
        }
        self.y_sq += y * y;
        self.count += 1;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn count(&self) -> usize {
        self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenExtremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Smallest and largest eigenvalue of a symmetric matrix (cyclic Jacobi).
pub fn eigen_extremes(matrix: &Matrix) -> Result<EigenExtremes> {
    let eig = linalg::jacobi_eigen(matrix)?;
    let n = eig.values.len();
    if n == 0 {
        return Err(SysIdError::Empty);
    }
    Ok(EigenExtremes {
        lambda_min: eig.values[0],
        lambda_max: eig.values[n - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub theta: Vec<f64>,
    /// The ridge floor was engaged because the Gram matrix was not yet
    /// numerically full rank.
    pub regularized: bool,
    pub eig: EigenExtremes,
}

/// Least-squares solution of `gram · θ = cross`.
///
/// If `λ_min(gram) < ridge_floor · trace/r` the system is shifted by that
/// amount times the identity and the result is flagged as regularized.
pub fn ls_estimate(state: &GramState, ridge_floor: f64) -> Result<LsEstimate> {
    if state.count == 0 {
        return Err(SysIdError::Empty);
    }
    let eig = eigen_extremes(&state.gram)?;
    let shift = ridge_floor * state.gram.trace() / state.dim as f64;
    let regularized = eig.lambda_min < shift;
    let theta = if regularized {
        let mut shifted = state.gram.clone();
        for i in 0..state.dim {
            shifted[(i, i)] += shift;
        }
        linalg::spd_solve(&shifted, &state.cross)?
    } else {
        linalg::spd_solve(&state.gram, &state.cross)?
    };
    Ok(LsEstimate {
        theta,
        regularized,
        eig,
    })
}

/// Sign with `sgn(0) = +1`.
pub fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Magnitude of the bump added to every LS coordinate: `sqrt(log λ_max / λ_min)`.
pub fn modification_bump(eig: &EigenExtremes) -> Result<f64> {
    if !(eig.lambda_min > 0.0) {
        return Err(SysIdError::ModifiedUnavailable(format!(
            "lambda_min = {:e} is not positive",
            eig.lambda_min
        )));
    }
    if !(eig.lambda_max > 1.0) {
        return Err(SysIdError::ModifiedUnavailable(format!(
            "lambda_max = {:e} does not exceed 1",
            eig.lambda_max
        )));
    }
    Ok((eig.lambda_max.ln() / eig.lambda_min).sqrt())
}

/// Pushes every LS coordinate away from zero by `sqrt(log λ_max / λ_min)`,
/// in the direction of its sign.
pub fn modified_estimate(ls: &[f64], eig: &EigenExtremes) -> Result<Vec<f64>> {
    let bump = modification_bump(eig)?;
    Ok(ls.iter().map(|&t| t + sgn(t) * bump).collect())
}

/// LS, modified and sparse estimates at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub ls: Vec<f64>,
    pub modified: Vec<f64>,
    pub sparse: Vec<f64>,
    /// 1-based indices where `sparse` is exactly zero.
    pub support_zero: Vec<usize>,
    pub n: usize,
    pub lambda_n: f64,
    pub eig: EigenExtremes,
    pub ls_regularized: bool,
    pub kkt_residual: f64,
    pub converged: bool,
}
