//! Regularization schedules and finite-sample assumption diagnostics.
//!
//! The eigenvalue conditions the identifier relies on are almost-sure
//! limits. Nothing here passes or fails a run; the ratios are exposed so
//! their trend over `N` can be inspected.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::estimation::{sgn, EigenExtremes};
use crate::linalg::{self, Matrix};

pub const DEFAULT_ETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `λ_N = N^a`, `a ∈ (0, 1)`.
    PowerOfN { exponent: f64 },
    /// `λ_N = λ_min(N)^(1/2 + ε)`, `ε ∈ (0, 1/2)`.
    PowerOfLambdaMin { epsilon: f64 },
}

impl LambdaSchedule {
    pub fn power_of_n(exponent: f64) -> Result<Self> {
        let s = Self::PowerOfN { exponent };
        s.validate()?;
        Ok(s)
    }

    pub fn power_of_lambda_min(epsilon: f64) -> Result<Self> {
        let s = Self::PowerOfLambdaMin { epsilon };
        s.validate()?;
        Ok(s)
    }

    /// Exponent `1 − (3/2)·ε̄(t+1)` for a closed loop with dither decay `ε̄`.
    pub fn closed_loop(epsilon_bar: f64, t: usize) -> Result<Self> {
        Self::power_of_n(1.0 - 1.5 * epsilon_bar * (t as f64 + 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::PowerOfN { exponent } if !(exponent > 0.0 && exponent < 1.0) => {
                Err(SysIdError::InvalidArgument(format!(
                    "power_of_n exponent must lie in (0, 1), got {exponent}"
                )))
            }
            Self::PowerOfLambdaMin { epsilon } if !(epsilon > 0.0 && epsilon < 0.5) => {
                Err(SysIdError::InvalidArgument(format!(
                    "power_of_lambda_min epsilon must lie in (0, 1/2), got {epsilon}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, n: usize, lambda_min: f64) -> Result<f64> {
        if n == 0 {
            return Err(SysIdError::InvalidArgument("N must be at least 1".into()));
        }
        match *self {
            Self::PowerOfN { exponent } => Ok((n as f64).powf(exponent)),
            Self::PowerOfLambdaMin { epsilon } => {
                if !(lambda_min > 0.0) {
                    return Err(SysIdError::InvalidArgument(format!(
                        "lambda_min must be positive, got {lambda_min:e}"
                    )));
                }
                Ok(lambda_min.powf(0.5 + epsilon))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n: usize,
    /// `(λ_max/λ_min)·sqrt(log λ_max / λ_min)`
    pub a3_ratio: f64,
    /// `λ_N / λ_min`
    pub a4_ratio_1: f64,
    /// `λ_max·sqrt(log λ_max / λ_min) / λ_N`
    pub a4_ratio_2: f64,
}

pub fn assumption_report(eig: &EigenExtremes, lambda_n: f64, n: usize) -> Result<AssumptionReport> {
    let EigenExtremes {
        lambda_min,
        lambda_max,
    } = *eig;
    if !(lambda_min > 0.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "lambda_min = {lambda_min:e} is not positive"
        )));
    }
    if !(lambda_max > 1.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "lambda_max = {lambda_max:e} does not exceed 1"
        )));
    }
    if !(lambda_n > 0.0) {
        return Err(SysIdError::InvalidArgument(format!(
            "lambda_N = {lambda_n:e} is not positive"
        )));
    }
    let root = (lambda_max.ln() / lambda_min).sqrt();
    Ok(AssumptionReport {
        n,
        a3_ratio: lambda_max / lambda_min * root,
        a4_ratio_1: lambda_n / lambda_min,
        a4_ratio_2: lambda_max * root / lambda_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrrepresentableResult {
    pub passes: bool,
    pub max_violation: f64,
}

/// Strong irrepresentable condition on `C = gram / n`:
/// `|C²¹ (C¹¹)⁻¹ sgn(θ₁)| ≤ 1 − η` element-wise.
///
/// `support` holds 1-based indices of the nonzero block; `theta_signs`
/// has one entry per support index, in the same order.
pub fn irrepresentable_check(
    gram: &Matrix,
    n: usize,
    support: &[usize],
    theta_signs: &[f64],
    eta: f64,
) -> Result<IrrepresentableResult> {
    let r = gram.rows();
    if support.is_empty() || support.len() >= r {
        return Err(SysIdError::InvalidArgument(
            "support must be a nonempty proper subset".into(),
        ));
    }
    if theta_signs.len() != support.len() {
        return Err(SysIdError::DimensionMismatch {
            expected: support.len(),
            got: theta_signs.len(),
        });
    }
    if n == 0 {
        return Err(SysIdError::Empty);
    }
    let inside: Vec<usize> = support.iter().map(|&j| j - 1).collect();
    if inside.iter().any(|&j| j >= r) {
        return Err(SysIdError::InvalidArgument(
            "support index out of range".into(),
        ));
    }
    let outside: Vec<usize> = (0..r).filter(|j| !inside.contains(j)).collect();

    let scale = 1.0 / n as f64;
    let c11 = gram.select(&inside, &inside).scaled(scale);
    let c21 = gram.select(&outside, &inside).scaled(scale);
    let signs: Vec<f64> = theta_signs.iter().map(|&s| sgn(s)).collect();
    let x = linalg::spd_solve(&c11, &signs)
        .map_err(|_| SysIdError::Singular("C11 block is not invertible".into()))?;
    let v = c21.mul_vec(&x);
    let max_violation = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(IrrepresentableResult {
        passes: max_violation <= 1.0 - eta,
        max_violation,
    })
}
