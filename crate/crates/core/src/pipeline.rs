//! The two-step identifier: least squares, eigenvalue-bumped modification,
//! then the adaptive-weight L1 refinement, evaluated at checkpoints.

use serde::{Deserialize, Serialize};

use crate::diagnostics::LambdaSchedule;
use crate::error::{Result, SysIdError};
use crate::estimation::{self, EstimateBundle, GramState, DEFAULT_RIDGE_FLOOR};
use crate::hammerstein::Dataset;
use crate::solver::{self, SolverOptions, WeightedLassoProblem, DEFAULT_WEIGHT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub ridge_floor: f64,
    pub weight_cap: f64,
    /// Start each solve from the previous checkpoint's solution.
    pub warm_start: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            ridge_floor: DEFAULT_RIDGE_FLOOR,
            weight_cap: DEFAULT_WEIGHT_CAP,
            warm_start: true,
        }
    }
}

/// Accumulates observations and produces estimate bundles on demand.
#[derive(Debug, Clone)]
pub struct SparseIdentifier {
    gram: GramState,
    schedule: LambdaSchedule,
    options: PipelineOptions,
    previous: Option<Vec<f64>>,
    weight_clamps: usize,
}

impl SparseIdentifier {
    pub fn new(dim: usize, schedule: LambdaSchedule, options: PipelineOptions) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            gram: GramState::new(dim),
            schedule,
            options,
            previous: None,
            weight_clamps: 0,
        })
    }

    pub fn observe(&mut self, phi: &[f64], y: f64) -> Result<()> {
        self.gram.accumulate(phi, y)
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    pub fn schedule(&self) -> LambdaSchedule {
        self.schedule
    }

    /// How many estimates had a weight clamped at `weight_cap`.
    pub fn weight_clamps(&self) -> usize {
        self.weight_clamps
    }

    /// Full pipeline at the current sample size.
    ///
    /// Fails with `ModifiedUnavailable` while `λ_min ≤ 0` or `λ_max ≤ 1`.
    pub fn estimate(&mut self) -> Result<EstimateBundle> {
        let n = self.gram.count();
        let ls = estimation::ls_estimate(&self.gram, self.options.ridge_floor)?;
        let modified = estimation::modified_estimate(&ls.theta, &ls.eig)?;
        let lambda_n = self.schedule.value(n, ls.eig.lambda_min)?;
        let (weights, clamped) = solver::adaptive_weights(&modified, self.options.weight_cap)?;
        if clamped {
            self.weight_clamps += 1;
        }
        let problem = WeightedLassoProblem::new(
            self.gram.gram().clone(),
            self.gram.cross().to_vec(),
            self.gram.y_sq(),
            weights,
            lambda_n,
        )?;
        let warm = if self.options.warm_start {
            self.previous.as_deref()
        } else {
            None
        };
        let sol = solver::solve_weighted_lasso(&problem, self.options.solver, warm)?;
        self.previous = Some(sol.beta.clone());
        Ok(EstimateBundle {
            support_zero: solver::support_set(&sol.beta),
            ls: ls.theta,
            modified,
            sparse: sol.beta,
            n,
            lambda_n,
            eig: ls.eig,
            ls_regularized: ls.regularized,
            kkt_residual: sol.kkt_residual,
            converged: sol.converged,
        })
    }
}

/// Result of the pipeline at one checkpoint `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub outcome: std::result::Result<EstimateBundle, String>,
}

impl Checkpoint {
    pub fn bundle(&self) -> Option<&EstimateBundle> {
        self.outcome.as_ref().ok()
    }
}

/// Runs the identifier over a dataset, estimating after the `N`-th pair for
/// every `N` in `checkpoints` (ascending, each at most `dataset.len()`).
pub fn identify_offline(
    dataset: &Dataset,
    schedule: LambdaSchedule,
    options: PipelineOptions,
    checkpoints: &[usize],
) -> Result<Vec<Checkpoint>> {
    validate_checkpoints(checkpoints, dataset.len())?;
    let mut ident = SparseIdentifier::new(dataset.dim(), schedule, options)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (i, (phi, &y)) in dataset.regressors.iter().zip(&dataset.outputs).enumerate() {
        ident.observe(phi, y)?;
        while next.peek() == Some(&&(i + 1)) {
            let n = *next.next().unwrap();
            out.push(Checkpoint {
                n,
                outcome: ident.estimate().map_err(|e| e.to_string()),
            });
        }
        if next.peek().is_none() {
            break;
        }
    }
    Ok(out)
}

pub fn validate_checkpoints(checkpoints: &[usize], max: usize) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(SysIdError::InvalidArgument(
            "checkpoint schedule is empty".into(),
        ));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SysIdError::InvalidArgument(
            "checkpoints must be positive and strictly increasing".into(),
        ));
    }
    if *checkpoints.last().unwrap() > max {
        return Err(SysIdError::InvalidArgument(format!(
            "checkpoint {} exceeds available {max} observations",
            checkpoints.last().unwrap()
        )));
    }
    Ok(())
}
