//! Seeded Monte Carlo experiments, assumption diagnostics and artifact output.
//!
//! Artifacts written to `output_dir` (prefix `example1`, `example2` or `custom`):
//!
//! | file | columns |
//! |---|---|
//! | `<prefix>_seed<s>_checkpoints.csv` | `N,coord_index,ls,modified,sparse,in_support_zero` |
//! | `<prefix>_seed<s>_diagnostics.csv` | see [`DiagnosticRow`] |
//! | `<prefix>_seed<s>_run.csv` (closed loop) | `k,y,y_star,u0,u,dither_scale,tracking_loss` |
//! | `<prefix>_comparison.csv` | `seed,N,coord_index,label,ls,sparse` over the true zero set |
//! | `<prefix>_summary.json` | [`SummaryReport`] |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, LambdaSchedule, DEFAULT_ETA};
use crate::error::{Result, SysIdError};
use crate::estimation::{self, sgn};
use crate::hammerstein::{fmt_f64, simulate_hammerstein, Dataset, HammersteinSpec};
use crate::pipeline::{validate_checkpoints, Checkpoint, PipelineOptions, SparseIdentifier};
use crate::solver::SolverOptions;
use crate::str_loop::{run_str, RunRecord, StrConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Example1,
    Example2,
    Custom,
}

impl ExperimentKind {
    pub fn prefix(&self) -> &'static str {
        match self {
            ExperimentKind::Example1 => "example1",
            ExperimentKind::Example2 => "example2",
            ExperimentKind::Custom => "custom",
        }
    }
}

/// Experiment description, usually read from JSON. Every field except
/// `experiment` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Number of identification pairs `N`.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Defaults to every 100 pairs up to `horizon`.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    /// Defaults to `N^0.75` (example1) or the closed-loop exponent (example2).
    #[serde(default)]
    pub lambda_schedule: Option<LambdaSchedule>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Open-loop plant for `custom`.
    #[serde(default)]
    pub hammerstein: Option<HammersteinSpec>,
    /// Closed-loop setup for `custom`; takes precedence over `hammerstein`.
    #[serde(default)]
    pub closed_loop: Option<StrConfig>,
    /// Existing dataset for `estimate` and `diagnose`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Margin of the irrepresentable check.
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

fn default_horizon() -> usize {
    3000
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seeds: default_seeds(),
            horizon: default_horizon(),
            checkpoints: None,
            lambda_schedule: None,
            solver: SolverOptions::default(),
            output_dir: None,
            hammerstein: None,
            closed_loop: None,
            dataset: None,
            eta: DEFAULT_ETA,
        }
    }

    pub fn checkpoint_schedule(&self) -> Vec<usize> {
        match &self.checkpoints {
            Some(c) => c.clone(),
            None => {
                let mut c: Vec<usize> = (1..=self.horizon / 100).map(|i| 100 * i).collect();
                if c.last() != Some(&self.horizon) {
                    c.push(self.horizon);
                }
                c
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(SysIdError::InvalidArgument("seed list is empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(SysIdError::InvalidArgument("seeds must be distinct".into()));
        }
        validate_checkpoints(&self.checkpoint_schedule(), self.horizon)?;
        if let Some(s) = &self.lambda_schedule {
            s.validate()?;
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(SysIdError::InvalidArgument("eta must lie in (0, 1)".into()));
        }
        if self.experiment == ExperimentKind::Custom
            && self.closed_loop.is_none()
            && self.hammerstein.is_none()
            && self.dataset.is_none()
        {
            return Err(SysIdError::InvalidArgument(
                "custom experiment needs `hammerstein`, `closed_loop` or `dataset`".into(),
            ));
        }
        Ok(())
    }

    fn pipeline(&self) -> PipelineOptions {
        PipelineOptions {
            solver: self.solver,
            ..PipelineOptions::default()
        }
    }

    /// Plant and schedule after filling in defaults.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let mode = match self.experiment {
            ExperimentKind::Example1 => Mode::OpenLoop(HammersteinSpec::example1()),
            ExperimentKind::Example2 => Mode::ClosedLoop(StrConfig::example2()),
            ExperimentKind::Custom => match (&self.closed_loop, &self.hammerstein) {
                (Some(c), _) => Mode::ClosedLoop(c.clone()),
                (None, Some(h)) => Mode::OpenLoop(h.clone()),
                (None, None) => {
                    return Err(SysIdError::InvalidArgument(
                        "custom experiment has no plant to simulate".into(),
                    ))
                }
            },
        };
        let spec = match &mode {
            Mode::OpenLoop(s) => s.clone(),
            Mode::ClosedLoop(c) => c.plant.spec(),
        };
        let schedule = match (&self.lambda_schedule, &mode) {
            (Some(s), _) => *s,
            (None, Mode::OpenLoop(_)) => LambdaSchedule::power_of_n(0.75)?,
            (None, Mode::ClosedLoop(c)) => c.lambda_schedule,
        };
        let mode = match mode {
            Mode::ClosedLoop(mut c) => {
                c.horizon = self.horizon + spec.burn_in() - 1;
                c.lambda_schedule = schedule;
                c.pipeline = self.pipeline();
                c.validate()?;
                Mode::ClosedLoop(c)
            }
            open => open,
        };
        Ok(Resolved {
            kind: self.experiment,
            spec,
            mode,
            schedule,
            checkpoints: self.checkpoint_schedule(),
            pipeline: self.pipeline(),
            eta: self.eta,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Mode {
    OpenLoop(HammersteinSpec),
    ClosedLoop(StrConfig),
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub spec: HammersteinSpec,
    pub mode: Mode,
    pub schedule: LambdaSchedule,
    pub checkpoints: Vec<usize>,
    pub pipeline: PipelineOptions,
    pub eta: f64,
}

/// Coordinate names `a1..ap, b1d1..bqds`.
pub fn coordinate_labels(spec: &HammersteinSpec) -> Vec<String> {
    let mut labels: Vec<String> = (1..=spec.p()).map(|i| format!("a{i}")).collect();
    for i in 1..=spec.q() {
        labels.extend((1..=spec.s()).map(|j| format!("b{i}d{j}")));
    }
    labels
}

/// Assumption ratios and the irrepresentable check at one checkpoint.
///
/// CSV columns: `n,status,lambda_min,lambda_max,lambda_n,a3_ratio,a4_ratio_1,
/// a4_ratio_2,irrep_max_violation,irrep_passes`. Unavailable rows leave the
/// numeric cells empty and carry the reason in `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub n: usize,
    pub status: String,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_n: Option<f64>,
    pub a3_ratio: Option<f64>,
    pub a4_ratio_1: Option<f64>,
    pub a4_ratio_2: Option<f64>,
    pub irrep_max_violation: Option<f64>,
    pub irrep_passes: Option<bool>,
}

impl DiagnosticRow {
    fn unavailable(n: usize, reason: &str) -> Self {
        Self {
            n,
            status: format!("unavailable: {reason}"),
            lambda_min: None,
            lambda_max: None,
            lambda_n: None,
            a3_ratio: None,
            a4_ratio_1: None,
            a4_ratio_2: None,
            irrep_max_violation: None,
            irrep_passes: None,
        }
    }

    pub fn is_available(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "n",
        "status",
        "lambda_min",
        "lambda_max",
        "lambda_n",
        "a3_ratio",
        "a4_ratio_1",
        "a4_ratio_2",
        "irrep_max_violation",
        "irrep_passes",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.status.clone(),
            opt(r.lambda_min),
            opt(r.lambda_max),
            opt(r.lambda_n),
            opt(r.a3_ratio),
            opt(r.a4_ratio_1),
            opt(r.a4_ratio_2),
            opt(r.irrep_max_violation),
            r.irrep_passes.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Checkpoint CSV: one row per `(N, coordinate)`.
pub fn write_checkpoints_csv<W: Write>(checkpoints: &[Checkpoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "N",
        "coord_index",
        "ls",
        "modified",
        "sparse",
        "in_support_zero",
    ])?;
    for cp in checkpoints {
        let Some(b) = cp.bundle() else { continue };
        for l in 0..b.sparse.len() {
            w.write_record([
                cp.n.to_string(),
                (l + 1).to_string(),
                fmt_f64(b.ls[l]),
                fmt_f64(b.modified[l]),
                fmt_f64(b.sparse[l]),
                b.support_zero.contains(&(l + 1)).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Identification plus diagnostics over a dataset at each checkpoint.
///
/// The irrepresentable check uses the support and signs of `truth` when
/// given, otherwise those of the sparse estimate at the same checkpoint.
pub fn analyze(
    dataset: &Dataset,
    schedule: LambdaSchedule,
    options: PipelineOptions,
    checkpoints: &[usize],
    truth: Option<&[f64]>,
    eta: f64,
) -> Result<(Vec<Checkpoint>, Vec<DiagnosticRow>)> {
    validate_checkpoints(checkpoints, dataset.len())?;
    if let Some(t) = truth {
        if t.len() != dataset.dim() {
            return Err(SysIdError::DimensionMismatch {
                expected: dataset.dim(),
                got: t.len(),
            });
        }
    }
    let mut ident = SparseIdentifier::new(dataset.dim(), schedule, options)?;
    let mut cps = Vec::with_capacity(checkpoints.len());
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    for (phi, &y) in dataset.regressors.iter().zip(&dataset.outputs) {
        ident.observe(phi, y)?;
        let n = ident.gram().count();
        if next.peek() != Some(&&n) {
            continue;
        }
        next.next();
        let outcome = ident.estimate();
        rows.push(diagnostic_row(
            &ident,
            n,
            schedule,
            outcome.as_ref().ok(),
            truth,
            eta,
        ));
        cps.push(Checkpoint {
            n,
            outcome: outcome.map_err(|e| e.to_string()),
        });
        if next.peek().is_none() {
            break;
        }
    }
    Ok((cps, rows))
}

fn diagnostic_row(
    ident: &SparseIdentifier,
    n: usize,
    schedule: LambdaSchedule,
    bundle: Option<&estimation::EstimateBundle>,
    truth: Option<&[f64]>,
    eta: f64,
) -> DiagnosticRow {
    let gram = ident.gram().gram();
    let eig = match estimation::eigen_extremes(gram) {
        Ok(e) => e,
        Err(e) => return DiagnosticRow::unavailable(n, &e.to_string()),
    };
    let mean_diag = gram.trace() / gram.rows() as f64;
    if !(eig.lambda_min > 1e-12 * mean_diag) {
        return DiagnosticRow::unavailable(n, "rank-deficient Gram");
    }
    let lambda_n = match schedule.value(n, eig.lambda_min) {
        Ok(v) => v,
        Err(e) => return DiagnosticRow::unavailable(n, &e.to_string()),
    };
    let report = match diagnostics::assumption_report(&eig, lambda_n, n) {
        Ok(r) => r,
        Err(e) => return DiagnosticRow::unavailable(n, &e.to_string()),
    };
    let reference: Option<Vec<f64>> = truth
        .map(<[f64]>::to_vec)
        .or_else(|| bundle.map(|b| b.sparse.clone()));
    let irrep = reference.and_then(|v| {
        let support: Vec<usize> = (0..v.len())
            .filter(|&l| v[l] != 0.0)
            .map(|l| l + 1)
            .collect();
        let signs: Vec<f64> = support.iter().map(|&j| sgn(v[j - 1])).collect();
        diagnostics::irrepresentable_check(gram, n, &support, &signs, eta).ok()
    });
    DiagnosticRow {
        n,
        status: "ok".into(),
        lambda_min: Some(eig.lambda_min),
        lambda_max: Some(eig.lambda_max),
        lambda_n: Some(lambda_n),
        a3_ratio: Some(report.a3_ratio),
        a4_ratio_1: Some(report.a4_ratio_1),
        a4_ratio_2: Some(report.a4_ratio_2),
        irrep_max_violation: irrep.map(|r| r.max_violation),
        irrep_passes: irrep.map(|r| r.passes),
    }
}

/// Everything produced for one seed.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub dataset: Dataset,
    pub checkpoints: Vec<Checkpoint>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub run: Option<RunRecord>,
}

pub fn run_seed(resolved: &Resolved, seed: u64) -> Result<SeedResult> {
    let horizon = *resolved.checkpoints.last().expect("validated");
    let truth = resolved.spec.theta();
    let (dataset, run) = match &resolved.mode {
        Mode::OpenLoop(spec) => (
            simulate_hammerstein(spec, horizon + spec.burn_in() - 1, seed)?,
            None,
        ),
        Mode::ClosedLoop(cfg) => {
            let mut cfg = cfg.clone();
            cfg.horizon = cfg.horizon.max(horizon + resolved.spec.burn_in() - 1);
            let out = run_str(&cfg, seed, &resolved.checkpoints)?;
            if let Some(reason) = &out.record.aborted {
                return Err(SysIdError::InvalidArgument(format!(
                    "closed loop aborted: {reason}"
                )));
            }
            (out.dataset, Some(out.record))
        }
    };
    let (checkpoints, diagnostics) = analyze(
        &dataset,
        resolved.schedule,
        resolved.pipeline,
        &resolved.checkpoints,
        Some(&truth),
        resolved.eta,
    )?;
    Ok(SeedResult {
        seed,
        dataset,
        checkpoints,
        diagnostics,
        run,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for empty input.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            q10: quantile_sorted(&v, 0.1),
            q50: quantile_sorted(&v, 0.5),
            q90: quantile_sorted(&v, 0.9),
        })
    }
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    Quantiles::of(values).map(|q| q.q50)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportAtCheckpoint {
    pub n: usize,
    /// `None` when the estimate was unavailable.
    pub support_zero: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub supports: Vec<SupportAtCheckpoint>,
    pub exact_recovery: bool,
    /// Max `|β_N(i) − θ(i)|` over true-nonzero coordinates at the final checkpoint.
    pub max_nonzero_error: Option<f64>,
    pub tracking_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFrequency {
    pub index: usize,
    pub label: String,
    /// Fraction of all seeds (failed ones included) with this coordinate
    /// exactly zero at the final checkpoint.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub n: usize,
    pub available: usize,
    pub a3_ratio_median: Option<f64>,
    pub a4_ratio_1_median: Option<f64>,
    pub a4_ratio_2_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub experiment: ExperimentKind,
    pub lambda_schedule: LambdaSchedule,
    pub seeds: Vec<u64>,
    pub failed_seeds: Vec<FailedSeed>,
    pub final_n: usize,
    pub coordinate_labels: Vec<String>,
    pub true_zero_set: Vec<usize>,
    pub per_seed: Vec<SeedSummary>,
    pub recovery_frequency: Vec<CoordinateFrequency>,
    pub exact_recovery_frequency: f64,
    pub nonzero_error_quantiles: Option<Quantiles>,
    pub tracking_loss_quantiles: Option<Quantiles>,
    pub assumption_trends: Vec<TrendRow>,
}

/// Aggregates per-seed outcomes; failed seeds stay in every denominator.
pub fn summarize(
    resolved: &Resolved,
    seeds: &[u64],
    outcomes: &[Result<SeedResult>],
) -> SummaryReport {
    let truth = resolved.spec.theta();
    let zero_set = resolved.spec.true_zero_set();
    let labels = coordinate_labels(&resolved.spec);
    let final_n = *resolved.checkpoints.last().expect("validated");
    let total = seeds.len() as f64;

    let mut failed = Vec::new();
    let mut per_seed = Vec::new();
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Err(e) => failed.push(FailedSeed {
                seed,
                error: e.to_string(),
            }),
            Ok(res) => {
                let last = res.checkpoints.last().and_then(Checkpoint::bundle);
                per_seed.push(SeedSummary {
                    seed,
                    supports: res
                        .checkpoints
                        .iter()
                        .map(|c| SupportAtCheckpoint {
                            n: c.n,
                            support_zero: c.bundle().map(|b| b.support_zero.clone()),
                        })
                        .collect(),
                    exact_recovery: last.is_some_and(|b| b.support_zero == zero_set),
                    max_nonzero_error: last.map(|b| {
                        (0..truth.len())
                            .filter(|&l| truth[l] != 0.0)
                            .map(|l| (b.sparse[l] - truth[l]).abs())
                            .fold(0.0, f64::max)
                    }),
                    tracking_loss: res.run.as_ref().and_then(RunRecord::final_tracking_loss),
                });
            }
        }
    }
    let ok: Vec<&SeedResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();

    let recovery_frequency = zero_set
        .iter()
        .map(|&j| {
            let hits = ok
                .iter()
                .filter(|r| {
                    r.checkpoints
                        .last()
                        .and_then(Checkpoint::bundle)
                        .is_some_and(|b| b.sparse[j - 1] == 0.0)
                })
                .count();
            CoordinateFrequency {
                index: j,
                label: labels[j - 1].clone(),
                frequency: hits as f64 / total,
            }
        })
        .collect();
    let exact = per_seed.iter().filter(|s| s.exact_recovery).count() as f64 / total;
    let errors: Vec<f64> = per_seed
        .iter()
        .filter_map(|s| s.max_nonzero_error)
        .collect();
    let losses: Vec<f64> = per_seed.iter().filter_map(|s| s.tracking_loss).collect();

    let assumption_trends = resolved
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let rows: Vec<&DiagnosticRow> = ok
                .iter()
                .filter_map(|r| r.diagnostics.get(i))
                .filter(|r| r.is_available())
                .collect();
            let med = |f: fn(&DiagnosticRow) -> Option<f64>| {
                median(&rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            TrendRow {
                n,
                available: rows.len(),
                a3_ratio_median: med(|r| r.a3_ratio),
                a4_ratio_1_median: med(|r| r.a4_ratio_1),
                a4_ratio_2_median: med(|r| r.a4_ratio_2),
            }
        })
        .collect();

    SummaryReport {
        experiment: resolved.kind,
        lambda_schedule: resolved.schedule,
        seeds: seeds.to_vec(),
        failed_seeds: failed,
        final_n,
        coordinate_labels: labels,
        true_zero_set: zero_set,
        per_seed,
        recovery_frequency,
        exact_recovery_frequency: exact,
        nonzero_error_quantiles: Quantiles::of(&errors),
        tracking_loss_quantiles: Quantiles::of(&losses),
        assumption_trends,
    }
}

/// Runs every seed, in parallel when the `parallel` feature is on. Output
/// order follows `seeds`.
pub fn run_seeds(resolved: &Resolved, seeds: &[u64]) -> Vec<Result<SeedResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| run_seed(resolved, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.iter().map(|&s| run_seed(resolved, s)).collect()
    }
}

pub struct ExperimentOutput {
    pub summary: SummaryReport,
    pub results: Vec<Result<SeedResult>>,
    pub written: Vec<PathBuf>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let resolved = config.resolve()?;
    let results = run_seeds(&resolved, &config.seeds);
    let summary = summarize(&resolved, &config.seeds, &results);
    let written = match &config.output_dir {
        Some(dir) => write_artifacts(dir, &resolved, &summary, &results)?,
        None => Vec::new(),
    };
    Ok(ExperimentOutput {
        summary,
        results,
        written,
    })
}

pub fn run_example1(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Example1)?;
    run_experiment(config)
}

pub fn run_example2(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Example2)?;
    run_experiment(config)
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.experiment != kind {
        return Err(SysIdError::InvalidArgument(format!(
            "config is for {:?}, expected {:?}",
            config.experiment, kind
        )));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_artifacts(
    dir: &Path,
    resolved: &Resolved,
    summary: &SummaryReport,
    results: &[Result<SeedResult>],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let prefix = resolved.kind.prefix();
    let mut written = Vec::new();
    let zero_set = resolved.spec.true_zero_set();
    let labels = coordinate_labels(&resolved.spec);

    let cmp_path = dir.join(format!("{prefix}_comparison.csv"));
    let mut cmp = csv::Writer::from_writer(create(&cmp_path)?);
    cmp.write_record(["seed", "N", "coord_index", "label", "ls", "sparse"])?;

    for res in results.iter().filter_map(|r| r.as_ref().ok()) {
        let s = res.seed;
        let path = dir.join(format!("{prefix}_seed{s}_checkpoints.csv"));
        write_checkpoints_csv(&res.checkpoints, create(&path)?)?;
        written.push(path);

        let path = dir.join(format!("{prefix}_seed{s}_diagnostics.csv"));
        write_diagnostics_csv(&res.diagnostics, create(&path)?)?;
        written.push(path);

        if let Some(run) = &res.run {
            let path = dir.join(format!("{prefix}_seed{s}_run.csv"));
            run.write_csv(create(&path)?)?;
            written.push(path);
        }

        for cp in &res.checkpoints {
            let Some(b) = cp.bundle() else { continue };
            for &j in &zero_set {
                cmp.write_record([
                    s.to_string(),
                    cp.n.to_string(),
                    j.to_string(),
                    labels[j - 1].clone(),
                    fmt_f64(b.ls[j - 1]),
                    fmt_f64(b.sparse[j - 1]),
                ])?;
            }
        }
    }
    cmp.flush()?;
    written.push(cmp_path);

    let path = dir.join(format!("{prefix}_summary.json"));
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    written.push(path);
    Ok(written)
}
