use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sparse_sysid::hammerstein::{simulate_hammerstein, Dataset, DatasetMeta};
use sparse_sysid::harness::{
    self, analyze, run_experiment, write_checkpoints_csv, write_diagnostics_csv, ExperimentConfig,
    ExperimentKind, Mode,
};
use sparse_sysid::str_loop::run_str;
use sparse_sysid::SysIdError;

#[derive(Parser)]
#[command(
    name = "sparse-sysid",
    version,
    about = "Sparse parameter identification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop Hammerstein Monte Carlo (sixth-order polynomial system).
    Example1(Common),
    /// Closed-loop self-tuning regulation Monte Carlo (cubic system).
    Example2(Common),
    /// Assumption ratios and irrepresentable check per checkpoint.
    Diagnose(WithDataset),
    /// Write simulated datasets and the plant spec.
    Simulate(Common),
    /// Run the identifier over a dataset at every checkpoint.
    Estimate(WithDataset),
}

#[derive(Args)]
struct Common {
    /// Experiment config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Number of identification pairs, overriding the config.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct WithDataset {
    #[command(flatten)]
    common: Common,
    /// Dataset CSV (`k,y_next,phi_1..phi_r`), overriding the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            let _ = writeln!(std::io::stdout(), "{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let v = json!({ "status": "error", "error": { "kind": kind, "message": message.trim() } });
    let _ = writeln!(std::io::stderr(), "{v}");
}

fn load_config(
    common: &Common,
    default_kind: ExperimentKind,
) -> Result<ExperimentConfig, SysIdError> {
    let mut config = match &common.config {
        Some(p) => serde_json::from_reader(BufReader::new(File::open(p)?))?,
        None => ExperimentConfig::new(default_kind),
    };
    if let Some(s) = &common.seeds {
        config.seeds = s.clone();
    }
    if let Some(h) = common.horizon {
        config.horizon = h;
        if config
            .checkpoints
            .as_ref()
            .is_some_and(|c| c.last() > Some(&h))
        {
            config.checkpoints = None;
        }
    }
    config.output_dir = Some(common.out.clone());
    Ok(config)
}

fn run(cli: Cli) -> Result<serde_json::Value, SysIdError> {
    match cli.command {
        Command::Example1(c) => experiment(&c, ExperimentKind::Example1),
        Command::Example2(c) => experiment(&c, ExperimentKind::Example2),
        Command::Simulate(c) => simulate(&c),
        Command::Estimate(d) => estimate(&d),
        Command::Diagnose(d) => diagnose(&d),
    }
}

fn experiment(common: &Common, kind: ExperimentKind) -> Result<serde_json::Value, SysIdError> {
    let mut config = load_config(common, kind)?;
    if common.config.is_some() && config.experiment != kind {
        return Err(SysIdError::InvalidArgument(format!(
            "config is for {}, not {}",
            config.experiment.prefix(),
            kind.prefix()
        )));
    }
    config.experiment = kind;
    let out = run_experiment(&config)?;
    let s = &out.summary;
    Ok(json!({
        "status": "ok",
        "experiment": kind.prefix(),
        "seeds": s.seeds.len(),
        "failed_seeds": s.failed_seeds,
        "final_n": s.final_n,
        "exact_recovery_frequency": s.exact_recovery_frequency,
        "tracking_loss_median": s.tracking_loss_quantiles.map(|q| q.q50),
        "written": out.written,
    }))
}

fn create(path: &Path) -> Result<BufWriter<File>, SysIdError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(common: &Common) -> Result<serde_json::Value, SysIdError> {
    let config = load_config(common, ExperimentKind::Example1)?;
    let resolved = config.resolve()?;
    fs::create_dir_all(&common.out)?;
    let mut written = Vec::new();

    let spec_path = common.out.join("spec.json");
    let mut f = create(&spec_path)?;
    match &resolved.mode {
        Mode::OpenLoop(spec) => serde_json::to_writer_pretty(&mut f, spec)?,
        Mode::ClosedLoop(cfg) => serde_json::to_writer_pretty(&mut f, cfg)?,
    }
    f.write_all(b"\n")?;
    f.flush()?;
    written.push(spec_path);

    for &seed in &config.seeds {
        let burn = resolved.spec.burn_in();
        let dataset = match &resolved.mode {
            Mode::OpenLoop(spec) => simulate_hammerstein(spec, config.horizon + burn - 1, seed)?,
            Mode::ClosedLoop(cfg) => {
                let run = run_str(cfg, seed, &[config.horizon])?;
                let path = common.out.join(format!("run_seed{seed}.csv"));
                run.record.write_csv(create(&path)?)?;
                written.push(path);
                run.dataset
            }
        };
        let path = common.out.join(format!("dataset_seed{seed}.csv"));
        dataset.write_csv(create(&path)?)?;
        written.push(path);
    }
    Ok(json!({ "status": "ok", "spec_hash": resolved.spec.spec_hash(), "written": written }))
}

fn load_dataset(
    args: &WithDataset,
    config: &ExperimentConfig,
) -> Result<Option<Dataset>, SysIdError> {
    let Some(path) = args.dataset.as_ref().or(config.dataset.as_ref()) else {
        return Ok(None);
    };
    let meta = DatasetMeta {
        spec_hash: String::new(),
        seed: 0,
    };
    let ds = Dataset::read_csv(BufReader::new(File::open(path)?), meta)?;
    if ds.is_empty() {
        return Err(SysIdError::Empty);
    }
    Ok(Some(ds))
}

/// Checkpoints for a user dataset: the configured ones if they fit,
/// otherwise every 100 pairs plus the full length.
fn dataset_checkpoints(config: &ExperimentConfig, len: usize) -> Vec<usize> {
    if let Some(c) = &config.checkpoints {
        if c.last().is_some_and(|&l| l <= len) {
            return c.clone();
        }
    }
    let mut c: Vec<usize> = (1..=len / 100).map(|i| 100 * i).collect();
    if c.last() != Some(&len) {
        c.push(len);
    }
    c
}

fn with_dataset(
    args: &WithDataset,
) -> Result<(ExperimentConfig, Dataset, Option<Vec<f64>>), SysIdError> {
    let mut config = load_config(&args.common, ExperimentKind::Custom)?;
    let dataset = load_dataset(args, &config)?.ok_or_else(|| {
        SysIdError::InvalidArgument(
            "no dataset given (use --dataset or the `dataset` config field)".into(),
        )
    })?;
    config.horizon = dataset.len();
    if config.checkpoints.is_some() {
        config.checkpoints = Some(dataset_checkpoints(&config, dataset.len()));
    }
    // the true parameter is only known when the config names a plant
    let truth = match config.experiment {
        ExperimentKind::Custom if config.hammerstein.is_none() && config.closed_loop.is_none() => {
            None
        }
        _ => Some(config.resolve()?.spec.theta()),
    }
    .filter(|t| t.len() == dataset.dim());
    Ok((config, dataset, truth))
}

fn schedule_of(
    config: &ExperimentConfig,
) -> Result<sparse_sysid::diagnostics::LambdaSchedule, SysIdError> {
    match config.lambda_schedule {
        Some(s) => Ok(s),
        None if config.experiment == ExperimentKind::Custom
            && config.hammerstein.is_none()
            && config.closed_loop.is_none() =>
        {
            sparse_sysid::diagnostics::LambdaSchedule::power_of_n(0.75)
        }
        None => Ok(config.resolve()?.schedule),
    }
}

fn estimate(args: &WithDataset) -> Result<serde_json::Value, SysIdError> {
    let (config, dataset, truth) = with_dataset(args)?;
    let checkpoints = dataset_checkpoints(&config, dataset.len());
    let schedule = schedule_of(&config)?;
    let options = sparse_sysid::pipeline::PipelineOptions {
        solver: config.solver,
        ..Default::default()
    };
    let (cps, _) = analyze(
        &dataset,
        schedule,
        options,
        &checkpoints,
        truth.as_deref(),
        config.eta,
    )?;
    fs::create_dir_all(&args.common.out)?;
    let path = args.common.out.join("estimate_checkpoints.csv");
    write_checkpoints_csv(&cps, create(&path)?)?;
    let last = cps.last().expect("nonempty schedule");
    Ok(json!({
        "status": "ok",
        "n": last.n,
        "estimate": match &last.outcome {
            Ok(b) => serde_json::to_value(b)?,
            Err(e) => json!({ "unavailable": e }),
        },
        "written": [path],
    }))
}

fn diagnose(args: &WithDataset) -> Result<serde_json::Value, SysIdError> {
    let base = load_config(&args.common, ExperimentKind::Example1)?;
    if args.dataset.is_none() && base.dataset.is_none() {
        // simulate per seed from the configured experiment
        let resolved = base.resolve()?;
        fs::create_dir_all(&args.common.out)?;
        let mut written = Vec::new();
        let mut failed = Vec::new();
        for (seed, res) in base
            .seeds
            .iter()
            .zip(harness::run_seeds(&resolved, &base.seeds))
        {
            match res {
                Ok(r) => {
                    let path = args.common.out.join(format!("diagnostics_seed{seed}.csv"));
                    write_diagnostics_csv(&r.diagnostics, create(&path)?)?;
                    written.push(path);
                }
                Err(e) => failed.push(json!({ "seed": seed, "error": e.to_string() })),
            }
        }
        return Ok(json!({ "status": "ok", "failed_seeds": failed, "written": written }));
    }
    let (config, dataset, truth) = with_dataset(args)?;
    let checkpoints = dataset_checkpoints(&config, dataset.len());
    let schedule = schedule_of(&config)?;
    let options = sparse_sysid::pipeline::PipelineOptions {
        solver: config.solver,
        ..Default::default()
    };
    let (_, rows) = analyze(
        &dataset,
        schedule,
        options,
        &checkpoints,
        truth.as_deref(),
        config.eta,
    )?;
    fs::create_dir_all(&args.common.out)?;
    let path = args.common.out.join("diagnostics.csv");
    write_diagnostics_csv(&rows, create(&path)?)?;
    Ok(json!({
        "status": "ok",
        "available": rows.iter().filter(|r| r.is_available()).count(),
        "rows": rows.len(),
        "written": [path],
    }))
}
