//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_sysid::diagnostics::LambdaSchedule;
use sparse_sysid::estimation::{self, GramState};
use sparse_sysid::hammerstein::{simulate_hammerstein, HammersteinSpec};
use sparse_sysid::harness::{median, run_experiment, ExperimentConfig, ExperimentKind};
use sparse_sysid::linalg;
use sparse_sysid::pipeline::{identify_offline, PipelineOptions};
use sparse_sysid::rng::Law;
use sparse_sysid::solver::{
    kkt_residual, objective_value, solve_weighted_lasso, SolverOptions, WeightedLassoProblem,
};
use sparse_sysid::str_loop::{run_str, StrConfig};

const DYADIC: [usize; 5] = [125, 250, 500, 1000, 2000];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 solver oracle equivalence", solver_oracle),
        ("2 least squares and modified estimate", ls_and_modified),
        ("3 example I zero-set recovery", example1_zero_set),
        ("4 example I parameter convergence", example1_parameters),
        ("5 least-squares rate", ls_rate),
        ("6 example II closed loop", example2_closed_loop),
        ("7 assumption diagnostics trends", assumption_trends),
        ("8 artifact determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let status = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!(
            "{status} criterion {name} ({:.1}s): {}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {failed} criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- criterion 1

/// Random Gram-form problem from an `n × r` design.
fn random_problem(rng: &mut ChaCha8Rng, r: usize, n: usize) -> WeightedLassoProblem {
    let mut g = GramState::new(r);
    let truth: Vec<f64> = (0..r)
        .map(|_| {
            if rng.random::<f64>() < 0.4 {
                0.0
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect();
    for _ in 0..n {
        let phi: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = linalg::dot(&truth, &phi) + 0.3 * rng.random_range(-1.0..1.0);
        g.accumulate(&phi, y).unwrap();
    }
    let weights: Vec<f64> = (0..r).map(|_| rng.random_range(0.2..5.0)).collect();
    let lambda = rng.random_range(0.01..3.0);
    WeightedLassoProblem::new(
        g.gram().clone(),
        g.cross().to_vec(),
        g.y_sq(),
        weights,
        lambda,
    )
    .unwrap()
}

/// FISTA with gradient restart.
fn prox_gradient(p: &WeightedLassoProblem) -> Vec<f64> {
    let r = p.dim();
    let lmax = linalg::jacobi_eigen(p.gram()).unwrap().values[r - 1];
    let step = 1.0 / (2.0 * lmax.max(1e-12));
    let prox = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(p.weights())
            .map(|(&x, &w)| {
                let t = step * p.lambda() * w;
                x.signum() * (x.abs() - t).max(0.0)
            })
            .collect()
    };
    let mut x = vec![0.0; r];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut best = objective_value(p, &x);
    let mut stall = 0;
    for _ in 0..400_000 {
        let gz = p.gram().mul_vec(&z);
        let v: Vec<f64> = (0..r)
            .map(|i| z[i] - step * 2.0 * (gz[i] - p.cross()[i]))
            .collect();
        let xn = prox(&v);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let restart = (0..r).map(|i| (z[i] - xn[i]) * (xn[i] - x[i])).sum::<f64>() > 0.0;
        if restart {
            z = xn.clone();
            t = 1.0;
        } else {
            z = (0..r)
                .map(|i| xn[i] + (t - 1.0) / tn * (xn[i] - x[i]))
                .collect();
            t = tn;
        }
        x = xn;
        let f = objective_value(p, &x);
        if f < best - 1e-15 * best.abs().max(1.0) {
            best = f;
            stall = 0;
        } else {
            stall += 1;
            if stall > 2000 {
                break;
            }
        }
    }
    x
}

/// Coarse exhaustive grid followed by zooming around the best cell.
fn grid_search(p: &WeightedLassoProblem, half_width: f64) -> (f64, f64) {
    let r = p.dim();
    let pts = 21usize;
    let mut center = vec![0.0; r];
    let mut h = half_width;
    let mut best = f64::INFINITY;
    for _ in 0..30 {
        let spacing = 2.0 * h / (pts - 1) as f64;
        let mut idx = vec![0usize; r];
        let mut best_here = center.clone();
        loop {
            let beta: Vec<f64> = (0..r)
                .map(|i| center[i] - h + spacing * idx[i] as f64)
                .collect();
            let f = objective_value(p, &beta);
            if f < best {
                best = f;
                best_here = beta;
            }
            let mut k = 0;
            while k < r {
                idx[k] += 1;
                if idx[k] < pts {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == r {
                break;
            }
        }
        center = best_here;
        h = 2.0 * spacing;
    }
    // slack: the objective can change by at most |∇J|·h√r + ‖G‖·r·h² inside the final cell
    let g = p.gram().mul_vec(&center);
    let grad: f64 = (0..r)
        .map(|i| (2.0 * (g[i] - p.cross()[i])).abs() + p.lambda() * p.weights()[i])
        .sum();
    let slack = grad * h + 2.0 * p.gram().frobenius_norm() * r as f64 * h * h;
    (best, slack)
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_190_101);
    let opts = SolverOptions::default();
    let (mut obj_fail, mut kkt_fail, mut worst_rel, mut worst_kkt) = (0, 0, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let r = rng.random_range(1..=6);
        let n = rng.random_range(1..=50);
        let p = random_problem(&mut rng, r, n);
        let sol = solve_weighted_lasso(&p, opts, None).unwrap();
        let oracle = prox_gradient(&p);
        let fo = objective_value(&p, &oracle);
        let rel = (sol.objective - fo) / fo.abs().max(1e-300);
        worst_rel = worst_rel.max(rel);
        if rel > 1e-7 {
            obj_fail += 1;
        }
        let kkt = kkt_residual(&p, &sol.beta);
        worst_kkt = worst_kkt.max(kkt);
        if kkt > 1e-8 {
            kkt_fail += 1;
        }
    }
    let mut grid_fail = 0;
    for _ in 0..100 {
        let r = rng.random_range(1..=3);
        let n = rng.random_range(r..=50);
        let p = random_problem(&mut rng, r, n);
        let sol = solve_weighted_lasso(&p, opts, None).unwrap();
        let half = 2.0 * sol.beta.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let (fg, slack) = grid_search(&p, half);
        let scale = sol.objective.abs().max(1.0);
        if sol.objective > fg + 1e-9 * scale || fg - sol.objective > slack + 1e-9 * scale {
            grid_fail += 1;
        }
    }
    outcome(
        obj_fail == 0 && kkt_fail == 0 && grid_fail == 0,
        format!(
            "objective mismatches {obj_fail}/1000 (worst rel excess {worst_rel:.2e}), \
             KKT > 1e-8 in {kkt_fail}/1000 (worst {worst_kkt:.2e}), grid mismatches {grid_fail}/100"
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn ls_and_modified() -> Outcome {
    let mut spec = HammersteinSpec::example1();
    spec.noise_law = Law::Gaussian {
        mean: 0.0,
        variance: 0.0,
    };
    let ds = simulate_hammerstein(&spec, 500 + spec.burn_in() - 1, 5).unwrap();
    let mut g = GramState::new(spec.dim());
    for (phi, &y) in ds.regressors.iter().zip(&ds.outputs) {
        g.accumulate(phi, y).unwrap();
    }
    let ls = estimation::ls_estimate(&g, estimation::DEFAULT_RIDGE_FLOOR).unwrap();
    let theta = spec.theta();
    let ls_err = ls
        .theta
        .iter()
        .zip(&theta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut violations = 0;
    let mut checked = 0;
    let cps: Vec<usize> = (1..=30).map(|i| 100 * i).collect();
    for seed in 0..5u64 {
        let spec = HammersteinSpec::example1();
        let ds = simulate_hammerstein(&spec, 3000 + spec.burn_in() - 1, seed).unwrap();
        let out = identify_offline(
            &ds,
            LambdaSchedule::power_of_n(0.75).unwrap(),
            PipelineOptions::default(),
            &cps,
        )
        .unwrap();
        let run = run_str(&StrConfig::example2(), seed, &cps).unwrap();
        for cp in out.iter().chain(&run.record.checkpoints) {
            let Some(b) = cp.bundle() else { continue };
            let bump = (b.eig.lambda_max.ln() / b.eig.lambda_min).sqrt();
            checked += 1;
            if b.modified.iter().any(|m| m.abs() < bump) {
                violations += 1;
            }
        }
    }
    outcome(
        ls_err <= 1e-6 && violations == 0 && checked > 0,
        format!(
            "noise-free LS max error {ls_err:.2e} at N=500; modified bound violated at {violations}/{checked} checkpoints"
        ),
    )
}

// ---------------------------------------------------------------- criteria 3, 4

fn example1_runs() -> &'static sparse_sysid::harness::ExperimentOutput {
    use std::sync::OnceLock;
    static OUT: OnceLock<sparse_sysid::harness::ExperimentOutput> = OnceLock::new();
    OUT.get_or_init(|| {
        let mut c = ExperimentConfig::new(ExperimentKind::Example1);
        c.seeds = (0..20).collect();
        c.horizon = 3000;
        c.checkpoints = Some(vec![100, 200, 300, 400, 500, 1000, 2000, 3000]);
        c.lambda_schedule = Some(LambdaSchedule::power_of_n(0.75).unwrap());
        run_experiment(&c).unwrap()
    })
}

fn example1_zero_set() -> Outcome {
    let t = Instant::now();
    let out = example1_runs();
    let zero = HammersteinSpec::example1().true_zero_set();
    let mut exact = 0;
    let mut ls_in_range = 0;
    let mut per_coord: BTreeMap<usize, usize> = BTreeMap::new();
    for res in out.results.iter().flatten() {
        let b = res.checkpoints.last().unwrap().bundle().unwrap();
        let ls_ok = zero
            .iter()
            .all(|&j| (1e-6..=1e-1).contains(&b.ls[j - 1].abs()));
        if ls_ok {
            ls_in_range += 1;
        }
        if b.support_zero == zero && zero.iter().all(|&j| b.sparse[j - 1] == 0.0) && ls_ok {
            exact += 1;
        }
        for &j in &zero {
            if b.sparse[j - 1] == 0.0 {
                *per_coord.entry(j).or_default() += 1;
            }
        }
    }
    let failed = out.summary.failed_seeds.len();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        exact >= 18 && secs <= 120.0,
        format!(
            "exact zero set in {exact}/20 seeds (failed seeds {failed}); per-coordinate zero counts {per_coord:?}; \
             LS zero-coordinate magnitudes in [1e-6,1e-1] for {ls_in_range}/20; {secs:.1}s"
        ),
    )
}

fn example1_parameters() -> Outcome {
    let out = example1_runs();
    let errors: Vec<f64> = out
        .summary
        .per_seed
        .iter()
        .filter_map(|s| s.max_nonzero_error)
        .collect();
    let ok = errors.iter().filter(|&&e| e <= 0.1).count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    outcome(
        ok >= 18,
        format!("max nonzero-coordinate error ≤ 0.1 in {ok}/20 seeds (worst {worst:.3})"),
    )
}

// ---------------------------------------------------------------- criterion 5

fn ls_rate() -> Outcome {
    let spec = HammersteinSpec::example1();
    let theta = spec.theta();
    let ns = [500usize, 1000, 2000, 4000];
    let mut scaled: Vec<Vec<f64>> = vec![Vec::new(); ns.len()];
    for seed in 0..10u64 {
        let ds = simulate_hammerstein(&spec, 4000 + spec.burn_in() - 1, seed).unwrap();
        let mut g = GramState::new(spec.dim());
        let mut next = 0;
        for (phi, &y) in ds.regressors.iter().zip(&ds.outputs) {
            g.accumulate(phi, y).unwrap();
            if g.count() == ns[next] {
                let ls = estimation::ls_estimate(&g, estimation::DEFAULT_RIDGE_FLOOR).unwrap();
                let err: f64 = ls
                    .theta
                    .iter()
                    .zip(&theta)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let n = ns[next] as f64;
                scaled[next].push(err * (n / n.ln()).sqrt());
                next += 1;
                if next == ns.len() {
                    break;
                }
            }
        }
    }
    let medians: Vec<f64> = scaled.iter().map(|v| median(v).unwrap()).collect();
    let hi = medians.iter().copied().fold(0.0, f64::max);
    let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        hi / lo < 3.0,
        format!(
            "median ‖θ_N−θ‖·sqrt(N/log N) at N={ns:?}: {medians:.3?}, spread factor {:.2}",
            hi / lo
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn example2_closed_loop() -> Outcome {
    let cfg = StrConfig::example2();
    let cps = [125, 250, 500, 1000, 2000, 3000];
    let mut losses = Vec::new();
    let mut b1d2_zero = 0;
    let mut stable = 0;
    let mut aborted = 0;
    for seed in 0..20u64 {
        let run = run_str(&cfg, seed, &cps).unwrap();
        let rec = &run.record;
        if rec.aborted.is_some() {
            aborted += 1;
            continue;
        }
        losses.push(rec.final_tracking_loss().unwrap());
        if let Some(b) = rec.checkpoints.last().and_then(|c| c.bundle()) {
            if b.sparse[2] == 0.0 && (1e-3..=1e-1).contains(&b.ls[2].abs()) {
                b1d2_zero += 1;
            }
        }
        if seed < 10 {
            let (m1, m2) = (
                rec.energy_mean(1500).unwrap(),
                rec.energy_mean(3000).unwrap(),
            );
            if m1.max(m2) / m1.min(m2) <= 2.0 {
                stable += 1;
            }
        }
    }
    let med = median(&losses).unwrap_or(f64::NAN);
    let loss_ok = (0.0175..=0.0325).contains(&med);
    outcome(
        loss_ok && b1d2_zero >= 18 && stable >= 8,
        format!(
            "median tracking loss {med:.4} (target [0.0175, 0.0325]); b1d2 exactly zero with LS of order 1e-2 \
             in {b1d2_zero}/20; energy stable in {stable}/10; aborted {aborted}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn strictly_decreasing(v: &[Option<f64>]) -> bool {
    v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
}

fn assumption_trends() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for kind in [ExperimentKind::Example1, ExperimentKind::Example2] {
        let mut c = ExperimentConfig::new(kind);
        c.seeds = (0..10).collect();
        c.horizon = 2000;
        c.checkpoints = Some(DYADIC.to_vec());
        let out = run_experiment(&c).unwrap();
        let tr = &out.summary.assumption_trends;
        let a3: Vec<Option<f64>> = tr.iter().map(|t| t.a3_ratio_median).collect();
        let a41: Vec<Option<f64>> = tr.iter().map(|t| t.a4_ratio_1_median).collect();
        let a42: Vec<Option<f64>> = tr.iter().map(|t| t.a4_ratio_2_median).collect();
        let (d3, d41, d42) = (
            strictly_decreasing(&a3),
            strictly_decreasing(&a41),
            strictly_decreasing(&a42),
        );
        ok &= d3 && d41 && d42;
        let fmt = |v: &[Option<f64>]| {
            v.iter()
                .map(|x| x.map_or("n/a".to_string(), |x| format!("{x:.3e}")))
                .collect::<Vec<_>>()
                .join(" ")
        };
        details.push(format!(
            "{}: a3 [{}] {}; a4_1 [{}] {}; a4_2 [{}] {}",
            kind.prefix(),
            fmt(&a3),
            verdict(d3),
            fmt(&a41),
            verdict(d41),
            fmt(&a42),
            verdict(d42)
        ));
    }
    outcome(ok, details.join(" | "))
}

fn verdict(b: bool) -> &'static str {
    if b {
        "decreasing"
    } else {
        "NOT decreasing"
    }
}

// ---------------------------------------------------------------- criterion 8

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let mut mismatches = Vec::new();
    let mut files = 0;
    for kind in [ExperimentKind::Example1, ExperimentKind::Example2] {
        let mut snapshots = Vec::new();
        for threads in [0usize, 1, 0] {
            let dir = tempfile::tempdir().unwrap();
            let mut c = ExperimentConfig::new(kind);
            c.seeds = vec![3, 11, 42, 7];
            c.horizon = 1000;
            c.output_dir = Some(dir.path().to_path_buf());
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_experiment(&c).unwrap());
            snapshots.push(read_dir_bytes(dir.path()));
        }
        files += snapshots[0].len();
        for other in &snapshots[1..] {
            if other != &snapshots[0] {
                mismatches.push(kind.prefix());
            }
        }
    }
    outcome(
        mismatches.is_empty() && files > 0,
        format!(
            "{files} artifacts compared across reruns and thread counts; mismatches {mismatches:?}"
        ),
    )
}
