//! Browser bindings. Every export takes plain numbers or JSON and returns a
//! JSON string; the `*_json` functions are the same operations callable from
//! native code.

use serde::Serialize;
use sparse_sysid::diagnostics::LambdaSchedule;
use sparse_sysid::hammerstein::{
    recover_bd, simulate_hammerstein, HammersteinSpec, OverparamMatrix,
};
use sparse_sysid::harness::coordinate_labels;
use sparse_sysid::linalg::Matrix;
use sparse_sysid::pipeline::{identify_offline, PipelineOptions};
use sparse_sysid::str_loop::{run_str, StrConfig};
use wasm_bindgen::prelude::*;

/// Largest horizon the page will run.
pub const MAX_HORIZON: usize = 20_000;

#[derive(Serialize)]
struct Example1View {
    n: usize,
    lambda_n: f64,
    labels: Vec<String>,
    truth: Vec<f64>,
    ls: Vec<f64>,
    sparse: Vec<f64>,
    support_zero: Vec<usize>,
    true_zero_set: Vec<usize>,
    b: Vec<f64>,
    d: Vec<f64>,
    rank1_residual: f64,
}

/// Example I: LS vs sparse estimate after `n` pairs with `λ_N = N^exponent`,
/// plus the rank-1 factors of the sparse product block.
pub fn example1_json(seed: u64, n: usize, exponent: f64) -> Result<String, String> {
    if !(50..=MAX_HORIZON).contains(&n) {
        return Err(format!("N must lie in [50, {MAX_HORIZON}]"));
    }
    let spec = HammersteinSpec::example1();
    let schedule = LambdaSchedule::power_of_n(exponent).map_err(|e| e.to_string())?;
    let ds =
        simulate_hammerstein(&spec, n + spec.burn_in() - 1, seed).map_err(|e| e.to_string())?;
    let cps = identify_offline(&ds, schedule, PipelineOptions::default(), &[n])
        .map_err(|e| e.to_string())?;
    let bundle = cps[0].outcome.clone()?;
    let m = OverparamMatrix::from_estimate(&bundle.sparse, spec.p(), spec.q(), spec.s())
        .map_err(|e| e.to_string())?;
    let f = recover_bd(&m).map_err(|e| e.to_string())?;
    to_json(&Example1View {
        n,
        lambda_n: bundle.lambda_n,
        labels: coordinate_labels(&spec),
        truth: spec.theta(),
        ls: bundle.ls,
        sparse: bundle.sparse,
        support_zero: bundle.support_zero,
        true_zero_set: spec.true_zero_set(),
        b: f.b,
        d: f.d,
        rank1_residual: f.residual,
    })
}

#[derive(Serialize)]
struct StrView {
    k: Vec<usize>,
    y: Vec<f64>,
    y_star: Vec<f64>,
    u: Vec<f64>,
    tracking_loss: f64,
    labels: Vec<String>,
    truth: Vec<f64>,
    ls: Vec<f64>,
    sparse: Vec<f64>,
    support_zero: Vec<usize>,
}

/// Example II closed loop for `horizon` steps with dither decay `epsilon_bar`.
pub fn str_json(seed: u64, horizon: usize, epsilon_bar: f64) -> Result<String, String> {
    if !(200..=MAX_HORIZON).contains(&horizon) {
        return Err(format!("horizon must lie in [200, {MAX_HORIZON}]"));
    }
    let mut cfg = StrConfig::example2();
    cfg.horizon = horizon;
    cfg.epsilon_bar = epsilon_bar;
    let run = run_str(&cfg, seed, &[horizon]).map_err(|e| e.to_string())?;
    if let Some(reason) = run.record.aborted {
        return Err(reason);
    }
    let bundle = run.record.checkpoints[0].outcome.clone()?;
    let spec = cfg.plant.spec();
    let rows = &run.record.rows;
    to_json(&StrView {
        k: rows.iter().map(|r| r.k).collect(),
        y: rows.iter().map(|r| r.y).collect(),
        y_star: rows.iter().map(|r| r.y_star).collect(),
        u: rows.iter().map(|r| r.u).collect(),
        tracking_loss: run.record.final_tracking_loss().unwrap_or(f64::NAN),
        labels: coordinate_labels(&spec),
        truth: spec.theta(),
        ls: bundle.ls,
        sparse: bundle.sparse,
        support_zero: bundle.support_zero,
    })
}

#[derive(Serialize)]
struct FactorView {
    b: Vec<f64>,
    d: Vec<f64>,
    residual: f64,
}

/// Rank-1 factorization of a `q × s` matrix given as JSON rows.
pub fn factorize_json(rows_json: &str) -> Result<String, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(rows_json).map_err(|e| e.to_string())?;
    if rows.is_empty() || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err("expected a nonempty rectangular array of rows".into());
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err("entries must be finite".into());
    }
    let f = recover_bd(&OverparamMatrix {
        m: Matrix::from_rows(&rows),
    })
    .map_err(|e| e.to_string())?;
    to_json(&FactorView {
        b: f.b,
        d: f.d,
        residual: f.residual,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn example1(seed: u32, n: u32, exponent: f64) -> Result<String, JsError> {
    example1_json(seed as u64, n as usize, exponent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn closed_loop(seed: u32, horizon: u32, epsilon_bar: f64) -> Result<String, JsError> {
    str_json(seed as u64, horizon as usize, epsilon_bar).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn factorize(rows_json: &str) -> Result<String, JsError> {
    factorize_json(rows_json).map_err(|e| JsError::new(&e))
}
