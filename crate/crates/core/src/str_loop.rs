//! Closed-loop self-tuning regulation with diminishing excitation.
//!
//! At every step the controller solves the certainty-equivalence equation
//! `θ_kᵀ φ_k = y*_{k+1}` for the current input, using the latest LS
//! estimate, then adds a dither scaled by `r_{k−1}^{−ε̄/2}` where
//! `r_{k−1} = 1 + Σ_{i<k} ‖φ_i‖²`. The identifier runs on the same closed-loop
//! data and produces sparse estimates at a checkpoint schedule.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagnostics::LambdaSchedule;
use crate::error::{Result, SysIdError};
use crate::estimation::{self, sgn};
use crate::hammerstein::{
    fmt_f64, BasisFunction, Dataset, DatasetMeta, HammersteinSpec, OVERFLOW_GUARD,
};
use crate::linalg;
use crate::pipeline::{validate_checkpoints, Checkpoint, PipelineOptions, SparseIdentifier};
use crate::rng::{stream_rng, Law, Stream};

pub const DEFAULT_B1_FLOOR: f64 = 1e-6;
/// Startup ends once `λ_min(Gram) > FULL_RANK_TOL · mean diag`.
pub const FULL_RANK_TOL: f64 = 1e-8;

/// Linear ARX plant `y_{k+1} = Σ a_i y_{k+1−i} + Σ b_j u_{k+1−j} + w_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArxSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub noise_law: Law,
}

impl ArxSpec {
    fn as_hammerstein(&self) -> HammersteinSpec {
        HammersteinSpec {
            a: self.a.clone(),
            b: self.b.clone(),
            d: vec![1.0],
            basis: vec![BasisFunction::Power { degree: 1 }],
            input_law: Law::Uniform { lo: 0.0, hi: 0.0 },
            noise_law: self.noise_law,
        }
    }
}

/// True plant; the controller only sees its regressor layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Plant {
    Arx(ArxSpec),
    Hammerstein(HammersteinSpec),
}

impl Plant {
    /// Unified Hammerstein view (an ARX plant is one with `f(u) = u`).
    pub fn spec(&self) -> HammersteinSpec {
        match self {
            Plant::Arx(a) => a.as_hammerstein(),
            Plant::Hammerstein(h) => h.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// `+level` for `k ∈ [2lh+1, 2lh+h]`, `−level` for `k ∈ [2lh+h+1, 2(l+1)h]`.
    SquareWave { level: f64, half_period: usize },
    /// `values[k−1]`, repeated cyclically.
    Sequence { values: Vec<f64> },
}

impl Reference {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            Reference::SquareWave { level, half_period } => {
                let idx = k.saturating_sub(1) / half_period;
                if idx.is_multiple_of(2) {
                    *level
                } else {
                    -*level
                }
            }
            Reference::Sequence { values } => values[(k.saturating_sub(1)) % values.len()],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Reference::SquareWave { level, half_period } => {
                if !level.is_finite() || *half_period == 0 {
                    return Err(SysIdError::InvalidArgument(
                        "square wave needs a finite level and a positive half period".into(),
                    ));
                }
            }
            Reference::Sequence { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(SysIdError::InvalidArgument(
                        "reference sequence must be nonempty and finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrConfig {
    pub plant: Plant,
    pub reference: Reference,
    pub epsilon_bar: f64,
    pub dither_law: Law,
    pub horizon: usize,
    pub lambda_schedule: LambdaSchedule,
    pub b1_floor: f64,
    /// Also require `ε̄(t+1) < 1/4`, the window under which the zero set is
    /// guaranteed to be recovered.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub pipeline: PipelineOptions,
}

/// How the controller inverts the input coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ControlLaw {
    Linear,
    /// Basis position for each of the degrees 1, 2, 3 (if present).
    Cubic([Option<usize>; 3]),
}

impl StrConfig {
    /// Cubic Hammerstein plant regulated to a ±1 square wave; the `u²`
    /// coefficient is zero.
    pub fn example2() -> Self {
        let epsilon_bar = 1.0 / 15.0;
        Self {
            plant: Plant::Hammerstein(HammersteinSpec {
                a: vec![0.5],
                b: vec![2.0],
                d: vec![1.0, 0.0, 1.0],
                basis: BasisFunction::polynomial(3),
                input_law: Law::Uniform { lo: 0.0, hi: 0.0 },
                noise_law: Law::Gaussian {
                    mean: 0.0,
                    variance: 0.025,
                },
            }),
            reference: Reference::SquareWave {
                level: 1.0,
                half_period: 500,
            },
            epsilon_bar,
            dither_law: Law::Uniform { lo: -0.1, hi: 0.1 },
            horizon: 3000,
            lambda_schedule: LambdaSchedule::closed_loop(epsilon_bar, 1).expect("valid"),
            b1_floor: DEFAULT_B1_FLOOR,
            strict: false,
            pipeline: PipelineOptions::default(),
        }
    }

    /// `t = max(p, q) + p − 1`.
    pub fn t(&self) -> usize {
        let spec = self.plant.spec();
        (spec.p().max(spec.q()) + spec.p()).saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.plant.spec();
        spec.validate()?;
        self.reference.validate()?;
        self.dither_law.validate()?;
        self.lambda_schedule.validate()?;
        if !self.dither_law.bound().is_finite() {
            return Err(SysIdError::InvalidArgument(
                "dither law must be bounded".into(),
            ));
        }
        let t1 = self.t() as f64 + 1.0;
        let upper = 1.0 / (2.0 * t1);
        if !(self.epsilon_bar > 0.0 && self.epsilon_bar < upper) {
            return Err(SysIdError::InvalidArgument(format!(
                "epsilon_bar must lie in (0, {upper}), got {}",
                self.epsilon_bar
            )));
        }
        if self.strict && !(self.epsilon_bar * t1 < 0.25) {
            return Err(SysIdError::InvalidArgument(format!(
                "strict mode requires epsilon_bar*(t+1) < 1/4, got {}",
                self.epsilon_bar * t1
            )));
        }
        if !(self.b1_floor > 0.0) {
            return Err(SysIdError::InvalidArgument(
                "b1_floor must be positive".into(),
            ));
        }
        if self.horizon < spec.burn_in() + 1 {
            return Err(SysIdError::InvalidArgument("horizon too short".into()));
        }
        self.control_law()?;
        Ok(())
    }

    fn control_law(&self) -> Result<ControlLaw> {
        let spec = self.plant.spec();
        if spec.basis == [BasisFunction::Power { degree: 1 }] {
            return Ok(ControlLaw::Linear);
        }
        let mut slots = [None; 3];
        for (j, g) in spec.basis.iter().enumerate() {
            let BasisFunction::Power { degree } = *g;
            match degree {
                1..=3 if slots[degree as usize - 1].is_none() => {
                    slots[degree as usize - 1] = Some(j)
                }
                _ => {
                    return Err(SysIdError::InvalidArgument(
                        "closed loop supports distinct polynomial powers up to 3".into(),
                    ))
                }
            }
        }
        Ok(ControlLaw::Cubic(slots))
    }
}

/// Certainty-equivalence input for a plant linear in `u_k`.
///
/// `phi_without_u` is the regressor with the `u_k` coordinate set to zero;
/// `b1_index` locates that coordinate. Returns the input and whether the
/// `|b̂_1| ≥ b1_floor` guard engaged.
pub fn str_control_linear(
    theta_est: &[f64],
    phi_without_u: &[f64],
    b1_index: usize,
    y_star_next: f64,
    b1_floor: f64,
) -> (f64, bool) {
    let mut b1 = theta_est[b1_index];
    let floored = b1.abs() < b1_floor;
    if floored {
        b1 = sgn(b1) * b1_floor;
    }
    let rest = linalg::dot(theta_est, phi_without_u);
    ((y_star_next - rest) / b1, floored)
}

/// Real root of `c3 u³ + c2 u² + c1 u + c0` with the smallest magnitude,
/// ties going to the nonnegative root. Falls back to the quadratic or
/// linear case when leading coefficients vanish.
pub fn cubic_real_solution(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<f64> {
    if [c3, c2, c1, c0].iter().any(|c| !c.is_finite()) {
        return Err(SysIdError::NonFinite("polynomial coefficients"));
    }
    let roots = if c3 != 0.0 {
        cubic_roots(c3, c2, c1, c0)
    } else if c2 != 0.0 {
        quadratic_roots(c2, c1, c0)
    } else if c1 != 0.0 {
        vec![-c0 / c1]
    } else {
        return Err(SysIdError::InvalidArgument(
            "polynomial has no u-dependence".into(),
        ));
    };
    roots
        .into_iter()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()).then(b.total_cmp(a)))
        .ok_or(SysIdError::NoRealRoot)
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + sgn(b) * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    roots
}

fn cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let poly = |u: f64| ((c3 * u + c2) * u + c1) * u + c0;
    let dpoly = |u: f64| (3.0 * c3 * u + 2.0 * c2) * u + c1;
    let bound = 1.0
        + [c2, c1, c0]
            .iter()
            .map(|c| (c / c3).abs())
            .fold(0.0, f64::max);

    let mut knots = vec![-bound];
    let mut crit = quadratic_roots(3.0 * c3, 2.0 * c2, c1);
    crit.sort_by(f64::total_cmp);
    knots.extend(crit.iter().copied().filter(|x| x.abs() < bound));
    knots.push(bound);

    let scale = [c3, c2, c1, c0].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut roots = Vec::new();
    for &x in &crit {
        // tangential (double) roots do not change sign
        if poly(x).abs() <= 1e-14 * scale * (1.0 + x.abs().powi(3)) {
            roots.push(x);
        }
    }
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut flo, fhi) = (poly(lo), poly(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if fhi == 0.0 {
            roots.push(hi);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let fm = poly(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let mut root = 0.5 * (lo + hi);
        let d = dpoly(root);
        if d != 0.0 {
            let polished = root - poly(root) / d;
            if polished.is_finite() && poly(polished).abs() <= poly(root).abs() {
                root = polished;
            }
        }
        roots.push(root);
    }
    roots
}

/// `u0 + dither / r^{ε̄/2}`
pub fn diminishing_excitation(u0: f64, dither: f64, r_excite: f64, epsilon_bar: f64) -> f64 {
    u0 + dither / r_excite.powf(epsilon_bar / 2.0)
}

/// `(1/k) Σ (y_i − y*_i)²`
pub fn tracking_loss(ys: &[f64], y_stars: &[f64]) -> Result<f64> {
    if ys.is_empty() {
        return Err(SysIdError::Empty);
    }
    if ys.len() != y_stars.len() {
        return Err(SysIdError::DimensionMismatch {
            expected: ys.len(),
            got: y_stars.len(),
        });
    }
    let sum: f64 = ys.iter().zip(y_stars).map(|(y, s)| (y - s).powi(2)).sum();
    Ok(sum / ys.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub k: usize,
    pub y: f64,
    pub y_star: f64,
    pub u0: f64,
    pub u: f64,
    pub dither_scale: f64,
    /// `(1/k) Σ_{i≤k} (y_i − y*_i)²`
    pub tracking_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub rows: Vec<StepRow>,
    pub checkpoints: Vec<Checkpoint>,
    /// Steps run on pure dither before the Gram matrix was full rank.
    pub startup_steps: usize,
    /// Steps where the `b̂_1` floor engaged.
    pub floor_events: usize,
    /// Steps where no real root was available and the previous input was reused.
    pub cubic_fallbacks: usize,
    pub aborted: Option<String>,
}

impl RunRecord {
    pub fn final_tracking_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.tracking_loss)
    }

    /// Running mean of `u_i² + y_i²` over the first `k` rows.
    pub fn energy_mean(&self, k: usize) -> Option<f64> {
        if k == 0 || k > self.rows.len() {
            return None;
        }
        let s: f64 = self.rows[..k].iter().map(|r| r.u * r.u + r.y * r.y).sum();
        Some(s / k as f64)
    }

    /// CSV with header `k,y,y_star,u0,u,dither_scale,tracking_loss`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "k",
            "y",
            "y_star",
            "u0",
            "u",
            "dither_scale",
            "tracking_loss",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                fmt_f64(r.y),
                fmt_f64(r.y_star),
                fmt_f64(r.u0),
                fmt_f64(r.u),
                fmt_f64(r.dither_scale),
                fmt_f64(r.tracking_loss),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A finished closed-loop run together with the data the identifier saw.
#[derive(Debug, Clone)]
pub struct StrRun {
    pub record: RunRecord,
    pub dataset: Dataset,
}

/// Loop state between steps.
#[derive(Debug, Clone)]
pub struct StrLoopState {
    pub identifier: SparseIdentifier,
    /// `y_t` indexed by time, `ys[0] = 0`.
    ys: Vec<f64>,
    /// `g(u_t)` indexed by time.
    gs: Vec<Vec<f64>>,
    pub r_excite: f64,
    pub k: usize,
    pub started: bool,
    last_u0: f64,
}

pub fn run_str(config: &StrConfig, seed: u64, checkpoints: &[usize]) -> Result<StrRun> {
    config.validate()?;
    let spec = config.plant.spec();
    let law = config.control_law()?;
    let burn = spec.burn_in();
    let pairs = config.horizon + 1 - burn;
    if !checkpoints.is_empty() {
        validate_checkpoints(checkpoints, pairs)?;
    }

    let r = spec.dim();
    let p = spec.p();
    let s = spec.s();
    let theta_true = spec.theta();
    let mut noise_rng = stream_rng(seed, Stream::Noise);
    let mut dither_rng = stream_rng(seed, Stream::Dither);

    let mut state = StrLoopState {
        identifier: SparseIdentifier::new(r, config.lambda_schedule, config.pipeline)?,
        ys: vec![0.0; config.horizon + 2],
        gs: vec![vec![0.0; s]; config.horizon + 1],
        r_excite: 1.0,
        k: 0,
        started: false,
        last_u0: 0.0,
    };
    state.ys[1] = spec.noise_law.sample(&mut noise_rng);

    let mut record = RunRecord {
        seed,
        rows: Vec::with_capacity(config.horizon),
        checkpoints: Vec::with_capacity(checkpoints.len()),
        startup_steps: 0,
        floor_events: 0,
        cubic_fallbacks: 0,
        aborted: None,
    };
    let mut dataset = Dataset {
        ks: Vec::with_capacity(pairs),
        regressors: Vec::with_capacity(pairs),
        outputs: Vec::with_capacity(pairs),
        meta: DatasetMeta {
            spec_hash: spec.spec_hash(),
            seed,
        },
    };
    let mut next_checkpoint = checkpoints.iter().peekable();
    let mut err_sum = 0.0;

    for k in 1..=config.horizon {
        state.k = k;
        let y_k = state.ys[k];
        let y_star_k = config.reference.value(k);
        let y_star_next = config.reference.value(k + 1);

        // regressor with the current input slots zeroed
        let mut phi = Vec::with_capacity(r);
        for i in 0..p {
            phi.push(if k > i { state.ys[k - i] } else { 0.0 });
        }
        phi.extend(std::iter::repeat_n(0.0, s));
        for j in 1..spec.q() {
            if k > j {
                phi.extend_from_slice(&state.gs[k - j]);
            } else {
                phi.extend(std::iter::repeat_n(0.0, s));
            }
        }

        let gram = state.identifier.gram();
        if !state.started && gram.count() >= burn + r {
            let eig = estimation::eigen_extremes(gram.gram())?;
            let mean_diag = gram.gram().trace() / r as f64;
            state.started = eig.lambda_min > FULL_RANK_TOL * mean_diag;
        }

        let u0 = if state.started {
            let ls = estimation::ls_estimate(gram, config.pipeline.ridge_floor)?;
            let theta = &ls.theta;
            match law {
                ControlLaw::Linear => {
                    let (u0, floored) =
                        str_control_linear(theta, &phi, p, y_star_next, config.b1_floor);
                    if floored {
                        record.floor_events += 1;
                    }
                    u0
                }
                ControlLaw::Cubic(slots) => {
                    let coef = |deg: usize| slots[deg - 1].map_or(0.0, |j| theta[p + j]);
                    let c0 = linalg::dot(theta, &phi) - y_star_next;
                    match cubic_real_solution(coef(3), coef(2), coef(1), c0) {
                        Ok(u) => u,
                        Err(_) => {
                            record.cubic_fallbacks += 1;
                            state.last_u0
                        }
                    }
                }
            }
        } else {
            record.startup_steps += 1;
            0.0
        };
        state.last_u0 = u0;

        let dither = config.dither_law.sample(&mut dither_rng);
        let dither_scale = state.r_excite.powf(-config.epsilon_bar / 2.0);
        let u = diminishing_excitation(u0, dither, state.r_excite, config.epsilon_bar);

        let g: Vec<f64> = spec.basis.iter().map(|b| b.eval(u)).collect();
        phi[p..p + s].copy_from_slice(&g);
        state.gs[k] = g;

        let y_next = linalg::dot(&theta_true, &phi) + spec.noise_law.sample(&mut noise_rng);

        err_sum += (y_k - y_star_k).powi(2);
        record.rows.push(StepRow {
            k,
            y: y_k,
            y_star: y_star_k,
            u0,
            u,
            dither_scale,
            tracking_loss: err_sum / k as f64,
        });

        if !(y_next.abs() <= OVERFLOW_GUARD) || !u.is_finite() {
            record.aborted = Some(
                SysIdError::Diverged {
                    step: k + 1,
                    magnitude: y_next.abs(),
                }
                .to_string(),
            );
            break;
        }
        state.ys[k + 1] = y_next;
        state.r_excite += linalg::dot(&phi, &phi);

        if k >= burn {
            state.identifier.observe(&phi, y_next)?;
            dataset.ks.push(k);
            dataset.regressors.push(phi);
            dataset.outputs.push(y_next);
            let n = state.identifier.gram().count();
            if next_checkpoint.peek() == Some(&&n) {
                next_checkpoint.next();
                record.checkpoints.push(Checkpoint {
                    n,
                    outcome: state.identifier.estimate().map_err(|e| e.to_string()),
                });
            }
        }
    }
    Ok(StrRun { record, dataset })
}
