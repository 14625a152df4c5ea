//! Open-loop Hammerstein systems: simulation, over-parametrization, basis
//! selection from a sparse estimate, and rank-1 recovery of `(b, d)`.
//!
//! Sign convention: the linear block is written
//!
//! ```text
//! y_{k+1} = a_1 y_k + … + a_p y_{k+1-p} + b_1 f(u_k) + … + b_q f(u_{k+1-q}) + w_{k+1}
//! f(u)    = Σ_j d_j g_j(u)
//! ```
//!
//! so that `y_{k+1} = θ_Hᵀ φ_k + w_{k+1}` holds with
//! `θ_H = [a_1..a_p, b_1 d_1..b_1 d_s, …, b_q d_1..b_q d_s]`. A system given
//! as `y_{k+1} + α_1 y_k + … = …` has `a_i = −α_i` here.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SysIdError};
use crate::linalg::{self, Matrix};
use crate::rng::{stream_rng, Law, Stream};

/// Simulations abort once `|y|` exceeds this.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFunction {
    /// `g(u) = u^degree`
    Power { degree: u32 },
}

impl BasisFunction {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            BasisFunction::Power { degree } => u.powi(degree as i32),
        }
    }

    pub fn polynomial(degree: usize) -> Vec<BasisFunction> {
        (1..=degree as u32)
            .map(|degree| BasisFunction::Power { degree })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammersteinSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub basis: Vec<BasisFunction>,
    pub input_law: Law,
    pub noise_law: Law,
}

impl HammersteinSpec {
    /// Two-lag sixth-order polynomial system driven by `U[−5, 5]` with unit
    /// Gaussian noise; basis coefficients 2, 4 and 6 vanish.
    pub fn example1() -> Self {
        Self {
            a: vec![1.5, -0.56],
            b: vec![1.0, -2.0],
            d: vec![1.0, 0.0, 0.2, 0.0, 0.009, 0.0],
            basis: BasisFunction::polynomial(6),
            input_law: Law::Uniform { lo: -5.0, hi: 5.0 },
            noise_law: Law::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
        }
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn q(&self) -> usize {
        self.b.len()
    }

    pub fn s(&self) -> usize {
        self.d.len()
    }

    /// Regressor dimension `p + q·s`.
    pub fn dim(&self) -> usize {
        self.p() + self.q() * self.s()
    }

    /// Number of steps consumed before the first fully defined regressor.
    pub fn burn_in(&self) -> usize {
        self.p().max(self.q())
    }

    /// Checks hard invariants; returns soft warnings (instability).
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.q() == 0 || self.s() == 0 {
            return Err(SysIdError::InvalidArgument("need q >= 1 and s >= 1".into()));
        }
        if self.basis.len() != self.s() {
            return Err(SysIdError::DimensionMismatch {
                expected: self.s(),
                got: self.basis.len(),
            });
        }
        if self.b.iter().all(|&b| b == 0.0) {
            return Err(SysIdError::InvalidArgument("b must not be all zero".into()));
        }
        let all = self.a.iter().chain(&self.b).chain(&self.d);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(SysIdError::NonFinite("system parameters"));
        }
        self.input_law.validate()?;
        self.noise_law.validate()?;
        let mut warnings = Vec::new();
        if !is_stable(&self.a) {
            warnings
                .push("A(z) = 1 - a_1 z - ... - a_p z^p has a root inside the unit disc".into());
        }
        Ok(warnings)
    }

    pub fn theta(&self) -> Vec<f64> {
        overparam_vector(&self.a, &self.b, &self.d)
    }

    /// 1-based indices of the zero entries of `θ_H`.
    pub fn true_zero_set(&self) -> Vec<usize> {
        crate::solver::support_set(&self.theta())
    }

    /// SHA-256 of the JSON encoding, first 16 hex digits.
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Stability of `A(z) = 1 − a_1 z − … − a_p z^p` (no roots in `|z| ≤ 1`),
/// by the Schur–Cohn step-down recursion on `λ^p − a_1 λ^{p−1} − … − a_p`.
pub fn is_stable(a: &[f64]) -> bool {
    let mut c: Vec<f64> = std::iter::once(1.0).chain(a.iter().map(|x| -x)).collect();
    while c.len() > 1 {
        let m = c.len() - 1;
        let k = c[m];
        if k.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        c = (0..m).map(|i| (c[i] - k * c[m - i]) / denom).collect();
    }
    true
}

/// `θ_H = [a, b_1 d, …, b_q d]`.
pub fn overparam_vector(a: &[f64], b: &[f64], d: &[f64]) -> Vec<f64> {
    let mut theta = a.to_vec();
    for &bi in b {
        theta.extend(d.iter().map(|&dj| bi * dj));
    }
    theta
}

/// Observation pairs `(φ_k, y_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub ks: Vec<usize>,
    pub regressors: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec_hash: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.regressors.first().map_or(0, Vec::len)
    }

    /// CSV with header `k,y_next,phi_1..phi_r`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let r = self.dim();
        let mut header = vec!["k".to_string(), "y_next".to_string()];
        header.extend((1..=r).map(|j| format!("phi_{j}")));
        w.write_record(&header)?;
        for ((k, phi), y) in self.ks.iter().zip(&self.regressors).zip(&self.outputs) {
            let mut rec = vec![k.to_string(), fmt_f64(*y)];
            rec.extend(phi.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: DatasetMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "k" || &headers[1] != "y_next" {
            return Err(SysIdError::Parse(
                "dataset header must be k,y_next,phi_1..phi_r".into(),
            ));
        }
        let r = headers.len() - 2;
        let mut ds = Dataset {
            ks: Vec::new(),
            regressors: Vec::new(),
            outputs: Vec::new(),
            meta,
        };
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| SysIdError::Parse(format!("column {i}: {e}")))
            };
            let k = rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| SysIdError::Parse(format!("k: {e}")))?;
            ds.ks.push(k);
            ds.outputs.push(parse(1)?);
            ds.regressors
                .push((0..r).map(|j| parse(j + 2)).collect::<Result<Vec<_>>>()?);
        }
        Ok(ds)
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Builds `φ_k` from output history `y[..=k]` and transformed inputs.
fn hammerstein_regressor(
    spec: &HammersteinSpec,
    ys: &[f64],
    gs: &[Vec<f64>],
    k: usize,
) -> Vec<f64> {
    let mut phi = Vec::with_capacity(spec.dim());
    for i in 0..spec.p() {
        phi.push(if k >= i { ys[k - i] } else { 0.0 });
    }
    for j in 0..spec.q() {
        if k >= j {
            phi.extend_from_slice(&gs[k - j]);
        } else {
            phi.extend(std::iter::repeat_n(0.0, spec.s()));
        }
    }
    phi
}

/// Simulates `n` steps from zero initial conditions and returns the pairs
/// `(φ_k, y_{k+1})` for `k = max(p,q) ..= n`.
pub fn simulate_hammerstein(spec: &HammersteinSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let burn = spec.burn_in();
    if n < burn + 1 {
        return Err(SysIdError::InvalidArgument(format!(
            "horizon {n} must be at least max(p,q)+1 = {}",
            burn + 1
        )));
    }
    let theta = spec.theta();
    let mut input_rng = stream_rng(seed, Stream::Input);
    let mut noise_rng = stream_rng(seed, Stream::Noise);

    // index 0 is time 0 (zero initial state); y[1] = w_1
    let mut ys = vec![0.0; n + 2];
    let mut gs: Vec<Vec<f64>> = vec![vec![0.0; spec.s()]; n + 1];
    ys[1] = spec.noise_law.sample(&mut noise_rng);

    let mut ds = Dataset {
        ks: Vec::with_capacity(n + 1 - burn),
        regressors: Vec::with_capacity(n + 1 - burn),
        outputs: Vec::with_capacity(n + 1 - burn),
        meta: DatasetMeta {
            spec_hash: spec.spec_hash(),
            seed,
        },
    };
    for k in 1..=n {
        let u = spec.input_law.sample(&mut input_rng);
        gs[k] = spec.basis.iter().map(|g| g.eval(u)).collect();
        let phi = hammerstein_regressor(spec, &ys, &gs, k);
        let y_next = linalg::dot(&theta, &phi) + spec.noise_law.sample(&mut noise_rng);
        if !(y_next.abs() <= OVERFLOW_GUARD) {
            return Err(SysIdError::Diverged {
                step: k + 1,
                magnitude: y_next.abs(),
            });
        }
        ys[k + 1] = y_next;
        if k >= burn {
            ds.ks.push(k);
            ds.regressors.push(phi);
            ds.outputs.push(y_next);
        }
    }
    Ok(ds)
}

/// `q × s` matrix with entries `b_i d_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverparamMatrix {
    pub m: Matrix,
}

impl OverparamMatrix {
    pub fn from_factors(b: &[f64], d: &[f64]) -> Self {
        let mut m = Matrix::zeros(b.len(), d.len());
        for (i, &bi) in b.iter().enumerate() {
            for (j, &dj) in d.iter().enumerate() {
                m[(i, j)] = bi * dj;
            }
        }
        Self { m }
    }

    /// Reshapes the product block of an over-parametrized estimate
    /// `[a_1..a_p, (b_1 d_1)..(b_q d_s)]`.
    pub fn from_estimate(beta: &[f64], p: usize, q: usize, s: usize) -> Result<Self> {
        if beta.len() != p + q * s {
            return Err(SysIdError::DimensionMismatch {
                expected: p + q * s,
                got: beta.len(),
            });
        }
        Ok(Self {
            m: Matrix::from_row_major(q, s, beta[p..].to_vec()),
        })
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        self.m.column(l)
    }
}

/// 1-based indices of the columns that are entirely (exactly) zero.
pub fn column_support(m: &OverparamMatrix) -> Vec<usize> {
    (0..m.m.cols())
        .filter(|&l| m.column(l).iter().all(|&x| x == 0.0))
        .map(|l| l + 1)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Factors {
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    /// `‖M − b dᵀ‖_F`
    pub residual: f64,
}

/// Best rank-1 approximation `M ≈ b dᵀ` from the leading singular triple.
///
/// `σ` is split as `sqrt(σ)` onto each factor and the overall sign is
/// fixed so the first nonzero entry of `d` is positive.
pub fn recover_bd(m: &OverparamMatrix) -> Result<Rank1Factors> {
    if m.m.as_slice().iter().all(|&x| x == 0.0) {
        return Err(SysIdError::InvalidArgument("matrix is all zero".into()));
    }
    let (sigma, u, v) = linalg::leading_singular_triple(&m.m)?;
    let root = sigma.sqrt();
    let flip = v
        .iter()
        .find(|x| x.abs() > 0.0)
        .map_or(1.0, |&x| if x < 0.0 { -1.0 } else { 1.0 });
    let b: Vec<f64> = u.iter().map(|x| flip * root * x).collect();
    let d: Vec<f64> = v.iter().map(|x| flip * root * x).collect();
    let approx = OverparamMatrix::from_factors(&b, &d);
    let residual =
        m.m.as_slice()
            .iter()
            .zip(approx.m.as_slice())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
    Ok(Rank1Factors { b, d, residual })
}
