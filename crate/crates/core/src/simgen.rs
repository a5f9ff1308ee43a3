//! Synthetic data from the co-sparse factor regression model
//! `Y = X C* + E` with `C* = sum_k d_k u_k v_k^T`.
//!
//! Randomness comes from one ChaCha8 generator seeded with `spec.seed`, split
//! into independent streams: stream 1 for the coefficient model, stream 2 for
//! the design and stream 3 for the noise.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{FactorModel, NormMode, UnitRankFactor};

pub const COEFFICIENT_STREAM: u64 = 1;
pub const DESIGN_STREAM: u64 = 2;
pub const NOISE_STREAM: u64 = 3;

/// Coefficient model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimModel {
    /// Fixed unit-rank model.
    I,
    /// Random layers with overlapping, shifted-by-one supports.
    II,
    /// Random layers with disjoint supports.
    III,
}

impl fmt::Display for SimModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimModel::I => "I",
            SimModel::II => "II",
            SimModel::III => "III",
        })
    }
}

impl FromStr for SimModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(SimModel::I),
            "II" | "2" => Ok(SimModel::II),
            "III" | "3" => Ok(SimModel::III),
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model: SimModel,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// True rank; Model I always uses 1.
    pub r_star: usize,
    pub snr: f64,
    /// AR(1) correlation of the noise across responses.
    pub rho: f64,
    pub s_u: usize,
    pub s_v: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(model: SimModel, n: usize, p: usize, q: usize, r_star: usize) -> Self {
        Self {
            model,
            n,
            p,
            q,
            r_star: if model == SimModel::I { 1 } else { r_star },
            snr: 1.0,
            rho: 0.3,
            s_u: 3,
            s_v: 4,
            seed: 0,
        }
    }

    pub fn with_snr(mut self, snr: f64) -> Self {
        self.snr = snr;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(Error::invalid(format!("snr must be positive, got {}", self.snr)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        match self.model {
            SimModel::I => {
                if self.p < 16 || self.q < 25 {
                    return Err(Error::invalid("Model I needs p >= 16 and q >= 25"));
                }
                if self.r_star != 1 {
                    return Err(Error::invalid("Model I is unit rank"));
                }
            }
            SimModel::II => {
                if self.r_star == 0 || self.s_u == 0 || self.s_v == 0 {
                    return Err(Error::invalid("r_star, s_u and s_v must be positive"));
                }
                if self.s_u + self.r_star - 1 > self.p || self.s_v + self.r_star - 1 > self.q {
                    return Err(Error::invalid("Model II supports do not fit in p x q"));
                }
            }
            SimModel::III => {
                if self.r_star == 0 || self.s_u == 0 || self.s_v == 0 {
                    return Err(Error::invalid("r_star, s_u and s_v must be positive"));
                }
                if self.r_star * self.s_u > self.p || self.r_star * self.s_v > self.q {
                    return Err(Error::invalid("Model III needs r s_u <= p and r s_v <= q"));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub spec: SimSpec,
    pub c_star: DMatrix<f64>,
    /// Layers with unit-l2 `u` and `v`, in descending `d`.
    pub factors: FactorModel,
    pub sigma: f64,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

/// Serialized form of the truth (the matrices live in CSV files).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub spec: SimSpec,
    pub sigma: f64,
    pub factors: FactorModel,
}

impl SimTruth {
    pub fn record(&self) -> TruthRecord {
        TruthRecord {
            spec: self.spec.clone(),
            sigma: self.sigma,
            factors: self.factors.clone(),
        }
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normalized(v: DVector<f64>) -> Result<DVector<f64>> {
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateFactor("zero singular vector".into()));
    }
    Ok(v / norm)
}

/// The true coefficient layers for `spec`.
pub fn gen_coefficient<R: Rng>(spec: &SimSpec, rng: &mut R) -> Result<FactorModel> {
    spec.validate()?;
    let (p, q, r) = (spec.p, spec.q, spec.r_star);
    let mut layers = Vec::with_capacity(r);
    match spec.model {
        SimModel::I => {
            let mut u = DVector::zeros(p);
            let head = [10.0, -10.0, 8.0, -8.0, 5.0, -5.0];
            for (j, &a) in head.iter().enumerate() {
                u[j] = a;
            }
            for j in 6..11 {
                u[j] = 3.0;
            }
            for j in 11..16 {
                u[j] = -3.0;
            }
            let mut v = DVector::zeros(q);
            let head = [10.0, -9.0, 8.0, -7.0, 6.0, -5.0, 4.0, -3.0];
            for (k, &a) in head.iter().enumerate() {
                v[k] = a;
            }
            for k in 8..25 {
                v[k] = 2.0;
            }
            layers.push(UnitRankFactor::new(20.0, normalized(u)?, normalized(v)?, NormMode::Raw));
        }
        SimModel::II | SimModel::III => {
            let mut vs: Vec<DVector<f64>> = Vec::with_capacity(r);
            for k in 0..r {
                let (ou, ov) = match spec.model {
                    SimModel::II => (k, k),
                    _ => (spec.s_u * k, spec.s_v * k),
                };
                let mut u = DVector::zeros(p);
                for j in 0..spec.s_u {
                    u[ou + j] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                }
                let mut v = DVector::zeros(q);
                for j in 0..spec.s_v {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    v[ov + j] = sign * rng.random_range(0.3..=1.0);
                }
                // orthogonalize against the earlier (already unit) v's
                for prev in &vs {
                    let c = prev.dot(&v);
                    v.axpy(-c, prev, 1.0);
                }
                let v = normalized(v)?;
                vs.push(v.clone());
                let d = 5.0 + 5.0 * (r - k) as f64;
                layers.push(UnitRankFactor::new(d, normalized(u)?, v, NormMode::Raw));
            }
        }
    }
    FactorModel::from_layers(p, q, layers)
}

/// Symmetric square root factor `L` with `L L^T = A` for a PSD `A`: Cholesky
/// when it succeeds, otherwise an eigendecomposition with negative
/// eigenvalues clamped to zero.
fn psd_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = a.clone().cholesky() {
        return ch.l();
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut v = eig.eigenvectors;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    v
}

fn standard_normal<R: Rng>(n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    // fill row by row so the draw order does not depend on storage layout
    let mut z = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    z
}

/// `Gamma_ij = 0.5^{|i-j|}`.
pub fn design_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 0.5f64.powi(i.abs_diff(j) as i32))
}

/// Orthonormal basis of the orthogonal complement of `span(U)`.
fn orthogonal_completion(u: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, r) = u.shape();
    if r >= p {
        return DMatrix::zeros(p, 0);
    }
    let q = u.clone().qr().q();
    let proj = DMatrix::identity(p, p) - &q * q.transpose();
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<usize> = (0..p).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    let mut out = DMatrix::zeros(p, cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(k));
    }
    out
}

/// Design with `x ~ N(0, Gamma)` conditioned so that `X U*` has independent
/// standard normal entries.
///
/// With `P = [U*, U_perp]`, the latent `X_1 = X U*` is drawn from `N(0, I)`,
/// `X_2 = X U_perp` from the Gaussian law of `x_2 | x_1` under
/// `cov([x_1, x_2]) = P^T Gamma P`, and `X = [X_1, X_2] P^{-1}`.
pub fn gen_design<R: Rng>(u_star: &DMatrix<f64>, spec: &SimSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    let (p, r) = u_star.shape();
    if p != spec.p {
        return Err(Error::dims(format!("U* has {p} rows, spec has p = {}", spec.p)));
    }
    let n = spec.n;
    let u_perp = orthogonal_completion(u_star);
    let mut pm = DMatrix::zeros(p, p);
    pm.columns_mut(0, r).copy_from(u_star);
    pm.columns_mut(r, p - r).copy_from(&u_perp);
    let p_inv = pm
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("[U*, U_perp] is not invertible".into()))?;

    let x1 = standard_normal(n, r, rng);
    let mut latent = DMatrix::zeros(n, p);
    latent.columns_mut(0, r).copy_from(&x1);
    if r < p {
        let sigma = pm.transpose() * design_covariance(p) * &pm;
        let s11 = sigma.view((0, 0), (r, r)).into_owned();
        let s21 = sigma.view((r, 0), (p - r, r)).into_owned();
        let s22 = sigma.view((r, r), (p - r, p - r)).into_owned();
        let s11_inv = s11
            .cholesky()
            .ok_or_else(|| Error::Singular("U*^T Gamma U* is singular".into()))?;
        // regression of x_2 on x_1 and the conditional covariance
        let b = s11_inv.solve(&s21.transpose()).transpose();
        let cond = &s22 - &b * s21.transpose();
        let cond = (&cond + cond.transpose()) * 0.5;
        let l = psd_factor(&cond);
        let z = standard_normal(n, p - r, rng);
        let x2 = &x1 * b.transpose() + z * l.transpose();
        latent.columns_mut(r, p - r).copy_from(&x2);
    }
    let x = latent * p_inv;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("generated design".into()));
    }
    Ok(x)
}

/// Largest singular value by power iteration on `A^T A`, to a relative
/// tolerance of 1e-10.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    let m = a.ncols();
    if m == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let ata = a.tr_mul(a);
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..10_000 {
        let w = &ata * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - est).abs() <= 1e-10 * norm {
            est = norm;
            break;
        }
        est = norm;
    }
    est.sqrt()
}

/// Noise with AR(1)-correlated columns, scaled to the requested SNR.
///
/// Returns `(Y, E, sigma)` where `E = sigma E_0`, the rows of `E_0` are
/// i.i.d. `N(0, Delta)` with `Delta_ij = rho^{|i-j|}`, and
/// `sigma = ||d_r X u_r v_r^T||_2 / (snr ||E_0||_F)` using the weakest layer.
pub fn gen_response<R: Rng>(
    x: &DMatrix<f64>,
    truth: &FactorModel,
    spec: &SimSpec,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    if !(spec.snr > 0.0) {
        return Err(Error::invalid("snr must be positive"));
    }
    let last = truth
        .layers
        .last()
        .ok_or_else(|| Error::invalid("coefficient model has no layers"))?;
    let (n, q) = (x.nrows(), truth.q);
    let xu = x * &last.u;
    let weakest = operator_norm(&(xu * last.v.transpose() * last.d));
    if !(weakest > 0.0) {
        return Err(Error::DegenerateFactor("weakest layer carries no signal".into()));
    }
    let delta = DMatrix::from_fn(q, q, |i, j| spec.rho.powi(i.abs_diff(j) as i32));
    let l = psd_factor(&delta);
    let e0 = standard_normal(n, q, rng) * l.transpose();
    let sigma = weakest / (spec.snr * e0.norm());
    let e = e0 * sigma;
    let y = x * truth.to_matrix() + &e;
    Ok((y, e, sigma))
}

/// `||d_r X u_r v_r^T||_2 / ||E||_F` for a generated dataset.
pub fn realized_snr(truth: &SimTruth) -> f64 {
    let last = truth.factors.layers.last().expect("nonempty truth");
    let xu = &truth.x * &last.u;
    operator_norm(&(xu * last.v.transpose() * last.d)) / truth.e.norm()
}

/// Generates a full dataset; a pure function of `spec`.
pub fn gen_dataset(spec: &SimSpec) -> Result<SimTruth> {
    spec.validate()?;
    let factors = gen_coefficient(spec, &mut stream_rng(spec.seed, COEFFICIENT_STREAM))?;
    let x = gen_design(&factors.u_matrix(), spec, &mut stream_rng(spec.seed, DESIGN_STREAM))?;
    let (y, e, sigma) = gen_response(&x, &factors, spec, &mut stream_rng(spec.seed, NOISE_STREAM))?;
    Ok(SimTruth {
        spec: spec.clone(),
        c_star: factors.to_matrix(),
        factors,
        sigma,
        x,
        y,
        e,
    })
}
