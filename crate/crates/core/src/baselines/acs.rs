use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rrr::{default_ridge, ridge_ols};
use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::factor::{renormalize_factor, NormMode, UnitRankFactor};
use crate::svd::p_orthogonal_svd;

/// Starting point for the first lambda of an ACS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcsInit {
    /// Leading P-orthogonal layer of the ridge least-squares fit.
    SvdOfOls,
    Given(UnitRankFactor),
}

/// Settings for [`acs_cure`] and [`acs_path`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcsConfig {
    /// Strictly decreasing; only used by [`acs_path`].
    pub lambda_grid: Vec<f64>,
    pub mu: f64,
    /// Relative objective change below which alternation stops.
    pub tol: f64,
    /// Cap on alternations per lambda.
    pub max_iters: usize,
    pub init: AcsInit,
}

impl Default for AcsConfig {
    fn default() -> Self {
        Self {
            lambda_grid: Vec::new(),
            mu: 1e-4,
            tol: 1e-8,
            max_iters: 500,
            init: AcsInit::SvdOfOls,
        }
    }
}

impl AcsConfig {
    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid("ACS tol and max_iters must be positive"));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::invalid("lambda grid values must be >= 0"));
        }
        if self.lambda_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("lambda grid must be strictly decreasing"));
        }
        Ok(())
    }
}

/// Result of one ACS solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AcsFit {
    /// L1-normalized factor.
    pub factor: UnitRankFactor,
    /// Objective at the start and after every alternation.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `lambda_max = n^{-1} max |X^T P_H(Y)|` and a log-spaced grid of `len`
/// values from it down to `ratio * lambda_max`.
pub fn default_lambda_grid(problem: &ProblemData, len: usize, ratio: f64) -> Vec<f64> {
    let lmax = (problem.x().tr_mul(problem.y()) / problem.n() as f64).amax();
    if len == 0 || !(lmax > 0.0) {
        return Vec::new();
    }
    if len == 1 {
        return vec![lmax];
    }
    let step = ratio.ln() / (len - 1) as f64;
    (0..len).map(|i| lmax * (step * i as f64).exp()).collect()
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalized objective of `a b^T`.
fn objective(problem: &ProblemData, a: &DVector<f64>, b: &DVector<f64>, lambda: f64, mu: f64) -> f64 {
    let mut e = problem.y().clone();
    let xa = problem.x() * a;
    e.ger(-1.0, &xa, b, 1.0);
    problem.project(&mut e);
    e.norm_squared() / (2.0 * problem.n() as f64)
        + 0.5 * mu * a.norm_squared() * b.norm_squared()
        + lambda * a.lp_norm(1) * b.lp_norm(1)
}

/// Minimizes over `b` with `a` fixed; closed form per response column.
fn update_b(problem: &ProblemData, a: &DVector<f64>, lambda: f64, mu: f64) -> DVector<f64> {
    let n = problem.n() as f64;
    let xa = problem.x() * a;
    let (asq, al1) = (a.norm_squared(), a.lp_norm(1));
    let y = problem.y();
    DVector::from_fn(problem.q(), |k, _| {
        let (w, t) = match problem.mask() {
            None => (xa.norm_squared(), xa.dot(&y.column(k))),
            Some(m) => (0..problem.n()).filter(|&i| m[(i, k)]).fold((0.0, 0.0), |(w, t), i| {
                (w + xa[i] * xa[i], t + xa[i] * y[(i, k)])
            }),
        };
        let den = w / n + mu * asq;
        if den > 0.0 {
            soft(t / n, lambda * al1) / den
        } else {
            0.0
        }
    })
}

/// Minimizes over `a` with `b` fixed: a row-weighted elastic net
/// `(2n)^{-1} sum_i w_i (z_i - x_i^T a)^2 + mu'/2 |a|^2 + lambda' |a|_1`.
fn update_a(
    problem: &ProblemData,
    a: &DVector<f64>,
    b: &DVector<f64>,
    lambda: f64,
    mu: f64,
    tol: f64,
) -> DVector<f64> {
    let (n, p) = (problem.n(), problem.p());
    let nf = n as f64;
    let x = problem.x();
    let y = problem.y();
    let (w, z) = match problem.mask() {
        None => {
            let bsq = b.norm_squared();
            let yb = y * b;
            let z = if bsq > 0.0 { yb / bsq } else { DVector::zeros(n) };
            (DVector::from_element(n, bsq), z)
        }
        Some(m) => {
            let mut w = DVector::zeros(n);
            let mut z = DVector::zeros(n);
            for k in 0..problem.q() {
                for i in 0..n {
                    if m[(i, k)] {
                        w[i] += b[k] * b[k];
                        z[i] += y[(i, k)] * b[k];
                    }
                }
            }
            for i in 0..n {
                if w[i] > 0.0 {
                    z[i] /= w[i];
                }
            }
            (w, z)
        }
    };
    let ridge = mu * b.norm_squared();
    let l1 = lambda * b.lp_norm(1);
    if l1 == 0.0 {
        // plain weighted ridge: solve the normal equations directly
        let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * w[i]);
        let mut g = xw.tr_mul(x);
        for j in 0..p {
            g[(j, j)] += nf * ridge;
        }
        if let Some(ch) = g.cholesky() {
            let sol = ch.solve(&xw.tr_mul(&z));
            if sol.iter().all(|v| v.is_finite()) {
                return sol;
            }
        }
    }
    let sq: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| w[i] * x[(i, j)] * x[(i, j)]).sum::<f64>() / nf)
        .collect();
    let mut a = a.clone();
    let mut r = &z - x * &a;
    for _ in 0..10_000 {
        let mut max_move: f64 = 0.0;
        for j in 0..p {
            let den = sq[j] + ridge;
            if den == 0.0 {
                a[j] = 0.0;
                continue;
            }
            let xj = x.column(j);
            let g: f64 = (0..n).map(|i| w[i] * xj[i] * r[i]).sum::<f64>() / nf;
            let new = soft(g + sq[j] * a[j], l1) / den;
            let delta = new - a[j];
            if delta != 0.0 {
                r.axpy(-delta, &xj, 1.0);
                a[j] = new;
                max_move = max_move.max(delta.abs() * den.sqrt());
            }
        }
        if max_move <= tol {
            break;
        }
    }
    a
}

/// Alternating convex search for the CURE problem at a single `lambda`.
///
/// The products `a = d u` (with `v` fixed) and `b = d v` (with `u` fixed)
/// are updated in turn; each block is a convex lasso-type problem. The
/// objective is nonincreasing across alternations. Missing responses enter
/// through the mask projection of the residual.
pub fn acs_cure(
    problem: &ProblemData,
    lambda: f64,
    mu: f64,
    init: &UnitRankFactor,
    cfg: &AcsConfig,
) -> Result<AcsFit> {
    cfg.validate()?;
    if !(lambda >= 0.0) || !(mu >= 0.0) {
        return Err(Error::invalid("lambda and mu must be >= 0"));
    }
    if init.p() != problem.p() || init.q() != problem.q() {
        return Err(Error::dims("initial factor does not match the problem"));
    }
    if problem.observed_count() == 0 {
        return Err(Error::NoObservedEntries);
    }
    let mut a = &init.u * init.d;
    let mut b = init.v.clone();
    if init.is_zero() || (problem.x() * &a).norm_squared() == 0.0 || b.amax() == 0.0 {
        return Err(Error::DegenerateFactor("initial factor has X u = 0".into()));
    }
    // the split between a and b is free; keep |b|_1 = 1
    let s = b.lp_norm(1);
    b /= s;
    a *= s;

    let inner_tol = (cfg.tol * 1e-2).max(1e-14);
    let mut f = objective(problem, &a, &b, lambda, mu);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        b = update_b(problem, &a, lambda, mu);
        let bl1 = b.lp_norm(1);
        if bl1 == 0.0 {
            a.fill(0.0);
            trace.push(objective(problem, &a, &b, lambda, mu));
            converged = true;
            break;
        }
        b /= bl1;
        a *= bl1;
        a = update_a(problem, &a, &b, lambda, mu, inner_tol);
        if a.amax() == 0.0 {
            b.fill(0.0);
            trace.push(objective(problem, &a, &b, lambda, mu));
            converged = true;
            break;
        }
        let f_new = objective(problem, &a, &b, lambda, mu);
        trace.push(f_new);
        let change = f - f_new;
        f = f_new;
        if change.abs() <= cfg.tol * f.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("acs_cure: max_iters = {} reached at lambda = {lambda}", cfg.max_iters);
    }
    let d = a.lp_norm(1) * b.lp_norm(1);
    let factor = if d == 0.0 {
        UnitRankFactor::zero(problem.p(), problem.q(), NormMode::L1)
    } else {
        renormalize_factor(&UnitRankFactor::new(1.0, a, b, NormMode::Raw), problem.x(), NormMode::L1)?
    };
    Ok(AcsFit {
        factor,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Rank-one P-orthogonal layer of the ridge least-squares fit, used as the
/// default ACS starting point. `None` when that fit is zero.
pub fn ols_svd_init(problem: &ProblemData) -> Result<Option<UnitRankFactor>> {
    let x = problem.x();
    let b = ridge_ols(x, problem.y(), default_ridge(x))?;
    let model = p_orthogonal_svd(x, &b, 1)?;
    Ok(model.layers.into_iter().next())
}

/// Single-entry start at the pair `(j, k)` with the largest marginal loss
/// reduction `(x_j^T P_H(y_k))^2 / |P_H x_j|^2`, scaled to its least-squares
/// coefficient. `None` when `X^T P_H(Y) = 0`.
pub fn best_entry_init(problem: &ProblemData) -> Option<UnitRankFactor> {
    let x = problem.x();
    let y = problem.y();
    let (p, q) = (problem.p(), problem.q());
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for k in 0..q {
        for j in 0..p {
            let (mut xy, mut xx) = (0.0, 0.0);
            for i in 0..problem.n() {
                if problem.is_observed(i, k) {
                    xy += x[(i, j)] * y[(i, k)];
                    xx += x[(i, j)] * x[(i, j)];
                }
            }
            if xx == 0.0 || xy == 0.0 {
                continue;
            }
            let gain = xy * xy / xx;
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, j, k, xy / xx));
            }
        }
    }
    let (_, j, k, coef) = best?;
    let mut u = DVector::zeros(p);
    let mut v = DVector::zeros(q);
    u[j] = coef.signum();
    v[k] = 1.0;
    Some(UnitRankFactor::new(coef.abs(), u, v, NormMode::L1))
}

fn solve_from(problem: &ProblemData, lambda: f64, cfg: &AcsConfig, start: &UnitRankFactor) -> Result<(f64, UnitRankFactor)> {
    let fit = acs_cure(problem, lambda, cfg.mu, start, cfg)?;
    Ok((*fit.objective_trace.last().expect("trace is never empty"), fit.factor))
}

/// ACS over `cfg.lambda_grid`, each solve warm-started from the previous
/// one. Zero is a stationary point of the problem with a wide basin at large
/// lambda: when a cold start (first lambda, or after a zero solution) ends
/// at zero, the best single-entry start is tried too and kept if its
/// objective is lower.
pub fn acs_path(problem: &ProblemData, cfg: &AcsConfig) -> Result<Vec<(f64, UnitRankFactor)>> {
    cfg.validate()?;
    if cfg.lambda_grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    let usable = |f: &UnitRankFactor| !f.is_zero() && (problem.x() * &f.u).amax() > 0.0;
    let configured = match &cfg.init {
        AcsInit::Given(f) => Some(f.clone()),
        AcsInit::SvdOfOls => ols_svd_init(problem)?,
    }
    .filter(usable);
    let entry = best_entry_init(problem).filter(usable);
    let zero = UnitRankFactor::zero(problem.p(), problem.q(), NormMode::L1);
    let mut warm: Option<UnitRankFactor> = None;
    let mut out = Vec::with_capacity(cfg.lambda_grid.len());
    for &lambda in &cfg.lambda_grid {
        let factor = if let Some(f) = warm.take() {
            solve_from(problem, lambda, cfg, &f)?.1
        } else {
            let mut best = match &configured {
                Some(f) => Some(solve_from(problem, lambda, cfg, f)?),
                None => None,
            };
            if best.as_ref().is_none_or(|(_, f)| f.is_zero()) {
                if let Some(e) = &entry {
                    let alt = solve_from(problem, lambda, cfg, e)?;
                    if best.as_ref().is_none_or(|(v, _)| alt.0 < *v) {
                        best = Some(alt);
                    }
                }
            }
            best.map_or_else(|| zero.clone(), |b| b.1)
        };
        warm = Some(factor.clone()).filter(|f| !f.is_zero());
        out.push((lambda, factor));
    }
    Ok(out)
}
