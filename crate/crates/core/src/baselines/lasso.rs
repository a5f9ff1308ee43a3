use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Mask;
use crate::error::{Error, Result};

/// Settings for [`lasso_cd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Stop once no coordinate moves by more than `tol` (in units of
    /// `n^{-1/2} |x_j|`).
    pub tol: f64,
    /// Cap on full coordinate sweeps per response column.
    pub max_iters: usize,
}

impl LassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            tol: 1e-10,
            max_iters: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid("lasso tol and max_iters must be positive"));
        }
        Ok(())
    }
}

/// Output of [`lasso_cd`].
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: DMatrix<f64>,
    /// False when some column hit `max_iters`; `coef` is then the last iterate.
    pub converged: bool,
    /// Objective of each response column after every sweep.
    pub sweep_objectives: Vec<Vec<f64>>,
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

/// `n^{-1} max |X^T Y|`: the smallest lambda with an all-zero lasso solution.
pub fn lasso_lambda_max(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x.tr_mul(y) / x.nrows() as f64).amax()
}

/// Cyclic coordinate descent for
/// `(2n)^{-1} ||Y - X C||_F^2 + lambda ||C||_1`.
///
/// Columns of `Y` decouple and are solved independently (in parallel, with
/// results that do not depend on scheduling).
pub fn lasso_cd(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    cfg: &LassoConfig,
    warm: Option<&DMatrix<f64>>,
) -> Result<LassoFit> {
    lasso_cd_masked(x, y, None, cfg, warm)
}

/// [`lasso_cd`] with the loss restricted to observed entries of `Y`.
pub fn lasso_cd_masked(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mask: Option<&Mask>,
    cfg: &LassoConfig,
    warm: Option<&DMatrix<f64>>,
) -> Result<LassoFit> {
    cfg.validate()?;
    let (n, p) = x.shape();
    let q = y.ncols();
    if y.nrows() != n {
        return Err(Error::dims(format!("X has {n} rows, Y has {}", y.nrows())));
    }
    if let Some(w) = warm {
        if w.shape() != (p, q) {
            return Err(Error::dims(format!("warm start is {:?}, expected {p}x{q}", w.shape())));
        }
    }
    if let Some(m) = mask {
        if m.shape() != y.shape() {
            return Err(Error::dims("mask shape differs from Y"));
        }
    }
    let full_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let cols: Vec<(DVector<f64>, bool, Vec<f64>)> = (0..q)
        .into_par_iter()
        .map(|k| {
            let rows: Option<Vec<bool>> = mask.map(|m| m.column(k).iter().copied().collect());
            let start = warm.map(|w| w.column(k).into_owned());
            solve_column(x, &y.column(k).into_owned(), rows.as_deref(), &full_sq, cfg, start)
        })
        .collect();
    let mut coef = DMatrix::zeros(p, q);
    let mut converged = true;
    let mut sweep_objectives = Vec::with_capacity(q);
    for (k, (c, ok, trace)) in cols.into_iter().enumerate() {
        coef.set_column(k, &c);
        converged &= ok;
        sweep_objectives.push(trace);
    }
    if !converged {
        log::warn!("lasso_cd: max_iters = {} reached before convergence", cfg.max_iters);
    }
    Ok(LassoFit {
        coef,
        converged,
        sweep_objectives,
    })
}

fn solve_column(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    rows: Option<&[bool]>,
    full_sq: &[f64],
    cfg: &LassoConfig,
    start: Option<DVector<f64>>,
) -> (DVector<f64>, bool, Vec<f64>) {
    let (n, p) = x.shape();
    let nf = n as f64;
    let keep = |i: usize| rows.is_none_or(|r| r[i]);
    let mut y = y.clone();
    for i in 0..n {
        if !keep(i) {
            y[i] = 0.0;
        }
    }
    let sq: Vec<f64> = match rows {
        None => full_sq.to_vec(),
        Some(r) => (0..p)
            .map(|j| (0..n).filter(|&i| r[i]).map(|i| x[(i, j)] * x[(i, j)]).sum())
            .collect(),
    };
    let mut c = start.unwrap_or_else(|| DVector::zeros(p));
    let mut r = &y - x * &c;
    for i in 0..n {
        if !keep(i) {
            r[i] = 0.0;
        }
    }
    let objective = |r: &DVector<f64>, c: &DVector<f64>| {
        r.norm_squared() / (2.0 * nf) + cfg.lambda * c.lp_norm(1)
    };
    let mut trace = Vec::new();
    for _ in 0..cfg.max_iters {
        let mut max_move: f64 = 0.0;
        for j in 0..p {
            if sq[j] == 0.0 {
                if c[j] != 0.0 {
                    c[j] = 0.0;
                }
                continue;
            }
            let a = sq[j] / nf;
            let xj = x.column(j);
            let grad = match rows {
                None => xj.dot(&r),
                Some(m) => (0..n).filter(|&i| m[i]).map(|i| xj[i] * r[i]).sum(),
            } / nf;
            let new = soft(grad + a * c[j], cfg.lambda) / a;
            let delta = new - c[j];
            if delta != 0.0 {
                for i in 0..n {
                    if keep(i) {
                        r[i] -= delta * xj[i];
                    }
                }
                c[j] = new;
                max_move = max_move.max(delta.abs() * a.sqrt());
            }
        }
        trace.push(objective(&r, &c));
        if max_move <= cfg.tol {
            return (c, true, trace);
        }
    }
    (c, false, trace)
}

/// `n^{-1} max |X^T (Y - X C)|` over observed entries: the KKT residual
/// that is at most `lambda` at an exact lasso solution.
pub fn lasso_kkt_residual(x: &DMatrix<f64>, y: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    (x.tr_mul(&(y - x * c)) / x.nrows() as f64).amax()
}
