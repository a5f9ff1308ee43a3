//! Estimation error, support recovery and model-size summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::FactorModel;

/// Entries with magnitude at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// One row of an evaluation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub er_c: f64,
    pub er_xc: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub u_l0: usize,
    pub u_l20: usize,
    pub v_l0: usize,
    pub v_l20: usize,
    pub rank: usize,
    pub wall_time_s: f64,
}

/// Confusion counts of estimated against true zero patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// `FP / (TN + FP)`, or 0 when there are no true zeros.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.tn + self.fp)
    }

    /// `FN / (TP + FN)`, or 0 when there are no true nonzeros.
    pub fn fnr(&self) -> f64 {
        ratio(self.fn_, self.tp + self.fn_)
    }

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Pooled and per-matrix support recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRates {
    pub fpr: f64,
    pub fnr: f64,
    pub pooled: Confusion,
    pub u: Confusion,
    pub v: Confusion,
    /// Set when a rate had an empty denominator and was reported as 0.
    pub degenerate: bool,
}

/// `||C_hat - C*||_F^2 / (pq)` and `||X (C_hat - C*)||_F^2 / (nq)`.
pub fn estimation_errors(
    c_hat: &DMatrix<f64>,
    c_star: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    if c_hat.shape() != c_star.shape() {
        return Err(Error::dims(format!(
            "estimate is {:?}, truth is {:?}",
            c_hat.shape(),
            c_star.shape()
        )));
    }
    if x.ncols() != c_hat.nrows() {
        return Err(Error::dims(format!("X has {} columns, C has {} rows", x.ncols(), c_hat.nrows())));
    }
    let (p, q) = c_hat.shape();
    let delta = c_hat - c_star;
    let er_c = delta.norm_squared() / (p * q) as f64;
    let er_xc = (x * delta).norm_squared() / (x.nrows() * q) as f64;
    Ok((er_c, er_xc))
}

fn confusion(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Confusion {
    let mut c = Confusion::default();
    for (&e, &t) in est.iter().zip(truth.iter()) {
        match (t.abs() > ZERO_TOL, e.abs() > ZERO_TOL) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// False positive and false negative rates of the zero patterns of
/// `U_hat, V_hat` against `U*, V*`, pooled over both matrices.
pub fn selection_rates(
    u_hat: &DMatrix<f64>,
    v_hat: &DMatrix<f64>,
    u_star: &DMatrix<f64>,
    v_star: &DMatrix<f64>,
) -> Result<SelectionRates> {
    if u_hat.shape() != u_star.shape() || v_hat.shape() != v_star.shape() {
        return Err(Error::dims(format!(
            "U/V estimates are {:?}/{:?}, truth is {:?}/{:?}",
            u_hat.shape(),
            v_hat.shape(),
            u_star.shape(),
            v_star.shape()
        )));
    }
    let u = confusion(u_hat, u_star);
    let v = confusion(v_hat, v_star);
    let pooled = u.add(v);
    Ok(SelectionRates {
        fpr: pooled.fpr(),
        fnr: pooled.fnr(),
        pooled,
        u,
        v,
        degenerate: pooled.tn + pooled.fp == 0 || pooled.tp + pooled.fn_ == 0,
    })
}

/// Stacks the layers of `model` by descending `d` into `rank`-column
/// matrices, padding missing layers with zeros.
pub fn aligned_loadings(model: &FactorModel, rank: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..model.layers.len()).collect();
    order.sort_by(|&a, &b| model.layers[b].d.total_cmp(&model.layers[a].d));
    let mut u = DMatrix::zeros(model.p, rank);
    let mut v = DMatrix::zeros(model.q, rank);
    for (k, &l) in order.iter().take(rank).enumerate() {
        let layer = &model.layers[l];
        if layer.d != 0.0 {
            u.set_column(k, &layer.u);
            v.set_column(k, &layer.v);
        }
    }
    (u, v)
}

/// [`selection_rates`] for two factor models, with layers matched by
/// descending `d`. Missing estimated layers count as all-zero.
pub fn model_selection_rates(estimate: &FactorModel, truth: &FactorModel) -> Result<SelectionRates> {
    if estimate.p != truth.p || estimate.q != truth.q {
        return Err(Error::dims("estimate and truth have different p, q"));
    }
    let r = truth.layers.len();
    let (uh, vh) = aligned_loadings(estimate, r);
    let (us, vs) = aligned_loadings(truth, r);
    selection_rates(&uh, &vh, &us, &vs)
}

/// `(||U||_0, ||U||_{2,0}, ||V||_0, ||V||_{2,0})` over the stacked layers.
pub fn sparsity_summary(model: &FactorModel) -> (usize, usize, usize, usize) {
    let live: Vec<_> = model.layers.iter().filter(|l| l.d != 0.0).collect();
    let count = |len: usize, get: &dyn Fn(usize, usize) -> f64| {
        let mut entries = 0;
        let mut rows = 0;
        for j in 0..len {
            let nz = (0..live.len()).filter(|&k| get(j, k).abs() > ZERO_TOL).count();
            entries += nz;
            rows += usize::from(nz > 0);
        }
        (entries, rows)
    };
    let (u0, u20) = count(model.p, &|j, k| live[k].u[j]);
    let (v0, v20) = count(model.q, &|j, k| live[k].v[j]);
    (u0, u20, v0, v20)
}

/// Full evaluation of a fitted model against the truth.
pub fn evaluate(
    estimate: &FactorModel,
    truth: &FactorModel,
    x: &DMatrix<f64>,
    wall_time_s: f64,
) -> Result<EvalReport> {
    let (er_c, er_xc) = estimation_errors(&estimate.to_matrix(), &truth.to_matrix(), x)?;
    let rates = model_selection_rates(estimate, truth)?;
    let (u_l0, u_l20, v_l0, v_l20) = sparsity_summary(estimate);
    Ok(EvalReport {
        er_c,
        er_xc,
        fpr: rates.fpr,
        fnr: rates.fnr,
        u_l0,
        u_l20,
        v_l0,
        v_l20,
        rank: estimate.layers.iter().filter(|l| l.d != 0.0).count(),
        wall_time_s,
    })
}

/// Mean and sample standard deviation after dropping `trim` of the values
/// from each end (`trim = 0.1` is the 10% trimmed mean).
pub fn trimmed_mean_sd(values: &[f64], trim: f64) -> Result<(f64, f64)> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::invalid(format!("trim must lie in [0, 0.5), got {trim}")));
    }
    if values.is_empty() {
        return Err(Error::invalid("no values to aggregate"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = (trim * v.len() as f64).floor() as usize;
    let kept = &v[cut..v.len() - cut];
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / m;
    let sd = if kept.len() > 1 {
        (kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((mean, sd))
}
