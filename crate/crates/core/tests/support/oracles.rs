// Scalar-loop reference implementations of the model formulas, with
// proptest strategies for tiny random instances. Shared by the property
// tests and the acceptance harness.
#![allow(dead_code)]

use cure::data::ProblemData;
use cure::factor::{FactorModel, NormMode, UnitRankFactor};
use cure::metrics::{estimation_errors, model_selection_rates};
use cure::objective::{eval_loss, eval_penalty};
use cure::tuning::{degrees_of_freedom, information_criterion, Criterion, CriterionInput};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const TOL: f64 = 1e-10;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

/// A tiny unit-rank problem with a mask and a factor.
#[derive(Debug, Clone)]
pub struct Tiny {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
    pub d: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

impl Tiny {
    pub fn n(&self) -> usize {
        self.x.len()
    }
    pub fn p(&self) -> usize {
        self.u.len()
    }
    pub fn q(&self) -> usize {
        self.v.len()
    }

    pub fn problem(&self) -> ProblemData {
        let (n, p, q) = (self.n(), self.p(), self.q());
        let x = DMatrix::from_fn(n, p, |i, j| self.x[i][j]);
        let y = DMatrix::from_fn(n, q, |i, k| self.y[i][k]);
        let h = DMatrix::from_fn(n, q, |i, k| self.mask[i][k]);
        ProblemData::with_mask(x, y, h).expect("valid tiny problem")
    }

    pub fn factor(&self) -> UnitRankFactor {
        UnitRankFactor::new(
            self.d,
            DVector::from_vec(self.u.clone()),
            DVector::from_vec(self.v.clone()),
            NormMode::Raw,
        )
    }

    /// Residual sum of squares over observed entries.
    pub fn rss(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n() {
            for k in 0..self.q() {
                if self.mask[i][k] {
                    let mut fit = 0.0;
                    for j in 0..self.p() {
                        fit += self.x[i][j] * self.u[j];
                    }
                    let e = self.y[i][k] - self.d * fit * self.v[k];
                    s += e * e;
                }
            }
        }
        s
    }

    pub fn observed(&self) -> usize {
        self.mask.iter().flatten().filter(|b| **b).count()
    }
}

fn sparse_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((any::<bool>(), -3.0..3.0f64), len)
        .prop_map(|v| v.into_iter().map(|(keep, x)| if keep { x } else { 0.0 }).collect())
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, cols), rows)
}

pub fn tiny() -> impl Strategy<Value = Tiny> {
    (1usize..=5, 1usize..=5, 1usize..=5).prop_flat_map(|(n, p, q)| {
        (
            matrix(n, p),
            matrix(n, q),
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.8), q), n),
            0.0..5.0f64,
            sparse_vec(p),
            sparse_vec(q),
            0.0..5.0f64,
            0.0..2.0f64,
        )
            .prop_map(|(x, y, mut mask, d, u, v, lambda, mu)| {
                mask[0][0] = true;
                Tiny {
                    x,
                    y,
                    mask,
                    d,
                    u,
                    v,
                    lambda,
                    mu,
                }
            })
    })
}

pub fn check_loss(t: Tiny) -> Result<(), TestCaseError> {
    let mut su = 0.0;
    let mut sv = 0.0;
    for j in 0..t.p() {
        su += t.u[j] * t.u[j];
    }
    for k in 0..t.q() {
        sv += t.v[k] * t.v[k];
    }
    let oracle = t.rss() / (2.0 * t.n() as f64) + 0.5 * t.mu * t.d * t.d * su * sv;
    let got = eval_loss(&t.problem(), &t.factor(), t.mu).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(got, oracle), "loss {got} vs oracle {oracle}");
    Ok(())
}

pub fn check_penalty(t: Tiny) -> Result<(), TestCaseError> {
    let mut au = 0.0;
    let mut av = 0.0;
    for j in 0..t.p() {
        au += t.u[j].abs();
    }
    for k in 0..t.q() {
        av += t.v[k].abs();
    }
    let oracle = t.lambda * t.d * au * av;
    let got = eval_penalty(&t.factor(), t.lambda).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(got, oracle), "penalty {got} vs oracle {oracle}");
    Ok(())
}

fn df_oracle(t: &Tiny) -> usize {
    let mut a = 0;
    let mut b = 0;
    for j in 0..t.p() {
        if t.u[j] != 0.0 {
            a += 1;
        }
    }
    for k in 0..t.q() {
        if t.v[k] != 0.0 {
            b += 1;
        }
    }
    if t.d == 0.0 || a == 0 || b == 0 {
        0
    } else {
        a + b - 1
    }
}

pub fn check_df(t: Tiny) -> Result<(), TestCaseError> {
    let got = degrees_of_freedom(&t.factor());
    let oracle = df_oracle(&t);
    prop_assert_eq!(got, oracle);
    Ok(())
}

pub fn check_gic(t: Tiny) -> Result<(), TestCaseError> {
    let rss = t.rss();
    let nn = t.observed() as f64;
    prop_assume!(rss > 1e-8 && nn >= 3.0);
    let df = df_oracle(&t);
    let pq = (t.p() * t.q()) as f64;
    let oracle = rss.ln() + nn.ln().ln() * pq.ln() / nn * df as f64;
    let input = CriterionInput {
        rss,
        n: t.n(),
        p: t.p(),
        q: t.q(),
        df,
        observed: Some(t.observed()),
    };
    let got = information_criterion(Criterion::Gic, &input).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(got, oracle), "gic {got} vs oracle {oracle}");
    Ok(())
}

/// Two coefficient matrices and a design for the estimation errors.
#[derive(Debug, Clone)]
pub struct ErCase {
    pub x: Vec<Vec<f64>>,
    pub c_hat: Vec<Vec<f64>>,
    pub c_star: Vec<Vec<f64>>,
}

pub fn er_case() -> impl Strategy<Value = ErCase> {
    (1usize..=5, 1usize..=5, 1usize..=5)
        .prop_flat_map(|(n, p, q)| (matrix(n, p), matrix(p, q), matrix(p, q)))
        .prop_map(|(x, c_hat, c_star)| ErCase { x, c_hat, c_star })
}

pub fn check_er(c: ErCase) -> Result<(), TestCaseError> {
    let (n, p, q) = (c.x.len(), c.c_hat.len(), c.c_hat[0].len());
    let mut ec = 0.0;
    for j in 0..p {
        for k in 0..q {
            let d = c.c_hat[j][k] - c.c_star[j][k];
            ec += d * d;
        }
    }
    let mut exc = 0.0;
    for i in 0..n {
        for k in 0..q {
            let mut s = 0.0;
            for j in 0..p {
                s += c.x[i][j] * (c.c_hat[j][k] - c.c_star[j][k]);
            }
            exc += s * s;
        }
    }
    let oracle = (ec / (p * q) as f64, exc / (n * q) as f64);
    let m = |v: &Vec<Vec<f64>>, r: usize, s: usize| DMatrix::from_fn(r, s, |a, b| v[a][b]);
    let got = estimation_errors(&m(&c.c_hat, p, q), &m(&c.c_star, p, q), &m(&c.x, n, p))
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(got.0, oracle.0), "er_c {} vs {}", got.0, oracle.0);
    prop_assert!(close(got.1, oracle.1), "er_xc {} vs {}", got.1, oracle.1);
    Ok(())
}

/// Estimated and true layers for the selection rates.
#[derive(Debug, Clone)]
pub struct RateCase {
    pub p: usize,
    pub q: usize,
    /// `(d, u, v)` per layer.
    pub est: Vec<(f64, Vec<f64>, Vec<f64>)>,
    pub truth: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

fn layers(p: usize, q: usize, max: usize) -> impl Strategy<Value = Vec<(f64, Vec<f64>, Vec<f64>)>> {
    prop::collection::vec((0.5..10.0f64, sparse_vec(p), sparse_vec(q)), 0..=max)
}

pub fn rate_case() -> impl Strategy<Value = RateCase> {
    (1usize..=6, 1usize..=6, 1usize..=3).prop_flat_map(|(p, q, r)| {
        (layers(p, q, r + 1), layers(p, q, r).prop_filter("truth needs a layer", |l| !l.is_empty()))
            .prop_map(move |(est, truth)| RateCase { p, q, est, truth })
    })
}

fn model(p: usize, q: usize, layers: &[(f64, Vec<f64>, Vec<f64>)]) -> FactorModel {
    let mut m = FactorModel::empty(p, q);
    for (d, u, v) in layers {
        m.push(UnitRankFactor::new(
            *d,
            DVector::from_vec(u.clone()),
            DVector::from_vec(v.clone()),
            NormMode::Raw,
        ));
    }
    m
}

pub fn check_rates(c: RateCase) -> Result<(), TestCaseError> {
    // match layers by descending d; missing estimated layers are zero
    let order = |l: &[(f64, Vec<f64>, Vec<f64>)]| {
        let mut idx: Vec<usize> = (0..l.len()).collect();
        idx.sort_by(|&a, &b| l[b].0.total_cmp(&l[a].0));
        idx
    };
    let eo = order(&c.est);
    let to = order(&c.truth);
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    let mut tally = |t: f64, e: f64| match (t.abs() > 1e-12, e.abs() > 1e-12) {
        (true, true) => tp += 1,
        (true, false) => fnn += 1,
        (false, true) => fp += 1,
        (false, false) => tn += 1,
    };
    for (k, &ti) in to.iter().enumerate() {
        let est = eo.get(k).map(|&e| &c.est[e]);
        for j in 0..c.p {
            tally(c.truth[ti].1[j], est.map_or(0.0, |e| e.1[j]));
        }
        for l in 0..c.q {
            tally(c.truth[ti].2[l], est.map_or(0.0, |e| e.2[l]));
        }
    }
    let fpr = if tn + fp == 0 { 0.0 } else { fp as f64 / (tn + fp) as f64 };
    let fnr = if tp + fnn == 0 { 0.0 } else { fnn as f64 / (tp + fnn) as f64 };
    let got = model_selection_rates(&model(c.p, c.q, &c.est), &model(c.p, c.q, &c.truth))
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(close(got.fpr, fpr), "fpr {} vs {}", got.fpr, fpr);
    prop_assert!(close(got.fnr, fnr), "fnr {} vs {}", got.fnr, fnr);
    Ok(())
}
