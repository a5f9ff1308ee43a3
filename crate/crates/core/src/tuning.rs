//! Model selection along solution paths: information criteria, the
//! early-stopping rule and K-fold cross-validation.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::factor::UnitRankFactor;
use crate::objective::residual;

/// Information criterion used to pick a point on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gic,
    Aic,
    Bic,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gic" => Ok(Criterion::Gic),
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            other => Err(Error::invalid(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Inputs to an information criterion for a unit-rank fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionInput {
    /// Residual sum of squares over observed entries.
    pub rss: f64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Degrees of freedom, see [`degrees_of_freedom`].
    pub df: usize,
    /// Number of observed response entries; `None` means `n * q`.
    pub observed: Option<usize>,
}

impl CriterionInput {
    fn sample_size(&self) -> f64 {
        self.observed.unwrap_or(self.n * self.q) as f64
    }
}

/// `||u||_0 + ||v||_0 - 1`, clamped to 0 for the empty model.
pub fn degrees_of_freedom(factor: &UnitRankFactor) -> usize {
    if factor.is_zero() {
        return 0;
    }
    let (a, b) = factor.support_sizes();
    (a + b).saturating_sub(1)
}

/// Evaluates GIC, AIC or BIC. All logarithms are natural.
///
/// * GIC: `log(rss) + loglog(N) log(pq) / N * df`
/// * AIC: `N log(rss / N) + 2 df`
/// * BIC: `N log(rss / N) + log(N) df`
///
/// where `N = nq`, or the number of observed entries under a mask.
pub fn information_criterion(kind: Criterion, input: &CriterionInput) -> Result<f64> {
    if !(input.rss >= 0.0) || !input.rss.is_finite() {
        return Err(Error::invalid(format!("rss must be finite and >= 0, got {}", input.rss)));
    }
    if input.rss == 0.0 {
        return Err(Error::PerfectFit);
    }
    let nn = input.sample_size();
    let df = input.df as f64;
    let value = match kind {
        Criterion::Gic => {
            if nn < 3.0 {
                return Err(Error::invalid("GIC needs at least 3 observed entries"));
            }
            let pq = (input.p * input.q) as f64;
            input.rss.ln() + nn.ln().ln() * pq.ln() / nn * df
        }
        Criterion::Aic => nn * (input.rss / nn).ln() + 2.0 * df,
        Criterion::Bic => nn * (input.rss / nn).ln() + nn.ln() * df,
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("information criterion".into()));
    }
    Ok(value)
}

/// True iff the running minimum of `history` has not improved during the
/// last `window` entries. Non-finite entries never count as improvements.
pub fn early_stop_check(history: &[f64], window: usize) -> bool {
    let window = window.max(1);
    let mut best = f64::INFINITY;
    let mut best_at = None;
    for (i, &h) in history.iter().enumerate() {
        if h < best {
            best = h;
            best_at = Some(i);
        }
    }
    match best_at {
        Some(i) => history.len() - 1 - i >= window,
        None => history.len() >= window,
    }
}

/// Incremental form of [`early_stop_check`] for use inside a running solver.
#[derive(Debug, Clone)]
pub struct EarlyStopMonitor {
    window: usize,
    best: f64,
    since_best: usize,
}

impl EarlyStopMonitor {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    /// Records one value; returns true once the stop rule fires.
    pub fn push(&mut self, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.since_best = 0;
            false
        } else {
            self.since_best += 1;
            self.since_best >= self.window
        }
    }
}

/// One candidate on a solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub lambda: f64,
    pub factor: UnitRankFactor,
}

/// Result of [`kfold_cv_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    /// Index into the full-data path.
    pub index: usize,
    pub lambda: f64,
    /// Mean held-out error for every full-data path point.
    pub cv_error: Vec<f64>,
}

/// Seeded assignment of `n` rows to `k` folds; returns the row indices of
/// each fold. Rows are shuffled once and dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, r) in rows.into_iter().enumerate() {
        folds[i % k].push(r);
    }
    for f in &mut folds {
        if f.is_empty() {
            return Err(Error::invalid("fold with zero rows"));
        }
        f.sort_unstable();
    }
    Ok(folds)
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut in_fold = vec![false; n];
    for &i in fold {
        in_fold[i] = true;
    }
    (0..n).filter(|&i| !in_fold[i]).collect()
}

/// `(2 n_test)^{-1} ||P_H(Y_test - X_test C)||_F^2`.
pub fn held_out_error(test: &ProblemData, factor: &UnitRankFactor) -> Result<f64> {
    let e = residual(test, factor)?;
    Ok(e.norm_squared() / (2.0 * test.n() as f64))
}

fn nearest_index(points: &[PathPoint], lambda: f64) -> usize {
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for (i, pt) in points.iter().enumerate() {
        let gap = (pt.lambda - lambda).abs();
        if gap < best_gap {
            best_gap = gap;
            best = i;
        }
    }
    best
}

/// K-fold cross-validation over a path-producing solver.
///
/// The full-data path fixes the lambda grid. Each fold's path is aligned to
/// it by nearest lambda, and the point minimizing the mean held-out error
/// wins (ties go to the earlier, sparser point). Folds run concurrently and
/// the result does not depend on scheduling.
pub fn kfold_cv_select<F>(problem: &ProblemData, fit_fn: F, k: usize, seed: u64) -> Result<CvSelection>
where
    F: Fn(&ProblemData) -> Result<Vec<PathPoint>> + Sync,
{
    let n = problem.n();
    let folds = fold_assignment(n, k, seed)?;
    let full = fit_fn(problem)?;
    if full.is_empty() {
        return Err(Error::invalid("solver returned an empty path"));
    }
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|fold| -> Result<Vec<f64>> {
            let train = problem.select_rows(&complement(n, fold))?;
            let test = problem.select_rows(fold)?;
            let path = fit_fn(&train)?;
            if path.is_empty() {
                return Err(Error::invalid("solver returned an empty path"));
            }
            full.iter()
                .map(|pt| held_out_error(&test, &path[nearest_index(&path, pt.lambda)].factor))
                .collect()
        })
        .collect::<Result<_>>()?;
    let cv_error: Vec<f64> = (0..full.len())
        .map(|i| per_fold.iter().map(|f| f[i]).sum::<f64>() / k as f64)
        .collect();
    let mut index = None;
    for (i, &e) in cv_error.iter().enumerate() {
        if e.is_finite() && index.is_none_or(|j: usize| e < cv_error[j]) {
            index = Some(i);
        }
    }
    let index = index.ok_or_else(|| Error::NonFinite("all cross-validation errors".into()))?;
    Ok(CvSelection {
        index,
        lambda: full[index].lambda,
        cv_error,
    })
}

/// Mean held-out squared error of a coefficient-matrix fitter over K folds,
/// `(2 n_test)^{-1} ||Y_test - X_test C||_F^2` averaged across folds.
pub(crate) fn kfold_matrix_error<F>(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    folds: &[Vec<usize>],
    fit: F,
) -> Result<f64>
where
    F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let n = x.nrows();
    let mut total = 0.0;
    for fold in folds {
        let train = complement(n, fold);
        let c = fit(&x.select_rows(&train), &y.select_rows(&train))?;
        let e = y.select_rows(fold) - x.select_rows(fold) * c;
        total += e.norm_squared() / (2.0 * fold.len() as f64);
    }
    Ok(total / folds.len() as f64)
}
