//! Multi-rank estimation by deflation: each layer is a unit-rank CURE fit
//! on a response from which the other layers' signal has been removed.
//!
//! Sequential pursuit removes the layers already fitted. Parallel pursuit
//! removes the layers of an initial estimate (lasso or reduced-rank
//! regression), so all layers can be fitted independently.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    acs_cure, acs_path, default_lambda_grid, default_ridge, fit_rrr, lasso_cd_masked,
    lasso_lambda_max, ols_svd_init, AcsConfig, AcsInit, LassoConfig,
};
use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::factor::{renormalize_factor, FactorModel, NormMode, UnitRankFactor};
use crate::objective::{residual, residual_of};
use crate::stagewise::{run_path, select_on_path, StagewiseConfig};
use crate::svd::{hard_threshold_layer, p_orthogonal_svd};
use crate::tuning::{
    degrees_of_freedom, information_criterion, kfold_cv_select, Criterion, CriterionInput,
    PathPoint,
};

/// Unit-rank solver used for each layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSolver {
    Stagewise(StagewiseConfig),
    /// An empty `lambda_grid` means 50 log-spaced values from
    /// `n^{-1} max |X^T Y_k|` down to `1e-3` of it, per layer.
    Acs(AcsConfig),
}

/// How a point on a layer's solution path is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Criterion(Criterion),
    Lambda(f64),
    CrossValidation { folds: usize, seed: u64 },
}

/// Initial estimate for parallel pursuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// Entrywise lasso; `lambda0 = None` picks it by GIC over a lasso path.
    Lasso { lambda0: Option<f64> },
    /// Reduced-rank regression at the pursuit rank; `ridge = None` uses
    /// the default ridge.
    Rrr { ridge: Option<f64> },
    Given(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Sequential,
    Parallel,
}

/// Settings for [`sequential_pursuit`] and [`parallel_pursuit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationConfig {
    pub strategy: Strategy,
    pub rank: usize,
    pub solver: UnitSolver,
    pub selection: Selection,
    /// Required for parallel pursuit.
    pub initializer: Option<Initializer>,
    /// Keep only the `s` largest entries of each initial layer.
    pub s_threshold: Option<usize>,
    /// Fit parallel-pursuit layers on the rayon pool.
    pub parallel_layers_concurrent: bool,
}

impl DeflationConfig {
    pub fn sequential(rank: usize, solver: UnitSolver) -> Self {
        Self {
            strategy: Strategy::Sequential,
            rank,
            solver,
            selection: Selection::Criterion(Criterion::Gic),
            initializer: None,
            s_threshold: None,
            parallel_layers_concurrent: true,
        }
    }

    pub fn parallel(rank: usize, solver: UnitSolver, initializer: Initializer) -> Self {
        Self {
            strategy: Strategy::Parallel,
            initializer: Some(initializer),
            ..Self::sequential(rank, solver)
        }
    }

    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.selection = selection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if let Some(s) = self.s_threshold {
            if s < self.rank {
                return Err(Error::invalid("s_threshold must be at least the rank"));
            }
        }
        if self.strategy == Strategy::Parallel && self.initializer.is_none() {
            return Err(Error::invalid("parallel pursuit needs an initializer"));
        }
        if let Selection::Lambda(l) = self.selection {
            if !(l >= 0.0) {
                return Err(Error::invalid(format!("lambda must be >= 0, got {l}")));
            }
        }
        Ok(())
    }
}

/// A tuned unit-rank fit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFit {
    /// L1-normalized.
    pub factor: UnitRankFactor,
    pub lambda: f64,
}

fn criterion_of(problem: &ProblemData, factor: &UnitRankFactor, kind: Criterion) -> f64 {
    let rss = match residual(problem, factor) {
        Ok(e) => e.norm_squared(),
        Err(_) => return f64::NAN,
    };
    information_criterion(
        kind,
        &CriterionInput {
            rss,
            n: problem.n(),
            p: problem.p(),
            q: problem.q(),
            df: degrees_of_freedom(factor),
            observed: Some(problem.observed_count()),
        },
    )
    .unwrap_or(f64::NAN)
}

fn argmin_earliest(values: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::NonFinite("criterion values along the path".into()))
}

fn acs_grid(problem: &ProblemData, cfg: &AcsConfig) -> Vec<f64> {
    if cfg.lambda_grid.is_empty() {
        default_lambda_grid(problem, 50, 1e-3)
    } else {
        cfg.lambda_grid.clone()
    }
}

fn acs_points(problem: &ProblemData, cfg: &AcsConfig, grid: &[f64]) -> Result<Vec<PathPoint>> {
    let cfg = AcsConfig {
        lambda_grid: grid.to_vec(),
        ..cfg.clone()
    };
    Ok(acs_path(problem, &cfg)?
        .into_iter()
        .map(|(lambda, factor)| PathPoint { lambda, factor })
        .collect())
}

/// Fits and tunes one unit-rank CURE model.
pub fn fit_unit_rank(problem: &ProblemData, solver: &UnitSolver, selection: Selection) -> Result<UnitFit> {
    let zero = UnitRankFactor::zero(problem.p(), problem.q(), NormMode::L1);
    match solver {
        UnitSolver::Stagewise(cfg) => match selection {
            Selection::Criterion(kind) => {
                let cfg = cfg.with_criterion(Some(kind));
                let path = run_path(problem, &cfg)?;
                let step = select_on_path(&path, kind)?;
                Ok(UnitFit {
                    factor: step.factor_snapshot(),
                    lambda: step.lambda,
                })
            }
            Selection::Lambda(lambda) => {
                let path = run_path(problem, &cfg.with_criterion(None))?;
                Ok(UnitFit {
                    factor: path.factor_at(lambda),
                    lambda,
                })
            }
            Selection::CrossValidation { folds, seed } => {
                let fit = |p: &ProblemData| -> Result<Vec<PathPoint>> { Ok(run_path(p, cfg)?.points()) };
                let full = fit(problem)?;
                let sel = kfold_cv_select(problem, fit, folds, seed)?;
                Ok(UnitFit {
                    factor: full[sel.index].factor.clone(),
                    lambda: sel.lambda,
                })
            }
        },
        UnitSolver::Acs(cfg) => match selection {
            Selection::Lambda(lambda) => {
                let init = match &cfg.init {
                    AcsInit::Given(f) => Some(f.clone()),
                    AcsInit::SvdOfOls => ols_svd_init(problem)?,
                };
                let factor = match init {
                    Some(f) if !f.is_zero() => acs_cure(problem, lambda, cfg.mu, &f, cfg)?.factor,
                    _ => zero,
                };
                Ok(UnitFit { factor, lambda })
            }
            Selection::Criterion(kind) => {
                let grid = acs_grid(problem, cfg);
                if grid.is_empty() {
                    return Ok(UnitFit { factor: zero, lambda: 0.0 });
                }
                let points = acs_points(problem, cfg, &grid)?;
                let values: Vec<f64> = points.iter().map(|pt| criterion_of(problem, &pt.factor, kind)).collect();
                let best = argmin_earliest(&values)?;
                Ok(UnitFit {
                    factor: points[best].factor.clone(),
                    lambda: points[best].lambda,
                })
            }
            Selection::CrossValidation { folds, seed } => {
                let grid = acs_grid(problem, cfg);
                if grid.is_empty() {
                    return Ok(UnitFit { factor: zero, lambda: 0.0 });
                }
                let full = acs_points(problem, cfg, &grid)?;
                let sel = kfold_cv_select(problem, |p| acs_points(p, cfg, &grid), folds, seed)?;
                Ok(UnitFit {
                    factor: full[sel.index].factor.clone(),
                    lambda: sel.lambda,
                })
            }
        },
    }
}

fn to_porth(problem: &ProblemData, factor: &UnitRankFactor) -> Result<UnitRankFactor> {
    renormalize_factor(factor, problem.x(), NormMode::POrth)
}

/// Fits layers one at a time, each on the residual response left by the
/// layers before it. Stops early at the first zero layer.
pub fn sequential_pursuit(problem: &ProblemData, cfg: &DeflationConfig) -> Result<FactorModel> {
    cfg.validate()?;
    let mut model = FactorModel::empty(problem.p(), problem.q());
    let mut current = problem.clone();
    for k in 0..cfg.rank {
        let fit = fit_unit_rank(&current, &cfg.solver, cfg.selection).map_err(|e| e.in_layer(k))?;
        if fit.factor.is_zero() {
            log::info!("sequential_pursuit: layer {k} is zero, effective rank {k}");
            break;
        }
        let layer = to_porth(&current, &fit.factor).map_err(|e| e.in_layer(k))?;
        let next = residual(&current, &layer)?;
        model.push(layer);
        if k + 1 < cfg.rank {
            current = current.with_response(next)?;
        }
    }
    Ok(model)
}

/// Lasso initial estimate with `lambda0` chosen by GIC over a 50-point
/// log-spaced path (df = number of nonzero coefficients).
pub fn lasso_initial(problem: &ProblemData, lambda0: Option<f64>) -> Result<DMatrix<f64>> {
    let (x, y, mask) = (problem.x(), problem.y(), problem.mask());
    if let Some(l) = lambda0 {
        return Ok(lasso_cd_masked(x, y, mask, &LassoConfig::new(l), None)?.coef);
    }
    let lmax = lasso_lambda_max(x, y);
    if !(lmax > 0.0) {
        return Ok(DMatrix::zeros(problem.p(), problem.q()));
    }
    let len = 50;
    let step = (1e-3f64).ln() / (len - 1) as f64;
    let mut warm: Option<DMatrix<f64>> = None;
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for i in 0..len {
        let lambda = lmax * (step * i as f64).exp();
        let c = lasso_cd_masked(x, y, mask, &LassoConfig::new(lambda), warm.as_ref())?.coef;
        let rss = residual_of(problem, &c)?.norm_squared();
        let df = c.iter().filter(|v| **v != 0.0).count();
        let value = information_criterion(
            Criterion::Gic,
            &CriterionInput {
                rss,
                n: problem.n(),
                p: problem.p(),
                q: problem.q(),
                df,
                observed: Some(problem.observed_count()),
            },
        )
        .unwrap_or(f64::NAN);
        if value.is_finite() && best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, c.clone()));
        }
        warm = Some(c);
    }
    Ok(best.map(|(_, c)| c).unwrap_or_else(|| warm.expect("nonempty lasso path")))
}

/// The initial coefficient estimate for parallel pursuit.
pub fn initial_estimate(problem: &ProblemData, init: &Initializer, rank: usize) -> Result<DMatrix<f64>> {
    let c = match init {
        Initializer::Lasso { lambda0 } => lasso_initial(problem, *lambda0)?,
        Initializer::Rrr { ridge } => {
            let ridge = ridge.unwrap_or_else(|| default_ridge(problem.x()));
            fit_rrr(problem.x(), problem.y(), rank, ridge)?
        }
        Initializer::Given(c) => c.clone(),
    };
    if c.shape() != (problem.p(), problem.q()) {
        return Err(Error::dims(format!("initial estimate is {:?}", c.shape())));
    }
    Ok(c)
}

/// Fits every layer against the response with the other initial layers
/// removed. Layers are independent; concurrent and sequential evaluation
/// give identical results.
pub fn parallel_pursuit(problem: &ProblemData, cfg: &DeflationConfig) -> Result<FactorModel> {
    cfg.validate()?;
    let init = cfg
        .initializer
        .as_ref()
        .ok_or_else(|| Error::invalid("parallel pursuit needs an initializer"))?;
    let c0 = initial_estimate(problem, init, cfg.rank)?;
    let layers = p_orthogonal_svd(problem.x(), &c0, cfg.rank)?;
    let mut parts: Vec<DMatrix<f64>> = layers.layers.iter().map(|l| l.to_matrix()).collect();
    if let Some(s) = cfg.s_threshold {
        parts = parts.iter().map(|m| hard_threshold_layer(m, s)).collect();
    }
    // with one layer nothing is removed, so a rank-deficient start still
    // yields a single fit on (X, Y)
    let r = parts.len().max(1).min(cfg.rank);
    if parts.len() < cfg.rank {
        log::warn!(
            "parallel_pursuit: initial estimate has rank {}, fitting {r} layer(s)",
            parts.len()
        );
    }
    let xparts: Vec<DMatrix<f64>> = parts.iter().map(|m| problem.x() * m).collect();
    let fit_layer = |k: usize| -> Result<Option<UnitRankFactor>> {
        let mut yk = problem.y().clone();
        for (j, xm) in xparts.iter().enumerate() {
            if j != k {
                yk -= xm;
            }
        }
        let sub = problem.with_response(yk)?;
        let fit = fit_unit_rank(&sub, &cfg.solver, cfg.selection)?;
        if fit.factor.is_zero() {
            return Ok(None);
        }
        to_porth(&sub, &fit.factor).map(Some)
    };
    let fitted: Vec<Option<UnitRankFactor>> = if cfg.parallel_layers_concurrent {
        (0..r)
            .into_par_iter()
            .map(|k| fit_layer(k).map_err(|e| e.in_layer(k)))
            .collect::<Result<_>>()?
    } else {
        (0..r)
            .map(|k| fit_layer(k).map_err(|e| e.in_layer(k)))
            .collect::<Result<_>>()?
    };
    let mut model = FactorModel::empty(problem.p(), problem.q());
    for layer in fitted.into_iter().flatten() {
        model.push(layer);
    }
    Ok(model)
}

/// Dispatches on `cfg.strategy`.
pub fn pursue(problem: &ProblemData, cfg: &DeflationConfig) -> Result<FactorModel> {
    match cfg.strategy {
        Strategy::Sequential => sequential_pursuit(problem, cfg),
        Strategy::Parallel => parallel_pursuit(problem, cfg),
    }
}
