//! The estimation methods behind `--method`.

use cure::baselines::{default_ridge, rrr_model, select_rank_cv, AcsConfig};
use cure::data::ProblemData;
use cure::deflation::{lasso_initial, pursue, DeflationConfig, Initializer, Selection, UnitSolver};
use cure::factor::FactorModel;
use cure::stagewise::StagewiseConfig;
use cure::svd::p_orthogonal_svd;
use cure::tuning::Criterion;

use crate::config::{CriterionArg, Method, SolverArgs, DEFAULT_CV_FOLDS, DEFAULT_EPSILON, DEFAULT_MU, DEFAULT_RANK_CAP};
use crate::CliError;

/// Everything needed to run one method on one dataset.
#[derive(Debug, Clone)]
pub struct MethodSettings {
    pub method: Method,
    /// `None` selects the rank by RRR cross-validation.
    pub rank: Option<usize>,
    pub stagewise: StagewiseConfig,
    pub acs: AcsConfig,
    pub selection: Selection,
    pub cv_folds: usize,
    pub seed: u64,
    /// Fit parallel-pursuit layers concurrently.
    pub concurrent_layers: bool,
}

impl MethodSettings {
    pub fn new(method: Method, rank: Option<usize>, solver: &SolverArgs, seed: u64) -> Result<Self, CliError> {
        let epsilon = solver.epsilon.unwrap_or(DEFAULT_EPSILON);
        let mu = solver.mu.unwrap_or(DEFAULT_MU);
        let mut stagewise = StagewiseConfig::new(epsilon).with_mu(mu);
        if let Some(xi) = solver.xi {
            stagewise = stagewise.with_xi(xi);
        }
        if let Some(w) = solver.early_stop_window {
            stagewise = stagewise.with_early_stop_window(w);
        }
        if let Some(m) = solver.max_steps {
            stagewise = stagewise.with_max_steps(m);
        }
        stagewise.validate()?;
        let cv_folds = solver.cv_folds.unwrap_or(DEFAULT_CV_FOLDS);
        let selection = match solver.criterion.unwrap_or(CriterionArg::Gic) {
            CriterionArg::Gic => Selection::Criterion(Criterion::Gic),
            CriterionArg::Aic => Selection::Criterion(Criterion::Aic),
            CriterionArg::Bic => Selection::Criterion(Criterion::Bic),
            CriterionArg::Cv => Selection::CrossValidation { folds: cv_folds, seed },
        };
        Ok(Self {
            method,
            rank,
            stagewise,
            acs: AcsConfig::default().with_mu(mu),
            selection,
            cv_folds,
            seed,
            concurrent_layers: true,
        })
    }
}

/// Rank by 10-fold (or `cv_folds`) RRR cross-validation over
/// `0..=min(p, q, 10)`.
pub fn select_rank(problem: &ProblemData, folds: usize, seed: u64) -> Result<usize, CliError> {
    let x = problem.x();
    let r_max = problem.p().min(problem.q()).min(DEFAULT_RANK_CAP);
    Ok(select_rank_cv(x, problem.y(), r_max, folds, default_ridge(x), seed)?)
}

/// Fits `s.method`. Missing responses are zero-filled for RRR.
pub fn fit_method(problem: &ProblemData, s: &MethodSettings) -> Result<FactorModel, CliError> {
    let (p, q) = (problem.p(), problem.q());
    let x = problem.x();
    if s.method == Method::Lasso {
        let c = lasso_initial(problem, None)?;
        return Ok(p_orthogonal_svd(x, &c, p.min(q))?);
    }
    let rank = match s.rank {
        Some(r) => r,
        None => select_rank(problem, s.cv_folds, s.seed)?,
    };
    log::info!("{}: rank {rank}", s.method.name());
    if rank == 0 {
        return Ok(FactorModel::empty(p, q));
    }
    let stl = UnitSolver::Stagewise(s.stagewise);
    let acs = UnitSolver::Acs(s.acs.clone());
    let cfg = match s.method {
        Method::Rrr => return Ok(rrr_model(x, problem.y(), rank, default_ridge(x))?),
        Method::Lasso => unreachable!("handled above"),
        Method::Seqstl => DeflationConfig::sequential(rank, stl),
        Method::Seqacs => DeflationConfig::sequential(rank, acs),
        Method::ParstlL => DeflationConfig::parallel(rank, stl, Initializer::Lasso { lambda0: None }),
        Method::ParstlR => DeflationConfig::parallel(rank, stl, Initializer::Rrr { ridge: None }),
        Method::ParacsL => DeflationConfig::parallel(rank, acs, Initializer::Lasso { lambda0: None }),
        Method::ParacsR => DeflationConfig::parallel(rank, acs, Initializer::Rrr { ridge: None }),
    };
    let cfg = DeflationConfig {
        parallel_layers_concurrent: s.concurrent_layers,
        ..cfg.with_selection(s.selection)
    };
    Ok(pursue(problem, &cfg)?)
}

