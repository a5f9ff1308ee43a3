//! Co-sparse unit-rank factor regression.
//!
//! Estimates a sparse singular value decomposition `C = sum_k d_k u_k v_k^T`
//! of the coefficient matrix in the multivariate regression `Y = X C + E`.
//! Each layer solves the unit-rank problem
//!
//! ```text
//! min (2n)^{-1} ||P_H(Y - d X u v^T)||_F^2 + (mu/2) ||d u v^T||_F^2 + lambda d ||u||_1 ||v||_1
//! ```
//!
//! either by tracing its whole solution path with contended stagewise
//! learning ([`stagewise`]) or by alternating convex search at fixed lambda
//! ([`baselines`]). Layers are combined by sequential or parallel deflation
//! ([`deflation`]).
//!
//! ```
//! use cure::prelude::*;
//!
//! let spec = SimSpec::new(SimModel::I, 40, 40, 40, 1).with_snr(0.5).with_seed(7);
//! let truth = gen_dataset(&spec)?;
//! let problem = ProblemData::new(truth.x.clone(), truth.y.clone())?;
//! let path = run_path(&problem, &StagewiseConfig::new(0.5))?;
//! let best = select_on_path(&path, Criterion::Gic)?;
//! assert!(best.factor.df() > 0);
//! # Ok::<(), cure::Error>(())
//! ```

// `!(x >= 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod deflation;
mod error;
pub mod factor;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod simgen;
pub mod stagewise;
pub mod svd;
pub mod tuning;

pub use error::{Error, Result};

/// The types and entry points most programs need.
pub mod prelude {
    pub use crate::baselines::{
        acs_cure, acs_path, fit_rrr, lasso_cd, select_rank_cv, AcsConfig, LassoConfig,
    };
    pub use crate::data::{Mask, ProblemData};
    pub use crate::deflation::{
        parallel_pursuit, sequential_pursuit, DeflationConfig, Initializer, Selection, UnitSolver,
    };
    pub use crate::factor::{FactorModel, NormMode, UnitRankFactor};
    pub use crate::metrics::{evaluate, EvalReport};
    pub use crate::objective::{eval_loss, eval_objective, eval_penalty, PenaltyParams};
    pub use crate::simgen::{gen_dataset, SimModel, SimSpec, SimTruth};
    pub use crate::stagewise::{run_path, select_on_path, StagewiseConfig, StagewisePath};
    pub use crate::svd::p_orthogonal_svd;
    pub use crate::tuning::{information_criterion, Criterion, CriterionInput};
    pub use crate::Error;
}
