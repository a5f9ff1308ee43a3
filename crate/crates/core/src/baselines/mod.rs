//! Reference solvers: coordinate-descent lasso, alternating convex search
//! (ACS) for the unit-rank problem, and reduced-rank regression.

mod acs;
mod lasso;
mod rrr;

pub use acs::{acs_cure, acs_path, best_entry_init, default_lambda_grid, ols_svd_init, AcsConfig, AcsFit, AcsInit};
pub use lasso::{
    lasso_cd, lasso_cd_masked, lasso_kkt_residual, lasso_lambda_max, LassoConfig, LassoFit,
};
pub use rrr::{default_ridge, fit_rrr, ridge_ols, rrr_model, select_rank_cv};
