use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factor::FactorModel;
use crate::svd::{p_orthogonal_svd, LAYER_TOL};
use crate::tuning::{fold_assignment, kfold_matrix_error};

/// Ridge used when the caller does not give one: 0 when `p < n`, otherwise
/// `1e-3 trace(X^T X) / p`.
pub fn default_ridge(x: &DMatrix<f64>) -> f64 {
    let (n, p) = x.shape();
    if p < n {
        0.0
    } else {
        1e-3 * x.norm_squared() / p as f64
    }
}

/// `(X^T X + ridge I)^{-1} X^T Y`.
pub fn ridge_ols(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::dims(format!("X has {} rows, Y has {}", x.nrows(), y.nrows())));
    }
    if !(ridge >= 0.0) {
        return Err(Error::invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    let (n, p) = x.shape();
    if ridge == 0.0 && p > n {
        return Err(Error::Singular(format!(
            "X^T X is singular with p = {p} > n = {n}; use ridge > 0"
        )));
    }
    let mut g = x.tr_mul(x);
    for j in 0..p {
        g[(j, j)] += ridge;
    }
    let rhs = x.tr_mul(y);
    let chol = g.cholesky().ok_or_else(|| {
        Error::Singular("normal equations are not positive definite; use ridge > 0".into())
    })?;
    let b = chol.solve(&rhs);
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("least-squares coefficients".into()));
    }
    Ok(b)
}

/// Reduced-rank regression: the ridge least-squares fit `B` projected onto
/// the leading `r` right singular vectors of `X B`, `C = B V_r V_r^T`.
pub fn fit_rrr(x: &DMatrix<f64>, y: &DMatrix<f64>, r: usize, ridge: f64) -> Result<DMatrix<f64>> {
    let b = ridge_ols(x, y, ridge)?;
    let q = y.ncols();
    if r == 0 {
        return Ok(DMatrix::zeros(x.ncols(), q));
    }
    if r >= q {
        return Ok(b);
    }
    let fit = x * &b;
    let svd = fit.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Singular("SVD did not produce right vectors".into()))?;
    // SVD of a wide matrix returns min(n, q) vectors
    let k = r.min(v_t.nrows());
    let vr = v_t.rows(0, k).transpose();
    Ok(&b * &vr * vr.transpose())
}

/// [`fit_rrr`] returned as P-orthogonal layers.
pub fn rrr_model(x: &DMatrix<f64>, y: &DMatrix<f64>, r: usize, ridge: f64) -> Result<FactorModel> {
    let c = fit_rrr(x, y, r, ridge)?;
    p_orthogonal_svd(x, &c, r)
}

/// Picks the RRR rank in `0..=r_max` by K-fold cross-validation.
///
/// Ranks whose mean held-out error is within a relative `1e-8` of the best
/// are treated as tied, and the smallest of them wins.
pub fn select_rank_cv(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    r_max: usize,
    k: usize,
    ridge: f64,
    seed: u64,
) -> Result<usize> {
    if r_max == 0 {
        return Err(Error::invalid("r_max must be at least 1"));
    }
    let folds = fold_assignment(x.nrows(), k, seed)?;
    let errors: Vec<f64> = (0..=r_max)
        .map(|r| kfold_matrix_error(x, y, &folds, |xt, yt| fit_rrr(xt, yt, r, ridge)))
        .collect::<Result<_>>()?;
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NonFinite("cross-validation error".into()));
    }
    let slack = 1e-8 * best + LAYER_TOL * LAYER_TOL * errors[0];
    Ok(errors.iter().position(|&e| e <= best + slack).unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_rank_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = (random(10, 3, &mut rng), random(10, 2, &mut rng));
        assert_eq!(fit_rrr(&x, &y, 0, 0.0).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn full_rank_is_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = (random(10, 3, &mut rng), random(10, 2, &mut rng));
        let ols = x.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        assert!((fit_rrr(&x, &y, 2, 0.0).unwrap() - ols).amax() < 1e-10);
    }

    #[test]
    fn wide_design_needs_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y) = (random(4, 6, &mut rng), random(4, 2, &mut rng));
        assert!(matches!(fit_rrr(&x, &y, 1, 0.0), Err(Error::Singular(_))));
        assert!(fit_rrr(&x, &y, 1, default_ridge(&x)).is_ok());
    }

    #[test]
    fn zero_response_selects_rank_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(20, 4, &mut rng);
        assert_eq!(select_rank_cv(&x, &DMatrix::zeros(20, 3), 3, 5, 0.0, 9).unwrap(), 0);
    }
}
