//! The CURE objective: squared-error loss with a ridge term plus the
//! multiplicative l1 penalty `lambda * d * ||u||_1 * ||v||_1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::factor::UnitRankFactor;

/// Penalty weights: `lambda` on the l1 term, `mu` on the ridge term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub lambda: f64,
    pub mu: f64,
}

impl PenaltyParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !(mu >= 0.0) {
            return Err(Error::invalid(format!(
                "lambda and mu must be nonnegative, got {lambda} and {mu}"
            )));
        }
        Ok(Self { lambda, mu })
    }
}

fn check_dims(problem: &ProblemData, factor: &UnitRankFactor) -> Result<()> {
    if factor.p() != problem.p() || factor.q() != problem.q() {
        return Err(Error::dims(format!(
            "factor is {}x{}, problem is {}x{}",
            factor.p(),
            factor.q(),
            problem.p(),
            problem.q()
        )));
    }
    Ok(())
}

/// `P_H(Y - d X u v^T)`; unobserved entries are exactly zero.
pub fn residual(problem: &ProblemData, factor: &UnitRankFactor) -> Result<DMatrix<f64>> {
    check_dims(problem, factor)?;
    let mut e = problem.y().clone();
    if factor.d != 0.0 {
        let xu = problem.x() * &factor.u;
        e.ger(-factor.d, &xu, &factor.v, 1.0);
    }
    problem.project(&mut e);
    Ok(e)
}

/// Residual for an arbitrary coefficient matrix, `P_H(Y - X C)`.
pub fn residual_of(problem: &ProblemData, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.shape() != (problem.p(), problem.q()) {
        return Err(Error::dims(format!(
            "C is {:?}, expected {}x{}",
            c.shape(),
            problem.p(),
            problem.q()
        )));
    }
    let mut e = problem.y() - problem.x() * c;
    problem.project(&mut e);
    Ok(e)
}

/// `(2n)^{-1} ||P_H(Y - d X u v^T)||_F^2 + (mu/2) ||d u v^T||_F^2`.
pub fn eval_loss(problem: &ProblemData, factor: &UnitRankFactor, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::invalid(format!("mu must be nonnegative, got {mu}")));
    }
    let e = residual(problem, factor)?;
    let ridge = factor.d * factor.d * factor.u.norm_squared() * factor.v.norm_squared();
    let loss = e.norm_squared() / (2.0 * problem.n() as f64) + 0.5 * mu * ridge;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(loss)
}

/// `lambda * d * ||u||_1 * ||v||_1`, which equals `lambda * ||d u v^T||_1`.
pub fn eval_penalty(factor: &UnitRankFactor, lambda: f64) -> Result<f64> {
    if factor.d < 0.0 {
        return Err(Error::invalid(format!("d must be nonnegative, got {}", factor.d)));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    if factor.d == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda * factor.d * factor.u.lp_norm(1) * factor.v.lp_norm(1))
}

/// Loss plus penalty.
pub fn eval_objective(
    problem: &ProblemData,
    factor: &UnitRankFactor,
    params: PenaltyParams,
) -> Result<f64> {
    Ok(eval_loss(problem, factor, params.mu)? + eval_penalty(factor, params.lambda)?)
}

/// Residual sum of squares over observed entries, `||P_H(Y - X C)||_F^2`.
pub fn rss_of(problem: &ProblemData, c: &DMatrix<f64>) -> Result<f64> {
    Ok(residual_of(problem, c)?.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::NormMode;
    use nalgebra::{dvector, DVector};

    #[test]
    fn zero_model_on_zero_data_has_zero_loss() {
        let prob = ProblemData::new(DMatrix::identity(3, 2), DMatrix::zeros(3, 2)).unwrap();
        let f = UnitRankFactor::zero(2, 2, NormMode::L1);
        assert_eq!(eval_loss(&prob, &f, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn zero_model_loss_is_scaled_response_norm() {
        let x = DMatrix::identity(2, 2) * 2f64.sqrt();
        let prob = ProblemData::new(x, DMatrix::identity(2, 2)).unwrap();
        let f = UnitRankFactor::zero(2, 2, NormMode::L1);
        assert_eq!(eval_loss(&prob, &f, 3.0).unwrap(), 0.5);
    }

    #[test]
    fn penalty_forced_value() {
        let f = UnitRankFactor::new(2.0, dvector![1.0, 0.0], dvector![0.5, 0.5], NormMode::L1);
        assert_eq!(eval_penalty(&f, 3.0).unwrap(), 6.0);
        assert_eq!(eval_penalty(&UnitRankFactor::zero(2, 2, NormMode::L1), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_d_penalty_is_error() {
        let f = UnitRankFactor::new(-1.0, dvector![1.0], dvector![1.0], NormMode::Raw);
        assert!(eval_penalty(&f, 1.0).is_err());
    }

    #[test]
    fn residual_of_zero_factor_is_projected_response() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mask = DMatrix::from_row_slice(2, 2, &[true, false, false, true]);
        let prob = ProblemData::with_mask(DMatrix::identity(2, 2), y, mask).unwrap();
        let e = residual(&prob, &UnitRankFactor::zero(2, 2, NormMode::L1)).unwrap();
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let prob = ProblemData::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let f = UnitRankFactor::new(1.0, DVector::zeros(3), DVector::zeros(2), NormMode::Raw);
        assert!(matches!(eval_loss(&prob, &f, 0.0), Err(Error::DimensionMismatch(_))));
        assert!(residual(&prob, &f).is_err());
    }
}
