//! Problem containers: the design, the response and the observed-entry mask.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Boolean mask over the response; `true` marks an observed entry.
pub type Mask = DMatrix<bool>;

/// A multivariate regression problem `Y = X C + E`, possibly with missing
/// response entries.
///
/// Entries of `y` at unobserved positions are never read by the solvers and
/// may hold any value, including NaN. The stored response has them replaced
/// by zero so that `y` always equals `P_H(Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    mask: Option<Mask>,
}

impl ProblemData {
    /// Builds a problem with a fully observed response.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        Self::build(x, y, None)
    }

    /// Builds a problem with an observed-entry mask.
    pub fn with_mask(x: DMatrix<f64>, y: DMatrix<f64>, mask: Mask) -> Result<Self> {
        Self::build(x, y, Some(mask))
    }

    /// Builds a problem, taking an optional mask.
    pub fn build(x: DMatrix<f64>, mut y: DMatrix<f64>, mask: Option<Mask>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::invalid("problem must have n, p, q > 0"));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::dims(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix X".into()));
        }
        if let Some(m) = &mask {
            if m.shape() != y.shape() {
                return Err(Error::dims(format!(
                    "mask is {:?} but Y is {:?}",
                    m.shape(),
                    y.shape()
                )));
            }
            for (v, &obs) in y.iter_mut().zip(m.iter()) {
                if !obs {
                    *v = 0.0;
                }
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observed entries of Y".into()));
        }
        // a complete mask carries no information; dropping it keeps the
        // masked and unmasked code paths bit-identical
        let mask = mask.filter(|m| m.iter().any(|&b| !b));
        Ok(Self { x, y, mask })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// The response with unobserved entries set to zero.
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// The observation mask, or `None` when every entry is observed.
    pub fn mask(&self) -> Option<&Mask> {
        self.mask.as_ref()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    #[inline]
    pub fn is_observed(&self, i: usize, k: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[(i, k)])
    }

    /// Number of observed response entries, `|H|`.
    pub fn observed_count(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|&&b| b).count(),
            None => self.n() * self.q(),
        }
    }

    /// Zeroes the unobserved entries of `m` in place (the projection `P_H`).
    pub fn project(&self, m: &mut DMatrix<f64>) {
        if let Some(mask) = &self.mask {
            for (v, &obs) in m.iter_mut().zip(mask.iter()) {
                if !obs {
                    *v = 0.0;
                }
            }
        }
    }

    /// Same design and mask, new response.
    pub fn with_response(&self, y: DMatrix<f64>) -> Result<Self> {
        Self::build(self.x.clone(), y, self.mask.clone())
    }

    /// Restricts the problem to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(rows);
        let y = self.y.select_rows(rows);
        let mask = self.mask.as_ref().map(|m| m.select_rows(rows));
        Self::build(x, y, mask)
    }
}

/// Per-column scale factors applied to a design so that every column has
/// Euclidean norm `sqrt(n)`.
///
/// With `X_s = X diag(s)`, a coefficient `C_s` fitted on `X_s` maps back to
/// the original design as `C = diag(s) C_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaling {
    pub scales: DVector<f64>,
}

impl ColumnScaling {
    /// Computes the scaling for `x`. Zero columns keep scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let root_n = (x.nrows() as f64).sqrt();
        let scales = DVector::from_iterator(
            x.ncols(),
            x.column_iter().map(|c| {
                let norm = c.norm();
                if norm > 0.0 {
                    root_n / norm
                } else {
                    1.0
                }
            }),
        );
        Self { scales }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            scales: DVector::from_element(p, 1.0),
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (mut col, &s) in out.column_iter_mut().zip(self.scales.iter()) {
            col *= s;
        }
        out
    }

    /// Maps a coefficient matrix fitted on the scaled design back to the
    /// original design.
    pub fn unscale_coefficients(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = c.clone();
        for (mut row, &s) in out.row_iter_mut().zip(self.scales.iter()) {
            row *= s;
        }
        out
    }

    /// Maps a left factor fitted on the scaled design back to the original design.
    pub fn unscale_vector(&self, u: &DVector<f64>) -> DVector<f64> {
        u.component_mul(&self.scales)
    }
}
