//! P-orthogonal SVD layers of a coefficient matrix and layer thresholding.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::factor::{canonical_sign, FactorModel, NormMode, UnitRankFactor};

/// Singular values below this are treated as zero layers.
pub const LAYER_TOL: f64 = 1e-10;

/// Extracts the leading `r` layers of the P-orthogonal SVD of `C`, where
/// `P = X^T X / n`.
///
/// Writing `n^{-1/2} X C = sum_k d_k a_k v_k^T` (ordinary SVD), the layers are
/// `(d_k, u_k = C v_k / d_k, v_k)`, so `n^{-1/2} X u_k = a_k`. Layers whose
/// singular value falls below [`LAYER_TOL`] end the model early; the returned
/// model's `rank` is the effective rank.
pub fn p_orthogonal_svd(x: &DMatrix<f64>, c: &DMatrix<f64>, r: usize) -> Result<FactorModel> {
    p_orthogonal_svd_with_tol(x, c, r, LAYER_TOL)
}

pub fn p_orthogonal_svd_with_tol(
    x: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: usize,
    tol: f64,
) -> Result<FactorModel> {
    let (p, q) = c.shape();
    if x.ncols() != p {
        return Err(Error::dims(format!(
            "X has {} columns but C has {} rows",
            x.ncols(),
            p
        )));
    }
    let mut model = FactorModel::empty(p, q);
    if r == 0 {
        return Ok(model);
    }
    let n = x.nrows() as f64;
    let m = (x * c) / n.sqrt();
    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Singular("SVD did not produce right vectors".into()))?;
    let avail = svd.singular_values.len();
    for k in 0..r.min(avail) {
        let d = svd.singular_values[k];
        if !(d > tol) {
            break;
        }
        let mut v: DVector<f64> = v_t.row(k).transpose();
        let mut u = (c * &v) / d;
        canonical_sign(&mut u, &mut v);
        model.push(UnitRankFactor::new(d, u, v, NormMode::POrth));
    }
    if model.rank < r {
        log::warn!(
            "p_orthogonal_svd: requested rank {r}, effective rank {}",
            model.rank
        );
    }
    Ok(model)
}

/// Keeps the `s` entries of largest absolute value and zeroes the rest.
/// Ties are resolved in row-major order, first occurrence kept.
pub fn hard_threshold_layer(layer: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let (p, q) = layer.shape();
    if s >= p * q {
        return layer.clone();
    }
    let mut idx: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..q).map(move |j| (i, j))).collect();
    // stable sort keeps row-major order among equal magnitudes
    idx.sort_by(|&a, &b| layer[b].abs().total_cmp(&layer[a].abs()));
    let mut out = DMatrix::zeros(p, q);
    for &ij in idx.iter().take(s) {
        out[ij] = layer[ij];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_gives_ordinary_svd() {
        let n = 4;
        let x = DMatrix::identity(n, 2) * (n as f64).sqrt();
        let x = x.rows(0, n).into_owned();
        let c = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let m = p_orthogonal_svd(&x, &c, 2).unwrap();
        assert_eq!(m.rank, 2);
        assert!((m.layers[0].d - 3.0).abs() < 1e-12);
        assert!((m.layers[1].d - 1.0).abs() < 1e-12);
        assert!((m.layers[0].u[0].abs() - 1.0).abs() < 1e-12);
        assert!((m.layers[1].v[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rank_is_empty() {
        let x = DMatrix::identity(3, 3);
        let m = p_orthogonal_svd(&x, &DMatrix::identity(3, 2), 0).unwrap();
        assert_eq!(m.rank, 0);
        assert!(m.layers.is_empty());
    }

    #[test]
    fn zero_layers_truncate() {
        let x = DMatrix::identity(3, 3);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = p_orthogonal_svd(&x, &c, 2).unwrap();
        assert_eq!(m.rank, 1);
    }

    #[test]
    fn threshold_forced_example() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, 0.5, 2.0]);
        assert_eq!(
            hard_threshold_layer(&a, 2),
            DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0])
        );
        assert_eq!(hard_threshold_layer(&a, 0), DMatrix::zeros(2, 2));
        assert_eq!(hard_threshold_layer(&a, 10), a);
    }

    #[test]
    fn threshold_ties_prefer_row_major_first() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 1.0]);
        let t = hard_threshold_layer(&a, 1);
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 0.0]));
        let t3 = hard_threshold_layer(&a, 3);
        assert_eq!(t3, DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 0.0]));
    }
}
