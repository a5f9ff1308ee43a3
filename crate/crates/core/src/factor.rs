//! Unit-rank factors `d u v^T` and stacked factor models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-norm constraints of a normalized factor.
pub const L1_NORM_TOL: f64 = 1e-10;
/// Tolerance on `n^{-1} u^T X^T X u = 1` for P-orthogonal factors.
pub const PORTH_NORM_TOL: f64 = 1e-8;

/// Normalization convention carried by a [`UnitRankFactor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// `||u||_1 = ||v||_1 = 1`.
    L1,
    /// `n^{-1/2} ||X u||_2 = 1` and `||v||_2 = 1`.
    POrth,
    /// No normalization.
    Raw,
}

/// One layer `d u v^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRankFactor {
    pub d: f64,
    #[serde(with = "dvector_seq")]
    pub u: DVector<f64>,
    #[serde(with = "dvector_seq")]
    pub v: DVector<f64>,
    pub norm_mode: NormMode,
}

impl UnitRankFactor {
    pub fn new(d: f64, u: DVector<f64>, v: DVector<f64>, norm_mode: NormMode) -> Self {
        Self { d, u, v, norm_mode }
    }

    /// The empty factor: `d = 0`, `u = 0`, `v = 0`.
    pub fn zero(p: usize, q: usize, norm_mode: NormMode) -> Self {
        Self {
            d: 0.0,
            u: DVector::zeros(p),
            v: DVector::zeros(q),
            norm_mode,
        }
    }

    pub fn p(&self) -> usize {
        self.u.len()
    }

    pub fn q(&self) -> usize {
        self.v.len()
    }

    /// True when the factor encodes the zero matrix.
    pub fn is_zero(&self) -> bool {
        self.d == 0.0 || self.u.iter().all(|&x| x == 0.0) || self.v.iter().all(|&x| x == 0.0)
    }

    /// The `p x q` matrix `d u v^T`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        (&self.u * self.d) * self.v.transpose()
    }

    /// Number of nonzero entries in `u` and `v`.
    pub fn support_sizes(&self) -> (usize, usize) {
        (
            self.u.iter().filter(|&&x| x != 0.0).count(),
            self.v.iter().filter(|&&x| x != 0.0).count(),
        )
    }

    /// Checks the invariants of the declared normalization mode. POrth checks
    /// need the design matrix.
    pub fn check_normalization(&self, x: Option<&DMatrix<f64>>) -> Result<()> {
        if !(self.d >= 0.0) {
            return Err(Error::invalid(format!("d must be nonnegative, got {}", self.d)));
        }
        if self.d == 0.0 {
            return Ok(());
        }
        match self.norm_mode {
            NormMode::Raw => Ok(()),
            NormMode::L1 => {
                let nu = self.u.lp_norm(1);
                let nv = self.v.lp_norm(1);
                if (nu - 1.0).abs() > L1_NORM_TOL || (nv - 1.0).abs() > L1_NORM_TOL {
                    return Err(Error::DegenerateFactor(format!(
                        "L1 mode requires unit l1 norms, got {nu} and {nv}"
                    )));
                }
                Ok(())
            }
            NormMode::POrth => {
                let x = x.ok_or_else(|| Error::invalid("POrth check needs the design"))?;
                let pn = porth_sq_norm(x, &self.u)?;
                let nv = self.v.norm();
                if (pn - 1.0).abs() > PORTH_NORM_TOL || (nv - 1.0).abs() > L1_NORM_TOL {
                    return Err(Error::DegenerateFactor(format!(
                        "POrth mode requires n^-1 |Xu|^2 = 1 and |v|_2 = 1, got {pn} and {nv}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// `n^{-1} ||X u||_2^2`.
pub(crate) fn porth_sq_norm(x: &DMatrix<f64>, u: &DVector<f64>) -> Result<f64> {
    if x.ncols() != u.len() {
        return Err(Error::dims(format!(
            "X has {} columns but u has length {}",
            x.ncols(),
            u.len()
        )));
    }
    Ok((x * u).norm_squared() / x.nrows() as f64)
}

/// Flips `(u, v)` jointly so that the first nonzero entry of `v` is positive.
pub(crate) fn canonical_sign(u: &mut DVector<f64>, v: &mut DVector<f64>) {
    if let Some(&first) = v.iter().find(|&&x| x != 0.0) {
        if first < 0.0 {
            u.neg_mut();
            v.neg_mut();
        }
    }
}

/// Rescales a factor to the target normalization without changing `d u v^T`.
///
/// Signs are absorbed into `u` and `v` so that `d >= 0` and the first nonzero
/// entry of `v` is positive. An input that already satisfies the target
/// mode's constraints and the sign convention is returned unchanged.
pub fn renormalize_factor(
    factor: &UnitRankFactor,
    x: &DMatrix<f64>,
    target: NormMode,
) -> Result<UnitRankFactor> {
    let (p, q) = (factor.p(), factor.q());
    if x.ncols() != p {
        return Err(Error::dims(format!("X has {} columns, u has {}", x.ncols(), p)));
    }
    if !factor.d.is_finite()
        || factor.u.iter().any(|v| !v.is_finite())
        || factor.v.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("factor entries".into()));
    }
    if target == NormMode::Raw {
        return Err(Error::invalid("renormalization target must be L1 or POrth"));
    }
    let u_zero = factor.u.iter().all(|&a| a == 0.0);
    let v_zero = factor.v.iter().all(|&a| a == 0.0);
    if factor.d == 0.0 {
        return Ok(UnitRankFactor::zero(p, q, target));
    }
    if u_zero || v_zero {
        return Err(Error::DegenerateFactor(
            "u or v is zero while d is nonzero".into(),
        ));
    }

    if factor.norm_mode == target && factor.d > 0.0 && factor.check_normalization(Some(x)).is_ok()
    {
        let first_v = factor.v.iter().find(|&&a| a != 0.0).copied().unwrap_or(1.0);
        if first_v > 0.0 {
            return Ok(factor.clone());
        }
    }

    let (su, sv) = match target {
        NormMode::L1 => (factor.u.lp_norm(1), factor.v.lp_norm(1)),
        NormMode::POrth => {
            let su = porth_sq_norm(x, &factor.u)?.sqrt();
            if su == 0.0 {
                return Err(Error::DegenerateFactor("X u = 0 under POrth".into()));
            }
            (su, factor.v.norm())
        }
        NormMode::Raw => unreachable!(),
    };
    let mut u = &factor.u / su;
    let mut v = &factor.v / sv;
    let mut d = factor.d * su * sv;
    if d < 0.0 {
        d = -d;
        u.neg_mut();
    }
    canonical_sign(&mut u, &mut v);
    Ok(UnitRankFactor::new(d, u, v, target))
}

/// An ordered list of unit-rank layers representing `C = sum_k d_k u_k v_k^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub rank: usize,
    pub p: usize,
    pub q: usize,
    pub layers: Vec<UnitRankFactor>,
}

impl FactorModel {
    pub fn empty(p: usize, q: usize) -> Self {
        Self {
            rank: 0,
            p,
            q,
            layers: Vec::new(),
        }
    }

    pub fn from_layers(p: usize, q: usize, layers: Vec<UnitRankFactor>) -> Result<Self> {
        for (k, l) in layers.iter().enumerate() {
            if l.p() != p || l.q() != q {
                return Err(Error::dims(format!(
                    "layer {k} is {}x{}, model is {p}x{q}",
                    l.p(),
                    l.q()
                )));
            }
        }
        Ok(Self {
            rank: layers.len(),
            p,
            q,
            layers,
        })
    }

    pub fn push(&mut self, layer: UnitRankFactor) {
        self.layers.push(layer);
        self.rank = self.layers.len();
    }

    /// `sum_k d_k u_k v_k^T`, accumulated in layer order.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.p, self.q);
        for l in &self.layers {
            c.ger(l.d, &l.u, &l.v, 1.0);
        }
        c
    }

    /// Left factors stacked as columns, `p x rank`.
    pub fn u_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.layers.len(), |i, k| self.layers[k].u[i])
    }

    /// Right factors stacked as columns, `q x rank`.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.q, self.layers.len(), |i, k| self.layers[k].v[i])
    }

    pub fn d_values(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.d).collect()
    }

    /// Renormalizes every layer to `target`.
    pub fn renormalized(&self, x: &DMatrix<f64>, target: NormMode) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| renormalize_factor(l, x, target))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(self.p, self.q, layers)
    }

    /// Largest `|n^{-1} u_j^T X^T X u_k|` and `|v_j^T v_k|` over pairs `j != k`.
    pub fn orthogonality_defects(&self, x: &DMatrix<f64>) -> (f64, f64) {
        let n = x.nrows() as f64;
        let xu: Vec<DVector<f64>> = self.layers.iter().map(|l| x * &l.u).collect();
        let mut du: f64 = 0.0;
        let mut dv: f64 = 0.0;
        for j in 0..self.layers.len() {
            for k in (j + 1)..self.layers.len() {
                du = du.max((xu[j].dot(&xu[k]) / n).abs());
                dv = dv.max(self.layers[j].v.dot(&self.layers[k].v).abs());
            }
        }
        (du, dv)
    }
}

pub(crate) mod dvector_seq {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn l1_scaling_of_simple_factor() {
        let f = UnitRankFactor::new(1.0, dvector![2.0, 0.0], dvector![0.0, 3.0], NormMode::Raw);
        let x = DMatrix::identity(2, 2);
        let g = renormalize_factor(&f, &x, NormMode::L1).unwrap();
        assert_eq!(g.d, 6.0);
        assert_eq!(g.u, dvector![1.0, 0.0]);
        assert_eq!(g.v, dvector![0.0, 1.0]);
    }

    #[test]
    fn normalized_input_is_returned_identically() {
        let f = UnitRankFactor::new(2.5, dvector![0.25, -0.75], dvector![0.5, 0.5], NormMode::L1);
        let x = DMatrix::identity(2, 2);
        let g = renormalize_factor(&f, &x, NormMode::L1).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn negative_d_is_absorbed_and_sign_convention_applied() {
        let f = UnitRankFactor::new(-2.0, dvector![1.0, 1.0], dvector![-1.0, 2.0], NormMode::Raw);
        let x = DMatrix::identity(2, 2) * 2f64.sqrt();
        let g = renormalize_factor(&f, &x, NormMode::POrth).unwrap();
        assert!(g.d > 0.0);
        assert!(g.v[0] > 0.0);
        assert!(close(&f.to_matrix(), &g.to_matrix(), 1e-12));
        g.check_normalization(Some(&x)).unwrap();
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        let x = DMatrix::identity(2, 2);
        let f = UnitRankFactor::new(1.0, dvector![0.0, 0.0], dvector![1.0, 0.0], NormMode::Raw);
        assert!(renormalize_factor(&f, &x, NormMode::L1).is_err());
        let xz = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let g = UnitRankFactor::new(1.0, dvector![0.0, 1.0], dvector![1.0, 0.0], NormMode::Raw);
        assert!(matches!(
            renormalize_factor(&g, &xz, NormMode::POrth),
            Err(Error::DegenerateFactor(_))
        ));
    }

    #[test]
    fn zero_factor_maps_to_zero_factor() {
        let x = DMatrix::identity(2, 2);
        let g = renormalize_factor(&UnitRankFactor::zero(2, 3, NormMode::Raw), &x, NormMode::L1)
            .unwrap();
        assert!(g.is_zero());
        assert_eq!(g.norm_mode, NormMode::L1);
    }

    #[test]
    fn model_json_layout() {
        let f = UnitRankFactor::new(1.5, dvector![1.0, 0.0], dvector![0.0, 1.0], NormMode::L1);
        let m = FactorModel::from_layers(2, 2, vec![f]).unwrap();
        let js: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(js["rank"], 1);
        assert_eq!(js["layers"][0]["u"], serde_json::json!([1.0, 0.0]));
        assert_eq!(js["layers"][0]["norm_mode"], "l1");
        let back: FactorModel = serde_json::from_value(js).unwrap();
        assert_eq!(back, m);
    }
}
