//! Contended stagewise learning for the CURE problem.
//!
//! The solver works in the L1 parameterization `||u||_1 = ||v||_1 = 1`, so the
//! penalty is simply `lambda * d` and a step of size `epsilon` on either `du`
//! or `dv` changes it by exactly `lambda * epsilon`. Each iteration first lets
//! the best backward proposals on the two blocks compete; the winner runs only
//! if it lowers the penalized objective at the current `lambda` by more than
//! `xi`. Otherwise the best forward proposals compete, the winner always
//! runs, and `lambda` is lowered to the largest value at which that forward
//! step still decreases the objective by `xi`.
//!
//! Loss changes are computed in closed form from the cached residual
//! `E = P_H(Y - d X u v^T)`:
//!
//! * `du_j += s`: `s^2/(2n) |P_H(x_j v^T)|^2 - s/n x_j^T E v + mu/2 s^2 |v|^2 + mu s d u_j |v|^2`
//! * `dv_k += h`: `h^2/(2n) |P_H(Xu e_k^T)|^2 - h/n (Xu)^T e_k + mu/2 h^2 |u|^2 + mu h d v_k |u|^2`
//!
//! Under a complete mask the quadratic terms reduce to `|x_j|^2 |v|^2` and
//! `|Xu|^2`.

mod path;

pub use path::{
    select_on_path, select_on_recorded, Move, PathStep, SparseFactor, StagewisePath, Termination,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::factor::{NormMode, UnitRankFactor};
use crate::tuning::{information_criterion, Criterion, CriterionInput, EarlyStopMonitor};

/// Coordinates whose magnitude is within this of `epsilon` are snapped to
/// zero by a backward step.
pub const SNAP_TOL: f64 = 1e-12;
/// Forward proposals on the two blocks whose loss changes differ by less
/// than this are treated as tied; the `du` block wins ties.
pub const TIE_TOL: f64 = 1e-12;

/// Settings for one stagewise path run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagewiseConfig {
    /// Step size.
    pub epsilon: f64,
    /// Tolerance on the per-step decrease of the penalized objective.
    pub xi: f64,
    /// Ridge weight.
    pub mu: f64,
    pub max_steps: usize,
    pub early_stop_window: usize,
    /// Criterion recorded along the path and used for early stopping.
    /// `None` disables both.
    pub criterion: Option<Criterion>,
    /// Full residual recomputation period, in steps.
    pub refresh_every: usize,
}

impl Default for StagewiseConfig {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl StagewiseConfig {
    /// Defaults for a given step size: `xi = 1e-6 eps^2`, `mu = 1e-4`, GIC
    /// with a 300-step early-stop window.
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            xi: Self::default_xi(epsilon),
            mu: 1e-4,
            max_steps: 100_000,
            early_stop_window: 300,
            criterion: Some(Criterion::Gic),
            refresh_every: 1000,
        }
    }

    pub fn default_xi(epsilon: f64) -> f64 {
        1e-6 * epsilon * epsilon
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_criterion(mut self, criterion: Option<Criterion>) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_early_stop_window(mut self, window: usize) -> Self {
        self.early_stop_window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.xi >= 0.0) {
            return Err(Error::invalid(format!("xi must be nonnegative, got {}", self.xi)));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be nonnegative, got {}", self.mu)));
        }
        if self.max_steps == 0 || self.early_stop_window == 0 || self.refresh_every == 0 {
            return Err(Error::invalid(
                "max_steps, early_stop_window and refresh_every must be positive",
            ));
        }
        Ok(())
    }
}

/// Which block a proposal updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    U,
    V,
}

/// A candidate update `du_index += delta` (side U) or `dv_index += delta`
/// (side V), with its exact loss change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub side: Side,
    pub index: usize,
    pub delta: f64,
    pub loss_change: f64,
}

/// Mutable solver state. `u` and `v` have unit l1 norm unless `d == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StagewiseState {
    pub d: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub lambda: f64,
    pub t: usize,
    active_u: Vec<usize>,
    active_v: Vec<usize>,
    /// `P_H(Y - d X u v^T)`.
    e: DMatrix<f64>,
    /// `X u` for the normalized `u`.
    xu: DVector<f64>,
    col_sq: Vec<f64>,
    rss: f64,
}

impl StagewiseState {
    /// `d u`.
    pub fn du(&self) -> DVector<f64> {
        &self.u * self.d
    }

    /// `d v`.
    pub fn dv(&self) -> DVector<f64> {
        &self.v * self.d
    }

    /// Row active set `{j : du_j != 0}`, sorted.
    pub fn active_u(&self) -> &[usize] {
        &self.active_u
    }

    /// Column active set `{k : dv_k != 0}`, sorted.
    pub fn active_v(&self) -> &[usize] {
        &self.active_v
    }

    pub fn residual(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn is_zero(&self) -> bool {
        self.d == 0.0
    }

    pub fn factor(&self) -> UnitRankFactor {
        if self.is_zero() {
            return UnitRankFactor::zero(self.u.len(), self.v.len(), NormMode::L1);
        }
        UnitRankFactor::new(self.d, self.u.clone(), self.v.clone(), NormMode::L1)
    }

    pub fn sparse_factor(&self) -> SparseFactor {
        if self.is_zero() {
            return SparseFactor::zero(self.u.len(), self.v.len());
        }
        SparseFactor {
            d: self.d,
            p: self.u.len(),
            q: self.v.len(),
            u: self.active_u.iter().map(|&j| (j, self.u[j])).collect(),
            v: self.active_v.iter().map(|&k| (k, self.v[k])).collect(),
        }
    }
}

/// Precomputed quantities shared by every step of a run.
struct Workspace<'a> {
    problem: &'a ProblemData,
    cfg: StagewiseConfig,
    n: f64,
    /// `|x_j|^2`.
    col_norms: Vec<f64>,
    /// `S[j, k] = sum_i H_ik x_ij^2`, only under a mask.
    masked_sq: Option<DMatrix<f64>>,
    observed: usize,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a ProblemData, cfg: StagewiseConfig) -> Result<Self> {
        cfg.validate()?;
        let observed = problem.observed_count();
        if observed == 0 {
            return Err(Error::NoObservedEntries);
        }
        let x = problem.x();
        let col_norms = x.column_iter().map(|c| c.norm_squared()).collect();
        let masked_sq = problem.mask().map(|m| {
            let x2 = x.map(|a| a * a);
            let h = m.map(|b| if b { 1.0 } else { 0.0 });
            x2.tr_mul(&h)
        });
        Ok(Self {
            problem,
            cfg,
            n: problem.n() as f64,
            col_norms,
            masked_sq,
            observed,
        })
    }

    fn loss(&self, st: &StagewiseState) -> f64 {
        let ridge = st.d * st.d * st.u.norm_squared() * st.v.norm_squared();
        st.rss / (2.0 * self.n) + 0.5 * self.cfg.mu * ridge
    }

    fn criterion(&self, rss: f64, df: usize) -> Option<f64> {
        let kind = self.cfg.criterion?;
        information_criterion(
            kind,
            &CriterionInput {
                rss,
                n: self.problem.n(),
                p: self.problem.p(),
                q: self.problem.q(),
                df,
                observed: Some(self.observed),
            },
        )
        .ok()
    }

    fn record(&self, st: &StagewiseState, lambda: f64, movement: Move) -> PathStep {
        let factor = st.sparse_factor();
        let df = factor.df();
        let (l1u, l1v): (f64, f64) = (
            factor.u.iter().map(|&(_, a)| a.abs()).sum(),
            factor.v.iter().map(|&(_, a)| a.abs()).sum(),
        );
        PathStep {
            t: st.t,
            lambda,
            movement,
            penalty: if factor.is_zero() { 0.0 } else { lambda * factor.d * l1u * l1v },
            loss: self.loss(st),
            rss: st.rss,
            criterion_value: self.criterion(st.rss, df),
            factor,
        }
    }

    /// `|P_H(x_j v^T)|^2`.
    fn quad_u(&self, st: &StagewiseState, j: usize, v_sq: f64) -> f64 {
        match &self.masked_sq {
            None => self.col_norms[j] * v_sq,
            Some(s) => st.active_v.iter().map(|&k| s[(j, k)] * st.v[k] * st.v[k]).sum(),
        }
    }

    /// `|P_H(Xu e_k^T)|^2`.
    fn quad_v(&self, st: &StagewiseState, k: usize, xu_sq: f64) -> f64 {
        match self.problem.mask() {
            None => xu_sq,
            Some(m) => (0..self.problem.n())
                .filter(|&i| m[(i, k)])
                .map(|i| st.xu[i] * st.xu[i])
                .sum(),
        }
    }

    /// `E v`, using only the active columns.
    fn e_times_v(&self, st: &StagewiseState) -> DVector<f64> {
        let mut w = DVector::zeros(self.problem.n());
        for &k in &st.active_v {
            w.axpy(st.v[k], &st.e.column(k), 1.0);
        }
        w
    }

    fn loss_change_u(&self, st: &StagewiseState, j: usize, s: f64, g: f64, v_sq: f64) -> f64 {
        let mu = self.cfg.mu;
        s * s / (2.0 * self.n) * self.quad_u(st, j, v_sq) - s * g
            + 0.5 * mu * s * s * v_sq
            + mu * s * st.d * st.u[j] * v_sq
    }

    fn loss_change_v(&self, st: &StagewiseState, k: usize, h: f64, g: f64, u_sq: f64, xu_sq: f64) -> f64 {
        let mu = self.cfg.mu;
        h * h / (2.0 * self.n) * self.quad_v(st, k, xu_sq) - h * g
            + 0.5 * mu * h * h * u_sq
            + mu * h * st.d * st.v[k] * u_sq
    }

    /// Best backward proposal over both blocks, ignoring the acceptance test.
    fn best_backward(&self, st: &StagewiseState) -> Option<Proposal> {
        if st.is_zero() {
            return None;
        }
        let eps = self.cfg.epsilon;
        let x = self.problem.x();
        let v_sq = st.v.norm_squared();
        let u_sq = st.u.norm_squared();
        let xu_sq = st.xu.norm_squared();
        let mut best_u: Option<Proposal> = None;
        let w = self.e_times_v(st);
        for &j in &st.active_u {
            if st.d * st.u[j].abs() < eps - SNAP_TOL {
                continue;
            }
            let g = x.column(j).dot(&w) / self.n;
            let s = -st.u[j].signum() * eps;
            let dl = self.loss_change_u(st, j, s, g, v_sq);
            if best_u.is_none_or(|b| dl < b.loss_change) {
                best_u = Some(Proposal { side: Side::U, index: j, delta: s, loss_change: dl });
            }
        }
        let mut best_v: Option<Proposal> = None;
        for &k in &st.active_v {
            if st.d * st.v[k].abs() < eps - SNAP_TOL {
                continue;
            }
            let g = st.xu.dot(&st.e.column(k)) / self.n;
            let h = -st.v[k].signum() * eps;
            let dl = self.loss_change_v(st, k, h, g, u_sq, xu_sq);
            if best_v.is_none_or(|b| dl < b.loss_change) {
                best_v = Some(Proposal { side: Side::V, index: k, delta: h, loss_change: dl });
            }
        }
        match (best_u, best_v) {
            (Some(a), Some(b)) => Some(if b.loss_change < a.loss_change { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    /// Best forward proposal over both blocks.
    fn best_forward(&self, st: &StagewiseState) -> Result<Proposal> {
        if st.is_zero() {
            return self.best_entry(st);
        }
        let eps = self.cfg.epsilon;
        let mu = self.cfg.mu;
        let x = self.problem.x();
        let v_sq = st.v.norm_squared();
        let u_sq = st.u.norm_squared();
        let xu_sq = st.xu.norm_squared();

        let w = self.e_times_v(st);
        let gu = x.tr_mul(&w) / self.n;
        let mut best_u: Option<Proposal> = None;
        for j in 0..self.problem.p() {
            let score = gu[j] - mu * st.d * st.u[j] * v_sq;
            let s = if score < 0.0 { -eps } else { eps };
            let dl = self.loss_change_u(st, j, s, gu[j], v_sq);
            if best_u.is_none_or(|b| dl < b.loss_change) {
                best_u = Some(Proposal { side: Side::U, index: j, delta: s, loss_change: dl });
            }
        }
        let gv = st.e.tr_mul(&st.xu) / self.n;
        let mut best_v: Option<Proposal> = None;
        for k in 0..self.problem.q() {
            let score = gv[k] - mu * st.d * st.v[k] * u_sq;
            let h = if score < 0.0 { -eps } else { eps };
            let dl = self.loss_change_v(st, k, h, gv[k], u_sq, xu_sq);
            if best_v.is_none_or(|b| dl < b.loss_change) {
                best_v = Some(Proposal { side: Side::V, index: k, delta: h, loss_change: dl });
            }
        }
        let (a, b) = (best_u.expect("p > 0"), best_v.expect("q > 0"));
        let winner = if b.loss_change < a.loss_change - TIE_TOL { b } else { a };
        if !winner.loss_change.is_finite() {
            return Err(Error::NonFinite("forward loss change".into()));
        }
        Ok(winner)
    }

    /// From the zero state: the single entry `s 1_j 1_k^T` with the smallest
    /// loss. Returned as a U-side proposal whose `index` encodes `(j, k)` as
    /// `j * q + k`.
    fn best_entry(&self, st: &StagewiseState) -> Result<Proposal> {
        let eps = self.cfg.epsilon;
        let q = self.problem.q();
        let g = self.problem.x().tr_mul(&st.e) / self.n;
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for j in 0..self.problem.p() {
            for k in 0..q {
                let quad = match &self.masked_sq {
                    None => self.col_norms[j],
                    Some(s) => s[(j, k)],
                };
                let dl = eps * eps / (2.0 * self.n) * quad - eps * g[(j, k)].abs()
                    + 0.5 * self.cfg.mu * eps * eps;
                if best.is_none_or(|b| dl < b.3) {
                    let s = if g[(j, k)] < 0.0 { -eps } else { eps };
                    best = Some((j, k, s, dl));
                }
            }
        }
        let (j, k, s, dl) = best.expect("p, q > 0");
        if !dl.is_finite() {
            return Err(Error::NonFinite("initial loss change".into()));
        }
        Ok(Proposal { side: Side::U, index: j * q + k, delta: s, loss_change: dl })
    }

    fn set_zero(&self, st: &mut StagewiseState) {
        st.d = 0.0;
        st.u.fill(0.0);
        st.v.fill(0.0);
        st.xu.fill(0.0);
        st.active_u.clear();
        st.active_v.clear();
    }

    /// Places the single entry `s 1_j 1_k^T` on a zero state.
    fn apply_entry(&self, st: &mut StagewiseState, prop: Proposal) {
        let q = self.problem.q();
        let (j, k) = (prop.index / q, prop.index % q);
        let eps = self.cfg.epsilon;
        st.d = eps;
        st.u.fill(0.0);
        st.v.fill(0.0);
        st.u[j] = 1.0;
        st.v[k] = prop.delta.signum();
        st.active_u = vec![j];
        st.active_v = vec![k];
        st.xu = self.problem.x().column(j).into_owned();
        let mut col = st.e.column_mut(k);
        col.axpy(-prop.delta, &self.problem.x().column(j), 1.0);
        self.project_column(&mut st.e, k);
        self.refresh_column(st, k);
    }

    fn project_column(&self, e: &mut DMatrix<f64>, k: usize) {
        if let Some(m) = self.problem.mask() {
            for i in 0..e.nrows() {
                if !m[(i, k)] {
                    e[(i, k)] = 0.0;
                }
            }
        }
    }

    fn refresh_column(&self, st: &mut StagewiseState, k: usize) {
        let new = st.e.column(k).norm_squared();
        st.rss += new - st.col_sq[k];
        st.col_sq[k] = new;
    }

    /// Executes a proposal. Backward steps snap coordinates that land
    /// within [`SNAP_TOL`] of zero.
    fn apply(&self, st: &mut StagewiseState, prop: Proposal, backward: bool) {
        let x = self.problem.x();
        match prop.side {
            Side::U => {
                let j = prop.index;
                let old = st.d * st.u[j];
                let mut new = old + prop.delta;
                if (backward && (old.abs() - self.cfg.epsilon).abs() <= SNAP_TOL)
                    || new.abs() <= SNAP_TOL
                {
                    new = 0.0;
                }
                let step = new - old;
                // residual changes by -step * x_j v^T on the active columns
                for &k in &st.active_v {
                    let vk = st.v[k];
                    st.e.column_mut(k).axpy(-step * vk, &x.column(j), 1.0);
                    self.project_column(&mut st.e, k);
                }
                let active_v = st.active_v.clone();
                for k in active_v {
                    self.refresh_column(st, k);
                }
                let mut du: Vec<(usize, f64)> =
                    st.active_u.iter().map(|&i| (i, st.d * st.u[i])).collect();
                match du.binary_search_by_key(&j, |&(i, _)| i) {
                    Ok(pos) => du[pos].1 = new,
                    Err(pos) => du.insert(pos, (j, new)),
                }
                du.retain(|&(_, a)| a != 0.0);
                let d_new: f64 = du.iter().map(|&(_, a)| a.abs()).sum();
                if d_new == 0.0 {
                    self.set_zero(st);
                    return;
                }
                // X u' = (d X u + step x_j) / d'
                st.xu *= st.d;
                st.xu.axpy(step, &x.column(j), 1.0);
                st.xu /= d_new;
                st.u.fill(0.0);
                for &(i, a) in &du {
                    st.u[i] = a / d_new;
                }
                st.active_u = du.into_iter().map(|(i, _)| i).collect();
                st.d = d_new;
            }
            Side::V => {
                let k = prop.index;
                let old = st.d * st.v[k];
                let mut new = old + prop.delta;
                if (backward && (old.abs() - self.cfg.epsilon).abs() <= SNAP_TOL)
                    || new.abs() <= SNAP_TOL
                {
                    new = 0.0;
                }
                let step = new - old;
                st.e.column_mut(k).axpy(-step, &st.xu, 1.0);
                self.project_column(&mut st.e, k);
                self.refresh_column(st, k);
                let mut dv: Vec<(usize, f64)> =
                    st.active_v.iter().map(|&i| (i, st.d * st.v[i])).collect();
                match dv.binary_search_by_key(&k, |&(i, _)| i) {
                    Ok(pos) => dv[pos].1 = new,
                    Err(pos) => dv.insert(pos, (k, new)),
                }
                dv.retain(|&(_, a)| a != 0.0);
                let d_new: f64 = dv.iter().map(|&(_, a)| a.abs()).sum();
                if d_new == 0.0 {
                    self.set_zero(st);
                    return;
                }
                st.v.fill(0.0);
                for &(i, a) in &dv {
                    st.v[i] = a / d_new;
                }
                st.active_v = dv.into_iter().map(|(i, _)| i).collect();
                st.d = d_new;
            }
        }
    }

    /// Recomputes the residual and its caches from scratch.
    fn refresh(&self, st: &mut StagewiseState) {
        let x = self.problem.x();
        let mut e = self.problem.y().clone();
        if !st.is_zero() {
            st.xu = x * &st.u;
            e.ger(-st.d, &st.xu, &st.v, 1.0);
        }
        self.problem.project(&mut e);
        st.col_sq = e.column_iter().map(|c| c.norm_squared()).collect();
        st.rss = st.col_sq.iter().sum();
        st.e = e;
    }

    fn zero_state(&self) -> StagewiseState {
        let (p, q) = (self.problem.p(), self.problem.q());
        let e = self.problem.y().clone();
        let col_sq: Vec<f64> = e.column_iter().map(|c| c.norm_squared()).collect();
        StagewiseState {
            d: 0.0,
            u: DVector::zeros(p),
            v: DVector::zeros(q),
            lambda: f64::INFINITY,
            t: 0,
            active_u: Vec::new(),
            active_v: Vec::new(),
            rss: col_sq.iter().sum(),
            col_sq,
            e,
            xu: DVector::zeros(self.problem.n()),
        }
    }

    fn initialize(&self) -> Result<(StagewiseState, PathStep)> {
        let mut st = self.zero_state();
        let prop = self.best_entry(&st)?;
        let lambda0 = -prop.loss_change / self.cfg.epsilon;
        if lambda0 <= 0.0 {
            st.lambda = lambda0;
            let rec = self.record(&st, lambda0, Move::Init);
            return Ok((st, rec));
        }
        if self.cfg.xi >= self.cfg.epsilon * lambda0.max(1.0) {
            return Err(Error::invalid(format!(
                "xi = {} is not small relative to epsilon * max(lambda0, 1) = {}",
                self.cfg.xi,
                self.cfg.epsilon * lambda0.max(1.0)
            )));
        }
        self.apply_entry(&mut st, prop);
        st.lambda = lambda0;
        let rec = self.record(&st, lambda0, Move::Init);
        Ok((st, rec))
    }

    fn backward_step(&self, st: &mut StagewiseState) -> Option<PathStep> {
        let prop = self.best_backward(st)?;
        if !(prop.loss_change < st.lambda * self.cfg.epsilon - self.cfg.xi) {
            return None;
        }
        self.apply(st, prop, true);
        st.t += 1;
        let movement = match prop.side {
            Side::U => Move::BackwardU,
            Side::V => Move::BackwardV,
        };
        Some(self.record(st, st.lambda, movement))
    }

    /// Runs the forward step; returns the new lambda and the record.
    fn forward_step(&self, st: &mut StagewiseState) -> Result<PathStep> {
        let prop = self.best_forward(st)?;
        let candidate = (-prop.loss_change - self.cfg.xi) / self.cfg.epsilon;
        let lambda = st.lambda.min(candidate);
        let movement = if st.is_zero() {
            self.apply_entry(st, prop);
            Move::ForwardU
        } else {
            self.apply(st, prop, false);
            match prop.side {
                Side::U => Move::ForwardU,
                Side::V => Move::ForwardV,
            }
        };
        st.lambda = lambda;
        st.t += 1;
        Ok(self.record(st, lambda, movement))
    }
}

/// Initialization: the best single entry `+-epsilon 1_j 1_k^T` and
/// `lambda^0 = (L(0) - L(init)) / epsilon`.
///
/// When `lambda^0 <= 0` the returned state is the zero model and its record
/// carries the zero factor.
pub fn initialize_path(
    problem: &ProblemData,
    config: &StagewiseConfig,
) -> Result<(StagewiseState, PathStep)> {
    Workspace::new(problem, *config)?.initialize()
}

/// The best backward proposal, executed if it passes the acceptance test
/// `dL < lambda * epsilon - xi`. Returns `None` (state untouched) otherwise.
pub fn propose_backward(
    state: &mut StagewiseState,
    problem: &ProblemData,
    config: &StagewiseConfig,
) -> Result<Option<PathStep>> {
    Ok(Workspace::new(problem, *config)?.backward_step(state))
}

/// Executes the best forward proposal and lowers lambda accordingly.
pub fn propose_forward(
    state: &mut StagewiseState,
    problem: &ProblemData,
    config: &StagewiseConfig,
) -> Result<PathStep> {
    Workspace::new(problem, *config)?.forward_step(state)
}

/// Best backward candidate without the acceptance test, for inspection.
pub fn backward_candidate(
    state: &StagewiseState,
    problem: &ProblemData,
    config: &StagewiseConfig,
) -> Result<Option<Proposal>> {
    Ok(Workspace::new(problem, *config)?.best_backward(state))
}

/// Best forward candidate, for inspection.
pub fn forward_candidate(
    state: &StagewiseState,
    problem: &ProblemData,
    config: &StagewiseConfig,
) -> Result<Proposal> {
    Workspace::new(problem, *config)?.best_forward(state)
}

/// Traces the full stagewise path.
///
/// Stops when lambda would drop to zero or below (that final forward step is
/// not recorded), after `max_steps` executed steps, or when the recorded
/// criterion has not improved for `early_stop_window` steps.
pub fn run_path(problem: &ProblemData, config: &StagewiseConfig) -> Result<StagewisePath> {
    run_path_observed(problem, config, |_, _| {})
}

/// [`run_path`] with a callback invoked after every recorded step.
pub fn run_path_observed<F>(
    problem: &ProblemData,
    config: &StagewiseConfig,
    mut on_step: F,
) -> Result<StagewisePath>
where
    F: FnMut(&StagewiseState, &PathStep),
{
    let ws = Workspace::new(problem, *config)?;
    let (mut st, init) = ws.initialize()?;
    on_step(&st, &init);
    let mut monitor = EarlyStopMonitor::new(config.early_stop_window);
    let mut steps = vec![init];
    let path = |steps: Vec<PathStep>, terminated_by| StagewisePath {
        steps,
        config: *config,
        terminated_by,
        n: problem.n(),
        p: problem.p(),
        q: problem.q(),
        observed: ws.observed,
    };
    if st.lambda <= 0.0 {
        return Ok(path(steps, Termination::LambdaNonpositive));
    }
    if let Some(c) = steps[0].criterion_value {
        monitor.push(c);
    }
    loop {
        if st.t >= config.max_steps {
            return Ok(path(steps, Termination::MaxSteps));
        }
        let rec = match ws.backward_step(&mut st) {
            Some(rec) => rec,
            None => {
                let rec = ws.forward_step(&mut st)?;
                if rec.lambda <= 0.0 {
                    return Ok(path(steps, Termination::LambdaNonpositive));
                }
                rec
            }
        };
        if st.t % config.refresh_every == 0 {
            ws.refresh(&mut st);
        }
        on_step(&st, &rec);
        let stop = config.criterion.is_some()
            && monitor.push(rec.criterion_value.unwrap_or(f64::NAN));
        steps.push(rec);
        if stop {
            return Ok(path(steps, Termination::EarlyStop));
        }
    }
}
