use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::StagewiseConfig;
use crate::error::{Error, Result};
use crate::factor::{NormMode, UnitRankFactor};
use crate::tuning::{information_criterion, Criterion, CriterionInput, PathPoint};

/// Which update produced a path step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Init,
    BackwardU,
    BackwardV,
    ForwardU,
    ForwardV,
}

impl Move {
    pub fn is_forward(self) -> bool {
        matches!(self, Move::ForwardU | Move::ForwardV)
    }

    pub fn is_backward(self) -> bool {
        matches!(self, Move::BackwardU | Move::BackwardV)
    }
}

/// Why a path run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LambdaNonpositive,
    MaxSteps,
    EarlyStop,
}

/// An L1-normalized factor stored by its nonzero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFactor {
    pub d: f64,
    pub p: usize,
    pub q: usize,
    pub u: Vec<(usize, f64)>,
    pub v: Vec<(usize, f64)>,
}

impl SparseFactor {
    pub fn zero(p: usize, q: usize) -> Self {
        Self {
            d: 0.0,
            p,
            q,
            u: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.d == 0.0 || self.u.is_empty() || self.v.is_empty()
    }

    /// Dense factor in L1 mode.
    pub fn to_factor(&self) -> UnitRankFactor {
        if self.is_zero() {
            return UnitRankFactor::zero(self.p, self.q, NormMode::L1);
        }
        let mut u = DVector::zeros(self.p);
        for &(i, x) in &self.u {
            u[i] = x;
        }
        let mut v = DVector::zeros(self.q);
        for &(k, x) in &self.v {
            v[k] = x;
        }
        UnitRankFactor::new(self.d, u, v, NormMode::L1)
    }

    /// `max(||u||_0 + ||v||_0 - 1, 0)`.
    pub fn df(&self) -> usize {
        if self.is_zero() {
            0
        } else {
            (self.u.len() + self.v.len()).saturating_sub(1)
        }
    }
}

/// One recorded state along a stagewise path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub t: usize,
    pub lambda: f64,
    pub movement: Move,
    pub factor: SparseFactor,
    /// `(2n)^{-1} ||P_H(E)||_F^2 + (mu/2) ||d u v^T||_F^2`.
    pub loss: f64,
    /// `lambda * d * ||u||_1 * ||v||_1` at this step's lambda.
    pub penalty: f64,
    /// Residual sum of squares over observed entries.
    pub rss: f64,
    pub criterion_value: Option<f64>,
}

impl PathStep {
    pub fn factor_snapshot(&self) -> UnitRankFactor {
        self.factor.to_factor()
    }

    pub fn objective(&self) -> f64 {
        self.loss + self.penalty
    }
}

#[derive(Serialize)]
struct StepLine<'a> {
    t: usize,
    lambda: f64,
    #[serde(rename = "move")]
    movement: Move,
    d: f64,
    u_nonzeros: &'a [(usize, f64)],
    v_nonzeros: &'a [(usize, f64)],
    loss: f64,
    penalty: f64,
    criterion: Option<f64>,
}

/// A traced solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct StagewisePath {
    pub steps: Vec<PathStep>,
    pub config: StagewiseConfig,
    pub terminated_by: Termination,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Number of observed response entries.
    pub observed: usize,
}

impl StagewisePath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&PathStep> {
        self.steps.last()
    }

    /// The path solution at `lambda`: the last recorded state whose lambda is
    /// at least `lambda`, i.e. the state reached just before the path moved
    /// below it. `None` when `lambda` exceeds the first recorded lambda.
    pub fn at_lambda(&self, lambda: f64) -> Option<&PathStep> {
        // lambdas are nonincreasing, so the qualifying steps form a prefix
        let cut = self.steps.partition_point(|s| s.lambda >= lambda);
        cut.checked_sub(1).map(|i| &self.steps[i])
    }

    /// Path solution at `lambda` as a dense factor; zero above the path.
    pub fn factor_at(&self, lambda: f64) -> UnitRankFactor {
        match self.at_lambda(lambda) {
            Some(s) => s.factor_snapshot(),
            None => UnitRankFactor::zero(self.p, self.q, NormMode::L1),
        }
    }

    /// Recomputes a criterion for one step from its cached RSS.
    pub fn criterion_of(&self, step: &PathStep, kind: Criterion) -> Result<f64> {
        information_criterion(
            kind,
            &CriterionInput {
                rss: step.rss,
                n: self.n,
                p: self.p,
                q: self.q,
                df: step.factor.df(),
                observed: Some(self.observed),
            },
        )
    }

    /// Steps that mark a distinct lambda: the last state recorded at each
    /// lambda value, as `(lambda, factor)` candidates.
    pub fn points(&self) -> Vec<PathPoint> {
        let mut out: Vec<PathPoint> = Vec::new();
        for (i, s) in self.steps.iter().enumerate() {
            let next_differs = self.steps.get(i + 1).is_none_or(|nx| nx.lambda != s.lambda);
            if next_differs {
                out.push(PathPoint {
                    lambda: s.lambda,
                    factor: s.factor_snapshot(),
                });
            }
        }
        out
    }

    /// Writes one JSON object per step.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.steps {
            let line = StepLine {
                t: s.t,
                lambda: s.lambda,
                movement: s.movement,
                d: s.factor.d,
                u_nonzeros: &s.factor.u,
                v_nonzeros: &s.factor.v,
                loss: s.loss,
                penalty: s.penalty,
                criterion: s.criterion_value,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Picks the step minimizing `kind` over the path; ties go to the earliest
/// (sparsest) step. Steps where the criterion is undefined are skipped.
pub fn select_on_path(path: &StagewisePath, kind: Criterion) -> Result<&PathStep> {
    let values: Vec<f64> = path
        .steps
        .iter()
        .map(|s| path.criterion_of(s, kind).unwrap_or(f64::NAN))
        .collect();
    select_min(&path.steps, &values)
}

/// Same as [`select_on_path`] but uses the criterion values recorded while
/// the path was traced.
pub fn select_on_recorded(path: &StagewisePath) -> Result<&PathStep> {
    let values: Vec<f64> = path
        .steps
        .iter()
        .map(|s| s.criterion_value.unwrap_or(f64::NAN))
        .collect();
    select_min(&path.steps, &values)
}

fn select_min<'a>(steps: &'a [PathStep], values: &[f64]) -> Result<&'a PathStep> {
    if steps.is_empty() {
        return Err(Error::invalid("empty path"));
    }
    // nothing to choose between, and the criterion may be undefined there
    // (a zero fit to Y = 0 has rss = 0)
    if steps.len() == 1 {
        return Ok(&steps[0]);
    }
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v < values[b]) {
            best = Some(i);
        }
    }
    best.map(|i| &steps[i])
        .ok_or_else(|| Error::NonFinite("criterion values along the path".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(t: usize, lambda: f64, crit: f64) -> PathStep {
        PathStep {
            t,
            lambda,
            movement: if t == 0 { Move::Init } else { Move::ForwardU },
            factor: SparseFactor {
                d: 1.0,
                p: 2,
                q: 1,
                u: vec![(0, 1.0)],
                v: vec![(0, 1.0)],
            },
            loss: 0.0,
            penalty: 0.0,
            rss: 1.0,
            criterion_value: Some(crit),
        }
    }

    fn path(steps: Vec<PathStep>) -> StagewisePath {
        StagewisePath {
            steps,
            config: StagewiseConfig::default(),
            terminated_by: Termination::LambdaNonpositive,
            n: 3,
            p: 2,
            q: 1,
            observed: 3,
        }
    }

    #[test]
    fn single_step_path_selects_it() {
        let p = path(vec![step(0, 1.0, 4.0)]);
        assert_eq!(select_on_recorded(&p).unwrap().t, 0);
    }

    #[test]
    fn convex_sequence_selects_middle() {
        let p = path(vec![step(0, 3.0, 10.0), step(1, 2.0, 5.0), step(2, 1.0, 7.0)]);
        assert_eq!(select_on_recorded(&p).unwrap().t, 1);
    }

    #[test]
    fn ties_go_to_earliest() {
        let p = path(vec![step(0, 3.0, 5.0), step(1, 2.0, 5.0)]);
        assert_eq!(select_on_recorded(&p).unwrap().t, 0);
    }

    #[test]
    fn all_nonfinite_is_error() {
        let p = path(vec![step(0, 3.0, f64::NAN), step(1, 2.0, f64::NAN)]);
        assert!(select_on_recorded(&p).is_err());
    }

    #[test]
    fn single_step_is_selected() {
        let p = path(vec![step(0, 3.0, f64::NAN)]);
        assert_eq!(select_on_recorded(&p).unwrap().t, 0);
    }

    #[test]
    fn at_lambda_picks_last_state_above() {
        let p = path(vec![step(0, 3.0, 0.0), step(1, 3.0, 0.0), step(2, 2.0, 0.0), step(3, 1.0, 0.0)]);
        assert_eq!(p.at_lambda(2.5).unwrap().t, 1);
        assert_eq!(p.at_lambda(2.0).unwrap().t, 2);
        assert!(p.at_lambda(3.5).is_none());
        assert_eq!(p.at_lambda(0.1).unwrap().t, 3);
        assert_eq!(p.points().len(), 3);
    }
}
