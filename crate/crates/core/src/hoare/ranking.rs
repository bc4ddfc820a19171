//! Checking ranking-function conditions of a loop over a finite set of states.

use serde::Serialize;

use super::HoareError;
use crate::lang::Program;
use crate::operator::{ComplexMatrix, OperatorError};
use crate::semantics::Model;

/// A function from states to naturals.
#[derive(Debug, Clone)]
pub enum RankingFn {
    /// `t(ρ) = ⌈tr(Nρ) / step⌉`.
    Observable { n: ComplexMatrix, step: f64 },
    /// Explicit values for finitely many states, matched entrywise up to `tol`.
    Table { entries: Vec<(ComplexMatrix, u64)>, tol: f64 },
}

impl RankingFn {
    pub fn eval(&self, rho: &ComplexMatrix) -> Option<u64> {
        match self {
            RankingFn::Observable { n, step } => {
                let v = (n.inner() * rho.inner()).trace().re / step;
                // Absorb round-off just above an integer.
                Some((v - 1e-9).ceil().max(0.0) as u64)
            }
            RankingFn::Table { entries, tol } => {
                entries.iter().find(|(s, _)| s.approx_eq(rho, *tol)).map(|(_, t)| *t)
            }
        }
    }
}

/// Ranking function `t` together with the predicate `A` and threshold `ε` of the strict-decrease condition.
#[derive(Debug, Clone)]
pub struct RankingGoal {
    pub function: RankingFn,
    pub target: ComplexMatrix,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingViolation {
    /// 1: `t` increased; 2: `t` did not decrease although `tr(Aρ) ≥ ε`; 0: state missing from a table.
    pub condition: u8,
    /// Index of the supplied state the violating state was reached from.
    pub origin: usize,
    /// Number of loop iterations from the supplied state.
    pub iteration: usize,
    pub t_before: Option<u64>,
    pub t_after: Option<u64>,
    pub target_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingReport {
    pub passed: bool,
    pub states_checked: usize,
    pub violation: Option<RankingViolation>,
}

/// Evaluates both ranking conditions at every supplied state and at the states
/// reached from them by up to `depth` further loop iterations.
pub fn ranking_check(
    model: &Model,
    loop_prog: &Program,
    goal: &RankingGoal,
    states: &[ComplexMatrix],
    depth: usize,
) -> Result<RankingReport, HoareError> {
    let Program::While { meas, vars, cont, body } = loop_prog else {
        return Err(OperatorError::DimensionMismatch("ranking functions apply to loops only".into()).into());
    };
    let g = model.guard(meas, vars, cont)?;
    let (body_rep, _) = model.denote_natural(body)?;
    let mut checked = 0;
    for (origin, rho0) in states.iter().enumerate() {
        let mut rho = rho0.clone();
        for iteration in 0..=depth {
            let next = body_rep.apply(&Model::conj_by(&g.m1, &rho));
            let before = goal.function.eval(&rho);
            let after = goal.function.eval(&next);
            let target_value = (goal.target.inner() * rho.inner()).trace().re;
            checked += 1;
            let condition = match (before, after) {
                (Some(b), Some(a)) if a > b => Some(1),
                (Some(b), Some(a)) if target_value >= goal.eps && a >= b => Some(2),
                (Some(_), Some(_)) => None,
                _ => Some(0),
            };
            if let Some(condition) = condition {
                return Ok(RankingReport {
                    passed: false,
                    states_checked: checked,
                    violation: Some(RankingViolation { condition, origin, iteration, t_before: before, t_after: after, target_value }),
                });
            }
            rho = next;
        }
    }
    Ok(RankingReport { passed: true, states_checked: checked, violation: None })
}
