//! Operational semantics over configuration ensembles and denotational
//! semantics as superoperators.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::Serialize;

use crate::lang::{Declarations, Program};
use crate::operator::{embed, ComplexMatrix, NaturalRep, OperatorError, Result, Space, Superoperator, Tolerances, C64};

/// A program remainder together with its (partial) state; `None` is the terminated marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub remainder: Option<Program>,
    pub state: ComplexMatrix,
}

impl Configuration {
    pub fn new(p: Program, state: ComplexMatrix) -> Self {
        Configuration { remainder: Some(p), state }
    }

    pub fn is_terminated(&self) -> bool {
        self.remainder.is_none()
    }

    pub fn trace(&self) -> f64 {
        self.state.trace().re
    }
}

/// Kraus operators of the atomic statements and measurements, embedded in the full space.
pub struct Model {
    decls: Declarations,
    tol: Tolerances,
    cache: RefCell<HashMap<String, Rc<Vec<ComplexMatrix>>>>,
}

/// Outcome operators of a loop guard: `m0` exits, `m1` continues.
#[derive(Debug, Clone)]
pub struct LoopGuard {
    pub m0: ComplexMatrix,
    pub m1: ComplexMatrix,
}

fn conj_by(k: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    &(k * rho) * &k.dagger()
}

fn dual_by(k: &ComplexMatrix, a: &ComplexMatrix) -> ComplexMatrix {
    &(&k.dagger() * a) * k
}

fn natural_of(kraus: &[ComplexMatrix]) -> NaturalRep {
    let d = kraus[0].cols();
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for k in kraus {
        m = &m + &k.kron(&k.conj());
    }
    NaturalRep { m: m.into_inner(), d_in: d, d_out: d }
}

impl Model {
    pub fn new(decls: &Declarations, tol: &Tolerances) -> Self {
        Model { decls: decls.clone(), tol: *tol, cache: RefCell::new(HashMap::new()) }
    }

    pub fn decls(&self) -> &Declarations {
        &self.decls
    }

    pub fn space(&self) -> &Space {
        &self.decls.space
    }

    pub fn dim(&self) -> usize {
        self.decls.space.dim()
    }

    pub fn tol(&self) -> &Tolerances {
        &self.tol
    }

    fn cached(&self, key: String, build: impl FnOnce() -> Result<Vec<ComplexMatrix>>) -> Result<Rc<Vec<ComplexMatrix>>> {
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        let v = Rc::new(build()?);
        self.cache.borrow_mut().insert(key, v.clone());
        Ok(v)
    }

    pub fn unitary(&self, gate: &str, vars: &[String]) -> Result<ComplexMatrix> {
        let ops = self.cached(format!("U:{gate}:{}", vars.join(",")), || {
            let u = self
                .decls
                .gate(gate)
                .ok_or_else(|| OperatorError::DimensionMismatch(format!("unknown gate `{gate}`")))?;
            Ok(vec![embed(&u, vars, &self.decls.space)?])
        })?;
        Ok(ops[0].clone())
    }

    /// `{|0⟩⟨n|}` on `var`, identity elsewhere.
    pub fn init_kraus(&self, var: &str) -> Result<Rc<Vec<ComplexMatrix>>> {
        self.cached(format!("I:{var}"), || {
            let d = self.decls.space.var_dim(var)?;
            (0..d).map(|n| embed(&ComplexMatrix::unit(d, 0, n), &[var], &self.decls.space)).collect()
        })
    }

    /// Outcome operators in declaration order, embedded in the full space.
    pub fn measurement(&self, meas: &str, vars: &[String]) -> Result<Rc<Vec<ComplexMatrix>>> {
        self.cached(format!("M:{meas}:{}", vars.join(",")), || {
            let m = self
                .decls
                .measurement(meas)
                .ok_or_else(|| OperatorError::DimensionMismatch(format!("unknown measurement `{meas}`")))?;
            m.outcomes.iter().map(|(_, op)| embed(op, vars, &self.decls.space)).collect()
        })
    }

    pub fn guard(&self, meas: &str, vars: &[String], cont: &str) -> Result<LoopGuard> {
        let m = self
            .decls
            .measurement(meas)
            .ok_or_else(|| OperatorError::DimensionMismatch(format!("unknown measurement `{meas}`")))?;
        let ops = self.measurement(meas, vars)?;
        let i1 = m
            .index_of(cont)
            .ok_or_else(|| OperatorError::DimensionMismatch(format!("`{meas}` has no outcome `{cont}`")))?;
        if ops.len() != 2 {
            return Err(OperatorError::DimensionMismatch(format!("loop guard `{meas}` must have two outcomes")));
        }
        Ok(LoopGuard { m0: ops[1 - i1].clone(), m1: ops[i1].clone() })
    }

    /// Kraus family of an atomic statement.
    pub fn atomic_kraus(&self, p: &Program) -> Result<Vec<ComplexMatrix>> {
        match p {
            Program::Skip => Ok(vec![ComplexMatrix::identity(self.dim())]),
            Program::Init { var } => Ok(self.init_kraus(var)?.to_vec()),
            Program::Unitary { gate, vars } => Ok(vec![self.unitary(gate, vars)?]),
            _ => Err(OperatorError::DimensionMismatch("not an atomic statement".into())),
        }
    }

    fn check_state(&self, rho: &ComplexMatrix) -> Result<()> {
        let d = self.dim();
        if rho.rows() != d || rho.cols() != d {
            return Err(OperatorError::DimensionMismatch(format!(
                "state is {}x{}, space has dimension {d}",
                rho.rows(),
                rho.cols()
            )));
        }
        Ok(())
    }

    /// All successors of a configuration under the transition rules.
    pub fn step(&self, c: &Configuration) -> Result<Vec<Configuration>> {
        let Some(p) = &c.remainder else {
            return Ok(Vec::new());
        };
        let rho = &c.state;
        let done = |state| Configuration { remainder: None, state };
        Ok(match p {
            Program::Skip => vec![done(rho.clone())],
            Program::Init { var } => {
                let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
                for k in self.init_kraus(var)?.iter() {
                    out = &out + &conj_by(k, rho);
                }
                vec![done(out)]
            }
            Program::Unitary { gate, vars } => vec![done(conj_by(&self.unitary(gate, vars)?, rho))],
            Program::Seq(p1, p2) => {
                let inner = Configuration { remainder: Some((**p1).clone()), state: rho.clone() };
                self.step(&inner)?
                    .into_iter()
                    .map(|s| Configuration {
                        remainder: Some(match s.remainder {
                            None => (**p2).clone(),
                            Some(q) => Program::seq(q, (**p2).clone()),
                        }),
                        state: s.state,
                    })
                    .collect()
            }
            Program::Case { meas, vars, branches } => {
                let ops = self.measurement(meas, vars)?;
                let m = self.decls.measurement(meas).expect("checked by measurement()");
                branches
                    .iter()
                    .map(|(label, body)| {
                        let i = m.index_of(label).expect("branch labels are checked at parse time");
                        Configuration { remainder: Some(body.clone()), state: conj_by(&ops[i], rho) }
                    })
                    .collect()
            }
            Program::While { meas, vars, cont, body } => {
                let g = self.guard(meas, vars, cont)?;
                vec![
                    done(conj_by(&g.m0, rho)),
                    Configuration { remainder: Some(Program::seq((**body).clone(), p.clone())), state: conj_by(&g.m1, rho) },
                ]
            }
        })
    }

    /// Replaces the leftmost live member by its successors.
    /// Terminated members whose trace is below the drop threshold are removed;
    /// live members are removed only when `prune_live` is set.
    pub fn step_ensemble(&self, ens: &[Configuration], prune_live: bool) -> Result<Vec<Configuration>> {
        let Some(i) = ens.iter().position(|c| !c.is_terminated()) else {
            return Ok(ens.to_vec());
        };
        let succ = self.step(&ens[i])?;
        let mut out = Vec::with_capacity(ens.len() + succ.len());
        out.extend_from_slice(&ens[..i]);
        out.extend(succ.into_iter().filter(|c| !self.negligible(c, prune_live)));
        out.extend_from_slice(&ens[i + 1..]);
        Ok(out)
    }

    fn negligible(&self, c: &Configuration, prune_live: bool) -> bool {
        (c.is_terminated() || prune_live) && c.trace() <= self.tol.kraus_drop
    }

    /// Runs the ensemble semantics until every member has terminated or the step budget runs out.
    pub fn run_ensemble(&self, p: &Program, rho: &ComplexMatrix, max_steps: usize) -> Result<RunResult> {
        self.check_state(rho)?;
        let total = rho.trace().re;
        let mut ens = vec![Configuration::new(p.clone(), rho.clone())];
        let mut steps = 0;
        while steps < max_steps && ens.iter().any(|c| !c.is_terminated()) {
            ens = self.step_ensemble(&ens, true)?;
            steps += 1;
        }
        let d = self.dim();
        let mut terminated = ComplexMatrix::zeros(d, d);
        let mut terminated_count = 0;
        let mut residual = Vec::new();
        for c in ens {
            if c.is_terminated() {
                terminated = &terminated + &c.state;
                terminated_count += 1;
            } else {
                residual.push(c);
            }
        }
        let terminated_trace = terminated.trace().re;
        let residual_trace = residual.iter().fold(0.0, |acc, c| acc + c.trace());
        Ok(RunResult {
            exhausted: !residual.is_empty(),
            terminated,
            terminated_count,
            terminated_trace,
            residual,
            residual_trace,
            dropped_trace: (total - terminated_trace - residual_trace).max(0.0),
            steps,
        })
    }

    fn natural(&self, p: &Program, budget: usize, eps: f64, stats: &mut LoopStats) -> Result<NaturalRep> {
        let d = self.dim();
        Ok(match p {
            Program::Skip => NaturalRep::identity(d),
            Program::Init { .. } | Program::Unitary { .. } => natural_of(&self.atomic_kraus(p)?),
            Program::Seq(a, b) => {
                let la = self.natural(a, budget, eps, stats)?;
                let lb = self.natural(b, budget, eps, stats)?;
                la.then(&lb)
            }
            Program::Case { meas, vars, branches } => {
                let ops = self.measurement(meas, vars)?;
                let m = self.decls.measurement(meas).expect("checked by measurement()");
                let mut acc = NaturalRep::zero(d);
                for (label, body) in branches {
                    let i = m.index_of(label).expect("branch labels are checked at parse time");
                    let lm = natural_of(std::slice::from_ref(&ops[i]));
                    acc = acc.add(&lm.then(&self.natural(body, budget, eps, stats)?));
                }
                acc
            }
            Program::While { meas, vars, cont, body } => {
                let g = self.guard(meas, vars, cont)?;
                let l0 = natural_of(std::slice::from_ref(&g.m0));
                let l1 = natural_of(std::slice::from_ref(&g.m1));
                let t = l1.then(&self.natural(body, budget, eps, stats)?);
                // S_n = Σ_{k<n} T^k and P = T^n, doubled until the continuing mass is negligible.
                let mut s = NaturalRep::identity(d);
                let mut pow = t;
                let mut n = 1usize;
                let mut residual = pow.dual_identity().max_eigenvalue();
                while residual >= eps && n * 2 <= budget.max(1) {
                    s = s.add(&s.then(&pow));
                    pow = pow.then(&pow);
                    n *= 2;
                    residual = pow.dual_identity().max_eigenvalue();
                }
                stats.residual += residual.max(0.0);
                stats.unrolled = stats.unrolled.max(n);
                stats.converged &= residual < eps;
                s.then(&l0)
            }
        })
    }

    /// Natural representation of the program's denotation, with loop truncation statistics.
    pub fn denote_natural(&self, p: &Program) -> Result<(NaturalRep, LoopStats)> {
        self.denote_natural_with(p, self.tol.loop_budget, self.tol.loop_eps)
    }

    /// As [`Model::denote_natural`] with an explicit unroll budget (a loop is summed
    /// to the largest power of two not above it) and stopping threshold.
    pub fn denote_natural_with(&self, p: &Program, budget: usize, eps: f64) -> Result<(NaturalRep, LoopStats)> {
        let mut stats = LoopStats { residual: 0.0, unrolled: 0, converged: true };
        let rep = self.natural(p, budget, eps, &mut stats)?;
        Ok((rep, stats))
    }

    pub fn denote(&self, p: &Program) -> Result<Denotation> {
        let (rep, stats) = self.denote_natural(p)?;
        let superop = Superoperator::from_natural(&rep, &self.tol);
        Ok(Denotation { superop, stats })
    }

    pub fn denote_apply(&self, p: &Program, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_state(rho)?;
        Ok(self.denote_natural(p)?.0.apply(rho))
    }

    /// Forward execution in which every loop runs its body at most `k` times.
    pub fn apply_bounded(&self, p: &Program, rho: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
        Ok(match p {
            Program::Skip => rho.clone(),
            Program::Init { .. } | Program::Unitary { .. } => {
                let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
                for e in self.atomic_kraus(p)? {
                    out = &out + &conj_by(&e, rho);
                }
                out
            }
            Program::Seq(a, b) => {
                let mid = self.apply_bounded(a, rho, k)?;
                self.apply_bounded(b, &mid, k)?
            }
            Program::Case { meas, vars, branches } => {
                let ops = self.measurement(meas, vars)?;
                let m = self.decls.measurement(meas).expect("checked by measurement()");
                let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
                for (label, body) in branches {
                    let i = m.index_of(label).expect("branch labels are checked at parse time");
                    out = &out + &self.apply_bounded(body, &conj_by(&ops[i], rho), k)?;
                }
                out
            }
            Program::While { meas, vars, cont, body } => {
                let g = self.guard(meas, vars, cont)?;
                let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
                let mut cur = rho.clone();
                for i in 0..=k {
                    out = &out + &conj_by(&g.m0, &cur);
                    if i < k {
                        cur = self.apply_bounded(body, &conj_by(&g.m1, &cur), k)?;
                    }
                }
                out
            }
        })
    }

    /// `t_k = tr(apply_bounded(P, ρ, k))` for `k = 0..=n`.
    pub fn termination_prob(&self, p: &Program, rho: &ComplexMatrix, n: usize) -> Result<Vec<f64>> {
        self.check_state(rho)?;
        (0..=n).map(|k| Ok(self.apply_bounded(p, rho, k)?.trace().re)).collect()
    }

    /// Heisenberg-picture counterpart of a single Kraus operator.
    pub fn dual_by(k: &ComplexMatrix, a: &ComplexMatrix) -> ComplexMatrix {
        dual_by(k, a)
    }

    pub fn conj_by(k: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
        conj_by(k, rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopStats {
    /// Sum over loops of the largest continuing mass after truncation.
    pub residual: f64,
    /// Largest number of unrollings used by any loop.
    pub unrolled: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Denotation {
    pub superop: Superoperator,
    pub stats: LoopStats,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Sum of the terminated states.
    pub terminated: ComplexMatrix,
    pub terminated_count: usize,
    pub terminated_trace: f64,
    /// Live members left when the budget ran out.
    pub residual: Vec<Configuration>,
    pub residual_trace: f64,
    /// Mass removed by pruning negligible members.
    pub dropped_trace: f64,
    pub steps: usize,
    pub exhausted: bool,
}

pub fn ensemble_trace(ens: &[Configuration]) -> f64 {
    ens.iter().map(|c| c.trace()).sum()
}

/// `|ψ⟩⟨ψ|` for a state vector given by its entries.
pub fn pure_state(entries: &[C64]) -> ComplexMatrix {
    ComplexMatrix::projector(&crate::operator::vector_from(entries))
}
