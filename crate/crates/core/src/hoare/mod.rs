//! Weakest preconditions, correctness formulas and their checking.

pub mod ranking;
pub mod rules;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::lang::Program;
use crate::operator::{loewner_leq, ComplexMatrix, OperatorError, QuantumPredicate, C64};
use crate::semantics::Model;

pub use ranking::{ranking_check, RankingFn, RankingReport, RankingGoal, RankingViolation};
pub use rules::{apply_rule, rule_conclusion, side_conditions, verify_derivation, Derivation, Picture, RuleApplication, RuleError, RuleTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Partial,
    Total,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "par" | "partial" => Ok(Mode::Partial),
            "tot" | "total" => Ok(Mode::Total),
            _ => Err(format!("unknown mode `{s}` (expected `par` or `tot`)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Partial => "par",
            Mode::Total => "tot",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoareError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("loop precondition iteration is not monotone at step {iteration} (min eigenvalue {min_eig:.3e})")]
    NonMonotone { iteration: usize, min_eig: f64 },
}

/// `{pre} prog {post}` in a given mode; both predicates act on the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub pre: ComplexMatrix,
    pub prog: Program,
    pub post: ComplexMatrix,
    pub mode: Mode,
}

impl Formula {
    pub fn new(pre: ComplexMatrix, prog: Program, post: ComplexMatrix, mode: Mode) -> Self {
        Formula { pre, prog, post, mode }
    }
}

/// Convergence data of the loop fixed-point iterations behind a precondition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixStats {
    pub iterations: usize,
    pub converged: bool,
    /// Largest entrywise change in the last iteration of any loop.
    pub gap: f64,
}

impl FixStats {
    fn new() -> Self {
        FixStats { iterations: 0, converged: true, gap: 0.0 }
    }

    fn merge(&mut self, other: FixStats) {
        self.iterations += other.iterations;
        self.converged &= other.converged;
        self.gap = self.gap.max(other.gap);
    }
}

#[derive(Debug, Clone)]
pub struct Wp {
    pub matrix: ComplexMatrix,
    pub stats: FixStats,
}

fn wp_rec(model: &Model, p: &Program, b: &ComplexMatrix, stats: &mut FixStats) -> Result<ComplexMatrix, HoareError> {
    Ok(match p {
        Program::Skip => b.clone(),
        Program::Init { .. } | Program::Unitary { .. } => {
            let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
            for k in model.atomic_kraus(p)? {
                out = &out + &Model::dual_by(&k, b);
            }
            out
        }
        Program::Seq(p1, p2) => {
            let mid = wp_rec(model, p2, b, stats)?;
            wp_rec(model, p1, &mid, stats)?
        }
        Program::Case { meas, vars, branches } => {
            let ops = model.measurement(meas, vars)?;
            let m = model.decls().measurement(meas).expect("checked by measurement()");
            let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
            for (label, body) in branches {
                let i = m.index_of(label).expect("branch labels are checked at parse time");
                out = &out + &Model::dual_by(&ops[i], &wp_rec(model, body, b, stats)?);
            }
            out
        }
        Program::While { meas, vars, cont, body } => {
            let g = model.guard(meas, vars, cont)?;
            let tol = model.tol();
            let base = Model::dual_by(&g.m0, b);
            let mut x = ComplexMatrix::zeros(b.rows(), b.cols());
            let mut local = FixStats { iterations: 0, converged: false, gap: f64::INFINITY };
            for k in 1..=tol.max_iters {
                let mut inner = FixStats::new();
                let next = &base + &Model::dual_by(&g.m1, &wp_rec(model, body, &x, &mut inner)?);
                stats.merge(FixStats { iterations: 0, ..inner });
                let v = loewner_leq(&x, &next, tol.psd)?;
                if !v.holds {
                    return Err(HoareError::NonMonotone { iteration: k, min_eig: v.min_eig });
                }
                let diff = next.max_abs_diff(&x);
                x = next;
                local.iterations = k;
                local.gap = diff;
                if diff < tol.fix {
                    local.converged = true;
                    break;
                }
            }
            stats.merge(local);
            x
        }
    })
}

/// `⟦P⟧*(B)`; loops are evaluated by the increasing fixed-point iteration from `0`.
/// If the iteration budget runs out the result is a lower bound and `stats.converged` is false.
pub fn wp_total(model: &Model, p: &Program, b: &ComplexMatrix) -> Result<Wp, HoareError> {
    let mut stats = FixStats::new();
    let matrix = wp_rec(model, p, b, &mut stats)?;
    Ok(Wp { matrix, stats })
}

/// `⟦P⟧*(B) + I − ⟦P⟧*(I)`, with the spectrum clamped into `[0, 1]` only when it falls outside.
pub fn wp_partial(model: &Model, p: &Program, b: &ComplexMatrix) -> Result<Wp, HoareError> {
    let d = model.dim();
    let id = ComplexMatrix::identity(d);
    let wb = wp_total(model, p, b)?;
    let wi = wp_total(model, p, &id)?;
    let mut m = &(&wb.matrix + &id) - &wi.matrix;
    let psd = model.tol().psd;
    let eig = m.hermitian_part().eigh();
    let (lo, hi) = (eig.values[0], eig.values[eig.values.len() - 1]);
    if lo < -psd || hi > 1.0 + psd {
        m = m.clamp_spectrum(0.0, 1.0);
    }
    let mut stats = wb.stats;
    stats.merge(wi.stats);
    Ok(Wp { matrix: m, stats })
}

pub fn wp(model: &Model, p: &Program, b: &ComplexMatrix, mode: Mode) -> Result<Wp, HoareError> {
    match mode {
        Mode::Total => wp_total(model, p, b),
        Mode::Partial => wp_partial(model, p, b),
    }
}

/// Counterexample state `|w⟩⟨w|` with both sides of the violated trace inequality.
#[derive(Debug, Clone)]
pub struct Witness {
    pub vector: DVector<C64>,
    /// `tr(Aρ)`.
    pub lhs: f64,
    /// `tr(B⟦P⟧(ρ))`, plus the non-termination mass in partial mode.
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct TripleVerdict {
    pub holds: bool,
    pub min_eig: f64,
    pub witness: Option<Witness>,
    pub wp: Wp,
}

/// Decides `{A} P {B}` by comparing `A` with the (partial or total) weakest precondition.
pub fn check_triple(model: &Model, f: &Formula, tol: f64) -> Result<TripleVerdict, HoareError> {
    let t = model.tol();
    QuantumPredicate::new(f.pre.clone(), model.space().clone(), t)?;
    QuantumPredicate::new(f.post.clone(), model.space().clone(), t)?;
    let w = wp(model, &f.prog, &f.post, f.mode)?;
    let v = loewner_leq(&f.pre, &w.matrix, tol)?;
    let witness = match (&v.witness, v.holds) {
        (Some(vec), false) => Some(evaluate_at(model, f, vec)?),
        _ => None,
    };
    Ok(TripleVerdict { holds: v.holds, min_eig: v.min_eig, witness, wp: w })
}

/// Evaluates both sides of the correctness inequality at `ρ = |w⟩⟨w|` using the denotation.
pub fn evaluate_at(model: &Model, f: &Formula, w: &DVector<C64>) -> Result<Witness, HoareError> {
    let rho = ComplexMatrix::projector(w);
    let out = model.denote_apply(&f.prog, &rho)?;
    let lhs = (f.pre.inner() * rho.inner()).trace().re;
    let mut rhs = (f.post.inner() * out.inner()).trace().re;
    if f.mode == Mode::Partial {
        rhs += rho.trace().re - out.trace().re;
    }
    Ok(Witness { vector: w.clone(), lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::operator::{vector_from, Tolerances};

    fn setup(src: &str) -> (Model, Program) {
        let f = parse(src).unwrap();
        (Model::new(&f.decls, &Tolerances::default()), f.program)
    }

    fn minus() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::projector(&vector_from(&[C64::new(s, 0.0), C64::new(-s, 0.0)]))
    }

    #[test]
    fn hadamard_wp() {
        let (m, p) = setup("var q: 2; prog { apply H(q); }");
        let w = wp_total(&m, &p, &ComplexMatrix::unit(2, 1, 1)).unwrap();
        assert!(w.matrix.approx_eq(&minus(), 1e-15));
        let f = Formula::new(minus(), p, ComplexMatrix::unit(2, 1, 1), Mode::Total);
        assert!(check_triple(&m, &f, 1e-9).unwrap().holds);
    }

    #[test]
    fn init_wp_on_qutrit() {
        let (m, p) = setup("var q: 3; prog { q := |0>; }");
        let b = ComplexMatrix::diag(&[0.3, 0.5, 1.0]);
        let w = wp_total(&m, &p, &b).unwrap();
        assert!(w.matrix.approx_eq(&ComplexMatrix::identity(3).scale_re(0.3), 1e-15));
    }

    #[test]
    fn partial_wp_of_diverging_loop_is_identity() {
        let (m, p) = setup("var q: 2; meas M = { stop: [[0,0],[0,0]]; go: I(2); }; prog { while M(q) == go { skip; } }");
        let w = wp_partial(&m, &p, &ComplexMatrix::unit(2, 0, 0)).unwrap();
        assert!(w.matrix.approx_eq(&ComplexMatrix::identity(2), 1e-15));
        let t = wp_total(&m, &p, &ComplexMatrix::identity(2)).unwrap();
        assert!(t.matrix.max_abs() < 1e-15);
        assert!(t.stats.converged);
    }

    #[test]
    fn loop_wp_converges() {
        let src = "var q: 2; meas M = { 0: proj(|0>); 1: proj(|1>); }; prog { while M(q) == 1 { apply H(q); } }";
        let (m, p) = setup(src);
        let w = wp_total(&m, &p, &ComplexMatrix::identity(2)).unwrap();
        assert!(w.matrix.approx_eq(&ComplexMatrix::identity(2), 1e-9));
        assert!(w.stats.converged);
        let w0 = wp_total(&m, &p, &ComplexMatrix::unit(2, 0, 0)).unwrap();
        assert!(w0.matrix.approx_eq(&ComplexMatrix::identity(2), 1e-9));
    }

    #[test]
    fn failing_triple_reports_witness() {
        let (m, p) = setup("var q: 2; prog { skip; }");
        let f = Formula::new(ComplexMatrix::identity(2), p, ComplexMatrix::unit(2, 0, 0), Mode::Total);
        let v = check_triple(&m, &f, 1e-9).unwrap();
        assert!(!v.holds);
        assert!((v.min_eig + 1.0).abs() < 1e-12);
        let w = v.witness.unwrap();
        assert!((w.lhs - 1.0).abs() < 1e-12 && w.rhs.abs() < 1e-12);
    }

    #[test]
    fn partial_mode_accepts_any_pre_for_identity_post() {
        let (m, p) = setup("var q: 2; meas M = { stop: [[0,0],[0,0]]; go: I(2); }; prog { while M(q) == go { skip; } }");
        let f = Formula::new(ComplexMatrix::identity(2), p, ComplexMatrix::identity(2), Mode::Partial);
        assert!(check_triple(&m, &f, 1e-9).unwrap().holds);
    }
}
