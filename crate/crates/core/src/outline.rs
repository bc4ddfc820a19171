//! Proof outlines: standardisation, verification-condition generation and discharge,
//! and a harness that checks the strong soundness invariants along an execution.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::hoare::{ranking_check, wp_total, Formula, HoareError, Mode, RankingFn, RankingReport, RankingGoal};
use crate::lang::{at_remainder, leftmost_leaf, locations, next_location, Anchor, ParsedFile, Path, PathStep, Program, Span};
use crate::operator::{expectation, loewner_leq, ComplexMatrix, OperatorError, QuantumPredicate, C64};
use crate::semantics::{Configuration, Model};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutlineError {
    #[error("outline has no precondition before the first statement")]
    MissingPre,
    #[error("outline has no postcondition after the last statement")]
    MissingPost,
    #[error("annotation at {span} is not a predicate: {detail}")]
    NotPredicate { span: Span, detail: String },
    #[error("loop at {span} needs an annotation at the start of its body")]
    UninferableLoop { span: Span },
    #[error("outline is not standard: statement at {span} has no precondition")]
    NotStandard { span: Span },
    #[error(transparent)]
    Hoare(#[from] HoareError),
}

impl From<OperatorError> for OutlineError {
    fn from(e: OperatorError) -> Self {
        OutlineError::Hoare(e.into())
    }
}

type Result<T> = std::result::Result<T, OutlineError>;

#[derive(Debug, Clone, PartialEq)]
pub struct OutlineAnnotation {
    pub anchor: Anchor,
    pub matrix: ComplexMatrix,
    pub span: Option<Span>,
    /// False for predicates inserted by [`standardize`].
    pub user: bool,
}

/// Evidence for the termination of one loop in a total-correctness outline.
#[derive(Debug, Clone)]
pub struct RankingEvidence {
    pub function: RankingFn,
    pub eps: f64,
    pub states: Vec<ComplexMatrix>,
    pub depth: usize,
}

/// A program interleaved with predicates.
#[derive(Debug, Clone)]
pub struct ProofOutline {
    pub program: Program,
    /// Annotations in source order; within one anchor, order is the chain order.
    pub annotations: Vec<OutlineAnnotation>,
    pub mode: Mode,
    /// Ranking evidence keyed by loop path; loops without an entry get a semantic termination check.
    pub rankings: BTreeMap<Path, RankingEvidence>,
    pub spans: Vec<(Path, Span)>,
    pub prog_span: Span,
}

impl ProofOutline {
    /// Builds an outline from a parsed file, validating every annotation as a predicate.
    pub fn from_parsed(file: &ParsedFile, model: &Model, mode: Mode) -> Result<Self> {
        let o = ProofOutline {
            program: file.program.clone(),
            annotations: file
                .annotations
                .iter()
                .map(|a| OutlineAnnotation { anchor: a.anchor.clone(), matrix: a.matrix.clone(), span: Some(a.span), user: true })
                .collect(),
            mode,
            rankings: BTreeMap::new(),
            spans: file.spans.clone(),
            prog_span: file.prog_span,
        };
        for a in &o.annotations {
            if let Err(e) = QuantumPredicate::new(a.matrix.clone(), model.space().clone(), model.tol()) {
                return Err(OutlineError::NotPredicate { span: a.span.unwrap_or(o.prog_span), detail: e.to_string() });
            }
        }
        if o.chain(&Anchor::Before(leftmost_leaf(&o.program, &[]))).is_empty() {
            return Err(OutlineError::MissingPre);
        }
        if o.chain(&Anchor::After(Vec::new())).is_empty() {
            return Err(OutlineError::MissingPost);
        }
        Ok(o)
    }

    pub fn chain(&self, anchor: &Anchor) -> Vec<&OutlineAnnotation> {
        self.annotations.iter().filter(|a| &a.anchor == anchor).collect()
    }

    pub fn span_of(&self, path: &[PathStep]) -> Span {
        self.spans.iter().find(|(p, _)| p == path).map(|(_, s)| *s).unwrap_or(self.prog_span)
    }

    /// First predicate of the chain in front of `loc`, if any.
    fn first(&self, loc: &[PathStep]) -> Option<&ComplexMatrix> {
        self.chain(&Anchor::Before(loc.to_vec())).first().map(|a| &a.matrix)
    }

    /// `pre(T)`: the predicate immediately preceding the statement at `loc`.
    pub fn pre(&self, loc: &[PathStep]) -> Option<&ComplexMatrix> {
        self.chain(&Anchor::Before(loc.to_vec())).last().map(|a| &a.matrix)
    }

    pub fn precondition(&self) -> &ComplexMatrix {
        self.first(&leftmost_leaf(&self.program, &[])).expect("validated on construction")
    }

    pub fn postcondition(&self) -> &ComplexMatrix {
        self.chain(&Anchor::After(Vec::new())).last().map(|a| &a.matrix).expect("validated on construction")
    }

    /// The correctness formula the outline proves.
    pub fn outer(&self) -> Formula {
        Formula::new(self.precondition().clone(), self.program.clone(), self.postcondition().clone(), self.mode)
    }

    /// Every statement has a preceding predicate.
    pub fn is_standard(&self) -> bool {
        locations(&self.program).iter().all(|l| self.pre(l).is_some())
    }

    fn node(&self, path: &[PathStep]) -> &Program {
        self.program.at_path(path).expect("paths are generated from the program")
    }

    /// Post of a block rooted at `root` given the predicate that follows it in its context.
    fn block_post(&self, root: &[PathStep], context: Option<&ComplexMatrix>) -> Option<ComplexMatrix> {
        self.chain(&Anchor::After(root.to_vec())).first().map(|a| a.matrix.clone()).or_else(|| context.cloned())
    }
}

fn atomic_wp(model: &Model, p: &Program, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
    for k in model.atomic_kraus(p)? {
        out = &out + &Model::dual_by(&k, b);
    }
    Ok(out)
}

fn case_pre(model: &Model, meas: &str, vars: &[String], branches: &[(String, Program)], firsts: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let ops = model.measurement(meas, vars)?;
    let m = model.decls().measurement(meas).expect("checked by measurement()");
    let d = model.dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for ((label, _), a) in branches.iter().zip(firsts) {
        let i = m.index_of(label).expect("branch labels are checked at parse time");
        out = &out + &Model::dual_by(&ops[i], a);
    }
    Ok(out)
}

fn loop_pre(model: &Model, meas: &str, vars: &[String], cont: &str, exit: &ComplexMatrix, inv: &ComplexMatrix) -> Result<ComplexMatrix> {
    let g = model.guard(meas, vars, cont)?;
    Ok(&Model::dual_by(&g.m0, exit) + &Model::dual_by(&g.m1, inv))
}

fn with(path: &[PathStep], step: PathStep) -> Path {
    let mut p = path.to_vec();
    p.push(step);
    p
}

struct Filler<'a> {
    model: &'a Model,
    o: ProofOutline,
}

impl Filler<'_> {
    fn insert(&mut self, loc: &[PathStep], m: ComplexMatrix) {
        self.o.annotations.push(OutlineAnnotation { anchor: Anchor::Before(loc.to_vec()), matrix: m, span: None, user: false });
    }

    /// Fills every statement of the subtree at `path` and returns the first predicate in front of it.
    fn fill(&mut self, path: &[PathStep], post: &ComplexMatrix) -> Result<ComplexMatrix> {
        let node = self.o.node(path).clone();
        match &node {
            Program::Seq(..) => {
                let mid = self.fill(&with(path, PathStep::Second), post)?;
                return self.fill(&with(path, PathStep::First), &mid);
            }
            Program::Skip | Program::Init { .. } | Program::Unitary { .. } => {
                if self.o.pre(path).is_none() {
                    let m = atomic_wp(self.model, &node, post)?;
                    self.insert(path, m);
                }
            }
            Program::Case { meas, vars, branches } => {
                let mut firsts = Vec::new();
                for i in 0..branches.len() {
                    let root = with(path, PathStep::Branch(i));
                    let bpost = self.o.block_post(&root, Some(post)).expect("context supplied");
                    firsts.push(self.fill(&root, &bpost)?);
                }
                if self.o.pre(path).is_none() {
                    let m = case_pre(self.model, meas, vars, branches, &firsts)?;
                    self.insert(path, m);
                }
            }
            Program::While { meas, vars, cont, body: _ } => {
                let root = with(path, PathStep::Body);
                let entry = leftmost_leaf(&self.o.program, &root);
                let inv = match self.o.first(&entry).cloned() {
                    Some(b) => {
                        let head = loop_pre(self.model, meas, vars, cont, post, &b)?;
                        let bpost = self.o.block_post(&root, Some(&head)).expect("context supplied");
                        self.fill(&root, &bpost)?;
                        b
                    }
                    None if self.o.mode == Mode::Total => {
                        let head = wp_total(self.model, &node, post)?.matrix;
                        let bpost = self.o.block_post(&root, Some(&head)).expect("context supplied");
                        self.fill(&root, &bpost)?
                    }
                    None => return Err(OutlineError::UninferableLoop { span: self.o.span_of(path) }),
                };
                if self.o.pre(path).is_none() {
                    let m = loop_pre(self.model, meas, vars, cont, post, &inv)?;
                    self.insert(path, m);
                }
            }
        }
        Ok(self.o.first(&leftmost_leaf(&self.o.program, path)).expect("just filled").clone())
    }
}

/// Inserts a predicate in front of every statement that lacks one, by backward
/// propagation from the nearest following annotation. User annotations are kept as they are.
pub fn standardize(model: &Model, o: &ProofOutline) -> Result<ProofOutline> {
    let post = o.block_post(&[], None).ok_or(OutlineError::MissingPost)?;
    let mut f = Filler { model, o: o.clone() };
    f.fill(&[], &post)?;
    Ok(f.o)
}

#[derive(Debug, Clone)]
pub enum Obligation {
    /// `lhs ⊑ rhs`.
    Order { lhs: ComplexMatrix, rhs: ComplexMatrix },
    /// Ranking conditions for the loop `prog` at `path`.
    Ranking { path: Path, prog: Program, goal: RankingGoal, states: Vec<ComplexMatrix>, depth: usize },
}

#[derive(Debug, Clone)]
pub struct VerificationCondition {
    pub rule: String,
    pub span: Span,
    pub obligation: Obligation,
}

impl VerificationCondition {
    /// `rule@line:col`.
    pub fn provenance(&self) -> String {
        format!("{}@{}", self.rule, self.span)
    }
}

struct Gen<'a> {
    model: &'a Model,
    o: &'a ProofOutline,
    out: Vec<VerificationCondition>,
}

impl Gen<'_> {
    fn order(&mut self, rule: &str, span: Span, lhs: &ComplexMatrix, rhs: ComplexMatrix) {
        self.out.push(VerificationCondition { rule: rule.into(), span, obligation: Obligation::Order { lhs: lhs.clone(), rhs } });
    }

    fn chain_vcs(&mut self, anchor: &Anchor, fallback: Span) {
        let chain = self.o.chain(anchor);
        for w in chain.windows(2) {
            let span = w[1].span.unwrap_or(fallback);
            self.order("R.Or′", span, &w[0].matrix, w[1].matrix.clone());
        }
    }

    fn pre(&self, loc: &[PathStep]) -> Result<ComplexMatrix> {
        self.o.pre(loc).cloned().ok_or(OutlineError::NotStandard { span: self.o.span_of(loc) })
    }

    fn first(&self, loc: &[PathStep]) -> Result<ComplexMatrix> {
        self.o.first(loc).cloned().ok_or(OutlineError::NotStandard { span: self.o.span_of(loc) })
    }

    /// A nested block: its trailing chain, the link to the context post, then its statements.
    fn block(&mut self, root: &[PathStep], context: &ComplexMatrix, owner_span: Span) -> Result<()> {
        let anchor = Anchor::After(root.to_vec());
        self.chain_vcs(&anchor, owner_span);
        let trailing = self.o.chain(&anchor);
        let post = match (trailing.first(), trailing.last()) {
            (Some(first), Some(last)) => {
                self.order("R.Or′", last.span.unwrap_or(owner_span), &last.matrix, context.clone());
                first.matrix.clone()
            }
            _ => context.clone(),
        };
        self.node(root, &post)
    }

    fn node(&mut self, path: &[PathStep], post: &ComplexMatrix) -> Result<()> {
        let node = self.o.node(path);
        if let Program::Seq(..) = node {
            let second = with(path, PathStep::Second);
            self.node(&second, post)?;
            let mid = self.first(&leftmost_leaf(&self.o.program, &second))?;
            return self.node(&with(path, PathStep::First), &mid);
        }
        let span = self.o.span_of(path);
        self.chain_vcs(&Anchor::Before(path.to_vec()), span);
        let pre = self.pre(path)?;
        match node {
            Program::Skip => self.order("Ax.Sk′", span, &pre, post.clone()),
            Program::Init { .. } => {
                let w = atomic_wp(self.model, node, post)?;
                self.order("Ax.In′", span, &pre, w)
            }
            Program::Unitary { .. } => {
                let w = atomic_wp(self.model, node, post)?;
                self.order("Ax.UT′", span, &pre, w)
            }
            Program::Case { meas, vars, branches } => {
                let mut firsts = Vec::new();
                for i in 0..branches.len() {
                    let root = with(path, PathStep::Branch(i));
                    firsts.push(self.first(&leftmost_leaf(&self.o.program, &root))?);
                }
                let rhs = case_pre(self.model, meas, vars, branches, &firsts)?;
                self.order("R.IF′", span, &pre, rhs);
                for i in 0..branches.len() {
                    self.block(&with(path, PathStep::Branch(i)), post, span)?;
                }
            }
            Program::While { meas, vars, cont, .. } => {
                let root = with(path, PathStep::Body);
                let inv = self.first(&leftmost_leaf(&self.o.program, &root))?;
                let head = loop_pre(self.model, meas, vars, cont, post, &inv)?;
                self.order("R.LP′", span, &pre, head.clone());
                if self.o.mode == Mode::Total {
                    match self.o.rankings.get(path) {
                        Some(ev) => {
                            let g = self.model.guard(meas, vars, cont)?;
                            let goal = RankingGoal {
                                function: ev.function.clone(),
                                target: Model::dual_by(&g.m1, &inv),
                                eps: ev.eps,
                            };
                            self.out.push(VerificationCondition {
                                rule: "R.LT′".into(),
                                span,
                                obligation: Obligation::Ranking {
                                    path: path.to_vec(),
                                    prog: node.clone(),
                                    goal,
                                    states: ev.states.clone(),
                                    depth: ev.depth,
                                },
                            });
                        }
                        None => {
                            let w = wp_total(self.model, node, post)?.matrix;
                            self.order("R.LT(semantic)", span, &pre, w);
                        }
                    }
                }
                self.block(&root, &head, span)?;
            }
            Program::Seq(..) => unreachable!(),
        }
        Ok(())
    }
}

/// One obligation per annotation boundary, ordered by source position.
pub fn vcgen(model: &Model, s: &ProofOutline) -> Result<Vec<VerificationCondition>> {
    let mut g = Gen { model, o: s, out: Vec::new() };
    let root = Anchor::After(Vec::new());
    g.chain_vcs(&root, s.prog_span);
    let post = s.chain(&root).first().map(|a| a.matrix.clone()).ok_or(OutlineError::MissingPost)?;
    g.node(&[], &post)?;
    let mut vcs = g.out;
    vcs.sort_by_key(|v| (v.span.line, v.span.col));
    Ok(vcs)
}

#[derive(Debug, Clone, Serialize)]
pub struct VcVerdict {
    pub provenance: String,
    pub rule: String,
    pub span: Span,
    pub holds: bool,
    /// Smallest eigenvalue of `rhs − lhs`; absent for ranking obligations.
    pub min_eig: Option<f64>,
    #[serde(skip)]
    pub witness: Option<DVector<C64>>,
    pub ranking: Option<RankingReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DischargeReport {
    pub holds: bool,
    pub verdicts: Vec<VcVerdict>,
}

/// Checks every obligation; the outline is valid when all hold.
pub fn discharge(model: &Model, vcs: &[VerificationCondition], tol: f64) -> Result<DischargeReport> {
    let mut verdicts = Vec::with_capacity(vcs.len());
    for vc in vcs {
        let v = match &vc.obligation {
            Obligation::Order { lhs, rhs } => {
                let l = loewner_leq(lhs, rhs, tol)?;
                VcVerdict {
                    provenance: vc.provenance(),
                    rule: vc.rule.clone(),
                    span: vc.span,
                    holds: l.holds,
                    min_eig: Some(l.min_eig),
                    witness: l.witness,
                    ranking: None,
                }
            }
            Obligation::Ranking { prog, goal, states, depth, .. } => {
                let r = ranking_check(model, prog, goal, states, *depth)?;
                VcVerdict {
                    provenance: vc.provenance(),
                    rule: vc.rule.clone(),
                    span: vc.span,
                    holds: r.passed,
                    min_eig: None,
                    witness: None,
                    ranking: Some(r),
                }
            }
        };
        verdicts.push(v);
    }
    Ok(DischargeReport { holds: verdicts.iter().all(|v| v.holds), verdicts })
}

/// Standardises, generates and discharges in one go.
pub fn check_outline(model: &Model, o: &ProofOutline, tol: f64) -> Result<(ProofOutline, Vec<VerificationCondition>, DischargeReport)> {
    let s = standardize(model, o)?;
    let vcs = vcgen(model, &s)?;
    let report = discharge(model, &vcs, tol)?;
    Ok((s, vcs, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub live: usize,
    /// `tr(Aρ)` for the initial state.
    pub lhs: f64,
    /// `Σ_i tr(B_i ρ_i)` over the current ensemble.
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessViolation {
    pub step: usize,
    /// 1: a remainder is not `at(T, P)`; 2: the trace inequality fails.
    pub clause: u8,
    pub detail: String,
    pub ensemble: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub holds: bool,
    pub steps: Vec<StepRecord>,
    pub violation: Option<SoundnessViolation>,
    pub exhausted: bool,
}

struct Member {
    conf: Configuration,
    loc: Option<Path>,
}

fn dump(ens: &[Member]) -> Vec<String> {
    ens.iter()
        .map(|m| {
            let r = m.conf.remainder.as_ref().map(|p| p.to_string()).unwrap_or_else(|| "↓".into());
            format!("{r} [trace {:.6e}]", m.conf.trace())
        })
        .collect()
}

/// Runs the ensemble semantics from `⟨P, ρ⟩` and checks at every step that each live
/// remainder is `at(T, P)` for its tracked location `T` and that
/// `tr(Aρ) ≤ Σ_i tr(B_i ρ_i) + tol`, where `B_i` is `pre(T_i)` or the final postcondition.
pub fn strong_soundness_trace(model: &Model, s: &ProofOutline, rho: &ComplexMatrix, max_steps: usize, tol: f64) -> Result<SoundnessReport> {
    let root = &s.program;
    let ev = |a: &ComplexMatrix, r: &ComplexMatrix| expectation(a, r, 1e-6);
    let lhs = ev(s.precondition(), rho)?;
    let post = s.postcondition().clone();
    let mut ens = vec![Member { conf: Configuration::new(root.clone(), rho.clone()), loc: Some(leftmost_leaf(root, &[])) }];
    let mut steps = Vec::new();
    let drop = model.tol().kraus_drop;
    for step in 0..=max_steps {
        let mut rhs = 0.0;
        for m in &ens {
            match (&m.loc, &m.conf.remainder) {
                (Some(loc), Some(rem)) => {
                    if at_remainder(root, loc).as_ref() != Some(rem) {
                        return Ok(SoundnessReport {
                            holds: false,
                            steps,
                            violation: Some(SoundnessViolation {
                                step,
                                clause: 1,
                                detail: format!("remainder `{rem}` is not at({}, P)", crate::lang::path_to_string(loc)),
                                ensemble: dump(&ens),
                            }),
                            exhausted: false,
                        });
                    }
                    let b = s.pre(loc).ok_or(OutlineError::NotStandard { span: s.span_of(loc) })?;
                    rhs += ev(b, &m.conf.state)?;
                }
                (None, None) => rhs += ev(&post, &m.conf.state)?,
                _ => unreachable!("location and remainder terminate together"),
            }
        }
        let live = ens.iter().filter(|m| m.loc.is_some()).count();
        steps.push(StepRecord { step, live, lhs, rhs });
        if lhs > rhs + tol {
            return Ok(SoundnessReport {
                holds: false,
                steps,
                violation: Some(SoundnessViolation {
                    step,
                    clause: 2,
                    detail: format!("tr(Aρ) = {lhs:.12} exceeds Σ tr(B_i ρ_i) = {rhs:.12}"),
                    ensemble: dump(&ens),
                }),
                exhausted: false,
            });
        }
        let Some(i) = ens.iter().position(|m| m.loc.is_some()) else {
            return Ok(SoundnessReport { holds: true, steps, violation: None, exhausted: false });
        };
        if step == max_steps {
            break;
        }
        let loc = ens[i].loc.clone().expect("live member");
        let succ = model.step(&ens[i].conf)?;
        let locs: Vec<Option<Path>> = match root.at_path(&loc).expect("tracked location exists") {
            Program::Case { branches, .. } => {
                (0..branches.len()).map(|b| Some(leftmost_leaf(root, &with(&loc, PathStep::Branch(b))))).collect()
            }
            Program::While { .. } => vec![next_location(root, &loc), Some(leftmost_leaf(root, &with(&loc, PathStep::Body)))],
            _ => vec![next_location(root, &loc)],
        };
        let new: Vec<Member> = succ
            .into_iter()
            .zip(locs)
            .filter(|(c, _)| !(c.is_terminated() && c.trace() <= drop))
            .map(|(conf, loc)| Member { conf, loc })
            .collect();
        ens.splice(i..=i, new);
    }
    Ok(SoundnessReport { holds: true, steps, violation: None, exhausted: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::operator::Tolerances;

    fn load(src: &str, mode: Mode) -> (Model, ProofOutline) {
        let f = parse(src).unwrap();
        let m = Model::new(&f.decls, &Tolerances::default());
        let o = ProofOutline::from_parsed(&f, &m, mode).unwrap();
        (m, o)
    }

    #[test]
    fn skip_gives_single_vc() {
        let (m, o) = load("var q: 2; prog { @{ proj(|0>) } skip; @{ proj(|0>) } }", Mode::Partial);
        let vcs = vcgen(&m, &o).unwrap();
        assert_eq!(vcs.len(), 1);
        assert_eq!(vcs[0].rule, "Ax.Sk′");
        assert!(discharge(&m, &vcs, 1e-9).unwrap().holds);
    }

    #[test]
    fn consequence_chains() {
        let src = "var q: 2; prog { @{ 0.5 * proj(|0>) } @{ proj(|0>) } skip; @{ proj(|0>) } @{ I(2) } }";
        let (m, o) = load(src, Mode::Partial);
        let vcs = vcgen(&m, &o).unwrap();
        let rules: Vec<&str> = vcs.iter().map(|v| v.rule.as_str()).collect();
        assert_eq!(rules.iter().filter(|r| **r == "R.Or′").count(), 2);
        assert!(discharge(&m, &vcs, 1e-9).unwrap().holds);
    }

    #[test]
    fn middle_inferred_by_wp() {
        let src = "var q: 2; prog { @{ proj(|0>) } apply H(q); apply H(q); @{ proj(|0>) } }";
        let (m, o) = load(src, Mode::Total);
        assert!(!o.is_standard());
        let s = standardize(&m, &o).unwrap();
        assert!(s.is_standard());
        let mid = s.pre(&[PathStep::Second]).unwrap();
        let plus = ComplexMatrix::real(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(mid.approx_eq(&plus, 1e-12));
        let again = standardize(&m, &s).unwrap();
        assert_eq!(again.annotations, s.annotations);
    }

    #[test]
    fn loop_without_body_annotation() {
        let src = "var q: 2; meas M = { 0: proj(|0>); 1: proj(|1>); }; \
                   prog { @{ I(2) } while M(q) == 1 { apply H(q); } @{ proj(|0>) } }";
        let (m, o) = load(src, Mode::Partial);
        assert!(matches!(standardize(&m, &o), Err(OutlineError::UninferableLoop { .. })));
        let (m, o) = load(src, Mode::Total);
        let (_, vcs, r) = check_outline(&m, &o, 1e-8).unwrap();
        assert!(vcs.iter().any(|v| v.rule == "R.LT(semantic)"));
        assert!(r.holds, "{:?}", r.verdicts);
    }

    #[test]
    fn soundness_trace_on_loop() {
        let src = "var q: 2; meas M = { 0: proj(|0>); 1: proj(|1>); }; \
                   prog { @{ I(2) } while M(q) == 1 { @{ I(2) } apply H(q); } @{ proj(|0>) } }";
        let (m, o) = load(src, Mode::Partial);
        let (s, _, r) = check_outline(&m, &o, 1e-9).unwrap();
        assert!(r.holds);
        let rep = strong_soundness_trace(&m, &s, &ComplexMatrix::unit(2, 1, 1), 200, 1e-8).unwrap();
        assert!(rep.holds && rep.violation.is_none());
        assert!(rep.steps.len() > 10);
    }
}
