//! Proof rules for partial and total correctness, with numerically checked side conditions.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::ranking::{ranking_check, RankingFn, RankingGoal};
use super::{check_triple, wp_total, Formula, HoareError, Mode};
use crate::lang::{Program, Span};
use crate::operator::{embed, loewner_leq, partial_trace, ComplexMatrix, QuantumPredicate, Superoperator};
use crate::semantics::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RuleTag {
    AxSk,
    AxInB,
    AxInI,
    AxUT,
    RSC,
    RIF,
    RLP,
    RLT,
    ROr,
    AxInv,
    RTI,
    RCC,
    RInv,
    RSO,
}

impl RuleTag {
    pub const ALL: [RuleTag; 14] = [
        RuleTag::AxSk,
        RuleTag::AxInB,
        RuleTag::AxInI,
        RuleTag::AxUT,
        RuleTag::RSC,
        RuleTag::RIF,
        RuleTag::RLP,
        RuleTag::RLT,
        RuleTag::ROr,
        RuleTag::AxInv,
        RuleTag::RTI,
        RuleTag::RCC,
        RuleTag::RInv,
        RuleTag::RSO,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleTag::AxSk => "Ax.Sk",
            RuleTag::AxInB => "Ax.In.B",
            RuleTag::AxInI => "Ax.In.I",
            RuleTag::AxUT => "Ax.UT",
            RuleTag::RSC => "R.SC",
            RuleTag::RIF => "R.IF",
            RuleTag::RLP => "R.LP",
            RuleTag::RLT => "R.LT",
            RuleTag::ROr => "R.Or",
            RuleTag::AxInv => "Ax.Inv",
            RuleTag::RTI => "R.TI",
            RuleTag::RCC => "R.CC",
            RuleTag::RInv => "R.Inv",
            RuleTag::RSO => "R.SO",
        }
    }
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a superoperator acts on the predicates of a premise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Picture {
    /// `E*(A) = Σ E_i† A E_i`, the form the substitution rule is stated in.
    Dual,
    /// `E(A) = Σ E_i A E_i†`; only available through [`rule_conclusion`].
    Forward,
}

/// One rule instance. Premises have type `P`: formulas for a single step,
/// sub-derivations for whole proof trees.
#[derive(Debug, Clone)]
pub enum RuleApplication<P = Formula> {
    /// `{A} skip {A}`
    Skip { pred: ComplexMatrix },
    /// Initialisation of a qubit.
    InitBool { var: String, post: ComplexMatrix },
    /// Initialisation of a qudit of any declared dimension.
    InitInt { var: String, post: ComplexMatrix },
    /// `{U†AU} q̄ := U[q̄] {A}`
    Unitary { gate: String, vars: Vec<String>, post: ComplexMatrix },
    Seq { first: P, second: P },
    /// One premise `{A_m} P_m {B}` per outcome.
    Case { meas: String, vars: Vec<String>, branches: Vec<(String, P)> },
    /// Premise `{B} S {M0†AM0 + M1†BM1}`; `exit` is `A`.
    Loop { meas: String, vars: Vec<String>, cont: String, exit: ComplexMatrix, body: P },
    /// As `Loop`, plus a ranking function for `M1†BM1` checked on `states` up to `depth` iterations.
    LoopTotal {
        meas: String,
        vars: Vec<String>,
        cont: String,
        exit: ComplexMatrix,
        body: P,
        ranking: RankingFn,
        eps: f64,
        states: Vec<ComplexMatrix>,
        depth: usize,
    },
    /// Strengthen the precondition to `pre` and weaken the postcondition to `post`.
    Or { premise: P, pre: ComplexMatrix, post: ComplexMatrix },
    /// `{A} P {A}` with `A` the extension of `pred` on `vars`, disjoint from `var(P)`.
    Invariance { prog: Program, vars: Vec<String>, pred: ComplexMatrix },
    /// Traces out `traced` from the precondition (normalised by their dimension).
    TraceIntro { premise: P, traced: Vec<String> },
    /// Convex combination of premises about the same program.
    Convex { premises: Vec<(f64, P)> },
    /// `{pA + qC} P {pB + qC}` with `C` on `vars`, disjoint from `var(P)`.
    Mix { premise: P, p: f64, q: f64, vars: Vec<String>, pred: ComplexMatrix },
    /// Applies a channel on `vars` to both predicates.
    SuperOp { premise: P, vars: Vec<String>, channel: Superoperator, picture: Picture },
}

impl<P> RuleApplication<P> {
    pub fn tag(&self) -> RuleTag {
        match self {
            RuleApplication::Skip { .. } => RuleTag::AxSk,
            RuleApplication::InitBool { .. } => RuleTag::AxInB,
            RuleApplication::InitInt { .. } => RuleTag::AxInI,
            RuleApplication::Unitary { .. } => RuleTag::AxUT,
            RuleApplication::Seq { .. } => RuleTag::RSC,
            RuleApplication::Case { .. } => RuleTag::RIF,
            RuleApplication::Loop { .. } => RuleTag::RLP,
            RuleApplication::LoopTotal { .. } => RuleTag::RLT,
            RuleApplication::Or { .. } => RuleTag::ROr,
            RuleApplication::Invariance { .. } => RuleTag::AxInv,
            RuleApplication::TraceIntro { .. } => RuleTag::RTI,
            RuleApplication::Convex { .. } => RuleTag::RCC,
            RuleApplication::Mix { .. } => RuleTag::RInv,
            RuleApplication::SuperOp { .. } => RuleTag::RSO,
        }
    }

    pub fn premises(&self) -> Vec<&P> {
        match self {
            RuleApplication::Skip { .. }
            | RuleApplication::InitBool { .. }
            | RuleApplication::InitInt { .. }
            | RuleApplication::Unitary { .. }
            | RuleApplication::Invariance { .. } => Vec::new(),
            RuleApplication::Seq { first, second } => vec![first, second],
            RuleApplication::Case { branches, .. } => branches.iter().map(|(_, p)| p).collect(),
            RuleApplication::Loop { body, .. } | RuleApplication::LoopTotal { body, .. } => vec![body],
            RuleApplication::Convex { premises } => premises.iter().map(|(_, p)| p).collect(),
            RuleApplication::Or { premise, .. }
            | RuleApplication::TraceIntro { premise, .. }
            | RuleApplication::Mix { premise, .. }
            | RuleApplication::SuperOp { premise, .. } => vec![premise],
        }
    }

    /// Replaces every premise by `f(premise)`, keeping the side data.
    pub fn try_map<Q, E>(&self, f: &mut impl FnMut(&P) -> Result<Q, E>) -> Result<RuleApplication<Q>, E> {
        use RuleApplication as R;
        Ok(match self {
            R::Skip { pred } => R::Skip { pred: pred.clone() },
            R::InitBool { var, post } => R::InitBool { var: var.clone(), post: post.clone() },
            R::InitInt { var, post } => R::InitInt { var: var.clone(), post: post.clone() },
            R::Unitary { gate, vars, post } => R::Unitary { gate: gate.clone(), vars: vars.clone(), post: post.clone() },
            R::Seq { first, second } => R::Seq { first: f(first)?, second: f(second)? },
            R::Case { meas, vars, branches } => R::Case {
                meas: meas.clone(),
                vars: vars.clone(),
                branches: branches.iter().map(|(l, p)| Ok((l.clone(), f(p)?))).collect::<Result<_, E>>()?,
            },
            R::Loop { meas, vars, cont, exit, body } => R::Loop {
                meas: meas.clone(),
                vars: vars.clone(),
                cont: cont.clone(),
                exit: exit.clone(),
                body: f(body)?,
            },
            R::LoopTotal { meas, vars, cont, exit, body, ranking, eps, states, depth } => R::LoopTotal {
                meas: meas.clone(),
                vars: vars.clone(),
                cont: cont.clone(),
                exit: exit.clone(),
                body: f(body)?,
                ranking: ranking.clone(),
                eps: *eps,
                states: states.clone(),
                depth: *depth,
            },
            R::Or { premise, pre, post } => R::Or { premise: f(premise)?, pre: pre.clone(), post: post.clone() },
            R::Invariance { prog, vars, pred } => R::Invariance { prog: prog.clone(), vars: vars.clone(), pred: pred.clone() },
            R::TraceIntro { premise, traced } => R::TraceIntro { premise: f(premise)?, traced: traced.clone() },
            R::Convex { premises } => R::Convex {
                premises: premises.iter().map(|(w, p)| Ok((*w, f(p)?))).collect::<Result<_, E>>()?,
            },
            R::Mix { premise, p, q, vars, pred } => {
                R::Mix { premise: f(premise)?, p: *p, q: *q, vars: vars.clone(), pred: pred.clone() }
            }
            R::SuperOp { premise, vars, channel, picture } => R::SuperOp {
                premise: f(premise)?,
                vars: vars.clone(),
                channel: channel.clone(),
                picture: *picture,
            },
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("({rule}) side condition `{condition}` fails: {detail}")]
    SideCondition { rule: RuleTag, condition: String, detail: String },
    #[error(transparent)]
    Hoare(#[from] HoareError),
}

impl From<crate::operator::OperatorError> for RuleError {
    fn from(e: crate::operator::OperatorError) -> Self {
        RuleError::Hoare(e.into())
    }
}

/// Outcome of one side condition.
#[derive(Debug, Clone, Serialize)]
pub struct SideCheck {
    pub condition: String,
    pub holds: bool,
    pub detail: String,
}

fn check(condition: &str, holds: bool, detail: impl Into<String>) -> SideCheck {
    SideCheck { condition: condition.into(), holds, detail: detail.into() }
}

fn loop_pre(model: &Model, meas: &str, vars: &[String], cont: &str, exit: &ComplexMatrix, inv: &ComplexMatrix) -> Result<ComplexMatrix, RuleError> {
    let g = model.guard(meas, vars, cont)?;
    Ok(&Model::dual_by(&g.m0, exit) + &Model::dual_by(&g.m1, inv))
}

fn extend(model: &Model, op: &ComplexMatrix, vars: &[String]) -> Result<ComplexMatrix, RuleError> {
    Ok(embed(op, vars, model.space())?)
}

/// `(1/d_W) tr_W(A) ⊗ I_W`, rearranged into the full space.
fn trace_out(model: &Model, a: &ComplexMatrix, traced: &[String]) -> Result<ComplexMatrix, RuleError> {
    let space = model.space();
    let rest = space.without(traced);
    let dw = space.dim() / rest.dim();
    let reduced = partial_trace(a, traced, space)?;
    Ok(extend(model, &reduced, &rest.names())?.scale_re(1.0 / dw as f64))
}

fn channel_image(model: &Model, a: &ComplexMatrix, vars: &[String], e: &Superoperator, picture: Picture) -> Result<ComplexMatrix, RuleError> {
    let mut out = ComplexMatrix::zeros(a.rows(), a.cols());
    for k in e.kraus() {
        let k = extend(model, k, vars)?;
        out = &out
            + &match picture {
                Picture::Dual => Model::dual_by(&k, a),
                Picture::Forward => Model::conj_by(&k, a),
            };
    }
    Ok(out)
}

fn disjoint(vars: &[String], prog: &Program) -> (bool, String) {
    let pv = prog.mentioned_vars();
    let common: Vec<&String> = vars.iter().filter(|v| pv.contains(v)).collect();
    let detail = if common.is_empty() {
        String::new()
    } else {
        format!("shared variables {}", common.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))
    };
    (common.is_empty(), detail)
}

/// The conclusion a rule instance produces, computed without checking any side condition.
pub fn rule_conclusion(model: &Model, app: &RuleApplication, mode: Mode) -> Result<Formula, RuleError> {
    use RuleApplication as R;
    let f = |pre, prog, post| Formula { pre, prog, post, mode };
    Ok(match app {
        R::Skip { pred } => f(pred.clone(), Program::Skip, pred.clone()),
        R::InitBool { var, post } | R::InitInt { var, post } => {
            let prog = Program::init(var);
            let pre = super::wp_total(model, &prog, post)?.matrix;
            f(pre, prog, post.clone())
        }
        R::Unitary { gate, vars, post } => {
            let u = model.unitary(gate, vars)?;
            f(Model::dual_by(&u, post), Program::Unitary { gate: gate.clone(), vars: vars.clone() }, post.clone())
        }
        R::Seq { first, second } => f(first.pre.clone(), Program::seq(first.prog.clone(), second.prog.clone()), second.post.clone()),
        R::Case { meas, vars, branches } => {
            let ops = model.measurement(meas, vars)?;
            let m = model
                .decls()
                .measurement(meas)
                .ok_or_else(|| side(RuleTag::RIF, "measurement declared", format!("unknown `{meas}`")))?;
            let mut pre = ComplexMatrix::zeros(model.dim(), model.dim());
            for (label, prem) in branches {
                let i = m
                    .index_of(label)
                    .ok_or_else(|| side(RuleTag::RIF, "one premise per outcome", format!("no outcome `{label}`")))?;
                pre = &pre + &Model::dual_by(&ops[i], &prem.pre);
            }
            let post = branches.first().map(|(_, p)| p.post.clone()).unwrap_or_else(|| ComplexMatrix::zeros(model.dim(), model.dim()));
            let prog = Program::Case {
                meas: meas.clone(),
                vars: vars.clone(),
                branches: branches.iter().map(|(l, p)| (l.clone(), p.prog.clone())).collect(),
            };
            f(pre, prog, post)
        }
        R::Loop { meas, vars, cont, exit, body } | R::LoopTotal { meas, vars, cont, exit, body, .. } => {
            let pre = loop_pre(model, meas, vars, cont, exit, &body.pre)?;
            let prog = Program::While { meas: meas.clone(), vars: vars.clone(), cont: cont.clone(), body: Box::new(body.prog.clone()) };
            f(pre, prog, exit.clone())
        }
        R::Or { premise, pre, post } => f(pre.clone(), premise.prog.clone(), post.clone()),
        R::Invariance { prog, vars, pred } => {
            let a = extend(model, pred, vars)?;
            f(a.clone(), prog.clone(), a)
        }
        R::TraceIntro { premise, traced } => f(trace_out(model, &premise.pre, traced)?, premise.prog.clone(), premise.post.clone()),
        R::Convex { premises } => {
            let d = model.dim();
            let (mut pre, mut post) = (ComplexMatrix::zeros(d, d), ComplexMatrix::zeros(d, d));
            for (w, p) in premises {
                pre = &pre + &p.pre.scale_re(*w);
                post = &post + &p.post.scale_re(*w);
            }
            let prog = premises.first().map(|(_, p)| p.prog.clone()).unwrap_or(Program::Skip);
            f(pre, prog, post)
        }
        R::Mix { premise, p, q, vars, pred } => {
            let c = extend(model, pred, vars)?.scale_re(*q);
            f(&premise.pre.scale_re(*p) + &c, premise.prog.clone(), &premise.post.scale_re(*p) + &c)
        }
        R::SuperOp { premise, vars, channel, picture } => f(
            channel_image(model, &premise.pre, vars, channel, *picture)?,
            premise.prog.clone(),
            channel_image(model, &premise.post, vars, channel, *picture)?,
        ),
    })
}

fn side(rule: RuleTag, condition: &str, detail: String) -> RuleError {
    RuleError::SideCondition { rule, condition: condition.into(), detail }
}

fn matches(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> (bool, String) {
    let d = a.max_abs_diff(b);
    (d <= tol, format!("max entry difference {d:.3e}"))
}

fn is_predicate(model: &Model, m: &ComplexMatrix, vars: &[String]) -> (bool, String) {
    let space = match model.space().select(vars) {
        Ok(s) => s,
        Err(e) => return (false, e.to_string()),
    };
    match QuantumPredicate::new(m.clone(), space, model.tol()) {
        Ok(_) => (true, String::new()),
        Err(e) => (false, e.to_string()),
    }
}

/// Evaluates every side condition of a rule instance.
pub fn side_conditions(model: &Model, app: &RuleApplication, mode: Mode) -> Result<Vec<SideCheck>, RuleError> {
    use RuleApplication as R;
    let tol = model.tol();
    let all: Vec<String> = model.space().names();
    let mut out = Vec::new();
    for p in app.premises() {
        out.push(check("premise mode", p.mode == mode, format!("premise is {}, conclusion is {mode}", p.mode)));
    }
    match app {
        R::Skip { pred } => {
            let (ok, d) = is_predicate(model, pred, &all);
            out.push(check("A is a predicate", ok, d));
        }
        R::InitBool { var, post } => {
            let dim = model.space().var_dim(var)?;
            out.push(check("type(q) = Boolean", dim == 2, format!("`{var}` has dimension {dim}")));
            let (ok, d) = is_predicate(model, post, &all);
            out.push(check("A is a predicate", ok, d));
        }
        R::InitInt { var, post } => {
            model.space().var_dim(var)?;
            let (ok, d) = is_predicate(model, post, &all);
            out.push(check("A is a predicate", ok, d));
        }
        R::Unitary { gate, vars, post } => {
            model.unitary(gate, vars)?;
            let (ok, d) = is_predicate(model, post, &all);
            out.push(check("A is a predicate", ok, d));
        }
        R::Seq { first, second } => {
            let (ok, d) = matches(&first.post, &second.pre, tol.eq);
            out.push(check("post(P1) = pre(P2)", ok, d));
        }
        R::Case { meas, branches, .. } => {
            let m = model
                .decls()
                .measurement(meas)
                .ok_or_else(|| side(RuleTag::RIF, "measurement declared", format!("unknown `{meas}`")))?;
            let mut labels: Vec<&str> = branches.iter().map(|(l, _)| l.as_str()).collect();
            labels.sort();
            let mut want: Vec<&str> = m.outcomes.iter().map(|(l, _)| l.as_str()).collect();
            want.sort();
            out.push(check("one premise per outcome", labels == want, format!("premises for {labels:?}, outcomes {want:?}")));
            if let Some((_, first)) = branches.first() {
                for (l, p) in branches {
                    let (ok, d) = matches(&first.post, &p.post, tol.eq);
                    out.push(check("common postcondition", ok, format!("branch {l}: {d}")));
                }
            }
        }
        R::Loop { meas, vars, cont, exit, body } => {
            out.push(check("partial correctness only", mode == Mode::Partial, format!("mode is {mode}")));
            let d = loop_pre(model, meas, vars, cont, exit, &body.pre)?;
            let (ok, det) = matches(&body.post, &d, tol.eq);
            out.push(check("post(S) = M0†AM0 + M1†BM1", ok, det));
        }
        R::LoopTotal { meas, vars, cont, exit, body, ranking, eps, states, depth } => {
            out.push(check("total correctness only", mode == Mode::Total, format!("mode is {mode}")));
            let d = loop_pre(model, meas, vars, cont, exit, &body.pre)?;
            let (ok, det) = matches(&body.post, &d, tol.eq);
            out.push(check("post(S) = M0†PM0 + M1†QM1", ok, det));
            let g = model.guard(meas, vars, cont)?;
            let goal = RankingGoal { function: ranking.clone(), target: Model::dual_by(&g.m1, &body.pre), eps: *eps };
            let prog = Program::While { meas: meas.clone(), vars: vars.clone(), cont: cont.clone(), body: Box::new(body.prog.clone()) };
            let r = ranking_check(model, &prog, &goal, states, *depth)?;
            let detail = match &r.violation {
                None => format!("{} states checked", r.states_checked),
                Some(v) => format!("condition {} fails at state {} after {} iterations", v.condition, v.origin, v.iteration),
            };
            out.push(check("t is a (M1†QM1, ε)-ranking function", r.passed, detail));
        }
        R::Or { premise, pre, post } => {
            let v = loewner_leq(pre, &premise.pre, tol.psd)?;
            out.push(check("A ⊑ A′", v.holds, format!("min eigenvalue {:.3e}", v.min_eig)));
            let v = loewner_leq(&premise.post, post, tol.psd)?;
            out.push(check("B′ ⊑ B", v.holds, format!("min eigenvalue {:.3e}", v.min_eig)));
        }
        R::Invariance { prog, vars, pred } => {
            out.push(check("partial correctness only", mode == Mode::Partial, format!("mode is {mode}")));
            let (ok, d) = disjoint(vars, prog);
            out.push(check("var(P) ∩ V = ∅", ok, d));
            let (ok, d) = is_predicate(model, pred, vars);
            out.push(check("B is a predicate on V", ok, d));
        }
        R::TraceIntro { premise, traced } => {
            for v in traced {
                model.space().var_dim(v)?;
            }
            let (ok, d) = disjoint(traced, &premise.prog);
            out.push(check("var(P) ⊆ V", ok, d));
            let cyl = trace_out(model, &premise.post, traced)?;
            let (ok, d) = matches(&premise.post, &cyl, tol.eq);
            out.push(check("post = B ⊗ I_W", ok, d));
        }
        R::Convex { premises } => {
            let ws: Vec<f64> = premises.iter().map(|(w, _)| *w).collect();
            out.push(check("p_i ≥ 0", ws.iter().all(|w| *w >= 0.0), format!("{ws:?}")));
            let s: f64 = ws.iter().sum();
            out.push(check("Σ p_i ≤ 1", s <= 1.0 + tol.eq, format!("sum {s}")));
            let same = premises.windows(2).all(|w| w[0].1.prog == w[1].1.prog);
            out.push(check("same program", same && !premises.is_empty(), String::new()));
        }
        R::Mix { premise, p, q, vars, pred } => {
            out.push(check("p, q ≥ 0", *p >= 0.0 && *q >= 0.0, format!("p = {p}, q = {q}")));
            out.push(check("p + q ≤ 1", p + q <= 1.0 + tol.eq, format!("p + q = {}", p + q)));
            let (ok, d) = disjoint(vars, &premise.prog);
            out.push(check("V ∩ var(P) = ∅", ok, d));
            let (ok, d) = is_predicate(model, pred, vars);
            out.push(check("C is a predicate on V", ok, d));
            if mode == Mode::Total {
                let id = ComplexMatrix::identity(model.dim());
                let w = wp_total(model, &premise.prog, &id)?;
                let v = loewner_leq(&id, &w.matrix, tol.psd)?;
                out.push(check("P terminates", v.holds, format!("min eigenvalue of wp(P, I) − I is {:.3e}", v.min_eig)));
            }
        }
        R::SuperOp { premise, vars, channel, picture } => {
            let (ok, d) = disjoint(vars, &premise.prog);
            out.push(check("var(P) ∩ V = ∅", ok, d));
            let dv = model.space().select(vars)?.dim();
            out.push(check(
                "E acts on H_V",
                channel.d_in() == dv && channel.d_out() == dv,
                format!("channel is {}→{}, H_V has dimension {dv}", channel.d_in(), channel.d_out()),
            ));
            out.push(check("dual picture", *picture == Picture::Dual, format!("{picture:?}")));
        }
    }
    Ok(out)
}

/// Checks the side conditions of a rule instance and returns its conclusion.
pub fn apply_rule(model: &Model, app: &RuleApplication, mode: Mode) -> Result<Formula, RuleError> {
    let rule = app.tag();
    if let Some(c) = side_conditions(model, app, mode)?.into_iter().find(|c| !c.holds) {
        return Err(RuleError::SideCondition { rule, condition: c.condition, detail: c.detail });
    }
    rule_conclusion(model, app, mode)
}

/// A proof tree: a rule instance whose premises are again proof trees.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub node: Box<RuleApplication<Derivation>>,
    pub span: Option<Span>,
}

impl Derivation {
    pub fn new(node: RuleApplication<Derivation>) -> Self {
        Derivation { node: Box::new(node), span: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeReport {
    pub rule: RuleTag,
    pub depth: usize,
    pub ok: bool,
    pub message: Option<String>,
    /// Result of re-checking the conclusion semantically, when requested.
    pub semantic: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct DerivationReport {
    pub valid: bool,
    pub conclusion: Option<Formula>,
    /// Nodes in post-order.
    pub nodes: Vec<NodeReport>,
}

fn verify_node(
    model: &Model,
    d: &Derivation,
    mode: Mode,
    semantic: bool,
    depth: usize,
    nodes: &mut Vec<NodeReport>,
) -> Result<Formula, String> {
    let app = d.node.try_map(&mut |sub: &Derivation| verify_node(model, sub, mode, semantic, depth + 1, nodes));
    let rule = d.node.tag();
    let app = match app {
        Ok(a) => a,
        Err(_) => {
            let message = "a premise is not derivable".to_string();
            nodes.push(NodeReport { rule, depth, ok: false, message: Some(message.clone()), semantic: None });
            return Err(message);
        }
    };
    match apply_rule(model, &app, mode) {
        Ok(f) => {
            let sem = semantic.then(|| check_triple(model, &f, 1e-7).map(|v| v.holds).unwrap_or(false));
            nodes.push(NodeReport { rule, depth, ok: true, message: None, semantic: sem });
            Ok(f)
        }
        Err(e) => {
            nodes.push(NodeReport { rule, depth, ok: false, message: Some(e.to_string()), semantic: None });
            Err(e.to_string())
        }
    }
}

/// Machine-checks a proof tree; with `semantic`, every conclusion is also checked against the semantics.
pub fn verify_derivation(model: &Model, d: &Derivation, mode: Mode, semantic: bool) -> DerivationReport {
    let mut nodes = Vec::new();
    let res = verify_node(model, d, mode, semantic, 0, &mut nodes);
    let valid = res.is_ok() && nodes.iter().all(|n| n.ok && n.semantic != Some(false));
    DerivationReport { valid, conclusion: res.ok(), nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::operator::{amplitude_damping, vector_from, Tolerances, C64};

    fn model(src: &str) -> Model {
        Model::new(&parse(src).unwrap().decls, &Tolerances::default())
    }

    fn minus() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::projector(&vector_from(&[C64::new(s, 0.0), C64::new(-s, 0.0)]))
    }

    #[test]
    fn unitary_axiom() {
        let m = model("var q: 2; prog { skip; }");
        let app = RuleApplication::Unitary { gate: "H".into(), vars: vec!["q".into()], post: ComplexMatrix::unit(2, 1, 1) };
        let f = apply_rule(&m, &app, Mode::Total).unwrap();
        assert!(f.pre.approx_eq(&minus(), 1e-15));
    }

    #[test]
    fn consequence_names_failing_premise() {
        let m = model("var q: 2; prog { skip; }");
        let prem = rule_conclusion(&m, &RuleApplication::Skip { pred: ComplexMatrix::unit(2, 0, 0) }, Mode::Partial).unwrap();
        let app = RuleApplication::Or { premise: prem, pre: ComplexMatrix::identity(2), post: ComplexMatrix::identity(2) };
        match apply_rule(&m, &app, Mode::Partial) {
            Err(RuleError::SideCondition { rule, condition, .. }) => {
                assert_eq!(rule, RuleTag::ROr);
                assert_eq!(condition, "A ⊑ A′");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn convex_fixed_point() {
        let m = model("var q: 2; prog { skip; }");
        let prem = apply_rule(
            &m,
            &RuleApplication::Unitary { gate: "H".into(), vars: vec!["q".into()], post: ComplexMatrix::unit(2, 1, 1) },
            Mode::Total,
        )
        .unwrap();
        let app = RuleApplication::Convex { premises: vec![(0.5, prem.clone()), (0.5, prem.clone())] };
        let f = apply_rule(&m, &app, Mode::Total).unwrap();
        assert!(f.pre.approx_eq(&prem.pre, 1e-15) && f.post.approx_eq(&prem.post, 1e-15));
    }

    #[test]
    fn substitution_requires_disjoint_channel() {
        let m = model("var q: 2; var r: 2; prog { skip; }");
        let h = apply_rule(
            &m,
            &RuleApplication::Unitary { gate: "H".into(), vars: vec!["q".into()], post: ComplexMatrix::unit(2, 1, 1).kron(&ComplexMatrix::identity(2)) },
            Mode::Total,
        )
        .unwrap();
        let on_q = RuleApplication::SuperOp { premise: h.clone(), vars: vec!["q".into()], channel: amplitude_damping(0.5), picture: Picture::Dual };
        match apply_rule(&m, &on_q, Mode::Total) {
            Err(RuleError::SideCondition { condition, .. }) => assert_eq!(condition, "var(P) ∩ V = ∅"),
            other => panic!("unexpected {other:?}"),
        }
        let on_r = RuleApplication::SuperOp { premise: h, vars: vec!["r".into()], channel: amplitude_damping(0.5), picture: Picture::Dual };
        let f = apply_rule(&m, &on_r, Mode::Total).unwrap();
        assert!(check_triple(&m, &f, 1e-9).unwrap().holds);
    }

    #[test]
    fn derivation_of_two_hadamards() {
        let m = model("var a: 2; var b: 2; prog { skip; }");
        let post = ComplexMatrix::unit(4, 3, 3);
        let second = Derivation::new(RuleApplication::Unitary { gate: "H".into(), vars: vec!["b".into()], post: post.clone() });
        let mid = apply_rule(
            &m,
            &RuleApplication::Unitary { gate: "H".into(), vars: vec!["b".into()], post },
            Mode::Total,
        )
        .unwrap()
        .pre;
        let first = Derivation::new(RuleApplication::Unitary { gate: "H".into(), vars: vec!["a".into()], post: mid });
        let tree = Derivation::new(RuleApplication::Seq { first, second });
        let r = verify_derivation(&m, &tree, Mode::Total, true);
        assert!(r.valid, "{:?}", r.nodes);
        assert_eq!(r.nodes.len(), 3);
    }

    #[test]
    fn loop_rule_mode_restrictions() {
        let m = model("var q: 2; meas M = { 0: proj(|0>); 1: proj(|1>); }; prog { skip; }");
        let id = ComplexMatrix::identity(2);
        let body = rule_conclusion(
            &m,
            &RuleApplication::Unitary { gate: "H".into(), vars: vec!["q".into()], post: id.clone() },
            Mode::Total,
        )
        .unwrap();
        let app = RuleApplication::Loop { meas: "M".into(), vars: vec!["q".into()], cont: "1".into(), exit: id.clone(), body };
        assert!(apply_rule(&m, &app, Mode::Total).is_err());
    }
}
