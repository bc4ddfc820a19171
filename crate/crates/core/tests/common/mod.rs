//! Random environments, programs and rule instances shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use qwhile::hoare::{check_triple, rule_conclusion, side_conditions, wp, Formula, Mode, Picture, RuleApplication, RuleTag};
use qwhile::lang::{Declarations, Measurement, Program, Span};
use qwhile::operator::{embed, ComplexMatrix, Tolerances};
use qwhile::random;
use qwhile::semantics::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn corpus(name: &str) -> String {
    let p = corpus_path(name);
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn corpus_programs() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "qw"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

/// Variables, one random gate per variable, a random gate `W` on the first two
/// variables and a random projective measurement `M<d>` per occurring dimension.
pub struct Env {
    pub model: Model,
    pub vars: Vec<(String, usize)>,
}

impl Env {
    pub fn random<R: Rng>(rng: &mut R) -> Env {
        if rng.random_bool(0.5) {
            Env::with(&[("p", 2), ("q", 2), ("r", 2)], rng)
        } else {
            Env::with(&[("p", 2), ("t", 3)], rng)
        }
    }

    pub fn with<R: Rng>(layout: &[(&str, usize)], rng: &mut R) -> Env {
        let tol = Tolerances::default();
        let sp = Span::default();
        let mut decls = Declarations::with_vars(layout).unwrap();
        for (v, d) in layout {
            decls.add_gate(&format!("U{v}"), random::unitary(*d, rng), &tol, sp).unwrap();
        }
        decls.add_gate("W", random::unitary(layout[0].1 * layout[1].1, rng), &tol, sp).unwrap();
        let mut dims: Vec<usize> = layout.iter().map(|(_, d)| *d).collect();
        dims.sort();
        dims.dedup();
        for d in dims {
            let u = random::unitary(d, rng);
            let outcomes = (0..d)
                .map(|i| {
                    let col = ComplexMatrix::from_fn(d, 1, |r, _| u.get(r, i));
                    (i.to_string(), &col * &col.dagger())
                })
                .collect();
            decls.add_measurement(&format!("M{d}"), Measurement::new(outcomes), &tol, sp).unwrap();
        }
        Env { model: Model::new(&decls, &tol), vars: layout.iter().map(|(v, d)| (v.to_string(), *d)).collect() }
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn dim_of(&self, vars: &[String]) -> usize {
        vars.iter().map(|v| self.vars.iter().find(|(n, _)| n == v).unwrap().1).product()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Random predicate on `vars`, extended by the identity.
    pub fn pred_on<R: Rng>(&self, vars: &[String], rng: &mut R) -> ComplexMatrix {
        embed(&random::predicate(self.dim_of(vars), rng), vars, self.model.space()).unwrap()
    }

    pub fn pred<R: Rng>(&self, rng: &mut R) -> ComplexMatrix {
        random::predicate(self.dim(), rng)
    }

    pub fn state<R: Rng>(&self, rng: &mut R) -> ComplexMatrix {
        random::density(self.dim(), rng)
    }

    /// Splits the variables into a random nonempty `V` and its complement.
    pub fn split<R: Rng>(&self, rng: &mut R) -> (Vec<String>, Vec<String>) {
        let names = self.names();
        let i = rng.random_range(0..names.len());
        let v = vec![names[i].clone()];
        let rest = names.into_iter().filter(|n| *n != v[0]).collect();
        (v, rest)
    }

    /// Random loop-free program mentioning only `vars`.
    pub fn program<R: Rng>(&self, vars: &[String], depth: usize, rng: &mut R) -> Program {
        if vars.is_empty() {
            return Program::Skip;
        }
        let n = rng.random_range(1..=3);
        let stmts = (0..n).map(|_| self.statement(vars, depth, rng)).collect();
        Program::seq_all(stmts)
    }

    fn statement<R: Rng>(&self, vars: &[String], depth: usize, rng: &mut R) -> Program {
        let v = vars[rng.random_range(0..vars.len())].clone();
        let (first, second) = (&self.vars[0].0, &self.vars[1].0);
        let pair = vars.contains(first) && vars.contains(second);
        match rng.random_range(0..if depth > 0 { 5 } else { 4 }) {
            0 => Program::Skip,
            1 => Program::Init { var: v },
            2 if pair => Program::Unitary { gate: "W".into(), vars: vec![first.clone(), second.clone()] },
            2 | 3 => Program::Unitary { gate: format!("U{v}"), vars: vec![v] },
            _ => {
                let d = self.dim_of(std::slice::from_ref(&v));
                let branches = (0..d).map(|i| (i.to_string(), self.program(vars, depth - 1, rng))).collect();
                Program::Case { meas: format!("M{d}"), vars: vec![v], branches }
            }
        }
    }

    /// `{c·wp(P, B)} P {B}` for a random `c ∈ [0.5, 1]`.
    pub fn holding<R: Rng>(&self, prog: Program, post: ComplexMatrix, mode: Mode, rng: &mut R) -> Formula {
        let w = wp(&self.model, &prog, &post, mode).unwrap().matrix;
        let c = rng.random_range(0.5..=1.0);
        Formula::new(w.scale_re(c), prog, post, mode)
    }
}

/// The rules covered by the soundness suite.
pub const SOUNDNESS_RULES: [RuleTag; 13] = [
    RuleTag::AxSk,
    RuleTag::AxInB,
    RuleTag::AxInI,
    RuleTag::AxUT,
    RuleTag::RSC,
    RuleTag::RIF,
    RuleTag::RLP,
    RuleTag::ROr,
    RuleTag::AxInv,
    RuleTag::RTI,
    RuleTag::RCC,
    RuleTag::RInv,
    RuleTag::RSO,
];

/// A random instance of `rule` whose premises hold, with the mode it is stated in.
pub fn rule_instance<R: Rng>(env: &Env, rule: RuleTag, rng: &mut R) -> (RuleApplication, Mode) {
    use RuleApplication as A;
    let all = env.names();
    let tot = Mode::Total;
    match rule {
        RuleTag::AxSk => (A::Skip { pred: env.pred(rng) }, tot),
        RuleTag::AxInB => (A::InitBool { var: "p".into(), post: env.pred(rng) }, tot),
        RuleTag::AxInI => {
            let var = all[rng.random_range(0..all.len())].clone();
            (A::InitInt { var, post: env.pred(rng) }, tot)
        }
        RuleTag::AxUT => {
            let v = all[rng.random_range(0..all.len())].clone();
            let (gate, vars) = if rng.random_bool(0.3) { ("W".to_string(), all[..2].to_vec()) } else { (format!("U{v}"), vec![v]) };
            (A::Unitary { gate, vars, post: env.pred(rng) }, tot)
        }
        RuleTag::RSC => {
            let mode = if rng.random_bool(0.5) { Mode::Partial } else { tot };
            let second = env.holding(env.program(&all, 1, rng), env.pred(rng), mode, rng);
            let first = env.holding(env.program(&all, 1, rng), second.pre.clone(), mode, rng);
            (A::Seq { first, second }, mode)
        }
        RuleTag::RIF => {
            let v = all[rng.random_range(0..all.len())].clone();
            let d = env.dim_of(std::slice::from_ref(&v));
            let post = env.pred(rng);
            let branches = (0..d).map(|i| (i.to_string(), env.holding(env.program(&all, 1, rng), post.clone(), tot, rng))).collect();
            (A::Case { meas: format!("M{d}"), vars: vec![v], branches }, tot)
        }
        RuleTag::RLP => loop_instance(env, rng),
        RuleTag::ROr => {
            let premise = env.holding(env.program(&all, 1, rng), env.pred(rng), tot, rng);
            let pre = premise.pre.scale_re(rng.random_range(0.0..=1.0));
            let id = ComplexMatrix::identity(env.dim());
            let post = &premise.post + &(&id - &premise.post).scale_re(rng.random_range(0.0..=1.0));
            (A::Or { premise, pre, post }, tot)
        }
        RuleTag::AxInv => {
            let (v, rest) = env.split(rng);
            let d = env.dim_of(&v);
            (A::Invariance { prog: env.program(&rest, 1, rng), vars: v, pred: random::predicate(d, rng) }, Mode::Partial)
        }
        RuleTag::RTI => {
            let (w, rest) = env.split(rng);
            let post = env.pred_on(&rest, rng);
            let premise = env.holding(env.program(&rest, 1, rng), post, tot, rng);
            (A::TraceIntro { premise, traced: w }, tot)
        }
        RuleTag::RCC => {
            let prog = env.program(&all, 1, rng);
            let k = rng.random_range(1..=3);
            let raw: Vec<f64> = (0..=k).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let premises = (0..k).map(|i| (raw[i] / s, env.holding(prog.clone(), env.pred(rng), tot, rng))).collect();
            (A::Convex { premises }, tot)
        }
        RuleTag::RInv => {
            let mode = if rng.random_bool(0.5) { Mode::Partial } else { tot };
            let (v, rest) = env.split(rng);
            let premise = env.holding(env.program(&rest, 1, rng), env.pred(rng), mode, rng);
            let p = rng.random_range(0.0..=1.0);
            let q = rng.random_range(0.0..=1.0 - p);
            let pred = random::predicate(env.dim_of(&v), rng);
            (A::Mix { premise, p, q, vars: v, pred }, mode)
        }
        RuleTag::RSO => {
            let mode = if rng.random_bool(0.5) { Mode::Partial } else { tot };
            let (v, rest) = env.split(rng);
            let premise = env.holding(env.program(&rest, 1, rng), env.pred(rng), mode, rng);
            let channel = random::channel(env.dim_of(&v), rng.random_range(1..=3), rng);
            (A::SuperOp { premise, vars: v, channel, picture: Picture::Dual }, mode)
        }
        RuleTag::RLT => panic!("ranking instances are generated separately"),
    }
}

/// `while M2[p] = 1 do S`: the body premise is `{wp(S, X)} S {M0†AM0 + M1†wp(S, X)M1}`
/// for an approximate fixed point `X`, found by iterating downward from `I`.
fn loop_instance<R: Rng>(env: &Env, rng: &mut R) -> (RuleApplication, Mode) {
    let all = env.names();
    let m = &env.model;
    let g = m.guard("M2", &["p".to_string()], "1").unwrap();
    let d = env.dim();
    for _ in 0..50 {
        let body = Program::seq(Program::Unitary { gate: "Up".into(), vars: vec!["p".into()] }, env.program(&all, 1, rng));
        let exit = env.pred(rng);
        let base = Model::dual_by(&g.m0, &exit);
        let step = |x: &ComplexMatrix| wp(m, &body, x, Mode::Total).unwrap().matrix;
        let mut x = ComplexMatrix::identity(d);
        let mut converged = false;
        for _ in 0..5000 {
            let next = &base + &Model::dual_by(&g.m1, &step(&x));
            let gap = next.max_abs_diff(&x);
            x = next;
            if gap < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            continue;
        }
        let b = step(&x);
        let post = &base + &Model::dual_by(&g.m1, &b);
        let premise = Formula::new(b, body, post, Mode::Partial);
        return (RuleApplication::Loop { meas: "M2".into(), vars: vec!["p".into()], cont: "1".into(), exit, body: premise }, Mode::Partial);
    }
    panic!("no loop instance with a convergent fixed-point iteration");
}

pub struct SoundnessOutcome {
    pub side_conditions_hold: bool,
    pub premises_hold: bool,
    pub conclusion_holds: bool,
    pub conclusion_min_eig: f64,
}

/// Checks premises and conclusion of one instance with `check_triple` at `tol`.
pub fn soundness_check(env: &Env, app: &RuleApplication, mode: Mode, tol: f64) -> SoundnessOutcome {
    let m = &env.model;
    let side_conditions_hold = side_conditions(m, app, mode).unwrap().iter().all(|c| c.holds);
    let premises_hold = app.premises().iter().all(|p| check_triple(m, p, tol).unwrap().holds);
    let concl = rule_conclusion(m, app, mode).unwrap();
    let v = check_triple(m, &concl, tol).unwrap();
    SoundnessOutcome { side_conditions_hold, premises_hold, conclusion_holds: v.holds, conclusion_min_eig: v.min_eig }
}
