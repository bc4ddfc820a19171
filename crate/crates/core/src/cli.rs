//! Command-line driver. Exit codes: 0 when every verdict holds, 1 on a verification
//! failure, 2 on usage, input or evaluation errors.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::flow::{build_svts, check_invariant, terminate_report, InvariantBudget, InvariantVerdict, TerminationVerdict};
use crate::hoare::{check_triple, ranking_check, wp, Formula, Mode, RankingFn, RankingGoal};
use crate::lang::{parse_operator, parse_predicate, parse_state, parse_with, path_to_string, subprograms, ParsedFile, Program};
use crate::operator::{ComplexMatrix, Space, Tolerances};
use crate::outline::{check_outline, strong_soundness_trace, ProofOutline};
use crate::relations::{bullet_comp, circle_comp, computational_basis, diamond_comp};
use crate::report::{matrix_pairs, RunReport, Verdict};
use crate::semantics::Model;
use crate::lang::Declarations;

#[derive(Debug, Parser)]
#[command(name = "qwhile", version, about = "Verifier for quantum while-programs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Eigenvalue tolerance of Löwner-order decisions.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Convergence threshold of loop precondition iterations.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub fix_tol: f64,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Step budget for executions and termination analysis.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub max_steps: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, conflicts_with = "text")]
    pub json: bool,
    #[arg(long, global = true)]
    pub text: bool,
    #[arg(long, global = true, default_value = "par")]
    pub mode: Mode,
    /// Include wall time in the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Composition {
    Circle,
    Bullet,
    Diamond,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a program on a state, operationally and denotationally.
    Run {
        program: PathBuf,
        /// Initial state; defaults to the all-zero basis state.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Weakest precondition of a postcondition.
    Wp {
        program: PathBuf,
        #[arg(long)]
        post: PathBuf,
    },
    /// Decide a correctness formula.
    Check {
        program: PathBuf,
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
    },
    /// Generate and discharge the verification conditions of an annotated program.
    Outline {
        program: PathBuf,
        /// Also run the strong soundness harness from this state.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Print the transition system of a program.
    Svts {
        program: PathBuf,
    },
    /// Bounded invariant check at one location of the transition system.
    Invcheck {
        program: PathBuf,
        /// Location name as printed by `svts`.
        #[arg(long)]
        location: String,
        #[arg(long)]
        pred: PathBuf,
        /// Initial predicate; defaults to the identity.
        #[arg(long)]
        theta: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        cutoff: usize,
        #[arg(long, default_value_t = 64)]
        subsets: usize,
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Check the ranking-function conditions of a loop on given states.
    Rank {
        program: PathBuf,
        /// Loop location as printed by `svts`; defaults to the first loop.
        #[arg(long = "loop")]
        loop_at: Option<String>,
        /// Observable `N` of `t(ρ) = ⌈tr(Nρ)/step⌉`.
        #[arg(long)]
        observable: PathBuf,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long = "state", required = true)]
        states: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        depth: usize,
    },
    /// Termination probability analysis.
    Terminate {
        program: PathBuf,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Compose two relations.
    Relcompose {
        #[arg(long, value_enum)]
        op: Composition,
        /// Predicate on `x ⊗ y`.
        #[arg(long)]
        a: PathBuf,
        /// Predicate on `y ⊗ z`.
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        d3: usize,
        /// Use the antisymmetrizer for the diamond composition.
        #[arg(long)]
        minus: bool,
    },
}

/// Outcome of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Ctx {
    tol: Tolerances,
    loewner: f64,
    mode: Mode,
    max_steps: usize,
    seed: u64,
}

fn read(p: &FsPath) -> Result<String, String> {
    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn load_program(p: &FsPath, tol: &Tolerances) -> Result<(ParsedFile, Model), String> {
    let f = parse_with(&read(p)?, tol).map_err(|e| format!("{}: {e}", p.display()))?;
    let m = Model::new(&f.decls, tol);
    Ok((f, m))
}

fn load_pred(p: &FsPath, decls: &Declarations, space: &Space, tol: &Tolerances) -> Result<ComplexMatrix, String> {
    parse_predicate(&read(p)?, decls, space, tol).map(|q| q.into_matrix()).map_err(|e| format!("{}: {e}", p.display()))
}

fn load_state(p: Option<&PathBuf>, model: &Model, tol: &Tolerances) -> Result<ComplexMatrix, String> {
    match p {
        Some(p) => parse_state(&read(p)?, model.decls(), model.space(), tol)
            .map(|s| s.into_matrix())
            .map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(ComplexMatrix::unit(model.dim(), 0, 0)),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn cmd_run(ctx: &Ctx, r: &mut RunReport, program: &FsPath, state: Option<&PathBuf>) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let rho = load_state(state, &m, &ctx.tol)?;
    let run = m.run_ensemble(&f.program, &rho, ctx.max_steps).map_err(err)?;
    let (rep, stats) = m.denote_natural(&f.program).map_err(err)?;
    let out = rep.apply(&rho);
    let diff = out.max_abs_diff(&run.terminated);
    let allowance = run.residual_trace + run.dropped_trace + stats.residual + 1e-10;
    r.push(Verdict::new("terminated within step budget", !run.exhausted, "residual_trace", run.residual_trace));
    r.push(Verdict::new("operational and denotational agree", diff <= allowance, "max_abs_diff", diff));
    r.lines.push(format!("steps: {}, terminated trace: {:.12}, denotation trace: {:.12}", run.steps, run.terminated_trace, out.trace().re));
    r.details = json!({
        "steps": run.steps,
        "terminated_trace": run.terminated_trace,
        "residual_trace": run.residual_trace,
        "dropped_trace": run.dropped_trace,
        "denotation_trace": out.trace().re,
        "loop_residual": stats.residual,
        "allowance": allowance,
        "final_state": matrix_pairs(&run.terminated),
        "denotation_state": matrix_pairs(&out),
    });
    Ok(())
}

fn cmd_wp(ctx: &Ctx, r: &mut RunReport, program: &FsPath, post: &FsPath) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let b = load_pred(post, &f.decls, m.space(), &ctx.tol)?;
    let w = wp(&m, &f.program, &b, ctx.mode).map_err(err)?;
    let (lo, hi) = (w.matrix.min_eigenvalue(), w.matrix.max_eigenvalue());
    let margin = lo.min(1.0 - hi);
    r.push(Verdict::new("result is a predicate", margin >= -ctx.loewner, "min(λmin, 1 − λmax)", margin));
    r.push(Verdict::new("fixed-point iteration converged", w.stats.converged, "gap", w.stats.gap));
    r.lines.push(format!("mode: {}, eigenvalue range: [{lo:.12}, {hi:.12}]", ctx.mode));
    r.details = json!({ "mode": ctx.mode, "wp": matrix_pairs(&w.matrix), "stats": w.stats, "min_eig": lo, "max_eig": hi });
    Ok(())
}

fn cmd_check(ctx: &Ctx, r: &mut RunReport, program: &FsPath, pre: &FsPath, post: &FsPath) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let a = load_pred(pre, &f.decls, m.space(), &ctx.tol)?;
    let b = load_pred(post, &f.decls, m.space(), &ctx.tol)?;
    let v = check_triple(&m, &Formula::new(a, f.program.clone(), b, ctx.mode), ctx.loewner).map_err(err)?;
    r.push(Verdict::new(format!("{{pre}} P {{post}} ({})", ctx.mode), v.holds, "min_eig", v.min_eig).with_witness(v.witness.as_ref().map(|w| &w.vector)));
    if let Some(w) = &v.witness {
        r.lines.push(format!("at the witness: tr(Aρ) = {:.12}, right-hand side = {:.12}", w.lhs, w.rhs));
    }
    r.details = json!({
        "mode": ctx.mode,
        "fix": v.wp.stats,
        "witness_lhs": v.witness.as_ref().map(|w| w.lhs),
        "witness_rhs": v.witness.as_ref().map(|w| w.rhs),
    });
    Ok(())
}

fn cmd_outline(ctx: &Ctx, r: &mut RunReport, program: &FsPath, state: Option<&PathBuf>) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let o = ProofOutline::from_parsed(&f, &m, ctx.mode).map_err(|e| format!("{}: {e}", program.display()))?;
    let (s, vcs, report) = check_outline(&m, &o, ctx.loewner).map_err(err)?;
    for (vc, v) in vcs.iter().zip(&report.verdicts) {
        let verdict = match (v.min_eig, &v.ranking) {
            (Some(e), _) => Verdict::new(v.provenance.clone(), v.holds, "min_eig", e).with_witness(v.witness.as_ref()),
            (None, Some(rk)) => Verdict::new(v.provenance.clone(), v.holds, "states_checked", rk.states_checked as f64),
            (None, None) => Verdict::new(v.provenance.clone(), v.holds, "none", 0.0),
        };
        r.lines.push(format!("{}: {}", v.provenance, describe(&vc.obligation)));
        r.push(verdict);
    }
    let mut details = json!({ "mode": ctx.mode, "vc_count": vcs.len(), "standard": o.is_standard(), "verdicts": report.verdicts });
    if state.is_some() {
        let rho = load_state(state, &m, &ctx.tol)?;
        let sr = strong_soundness_trace(&m, &s, &rho, ctx.max_steps, ctx.loewner).map_err(err)?;
        let worst = sr.steps.iter().map(|st| st.rhs - st.lhs).fold(f64::INFINITY, f64::min);
        r.push(Verdict::new("strong soundness along the execution", sr.holds, "min(rhs − lhs)", worst));
        details["soundness"] = serde_json::to_value(&sr).map_err(err)?;
    }
    r.details = details;
    Ok(())
}

fn describe(o: &crate::outline::Obligation) -> String {
    match o {
        crate::outline::Obligation::Order { .. } => "Löwner inequality".into(),
        crate::outline::Obligation::Ranking { path, .. } => format!("ranking conditions of the loop at {}", path_to_string(path)),
    }
}

fn cmd_svts(ctx: &Ctx, r: &mut RunReport, program: &FsPath) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let s = build_svts(&m, &f.program, &ComplexMatrix::identity(m.dim())).map_err(err)?;
    let worst = s.residuals.iter().cloned().fold(0.0, f64::max);
    r.lines.extend(s.dump().lines().map(String::from));
    r.push(Verdict::new("transitions are trace preserving", true, "max_residual", worst));
    r.details = json!({
        "locations": s.locations.iter().map(|l| l.name.clone()).collect::<Vec<_>>(),
        "initial": s.locations[s.initial].name,
        "transitions": s.transitions.iter().map(|t| json!({
            "from": s.locations[t.from].name,
            "to": s.locations[t.to].name,
            "label": t.label,
            "kraus_count": t.kraus.len(),
        })).collect::<Vec<_>>(),
        "residuals": s.residuals,
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_invcheck(
    ctx: &Ctx,
    r: &mut RunReport,
    program: &FsPath,
    location: &str,
    pred: &FsPath,
    theta: Option<&PathBuf>,
    cutoff: usize,
    subsets: usize,
    samples: usize,
) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let o = load_pred(pred, &f.decls, m.space(), &ctx.tol)?;
    let th = match theta {
        Some(p) => load_pred(p, &f.decls, m.space(), &ctx.tol)?,
        None => ComplexMatrix::identity(m.dim()),
    };
    let s = build_svts(&m, &f.program, &th).map_err(err)?;
    let l = s.location_named(location).map_err(err)?;
    let budget = InvariantBudget { max_len: cutoff, subset_budget: subsets, sample_count: samples, seed: ctx.seed, tol: ctx.loewner };
    let rep = check_invariant(&s, l, &o, &budget).map_err(err)?;
    let mut v = Verdict::new(format!("invariant at {location}"), rep.verdict != InvariantVerdict::Violated, "worst_min_eig", rep.worst_min_eig);
    v.witness = rep.violation.as_ref().map(|x| x.state.clone());
    r.push(v);
    r.lines.push(format!("verdict: {:?}, sets checked: {}, cutoff: {}", rep.verdict, rep.sets_checked, rep.cutoff));
    r.details = serde_json::to_value(&rep).map_err(err)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rank(
    ctx: &Ctx,
    r: &mut RunReport,
    program: &FsPath,
    loop_at: Option<&str>,
    observable: &FsPath,
    step: f64,
    target: &FsPath,
    eps: f64,
    states: &[PathBuf],
    depth: usize,
) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let lp = subprograms(&f.program)
        .into_iter()
        .filter(|(_, p)| matches!(p, Program::While { .. }))
        .find(|(path, _)| loop_at.is_none_or(|name| path_to_string(path) == name))
        .map(|(_, p)| p.clone())
        .ok_or_else(|| format!("no loop at {}", loop_at.unwrap_or("any location")))?;
    let (n, _) = parse_operator(&read(observable)?, &f.decls, m.space(), &ctx.tol).map_err(|e| format!("{}: {e}", observable.display()))?;
    let goal = RankingGoal { function: RankingFn::Observable { n, step }, target: load_pred(target, &f.decls, m.space(), &ctx.tol)?, eps };
    let rhos = states.iter().map(|p| load_state(Some(p), &m, &ctx.tol)).collect::<Result<Vec<_>, _>>()?;
    let rep = ranking_check(&m, &lp, &goal, &rhos, depth).map_err(err)?;
    let margin = rep.violation.as_ref().map_or(0.0, |v| v.target_value);
    r.push(Verdict::new("ranking conditions", rep.passed, if rep.passed { "none" } else { "target_value_at_violation" }, margin));
    r.lines.push(format!("states checked: {}", rep.states_checked));
    r.details = serde_json::to_value(&rep).map_err(err)?;
    Ok(())
}

fn cmd_terminate(ctx: &Ctx, r: &mut RunReport, program: &FsPath, state: Option<&PathBuf>) -> Result<(), String> {
    let (f, m) = load_program(program, &ctx.tol)?;
    let rho = load_state(state, &m, &ctx.tol)?;
    let rep = terminate_report(&m, &f.program, &rho, ctx.max_steps, ctx.loewner).map_err(err)?;
    let total = rho.trace().re;
    r.push(Verdict::new("terminates almost surely", rep.verdict == TerminationVerdict::ConvergedHigh, "limit", rep.limit));
    r.lines.push(format!(
        "verdict: {:?} by {}, limit {:.12} of {:.12} after {} unrollings",
        rep.verdict,
        rep.detector,
        rep.limit,
        total,
        rep.probs.len().saturating_sub(1)
    ));
    r.details = serde_json::to_value(&rep).map_err(err)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_relcompose(ctx: &Ctx, r: &mut RunReport, op: Composition, a: &FsPath, b: &FsPath, d1: usize, d2: usize, d3: usize, minus: bool) -> Result<(), String> {
    let da = Declarations::with_vars(&[("x", d1), ("y", d2)]).map_err(err)?;
    let db = Declarations::with_vars(&[("y", d2), ("z", d3)]).map_err(err)?;
    let ma = load_pred(a, &da, &da.space, &ctx.tol)?;
    let mb = load_pred(b, &db, &db.space, &ctx.tol)?;
    let basis = computational_basis(d2);
    let out = match op {
        Composition::Circle => circle_comp(&ma, &mb, &basis, ctx.tol.eq),
        Composition::Bullet => bullet_comp(&ma, &mb, &basis, ctx.tol.eq),
        Composition::Diamond => diamond_comp(&ma, &mb, d2, !minus),
    }
    .map_err(err)?;
    let (lo, hi) = (out.min_eigenvalue(), out.max_eigenvalue());
    let margin = lo.min(1.0 - hi);
    r.push(Verdict::new("composition is a predicate", margin >= -ctx.loewner, "min(λmin, 1 − λmax)", margin));
    r.lines.push(format!("eigenvalue range: [{lo:.12}, {hi:.12}]"));
    r.details = json!({ "op": format!("{op:?}").to_lowercase(), "result": matrix_pairs(&out), "min_eig": lo, "max_eig": hi });
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 { Outcome { code, stdout: text, stderr: String::new() } } else { Outcome { code, stdout: String::new(), stderr: text } };
        }
    };
    let g = &cli.global;
    let tol = Tolerances { psd: g.tol, fix: g.fix_tol, max_iters: g.max_iters, ..Tolerances::default() };
    let ctx = Ctx { tol, loewner: g.tol, mode: g.mode, max_steps: g.max_steps, seed: g.seed };
    let echo = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let mut report = RunReport::new(echo, tol, g.seed);
    let start = Instant::now();
    let result = match &cli.command {
        Command::Run { program, state } => cmd_run(&ctx, &mut report, program, state.as_ref()),
        Command::Wp { program, post } => cmd_wp(&ctx, &mut report, program, post),
        Command::Check { program, pre, post } => cmd_check(&ctx, &mut report, program, pre, post),
        Command::Outline { program, state } => cmd_outline(&ctx, &mut report, program, state.as_ref()),
        Command::Svts { program } => cmd_svts(&ctx, &mut report, program),
        Command::Invcheck { program, location, pred, theta, cutoff, subsets, samples } => {
            cmd_invcheck(&ctx, &mut report, program, location, pred, theta.as_ref(), *cutoff, *subsets, *samples)
        }
        Command::Rank { program, loop_at, observable, step, target, eps, states, depth } => {
            cmd_rank(&ctx, &mut report, program, loop_at.as_deref(), observable, *step, target, *eps, states, *depth)
        }
        Command::Terminate { program, state } => cmd_terminate(&ctx, &mut report, program, state.as_ref()),
        Command::Relcompose { op, a, b, d1, d2, d3, minus } => cmd_relcompose(&ctx, &mut report, *op, a, b, *d1, *d2, *d3, *minus),
    };
    if let Err(msg) = result {
        return Outcome { code: 2, stdout: String::new(), stderr: format!("error: {msg}\n") };
    }
    if g.timing {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    let stdout = if g.text { report.to_text() } else { report.to_json() + "\n" };
    Outcome { code: if report.holds { 0 } else { 1 }, stdout, stderr: String::new() }
}
