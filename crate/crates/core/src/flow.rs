//! Control flow as a superoperator-valued transition system: construction, path
//! enumeration, bounded invariant checking and termination reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lang::{leftmost_leaf, locations, next_location, path_to_string, Path, PathStep, Program};
use crate::operator::{ComplexMatrix, OperatorError};
use crate::random;
use crate::semantics::{Configuration, Model};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("outgoing transitions of location {location} are not trace-preserving (residual {residual:.3e})")]
    NotTracePreserving { location: String, residual: f64 },
    #[error("no location {0}")]
    UnknownLocation(String),
}

type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Clone)]
pub struct Location {
    /// Path of the statement about to run; `None` for the exit.
    pub path: Option<Path>,
    pub name: String,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub kraus: Vec<ComplexMatrix>,
    pub label: String,
}

/// Locations are the entry points of non-sequence statements plus one exit.
#[derive(Debug, Clone)]
pub struct Svts {
    pub locations: Vec<Location>,
    pub initial: usize,
    pub theta: ComplexMatrix,
    pub transitions: Vec<Transition>,
    /// Per location: `max |Σ K†K − I|` over its outgoing transitions (0 for the exit).
    pub residuals: Vec<f64>,
}

fn with(path: &[PathStep], step: PathStep) -> Path {
    let mut p = path.to_vec();
    p.push(step);
    p
}

pub fn build_svts(model: &Model, p: &Program, theta: &ComplexMatrix) -> Result<Svts> {
    let locs = locations(p);
    let exit = locs.len();
    let index = |l: Option<Path>| match l {
        Some(path) => locs.iter().position(|x| *x == path).expect("successor locations are locations"),
        None => exit,
    };
    let mut transitions = Vec::new();
    for (from, path) in locs.iter().enumerate() {
        let node = p.at_path(path).expect("location exists");
        match node {
            Program::Case { meas, vars, branches } => {
                let ops = model.measurement(meas, vars)?;
                let m = model.decls().measurement(meas).expect("checked by measurement()");
                for (i, (label, _)) in branches.iter().enumerate() {
                    let k = m.index_of(label).expect("branch labels are checked at parse time");
                    transitions.push(Transition {
                        from,
                        to: index(Some(leftmost_leaf(p, &with(path, PathStep::Branch(i))))),
                        kraus: vec![ops[k].clone()],
                        label: format!("{meas}={label}"),
                    });
                }
            }
            Program::While { meas, vars, cont, .. } => {
                let g = model.guard(meas, vars, cont)?;
                transitions.push(Transition { from, to: index(next_location(p, path)), kraus: vec![g.m0], label: format!("{meas}≠{cont}") });
                transitions.push(Transition {
                    from,
                    to: index(Some(leftmost_leaf(p, &with(path, PathStep::Body)))),
                    kraus: vec![g.m1],
                    label: format!("{meas}={cont}"),
                });
            }
            _ => transitions.push(Transition {
                from,
                to: index(next_location(p, path)),
                kraus: model.atomic_kraus(node)?,
                label: node.to_string(),
            }),
        }
    }
    let d = model.dim();
    let id = ComplexMatrix::identity(d);
    let mut residuals = vec![0.0; exit + 1];
    for (l, r) in residuals.iter_mut().enumerate().take(exit) {
        let mut sum = ComplexMatrix::zeros(d, d);
        for t in transitions.iter().filter(|t| t.from == l) {
            for k in &t.kraus {
                sum = &sum + &(&k.dagger() * k);
            }
        }
        *r = sum.max_abs_diff(&id);
        if *r > model.tol().eq.max(1e-9) {
            return Err(FlowError::NotTracePreserving { location: path_to_string(&locs[l]), residual: *r });
        }
    }
    let mut locations: Vec<Location> = locs.iter().map(|l| Location { path: Some(l.clone()), name: path_to_string(l) }).collect();
    locations.push(Location { path: None, name: "exit".into() });
    Ok(Svts { initial: index(Some(leftmost_leaf(p, &[]))), locations, theta: theta.clone(), transitions, residuals })
}

/// A sequence of transition indices starting at the initial location.
pub type SvtsPath = Vec<usize>;

impl Svts {
    pub fn exit(&self) -> usize {
        self.locations.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.theta.rows()
    }

    pub fn location(&self, path: &[PathStep]) -> Result<usize> {
        self.locations
            .iter()
            .position(|l| l.path.as_deref() == Some(path))
            .ok_or_else(|| FlowError::UnknownLocation(path_to_string(path)))
    }

    /// Looks a location up by its printed name (`exit`, `root`, `1.2`, ...).
    pub fn location_named(&self, name: &str) -> Result<usize> {
        self.locations.iter().position(|l| l.name == name).ok_or_else(|| FlowError::UnknownLocation(name.into()))
    }

    /// One line per transition: `l -> l' : kraus_count=k, trace_preserving_residual=r`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for t in &self.transitions {
            s.push_str(&format!(
                "{} -> {} : kraus_count={}, trace_preserving_residual={:.3e}\n",
                self.locations[t.from].name,
                self.locations[t.to].name,
                t.kraus.len(),
                self.residuals[t.from]
            ));
        }
        s
    }

    /// `ℰ_π(ρ)`.
    pub fn apply_path(&self, path: &[usize], rho: &ComplexMatrix) -> ComplexMatrix {
        path.iter().fold(rho.clone(), |acc, &t| {
            let mut out = ComplexMatrix::zeros(acc.rows(), acc.cols());
            for k in &self.transitions[t].kraus {
                out = &out + &Model::conj_by(k, &acc);
            }
            out
        })
    }

    /// `ℰ_π*(X)`.
    pub fn dual_path(&self, path: &[usize], x: &ComplexMatrix) -> ComplexMatrix {
        path.iter().rev().fold(x.clone(), |acc, &t| {
            let mut out = ComplexMatrix::zeros(acc.rows(), acc.cols());
            for k in &self.transitions[t].kraus {
                out = &out + &Model::dual_by(k, &acc);
            }
            out
        })
    }

    fn enumerate(&self, target: usize, max_len: usize, stop_at_target: bool) -> (Vec<SvtsPath>, bool) {
        let mut out = Vec::new();
        let mut truncated = false;
        let mut stack: Vec<(usize, SvtsPath)> = vec![(self.initial, Vec::new())];
        while let Some((at, path)) = stack.pop() {
            if at == target {
                out.push(path.clone());
                if stop_at_target {
                    continue;
                }
            }
            let outgoing: Vec<usize> = (0..self.transitions.len()).filter(|&t| self.transitions[t].from == at).collect();
            if path.len() == max_len {
                truncated |= !outgoing.is_empty();
                continue;
            }
            for t in outgoing.into_iter().rev() {
                let mut next = path.clone();
                next.push(t);
                stack.push((self.transitions[t].to, next));
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        (out, truncated)
    }

    /// All paths from the initial location to `target` with at most `max_len` transitions.
    pub fn paths_to(&self, target: usize, max_len: usize) -> (Vec<SvtsPath>, bool) {
        self.enumerate(target, max_len, false)
    }

    /// The first-reach set: paths ending at `target` none of whose proper prefixes reach it.
    pub fn prime_paths(&self, target: usize, max_len: usize) -> PrimePathSet {
        let (paths, truncated) = self.enumerate(target, max_len, true);
        PrimePathSet { target, max_len, paths, truncated }
    }

    /// `tr ℰ_Π(ρ)` for the first-reach set of the exit.
    pub fn exit_mass(&self, rho: &ComplexMatrix, max_len: usize) -> f64 {
        self.prime_paths(self.exit(), max_len).apply(self, rho).trace().re
    }
}

#[derive(Debug, Clone)]
pub struct PrimePathSet {
    pub target: usize,
    pub max_len: usize,
    pub paths: Vec<SvtsPath>,
    /// Some path was cut at `max_len` before reaching the target.
    pub truncated: bool,
}

impl PrimePathSet {
    /// `ℰ_Π(ρ) = Σ_π ℰ_π(ρ)`.
    pub fn apply(&self, s: &Svts, rho: &ComplexMatrix) -> ComplexMatrix {
        sum_over(&self.paths, rho.rows(), |p| s.apply_path(p, rho))
    }

    pub fn dual(&self, s: &Svts, x: &ComplexMatrix) -> ComplexMatrix {
        sum_over(&self.paths, x.rows(), |p| s.dual_path(p, x))
    }
}

fn sum_over(paths: &[SvtsPath], d: usize, f: impl Fn(&SvtsPath) -> ComplexMatrix) -> ComplexMatrix {
    paths.iter().fold(ComplexMatrix::zeros(d, d), |acc, p| &acc + &f(p))
}

/// Whether no path in the set is a proper prefix of another.
pub fn is_prime(paths: &[SvtsPath]) -> bool {
    paths.iter().all(|a| paths.iter().all(|b| a.len() >= b.len() || !b.starts_with(a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantVerdict {
    /// All paths to the location were enumerated and checked.
    Holds,
    /// No violation among the sets checked; longer paths exist beyond the cutoff.
    HoldsUpToCutoff,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantViolation {
    pub kind: String,
    pub paths: Vec<SvtsPath>,
    pub min_eig: f64,
    /// Eigenvector attaining `min_eig`, as `(re, im)` pairs.
    pub state: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub verdict: InvariantVerdict,
    pub cutoff: usize,
    pub sets_checked: usize,
    /// Smallest eigenvalue of `I − ℰ_Π*(I − O) − Θ` over all sets.
    pub worst_min_eig: f64,
    /// Smallest sampled value of `1 − tr ℰ_Π(ρ) + tr(Oℰ_Π(ρ)) − tr(Θρ)`.
    pub worst_sampled_margin: f64,
    pub seed: u64,
    pub violation: Option<InvariantViolation>,
}

#[derive(Debug, Clone, Copy)]
pub struct InvariantBudget {
    pub max_len: usize,
    pub subset_budget: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub tol: f64,
}

/// Bounded check of `tr(Θρ) ≤ 1 − tr ℰ_Π(ρ) + tr(Oℰ_Π(ρ))` at location `l` over
/// first-reach sets at every cutoff, all singletons and random prime subsets.
pub fn check_invariant(s: &Svts, l: usize, o: &ComplexMatrix, b: &InvariantBudget) -> Result<InvariantReport> {
    if l >= s.locations.len() {
        return Err(FlowError::UnknownLocation(l.to_string()));
    }
    let d = s.dim();
    let id = ComplexMatrix::identity(d);
    let comp = &id - o;
    let (all, truncated) = s.paths_to(l, b.max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let mut samples: Vec<ComplexMatrix> = (0..b.sample_count).map(|_| random::density(d, &mut rng)).collect();
    samples.extend(s.theta.eigh().vectors.iter().map(ComplexMatrix::projector));

    let mut sets: Vec<(String, Vec<SvtsPath>)> = Vec::new();
    let first_reach = s.prime_paths(l, b.max_len).paths;
    let mut lengths: Vec<usize> = first_reach.iter().map(|p| p.len()).collect();
    lengths.dedup();
    for c in lengths {
        sets.push((format!("first-reach@{c}"), first_reach.iter().filter(|p| p.len() <= c).cloned().collect()));
    }
    for p in &all {
        sets.push(("singleton".into(), vec![p.clone()]));
    }
    for _ in 0..b.subset_budget {
        let mut pick: Vec<SvtsPath> = all.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        let snapshot = pick.clone();
        pick.retain(|a| !snapshot.iter().any(|p| p.len() < a.len() && a.starts_with(p)));
        if !pick.is_empty() {
            sets.push(("random".into(), pick));
        }
    }

    let mut report = InvariantReport {
        verdict: InvariantVerdict::Holds,
        cutoff: b.max_len,
        sets_checked: sets.len(),
        worst_min_eig: f64::INFINITY,
        worst_sampled_margin: f64::INFINITY,
        seed: b.seed,
        violation: None,
    };
    for (kind, paths) in sets {
        debug_assert!(is_prime(&paths));
        let dual: ComplexMatrix = sum_over(&paths, d, |p| s.dual_path(p, &comp));
        let margin = &(&id - &dual) - &s.theta;
        let e = margin.hermitian_part().eigh();
        for rho in &samples {
            let v = (margin.inner() * rho.inner()).trace().re;
            report.worst_sampled_margin = report.worst_sampled_margin.min(v);
        }
        if e.values[0] < report.worst_min_eig {
            report.worst_min_eig = e.values[0];
            if e.values[0] < -b.tol && report.violation.is_none() {
                report.violation = Some(InvariantViolation {
                    kind,
                    paths,
                    min_eig: e.values[0],
                    state: e.vectors[0].iter().map(|z| (z.re, z.im)).collect(),
                });
            }
        }
    }
    let cyclic = all.iter().any(|a| all.iter().any(|p| p.len() < a.len() && a.starts_with(p)));
    report.verdict = if report.violation.is_some() {
        InvariantVerdict::Violated
    } else if truncated || cyclic {
        InvariantVerdict::HoldsUpToCutoff
    } else {
        InvariantVerdict::Holds
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationVerdict {
    /// Limit probability is at least `tr ρ − tol`.
    ConvergedHigh,
    /// The sequence converged to a value below `tr ρ − tol`.
    ConvergedLow,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct TerminationReport {
    pub verdict: TerminationVerdict,
    /// `t_k`: probability of terminating with every loop unrolled at most `k` times.
    pub probs: Vec<f64>,
    /// Best estimate of the limit.
    pub limit: f64,
    /// Bound on `limit − t_k` when known.
    pub tail_bound: Option<f64>,
    /// Which detector decided the verdict.
    pub detector: String,
}

const WINDOW: usize = 8;

/// Mass of configurations that revisit an earlier configuration exactly; such mass loops forever.
fn trapped_mass(model: &Model, p: &Program, rho: &ComplexMatrix, max_steps: usize) -> Result<Option<(f64, f64)>> {
    let mut ens = vec![Configuration::new(p.clone(), rho.clone())];
    let mut seen: Vec<Configuration> = Vec::new();
    let (mut terminated, mut trapped) = (0.0, 0.0);
    for _ in 0..max_steps {
        let Some(i) = ens.iter().position(|c| !c.is_terminated()) else {
            return Ok(Some((terminated, trapped)));
        };
        let c = ens.remove(i);
        if seen.iter().any(|s| s.remainder == c.remainder && s.state.approx_eq(&c.state, 1e-13)) {
            trapped += c.trace();
            continue;
        }
        if matches!(c.remainder, Some(Program::While { .. })) {
            seen.push(c.clone());
        }
        for n in model.step(&c)? {
            if n.is_terminated() {
                terminated += n.trace();
            } else if n.trace() > model.tol().kraus_drop {
                ens.push(n);
            }
        }
    }
    Ok(None)
}

/// Iterates `t_k` until one of three detectors fires: remaining mass below `tol`, a geometric
/// tail bound below `tol`, or all remaining mass caught in exact cycles.
pub fn terminate_report(model: &Model, p: &Program, rho: &ComplexMatrix, budget: usize, tol: f64) -> Result<TerminationReport> {
    let total = rho.trace().re;
    let mut probs: Vec<f64> = Vec::new();
    let mut tried_cycles = false;
    let done = |verdict, probs, limit, tail_bound, detector: &str| TerminationReport {
        verdict,
        probs,
        limit,
        tail_bound,
        detector: detector.into(),
    };
    for k in 0..=budget {
        let t = model.apply_bounded(p, rho, k)?.trace().re;
        probs.push(t);
        if total - t <= tol {
            return Ok(done(TerminationVerdict::ConvergedHigh, probs, t, Some(total - t), "remaining-mass"));
        }
        if k >= 2 * WINDOW {
            let n = probs.len();
            let last = probs[n - 1] - probs[n - 1 - WINDOW];
            let prev = probs[n - 1 - WINDOW] - probs[n - 1 - 2 * WINDOW];
            if prev > 0.0 && last < prev {
                let r = last / prev;
                let bound = last * r / (1.0 - r);
                if bound < tol {
                    let verdict = if total - t - bound <= tol { TerminationVerdict::ConvergedHigh } else { TerminationVerdict::ConvergedLow };
                    return Ok(done(verdict, probs, t, Some(bound), "geometric-tail"));
                }
            }
            if last <= 1e-15 && !tried_cycles {
                tried_cycles = true;
                if let Some((term, trapped)) = trapped_mass(model, p, rho, 100_000)? {
                    if (term + trapped - total).abs() <= tol {
                        let verdict = if total - term <= tol { TerminationVerdict::ConvergedHigh } else { TerminationVerdict::ConvergedLow };
                        return Ok(done(verdict, probs, term, Some(0.0), "exact-cycle"));
                    }
                }
            }
        }
    }
    let last = *probs.last().unwrap_or(&0.0);
    Ok(done(TerminationVerdict::Inconclusive, probs, last, None, "budget"))
}
