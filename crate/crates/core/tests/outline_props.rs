mod common;

use common::{corpus, corpus_programs, rng};
use qwhile::hoare::{check_triple, wp_total, Mode};
use qwhile::lang::{leftmost_leaf, parse, Anchor, PathStep};
use qwhile::operator::{ComplexMatrix, Tolerances};
use qwhile::outline::{check_outline, standardize, strong_soundness_trace, OutlineAnnotation, ProofOutline};
use qwhile::random;
use qwhile::semantics::Model;

const OUTLINES: [&str; 3] = ["qtel_outline.qw", "coin_loop.qw", "reset_loop.qw"];

fn load(name: &str) -> (Model, ProofOutline) {
    let f = parse(&corpus(name)).unwrap();
    let m = Model::new(&f.decls, &Tolerances::default());
    let o = ProofOutline::from_parsed(&f, &m, Mode::Partial).unwrap();
    (m, o)
}

#[test]
fn discharged_outlines_prove_their_outer_triple() {
    for name in OUTLINES {
        let (m, o) = load(name);
        let (_, _, report) = check_outline(&m, &o, 1e-8).unwrap();
        assert!(report.holds, "{name}");
        assert!(check_triple(&m, &o.outer(), 1e-7).unwrap().holds, "{name}");
    }
}

#[test]
fn standardize_is_idempotent() {
    for name in OUTLINES {
        let (m, o) = load(name);
        let once = standardize(&m, &o).unwrap();
        let twice = standardize(&m, &once).unwrap();
        assert!(once.is_standard(), "{name}");
        assert_eq!(once.annotations, twice.annotations, "{name}");
    }
}

/// Keeps only the precondition, the postcondition and the annotations opening loop bodies.
fn sparse(o: &ProofOutline) -> ProofOutline {
    let first = Anchor::Before(leftmost_leaf(&o.program, &[]));
    let mut s = o.clone();
    let mut seen_pre = false;
    s.annotations.retain(|a| match &a.anchor {
        Anchor::After(p) => p.is_empty(),
        Anchor::Before(p) if *p == leftmost_leaf(&o.program, &[]) && a.anchor == first => !std::mem::replace(&mut seen_pre, true),
        Anchor::Before(p) => p.contains(&PathStep::Body),
    });
    s
}

#[test]
fn deleting_inserted_annotations_keeps_outlines_valid() {
    let mut deleted = 0;
    for name in OUTLINES {
        let (m, o) = load(name);
        let s = standardize(&m, &sparse(&o)).unwrap();
        let inserted: Vec<usize> = s.annotations.iter().enumerate().filter(|(_, a)| !a.user).map(|(i, _)| i).collect();
        assert!(check_outline(&m, &s, 1e-8).unwrap().2.holds, "{name}");
        for i in inserted {
            let mut d = s.clone();
            d.annotations.remove(i);
            let (_, _, report) = check_outline(&m, &d, 1e-8).unwrap();
            assert!(report.holds, "{name}: deleting annotation {i}");
            deleted += 1;
        }
    }
    assert!(deleted >= 5);
}

#[test]
fn mutating_one_annotation_breaks_the_teleportation_outline() {
    let (m, mut o) = load("qtel_outline.qw");
    let i = o.annotations.len() / 2;
    o.annotations[i].matrix = &o.annotations[i].matrix.scale_re(0.5) + &ComplexMatrix::identity(m.dim()).scale_re(0.5);
    let (_, _, report) = check_outline(&m, &o, 1e-8).unwrap();
    assert!(!report.holds);
}

/// Every corpus program, with the weakest total-correctness outline `{wp(P, I)} P {I}`.
#[test]
fn executions_stay_at_remainders_of_their_locations() {
    let mut r = rng(5);
    for (name, src) in corpus_programs() {
        let f = parse(&src).unwrap();
        let m = Model::new(&f.decls, &Tolerances::default());
        let id = ComplexMatrix::identity(m.dim());
        let pre = wp_total(&m, &f.program, &id).unwrap().matrix.hermitian_part().clamp_spectrum(0.0, 1.0);
        let o = ProofOutline {
            program: f.program.clone(),
            annotations: vec![
                OutlineAnnotation { anchor: Anchor::Before(leftmost_leaf(&f.program, &[])), matrix: pre, span: None, user: true },
                OutlineAnnotation { anchor: Anchor::After(Vec::new()), matrix: id, span: None, user: true },
            ],
            mode: Mode::Total,
            rankings: Default::default(),
            spans: f.spans.clone(),
            prog_span: f.prog_span,
        };
        let s = standardize(&m, &o).unwrap();
        let rho = random::density(m.dim(), &mut r);
        let rep = strong_soundness_trace(&m, &s, &rho, 200, 1e-8).unwrap();
        assert!(rep.violation.as_ref().is_none_or(|v| v.clause != 1), "{name}: {:?}", rep.violation);
        assert!(rep.holds, "{name}: {:?}", rep.violation);
    }
}

#[test]
fn teleportation_outline_is_strongly_sound() {
    let (m, o) = load("qtel_outline.qw");
    let s = standardize(&m, &o).unwrap();
    let mut r = rng(17);
    for _ in 0..3 {
        let rho = random::density(m.dim(), &mut r);
        let rep = strong_soundness_trace(&m, &s, &rho, 100, 1e-8).unwrap();
        assert!(rep.holds, "{:?}", rep.violation);
        assert!(!rep.exhausted);
    }
}
