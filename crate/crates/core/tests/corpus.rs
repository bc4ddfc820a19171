use std::fs;
use std::path::PathBuf;

use qwhile::hoare::{check_triple, Formula, Mode};
use qwhile::lang::{parse, parse_predicate, parse_state};
use qwhile::operator::Tolerances;
use qwhile::outline::{check_outline, ProofOutline};
use qwhile::semantics::Model;

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn every_program_parses() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "qw") {
            parse(&fs::read_to_string(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn qflip_predicates_and_states_load() {
    let f = parse(&corpus("qflip.qw")).unwrap();
    let tol = Tolerances::default();
    let m = Model::new(&f.decls, &tol);
    for name in ["phi.pred", "ghz.pred", "psi_quarter.pred"] {
        parse_predicate(&corpus(name), &f.decls, m.space(), &tol).unwrap();
    }
    for name in ["plus_minus_plus.state", "w.state"] {
        let s = parse_state(&corpus(name), &f.decls, m.space(), &tol).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-12);
    }
    let pre = parse_predicate(&corpus("phi.pred"), &f.decls, m.space(), &tol).unwrap();
    let post = parse_predicate(&corpus("ghz.pred"), &f.decls, m.space(), &tol).unwrap();
    let v = check_triple(&m, &Formula::new(pre.into_matrix(), f.program.clone(), post.into_matrix(), Mode::Total), 1e-9).unwrap();
    assert!(v.holds);
}

#[test]
fn teleportation_outline_discharges() {
    let f = parse(&corpus("qtel_outline.qw")).unwrap();
    let m = Model::new(&f.decls, &Tolerances::default());
    let o = ProofOutline::from_parsed(&f, &m, Mode::Partial).unwrap();
    let (_, vcs, report) = check_outline(&m, &o, 1e-8).unwrap();
    assert!(report.holds, "{:#?}", report.verdicts.iter().filter(|v| !v.holds).collect::<Vec<_>>());
    assert_eq!(vcs.len(), report.verdicts.len());
}

#[test]
fn coin_loop_outline_discharges() {
    let f = parse(&corpus("coin_loop.qw")).unwrap();
    let m = Model::new(&f.decls, &Tolerances::default());
    let o = ProofOutline::from_parsed(&f, &m, Mode::Partial).unwrap();
    let (_, _, report) = check_outline(&m, &o, 1e-8).unwrap();
    assert!(report.holds);
}
