mod common;

use std::process::{Command, Output};

use common::corpus_path;
use serde_json::Value;

fn qwhile(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwhile"))
        .current_dir(corpus_path(""))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn valid_triple_exits_zero() {
    let out = qwhile(&["check", "--mode", "tot", "--pre", "phi.pred", "--post", "ghz.pred", "qflip.qw"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["holds"], true);
    assert!(r["verdicts"][0]["margin"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn invalid_triple_exits_one_with_witness() {
    let out = qwhile(&["check", "--mode", "tot", "--pre", "psi_quarter.pred", "--post", "ghz.pred", "qflip.qw"]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["holds"], false);
    assert_eq!(r["verdicts"][0]["witness"].as_array().unwrap().len(), 8);
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.qw");
    std::fs::write(&bad, "var q: 2; prog { apply H(q) }").unwrap();
    let out = qwhile(&["check", "--pre", "phi.pred", "--post", "ghz.pred", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(qwhile(&["check", "--pre", "phi.pred", "qflip.qw"]).status.code(), Some(2));
    assert_eq!(qwhile(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qwhile(&["run", "missing.qw"]).status.code(), Some(2));
    assert_eq!(qwhile(&["check", "--mode", "sometimes", "--pre", "phi.pred", "--post", "ghz.pred", "qflip.qw"]).status.code(), Some(2));
}

#[test]
fn teleportation_outline_discharges_every_vc() {
    let out = qwhile(&["outline", "qtel_outline.qw"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let verdicts = r["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 9);
    assert!(verdicts.iter().all(|v| v["holds"] == true && v["margin"].as_f64().unwrap() >= -1e-8));
    let names: Vec<&str> = verdicts.iter().map(|v| v["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort_by_key(|n| {
        let pos = n.rsplit('@').next().unwrap();
        let (l, c) = pos.split_once(':').unwrap();
        (l.parse::<usize>().unwrap(), c.parse::<usize>().unwrap())
    });
    assert_eq!(names, sorted);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cases: [&[&str]; 4] = [
        &["outline", "qtel_outline.qw", "--state", "qtel_pre.pred"],
        &["invcheck", "reset_loop.qw", "--location", "2", "--pred", "reset_inv.pred", "--seed", "9"],
        &["terminate", "qw2.qw"],
        &["run", "qflip.qw", "--state", "w.state", "--text"],
    ];
    for args in cases {
        let (a, b) = (qwhile(args), qwhile(args));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
    }
}

#[test]
fn wall_time_only_with_timing() {
    let plain = json(&qwhile(&["terminate", "qw2.qw"]));
    assert!(plain.get("wall_time_ms").is_none());
    let timed = json(&qwhile(&["terminate", "qw2.qw", "--timing"]));
    assert!(timed["wall_time_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn every_command_runs_on_the_corpus() {
    let ok: [&[&str]; 7] = [
        &["run", "qw4.qw"],
        &["wp", "--mode", "tot", "--post", "ghz.pred", "qflip.qw"],
        &["svts", "qw4.qw"],
        &["terminate", "qw4.qw", "--state", "qw_start.state"],
        &["rank", "coin_loop.qw", "--observable", "one.pred", "--step", "0.01", "--target", "one.pred", "--eps", "0.01", "--state", "one.state"],
        &["relcompose", "--op", "circle", "--a", "eq2.pred", "--b", "eq2.pred", "--d1", "2", "--d2", "2", "--d3", "2"],
        &["relcompose", "--op", "diamond", "--a", "eq2.pred", "--b", "eq2.pred", "--d1", "2", "--d2", "2", "--d3", "2"],
    ];
    for args in ok {
        let out = qwhile(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    }
    let never = qwhile(&["terminate", "never.qw"]);
    assert_eq!(never.status.code(), Some(1));
    assert_eq!(json(&never)["details"]["verdict"], "converged_low");
    let svts = qwhile(&["svts", "qw2.qw", "--text"]);
    let text = String::from_utf8_lossy(&svts.stdout);
    assert!(text.contains("2 -> exit : kraus_count=1, trace_preserving_residual="));
}
