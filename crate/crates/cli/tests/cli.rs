use std::path::PathBuf;
use std::process::{Command, Output};

use ksync::degree::{DegreeVerdict, SyncVerdict};

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/data");
    p.push(name);
    p.display().to_string()
}

fn ksync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn prime_of_mu2() {
    let o = ksync(&["prime", "--word", "!?m1(p->q) !?m2(r->q)"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "not prime\n");
    let o = ksync(&["prime", "--word", "!?m1(p->q) !?m2(q->p)"]);
    assert_eq!(stdout(&o), "prime\n");
}

#[test]
fn example_one() {
    let s1 = data("s1.sys");
    let o = ksync(&["asr", &s1, "--in", "0,0,0", "--mid", "2,0,1", "--fin", "2,1,2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "!?a(p->r) !?b(r->q) !c(p->q)\n!?a(p->r) !c(p->q) !?b(r->q)\n!?b(r->q) !?a(p->r) !c(p->q)\n"
    );
    let o = ksync(&["asr", &s1, "--in", "0,0,0", "--mid", "9,0,1", "--fin", "2,1,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_errors() {
    assert_eq!(ksync(&["parse", "missing.sys"]).status.code(), Some(2));
    let o = ksync(&["parse", &data("bad.sys")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(ksync(&["prime", "--word", "!?m1(p-q)"]).status.code(), Some(2));
    assert_eq!(ksync(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ksync(&["--state-guard", "0", "degree", &data("s1.sys")]).status.code(), Some(2));
}

#[test]
fn guard_exit_code() {
    let o = ksync(&["--state-guard", "2", "degree", &data("ring.sys")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn degree_json_round_trips() {
    for (file, k) in [("s1.sys", 1), ("swap.sys", 2), ("ring.sys", 3), ("client.sys", 2)] {
        let o = ksync(&["--format", "json", "degree", &data(file)]);
        assert_eq!(o.status.code(), Some(0), "{file}");
        let v: DegreeVerdict = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v.k(), Some(k), "{file}");
        assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", stdout(&o));
    }
    let o = ksync(&["--format", "json", "degree", &data("flood.sys")]);
    assert_eq!(o.status.code(), Some(1));
    let v: DegreeVerdict = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(matches!(v, DegreeVerdict::Unbounded { .. }));
}

#[test]
fn synchronizable_verdicts() {
    let o = ksync(&["--format", "json", "synchronizable", &data("flood.sys")]);
    assert_eq!(o.status.code(), Some(1));
    let v: SyncVerdict = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(matches!(v, SyncVerdict::NotSynchronizable { .. }));
    let o = ksync(&["synchronizable", &data("s1.sys")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "synchronizable with degree 1 (verified up to bounds)\n");
    let o = ksync(&["synchronizable", &data("ring.sys"), "--max-actions", "40"]);
    let o2 = ksync(&["--format", "json", "synchronizable", &data("ring.sys"), "--max-actions", "40"]);
    assert!(o.status.code() == Some(3) || o.status.code() == Some(0));
    assert_eq!(o.status.code(), o2.status.code());
}

#[test]
fn outputs_are_deterministic() {
    let s1 = data("s1.sys");
    let runs: Vec<Vec<&str>> = vec![
        vec!["reach", &s1, "--dot"],
        vec!["--format", "json", "explore", &s1, "--max-actions", "5"],
        vec!["--format", "dot", "causal", "--msc-word", "!a(p->q) !?b(p->q)"],
        vec!["--format", "dot", "asr", &s1, "--in", "0,0,0", "--mid", "2,0,1", "--fin", "2,1,2"],
    ];
    for args in runs {
        let a = stdout(&ksync(&args));
        assert!(!a.is_empty());
        assert_eq!(a, stdout(&ksync(&args)), "{args:?}");
    }
}

#[test]
fn simulate_and_causal() {
    let s1 = data("s1.sys");
    let o = ksync(&["simulate", &s1, "--actions", "!a(p->r) !b(r->q) ?a(p->r) ?b(r->q)"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("final (1,1,2)"));
    let o = ksync(&["simulate", &s1, "--actions", "?a(p->r)"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ksync(&["causal", "--msc-word", "!a(p->q) !?b(p->q)"]);
    assert_eq!(stdout(&o), "not causal\nC_S(q)={p} C_R(q)={q}\n");
}
