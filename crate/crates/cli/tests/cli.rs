use std::process::{Command, Output};

use serde_json::Value;

macro_rules! corpus {
    ($name:literal) => {
        concat!(env!("CARGO_MANIFEST_DIR"), "/../core/corpus/", $name, ".json")
    };
}

fn crochet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crochet")).args(args).env_remove("CROCHET_BUDGET").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn validate_prints_dynamics() {
    let o = crochet(&["validate", corpus!("basilica")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("degree 2"));
    assert!(out.contains("0 -> -1 (local degree 2)"));
}

#[test]
fn missing_file_is_an_io_error() {
    let o = crochet(&["validate", "/nonexistent/map.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn broken_relation_is_named() {
    let text = std::fs::read_to_string(corpus!("basilica")).unwrap();
    let broken = text.replace("\"rest\": [[1], []]", "\"rest\": [[1, 1], []]");
    assert_ne!(broken, text);
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("broken.json");
    std::fs::write(&file, broken).unwrap();
    let o = crochet(&["validate", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("RelationViolation"), "{}", stderr(&o));
}

#[test]
fn polynomial_is_crochet() {
    let o = crochet(&["decompose", corpus!("basilica")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("C_dec = ∅; classification: crochet; quotient: point"), "{out}");
    assert!(out.contains("budget: L=48, N=24"));
}

#[test]
fn bicycle_is_a_dendrite_with_expansion() {
    let o = crochet(&["decompose", corpus!("bicycle_amalgam")]);
    assert!(stdout(&o).contains("quotient: dendrite"));
    let o = crochet(&["cactoid", "--levels", "4", corpus!("bicycle_amalgam")]);
    let out = stdout(&o);
    assert!(out.contains("cactoid: 3 points, 0 spheres, 2 segments"), "{out}");
    assert!(out.contains("certificate: expanding"));
    assert!(out.contains("level 4: segment cells [16, 16]"));
}

#[test]
fn json_reports_are_deterministic_and_carry_the_budget() {
    let args = ["--emit", "json", "--budget", "40,12", "decompose", corpus!("bicycle_amalgam")];
    let a = crochet(&args);
    let b = crochet(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let one = crochet(&["--threads", "1", "--emit", "json", "--budget", "40,12", "decompose", corpus!("bicycle_amalgam")]);
    assert_eq!(a.stdout, one.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["budget"]["max_len"], 40);
    assert_eq!(v["budget"]["max_depth"], 12);
}

#[test]
fn budget_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_crochet"))
        .args(["--emit", "json", "decompose", corpus!("basilica")])
        .env("CROCHET_BUDGET", "30,8")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["budget"]["max_len"], 30);
}

#[test]
fn non_preinvariant_seed_is_rejected() {
    let o = crochet(&["invariant-mc", corpus!("rabbit"), "x1 x2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("PreinvarianceViolation"));
}

#[test]
fn tuned_amalgam_round_trips_through_files() {
    let o = crochet(&[
        "amalgam",
        corpus!("sierpinski_g"),
        corpus!("basilica"),
        "--at",
        "8",
        "--inf",
        "3",
        "--target",
        "1",
        "--prefix",
        "b_",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("tuned.json");
    std::fs::write(&file, &o.stdout).unwrap();
    let o = crochet(&["decompose", file.to_str().unwrap()]);
    let out = stdout(&o);
    assert!(out.contains("C_Sie = {x1 x2 x3 x4 x5 x6 x7}"), "{out}");
    assert!(out.contains("quotient: cactoid"));
}

#[test]
fn invalid_collapse_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("collapse.json");
    // the crochet nodes cannot be kept as spheres
    std::fs::write(&file, r#"{"curves": [[2,3,4,5,6,7,8],[4,5,6]], "segments": [[2,3,4,5,6,7,8],[4,5,6]], "spheres": [0,1,2]}"#)
        .unwrap();
    let o = crochet(&["cactoid", "--collapse", file.to_str().unwrap(), corpus!("bicycle_amalgam")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NonDynamicalData"), "{}", stderr(&o));
}

#[test]
fn dot_output() {
    let o = crochet(&["--emit", "dot", "cactoid", corpus!("bicycle_amalgam")]);
    assert!(stdout(&o).starts_with("graph cactoid {"));
}
