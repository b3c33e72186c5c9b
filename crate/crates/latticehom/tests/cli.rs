//! Black-box tests of the command-line binary: exit codes, determinism,
//! and cache behavior.

use std::path::Path;
use std::process::{Command, Output};

const E8: &str = r#"{"vertices": [
 {"id": "v1", "framing": -2}, {"id": "v2", "framing": -2}, {"id": "v3", "framing": -2},
 {"id": "v4", "framing": -2}, {"id": "v5", "framing": -2}, {"id": "v6", "framing": -2},
 {"id": "v7", "framing": -2}, {"id": "v8", "framing": -2}],
 "edges": [["v1","v2"],["v2","v3"],["v3","v4"],["v4","v5"],["v5","v6"],["v6","v7"],["v5","v8"]]}"#;
const PLUS_ONE: &str = r#"{"vertices": [{"id": "a", "framing": 1}], "edges": []}"#;
const ZERO: &str = r#"{"vertices": [{"id": "a", "framing": 0}], "edges": []}"#;

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latticehom"))
        .args(args)
        .env_remove("LATTICEHOM_CACHE")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn info_reports_structure() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "e8.json", E8);
    let out = run(&["info", "--graph", &g]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("negative-definite true"), "{text}");
    assert!(text.contains("rational true"), "{text}");
    assert!(text.contains("det 1"), "{text}");

    let g = write(dir.path(), "p1.json", PLUS_ONE);
    let out = run(&["info", "--graph", &g]);
    assert!(stdout(&out).contains("negative-definite false"));
}

#[test]
fn malformed_graph_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "bad.json", "not a graph");
    for cmd in ["info", "homology"] {
        let out = run(&[cmd, "--graph", &g]);
        assert_eq!(code(&out), 2, "{cmd}");
    }
    let out = run(&["info", "--graph", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn homology_worked_examples() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p1.json", PLUS_ONE);
    let out = run(&["homology", "--graph", &g, "--un", "3"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("summand delta=1 kind=tower top=0 mult=1"));

    let g = write(dir.path(), "z0.json", ZERO);
    let out = run(&["homology", "--graph", &g, "--spinc", "K=0", "--un", "2"]);
    let text = stdout(&out);
    assert!(text.contains("summand delta=0 kind=tower top=-1/2 mult=1"), "{text}");
    assert!(text.contains("summand delta=1 kind=tower top=1/2 mult=1"), "{text}");
    let out = run(&["homology", "--graph", &g, "--spinc", "K=6", "--un", "2"]);
    assert!(stdout(&out).contains("summands 0"));
}

#[test]
fn radius_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p1.json", PLUS_ONE);
    // the +1 vertex needs a larger box than 2 before its tower sits inside
    let out = run(&["homology", "--graph", &g, "--un", "3", "--radius-cap", "2"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn degenerate_without_representative_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "z0.json", ZERO);
    let out = run(&["homology", "--graph", &g, "--un", "2"]);
    assert_eq!(code(&out), 4);
    let out = run(&["homology", "--graph", &g, "--spinc", "K=1", "--un", "2"]);
    assert_eq!(code(&out), 2); // odd value on an even vertex: not characteristic
}

#[test]
fn deterministic_output_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p1.json", PLUS_ONE);
    let cache = dir.path().join("cache");
    let args = ["homology", "--graph", &g, "--un", "3", "--cache", cache.to_str().unwrap()];
    let cold = run(&args);
    assert_eq!(code(&cold), 0);
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
    let warm = run(&args);
    assert_eq!(cold.stdout, warm.stdout, "cache hit changed the document");
    let uncached = run(&args[..5]);
    assert_eq!(cold.stdout, uncached.stdout, "cache changed the document");
}

#[test]
fn triangle_passes_and_corruption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "z0.json", ZERO);
    let args = ["triangle", "--graph", &g, "--vertex", "a", "--un", "2", "--seed", "9"];
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("triangle pass"));
    let again = run(&args);
    assert_eq!(out.stdout, again.stdout, "seeded reruns must be identical");

    let out = run(&["triangle", "--graph", &g, "--vertex", "a", "--un", "2", "--corrupt"]);
    assert_eq!(code(&out), 5);

    let out = run(&["triangle", "--graph", &g, "--vertex", "nope", "--un", "2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn series_roundtrip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p1.json", PLUS_ONE);
    let out = run(&["series", "--graph", &g, "--un", "5"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("reconstructed kind=tower top=0 mult=1"), "{text}");
    assert!(text.contains("roundtrip pass"), "{text}");

    let dec = write(
        dir.path(),
        "dec.txt",
        "summand kind=tower top=1/2 mult=1\nsummand kind=finite:2 top=-3 mult=2\n",
    );
    let out = run(&["series", "--decomposition", &dec, "--un", "4"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("roundtrip pass"));

    // a finite length at or past the tabulated s-degrees is unrecoverable
    let out = run(&["series", "--decomposition", &dec, "--un", "2"]);
    assert_eq!(code(&out), 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("too small"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p1.json", PLUS_ONE);
    let out_path = dir.path().join("doc.txt");
    let out = run(&["info", "--graph", &g, "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&out_path).unwrap().starts_with("latticehom info v1"));
}
