use std::path::Path;
use std::process::{Command, Output};

fn semimdim(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_semimdim"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("SEMIMDIM_WORKERS", w),
        None => cmd.env_remove("SEMIMDIM_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const DOUBLING: &str = "\
[generators]
double = affine 2
triple = affine 3
[walk]
seed = 9
[grid]
epsilons = 0.1 0.05 0.02
n_min = 2
n_max = 5
[measures]
x_samples = 4
[comparators]
estimators = walk glw
theorems = A C
";

#[test]
fn version_prints_crate_version() {
    let out = semimdim(&["version"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.trim(),
        format!("semimdim {}", env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn validate_lists_every_error_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.cfg",
        "[generators]\na = affine 2\nb = affine 3\n[walk]\nprobabilities = 0.5 0.4\nseed = 1\n[grid]\nepsilons = 0.5 0.6\ncolour = red\n",
    );
    let out = semimdim(&["validate", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 5: probabilities must sum to 1"), "{err}");
    assert!(err.contains("line 8: epsilon grid"), "{err}");
    assert!(err.contains("line 9: unknown key `colour`"), "{err}");
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.cfg", DOUBLING);
    let out = semimdim(&["validate", &cfg], None);
    assert!(out.status.success());
}

#[test]
fn run_writes_four_files_and_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", DOUBLING);
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    let a = semimdim(&["run", &cfg, "-o", one.to_str().unwrap()], Some("1"));
    let b = semimdim(&["run", &cfg, "-o", many.to_str().unwrap()], Some("4"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    for f in ["curves.csv", "mdim.csv", "comparators.csv", "summary.txt"] {
        let x = std::fs::read(one.join(f)).unwrap();
        let y = std::fs::read(many.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between worker counts");
    }
    let summary = std::fs::read_to_string(one.join("summary.txt")).unwrap();
    assert!(summary.contains("theorem A: PASS"));
    assert!(summary.contains("theorem C: PASS"));
    let comparators = std::fs::read_to_string(one.join("comparators.csv")).unwrap();
    assert!(comparators
        .starts_with("theorem,row,epsilon,left,right,gap,tolerance,check,gating,verdict\n"));
}

#[test]
fn failing_comparator_gives_exit_one() {
    // Negative tolerances make every gating row fail.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.cfg",
        "[generators]\nd = affine 2\n[walk]\nseed = 3\n[grid]\nepsilons = 0.2 0.1 0.05\nn_max = 3\n[measures]\nx_samples = 2\n[comparators]\ntheorems = A\nrelative = -1\nabsolute = -1\nslope = -1\n",
    );
    let out = semimdim(
        &["run", &cfg, "-o", dir.path().join("r").to_str().unwrap()],
        Some("1"),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("r/summary.txt").exists());
}

#[test]
fn oracle_solves_instance() {
    let dir = tempfile::tempdir().unwrap();
    // Three points on a line at 0, 1, 2.
    let inst = write(
        dir.path(),
        "line.inst",
        "mode separated\nepsilon 1.5\npoints 3\n0 1 2\n1 0 1\n2 1 0\n",
    );
    let out = semimdim(&["oracle", &inst], None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "2");
}

#[test]
fn bad_worker_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "[generators]\nid = identity\n[walk]\nseed = 1\n",
    );
    let out = semimdim(
        &["run", &cfg, "-o", dir.path().join("r").to_str().unwrap()],
        Some("zero"),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("SEMIMDIM_WORKERS"));
}
