use semimdim_core::harness::{
    emit_report, parse_config, run_experiment, RunReport, COMPARATORS_HEADER, CURVES_HEADER,
    MDIM_HEADER,
};

fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn empty_report_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&RunReport::empty(), dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    assert_eq!(read(dir.path(), "curves.csv"), format!("{CURVES_HEADER}\n"));
    assert_eq!(read(dir.path(), "mdim.csv"), format!("{MDIM_HEADER}\n"));
    assert_eq!(
        read(dir.path(), "comparators.csv"),
        format!("{COMPARATORS_HEADER}\n")
    );
}

#[test]
fn one_curve_has_one_row_per_scale_and_length() {
    let cfg = parse_config("[generators]\nd = affine 2\n[walk]\nseed = 4\n[grid]\nepsilons = 0.1 0.05 0.02\nn_min = 1\nn_max = 4\n").unwrap();
    let report = run_experiment(&cfg);
    assert_eq!(report.curves.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let rows = read(dir.path(), "curves.csv").lines().count() - 1;
    assert_eq!(rows, 3 * 4);
}

#[test]
fn pair_config_reports_cover_identity() {
    let text = "[generators]\nd = affine 2\nt = affine 3\n[walk]\nseed = 4\n[grid]\nepsilons = 0.1 0.05 0.02\nn_min = 2\nn_max = 5\n[comparators]\ntheorems = C\n";
    let report = run_experiment(&parse_config(text).unwrap());
    assert!(report.success());
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let summary = read(dir.path(), "summary.txt");
    assert!(summary.contains("theorem C: PASS"), "{summary}");
    let exact: Vec<String> = read(dir.path(), "comparators.csv")
        .lines()
        .filter(|l| l.contains("sum_w N"))
        .map(String::from)
        .collect();
    assert_eq!(exact.len(), 4);
    assert!(exact.iter().all(|l| l.ends_with(",==,true,PASS")));
}

#[test]
fn budget_errors_name_the_estimator_and_keep_the_rest() {
    let text = "[generators]\nr = rotation 0.1\ns = rotation 0.9\n[walk]\nseed = 2\n[grid]\nepsilons = 0.2 0.1 0.05\nglw_n_max = 6\n[budgets]\ngroup_budget = 10\n[comparators]\nestimators = walk glw\n";
    let report = run_experiment(&parse_config(text).unwrap());
    assert_eq!(report.curves.len(), 1);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].0, "estimator glw");
    assert!(!report.success());
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    assert!(read(dir.path(), "summary.txt").contains("estimator glw"));
}

#[test]
fn unwritable_directory_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit_report(&RunReport::empty(), &blocker.join("sub")).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}
