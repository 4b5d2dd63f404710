use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pigchase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pigchase")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pigchase(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn init_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["init", "--out", p(dir.path())]);
    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--runs",
        "5",
        "--params",
        p(&dir.path().join("params.toml")),
        "--layout",
        p(&dir.path().join("layout.txt")),
        "--trace",
        "--out",
        p(&sim),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sim.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_runs"], 5);
    assert_eq!(fs::read_to_string(sim.join("curves.csv")).unwrap().lines().count(), 16);
    assert!(fs::read_to_string(sim.join("trace.jsonl")).unwrap().lines().count() > 15);
    let conditions: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("conditions.json")).unwrap()).unwrap();
    assert_eq!(conditions.len(), 7);
}

#[test]
fn fit_reports_each_reference_group() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--runs", "10", "--out", p(dir.path())]);
    let out = ok(&[
        "fit",
        "--model",
        p(&dir.path().join("curves.csv")),
        "--reference",
        p(&data.join("reference_curves.csv")),
    ]);
    let groups: Vec<&str> = out.lines().filter_map(|l| l.split('\t').next()).collect();
    assert_eq!(groups, ["Black", "Control", "White"]);
    let flat = dir.path().join("flat.csv");
    let rows: String = (1..=15).map(|t| format!("{t},1\n")).collect();
    fs::write(&flat, format!("trial_index,avg_cumulative_score\n{rows}")).unwrap();
    let out = ok(&["fit", "--model", p(&dir.path().join("curves.csv")), "--reference", p(&flat)]);
    assert!(out.contains("undefined"), "{out}");
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    fs::write(&grid, "runs = 4\n[grid]\nexit_patience = [1, 2]\nrotation_bla = [0.0]\n").unwrap();
    let out = ok(&["sweep", "--grid", p(&grid)]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("exit_patience,rotation_bla,n_runs,catch_rate"));
    fs::write(&grid, "[grid]\nno_such_param = [1.0]\n").unwrap();
    assert!(!pigchase(&["sweep", "--grid", p(&grid)]).status.success());
}

#[test]
fn persisted_cohort_exports_again() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    ok(&["cohort", "--per-demographic", "1", "--data-dir", p(&store), "--out", p(&dir.path().join("out"))]);
    let csv = ok(&["export", "--data-dir", p(&store), "--format", "csv"]);
    assert_eq!(csv.lines().count(), 4);
    let transcripts = ok(&["export", "--data-dir", p(&store), "--format", "transcripts"]);
    let exported = fs::read_to_string(dir.path().join("out/transcripts.jsonl")).unwrap();
    assert_eq!(transcripts, exported);
}

#[test]
fn analyze_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,demographic\nx,Martian\n").unwrap();
    assert!(!pigchase(&["analyze", "--in", p(&bad), "--out", p(dir.path())]).status.success());
}
