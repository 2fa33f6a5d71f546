use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowcast::ingest::Segment;
use flowcast_cli::run::{FitManifest, IngestManifest};

fn flowcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcast"))
        .args(args)
        .output()
        .expect("spawn flowcast")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `root`, relative path and contents, sorted.
fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_owned(), fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = flowcast(&["ingest", "--input", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error:") && err.contains("nope.csv"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = flowcast(&["ingest", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = flowcast(&["fit", "--input", s(tmp.path()), "--season", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = flowcast(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"season_lenght": 5}"#).unwrap();
    let out = flowcast(&["demo", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ten_row_fixture_matches_golden_segments() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture("ten_rows.csv");
    let out = flowcast(&["ingest", "--input", s(&input), "--test-days", "1", "--out", s(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // One device, cumulative registers; the first reading only anchors the
    // counter. The second day stops after 15:00, so its last three segments
    // are filled with the first day's values.
    let golden = [
        ("03-07", "2016-01-04,10\n2016-01-05,15\n"),
        ("07-11", "2016-01-04,100\n2016-01-05,120\n"),
        ("11-15", "2016-01-04,50\n2016-01-05,40\n"),
        ("15-19", "2016-01-04,80\n2016-01-05,80\n"),
        ("19-23", "2016-01-04,60\n2016-01-05,60\n"),
        ("23-03", "2016-01-04,20\n2016-01-05,20\n"),
    ];
    let dir = tmp.path().join("ingest");
    for (label, rows) in golden {
        let text = fs::read_to_string(dir.join(format!("segments/{label}.csv"))).unwrap();
        assert_eq!(text, format!("date,count\n{rows}"), "segment {label}");
    }

    let manifest: IngestManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.schema_version, 1);
    assert_eq!(manifest.kind, "ingest");
    assert_eq!(manifest.station, "S1");
    assert_eq!(manifest.n_days, 2);
    assert_eq!(manifest.stats.rows_in, 10);
    assert_eq!(manifest.stats.first_reading, 1);
    assert_eq!(manifest.config.test_days, 1);
    assert_eq!(manifest.segments.len(), 6);
    let imputed: Vec<usize> = Segment::ALL.iter().map(|s| manifest.stats.imputed_cells[s]).collect();
    assert_eq!(imputed, [0, 0, 0, 1, 1, 1]);
}

#[test]
fn ingest_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let input = fixture("ten_rows.csv");
    for dir in [&a, &b] {
        let out = flowcast(&["ingest", "--input", s(&input), "--test-days", "1", "--out", s(dir.path())]);
        assert!(out.status.success());
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn stages_compose_and_match_demo() {
    let tmp = tempfile::tempdir().unwrap();
    let demo = tmp.path().join("demo");
    let out = flowcast(&["demo", "--out", s(&demo)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Rerun fit and evaluate on the demo's ingest output, one stage at a time.
    let staged = tmp.path().join("staged");
    let ingest = demo.join("ingest");
    let out = flowcast(&["fit", "--input", s(&ingest), "--out", s(&staged)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("S-ARIMA(")).count(), 6);

    let out = flowcast(&["evaluate", "--input", s(&staged.join("fit")), "--out", s(&staged)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let fit: FitManifest =
        serde_json::from_str(&fs::read_to_string(staged.join("fit/manifest.json")).unwrap()).unwrap();
    assert_eq!(fit.segments.len(), 6);
    assert!(fit.segments.values().all(|e| e.test_days == 5));

    // Same models and errors as the all-in-one run; only the config snapshot
    // (station and weekend flag set by demo) may differ.
    let table = |root: &Path| fs::read_to_string(root.join("evaluate/comparison.csv")).unwrap();
    assert_eq!(table(&demo), table(&staged));
    let csv = table(&demo);
    assert!(csv.starts_with("segment,model,mae,mape,n_steps\n"));
    assert_eq!(csv.lines().count(), 1 + 6 * 6);
}

#[test]
fn evaluate_rejects_foreign_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let demo = tmp.path().join("demo");
    assert!(flowcast(&["demo", "--out", s(&demo)]).status.success());
    // An ingest directory is not a fit directory.
    let out = flowcast(&["evaluate", "--input", s(&demo.join("ingest")), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("manifest.json"), "{err}");
}

#[test]
fn demo_seed_changes_the_station() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(flowcast(&["demo", "--out", s(a.path())]).status.success());
    assert!(flowcast(&["demo", "--seed", "7", "--out", s(b.path())]).status.success());
    let seg = |root: &Path| fs::read(root.join("ingest/segments/07-11.csv")).unwrap();
    assert_ne!(seg(a.path()), seg(b.path()));
}

#[test]
fn analysis_reports_every_segment() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(flowcast(&["demo", "--out", s(tmp.path())]).status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("analyze/analysis.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "analysis");
    assert_eq!(v["config"]["station"], "DEMO");
    let segments = v["segments"].as_object().unwrap();
    assert_eq!(segments.len(), 6);
    for a in segments.values() {
        assert_eq!(a["n"], 45, "training window only");
        assert!(a["acf"]["threshold"].as_f64().unwrap() > 0.0);
        assert_eq!(a["top_lags"].as_array().unwrap().len(), 3);
    }
}
