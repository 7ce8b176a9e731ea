//! End-to-end behaviour of the `noon` binary: validation, error records,
//! planning, output layout and byte-identical reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noon_cli::config::{Experiment, RunConfig};
use noon_cli::output::read_csv;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn noon(args: &[&std::ffi::OsStr], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_noon"));
    cmd.args(args).env_remove("NOON_THREADS");
    if let Some(t) = threads {
        cmd.env("NOON_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn record(bytes: &[u8]) -> Vec<(String, String)> {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn field<'a>(rec: &'a [(String, String)], key: &str) -> Option<&'a str> {
    rec.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn run_into(fixture: &str, dir: &Path, threads: Option<&str>) -> Output {
    let cfg = fixtures().join(format!("{fixture}.cfg"));
    noon(
        &[
            "run".as_ref(),
            cfg.as_os_str(),
            "--output-dir".as_ref(),
            dir.as_os_str(),
        ],
        threads,
    )
}

#[test]
fn every_fixture_validates() {
    let mut seen = Vec::new();
    for entry in fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen.push(cfg.experiment);
            let out = noon(&["validate".as_ref(), path.as_os_str()], None);
            assert!(out.status.success(), "{}", path.display());
            let rec = record(&out.stdout);
            assert_eq!(field(&rec, "status"), Some("valid"));
            assert_eq!(field(&rec, "experiment"), Some(cfg.experiment.name()));
        }
    }
    for e in Experiment::ALL {
        assert!(seen.contains(&e), "no fixture exercises {}", e.name());
    }
}

#[test]
fn invalid_configs_exit_with_a_record() {
    let cases = [
        ("missing_omega_b", "missing_key", None, "omega_b"),
        ("unit_in_params", "value", Some("5"), "g_a_mhz"),
        ("unknown_key", "unknown_key", Some("8"), "sample"),
    ];
    for (name, kind, line, key) in cases {
        let path = fixtures().join("invalid").join(format!("{name}.cfg"));
        for sub in ["validate", "run", "plan"] {
            let out = noon(&[sub.as_ref(), path.as_os_str()], None);
            assert_eq!(out.status.code(), Some(2), "{name} {sub}");
            let rec = record(&out.stderr);
            assert_eq!(field(&rec, "error"), Some("config"), "{name}");
            assert_eq!(field(&rec, "kind"), Some(kind), "{name}");
            assert_eq!(field(&rec, "key"), Some(key), "{name}");
            assert_eq!(field(&rec, "line"), line, "{name}");
        }
    }
}

#[test]
fn missing_file_is_reported() {
    let out = noon(&["validate".as_ref(), "/nonexistent/run.cfg".as_ref()], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(field(&record(&out.stderr), "kind"), Some("io"));
}

#[test]
fn bad_thread_count_is_an_environment_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into("pathsum", dir.path(), Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(field(&record(&out.stderr), "error"), Some("environment"));
}

#[test]
fn plan_lists_schedule_steps() {
    let out = noon(&["plan".as_ref(), fixtures().join("noon2.cfg").as_os_str()], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# noon2 (protocol)"));
    assert!(text.contains("two_photon_a(n=0)+two_photon_b(n=0)"));
    assert!(text.contains("total_time = 376.98"));
}

#[test]
fn run_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into("pathsum", dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read(dir.path().join("pathsum.csv")).unwrap();
    let (header, rows) = read_csv(&csv).unwrap();
    assert_eq!(header[0], "quantity");
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let closed: f64 = row[4].parse().unwrap();
        let summed: f64 = row[5].parse().unwrap();
        assert!((closed - summed).abs() <= 1e-11 * closed.abs());
    }
    let manifest = fs::read_to_string(dir.path().join("pathsum.manifest")).unwrap();
    let rec = record(manifest.as_bytes());
    for key in [
        "tool",
        "experiment",
        "params.g_b",
        "params.theta",
        "basis",
        "threads",
        "csv.significant_digits",
        "table.file",
        "table.rows",
        "result.max_abs_diff",
        "wall_time_s",
    ] {
        assert!(field(&rec, key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(field(&rec, "threads"), Some("1"));
    assert_eq!(field(&rec, "table.rows"), Some("6"));
}

#[test]
fn physical_units_round_trip_into_the_manifest() {
    let out = noon(&["validate".as_ref(), fixtures().join("fig6.cfg").as_os_str()], None);
    assert!(out.status.success());
    let rec = record(&out.stdout);
    let g_a: f64 = field(&rec, "params.g_a").unwrap().parse().unwrap();
    assert!((g_a - 0.03).abs() < 1e-12);
    let g_ab: f64 = field(&rec, "params.g_ab").unwrap().parse().unwrap();
    assert!((g_ab - 0.003).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let root = tempfile::tempdir().unwrap();
    for fixture in ["pathsum3", "fig1a", "fig2"] {
        let mut outputs = Vec::new();
        for (k, threads) in [None, Some("1"), Some("4")].into_iter().enumerate() {
            let dir = root.path().join(format!("{fixture}{k}"));
            let out = run_into(fixture, &dir, threads);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(&p).unwrap(),
                    )
                })
                .collect();
            files.sort();
            assert!(!files.is_empty());
            outputs.push(files);
        }
        assert_eq!(outputs[0], outputs[1], "{fixture}");
        assert_eq!(outputs[0], outputs[2], "{fixture}");
    }
}
