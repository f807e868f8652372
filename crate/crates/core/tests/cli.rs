use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ofdp_lab::report::RunReport;
use ofdp_lab::sim::TraceEntry;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ofdp-lab"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_to(dir: &Path, scenario: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(format!("{scenario}.report.json"));
    let o = bin()
        .args(["run", "--scenario"])
        .arg(shipped(&format!("{scenario}.json")))
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (o, out)
}

#[test]
fn every_shipped_scenario_validates() {
    let dir = shipped("");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = bin().args(["validate", "--scenario"]).arg(&path).output().unwrap();
        assert_eq!(code(&o), 0, "{}: {}", path.display(), stderr(&o));
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn invalid_scenario_exits_2_listing_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"topology":{"switches":[{"dpid":1,"ports":1}],
            "links":[{"a":{"dpid":1,"port":1},"b":{"dpid":9,"port":1}}]},
            "discovery":{"mode":"softd"},"duration_s":-1}"#,
    )
    .unwrap();
    let o = bin().args(["validate", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("s9"), "{err}");
    assert!(err.contains("hmac"), "{err}");
    assert!(err.contains("duration"), "{err}");
}

#[test]
fn unparseable_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{"topology":{},"duraton_s":5}"#).unwrap();
    let o = bin().args(["validate", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_file_exits_1() {
    let o = bin().args(["run", "--scenario", "/nonexistent/x.json"]).output().unwrap();
    assert_eq!(code(&o), 1);
    let o = bin().args(["validate", "--scenario", "/nonexistent/x.json"]).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn run_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let (o, out) = run_to(dir.path(), "ring4-spoof", &["--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.schema_version, 1);
    assert!(report.attacks[0].succeeded);
    let lines: Vec<TraceEntry> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len() as u64, report.trace_entries);
    assert!(lines.windows(2).all(|w| w[0].seq + 1 == w[1].seq));
}

#[test]
fn run_to_stdout_matches_file_output_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_to(dir.path(), "ring4-lossy-seeded", &[]);
    let file = std::fs::read_to_string(&out).unwrap();
    let o = bin().args(["run", "--scenario"]).arg(shipped("ring4-lossy-seeded.json")).output().unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim_end(), file.trim_end());

    let (o, reseeded) = run_to(dir.path(), "ring4-lossy-seeded", &["--seed", "8"]);
    assert_eq!(code(&o), 0);
    let r: RunReport = serde_json::from_str(&std::fs::read_to_string(reseeded).unwrap()).unwrap();
    assert_eq!(r.seed, 8);
}

#[test]
fn compare_tabulates_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for s in ["ring4-ofdp-flaps", "ring4-ofdpv2-flaps", "ring4-softd-flaps"] {
        let dir = dir.path().join(s);
        std::fs::create_dir(&dir).unwrap();
        let (o, out) = run_to(&dir, s, &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        reports.push(out);
    }
    let csv = dir.path().join("table.csv");
    let o = bin().arg("compare").args(&reports).arg("--out").arg(&csv).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(&csv).unwrap();
    let headers = rd.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][col("discovery_total")], "1920");
    assert_eq!(&rows[0][col("mode")], "ofdp");
    let softd: u64 = rows[2][col("controller_bound")].parse().unwrap();
    assert!(softd < 1920 / 10);
}

#[test]
fn compare_rejects_mismatched_topologies() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to(dir.path(), "ring4-spoof", &[]);
    let (_, b) = run_to(dir.path(), "line3-fingerprint", &[]);
    let o = bin().arg("compare").arg(&a).arg(&b).arg("--out").arg(dir.path().join("t.csv")).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("different topology"));
}

#[test]
fn compare_needs_two_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to(dir.path(), "ring4-spoof", &[]);
    let o = bin().arg("compare").arg(&a).arg("--out").arg(dir.path().join("t.csv")).output().unwrap();
    assert_eq!(code(&o), 2);
}
