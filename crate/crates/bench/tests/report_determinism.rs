//! Report generation from synthetic artifacts: byte-identical regeneration
//! and the documented table rendering.

use std::collections::BTreeMap;
use std::path::Path;

use otbridge_bench::artifact::{write_json, CallRecord, RecoveryArtifact, RecoveryRecord, RunRecord, SuiteArtifact};
use otbridge_bench::plan::{Family, SessionKey, Suite};
use otbridge_bench::report::generate_report;
use serde_json::json;

fn call(tool: &str, envelope: serde_json::Value, latency: f64) -> CallRecord {
    CallRecord {
        session: SessionKey::ModbusRw,
        tool: tool.to_string(),
        args: json!({}),
        envelope,
        harness_latency_ms: latency,
        started_offset_ms: 0.0,
        ended_offset_ms: latency,
        parallel_group: None,
        expected_outcome_met: true,
    }
}

fn ok_env() -> serde_json::Value {
    json!({
        "success": true, "data": {"x": 1}, "error": null,
        "meta": {"latency_ms": 0.4, "endpoint": "e", "attempts": 1, "protocol": "modbus"},
    })
}

fn err_env(class: &str) -> serde_json::Value {
    json!({
        "success": false, "data": null,
        "error": {"class": class, "message": "m"},
        "meta": {"latency_ms": 0.4, "endpoint": "e", "attempts": 1, "protocol": "modbus"},
    })
}

fn run(task: &str, suite: Suite, family: Family, rep: u32, pass: bool, calls: Vec<CallRecord>) -> RunRecord {
    let task_latency_ms = calls.iter().map(|c| c.harness_latency_ms).sum();
    RunRecord {
        task_id: task.to_string(),
        suite,
        family,
        repetition: rep,
        started_at_epoch_ms: 0,
        calls,
        events: Vec::new(),
        task_latency_ms,
        pass,
        failure_reason: None,
    }
}

fn write_fixture(dir: &Path) {
    let normal = SuiteArtifact {
        suite: Suite::Normal,
        records: (0..3)
            .map(|rep| run("M1", Suite::Normal, Family::Modbus, rep, true, vec![call("ping", ok_env(), 1.0 + rep as f64)]))
            .collect(),
    };
    write_json(&dir.join("normal.json"), &normal).unwrap();

    let fault = SuiteArtifact {
        suite: Suite::Fault,
        records: (0..3)
            .map(|rep| {
                run(
                    "FM2",
                    Suite::Fault,
                    Family::Modbus,
                    rep,
                    true,
                    vec![call("write_register", err_env("range_overflow"), 0.9)],
                )
            })
            .collect(),
    };
    write_json(&dir.join("fault.json"), &fault).unwrap();

    let recovery = RecoveryArtifact {
        suite: Suite::Recovery,
        records: (0..2)
            .map(|trial| RecoveryRecord {
                task_id: "R1".to_string(),
                family: Family::Modbus,
                trial,
                baseline_ok: true,
                detect_latency_ms: 1.2,
                same_session_recovered: true,
                same_session_latency_ms: Some(2.0),
                fresh_session_recovered: true,
                phases: BTreeMap::new(),
            })
            .collect(),
    };
    write_json(&dir.join("recovery.json"), &recovery).unwrap();
}

#[test]
fn regenerating_from_the_same_artifacts_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());

    let out_a = dir.path().join("report_a");
    let out_b = dir.path().join("report_b");
    let written_a = generate_report(dir.path(), &out_a).unwrap();
    let written_b = generate_report(dir.path(), &out_b).unwrap();
    assert_eq!(written_a.len(), written_b.len());

    for (a, b) in written_a.iter().zip(&written_b) {
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        assert_eq!(bytes_a, bytes_b, "{} and {} differ", a.display(), b.display());
    }
}

#[test]
fn fault_table_renders_the_class_with_spaces() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let out = dir.path().join("report");
    generate_report(dir.path(), &out).unwrap();
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("| FM2 | modbus | 100.0 | 0.90 | range overflow |"), "{md}");
}

#[test]
fn missing_suites_are_marked_absent_not_fabricated() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let out = dir.path().join("report");
    generate_report(dir.path(), &out).unwrap();
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("*stress suite artifact absent*"));
    assert!(!out.join("stress_results.csv").exists());
}

#[test]
fn family_table_shows_full_success_columns() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let out = dir.path().join("report");
    generate_report(dir.path(), &out).unwrap();
    let csv = std::fs::read_to_string(out.join("family_results.csv")).unwrap();
    let modbus = csv.lines().find(|l| l.starts_with("modbus,")).unwrap();
    assert!(modbus.contains(",100.0,100.0,"), "task and tool columns show 100.0: {modbus}");
    assert!(modbus.ends_with(",100.0"), "same-session recovery column: {modbus}");
}
