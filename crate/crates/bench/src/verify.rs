//! Structural verification of a completed benchmark run: counts, success
//! rates, the fault class map, the stress/recovery patterns, latency
//! structure, oracle purity, and parallel overlap.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::artifact::{read_json, ArtifactError, Manifest, RecoveryArtifact, RunRecord, SuiteArtifact};
use crate::oracle;
use crate::plan::{load_plan, Family};
use crate::stats::median;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: &str, pass: bool, detail: String) -> CriterionResult {
        CriterionResult { id: id.to_string(), pass, detail }
    }
}

fn task_pass_rate(records: &[RunRecord], task_id: &str) -> Option<f64> {
    let runs: Vec<&RunRecord> = records.iter().filter(|r| r.task_id == task_id).collect();
    if runs.is_empty() {
        return None;
    }
    Some(100.0 * runs.iter().filter(|r| r.pass).count() as f64 / runs.len() as f64)
}

fn task_latency_median(records: &[RunRecord], task_id: &str) -> Option<f64> {
    let latencies: Vec<f64> = records
        .iter()
        .filter(|r| r.task_id == task_id)
        .map(|r| r.task_latency_ms)
        .collect();
    median(&latencies)
}

fn modal_class(records: &[RunRecord], task_id: &str, step: usize) -> Option<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for record in records.iter().filter(|r| r.task_id == task_id) {
        if let Some(class) = record
            .calls
            .get(step)
            .and_then(|c| c.envelope.pointer("/error/class"))
            .and_then(Value::as_str)
        {
            *counts.entry(class.to_string()).or_default() += 1;
        }
    }
    counts.into_iter().max_by_key(|(_, n)| *n).map(|(class, _)| class)
}

/// Verifies a full default run. Every threshold here is pinned; the caller
/// just reads pass/fail.
pub fn verify_dir(dir: &Path) -> Result<Vec<CriterionResult>, ArtifactError> {
    let normal: SuiteArtifact = read_json(&dir.join("normal.json"))?;
    let fault: SuiteArtifact = read_json(&dir.join("fault.json"))?;
    let stress: SuiteArtifact = read_json(&dir.join("stress.json"))?;
    let recovery: RecoveryArtifact = read_json(&dir.join("recovery.json"))?;
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;

    let mut results = Vec::new();

    // run counts: 480 / 210 / 120 / 60, grand total 870
    let counts_ok = normal.records.len() == 480
        && fault.records.len() == 210
        && stress.records.len() == 120
        && recovery.records.len() == 60
        && manifest.total_runs == 870;
    results.push(CriterionResult::new(
        "run-counts",
        counts_ok,
        format!(
            "normal {} fault {} stress {} recovery {} manifest-total {}",
            normal.records.len(),
            fault.records.len(),
            stress.records.len(),
            recovery.records.len(),
            manifest.total_runs
        ),
    ));

    // normal suite: 100% task success, 100% per-call expected outcomes
    let normal_pass = normal.records.iter().filter(|r| r.pass).count();
    let calls_total: usize = normal.records.iter().map(|r| r.calls.len()).sum();
    let calls_met: usize = normal
        .records
        .iter()
        .map(|r| r.calls.iter().filter(|c| c.expected_outcome_met).count())
        .sum();
    results.push(CriterionResult::new(
        "normal-success",
        normal_pass == normal.records.len() && calls_met == calls_total,
        format!(
            "{normal_pass}/{} tasks, {calls_met}/{calls_total} calls",
            normal.records.len()
        ),
    ));

    // fault suite: 100% structured-error handling with the exact class map
    let fault_pass = fault.records.iter().filter(|r| r.pass).count();
    let class_map: [(&str, usize, &str); 7] = [
        ("FM1", 0, "protocol_error"),
        ("FM2", 0, "range_overflow"),
        ("FQ1", 0, "invalid_input"),
        ("FQ2", 0, "invalid_input"),
        ("FO1", 0, "illegal_address"),
        ("FO2", 0, "protocol_error"),
        ("FX1", 1, "illegal_address"),
    ];
    let mut class_detail = Vec::new();
    let mut classes_ok = true;
    for (task_id, step, expected) in class_map {
        let actual = modal_class(&fault.records, task_id, step).unwrap_or_else(|| "-".to_string());
        if actual != expected {
            classes_ok = false;
        }
        class_detail.push(format!("{task_id}={actual}"));
    }
    results.push(CriterionResult::new(
        "fault-classes",
        fault_pass == fault.records.len() && classes_ok,
        format!("{fault_pass}/{} handled; {}", fault.records.len(), class_detail.join(" ")),
    ));

    // stress: S1-S9 and S10/S12 at 100%, S11 at 0% under the default
    // 1 s reconnect backoff and 1 s post-restart window
    let mut stress_ok = true;
    let mut stress_detail = Vec::new();
    for task_id in ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10", "S12"] {
        let rate = task_pass_rate(&stress.records, task_id).unwrap_or(-1.0);
        if rate != 100.0 {
            stress_ok = false;
        }
        stress_detail.push(format!("{task_id}={rate:.0}%"));
    }
    let s11 = task_pass_rate(&stress.records, "S11").unwrap_or(-1.0);
    if s11 != 0.0 {
        stress_ok = false;
    }
    stress_detail.push(format!("S11={s11:.0}%"));
    results.push(CriterionResult::new("stress-pattern", stress_ok, stress_detail.join(" ")));

    // recovery: same-session and fresh-session at 100% for every family
    let mut recovery_ok = true;
    let mut recovery_detail = Vec::new();
    for family in [Family::Modbus, Family::Mqtt, Family::Ua] {
        let trials: Vec<_> = recovery.records.iter().filter(|r| r.family == family).collect();
        let same = trials.iter().filter(|r| r.same_session_recovered).count();
        let fresh = trials.iter().filter(|r| r.fresh_session_recovered).count();
        let baseline = trials.iter().filter(|r| r.baseline_ok).count();
        if trials.is_empty() || same != trials.len() || fresh != trials.len() || baseline != trials.len() {
            recovery_ok = false;
        }
        recovery_detail.push(format!(
            "{}: same {same}/{} fresh {fresh}/{}",
            family.as_str(),
            trials.len(),
            trials.len()
        ));
    }
    results.push(CriterionResult::new("recovery-rates", recovery_ok, recovery_detail.join("; ")));

    // latency structure: O4 >= 10x O1; parallel cross tasks beat their
    // sequential counterparts
    let o1 = task_latency_median(&normal.records, "O1").unwrap_or(f64::INFINITY);
    let o4 = task_latency_median(&normal.records, "O4").unwrap_or(0.0);
    let x1 = task_latency_median(&normal.records, "X1").unwrap_or(0.0);
    let x1p = task_latency_median(&normal.records, "X1p").unwrap_or(f64::INFINITY);
    let x2 = task_latency_median(&normal.records, "X2").unwrap_or(0.0);
    let x2p = task_latency_median(&normal.records, "X2p").unwrap_or(f64::INFINITY);
    let structure_ok = o4 >= 10.0 * o1 && x1p < x1 && x2p < x2;
    results.push(CriterionResult::new(
        "latency-structure",
        structure_ok,
        format!(
            "O4 {o4:.2} vs 10xO1 {:.2}; X1p {x1p:.2} < X1 {x1:.2}; X2p {x2p:.2} < X2 {x2:.2}",
            10.0 * o1
        ),
    ));

    // oracle purity: re-evaluating the stored records reproduces the pass
    // bits exactly
    let plan = load_plan();
    let mut purity_ok = true;
    let mut checked = 0usize;
    for artifact in [&normal, &fault, &stress] {
        for record in &artifact.records {
            if let Some(task) = plan.iter().find(|t| t.id == record.task_id) {
                checked += 1;
                if oracle::evaluate(task, record).pass != record.pass {
                    purity_ok = false;
                }
            }
        }
    }
    results.push(CriterionResult::new(
        "oracle-purity",
        purity_ok,
        format!("{checked} records re-evaluated"),
    ));

    // parallel tasks: the calls of each parallel group overlap in flight
    let mut overlap_ok = true;
    let mut overlapped = 0usize;
    for record in normal.records.iter().filter(|r| r.task_id == "X1p" || r.task_id == "X2p") {
        let starts: Vec<f64> = record.calls.iter().map(|c| c.started_offset_ms).collect();
        let ends: Vec<f64> = record.calls.iter().map(|c| c.ended_offset_ms).collect();
        let max_start = starts.iter().cloned().fold(f64::MIN, f64::max);
        let min_end = ends.iter().cloned().fold(f64::MAX, f64::min);
        if max_start < min_end {
            overlapped += 1;
        } else {
            overlap_ok = false;
        }
    }
    results.push(CriterionResult::new(
        "parallel-overlap",
        overlap_ok,
        format!("{overlapped} parallel runs share an in-flight instant"),
    ));

    Ok(results)
}
