//! Report generation: Markdown and CSV tables computed from the JSON
//! artifacts alone. Regenerating from the same artifacts yields
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::artifact::{read_json, ArtifactError, RecoveryArtifact, RunRecord, SuiteArtifact};
use crate::plan::{load_plan, CallExpect, Family, Suite, TaskSpec};
use crate::stats::aggregate;

pub struct ReportInputs {
    pub normal: Option<SuiteArtifact>,
    pub fault: Option<SuiteArtifact>,
    pub stress: Option<SuiteArtifact>,
    pub recovery: Option<RecoveryArtifact>,
}

pub fn load_inputs(dir: &Path) -> Result<ReportInputs, ArtifactError> {
    let load_suite = |name: &str| -> Result<Option<SuiteArtifact>, ArtifactError> {
        let path = dir.join(format!("{name}.json"));
        if path.exists() {
            Ok(Some(read_json(&path)?))
        } else {
            Ok(None)
        }
    };
    let recovery_path = dir.join("recovery.json");
    Ok(ReportInputs {
        normal: load_suite("normal")?,
        fault: load_suite("fault")?,
        stress: load_suite("stress")?,
        recovery: if recovery_path.exists() { Some(read_json(&recovery_path)?) } else { None },
    })
}

fn fmt_ms(value: f64) -> String {
    format!("{value:.2}")
}

fn fmt_pct(value: f64) -> String {
    format!("{value:.1}")
}

fn task_order(suite: Suite) -> Vec<TaskSpec> {
    load_plan().into_iter().filter(|t| t.suite == suite).collect()
}

fn records_of<'a>(artifact: &'a SuiteArtifact, task_id: &str) -> Vec<&'a RunRecord> {
    artifact.records.iter().filter(|r| r.task_id == task_id).collect()
}

/// Index of the call the fault row reports on: the first step the plan
/// expects to fail.
fn designated_failing_step(task: &TaskSpec) -> usize {
    task.call_steps()
        .iter()
        .position(|c| !matches!(c.expect, CallExpect::Success))
        .unwrap_or(0)
}

fn modal_error_class(records: &[&RunRecord], step: usize) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for record in records {
        if let Some(class) = record
            .calls
            .get(step)
            .and_then(|c| c.envelope.pointer("/error/class"))
            .and_then(Value::as_str)
        {
            *counts.entry(class.to_string()).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|(_, n)| *n)
        .map(|(class, _)| class.replace('_', " "))
        .unwrap_or_else(|| "-".to_string())
}

struct FamilyRow {
    family: Family,
    tasks: usize,
    task_pct: f64,
    tool_pct: f64,
    median_ms: f64,
    p95_ms: f64,
    recovery_pct: Option<f64>,
}

fn family_rows(inputs: &ReportInputs) -> Vec<FamilyRow> {
    let normal = match &inputs.normal {
        Some(artifact) => artifact,
        None => return Vec::new(),
    };
    [Family::Modbus, Family::Mqtt, Family::Ua, Family::Cross]
        .into_iter()
        .map(|family| {
            let records: Vec<&RunRecord> = normal.records.iter().filter(|r| r.family == family).collect();
            let task_ids: std::collections::BTreeSet<&str> =
                records.iter().map(|r| r.task_id.as_str()).collect();
            let latencies: Vec<f64> = records.iter().map(|r| r.task_latency_ms).collect();
            let stats = aggregate(&latencies).ok();
            let calls: usize = records.iter().map(|r| r.calls.len()).sum();
            let calls_met: usize = records
                .iter()
                .map(|r| r.calls.iter().filter(|c| c.expected_outcome_met).count())
                .sum();
            let recovery_pct = inputs.recovery.as_ref().and_then(|recovery| {
                let trials: Vec<bool> = recovery
                    .records
                    .iter()
                    .filter(|r| r.family == family)
                    .map(|r| r.same_session_recovered)
                    .collect();
                if trials.is_empty() {
                    None
                } else {
                    Some(100.0 * trials.iter().filter(|ok| **ok).count() as f64 / trials.len() as f64)
                }
            });
            FamilyRow {
                family,
                tasks: task_ids.len(),
                task_pct: if records.is_empty() {
                    0.0
                } else {
                    100.0 * records.iter().filter(|r| r.pass).count() as f64 / records.len() as f64
                },
                tool_pct: if calls == 0 { 0.0 } else { 100.0 * calls_met as f64 / calls as f64 },
                median_ms: stats.as_ref().map(|s| s.median).unwrap_or(0.0),
                p95_ms: stats.as_ref().map(|s| s.p95).unwrap_or(0.0),
                recovery_pct,
            }
        })
        .collect()
}

/// Writes `report.md` plus one CSV per table; returns the paths written.
pub fn generate_report(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, ArtifactError> {
    let inputs = load_inputs(in_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|source| ArtifactError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let mut md = String::new();
    md.push_str("# Benchmark report\n\n");
    md.push_str("All numbers are computed from the JSON run artifacts; latencies are harness-side wall-clock milliseconds measured on localhost.\n\n");

    // ---- family-level table (normal suite) ----
    md.push_str("## Family-level results (normal suite)\n\n");
    let rows = family_rows(&inputs);
    if rows.is_empty() {
        md.push_str("*normal suite artifact absent*\n\n");
    } else {
        let mut csv = String::from("family,tasks,task_success_pct,tool_success_pct,median_ms,p95_ms,same_session_recovery_pct\n");
        md.push_str("| Family | Tasks | Task (%) | Tool (%) | Med. (ms) | p95 (ms) | Rec. (%) |\n");
        md.push_str("|---|---|---|---|---|---|---|\n");
        for row in &rows {
            let rec = row.recovery_pct.map(fmt_pct).unwrap_or_else(|| "-".to_string());
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} |",
                row.family.as_str(),
                row.tasks,
                fmt_pct(row.task_pct),
                fmt_pct(row.tool_pct),
                fmt_ms(row.median_ms),
                fmt_ms(row.p95_ms),
                rec
            );
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                row.family.as_str(),
                row.tasks,
                fmt_pct(row.task_pct),
                fmt_pct(row.tool_pct),
                fmt_ms(row.median_ms),
                fmt_ms(row.p95_ms),
                row.recovery_pct.map(fmt_pct).unwrap_or_default()
            );
        }
        md.push('\n');
        let path = out_dir.join("family_results.csv");
        write_text(&path, &csv)?;
        written.push(path);
    }

    // ---- per-task latency table (normal suite) ----
    md.push_str("## Per-task latency (normal suite)\n\n");
    match &inputs.normal {
        None => md.push_str("*normal suite artifact absent*\n\n"),
        Some(artifact) => {
            let mut csv = String::from("task,family,n,median_ms,p95_ms,mean_ms,std_ms,ci95_lo_ms,ci95_hi_ms\n");
            md.push_str("| ID | Family | n | Median (ms) | p95 (ms) |\n|---|---|---|---|---|\n");
            for task in task_order(Suite::Normal) {
                let records = records_of(artifact, &task.id);
                let latencies: Vec<f64> = records.iter().map(|r| r.task_latency_ms).collect();
                if let Ok(stats) = aggregate(&latencies) {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} |",
                        task.id,
                        task.family.as_str(),
                        stats.n,
                        fmt_ms(stats.median),
                        fmt_ms(stats.p95)
                    );
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{},{}",
                        task.id,
                        task.family.as_str(),
                        stats.n,
                        fmt_ms(stats.median),
                        fmt_ms(stats.p95),
                        fmt_ms(stats.mean),
                        fmt_ms(stats.std),
                        fmt_ms(stats.ci95.0),
                        fmt_ms(stats.ci95.1)
                    );
                }
            }
            md.push('\n');
            let path = out_dir.join("task_latency.csv");
            write_text(&path, &csv)?;
            written.push(path);
        }
    }

    // ---- fault table ----
    md.push_str("## Fault-injection results\n\n");
    match &inputs.fault {
        None => md.push_str("*fault suite artifact absent*\n\n"),
        Some(artifact) => {
            let mut csv = String::from("task,family,n,error_handling_pct,median_ms,error_class\n");
            md.push_str("| ID | Family | EH (%) | Med. (ms) | Error class |\n|---|---|---|---|---|\n");
            for task in task_order(Suite::Fault) {
                let records = records_of(artifact, &task.id);
                if records.is_empty() {
                    continue;
                }
                let step = designated_failing_step(&task);
                let eh_pct = 100.0 * records.iter().filter(|r| r.pass).count() as f64 / records.len() as f64;
                let fail_latencies: Vec<f64> = records
                    .iter()
                    .filter_map(|r| r.calls.get(step).map(|c| c.harness_latency_ms))
                    .collect();
                let median = aggregate(&fail_latencies).map(|s| s.median).unwrap_or(0.0);
                let class = modal_error_class(&records, step);
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    task.id,
                    task.family.as_str(),
                    fmt_pct(eh_pct),
                    fmt_ms(median),
                    class
                );
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    task.id,
                    task.family.as_str(),
                    records.len(),
                    fmt_pct(eh_pct),
                    fmt_ms(median),
                    class
                );
            }
            md.push('\n');
            let path = out_dir.join("fault_results.csv");
            write_text(&path, &csv)?;
            written.push(path);
        }
    }

    // ---- stress table ----
    md.push_str("## Stress results\n\n");
    match &inputs.stress {
        None => md.push_str("*stress suite artifact absent*\n\n"),
        Some(artifact) => {
            let mut csv = String::from("task,family,n,success_pct,median_ms\n");
            md.push_str("| ID | Family | Success (%) | Med. (ms) |\n|---|---|---|---|\n");
            for task in task_order(Suite::Stress) {
                let records = records_of(artifact, &task.id);
                if records.is_empty() {
                    continue;
                }
                let pct = 100.0 * records.iter().filter(|r| r.pass).count() as f64 / records.len() as f64;
                let latencies: Vec<f64> = records.iter().map(|r| r.task_latency_ms).collect();
                let median = aggregate(&latencies).map(|s| s.median).unwrap_or(0.0);
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} |",
                    task.id,
                    task.family.as_str(),
                    fmt_pct(pct),
                    fmt_ms(median)
                );
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    task.id,
                    task.family.as_str(),
                    records.len(),
                    fmt_pct(pct),
                    fmt_ms(median)
                );
            }
            md.push('\n');
            let path = out_dir.join("stress_results.csv");
            write_text(&path, &csv)?;
            written.push(path);
        }
    }

    // ---- recovery table ----
    md.push_str("## Recovery results\n\n");
    match &inputs.recovery {
        None => md.push_str("*recovery suite artifact absent*\n\n"),
        Some(artifact) => {
            let mut csv = String::from("family,trials,same_session_pct,fresh_session_pct,mean_detect_ms\n");
            md.push_str("| Family | Trials | Same-session (%) | Fresh-session (%) | Detect (ms, mean) |\n|---|---|---|---|---|\n");
            for family in [Family::Modbus, Family::Mqtt, Family::Ua] {
                let trials: Vec<_> = artifact.records.iter().filter(|r| r.family == family).collect();
                if trials.is_empty() {
                    continue;
                }
                let same =
                    100.0 * trials.iter().filter(|r| r.same_session_recovered).count() as f64 / trials.len() as f64;
                let fresh =
                    100.0 * trials.iter().filter(|r| r.fresh_session_recovered).count() as f64 / trials.len() as f64;
                let detect: Vec<f64> = trials.iter().map(|r| r.detect_latency_ms).collect();
                let mean_detect = aggregate(&detect).map(|s| s.mean).unwrap_or(0.0);
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    family.as_str(),
                    trials.len(),
                    fmt_pct(same),
                    fmt_pct(fresh),
                    fmt_ms(mean_detect)
                );
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    family.as_str(),
                    trials.len(),
                    fmt_pct(same),
                    fmt_pct(fresh),
                    fmt_ms(mean_detect)
                );
            }
            md.push('\n');
            let path = out_dir.join("recovery_results.csv");
            write_text(&path, &csv)?;
            written.push(path);
        }
    }

    let md_path = out_dir.join("report.md");
    write_text(&md_path, &md)?;
    written.insert(0, md_path);
    Ok(written)
}

fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    std::fs::write(path, text).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })
}
