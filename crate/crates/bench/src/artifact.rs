//! JSON artifacts: one file per suite holding raw run records, plus a
//! manifest. All tables are derived from these files alone.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::plan::{Family, SessionKey, Suite};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    pub session: SessionKey,
    pub tool: String,
    pub args: Value,
    /// The raw response envelope exactly as the adapter returned it.
    pub envelope: Value,
    /// Wall-clock latency observed by the harness across the full stdio
    /// round trip; this is the number the tables report.
    pub harness_latency_ms: f64,
    /// Offsets from the start of the run, for in-flight overlap checks.
    pub started_offset_ms: f64,
    pub ended_offset_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_group: Option<u32>,
    /// Whether this call matched the plan's expectation, as judged by the
    /// oracle.
    pub expected_outcome_met: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: String,
    pub at_offset_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub suite: Suite,
    pub family: Family,
    pub repetition: u32,
    pub started_at_epoch_ms: u64,
    pub calls: Vec<CallRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventRecord>,
    /// Sum over sequential calls, max over each parallel group.
    pub task_latency_ms: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub task_id: String,
    pub family: Family,
    pub trial: u32,
    pub baseline_ok: bool,
    /// Latency of the failing probe while the endpoint was down.
    pub detect_latency_ms: f64,
    pub same_session_recovered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub same_session_latency_ms: Option<f64>,
    pub fresh_session_recovered: bool,
    /// Offsets (ms from trial start) of the phase boundaries.
    pub phases: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteArtifact {
    pub suite: Suite,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryArtifact {
    pub suite: Suite,
    pub records: Vec<RecoveryRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub created_at_epoch_ms: u64,
    pub version: String,
    pub config: Value,
    /// Records written per suite file.
    pub counts: BTreeMap<String, usize>,
    pub total_runs: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("i/o failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed artifact {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    std::fs::write(path, text).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = std::fs::read_to_string(path).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ArtifactError::Parse {
        path: path.display().to_string(),
        source,
    })
}

pub fn suite_file_name(suite: Suite) -> String {
    format!("{}.json", suite.as_str())
}

pub fn epoch_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
