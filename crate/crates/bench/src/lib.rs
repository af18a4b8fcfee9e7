//! Deterministic benchmark harness: the task matrix, child-process
//! orchestration, oracles, statistics, JSON artifacts, reports, and the
//! structural verifier.

pub mod artifact;
pub mod harness;
pub mod oracle;
pub mod plan;
pub mod report;
pub mod stats;
pub mod verify;
