//! Task oracles: pure functions of the recorded calls, so re-evaluating a
//! stored artifact reproduces the same pass bits.

use otbridge_core::envelope::{validate_envelope, ErrorClass};
use serde_json::Value;

use crate::artifact::RunRecord;
use crate::plan::{CallExpect, OracleKind, TaskSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub failure_reason: Option<String>,
    /// Per-call expectation flags, in recorded call order.
    pub per_call: Vec<bool>,
}

fn envelope_success(envelope: &Value) -> bool {
    envelope.get("success").and_then(Value::as_bool).unwrap_or(false)
}

fn envelope_class(envelope: &Value) -> Option<ErrorClass> {
    envelope
        .pointer("/error/class")
        .and_then(Value::as_str)
        .and_then(ErrorClass::parse)
}

fn call_meets(expect: CallExpect, envelope: &Value) -> Result<(), String> {
    if !validate_envelope(envelope).is_empty() {
        return Err("malformed envelope".to_string());
    }
    match expect {
        CallExpect::Success => {
            if envelope_success(envelope) {
                Ok(())
            } else {
                Err(format!(
                    "expected success, got {} ({})",
                    envelope_class(envelope).map(|c| c.as_str()).unwrap_or("?"),
                    envelope.pointer("/error/message").and_then(Value::as_str).unwrap_or("")
                ))
            }
        }
        CallExpect::ErrorClass(class) => {
            if envelope_success(envelope) {
                return Err(format!("expected a {class} failure, call silently succeeded"));
            }
            match envelope_class(envelope) {
                Some(actual) if actual == class => Ok(()),
                Some(actual) => Err(format!("expected class {class}, got {actual}")),
                None => Err("failure carries no recognizable class".to_string()),
            }
        }
        CallExpect::StructuredFailure => {
            if envelope_success(envelope) {
                Err("expected a structured failure, call succeeded".to_string())
            } else if envelope_class(envelope).is_none() {
                Err("failure carries no recognizable class".to_string())
            } else {
                Ok(())
            }
        }
    }
}

fn call_data<'a>(record: &'a RunRecord, step: usize) -> Option<&'a Value> {
    record.calls.get(step).and_then(|c| c.envelope.get("data"))
}

fn postcondition(task: &TaskSpec, record: &RunRecord) -> Result<(), String> {
    match &task.oracle {
        OracleKind::AllExpected => Ok(()),
        OracleKind::WriteReadback { write_step, read_step } => {
            let written = record
                .calls
                .get(*write_step)
                .and_then(|c| c.args.get("value"))
                .and_then(Value::as_i64)
                .ok_or("write call has no integer value argument")?;
            let read = call_data(record, *read_step)
                .and_then(|d| d.pointer("/values/0"))
                .and_then(Value::as_i64)
                .ok_or("read call returned no values")?;
            if read == written {
                Ok(())
            } else {
                Err(format!("readback {read} does not match written {written}"))
            }
        }
        OracleKind::NodeReadback { write_step, read_step } => {
            let written = record
                .calls
                .get(*write_step)
                .and_then(|c| c.args.get("value"))
                .ok_or("write call has no value argument")?;
            let read = call_data(record, *read_step)
                .and_then(|d| d.get("value"))
                .ok_or("read call returned no value")?;
            if read == written {
                Ok(())
            } else {
                Err(format!("readback {read} does not match written {written}"))
            }
        }
        OracleKind::ArrayLen { step, pointer, len } => {
            let array = call_data(record, *step)
                .and_then(|d| d.pointer(pointer))
                .and_then(Value::as_array)
                .ok_or_else(|| format!("no array at {pointer}"))?;
            if array.len() == *len {
                Ok(())
            } else {
                Err(format!("expected {len} entries at {pointer}, got {}", array.len()))
            }
        }
        OracleKind::MinCount { step, pointer, min } => {
            let count = call_data(record, *step)
                .and_then(|d| d.pointer(pointer))
                .and_then(Value::as_u64)
                .ok_or_else(|| format!("no count at {pointer}"))?;
            if count >= *min {
                Ok(())
            } else {
                Err(format!("count {count} below the minimum {min}"))
            }
        }
        OracleKind::FieldEquals { step, pointer, value } => {
            let actual = call_data(record, *step)
                .and_then(|d| d.pointer(pointer))
                .ok_or_else(|| format!("no field at {pointer}"))?;
            if actual == value {
                Ok(())
            } else {
                Err(format!("field {pointer} is {actual}, expected {value}"))
            }
        }
        OracleKind::GrantedQos { step } => {
            let granted = call_data(record, *step)
                .and_then(|d| d.get("granted"))
                .and_then(Value::as_array)
                .ok_or("subscribe returned no granted list")?;
            if granted.is_empty() {
                return Err("granted list is empty".to_string());
            }
            if granted.iter().all(|g| g.as_u64().is_some_and(|q| q <= 1)) {
                Ok(())
            } else {
                Err(format!("broker granted an unexpected qos: {granted:?}"))
            }
        }
        OracleKind::DdataTopic { step, device } => {
            let topic = call_data(record, *step)
                .and_then(|d| d.get("topic"))
                .and_then(Value::as_str)
                .ok_or("publish returned no topic")?;
            let well_formed = topic.starts_with("spBv1.0/")
                && topic.contains("/DDATA/")
                && topic.ends_with(&format!("/{device}"));
            if well_formed {
                Ok(())
            } else {
                Err(format!("unexpected DDATA topic `{topic}`"))
            }
        }
    }
}

/// Judges one recorded run against the plan. Pass requires every call to
/// match its expectation (with a well-formed envelope) and the task
/// postcondition to hold.
pub fn evaluate(task: &TaskSpec, record: &RunRecord) -> Verdict {
    let expects: Vec<CallExpect> = task.call_steps().iter().map(|c| c.expect).collect();
    let mut per_call = Vec::with_capacity(record.calls.len());
    let mut failure_reason: Option<String> = None;

    if record.calls.len() != expects.len() {
        return Verdict {
            pass: false,
            failure_reason: Some(format!(
                "recorded {} calls, plan has {}",
                record.calls.len(),
                expects.len()
            )),
            per_call: vec![false; record.calls.len()],
        };
    }

    for (index, (call, expect)) in record.calls.iter().zip(&expects).enumerate() {
        match call_meets(*expect, &call.envelope) {
            Ok(()) => per_call.push(true),
            Err(reason) => {
                per_call.push(false);
                failure_reason.get_or_insert(format!("call {index} ({}): {reason}", call.tool));
            }
        }
    }

    if failure_reason.is_none() {
        if let Err(reason) = postcondition(task, record) {
            failure_reason = Some(reason);
        }
    }

    Verdict { pass: failure_reason.is_none(), failure_reason, per_call }
}
