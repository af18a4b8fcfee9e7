//! The shared `{success, data, error, meta}` response envelope.
//!
//! Every adapter tool returns this envelope and every benchmark oracle
//! inspects it. The serialized form always carries the four top-level keys;
//! the side not selected by `success` is an explicit `null`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Closed taxonomy of failure classes shared by all adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    InvalidInput,
    RangeOverflow,
    IllegalAddress,
    TypeMismatch,
    ProtocolError,
    EndpointUnreachable,
    WritesDisabled,
    Timeout,
    Internal,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 9] = [
        ErrorClass::InvalidInput,
        ErrorClass::RangeOverflow,
        ErrorClass::IllegalAddress,
        ErrorClass::TypeMismatch,
        ErrorClass::ProtocolError,
        ErrorClass::EndpointUnreachable,
        ErrorClass::WritesDisabled,
        ErrorClass::Timeout,
        ErrorClass::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::InvalidInput => "invalid_input",
            ErrorClass::RangeOverflow => "range_overflow",
            ErrorClass::IllegalAddress => "illegal_address",
            ErrorClass::TypeMismatch => "type_mismatch",
            ErrorClass::ProtocolError => "protocol_error",
            ErrorClass::EndpointUnreachable => "endpoint_unreachable",
            ErrorClass::WritesDisabled => "writes_disabled",
            ErrorClass::Timeout => "timeout",
            ErrorClass::Internal => "internal",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorClass> {
        ErrorClass::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Structured failure reason carried on the `error` side of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub class: ErrorClass,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

/// Call metadata recorded by the adapter that produced the envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallMeta {
    /// Adapter-side wall-clock latency in milliseconds.
    pub latency_ms: f64,
    /// URI-style endpoint the call targeted, e.g. `modbus://127.0.0.1:1502`.
    pub endpoint: String,
    /// Connection attempts used, including transparent reconnects (>= 1).
    pub attempts: u32,
    /// Protocol family label: `modbus`, `mqtt` or `ua`.
    pub protocol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<BTreeMap<String, String>>,
}

impl CallMeta {
    pub fn new(protocol: &str, endpoint: &str) -> CallMeta {
        CallMeta {
            latency_ms: 0.0,
            endpoint: endpoint.to_string(),
            attempts: 1,
            protocol: protocol.to_string(),
            trace: None,
        }
    }

    pub fn with_latency(mut self, latency_ms: f64) -> CallMeta {
        self.latency_ms = latency_ms;
        self
    }

    pub fn with_attempts(mut self, attempts: u32) -> CallMeta {
        self.attempts = attempts;
        self
    }
}

/// The uniform tool-result contract: exactly one of `data`/`error` is
/// populated, selected by `success`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub success: bool,
    pub data: Option<Value>,
    pub error: Option<ErrorInfo>,
    pub meta: CallMeta,
}

impl Envelope {
    pub fn ok(data: Value, meta: CallMeta) -> Envelope {
        Envelope { success: true, data: Some(data), error: None, meta }
    }

    pub fn err(class: ErrorClass, message: impl Into<String>, details: Option<Value>, meta: CallMeta) -> Envelope {
        let message = message.into();
        debug_assert!(!message.is_empty(), "error envelope requires a message");
        Envelope {
            success: false,
            data: None,
            error: Some(ErrorInfo { class, message, details }),
            meta,
        }
    }

    /// Canonical UTF-8 JSON with top-level key order success, data, error,
    /// meta. Nested object keys serialize in sorted order, so
    /// serialize → parse → serialize is byte-stable.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Envelope, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn error_class(&self) -> Option<ErrorClass> {
        self.error.as_ref().map(|e| e.class)
    }
}

/// Checks a parsed value against every envelope invariant and returns the
/// full list of violations; an empty list means the value is a valid
/// envelope.
pub fn validate_envelope(raw: &Value) -> Vec<String> {
    let mut violations = Vec::new();
    let obj = match raw.as_object() {
        Some(o) => o,
        None => return vec!["envelope is not a JSON object".to_string()],
    };

    for key in ["success", "data", "error", "meta"] {
        if !obj.contains_key(key) {
            violations.push(format!("missing top-level key `{key}`"));
        }
    }

    let success = match obj.get("success") {
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => {
            violations.push("`success` is not a boolean".to_string());
            None
        }
        None => None,
    };

    let data_present = obj.get("data").is_some_and(|v| !v.is_null());
    let error_present = obj.get("error").is_some_and(|v| !v.is_null());

    match success {
        Some(true) => {
            if error_present {
                violations.push("error present on success".to_string());
            }
            if !data_present {
                violations.push("data absent on success".to_string());
            }
        }
        Some(false) => {
            if data_present {
                violations.push("data present on failure".to_string());
            }
            if !error_present {
                violations.push("error absent on failure".to_string());
            }
        }
        None => {}
    }

    if error_present {
        let err = &obj["error"];
        match err.get("class").and_then(Value::as_str) {
            Some(class) => {
                if ErrorClass::parse(class).is_none() {
                    violations.push("unknown error class".to_string());
                }
            }
            None => violations.push("error.class missing or not a string".to_string()),
        }
        match err.get("message").and_then(Value::as_str) {
            Some("") => violations.push("error.message is empty".to_string()),
            Some(_) => {}
            None => violations.push("error.message missing or not a string".to_string()),
        }
    }

    if let Some(meta) = obj.get("meta") {
        match meta.as_object() {
            Some(m) => {
                match m.get("latency_ms").and_then(Value::as_f64) {
                    Some(l) if l >= 0.0 => {}
                    Some(_) => violations.push("meta.latency_ms is negative".to_string()),
                    None => violations.push("meta.latency_ms missing or not a number".to_string()),
                }
                match m.get("attempts").and_then(Value::as_u64) {
                    Some(a) if a >= 1 => {}
                    Some(_) => violations.push("meta.attempts is zero".to_string()),
                    None => violations.push("meta.attempts missing or not a positive integer".to_string()),
                }
                if m.get("endpoint").and_then(Value::as_str).is_none() {
                    violations.push("meta.endpoint missing or not a string".to_string());
                }
                if m.get("protocol").and_then(Value::as_str).is_none() {
                    violations.push("meta.protocol missing or not a string".to_string());
                }
            }
            None => violations.push("meta is not an object".to_string()),
        }
    }

    violations
}
