//! Wire format: newline-delimited JSON request/response over TCP.
//!
//! Request: `{id, op, params}` with op one of status | read | write |
//! browse | read_many | list | call. Response: `{id, ok, result}` or
//! `{id, ok: false, error: {class, message}}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    pub op: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireError {
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl WireResponse {
    pub fn ok(id: u64, result: Value) -> WireResponse {
        WireResponse { id, ok: true, result: Some(result), error: None }
    }

    pub fn err(id: u64, class: &str, message: impl Into<String>) -> WireResponse {
        WireResponse {
            id,
            ok: false,
            result: None,
            error: Some(WireError { class: class.to_string(), message: message.into() }),
        }
    }
}

/// Wire-level error classes the server can return.
pub mod error_class {
    pub const INVALID_INPUT: &str = "invalid_input";
    pub const ILLEGAL_ADDRESS: &str = "illegal_address";
    pub const TYPE_MISMATCH: &str = "type_mismatch";
    pub const ACCESS_DENIED: &str = "access_denied";
    pub const INTERNAL: &str = "internal";
}
