//! MCP-compatible tool server over newline-delimited JSON-RPC 2.0.
//!
//! The server answers `initialize`, `tools/list` and `tools/call`. Request
//! intake is ordered, handler execution may overlap, and response writes are
//! serialized whole-line, so pipelined requests can complete out of order.

use std::io::{BufRead, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::thread;

use serde_json::{json, Value};

use crate::envelope::{CallMeta, Envelope, ErrorClass};
use crate::mcp::wire::{
    response_err, response_ok, RpcRequest, INVALID_PARAMS, METHOD_NOT_FOUND, PARSE_ERROR,
    PROTOCOL_VERSION,
};

/// Tool metadata exposed through `tools/list`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    #[serde(rename = "inputSchema")]
    pub input_schema: Value,
}

pub type ToolHandler = Box<dyn Fn(&Value) -> Envelope + Send + Sync>;

/// Ordered set of tools plus the identity the server reports in
/// `initialize` and uses for synthesized internal-failure envelopes.
pub struct ToolRegistry {
    server_name: String,
    protocol: String,
    endpoint: String,
    tools: Vec<(ToolDescriptor, ToolHandler)>,
}

impl ToolRegistry {
    pub fn new(server_name: &str, protocol: &str, endpoint: &str) -> ToolRegistry {
        ToolRegistry {
            server_name: server_name.to_string(),
            protocol: protocol.to_string(),
            endpoint: endpoint.to_string(),
            tools: Vec::new(),
        }
    }

    /// Registers a tool. Panics on a duplicate or malformed descriptor;
    /// manifests are fixed at startup so this is a programming error.
    pub fn register(&mut self, name: &str, description: &str, input_schema: Value, handler: ToolHandler) {
        assert!(
            !name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'),
            "tool name `{name}` must match [a-z0-9_]+"
        );
        assert!(
            input_schema.get("type").and_then(Value::as_str) == Some("object"),
            "input schema for `{name}` must have top-level type \"object\""
        );
        assert!(
            self.tools.iter().all(|(d, _)| d.name != name),
            "duplicate tool name `{name}`"
        );
        self.tools.push((
            ToolDescriptor {
                name: name.to_string(),
                description: description.to_string(),
                input_schema,
            },
            handler,
        ));
    }

    pub fn descriptors(&self) -> Vec<ToolDescriptor> {
        self.tools.iter().map(|(d, _)| d.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    fn find(&self, name: &str) -> Option<&(ToolDescriptor, ToolHandler)> {
        self.tools.iter().find(|(d, _)| d.name == name)
    }

    /// Invokes a tool handler directly, with the same panic containment the
    /// stdio server applies.
    pub fn invoke(&self, name: &str, arguments: &Value) -> Option<Envelope> {
        let (_, handler) = self.find(name)?;
        Some(self.guarded_call(handler, arguments))
    }

    fn guarded_call(&self, handler: &ToolHandler, arguments: &Value) -> Envelope {
        match catch_unwind(AssertUnwindSafe(|| handler(arguments))) {
            Ok(env) => env,
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "tool handler panicked".to_string());
                Envelope::err(
                    ErrorClass::Internal,
                    format!("internal failure: {msg}"),
                    None,
                    CallMeta::new(&self.protocol, &self.endpoint),
                )
            }
        }
    }
}

/// Embeds an envelope in an MCP tool result: one text content block holding
/// the canonical serialization, with `isError` mirroring `!success`.
pub fn wrap_tool_result(env: &Envelope) -> Value {
    json!({
        "content": [{"type": "text", "text": env.to_canonical_json()}],
        "isError": !env.success,
    })
}

/// Serves the registry until `input` closes. One JSON-RPC message per line;
/// malformed lines get a parse-error response, unknown methods a
/// method-not-found response, and notifications no response at all.
pub fn serve<R, W>(registry: &ToolRegistry, input: R, output: W) -> std::io::Result<()>
where
    R: BufRead,
    W: Write + Send,
{
    assert!(!registry.is_empty(), "registry must contain at least one tool");
    let output = Mutex::new(output);

    thread::scope(|scope| {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let request: RpcRequest = match serde_json::from_str(&line) {
                Ok(req) => req,
                Err(e) => {
                    write_line(&output, &response_err(Value::Null, PARSE_ERROR, &format!("parse error: {e}")))?;
                    continue;
                }
            };
            if request.is_notification() {
                continue;
            }
            let out = &output;
            scope.spawn(move || {
                let id = request.id.clone().unwrap_or(Value::Null);
                let response = handle_request(registry, &request, id);
                let _ = write_line(out, &response);
            });
        }
        Ok(())
    })
}

fn handle_request(registry: &ToolRegistry, request: &RpcRequest, id: Value) -> Value {
    match request.method.as_str() {
        "initialize" => response_ok(
            id,
            json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {"tools": {}},
                "serverInfo": {"name": registry.server_name, "version": env!("CARGO_PKG_VERSION")},
            }),
        ),
        "tools/list" => {
            let tools: Vec<Value> = registry
                .descriptors()
                .iter()
                .map(|d| serde_json::to_value(d).expect("descriptor serializes"))
                .collect();
            response_ok(id, json!({"tools": tools}))
        }
        "tools/call" => {
            let params = request.params.as_ref().cloned().unwrap_or(Value::Null);
            let name = params.get("name").and_then(Value::as_str).unwrap_or_default();
            let arguments = params.get("arguments").cloned().unwrap_or_else(|| json!({}));
            match registry.find(name) {
                Some((_, handler)) => {
                    let env = registry.guarded_call(handler, &arguments);
                    response_ok(id, wrap_tool_result(&env))
                }
                None => response_err(id, INVALID_PARAMS, &format!("unknown tool: {name}")),
            }
        }
        other => response_err(id, METHOD_NOT_FOUND, &format!("method not found: {other}")),
    }
}

fn write_line<W: Write>(output: &Mutex<W>, message: &Value) -> std::io::Result<()> {
    let mut out = output.lock().expect("output lock poisoned");
    serde_json::to_writer(&mut *out, message)?;
    out.write_all(b"\n")?;
    out.flush()
}
