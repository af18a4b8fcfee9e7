//! The node-model MCP adapter: 7 tools over one connection, probing the
//! status node before each operation.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use otbridge_core::envelope::{CallMeta, Envelope, ErrorClass};
use otbridge_core::mcp::server::{serve, ToolRegistry};
use serde_json::{json, Value};

use crate::client::{LivenessConfig, UaClient, UaError};
use crate::mock::ROOT_NODE;
use crate::node::NodeId;
use crate::wire::error_class;

pub const TOOL_NAMES: [&str; 7] = [
    "server_status",
    "read_node",
    "write_node",
    "browse",
    "read_nodes",
    "list_variables",
    "call_method",
];

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    pub host: String,
    pub port: u16,
}

impl AdapterConfig {
    /// UA_HOST / UA_PORT, or UA_ENDPOINT as `opc.tcp://host:port`.
    pub fn from_env() -> AdapterConfig {
        if let Ok(endpoint) = std::env::var("UA_ENDPOINT") {
            if let Some((host, port)) = parse_endpoint_uri(&endpoint) {
                return AdapterConfig { host, port };
            }
        }
        AdapterConfig {
            host: std::env::var("UA_HOST").unwrap_or_else(|_| "127.0.0.1".to_string()),
            port: std::env::var("UA_PORT").ok().and_then(|p| p.parse().ok()).unwrap_or(4840),
        }
    }
}

/// Accepts `opc.tcp://host:port` (and plain `host:port`).
pub fn parse_endpoint_uri(uri: &str) -> Option<(String, u16)> {
    let rest = uri.strip_prefix("opc.tcp://").unwrap_or(uri);
    let (host, port) = rest.rsplit_once(':')?;
    Some((host.to_string(), port.parse().ok()?))
}

struct ToolFail {
    class: ErrorClass,
    message: String,
    details: Option<Value>,
}

type ToolOutput = Result<Value, ToolFail>;

struct Ctx {
    client: Mutex<UaClient>,
    endpoint: String,
}

impl Ctx {
    fn meta(&self, started: Instant, attempts: u32) -> CallMeta {
        CallMeta::new("ua", &self.endpoint)
            .with_latency(started.elapsed().as_secs_f64() * 1e3)
            .with_attempts(attempts)
    }

    fn map_error(&self, error: UaError) -> ToolFail {
        match error {
            UaError::Unreachable(detail) => ToolFail {
                class: ErrorClass::EndpointUnreachable,
                message: format!("cannot reach {detail}"),
                details: None,
            },
            UaError::Server { class, message } => match class.as_str() {
                error_class::ILLEGAL_ADDRESS => {
                    ToolFail { class: ErrorClass::IllegalAddress, message, details: None }
                }
                // finer server-side categories ride in the details while the
                // envelope class stays protocol_error
                error_class::TYPE_MISMATCH => ToolFail {
                    class: ErrorClass::ProtocolError,
                    message,
                    details: Some(json!({"reason": "type_mismatch"})),
                },
                error_class::ACCESS_DENIED => ToolFail {
                    class: ErrorClass::ProtocolError,
                    message,
                    details: Some(json!({"reason": "access_denied"})),
                },
                error_class::INVALID_INPUT => {
                    ToolFail { class: ErrorClass::InvalidInput, message, details: None }
                }
                other => ToolFail {
                    class: ErrorClass::ProtocolError,
                    message,
                    details: Some(json!({"reason": other})),
                },
            },
            UaError::Protocol(detail) => {
                ToolFail { class: ErrorClass::ProtocolError, message: detail, details: None }
            }
        }
    }
}

fn arg_node_id(args: &Value, key: &str) -> Result<NodeId, ToolFail> {
    let raw = args.get(key).and_then(Value::as_str).ok_or_else(|| ToolFail {
        class: ErrorClass::InvalidInput,
        message: format!("missing or non-string argument `{key}`"),
        details: None,
    })?;
    NodeId::parse(raw).map_err(|e| ToolFail {
        class: ErrorClass::InvalidInput,
        message: e,
        details: Some(json!({key: raw})),
    })
}

fn schema(properties: Value, required: &[&str]) -> Value {
    json!({"type": "object", "properties": properties, "required": required})
}

/// Tracks the maximum connection attempts any wire operation in a tool
/// call needed; a 2 here means a transparent reconnect happened.
struct OpRunner<'a> {
    ctx: &'a Ctx,
    client: &'a mut UaClient,
    attempts: u32,
}

impl OpRunner<'_> {
    /// One probed wire operation; the liveness probe runs before every
    /// operation, not once per tool call.
    fn op(&mut self, op: &str, params: Value) -> Result<Value, ToolFail> {
        match self.client.op(op, params) {
            Ok((value, attempts)) => {
                self.attempts = self.attempts.max(attempts);
                Ok(value)
            }
            Err(e) => {
                if matches!(e, UaError::Unreachable(_)) {
                    self.attempts = self.attempts.max(2);
                }
                Err(self.ctx.map_error(e))
            }
        }
    }
}

fn register_tool(
    registry: &mut ToolRegistry,
    ctx: &Arc<Ctx>,
    name: &str,
    description: &str,
    input_schema: Value,
    body: impl Fn(&Ctx, &mut OpRunner, &Value) -> ToolOutput + Send + Sync + 'static,
) {
    let ctx = Arc::clone(ctx);
    registry.register(
        name,
        description,
        input_schema,
        Box::new(move |args| {
            let started = Instant::now();
            // every wire operation of this tool call runs atomically with
            // respect to other tool calls
            let (result, attempts) = {
                let mut client = ctx.client.lock().expect("client lock");
                let mut runner = OpRunner { ctx: &ctx, client: &mut client, attempts: 1 };
                let result = body(&ctx, &mut runner, args);
                (result, runner.attempts)
            };
            match result {
                Ok(data) => Envelope::ok(data, ctx.meta(started, attempts)),
                Err(fail) => {
                    Envelope::err(fail.class, fail.message, fail.details, ctx.meta(started, attempts))
                }
            }
        }),
    );
}

/// Builds the 7-tool manifest backed by one probed connection.
pub fn build_registry(config: &AdapterConfig) -> ToolRegistry {
    let endpoint = format!("ua://{}:{}", config.host, config.port);
    let ctx = Arc::new(Ctx {
        client: Mutex::new(UaClient::new(&config.host, config.port, LivenessConfig::default())),
        endpoint: endpoint.clone(),
    });
    let mut registry = ToolRegistry::new("otbridge-ua", "ua", &endpoint);

    register_tool(
        &mut registry,
        &ctx,
        "server_status",
        "Read the server state, uptime, and simulation tick.",
        schema(json!({}), &[]),
        |ctx, runner, _args| {
            let mut status = runner.op("status", json!({}))?;
            status["endpoint"] = json!(ctx.endpoint);
            Ok(status)
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "read_node",
        "Read one variable node by id (ns=2;s=name or ns=2;i=number).",
        schema(json!({"node": {"type": "string"}}), &["node"]),
        |_ctx, runner, args| {
            let node = arg_node_id(args, "node")?;
            runner.op("read", json!({"node": node.to_string()}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_node",
        "Write a variable node; server-side access and datatype checks apply.",
        schema(
            json!({"node": {"type": "string"}, "value": {}, "datatype": {"type": "string"}}),
            &["node", "value"],
        ),
        |_ctx, runner, args| {
            let node = arg_node_id(args, "node")?;
            let value = args.get("value").cloned().unwrap_or(Value::Null);
            runner.op("write", json!({"node": node.to_string(), "value": value}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "browse",
        "List the children of a node; defaults to the root folder.",
        schema(json!({"node": {"type": "string"}}), &[]),
        |_ctx, runner, args| {
            let node = if args.get("node").is_some() {
                arg_node_id(args, "node")?
            } else {
                NodeId::parse(ROOT_NODE).expect("root id parses")
            };
            runner.op("browse", json!({"node": node.to_string()}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "read_nodes",
        "Read several nodes in one call, values in request order.",
        schema(
            json!({"nodes": {"type": "array", "items": {"type": "string"}}}),
            &["nodes"],
        ),
        |_ctx, runner, args| {
            let raw = args.get("nodes").and_then(Value::as_array).ok_or_else(|| ToolFail {
                class: ErrorClass::InvalidInput,
                message: "missing or non-array argument `nodes`".to_string(),
                details: None,
            })?;
            let mut nodes = Vec::with_capacity(raw.len());
            for item in raw {
                let text = item.as_str().ok_or_else(|| ToolFail {
                    class: ErrorClass::InvalidInput,
                    message: "nodes must all be strings".to_string(),
                    details: None,
                })?;
                let node = NodeId::parse(text).map_err(|e| ToolFail {
                    class: ErrorClass::InvalidInput,
                    message: e,
                    details: Some(json!({"node": text})),
                })?;
                nodes.push(node.to_string());
            }
            let mut result = runner.op("read_many", json!({"nodes": nodes}))?;
            let count = result["values"].as_array().map(Vec::len).unwrap_or(0);
            result["count"] = json!(count);
            Ok(result)
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "list_variables",
        "Enumerate every variable with its current value by recursive browse from the root (or a given root).",
        schema(json!({"root": {"type": "string"}}), &[]),
        |_ctx, runner, args| {
            let root = if args.get("root").is_some() {
                arg_node_id(args, "root")?
            } else {
                NodeId::parse(ROOT_NODE).expect("root id parses")
            };
            // client-driven traversal: browse every node depth-first and
            // read each variable individually, each operation probed
            let mut variables = Vec::new();
            let mut stack = vec![root.to_string()];
            while let Some(node) = stack.pop() {
                let browsed = runner.op("browse", json!({"node": node}))?;
                let children = browsed["children"].as_array().cloned().unwrap_or_default();
                for child in children.iter().rev() {
                    stack.push(child["node_id"].as_str().unwrap_or_default().to_string());
                }
                for child in &children {
                    if child["node_class"] == "variable" {
                        let child_id = child["node_id"].as_str().unwrap_or_default().to_string();
                        let read = runner.op("read", json!({"node": &child_id}))?;
                        variables.push(json!({
                            "node_id": child_id,
                            "browse_name": child["browse_name"],
                            "datatype": read["datatype"],
                            "value": read["value"],
                        }));
                    }
                }
            }
            Ok(json!({"count": variables.len(), "variables": variables}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "call_method",
        "Invoke a method node with a JSON argument object.",
        schema(json!({"method": {"type": "string"}, "args": {"type": "object"}}), &["method"]),
        |_ctx, runner, args| {
            let method = arg_node_id(args, "method")?;
            let call_args = args.get("args").cloned().unwrap_or_else(|| json!({}));
            runner.op("call", json!({"method": method.to_string(), "args": call_args}))
        },
    );

    debug_assert_eq!(registry.len(), TOOL_NAMES.len());
    registry
}

/// Runs the adapter as a stdio MCP server until stdin closes.
pub fn serve_stdio(config: &AdapterConfig) -> std::io::Result<()> {
    let registry = build_registry(config);
    serve(&registry, std::io::BufReader::new(std::io::stdin()), std::io::stdout())
}
