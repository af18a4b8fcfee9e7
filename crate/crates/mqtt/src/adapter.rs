//! The MQTT MCP adapter: 15 tools covering broker inspection, pub/sub, the
//! message store, and the Sparkplug B publish flows.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use otbridge_core::envelope::{CallMeta, Envelope, ErrorClass};
use otbridge_core::mcp::server::{serve, ToolRegistry};
use serde_json::{json, Value};

use crate::client::{ClientOpError, MqttClient, ReconnectPolicy};
use crate::sparkplug::{
    encode_payload, now_epoch_ms, MessageType, Metric, MetricValue, SparkplugSession,
    DEFAULT_EDGE_NODE_ID, DEFAULT_GROUP_ID,
};
use crate::topic::{validate_publish, validate_subscribe};

pub const TOOL_NAMES: [&str; 15] = [
    "broker_info",
    "connection_status",
    "subscribe",
    "unsubscribe",
    "list_subscriptions",
    "publish",
    "get_messages",
    "clear_messages",
    "sp_publish_nbirth",
    "sp_publish_ndeath",
    "sp_publish_dbirth",
    "sp_publish_ddeath",
    "sp_publish_ddata",
    "sp_publish_ncmd",
    "sp_publish_dcmd",
];

const ACK_TIMEOUT_MS: u64 = 2000;

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    pub host: String,
    pub port: u16,
    pub group_id: String,
    pub edge_node_id: String,
    pub policy: ReconnectPolicy,
}

impl AdapterConfig {
    /// MQTT_HOST / MQTT_PORT / SPARKPLUG_GROUP_ID / SPARKPLUG_EDGE_NODE_ID /
    /// MQTT_RECONNECT_INITIAL_S.
    pub fn from_env() -> AdapterConfig {
        AdapterConfig {
            host: std::env::var("MQTT_HOST").unwrap_or_else(|_| "127.0.0.1".to_string()),
            port: std::env::var("MQTT_PORT").ok().and_then(|p| p.parse().ok()).unwrap_or(1883),
            group_id: std::env::var("SPARKPLUG_GROUP_ID").unwrap_or_else(|_| DEFAULT_GROUP_ID.to_string()),
            edge_node_id: std::env::var("SPARKPLUG_EDGE_NODE_ID")
                .unwrap_or_else(|_| DEFAULT_EDGE_NODE_ID.to_string()),
            policy: ReconnectPolicy::from_env(),
        }
    }
}

struct ToolFail {
    class: ErrorClass,
    message: String,
    details: Option<Value>,
}

impl ToolFail {
    fn invalid(message: impl Into<String>, details: Option<Value>) -> ToolFail {
        ToolFail { class: ErrorClass::InvalidInput, message: message.into(), details }
    }
}

type ToolOutput = Result<Value, ToolFail>;

struct Ctx {
    client: MqttClient,
    session: Mutex<SparkplugSession>,
    endpoint: String,
    policy: ReconnectPolicy,
}

impl Ctx {
    fn meta(&self, started: Instant) -> CallMeta {
        CallMeta::new("mqtt", &self.endpoint).with_latency(started.elapsed().as_secs_f64() * 1e3)
    }

    fn map_client_error(&self, error: ClientOpError) -> ToolFail {
        match error {
            ClientOpError::Disconnected => ToolFail {
                class: ErrorClass::EndpointUnreachable,
                message: format!("not connected to the broker at {}", self.endpoint),
                details: None,
            },
            ClientOpError::AckTimeout(ms) => ToolFail {
                class: ErrorClass::Timeout,
                message: format!("broker did not acknowledge within {ms} ms"),
                details: None,
            },
            ClientOpError::Io(detail) => ToolFail {
                class: ErrorClass::EndpointUnreachable,
                message: format!("connection to {} failed: {detail}", self.endpoint),
                details: None,
            },
        }
    }

    /// Publishes a Sparkplug payload at QoS 0 on the rendered topic.
    fn publish_sp(
        &self,
        message_type: MessageType,
        device: Option<&str>,
        metrics: Vec<Metric>,
    ) -> ToolOutput {
        let mut session = self.session.lock().expect("session lock");
        let now = now_epoch_ms();
        // an edge-node session starts with a birth certificate; if no
        // explicit NBIRTH was published yet, emit one first
        if !session.is_initialized() && message_type != MessageType::Nbirth {
            let (topic, payload) = session.nbirth(Vec::new(), now);
            let rendered = topic.render().map_err(|e| ToolFail::invalid(e.to_string(), None))?;
            self.client
                .publish(&rendered, &encode_payload(&payload), 0, false, ACK_TIMEOUT_MS)
                .map_err(|e| self.map_client_error(e))?;
        }
        let (topic, payload) = match message_type {
            MessageType::Nbirth => session.nbirth(metrics, now),
            MessageType::Ndeath => session.ndeath(now),
            other => session
                .sequenced(other, device, metrics, now)
                .map_err(|e| ToolFail::invalid(e.to_string(), None))?,
        };
        let rendered = topic.render().map_err(|e| ToolFail::invalid(e.to_string(), None))?;
        let bytes = encode_payload(&payload);
        self.client
            .publish(&rendered, &bytes, 0, false, ACK_TIMEOUT_MS)
            .map_err(|e| self.map_client_error(e))?;
        Ok(json!({
            "topic": rendered,
            "seq": payload.seq,
            "metric_count": payload.metrics.len(),
            "bytes": bytes.len(),
        }))
    }
}

fn arg_str<'a>(args: &'a Value, key: &str) -> Result<&'a str, ToolFail> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ToolFail::invalid(format!("missing or non-string argument `{key}`"), None))
}

fn arg_qos(args: &Value) -> i64 {
    args.get("qos").and_then(Value::as_i64).unwrap_or(0)
}

/// Parses a metric list: `[{name, value, datatype?}]`. Without an explicit
/// datatype, JSON numbers become double (or int64 when integral), booleans
/// boolean, strings string.
fn parse_metrics(args: &Value) -> Result<Vec<Metric>, ToolFail> {
    let raw = match args.get("metrics") {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(ToolFail::invalid("`metrics` must be an array", None)),
    };
    let now = now_epoch_ms();
    let mut metrics = Vec::with_capacity(raw.len());
    for item in raw {
        let name = arg_str(item, "name")?;
        let value = item
            .get("value")
            .ok_or_else(|| ToolFail::invalid(format!("metric `{name}` is missing `value`"), None))?;
        let datatype = item.get("datatype").and_then(Value::as_str);
        let metric_value = coerce_metric_value(name, value, datatype)?;
        metrics.push(Metric::new(name, now, metric_value));
    }
    Ok(metrics)
}

fn coerce_metric_value(name: &str, value: &Value, datatype: Option<&str>) -> Result<MetricValue, ToolFail> {
    let mismatch = |expected: &str| {
        ToolFail::invalid(
            format!("metric `{name}` value does not match datatype {expected}"),
            Some(json!({"metric": name, "datatype": expected})),
        )
    };
    match datatype {
        Some("int32") => value
            .as_i64()
            .filter(|v| i32::try_from(*v).is_ok())
            .map(|v| MetricValue::Int32(v as i32))
            .ok_or_else(|| mismatch("int32")),
        Some("int64") => value.as_i64().map(MetricValue::Int64).ok_or_else(|| mismatch("int64")),
        Some("float") => value.as_f64().map(|v| MetricValue::Float(v as f32)).ok_or_else(|| mismatch("float")),
        Some("double") => value.as_f64().map(MetricValue::Double).ok_or_else(|| mismatch("double")),
        Some("boolean") => value.as_bool().map(MetricValue::Boolean).ok_or_else(|| mismatch("boolean")),
        Some("string") => value
            .as_str()
            .map(|v| MetricValue::String(v.to_string()))
            .ok_or_else(|| mismatch("string")),
        Some(other) => Err(ToolFail::invalid(
            format!("metric `{name}` has unknown datatype `{other}`"),
            Some(json!({"metric": name, "datatype": other})),
        )),
        None => match value {
            Value::Bool(b) => Ok(MetricValue::Boolean(*b)),
            Value::String(s) => Ok(MetricValue::String(s.clone())),
            Value::Number(n) if n.is_i64() => Ok(MetricValue::Int64(n.as_i64().unwrap())),
            Value::Number(n) => Ok(MetricValue::Double(n.as_f64().unwrap_or(0.0))),
            _ => Err(mismatch("a scalar")),
        },
    }
}

fn schema(properties: Value, required: &[&str]) -> Value {
    json!({"type": "object", "properties": properties, "required": required})
}

fn register_tool(
    registry: &mut ToolRegistry,
    ctx: &Arc<Ctx>,
    name: &str,
    description: &str,
    input_schema: Value,
    body: impl Fn(&Ctx, &Value) -> ToolOutput + Send + Sync + 'static,
) {
    let ctx = Arc::clone(ctx);
    registry.register(
        name,
        description,
        input_schema,
        Box::new(move |args| {
            let started = Instant::now();
            match body(&ctx, args) {
                Ok(data) => Envelope::ok(data, ctx.meta(started)),
                Err(fail) => Envelope::err(fail.class, fail.message, fail.details, ctx.meta(started)),
            }
        }),
    );
}

fn metrics_schema() -> Value {
    json!({
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "name": {"type": "string"},
                "value": {},
                "datatype": {"type": "string", "enum": ["int32", "int64", "float", "double", "boolean", "string"]}
            },
            "required": ["name", "value"]
        }
    })
}

/// Builds the 15-tool manifest backed by one broker connection.
pub fn build_registry(config: &AdapterConfig) -> ToolRegistry {
    let endpoint = format!("mqtt://{}:{}", config.host, config.port);
    let client = MqttClient::connect(
        &config.host,
        config.port,
        &format!("otbridge-mqtt-{}", std::process::id()),
        config.policy,
    );
    let ctx = Arc::new(Ctx {
        client,
        session: Mutex::new(SparkplugSession::new(&config.group_id, &config.edge_node_id)),
        endpoint: endpoint.clone(),
        policy: config.policy,
    });
    let mut registry = ToolRegistry::new("otbridge-mqtt", "mqtt", &endpoint);

    register_tool(
        &mut registry,
        &ctx,
        "broker_info",
        "Inspect broker connectivity: connection state, CONNACK code, and subscription count.",
        schema(json!({}), &[]),
        |ctx, _args| {
            Ok(json!({
                "connected": ctx.client.is_connected(),
                "endpoint": ctx.endpoint,
                "broker_returns_connack_code": ctx.client.connack_code(),
                "subscriptions_count": ctx.client.subscriptions().len(),
            }))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "connection_status",
        "Report the adapter's connection state and reconnect policy.",
        schema(json!({}), &[]),
        |ctx, _args| {
            Ok(json!({
                "connected": ctx.client.is_connected(),
                "endpoint": ctx.endpoint,
                "reconnect": {
                    "initial_delay_s": ctx.policy.initial_delay_s,
                    "multiplier": ctx.policy.multiplier,
                    "max_delay_s": ctx.policy.max_delay_s,
                },
            }))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "subscribe",
        "Subscribe to a topic filter (wildcards allowed); returns the granted QoS.",
        schema(
            json!({"topic_filter": {"type": "string"}, "qos": {"type": "integer", "minimum": 0, "maximum": 1}}),
            &["topic_filter"],
        ),
        |ctx, args| {
            let filter = arg_str(args, "topic_filter")?;
            let qos = arg_qos(args);
            validate_subscribe(filter, qos)
                .map_err(|(message, reason)| ToolFail::invalid(message, Some(json!({"reason": reason}))))?;
            let granted = ctx
                .client
                .subscribe(filter, qos as u8, ACK_TIMEOUT_MS)
                .map_err(|e| ctx.map_client_error(e))?;
            Ok(json!({"topic_filter": filter, "granted": granted}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "unsubscribe",
        "Remove a topic-filter subscription.",
        schema(json!({"topic_filter": {"type": "string"}}), &["topic_filter"]),
        |ctx, args| {
            let filter = arg_str(args, "topic_filter")?;
            ctx.client
                .unsubscribe(filter, ACK_TIMEOUT_MS)
                .map_err(|e| ctx.map_client_error(e))?;
            Ok(json!({"topic_filter": filter, "unsubscribed": true}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "list_subscriptions",
        "List the active topic-filter subscriptions.",
        schema(json!({}), &[]),
        |ctx, _args| {
            let subs: Vec<Value> = ctx
                .client
                .subscriptions()
                .into_iter()
                .map(|(filter, qos)| json!({"topic_filter": filter, "qos": qos}))
                .collect();
            Ok(json!({"count": subs.len(), "subscriptions": subs}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "publish",
        "Publish a payload to a topic at QoS 0 or 1.",
        schema(
            json!({
                "topic": {"type": "string"},
                "payload": {"type": "string"},
                "qos": {"type": "integer", "minimum": 0, "maximum": 1},
                "retain": {"type": "boolean"}
            }),
            &["topic", "payload"],
        ),
        |ctx, args| {
            let topic = arg_str(args, "topic")?;
            let payload = arg_str(args, "payload")?;
            let qos = arg_qos(args);
            let retain = args.get("retain").and_then(Value::as_bool).unwrap_or(false);
            validate_publish(topic, qos).map_err(|(message, reason)| {
                ToolFail::invalid(message, Some(json!({"topic": topic, "reason": reason})))
            })?;
            let packet_id = ctx
                .client
                .publish(topic, payload.as_bytes(), qos as u8, retain, ACK_TIMEOUT_MS)
                .map_err(|e| ctx.map_client_error(e))?;
            Ok(json!({"topic": topic, "bytes": payload.len(), "qos": qos, "packet_id": packet_id}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "get_messages",
        "Return received messages from the bounded store, optionally filtered by topic filter.",
        schema(
            json!({"filter": {"type": "string"}, "limit": {"type": "integer", "minimum": 1}}),
            &[],
        ),
        |ctx, args| {
            let filter = args.get("filter").and_then(Value::as_str);
            let limit = args.get("limit").and_then(Value::as_u64).unwrap_or(50) as usize;
            let messages: Vec<Value> = ctx
                .client
                .messages(filter, limit)
                .into_iter()
                .map(|m| {
                    let mut entry = json!({
                        "topic": m.topic,
                        "qos": m.qos,
                        "received_at_ms": m.received_at_ms,
                    });
                    match String::from_utf8(m.payload.clone()) {
                        Ok(text) => entry["payload"] = json!(text),
                        Err(_) => entry["payload_hex"] = json!(hex_string(&m.payload)),
                    }
                    entry
                })
                .collect();
            Ok(json!({"count": messages.len(), "messages": messages, "stored": ctx.client.message_count()}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "clear_messages",
        "Empty the received-message store.",
        schema(json!({}), &[]),
        |ctx, _args| Ok(json!({"cleared": ctx.client.clear_messages()})),
    );

    let sp_tools: [(&str, &str, MessageType, bool, bool); 7] = [
        ("sp_publish_nbirth", "Publish an NBIRTH: starts the Sparkplug session, resets seq to 0, includes bdSeq.", MessageType::Nbirth, false, true),
        ("sp_publish_ndeath", "Publish an NDEATH carrying the session bdSeq.", MessageType::Ndeath, false, false),
        ("sp_publish_dbirth", "Publish a DBIRTH for a device with its metric set.", MessageType::Dbirth, true, true),
        ("sp_publish_ddeath", "Publish a DDEATH for a device.", MessageType::Ddeath, true, false),
        ("sp_publish_ddata", "Publish a DDATA metric update for a device.", MessageType::Ddata, true, true),
        ("sp_publish_ncmd", "Publish an NCMD node command.", MessageType::Ncmd, false, true),
        ("sp_publish_dcmd", "Publish a DCMD device command.", MessageType::Dcmd, true, true),
    ];
    for (name, description, message_type, takes_device, takes_metrics) in sp_tools {
        let mut properties = serde_json::Map::new();
        let mut required: Vec<&str> = Vec::new();
        if takes_device {
            properties.insert("device".to_string(), json!({"type": "string"}));
            required.push("device");
        }
        if takes_metrics {
            properties.insert("metrics".to_string(), metrics_schema());
        }
        register_tool(
            &mut registry,
            &ctx,
            name,
            description,
            schema(Value::Object(properties), &required),
            move |ctx, args| {
                let device = if takes_device { Some(arg_str(args, "device")?) } else { None };
                let metrics = if takes_metrics { parse_metrics(args)? } else { Vec::new() };
                ctx.publish_sp(message_type, device, metrics)
            },
        );
    }

    debug_assert_eq!(registry.len(), TOOL_NAMES.len());
    registry
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the adapter as a stdio MCP server until stdin closes.
pub fn serve_stdio(config: &AdapterConfig) -> std::io::Result<()> {
    let registry = build_registry(config);
    serve(&registry, std::io::BufReader::new(std::io::stdin()), std::io::stdout())
}
