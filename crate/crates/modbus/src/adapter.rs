//! The Modbus MCP adapter: 20 tools over one client connection, with the
//! process-level write guard and adapter-side uint16 range validation.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use otbridge_core::envelope::{CallMeta, Envelope, ErrorClass};
use otbridge_core::mcp::server::{serve, ToolRegistry};
use serde_json::{json, Value};

use crate::client::{ClientConfig, ClientError, ModbusClient};
use crate::codec::{RequestPdu, ResponsePdu, MAX_READ_BITS, MAX_READ_REGISTERS};
use crate::data::{
    encode_typed, decode_typed, validate_uint16, AliasEntry, AliasMap, Bank, DataType, TypedError,
};
use crate::mock::{DEVICE_PRODUCT, DEVICE_REVISION, DEVICE_VENDOR};

pub const TOOL_NAMES: [&str; 20] = [
    "ping",
    "connection_status",
    "read_holding_registers",
    "read_input_registers",
    "read_coils",
    "read_discrete_inputs",
    "write_register",
    "write_registers",
    "write_coil",
    "write_coils",
    "mask_write_register",
    "write_register_verified",
    "read_typed",
    "write_typed",
    "read_device_info",
    "list_aliases",
    "read_alias",
    "write_alias",
    "read_register_block",
    "health_check",
];

/// Server configuration resolved once at startup; the write guard is
/// immutable for the process lifetime.
#[derive(Debug, Clone)]
pub struct AdapterConfig {
    pub host: String,
    pub port: u16,
    pub writes_enabled: bool,
    pub alias_file: Option<PathBuf>,
}

impl AdapterConfig {
    /// MODBUS_HOST / MODBUS_PORT / MODBUS_WRITES_ENABLED /
    /// MODBUS_ALIAS_FILE. Writes default to enabled; only the truthy
    /// strings "1" and "true" enable them when the variable is set.
    pub fn from_env() -> AdapterConfig {
        AdapterConfig {
            host: std::env::var("MODBUS_HOST").unwrap_or_else(|_| "127.0.0.1".to_string()),
            port: std::env::var("MODBUS_PORT").ok().and_then(|p| p.parse().ok()).unwrap_or(1502),
            writes_enabled: match std::env::var("MODBUS_WRITES_ENABLED") {
                Err(_) => true,
                Ok(v) => v == "1" || v.eq_ignore_ascii_case("true"),
            },
            alias_file: std::env::var("MODBUS_ALIAS_FILE").ok().map(PathBuf::from),
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

    fn range_overflow(value: i64) -> ToolFail {
        ToolFail {
            class: ErrorClass::RangeOverflow,
            message: format!("value {value} exceeds uint16 maximum 65535"),
            details: Some(json!({"value": value, "max": 65535})),
        }
    }
}

type ToolOutput = Result<Value, ToolFail>;

#[cfg(feature = "unchecked-writes")]
fn unchecked_writes() -> bool {
    std::env::var("MODBUS_UNCHECKED_WRITES").is_ok_and(|v| v == "1" || v.eq_ignore_ascii_case("true"))
}

#[cfg(not(feature = "unchecked-writes"))]
fn unchecked_writes() -> bool {
    false
}

struct Ctx {
    client: Mutex<ModbusClient>,
    writes_enabled: bool,
    aliases: AliasMap,
    endpoint: String,
}

impl Ctx {
    fn meta(&self, started: Instant, attempts: u32) -> CallMeta {
        CallMeta::new("modbus", &self.endpoint)
            .with_latency(started.elapsed().as_secs_f64() * 1e3)
            .with_attempts(attempts)
    }

    fn guard(&self) -> Result<(), ToolFail> {
        if self.writes_enabled {
            Ok(())
        } else {
            Err(ToolFail {
                class: ErrorClass::WritesDisabled,
                message: "writes are disabled on this server".to_string(),
                details: None,
            })
        }
    }

    /// uint16 range check applied before any protocol frame is built.
    fn checked_u16(&self, value: i64) -> Result<u16, ToolFail> {
        if unchecked_writes() {
            // falsifiability bypass: silently truncate like a broken adapter
            return Ok(value as u16);
        }
        validate_uint16(value).map_err(ToolFail::range_overflow)
    }

    fn execute(&self, request: &RequestPdu, attempts: &mut u32) -> Result<ResponsePdu, ToolFail> {
        let (result, used) = self.client.lock().expect("client lock").execute(request);
        *attempts = (*attempts).max(used);
        result.map_err(|e| self.map_client_error(e))
    }

    fn map_client_error(&self, error: ClientError) -> ToolFail {
        match error {
            ClientError::Unreachable(detail) => ToolFail {
                class: ErrorClass::EndpointUnreachable,
                message: format!("cannot reach {}: {detail}", self.endpoint),
                details: None,
            },
            // wire-level exceptions surface as protocol errors; the detail
            // preserves the specific exception
            ClientError::Exception(code) => ToolFail {
                class: ErrorClass::ProtocolError,
                message: format!("modbus exception: {}", code.name()),
                details: Some(json!({"exception": code.name(), "code": code.as_u8()})),
            },
            ClientError::Protocol(detail) => ToolFail {
                class: ErrorClass::ProtocolError,
                message: detail,
                details: None,
            },
        }
    }

    /// Liveness probe: a one-register input read over the (re)connected
    /// stream.
    fn probe(&self, attempts: &mut u32) -> Result<(), ToolFail> {
        self.execute(&RequestPdu::ReadInputRegisters { address: 0, quantity: 1 }, attempts)?;
        Ok(())
    }

    fn read_alias_value(&self, entry: &AliasEntry, attempts: &mut u32) -> Result<Value, ToolFail> {
        match entry.bank {
            Bank::Holding => {
                let words = self.read_words(
                    &RequestPdu::ReadHoldingRegisters { address: entry.address, quantity: entry.datatype.word_count() },
                    attempts,
                )?;
                Ok(decode_typed(entry.datatype, &words))
            }
            Bank::Input => {
                let words = self.read_words(
                    &RequestPdu::ReadInputRegisters { address: entry.address, quantity: entry.datatype.word_count() },
                    attempts,
                )?;
                Ok(decode_typed(entry.datatype, &words))
            }
            Bank::Coil => {
                match self.execute(&RequestPdu::ReadCoils { address: entry.address, quantity: 1 }, attempts)? {
                    ResponsePdu::ReadCoils { values } => Ok(json!(values[0])),
                    other => Err(unexpected_response(&other)),
                }
            }
            Bank::Discrete => {
                match self.execute(&RequestPdu::ReadDiscreteInputs { address: entry.address, quantity: 1 }, attempts)? {
                    ResponsePdu::ReadDiscreteInputs { values } => Ok(json!(values[0])),
                    other => Err(unexpected_response(&other)),
                }
            }
        }
    }

    fn read_words(&self, request: &RequestPdu, attempts: &mut u32) -> Result<Vec<u16>, ToolFail> {
        match self.execute(request, attempts)? {
            ResponsePdu::ReadHoldingRegisters { values } | ResponsePdu::ReadInputRegisters { values } => Ok(values),
            other => Err(unexpected_response(&other)),
        }
    }
}

fn unexpected_response(response: &ResponsePdu) -> ToolFail {
    ToolFail {
        class: ErrorClass::ProtocolError,
        message: format!("unexpected response function {:#04x}", response.function()),
        details: None,
    }
}

fn arg_i64(args: &Value, key: &str) -> Result<i64, ToolFail> {
    args.get(key)
        .and_then(Value::as_i64)
        .ok_or_else(|| ToolFail::invalid(format!("missing or non-integer argument `{key}`"), None))
}

fn arg_address(args: &Value, key: &str) -> Result<u16, ToolFail> {
    let raw = arg_i64(args, key)?;
    u16::try_from(raw).map_err(|_| {
        ToolFail::invalid(format!("{key} {raw} outside the uint16 address space"), Some(json!({key: raw})))
    })
}

fn arg_count(args: &Value, max: u16) -> Result<u16, ToolFail> {
    let raw = arg_i64(args, "count")?;
    if raw < 1 || raw > max as i64 {
        return Err(ToolFail::invalid(
            format!("count must be within 1..={max}, got {raw}"),
            Some(json!({"count": raw, "max": max})),
        ));
    }
    Ok(raw as u16)
}

fn arg_str<'a>(args: &'a Value, key: &str) -> Result<&'a str, ToolFail> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ToolFail::invalid(format!("missing or non-string argument `{key}`"), None))
}

fn arg_bool(args: &Value, key: &str) -> Result<bool, ToolFail> {
    args.get(key)
        .and_then(Value::as_bool)
        .ok_or_else(|| ToolFail::invalid(format!("missing or non-boolean argument `{key}`"), None))
}

fn arg_datatype(args: &Value) -> Result<DataType, ToolFail> {
    let raw = arg_str(args, "datatype")?;
    DataType::parse(raw)
        .ok_or_else(|| ToolFail::invalid(format!("unknown datatype `{raw}`"), Some(json!({"datatype": raw}))))
}

fn map_typed_error(error: TypedError) -> ToolFail {
    match error {
        TypedError::Range { datatype, value } => ToolFail {
            class: ErrorClass::RangeOverflow,
            message: format!("value {value} out of range for {datatype}"),
            details: Some(json!({"value": value, "datatype": datatype})),
        },
        TypedError::Mismatch { datatype } => ToolFail {
            class: ErrorClass::TypeMismatch,
            message: format!("value has the wrong type for {datatype}"),
            details: Some(json!({"datatype": datatype})),
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
    body: impl Fn(&Ctx, &Value, &mut u32) -> ToolOutput + Send + Sync + 'static,
) {
    let ctx = Arc::clone(ctx);
    registry.register(
        name,
        description,
        input_schema,
        Box::new(move |args| {
            let started = Instant::now();
            let mut attempts = 1u32;
            match body(&ctx, args, &mut attempts) {
                Ok(data) => Envelope::ok(data, ctx.meta(started, attempts)),
                Err(fail) => Envelope::err(fail.class, fail.message, fail.details, ctx.meta(started, attempts)),
            }
        }),
    );
}

fn read_tool(kind: Bank) -> impl Fn(&Ctx, &Value, &mut u32) -> ToolOutput {
    move |ctx, args, attempts| {
        let address = arg_address(args, "address")?;
        let (max, is_register) = match kind {
            Bank::Holding | Bank::Input => (MAX_READ_REGISTERS, true),
            Bank::Coil | Bank::Discrete => (MAX_READ_BITS, false),
        };
        let count = arg_count(args, max)?;
        let request = match kind {
            Bank::Holding => RequestPdu::ReadHoldingRegisters { address, quantity: count },
            Bank::Input => RequestPdu::ReadInputRegisters { address, quantity: count },
            Bank::Coil => RequestPdu::ReadCoils { address, quantity: count },
            Bank::Discrete => RequestPdu::ReadDiscreteInputs { address, quantity: count },
        };
        let values = match ctx.execute(&request, attempts)? {
            ResponsePdu::ReadHoldingRegisters { values } | ResponsePdu::ReadInputRegisters { values } => {
                json!(values)
            }
            ResponsePdu::ReadCoils { values } | ResponsePdu::ReadDiscreteInputs { values } => json!(values),
            other => return Err(unexpected_response(&other)),
        };
        let _ = is_register;
        Ok(json!({"kind": kind.as_str(), "address": address, "count": count, "values": values}))
    }
}

/// Builds the full 20-tool manifest backed by one Modbus connection.
pub fn build_registry(config: &AdapterConfig) -> ToolRegistry {
    let endpoint = format!("modbus://{}:{}", config.host, config.port);
    let aliases = match &config.alias_file {
        Some(path) => AliasMap::load(path).unwrap_or_else(|e| {
            eprintln!("alias file ignored: {e}");
            AliasMap::plant_default()
        }),
        None => AliasMap::plant_default(),
    };
    let ctx = Arc::new(Ctx {
        client: Mutex::new(ModbusClient::new(ClientConfig::new(&config.host, config.port))),
        writes_enabled: config.writes_enabled,
        aliases,
        endpoint: endpoint.clone(),
    });
    let mut registry = ToolRegistry::new("otbridge-modbus", "modbus", &endpoint);

    register_tool(
        &mut registry,
        &ctx,
        "ping",
        "Open or validate the TCP connection to the Modbus endpoint and report reachability.",
        schema(json!({}), &[]),
        |ctx, _args, attempts| {
            ctx.probe(attempts)?;
            Ok(json!({"reachable": true, "endpoint": ctx.endpoint}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "connection_status",
        "Report the adapter's current connection state and write-guard configuration.",
        schema(json!({}), &[]),
        |ctx, _args, _attempts| {
            let connected = ctx.client.lock().expect("client lock").is_connected();
            Ok(json!({"connected": connected, "endpoint": ctx.endpoint, "writes_enabled": ctx.writes_enabled}))
        },
    );

    let reads: [(&str, &str, Bank); 4] = [
        ("read_holding_registers", "Read a block of holding registers.", Bank::Holding),
        ("read_input_registers", "Read a block of input registers.", Bank::Input),
        ("read_coils", "Read a block of coils.", Bank::Coil),
        ("read_discrete_inputs", "Read a block of discrete inputs.", Bank::Discrete),
    ];
    for (name, description, bank) in reads {
        register_tool(
            &mut registry,
            &ctx,
            name,
            description,
            schema(
                json!({"address": {"type": "integer"}, "count": {"type": "integer", "minimum": 1}}),
                &["address", "count"],
            ),
            read_tool(bank),
        );
    }

    register_tool(
        &mut registry,
        &ctx,
        "write_register",
        "Write one holding register. Values are validated against the uint16 range before any frame is sent.",
        schema(
            json!({"address": {"type": "integer"}, "value": {"type": "integer"}}),
            &["address", "value"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let raw = arg_i64(args, "value")?;
            ctx.guard()?;
            let value = ctx.checked_u16(raw)?;
            ctx.execute(&RequestPdu::WriteSingleRegister { address, value }, attempts)?;
            Ok(json!({"address": address, "value": value}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_registers",
        "Write a block of holding registers.",
        schema(
            json!({"address": {"type": "integer"}, "values": {"type": "array", "items": {"type": "integer"}}}),
            &["address", "values"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let raw = args
                .get("values")
                .and_then(Value::as_array)
                .ok_or_else(|| ToolFail::invalid("missing or non-array argument `values`", None))?;
            if raw.is_empty() || raw.len() > crate::codec::MAX_WRITE_REGISTERS as usize {
                return Err(ToolFail::invalid(
                    format!("values length must be within 1..={}", crate::codec::MAX_WRITE_REGISTERS),
                    None,
                ));
            }
            ctx.guard()?;
            let mut values = Vec::with_capacity(raw.len());
            for item in raw {
                let v = item
                    .as_i64()
                    .ok_or_else(|| ToolFail::invalid("values must all be integers", None))?;
                values.push(ctx.checked_u16(v)?);
            }
            let count = values.len();
            ctx.execute(&RequestPdu::WriteMultipleRegisters { address, values }, attempts)?;
            Ok(json!({"address": address, "count": count}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_coil",
        "Write one coil.",
        schema(
            json!({"address": {"type": "integer"}, "value": {"type": "boolean"}}),
            &["address", "value"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let value = arg_bool(args, "value")?;
            ctx.guard()?;
            ctx.execute(&RequestPdu::WriteSingleCoil { address, value }, attempts)?;
            Ok(json!({"address": address, "value": value}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_coils",
        "Write a block of coils.",
        schema(
            json!({"address": {"type": "integer"}, "values": {"type": "array", "items": {"type": "boolean"}}}),
            &["address", "values"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let raw = args
                .get("values")
                .and_then(Value::as_array)
                .ok_or_else(|| ToolFail::invalid("missing or non-array argument `values`", None))?;
            let values: Option<Vec<bool>> = raw.iter().map(Value::as_bool).collect();
            let values = values.ok_or_else(|| ToolFail::invalid("values must all be booleans", None))?;
            if values.is_empty() || values.len() > crate::codec::MAX_WRITE_BITS as usize {
                return Err(ToolFail::invalid(
                    format!("values length must be within 1..={}", crate::codec::MAX_WRITE_BITS),
                    None,
                ));
            }
            ctx.guard()?;
            let count = values.len();
            ctx.execute(&RequestPdu::WriteMultipleCoils { address, values }, attempts)?;
            Ok(json!({"address": address, "count": count}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "mask_write_register",
        "Masked register write: result = (current AND and_mask) OR (or_mask AND NOT and_mask).",
        schema(
            json!({"address": {"type": "integer"}, "and_mask": {"type": "integer"}, "or_mask": {"type": "integer"}}),
            &["address", "and_mask", "or_mask"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let and_raw = arg_i64(args, "and_mask")?;
            let or_raw = arg_i64(args, "or_mask")?;
            ctx.guard()?;
            let and_mask = ctx.checked_u16(and_raw)?;
            let or_mask = ctx.checked_u16(or_raw)?;
            ctx.execute(&RequestPdu::MaskWriteRegister { address, and_mask, or_mask }, attempts)?;
            Ok(json!({"address": address, "and_mask": and_mask, "or_mask": or_mask}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_register_verified",
        "Write one holding register and read it back in the same operation.",
        schema(
            json!({"address": {"type": "integer"}, "value": {"type": "integer"}}),
            &["address", "value"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let raw = arg_i64(args, "value")?;
            ctx.guard()?;
            let value = ctx.checked_u16(raw)?;
            ctx.execute(&RequestPdu::WriteSingleRegister { address, value }, attempts)?;
            let words = ctx.read_words(&RequestPdu::ReadHoldingRegisters { address, quantity: 1 }, attempts)?;
            Ok(json!({"address": address, "value": value, "readback": words[0], "verified": words[0] == value}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "read_typed",
        "Read a typed value from holding registers (uint16, int16, uint32, int32, float32, bool).",
        schema(
            json!({"address": {"type": "integer"}, "datatype": {"type": "string"}}),
            &["address", "datatype"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let datatype = arg_datatype(args)?;
            let words = ctx.read_words(
                &RequestPdu::ReadHoldingRegisters { address, quantity: datatype.word_count() },
                attempts,
            )?;
            Ok(json!({"address": address, "datatype": datatype.as_str(), "value": decode_typed(datatype, &words)}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_typed",
        "Write a typed value to holding registers; two-word types use big-endian word order.",
        schema(
            json!({"address": {"type": "integer"}, "datatype": {"type": "string"}, "value": {}}),
            &["address", "datatype", "value"],
        ),
        |ctx, args, attempts| {
            let address = arg_address(args, "address")?;
            let datatype = arg_datatype(args)?;
            let value = args
                .get("value")
                .ok_or_else(|| ToolFail::invalid("missing argument `value`", None))?;
            ctx.guard()?;
            let words = encode_typed(datatype, value).map_err(map_typed_error)?;
            if words.len() == 1 {
                ctx.execute(&RequestPdu::WriteSingleRegister { address, value: words[0] }, attempts)?;
            } else {
                ctx.execute(&RequestPdu::WriteMultipleRegisters { address, values: words }, attempts)?;
            }
            Ok(json!({"address": address, "datatype": datatype.as_str(), "value": value}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "read_device_info",
        "Report the device identity after confirming the endpoint is reachable.",
        schema(json!({}), &[]),
        |ctx, _args, attempts| {
            ctx.probe(attempts)?;
            Ok(json!({"vendor": DEVICE_VENDOR, "product": DEVICE_PRODUCT, "revision": DEVICE_REVISION}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "list_aliases",
        "List every configured register alias with its bank, address and datatype.",
        schema(json!({}), &[]),
        |ctx, _args, _attempts| {
            Ok(json!({
                "aliases": serde_json::to_value(&ctx.aliases.0).expect("alias map serializes"),
                "count": ctx.aliases.0.len(),
            }))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "read_alias",
        "Read a named register alias.",
        schema(json!({"alias": {"type": "string"}}), &["alias"]),
        |ctx, args, attempts| {
            let alias = arg_str(args, "alias")?;
            let entry = *ctx
                .aliases
                .get(alias)
                .ok_or_else(|| ToolFail::invalid(format!("unknown alias `{alias}`"), Some(json!({"alias": alias}))))?;
            let value = ctx.read_alias_value(&entry, attempts)?;
            Ok(json!({
                "alias": alias,
                "bank": entry.bank.as_str(),
                "address": entry.address,
                "datatype": entry.datatype.as_str(),
                "value": value,
            }))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "write_alias",
        "Write a named register alias; only holding-register and coil aliases are writable.",
        schema(json!({"alias": {"type": "string"}, "value": {}}), &["alias", "value"]),
        |ctx, args, attempts| {
            let alias = arg_str(args, "alias")?;
            let value = args
                .get("value")
                .ok_or_else(|| ToolFail::invalid("missing argument `value`", None))?
                .clone();
            ctx.guard()?;
            let entry = *ctx
                .aliases
                .get(alias)
                .ok_or_else(|| ToolFail::invalid(format!("unknown alias `{alias}`"), Some(json!({"alias": alias}))))?;
            match entry.bank {
                Bank::Holding => {
                    let words = encode_typed(entry.datatype, &value).map_err(map_typed_error)?;
                    if words.len() == 1 {
                        ctx.execute(
                            &RequestPdu::WriteSingleRegister { address: entry.address, value: words[0] },
                            attempts,
                        )?;
                    } else {
                        ctx.execute(
                            &RequestPdu::WriteMultipleRegisters { address: entry.address, values: words },
                            attempts,
                        )?;
                    }
                }
                Bank::Coil => {
                    let flag = value
                        .as_bool()
                        .ok_or_else(|| ToolFail::invalid("coil alias requires a boolean value", None))?;
                    ctx.execute(&RequestPdu::WriteSingleCoil { address: entry.address, value: flag }, attempts)?;
                }
                Bank::Input | Bank::Discrete => {
                    return Err(ToolFail::invalid(
                        format!("alias `{alias}` is in the read-only {} bank", entry.bank.as_str()),
                        None,
                    ));
                }
            }
            Ok(json!({"alias": alias, "value": value}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "read_register_block",
        "Read a group of aliases in one call; defaults to every configured alias.",
        schema(json!({"aliases": {"type": "array", "items": {"type": "string"}}}), &[]),
        |ctx, args, attempts| {
            let names: Vec<String> = match args.get("aliases") {
                Some(Value::Array(items)) => {
                    let parsed: Option<Vec<String>> =
                        items.iter().map(|v| v.as_str().map(str::to_string)).collect();
                    parsed.ok_or_else(|| ToolFail::invalid("aliases must all be strings", None))?
                }
                Some(_) => return Err(ToolFail::invalid("`aliases` must be an array of strings", None)),
                None => ctx.aliases.0.keys().cloned().collect(),
            };
            let mut values = serde_json::Map::new();
            for name in &names {
                let entry = *ctx.aliases.get(name).ok_or_else(|| {
                    ToolFail::invalid(format!("unknown alias `{name}`"), Some(json!({"alias": name})))
                })?;
                values.insert(name.clone(), ctx.read_alias_value(&entry, attempts)?);
            }
            Ok(json!({"values": values, "count": names.len()}))
        },
    );

    register_tool(
        &mut registry,
        &ctx,
        "health_check",
        "Ping the endpoint and read one holding register as a combined health probe.",
        schema(json!({}), &[]),
        |ctx, _args, attempts| {
            ctx.probe(attempts)?;
            let words = ctx.read_words(&RequestPdu::ReadHoldingRegisters { address: 0, quantity: 1 }, attempts)?;
            Ok(json!({"ping": "ok", "read": "ok", "holding0": words[0]}))
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
