//! Client side of the stdio MCP transport: launches an adapter process,
//! exchanges `initialize`, and correlates concurrent in-flight calls by id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::envelope::{CallMeta, Envelope, ErrorClass};
use crate::mcp::server::ToolDescriptor;
use crate::mcp::wire::RpcRequest;

/// How to spawn an adapter process and what to label its synthesized
/// envelopes with.
#[derive(Debug, Clone)]
pub struct LaunchSpec {
    pub command: String,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
    /// Protocol label used in envelopes the client synthesizes itself
    /// (timeouts, broken pipes).
    pub protocol: String,
}

impl LaunchSpec {
    pub fn new(command: impl Into<String>, args: &[&str], protocol: &str) -> LaunchSpec {
        LaunchSpec {
            command: command.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            env: Vec::new(),
            protocol: protocol.to_string(),
        }
    }

    pub fn env(mut self, key: &str, value: &str) -> LaunchSpec {
        self.env.push((key.to_string(), value.to_string()));
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("failed to spawn adapter process: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("initialize timed out or failed: {0}")]
    Initialize(String),
    #[error("session is closed")]
    Closed,
    #[error("json-rpc error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

/// Result of one tool call: the adapter's envelope plus the latency the
/// caller observed across the whole stdio round trip. Benchmark tables are
/// built from `harness_latency_ms`, not the adapter-reported number.
#[derive(Debug, Clone)]
pub struct CallOutcome {
    pub envelope: Envelope,
    pub harness_latency_ms: f64,
}

type PendingMap = Arc<Mutex<HashMap<u64, mpsc::Sender<Value>>>>;

/// An open stdio session to one adapter process. Supports multiple
/// concurrent in-flight calls; responses are correlated strictly by id.
pub struct Session {
    child: Mutex<Child>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: PendingMap,
    next_id: AtomicU64,
    closed: AtomicBool,
    protocol: String,
    reader: Mutex<Option<thread::JoinHandle<()>>>,
}

pub const DEFAULT_INIT_TIMEOUT_MS: u64 = 10_000;

/// Spawns the adapter, performs the `initialize` exchange, and returns a
/// ready session. Spawn and initialize failures are session errors,
/// distinguishable from tool-level failures which always come back as
/// envelopes.
pub fn open_session(launch: &LaunchSpec) -> Result<Session, SessionError> {
    let mut command = Command::new(&launch.command);
    command
        .args(&launch.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit());
    for (key, value) in &launch.env {
        command.env(key, value);
    }
    let mut child = command.spawn()?;
    let stdin = child.stdin.take().expect("stdin piped");
    let stdout = child.stdout.take().expect("stdout piped");

    let pending: PendingMap = Arc::new(Mutex::new(HashMap::new()));
    let reader_pending = Arc::clone(&pending);
    let reader = thread::spawn(move || {
        let reader = BufReader::new(stdout);
        for line in reader.lines() {
            let line = match line {
                Ok(l) => l,
                Err(_) => break,
            };
            let value: Value = match serde_json::from_str(&line) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let id = match value.get("id").and_then(Value::as_u64) {
                Some(id) => id,
                None => continue,
            };
            let sender = reader_pending.lock().expect("pending lock").remove(&id);
            if let Some(sender) = sender {
                let _ = sender.send(value);
            }
        }
        // EOF: wake every waiter so calls fail fast instead of timing out
        reader_pending.lock().expect("pending lock").clear();
    });

    let session = Session {
        child: Mutex::new(child),
        stdin: Mutex::new(Some(stdin)),
        pending,
        next_id: AtomicU64::new(1),
        closed: AtomicBool::new(false),
        protocol: launch.protocol.clone(),
        reader: Mutex::new(Some(reader)),
    };

    let init = session
        .raw_request(
            "initialize",
            json!({
                "protocolVersion": crate::mcp::wire::PROTOCOL_VERSION,
                "capabilities": {},
                "clientInfo": {"name": "otbridge-bench", "version": env!("CARGO_PKG_VERSION")},
            }),
            DEFAULT_INIT_TIMEOUT_MS,
        )
        .map_err(|e| SessionError::Initialize(e.to_string()))?;
    if init.get("result").is_none() {
        return Err(SessionError::Initialize(format!("unexpected initialize response: {init}")));
    }
    session.notify("notifications/initialized", json!({}))?;
    Ok(session)
}

impl Session {
    pub fn protocol(&self) -> &str {
        &self.protocol
    }

    fn synthesized_meta(&self, latency_ms: f64) -> CallMeta {
        CallMeta::new(&self.protocol, "stdio").with_latency(latency_ms)
    }

    fn write_request(&self, request: &RpcRequest) -> Result<(), SessionError> {
        let mut guard = self.stdin.lock().expect("stdin lock");
        let stdin = guard.as_mut().ok_or(SessionError::Closed)?;
        let line = serde_json::to_string(request).expect("request serializes");
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
            .map_err(|e| SessionError::Protocol(format!("broken pipe: {e}")))
    }

    fn notify(&self, method: &str, params: Value) -> Result<(), SessionError> {
        self.write_request(&RpcRequest::notification(method, params))
    }

    /// Sends a raw request and waits for its response; used for
    /// `initialize` and `tools/list`.
    pub fn raw_request(&self, method: &str, params: Value, timeout_ms: u64) -> Result<Value, SessionError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(SessionError::Closed);
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().expect("pending lock").insert(id, tx);
        let request = RpcRequest::new(id, method, params);
        if let Err(e) = self.write_request(&request) {
            self.pending.lock().expect("pending lock").remove(&id);
            return Err(e);
        }
        match rx.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(response) => {
                if let Some(err) = response.get("error") {
                    return Err(SessionError::Rpc {
                        code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                        message: err.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
                    });
                }
                Ok(response)
            }
            Err(e) => {
                self.pending.lock().expect("pending lock").remove(&id);
                Err(SessionError::Protocol(format!("no response for id {id}: {e}")))
            }
        }
    }

    pub fn list_tools(&self) -> Result<Vec<ToolDescriptor>, SessionError> {
        let response = self.raw_request("tools/list", json!({}), DEFAULT_INIT_TIMEOUT_MS)?;
        let tools = response
            .pointer("/result/tools")
            .ok_or_else(|| SessionError::Protocol("tools/list result missing tools".to_string()))?;
        serde_json::from_value(tools.clone()).map_err(|e| SessionError::Protocol(e.to_string()))
    }

    /// Invokes a tool, measuring caller-side wall-clock latency.
    ///
    /// Protocol-level failures are still `Ok`: a timeout synthesizes a
    /// `timeout`-class envelope and a dead pipe an `endpoint_unreachable`
    /// one. Only calling on a closed session is a hard error.
    pub fn call(&self, tool: &str, args: &Value, timeout_ms: u64) -> Result<CallOutcome, SessionError> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(SessionError::Closed);
        }
        let started = Instant::now();
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().expect("pending lock").insert(id, tx);
        let request = RpcRequest::new(id, "tools/call", json!({"name": tool, "arguments": args}));

        if self.write_request(&request).is_err() {
            self.pending.lock().expect("pending lock").remove(&id);
            let latency = elapsed_ms(started);
            return Ok(CallOutcome {
                envelope: Envelope::err(
                    ErrorClass::EndpointUnreachable,
                    "adapter process pipe is broken",
                    None,
                    self.synthesized_meta(latency),
                ),
                harness_latency_ms: latency,
            });
        }

        let response = match rx.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(response) => response,
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.pending.lock().expect("pending lock").remove(&id);
                let latency = elapsed_ms(started);
                return Ok(CallOutcome {
                    envelope: Envelope::err(
                        ErrorClass::Timeout,
                        format!("tool call `{tool}` timed out after {timeout_ms} ms"),
                        None,
                        self.synthesized_meta(latency),
                    ),
                    harness_latency_ms: latency,
                });
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                let latency = elapsed_ms(started);
                return Ok(CallOutcome {
                    envelope: Envelope::err(
                        ErrorClass::EndpointUnreachable,
                        "adapter process closed its output",
                        None,
                        self.synthesized_meta(latency),
                    ),
                    harness_latency_ms: latency,
                });
            }
        };
        let latency = elapsed_ms(started);

        if let Some(err) = response.get("error") {
            return Err(SessionError::Rpc {
                code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
                message: err.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
            });
        }
        let text = response
            .pointer("/result/content/0/text")
            .and_then(Value::as_str)
            .ok_or_else(|| SessionError::Protocol("tool result has no text content".to_string()))?;
        let envelope = Envelope::from_json(text)
            .map_err(|e| SessionError::Protocol(format!("embedded envelope is malformed: {e}")))?;
        Ok(CallOutcome { envelope, harness_latency_ms: latency })
    }

    /// Closes stdin, waits briefly for the child to exit, then kills it.
    pub fn close(&self) {
        if self.closed.swap(true, Ordering::SeqCst) {
            return;
        }
        drop(self.stdin.lock().expect("stdin lock").take());
        let mut child = self.child.lock().expect("child lock");
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(20)),
                _ => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break;
                }
            }
        }
        drop(child);
        if let Some(handle) = self.reader.lock().expect("reader lock").take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
