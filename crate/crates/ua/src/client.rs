//! Node-model client with the liveness-probe reconnect path: before each
//! operation the status node is read on the existing connection, and on
//! failure the stale connection is torn down and re-established.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde_json::{json, Value};

use crate::node::NodeId;
use crate::wire::{WireRequest, WireResponse};

#[derive(Debug, Clone)]
pub struct LivenessConfig {
    pub status_node: NodeId,
    pub probe_before_each_op: bool,
    pub reconnect_retries: u32,
}

impl Default for LivenessConfig {
    fn default() -> LivenessConfig {
        LivenessConfig {
            status_node: NodeId::numeric(0, 2256),
            probe_before_each_op: true,
            reconnect_retries: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum UaError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("{class}: {message}")]
    Server { class: String, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

pub struct UaClient {
    host: String,
    port: u16,
    liveness: LivenessConfig,
    conn: Option<Conn>,
    next_id: u64,
}

impl UaClient {
    pub fn new(host: &str, port: u16, liveness: LivenessConfig) -> UaClient {
        UaClient { host: host.to_string(), port, liveness, conn: None, next_id: 1 }
    }

    pub fn endpoint_uri(&self) -> String {
        format!("ua://{}:{}", self.host, self.port)
    }

    fn dial(&mut self) -> std::io::Result<()> {
        let addr: SocketAddr = (self.host.as_str(), self.port)
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "no address"))?;
        let stream = TcpStream::connect_timeout(&addr, Duration::from_millis(1000))?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_millis(2000)))?;
        let reader = BufReader::new(stream.try_clone()?);
        self.conn = Some(Conn { reader, writer: stream });
        Ok(())
    }

    fn exchange(&mut self, op: &str, params: Value) -> std::io::Result<Result<Value, UaError>> {
        let id = self.next_id;
        self.next_id += 1;
        let conn = self.conn.as_mut().expect("connected");
        let mut bytes = serde_json::to_vec(&WireRequest { id, op: op.to_string(), params })
            .expect("request serializes");
        bytes.push(b'\n');
        conn.writer.write_all(&bytes)?;
        let mut line = String::new();
        if conn.reader.read_line(&mut line)? == 0 {
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "server closed"));
        }
        let response: WireResponse = match serde_json::from_str(&line) {
            Ok(response) => response,
            Err(e) => return Ok(Err(UaError::Protocol(format!("bad response: {e}")))),
        };
        if response.id != id {
            return Ok(Err(UaError::Protocol(format!("response id {} for request {id}", response.id))));
        }
        if response.ok {
            Ok(Ok(response.result.unwrap_or(Value::Null)))
        } else {
            let error = response.error.unwrap_or(crate::wire::WireError {
                class: "internal".to_string(),
                message: "missing error body".to_string(),
            });
            Ok(Err(UaError::Server { class: error.class, message: error.message }))
        }
    }

    fn probe(&mut self) -> std::io::Result<()> {
        let status_node = self.liveness.status_node.to_string();
        // any well-formed answer proves the connection is live
        self.exchange("read", json!({"node": status_node})).map(|_| ())
    }

    /// Validates the connection by reading the status node; on failure the
    /// stale connection is dropped and one fresh connection is attempted
    /// per configured retry. Returns the connection attempts used.
    pub fn ensure_connected(&mut self) -> Result<u32, UaError> {
        let mut attempts = 1u32;
        if self.conn.is_some() {
            match self.probe() {
                Ok(()) => return Ok(attempts),
                Err(_) => self.conn = None,
            }
        } else {
            // no connection yet: the initial dial is part of attempt 1
            if self.dial().is_ok() && self.probe().is_ok() {
                return Ok(attempts);
            }
            self.conn = None;
        }
        let mut last_error = "connection stale".to_string();
        for _ in 0..self.liveness.reconnect_retries.max(1) {
            attempts += 1;
            match self.dial() {
                Ok(()) => match self.probe() {
                    Ok(()) => return Ok(attempts),
                    Err(e) => {
                        last_error = e.to_string();
                        self.conn = None;
                    }
                },
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(UaError::Unreachable(format!("{}:{}: {last_error}", self.host, self.port)))
    }

    /// Runs one wire operation, preceded by the liveness probe when
    /// configured. Returns the result and the connection attempts used, so
    /// callers can surface transparent reconnects in call metadata.
    pub fn op(&mut self, op: &str, params: Value) -> Result<(Value, u32), UaError> {
        let attempts = if self.liveness.probe_before_each_op {
            self.ensure_connected()?
        } else {
            if self.conn.is_none() {
                self.dial()
                    .map_err(|e| UaError::Unreachable(format!("{}:{}: {e}", self.host, self.port)))?;
            }
            1
        };
        match self.exchange(op, params.clone()) {
            Ok(result) => result.map(|value| (value, attempts)),
            Err(_) => {
                // the endpoint vanished between probe and operation; one
                // retry over a fresh connection
                self.conn = None;
                self.dial()
                    .map_err(|e| UaError::Unreachable(format!("{}:{}: {e}", self.host, self.port)))?;
                self.exchange(op, params)
                    .map_err(|e| UaError::Unreachable(format!("{}:{}: {e}", self.host, self.port)))?
                    .map(|value| (value, attempts.max(2)))
            }
        }
    }

    pub fn disconnect(&mut self) {
        self.conn = None;
    }

    pub fn probe_before_each_op(&self) -> bool {
        self.liveness.probe_before_each_op
    }
}
