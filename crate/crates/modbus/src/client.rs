//! Modbus TCP client on one connection, with a single transparent
//! reconnect-and-retry per call. This is what lets a stale session recover
//! on the next call after an endpoint restart.

use std::io::Write;
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::codec::{
    decode_response_pdu, encode_request_adu, read_adu, split_adu, ExceptionCode, MbapHeader,
    RequestPdu, ResponsePdu, UNIT_ID,
};

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub host: String,
    pub port: u16,
    pub connect_timeout: Duration,
    pub io_timeout: Duration,
}

impl ClientConfig {
    pub fn new(host: &str, port: u16) -> ClientConfig {
        ClientConfig {
            host: host.to_string(),
            port,
            connect_timeout: Duration::from_millis(1000),
            io_timeout: Duration::from_millis(2000),
        }
    }

    pub fn endpoint_uri(&self) -> String {
        format!("modbus://{}:{}", self.host, self.port)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("modbus exception {}", .0.name())]
    Exception(ExceptionCode),
}

pub struct ModbusClient {
    config: ClientConfig,
    stream: Option<TcpStream>,
    next_transaction: u16,
}

impl ModbusClient {
    pub fn new(config: ClientConfig) -> ModbusClient {
        ModbusClient { config, stream: None, next_transaction: 0 }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn is_connected(&self) -> bool {
        self.stream.is_some()
    }

    fn connect(&mut self) -> std::io::Result<()> {
        let addr: SocketAddr = (self.config.host.as_str(), self.config.port)
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "no address"))?;
        let stream = TcpStream::connect_timeout(&addr, self.config.connect_timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(self.config.io_timeout))?;
        stream.set_write_timeout(Some(self.config.io_timeout))?;
        self.stream = Some(stream);
        Ok(())
    }

    fn exchange(&mut self, request: &RequestPdu) -> std::io::Result<Result<ResponsePdu, ClientError>> {
        let transaction = self.next_transaction;
        self.next_transaction = self.next_transaction.wrapping_add(1);
        let adu = encode_request_adu(MbapHeader { transaction_id: transaction, unit_id: UNIT_ID }, request)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        let stream = self.stream.as_mut().expect("connected");
        stream.write_all(&adu)?;
        let frame = read_adu(stream)?;
        match split_adu(&frame) {
            Ok((header, pdu_bytes)) => {
                if header.transaction_id != transaction {
                    return Ok(Err(ClientError::Protocol(format!(
                        "transaction id mismatch: sent {transaction}, got {}",
                        header.transaction_id
                    ))));
                }
                match decode_response_pdu(request, pdu_bytes) {
                    Ok(ResponsePdu::Exception { code, .. }) => Ok(Err(ClientError::Exception(code))),
                    Ok(pdu) => Ok(Ok(pdu)),
                    Err(e) => Ok(Err(ClientError::Protocol(e.to_string()))),
                }
            }
            Err(e) => Ok(Err(ClientError::Protocol(e.to_string()))),
        }
    }

    /// Executes one request. On connection failure the client reconnects
    /// once and retries, so a call needs at most two attempts; the attempt
    /// count used is reported for envelope metadata.
    pub fn execute(&mut self, request: &RequestPdu) -> (Result<ResponsePdu, ClientError>, u32) {
        let mut last_io_error = String::new();
        for attempt in 1..=2u32 {
            if self.stream.is_none() {
                if let Err(e) = self.connect() {
                    last_io_error = e.to_string();
                    continue;
                }
            }
            match self.exchange(request) {
                Ok(result) => return (result, attempt),
                Err(e) => {
                    // connection is stale; drop it and retry once
                    self.stream = None;
                    last_io_error = e.to_string();
                }
            }
        }
        (Err(ClientError::Unreachable(last_io_error)), 2)
    }

    pub fn disconnect(&mut self) {
        self.stream = None;
    }
}
