//! UA-style node-model stack: node ids, wire protocol, client with a
//! liveness-probe reconnect path, mock plant server, and the MCP adapter.

pub mod adapter;
pub mod client;
pub mod mock;
pub mod node;
pub mod wire;
