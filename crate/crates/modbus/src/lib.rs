//! Modbus TCP stack: codec, client, mock device, and the MCP adapter.

pub mod adapter;
pub mod client;
pub mod codec;
pub mod data;
pub mod mock;
