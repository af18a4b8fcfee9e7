//! MQTT 3.1.1 stack: codec subset, topic matching, Sparkplug B payloads,
//! a broker mock with an edge-node simulator, and the MCP adapter.

pub mod adapter;
pub mod broker;
pub mod client;
pub mod codec;
pub mod simulator;
pub mod sparkplug;
pub mod topic;
