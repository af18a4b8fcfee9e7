//! Minimal MCP-compatible JSON-RPC 2.0 framework over stdio.

pub mod client;
pub mod server;
pub mod wire;

pub use client::{open_session, CallOutcome, LaunchSpec, Session, SessionError};
pub use server::{serve, wrap_tool_result, ToolDescriptor, ToolHandler, ToolRegistry};
