//! Shared foundation for the protocol adapter suite: the response envelope
//! contract, the MCP stdio server/client, and the mock plant dynamics.

pub mod envelope;
pub mod mcp;
pub mod plantsim;

pub use envelope::{validate_envelope, CallMeta, Envelope, ErrorClass, ErrorInfo};
