//! Node identifiers and node metadata for the hierarchical information
//! model.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeIdentifier {
    Numeric(u64),
    Text(String),
}

/// A namespaced node id with the canonical text forms `ns={n};i={num}` and
/// `ns={n};s={str}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub namespace: u16,
    pub identifier: NodeIdentifier,
}

impl NodeId {
    pub fn numeric(namespace: u16, id: u64) -> NodeId {
        NodeId { namespace, identifier: NodeIdentifier::Numeric(id) }
    }

    pub fn text(namespace: u16, id: &str) -> NodeId {
        NodeId { namespace, identifier: NodeIdentifier::Text(id.to_string()) }
    }

    /// Parses the canonical form; `parse(render(x)) == x`.
    pub fn parse(text: &str) -> Result<NodeId, String> {
        let (ns_part, id_part) = text
            .split_once(';')
            .ok_or_else(|| format!("node id `{text}` must be `ns=<n>;i=<num>` or `ns=<n>;s=<str>`"))?;
        let namespace: u16 = ns_part
            .strip_prefix("ns=")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| format!("bad namespace in `{text}`"))?;
        if let Some(numeric) = id_part.strip_prefix("i=") {
            let id: u64 = numeric.parse().map_err(|_| format!("bad numeric identifier in `{text}`"))?;
            Ok(NodeId::numeric(namespace, id))
        } else if let Some(name) = id_part.strip_prefix("s=") {
            if name.is_empty() {
                return Err(format!("empty string identifier in `{text}`"));
            }
            Ok(NodeId::text(namespace, name))
        } else {
            Err(format!("node id `{text}` must use an `i=` or `s=` identifier"))
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.identifier {
            NodeIdentifier::Numeric(id) => write!(f, "ns={};i={}", self.namespace, id),
            NodeIdentifier::Text(id) => write!(f, "ns={};s={}", self.namespace, id),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<NodeId, D::Error> {
        let text = String::deserialize(deserializer)?;
        NodeId::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Object,
    Variable,
    Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UaDataType {
    Float,
    Double,
    Boolean,
    Int32,
    String,
}

impl UaDataType {
    pub fn as_str(self) -> &'static str {
        match self {
            UaDataType::Float => "float",
            UaDataType::Double => "double",
            UaDataType::Boolean => "boolean",
            UaDataType::Int32 => "int32",
            UaDataType::String => "string",
        }
    }
}

/// Browse-level node metadata. `datatype` is present exactly for variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub node_id: NodeId,
    pub browse_name: String,
    pub node_class: NodeClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<UaDataType>,
    pub readable: bool,
    pub writable: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_fault_scenario_id() {
        let id = NodeId::parse("ns=2;i=99999").unwrap();
        assert_eq!(id, NodeId::numeric(2, 99999));
    }

    #[test]
    fn parses_the_default_status_node() {
        assert_eq!(NodeId::parse("ns=0;i=2256").unwrap(), NodeId::numeric(0, 2256));
    }

    #[test]
    fn wrong_separator_is_rejected() {
        assert!(NodeId::parse("ns=2,i=5").is_err());
        assert!(NodeId::parse("ns=2;x=5").is_err());
        assert!(NodeId::parse("i=5").is_err());
        assert!(NodeId::parse("ns=2;s=").is_err());
    }

    #[test]
    fn render_then_parse_is_identity() {
        for id in [
            NodeId::numeric(0, 84),
            NodeId::numeric(2, 99999),
            NodeId::text(2, "temperature"),
            NodeId::text(2, "has;semicolon"),
        ] {
            assert_eq!(NodeId::parse(&id.to_string()).unwrap(), id);
        }
    }
}
