//! The 7-tool adapter against the mock plant server: reads, writes, fault
//! classes, traversal, methods, and probe-driven recovery.

use otbridge_core::envelope::{validate_envelope, Envelope, ErrorClass};
use otbridge_core::mcp::ToolRegistry;
use otbridge_ua::adapter::{build_registry, parse_endpoint_uri, AdapterConfig, TOOL_NAMES};
use otbridge_ua::mock::{self, MockOptions};
use serde_json::{json, Value};

fn frozen_mock() -> mock::MockHandle {
    mock::start("127.0.0.1", 0, MockOptions { sim: false, ..MockOptions::default() }).unwrap()
}

fn adapter_for(handle: &mock::MockHandle) -> ToolRegistry {
    build_registry(&AdapterConfig { host: "127.0.0.1".to_string(), port: handle.addr.port() })
}

fn invoke(registry: &ToolRegistry, tool: &str, args: Value) -> Envelope {
    let env = registry.invoke(tool, &args).unwrap_or_else(|| panic!("tool {tool} not registered"));
    let raw = serde_json::to_value(&env).unwrap();
    assert!(validate_envelope(&raw).is_empty(), "tool {tool} produced an invalid envelope: {raw}");
    env
}

#[test]
fn manifest_is_exactly_the_seven_tools() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let names: Vec<String> = registry.descriptors().iter().map(|d| d.name.clone()).collect();
    assert_eq!(names, TOOL_NAMES);
}

#[test]
fn temperature_read_returns_a_float() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "read_node", json!({"node": "ns=2;s=temperature"}));
    assert!(env.success, "{:?}", env.error);
    let data = env.data.as_ref().unwrap();
    assert_eq!(data["datatype"], "float");
    assert_eq!(data["value"], json!(23.4));
    assert_eq!(env.meta.attempts, 1);
    assert_eq!(env.meta.protocol, "ua");
}

#[test]
fn unknown_node_read_is_illegal_address() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "read_node", json!({"node": "ns=2;i=99999"}));
    assert!(!env.success);
    assert_eq!(env.error_class(), Some(ErrorClass::IllegalAddress));
}

#[test]
fn malformed_node_id_is_invalid_input() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "read_node", json!({"node": "ns=2,i=5"}));
    assert_eq!(env.error_class(), Some(ErrorClass::InvalidInput));
}

#[test]
fn valve_write_and_readback() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    for repetition in [0.0f64, 5.0, 12.0] {
        let value = 25.0 + repetition;
        let env = invoke(&registry, "write_node", json!({"node": "ns=2;s=valve_position", "value": value}));
        assert!(env.success, "{:?}", env.error);
        let env = invoke(&registry, "read_node", json!({"node": "ns=2;s=valve_position"}));
        assert_eq!(env.data.as_ref().unwrap()["value"], json!(value));
    }
}

#[test]
fn wrong_type_write_is_protocol_error_with_type_mismatch_reason() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "write_node", json!({"node": "ns=2;s=valve_position", "value": "hello"}));
    assert!(!env.success);
    assert_eq!(env.error_class(), Some(ErrorClass::ProtocolError));
    let details = env.error.as_ref().unwrap().details.as_ref().unwrap();
    assert_eq!(details["reason"], "type_mismatch");
}

#[test]
fn read_only_node_write_is_protocol_error_with_access_denied_reason() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "write_node", json!({"node": "ns=2;s=temperature", "value": 99.0}));
    assert!(!env.success);
    assert_eq!(env.error_class(), Some(ErrorClass::ProtocolError));
    let details = env.error.as_ref().unwrap().details.as_ref().unwrap();
    assert_eq!(details["reason"], "access_denied");
}

#[test]
fn browse_actuators_names_six_variables() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "browse", json!({"node": "ns=2;s=Actuators"}));
    let children = env.data.as_ref().unwrap()["children"].as_array().unwrap();
    assert_eq!(children.len(), 6);
    assert!(children.iter().all(|c| c["node_class"] == "variable"));

    // browsing a leaf yields no children; browsing the root shows the folders
    let env = invoke(&registry, "browse", json!({"node": "ns=2;s=temperature"}));
    assert!(env.data.as_ref().unwrap()["children"].as_array().unwrap().is_empty());
    let env = invoke(&registry, "browse", json!({}));
    let folders: Vec<&str> = env.data.as_ref().unwrap()["children"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["browse_name"].as_str().unwrap())
        .collect();
    assert_eq!(folders, ["Sensors", "Actuators", "Status", "Methods"]);
}

#[test]
fn multi_node_read_preserves_request_order() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(
        &registry,
        "read_nodes",
        json!({"nodes": ["ns=2;s=temperature", "ns=2;s=pressure", "ns=2;s=valve_position"]}),
    );
    assert!(env.success);
    let values = env.data.as_ref().unwrap()["values"].as_array().unwrap();
    assert_eq!(values.len(), 3);
    assert_eq!(values[0]["node"], "ns=2;s=temperature");
    assert_eq!(values[1]["node"], "ns=2;s=pressure");
    assert_eq!(values[2]["node"], "ns=2;s=valve_position");
}

#[test]
fn list_variables_is_the_fixpoint_of_repeated_browse() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "list_variables", json!({}));
    assert!(env.success);
    let data = env.data.as_ref().unwrap();
    assert_eq!(data["count"], 17, "8 sensors + 6 actuators + 3 status variables");

    // the tool's client-driven traversal must equal the server's own
    // enumeration
    let server_side = mock
        .space
        .lock()
        .unwrap()
        .list_variables(&otbridge_ua::node::NodeId::parse(mock::ROOT_NODE).unwrap())
        .unwrap();
    let tool_ids: Vec<String> = data["variables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["node_id"].as_str().unwrap().to_string())
        .collect();
    let server_ids: Vec<String> = server_side.iter().map(|n| n.to_string()).collect();
    assert_eq!(tool_ids, server_ids);

    // rooted enumeration and id-list determinism (uptime_s is computed on
    // read, so values may differ between traversals)
    let env = invoke(&registry, "list_variables", json!({"root": "ns=2;s=Sensors"}));
    assert_eq!(env.data.as_ref().unwrap()["count"], 8);
    let again = invoke(&registry, "list_variables", json!({}));
    let again_ids: Vec<String> = again.data.as_ref().unwrap()["variables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["node_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(again_ids, tool_ids);
}

#[test]
fn server_status_and_method_calls() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let env = invoke(&registry, "server_status", json!({}));
    let data = env.data.as_ref().unwrap();
    assert_eq!(data["state"], "running");
    assert!(data["uptime_s"].as_f64().unwrap() >= 0.0);

    // tick twice by hand, then reset through the method path
    mock.space.lock().unwrap().sim_tick(1.0);
    mock.space.lock().unwrap().sim_tick(1.0);
    let env = invoke(&registry, "call_method", json!({"method": "ns=2;s=reset_counters"}));
    assert!(env.success);
    let env = invoke(&registry, "read_node", json!({"node": "ns=2;s=simulation_tick"}));
    assert_eq!(env.data.as_ref().unwrap()["value"], json!(0));

    let env = invoke(&registry, "call_method", json!({"method": "ns=2;s=stop_pump"}));
    assert_eq!(env.data.as_ref().unwrap()["outputs"]["pump_running"], false);

    let env = invoke(&registry, "call_method", json!({"method": "ns=2;s=no_such"}));
    assert_eq!(env.error_class(), Some(ErrorClass::IllegalAddress));
}

#[test]
fn restart_between_calls_recovers_via_the_liveness_probe() {
    let mut mock = frozen_mock();
    let port = mock.addr.port();
    let registry = adapter_for(&mock);

    let env = invoke(&registry, "read_node", json!({"node": "ns=2;s=temperature"}));
    assert!(env.success);
    assert_eq!(env.meta.attempts, 1);

    mock.stop();
    let _mock2 = mock::start("127.0.0.1", port, MockOptions { sim: false, ..MockOptions::default() }).unwrap();

    // the stale connection fails the probe; a fresh one is established
    // transparently inside the same tool call
    let env = invoke(&registry, "read_node", json!({"node": "ns=2;s=temperature"}));
    assert!(env.success, "post-restart call must succeed: {:?}", env.error);
    assert_eq!(env.meta.attempts, 2);
}

#[test]
fn endpoint_down_yields_endpoint_unreachable() {
    let mut mock = frozen_mock();
    let registry = adapter_for(&mock);
    mock.stop();
    let env = invoke(&registry, "read_node", json!({"node": "ns=2;s=temperature"}));
    assert!(!env.success);
    assert_eq!(env.error_class(), Some(ErrorClass::EndpointUnreachable));
    assert_eq!(env.meta.attempts, 2, "one reconnect retry is part of the failure path");
}

#[test]
fn endpoint_uri_mapping_accepts_the_opc_style_form() {
    assert_eq!(parse_endpoint_uri("opc.tcp://127.0.0.1:4840"), Some(("127.0.0.1".to_string(), 4840)));
    assert_eq!(parse_endpoint_uri("10.0.0.5:14840"), Some(("10.0.0.5".to_string(), 14840)));
    assert_eq!(parse_endpoint_uri("no-port"), None);
}

#[test]
fn write_then_read_coherence_holds_across_datatypes() {
    let mock = frozen_mock();
    let registry = adapter_for(&mock);
    let cases: Vec<(&str, Value)> = vec![
        ("ns=2;s=fan_speed", json!(42.5)),
        ("ns=2;s=pump_running", json!(false)),
        ("ns=2;s=emergency_stop", json!(true)),
        ("ns=2;s=conveyor_speed", json!(10.0)),
    ];
    for (node, value) in cases {
        assert!(invoke(&registry, "write_node", json!({"node": node, "value": value})).success);
        let env = invoke(&registry, "read_node", json!({"node": node}));
        assert_eq!(env.data.as_ref().unwrap()["value"], value, "{node}");
    }
}
