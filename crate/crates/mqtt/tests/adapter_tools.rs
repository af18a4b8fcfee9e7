//! The 15-tool MQTT adapter exercised against the broker mock.

use std::time::{Duration, Instant};

use otbridge_core::envelope::{validate_envelope, Envelope, ErrorClass};
use otbridge_core::mcp::ToolRegistry;
use otbridge_mqtt::adapter::{build_registry, AdapterConfig, TOOL_NAMES};
use otbridge_mqtt::broker;
use otbridge_mqtt::client::ReconnectPolicy;
use otbridge_mqtt::sparkplug::{decode_payload, DEFAULT_EDGE_NODE_ID, DEFAULT_GROUP_ID};
use serde_json::{json, Value};

fn adapter_for(port: u16) -> ToolRegistry {
    build_registry(&AdapterConfig {
        host: "127.0.0.1".to_string(),
        port,
        group_id: DEFAULT_GROUP_ID.to_string(),
        edge_node_id: DEFAULT_EDGE_NODE_ID.to_string(),
        policy: ReconnectPolicy::default(),
    })
}

fn invoke(registry: &ToolRegistry, tool: &str, args: Value) -> Envelope {
    let env = registry.invoke(tool, &args).unwrap_or_else(|| panic!("tool {tool} not registered"));
    let raw = serde_json::to_value(&env).unwrap();
    assert!(validate_envelope(&raw).is_empty(), "tool {tool} produced an invalid envelope: {raw}");
    env
}

fn wait_until_connected(registry: &ToolRegistry) {
    let deadline = Instant::now() + Duration::from_secs(3);
    loop {
        let env = invoke(registry, "broker_info", json!({}));
        if env.data.as_ref().unwrap()["connected"] == true {
            return;
        }
        assert!(Instant::now() < deadline, "adapter never connected to the broker");
        std::thread::sleep(Duration::from_millis(10));
    }
}

#[test]
fn manifest_is_exactly_the_fifteen_tools() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    let names: Vec<String> = registry.descriptors().iter().map(|d| d.name.clone()).collect();
    assert_eq!(names, TOOL_NAMES);
}

#[test]
fn broker_info_reports_connack_and_subscription_count() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);
    let env = invoke(&registry, "broker_info", json!({}));
    let data = env.data.as_ref().unwrap();
    assert_eq!(data["connected"], true);
    assert_eq!(data["broker_returns_connack_code"], 0);
    assert_eq!(data["subscriptions_count"], 0);
}

#[test]
fn subscribe_returns_granted_qos_and_lists_it() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);

    let env = invoke(&registry, "subscribe", json!({"topic_filter": "sensors/#", "qos": 0}));
    assert!(env.success, "{:?}", env.error);
    assert_eq!(env.data.as_ref().unwrap()["granted"], json!([0]));

    let env = invoke(&registry, "list_subscriptions", json!({}));
    assert_eq!(env.data.as_ref().unwrap()["count"], 1);

    let env = invoke(&registry, "unsubscribe", json!({"topic_filter": "sensors/#"}));
    assert!(env.success);
    let env = invoke(&registry, "list_subscriptions", json!({}));
    assert_eq!(env.data.as_ref().unwrap()["count"], 0);
}

#[test]
fn publish_control_payload_succeeds() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);
    let env = invoke(
        &registry,
        "publish",
        json!({"topic": "factory/line1/cmd", "payload": "START", "qos": 0, "retain": false}),
    );
    assert!(env.success);
    assert_eq!(env.data.as_ref().unwrap()["bytes"], 5);
}

#[test]
fn empty_topic_publish_is_invalid_input() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);
    let env = invoke(&registry, "publish", json!({"topic": "", "payload": "x", "qos": 0}));
    assert!(!env.success);
    assert_eq!(env.error_class(), Some(ErrorClass::InvalidInput));
    assert_eq!(env.error.as_ref().unwrap().message, "topic must be non-empty");
}

#[test]
fn invalid_qos_subscribe_is_invalid_input() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);
    let env = invoke(&registry, "subscribe", json!({"topic_filter": "sensors/#", "qos": 5}));
    assert!(!env.success);
    assert_eq!(env.error_class(), Some(ErrorClass::InvalidInput));
    assert!(env.error.as_ref().unwrap().message.contains("invalid qos 5"));

    // qos 2 is rejected with its own message
    let env = invoke(&registry, "subscribe", json!({"topic_filter": "sensors/#", "qos": 2}));
    assert_eq!(env.error_class(), Some(ErrorClass::InvalidInput));
    assert!(env.error.as_ref().unwrap().message.contains("qos 2"));
}

#[test]
fn ddata_publish_renders_the_device_topic_and_counts_sequence() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);

    for repetition in 0..3i64 {
        let value = 20.0 + repetition as f64;
        let env = invoke(
            &registry,
            "sp_publish_ddata",
            json!({"device": "device-1", "metrics": [{"name": "temperature", "datatype": "float", "value": value}]}),
        );
        assert!(env.success, "{:?}", env.error);
        let data = env.data.as_ref().unwrap();
        assert_eq!(
            data["topic"],
            format!("spBv1.0/{DEFAULT_GROUP_ID}/DDATA/{DEFAULT_EDGE_NODE_ID}/device-1")
        );
        // implicit NBIRTH takes seq 0, so DDATA seq runs 1, 2, 3
        assert_eq!(data["seq"], repetition + 1);
        assert_eq!(data["metric_count"], 1);
    }
}

#[test]
fn sparkplug_stream_from_the_adapter_decodes_end_to_end() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let port = broker.addr.port();
    let registry = adapter_for(port);
    wait_until_connected(&registry);

    // subscribe through the adapter itself and loop the publish back
    invoke(&registry, "subscribe", json!({"topic_filter": "spBv1.0/#", "qos": 0}));
    let env = invoke(
        &registry,
        "sp_publish_nbirth",
        json!({"metrics": [{"name": "node_status", "datatype": "string", "value": "online"}]}),
    );
    assert!(env.success);
    assert_eq!(env.data.as_ref().unwrap()["seq"], 0);

    let env = invoke(
        &registry,
        "sp_publish_dbirth",
        json!({"device": "device-2", "metrics": [{"name": "pressure", "datatype": "float", "value": 1013.0}]}),
    );
    assert!(env.success);
    assert_eq!(env.data.as_ref().unwrap()["seq"], 1);

    let deadline = Instant::now() + Duration::from_secs(2);
    loop {
        let env = invoke(&registry, "get_messages", json!({"filter": "spBv1.0/#", "limit": 10}));
        let data = env.data.as_ref().unwrap();
        if data["count"].as_u64().unwrap() >= 2 {
            break;
        }
        assert!(Instant::now() < deadline, "looped-back sparkplug messages never arrived");
        std::thread::sleep(Duration::from_millis(10));
    }

    let env = invoke(&registry, "clear_messages", json!({}));
    assert!(env.data.as_ref().unwrap()["cleared"].as_u64().unwrap() >= 2);
}

#[test]
fn ncmd_and_dcmd_and_deaths_render_correct_scopes() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let registry = adapter_for(broker.addr.port());
    wait_until_connected(&registry);

    let env = invoke(&registry, "sp_publish_ncmd", json!({"metrics": [{"name": "rebirth", "value": true}]}));
    assert!(env.success);
    assert!(env.data.as_ref().unwrap()["topic"].as_str().unwrap().contains("/NCMD/"));

    let env = invoke(
        &registry,
        "sp_publish_dcmd",
        json!({"device": "device-1", "metrics": [{"name": "setpoint", "datatype": "double", "value": 55.5}]}),
    );
    assert!(env.success);
    assert!(env.data.as_ref().unwrap()["topic"].as_str().unwrap().ends_with("/device-1"));

    let env = invoke(&registry, "sp_publish_ddeath", json!({"device": "device-1"}));
    assert!(env.success);

    let env = invoke(&registry, "sp_publish_ndeath", json!({}));
    assert!(env.success);
    assert!(env.data.as_ref().unwrap()["topic"].as_str().unwrap().contains("/NDEATH/"));
}

#[test]
fn tools_fail_with_endpoint_unreachable_when_broker_never_started() {
    // port 1 is never listening
    let registry = adapter_for(1);
    std::thread::sleep(Duration::from_millis(50));
    for (tool, args) in [
        ("subscribe", json!({"topic_filter": "a/b", "qos": 0})),
        ("publish", json!({"topic": "a/b", "payload": "x"})),
        ("sp_publish_ddata", json!({"device": "device-1", "metrics": []})),
    ] {
        let env = invoke(&registry, tool, args);
        assert!(!env.success, "{tool} must fail without a broker");
        assert_eq!(env.error_class(), Some(ErrorClass::EndpointUnreachable), "{tool}");
    }
    // inspection tools still answer, reporting the disconnected state
    let env = invoke(&registry, "broker_info", json!({}));
    assert!(env.success);
    assert_eq!(env.data.as_ref().unwrap()["connected"], false);
}

#[test]
fn published_sparkplug_payload_is_third_party_decodable() {
    // capture what the adapter puts on the wire via a raw client
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let port = broker.addr.port();
    let observer = otbridge_mqtt::client::MqttClient::connect(
        "127.0.0.1",
        port,
        "observer",
        ReconnectPolicy::default(),
    );
    let deadline = Instant::now() + Duration::from_secs(2);
    while !observer.is_connected() {
        assert!(Instant::now() < deadline);
        std::thread::sleep(Duration::from_millis(10));
    }
    observer.subscribe("spBv1.0/#", 0, 2000).unwrap();

    let registry = adapter_for(port);
    wait_until_connected(&registry);
    invoke(
        &registry,
        "sp_publish_ddata",
        json!({"device": "device-1", "metrics": [{"name": "temperature", "datatype": "float", "value": 25.0}]}),
    );

    let deadline = Instant::now() + Duration::from_secs(2);
    let ddata = loop {
        if let Some(m) = observer
            .messages(None, usize::MAX)
            .into_iter()
            .find(|m| m.topic.contains("/DDATA/"))
        {
            break m;
        }
        assert!(Instant::now() < deadline, "DDATA never arrived");
        std::thread::sleep(Duration::from_millis(10));
    };
    let payload = decode_payload(&ddata.payload).unwrap();
    assert_eq!(payload.metrics[0].name, "temperature");
    assert_eq!(
        payload.metrics[0].value,
        otbridge_mqtt::sparkplug::MetricValue::Float(25.0)
    );
}
