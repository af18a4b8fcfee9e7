//! Property tests over the envelope contract.

use std::collections::BTreeMap;

use otbridge_core::envelope::{validate_envelope, CallMeta, Envelope, ErrorClass, ErrorInfo};
use proptest::prelude::*;
use serde_json::{json, Value};

fn arb_class() -> impl Strategy<Value = ErrorClass> {
    prop::sample::select(ErrorClass::ALL.to_vec())
}

fn arb_meta() -> impl Strategy<Value = CallMeta> {
    (
        0.0f64..10_000.0,
        "[a-z]{1,8}://[a-z0-9.:]{1,20}",
        1u32..5,
        prop::sample::select(vec!["modbus", "mqtt", "ua"]),
        prop::option::of(prop::collection::btree_map("[a-z]{1,6}", "[a-zA-Z0-9 ]{0,10}", 0..3)),
    )
        .prop_map(|(latency_ms, endpoint, attempts, protocol, trace)| CallMeta {
            latency_ms,
            endpoint,
            attempts,
            protocol: protocol.to_string(),
            trace: trace.map(|t| t.into_iter().collect::<BTreeMap<_, _>>()),
        })
}

fn arb_data() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(json!({})),
        prop::collection::btree_map("[a-z_]{1,8}", -1000i64..1000, 1..5)
            .prop_map(|m| serde_json::to_value(m).unwrap()),
        prop::collection::vec(0u16..u16::MAX, 0..8).prop_map(|v| json!({ "values": v })),
        "[\\PC]{0,24}".prop_map(|s| json!({ "text": s })),
    ]
}

fn arb_envelope() -> impl Strategy<Value = Envelope> {
    (arb_meta(), arb_data(), arb_class(), "[\\PC]{1,40}", any::<bool>()).prop_map(
        |(meta, data, class, message, success)| {
            if success {
                Envelope::ok(data, meta)
            } else {
                Envelope {
                    success: false,
                    data: None,
                    error: Some(ErrorInfo { class, message, details: Some(data) }),
                    meta,
                }
            }
        },
    )
}

proptest! {
    /// serialize -> parse -> serialize is byte-identical under the
    /// canonical key order.
    #[test]
    fn canonical_round_trip_is_byte_identical(env in arb_envelope()) {
        let first = env.to_canonical_json();
        let reparsed = Envelope::from_json(&first).unwrap();
        let second = reparsed.to_canonical_json();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(reparsed, env);
    }

    /// every constructed envelope validates clean and satisfies
    /// success XOR error.
    #[test]
    fn constructed_envelopes_validate(env in arb_envelope()) {
        let raw: Value = serde_json::from_str(&env.to_canonical_json()).unwrap();
        prop_assert!(validate_envelope(&raw).is_empty());
        prop_assert!(env.success ^ env.error.is_some());
    }
}
