//! Parse/render inverse for randomized node ids, and the cross-mock
//! trajectory agreement check.

use otbridge_ua::node::NodeId;
use proptest::prelude::*;

proptest! {
    #[test]
    fn numeric_ids_round_trip(namespace in any::<u16>(), id in any::<u64>()) {
        let node = NodeId::numeric(namespace, id);
        prop_assert_eq!(NodeId::parse(&node.to_string()).unwrap(), node);
    }

    #[test]
    fn text_ids_round_trip(namespace in any::<u16>(), name in "[a-zA-Z0-9_;=./-]{1,24}") {
        let node = NodeId::text(namespace, &name);
        prop_assert_eq!(NodeId::parse(&node.to_string()).unwrap(), node);
    }
}

/// Both mocks run the same dynamics core; for identical core inputs their
/// trajectories agree bit-for-bit after fixed-point unscaling.
#[test]
fn trajectories_mirror_the_modbus_mock_after_unscaling() {
    let mut ua_space = otbridge_ua::mock::build_address_space();
    // heater 50.0 display units = register 500
    ua_space
        .write(&NodeId::parse("ns=2;s=heater_power").unwrap(), &serde_json::json!(50.0))
        .unwrap();

    let mut register_sim = otbridge_core::plantsim::PlantState::default();
    let inputs = otbridge_core::plantsim::PlantInputs {
        heater_power: 500.0,
        pump_running: true,
        conveyor_speed: 0.0,
    };

    for _ in 0..25 {
        ua_space.sim_tick(1.0);
        otbridge_core::plantsim::step(
            &mut register_sim,
            &inputs,
            &otbridge_core::plantsim::PlantParams::default(),
            1.0,
        );
        let ua_temperature = ua_space
            .read(&NodeId::parse("ns=2;s=temperature").unwrap())
            .unwrap()
            .1
            .as_f64()
            .unwrap();
        assert_eq!(ua_temperature, register_sim.temperature / 10.0, "identical core, identical trajectory");
        let ua_pressure = ua_space
            .read(&NodeId::parse("ns=2;s=pressure").unwrap())
            .unwrap()
            .1
            .as_f64()
            .unwrap();
        assert_eq!(ua_pressure, register_sim.pressure / 10.0);
    }
}
