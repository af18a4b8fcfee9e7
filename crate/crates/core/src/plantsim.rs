//! Process-variable dynamics shared by the protocol mocks.
//!
//! Both mock plants run the same difference equations so cross-protocol
//! trajectories agree. The Modbus mock works directly in register units
//! (fixed-point, physical value x 10); the node-model mock converts at its
//! boundary.

/// Dynamics constants, all in register units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Temperature the plant relaxes to with the heater off (20.0 C).
    pub ambient: f64,
    /// Temperature gain per unit heater power per second.
    pub k_heater: f64,
    /// Cooling rate toward ambient per second.
    pub k_cool: f64,
    /// Per-tick relaxation factor for pressure and flow.
    pub relax: f64,
    pub pressure_on: f64,
    pub pressure_off: f64,
    pub flow_on: f64,
    pub flow_off: f64,
}

impl Default for PlantParams {
    fn default() -> PlantParams {
        PlantParams {
            ambient: 200.0,
            k_heater: 0.05,
            k_cool: 0.1,
            relax: 0.2,
            pressure_on: 1200.0,
            pressure_off: 900.0,
            flow_on: 600.0,
            flow_off: 100.0,
        }
    }
}

/// Simulated sensor state, register units (value x 10).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub temperature: f64,
    pub pressure: f64,
    pub flow_rate: f64,
    pub tank_level: f64,
    pub vibration: f64,
    pub ph: f64,
    pub humidity: f64,
    pub motor_speed: f64,
    pub production_count: u64,
}

impl Default for PlantState {
    fn default() -> PlantState {
        PlantState {
            temperature: 234.0,
            pressure: 1013.0,
            flow_rate: 500.0,
            tank_level: 750.0,
            vibration: 30.0,
            ph: 70.0,
            humidity: 450.0,
            motor_speed: 1500.0,
            production_count: 0,
        }
    }
}

/// Actuator inputs read fresh each tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInputs {
    pub heater_power: f64,
    pub pump_running: bool,
    pub conveyor_speed: f64,
}

/// Advances the plant by one tick of `dt_s` seconds.
///
/// Heater power drives temperature against ambient cooling; the pump state
/// relaxes pressure and flow toward their on/off operating points;
/// production counts up while the conveyor moves. All values stay clamped
/// to the uint16 range so register banks never overflow.
pub fn step(state: &mut PlantState, inputs: &PlantInputs, params: &PlantParams, dt_s: f64) {
    debug_assert!(dt_s > 0.0);
    state.temperature +=
        dt_s * (params.k_heater * inputs.heater_power - params.k_cool * (state.temperature - params.ambient));

    let pressure_target = if inputs.pump_running { params.pressure_on } else { params.pressure_off };
    let flow_target = if inputs.pump_running { params.flow_on } else { params.flow_off };
    state.pressure += params.relax * (pressure_target - state.pressure);
    state.flow_rate += params.relax * (flow_target - state.flow_rate);

    if inputs.conveyor_speed > 0.0 {
        state.production_count = state.production_count.saturating_add(1).min(u16::MAX as u64);
    }

    state.temperature = clamp_u16(state.temperature);
    state.pressure = clamp_u16(state.pressure);
    state.flow_rate = clamp_u16(state.flow_rate);
    state.tank_level = clamp_u16(state.tank_level);
}

fn clamp_u16(value: f64) -> f64 {
    value.clamp(0.0, u16::MAX as f64)
}

/// Quantizes a register-unit value into a uint16 register.
pub fn quantize(value: f64) -> u16 {
    value.round().clamp(0.0, u16::MAX as f64) as u16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ambient_with_heater_off_is_a_fixed_point() {
        let params = PlantParams::default();
        let mut state = PlantState { temperature: params.ambient, ..PlantState::default() };
        let before = state.temperature;
        step(&mut state, &PlantInputs::default(), &params, 1.0);
        assert_eq!(state.temperature, before);
    }

    #[test]
    fn heater_raises_temperature_from_ambient() {
        let params = PlantParams::default();
        let mut state = PlantState { temperature: params.ambient, ..PlantState::default() };
        let inputs = PlantInputs { heater_power: 500.0, ..PlantInputs::default() };
        let mut last = state.temperature;
        for _ in 0..10 {
            step(&mut state, &inputs, &params, 1.0);
            assert!(state.temperature > last, "temperature must rise each tick");
            last = state.temperature;
        }
    }

    #[test]
    fn pump_off_lets_flow_decay() {
        let params = PlantParams::default();
        let mut state = PlantState::default();
        let inputs = PlantInputs { pump_running: false, ..PlantInputs::default() };

        // independent reference: same difference equation evaluated scalar
        // by scalar, separate from the vectorized state update above
        let mut reference = state.flow_rate;
        for _ in 0..5 {
            step(&mut state, &inputs, &params, 1.0);
            reference += 0.2 * (100.0 - reference);
            assert!((state.flow_rate - reference).abs() < 1e-9);
        }
        assert!(state.flow_rate < 500.0);
    }

    #[test]
    fn deterministic_given_initial_state_and_tick_count() {
        let params = PlantParams::default();
        let inputs = PlantInputs { heater_power: 120.0, pump_running: true, conveyor_speed: 10.0 };
        let run = || {
            let mut state = PlantState::default();
            for _ in 0..50 {
                step(&mut state, &inputs, &params, 1.0);
            }
            state
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn values_stay_in_register_range() {
        let params = PlantParams::default();
        let mut state = PlantState { temperature: 65000.0, ..PlantState::default() };
        let inputs = PlantInputs { heater_power: 65535.0, pump_running: true, conveyor_speed: 1.0 };
        for _ in 0..1000 {
            step(&mut state, &inputs, &params, 1.0);
            for v in [state.temperature, state.pressure, state.flow_rate, state.tank_level] {
                assert!((0.0..=65535.0).contains(&v));
            }
        }
        assert!(state.production_count <= u16::MAX as u64);
    }
}
