//! The deterministic benchmark plan: 16 normal, 7 fault, 12 stress, and 3
//! recovery tasks, with the pinned argument patterns and oracle selectors.
//!
//! Per-suite repetitions are normal 30, fault 30, stress 10, recovery 20,
//! for 480 + 210 + 120 + 60 = 870 runs in total.

use otbridge_core::envelope::ErrorClass;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Normal,
    Fault,
    Stress,
    Recovery,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Normal, Suite::Fault, Suite::Stress, Suite::Recovery];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Normal => "normal",
            Suite::Fault => "fault",
            Suite::Stress => "stress",
            Suite::Recovery => "recovery",
        }
    }

    pub fn repetitions(self) -> u32 {
        match self {
            Suite::Normal | Suite::Fault => 30,
            Suite::Stress => 10,
            Suite::Recovery => 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Modbus,
    Mqtt,
    Ua,
    Cross,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Modbus => "modbus",
            Family::Mqtt => "mqtt",
            Family::Ua => "ua",
            Family::Cross => "cross",
        }
    }
}

/// Which adapter session a call goes to. The two Modbus sessions share the
/// mock but differ in the write guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKey {
    ModbusRw,
    ModbusRo,
    Mqtt,
    Ua,
}

/// What the oracle expects of one call's envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallExpect {
    Success,
    /// success=false with exactly this class.
    ErrorClass(ErrorClass),
    /// success=false with any class from the taxonomy (restart phases).
    StructuredFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallStep {
    pub session: SessionKey,
    pub tool: String,
    /// Argument template; `{"$rep_offset": base}` leaves substitute as
    /// base + repetition.
    pub args: Value,
    pub expect: CallExpect,
}

impl CallStep {
    fn ok(session: SessionKey, tool: &str, args: Value) -> CallStep {
        CallStep { session, tool: tool.to_string(), args, expect: CallExpect::Success }
    }

    fn failing(session: SessionKey, tool: &str, args: Value, class: ErrorClass) -> CallStep {
        CallStep { session, tool: tool.to_string(), args, expect: CallExpect::ErrorClass(class) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Call(CallStep),
    /// Calls issued with overlapping in-flight intervals.
    Parallel(Vec<CallStep>),
    StopMock(Family),
    /// Relaunches the family's mock and readiness-polls the port.
    RestartMock(Family),
    WaitMs(u64),
}

/// Task-level postcondition on top of the per-call expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Every call matched its expectation; nothing more.
    AllExpected,
    /// data.values[0] of the read step equals the value written.
    WriteReadback { write_step: usize, read_step: usize },
    /// data.value of the read step equals the value written.
    NodeReadback { write_step: usize, read_step: usize },
    /// data at `pointer` is an array of exactly `len` entries.
    ArrayLen { step: usize, pointer: String, len: usize },
    /// data at `pointer` is an integer >= `min`.
    MinCount { step: usize, pointer: String, min: u64 },
    /// data at `pointer` equals `value`.
    FieldEquals { step: usize, pointer: String, value: Value },
    /// data.granted is a non-empty array of QoS values <= 1.
    GrantedQos { step: usize },
    /// data.topic is the DDATA topic for `device`.
    DdataTopic { step: usize, device: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub suite: Suite,
    pub family: Family,
    pub repetitions: u32,
    pub steps: Vec<Step>,
    pub oracle: OracleKind,
}

impl TaskSpec {
    fn new(id: &str, suite: Suite, family: Family, steps: Vec<Step>, oracle: OracleKind) -> TaskSpec {
        TaskSpec {
            id: id.to_string(),
            suite,
            family,
            repetitions: suite.repetitions(),
            steps,
            oracle,
        }
    }

    pub fn call_steps(&self) -> Vec<&CallStep> {
        let mut out = Vec::new();
        for step in &self.steps {
            match step {
                Step::Call(call) => out.push(call),
                Step::Parallel(calls) => out.extend(calls.iter()),
                _ => {}
            }
        }
        out
    }
}

/// Replaces every `{"$rep_offset": base}` object with `base + repetition`,
/// keeping integers integral.
pub fn substitute(template: &Value, repetition: u32) -> Value {
    match template {
        Value::Object(map) => {
            if map.len() == 1 {
                if let Some(base) = map.get("$rep_offset") {
                    if let Some(base) = base.as_i64() {
                        return json!(base + repetition as i64);
                    }
                    if let Some(base) = base.as_f64() {
                        return json!(base + repetition as f64);
                    }
                }
            }
            Value::Object(map.iter().map(|(k, v)| (k.clone(), substitute(v, repetition))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| substitute(v, repetition)).collect()),
        other => other.clone(),
    }
}

/// After stopping a mock, the failing probe runs immediately; the relaunch
/// then waits out this hold so the endpoint stays down long enough for the
/// MQTT client's first 1 s backoff attempt to miss it.
pub const STRESS_DOWNTIME_MS: u64 = 1200;
/// The tight post-restart window the three-phase stress tasks use.
pub const STRESS_POST_RESTART_WAIT_MS: u64 = 1000;
/// Lets timer-driven reconnects land before the next repetition starts.
pub const STRESS_SETTLE_MS: u64 = 1500;

fn three_phase(id: &str, family: Family, session: SessionKey, tool: &str, args: Value) -> TaskSpec {
    TaskSpec::new(
        id,
        Suite::Stress,
        family,
        vec![
            Step::Call(CallStep::ok(session, tool, args.clone())),
            Step::StopMock(family),
            Step::Call(CallStep {
                session,
                tool: tool.to_string(),
                args: args.clone(),
                expect: CallExpect::StructuredFailure,
            }),
            Step::WaitMs(STRESS_DOWNTIME_MS),
            Step::RestartMock(family),
            Step::WaitMs(STRESS_POST_RESTART_WAIT_MS),
            Step::Call(CallStep::ok(session, tool, args)),
            Step::WaitMs(STRESS_SETTLE_MS),
        ],
        OracleKind::AllExpected,
    )
}

/// The full 38-task matrix.
pub fn load_plan() -> Vec<TaskSpec> {
    let mut plan = Vec::new();

    let modbus_block_read = json!({"address": 0, "count": 4});
    let ua_temperature = json!({"node": "ns=2;s=temperature"});

    // ---- normal suite ----
    plan.push(TaskSpec::new(
        "M1",
        Suite::Normal,
        Family::Modbus,
        vec![Step::Call(CallStep::ok(SessionKey::ModbusRw, "ping", json!({})))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "M2",
        Suite::Normal,
        Family::Modbus,
        vec![Step::Call(CallStep::ok(SessionKey::ModbusRw, "read_input_registers", modbus_block_read.clone()))],
        OracleKind::ArrayLen { step: 0, pointer: "/values".to_string(), len: 4 },
    ));
    plan.push(TaskSpec::new(
        "M3",
        Suite::Normal,
        Family::Modbus,
        vec![
            Step::Call(CallStep::ok(
                SessionKey::ModbusRw,
                "write_register",
                json!({"address": 10, "value": {"$rep_offset": 40}}),
            )),
            Step::Call(CallStep::ok(
                SessionKey::ModbusRw,
                "read_holding_registers",
                json!({"address": 10, "count": 1}),
            )),
        ],
        OracleKind::WriteReadback { write_step: 0, read_step: 1 },
    ));
    plan.push(TaskSpec::new(
        "M4",
        Suite::Normal,
        Family::Modbus,
        vec![Step::Call(CallStep::failing(
            SessionKey::ModbusRo,
            "write_register",
            json!({"address": 10, "value": 42}),
            ErrorClass::WritesDisabled,
        ))],
        OracleKind::AllExpected,
    ));

    plan.push(TaskSpec::new(
        "Q1",
        Suite::Normal,
        Family::Mqtt,
        vec![Step::Call(CallStep::ok(SessionKey::Mqtt, "broker_info", json!({})))],
        OracleKind::FieldEquals { step: 0, pointer: "/connected".to_string(), value: json!(true) },
    ));
    plan.push(TaskSpec::new(
        "Q2",
        Suite::Normal,
        Family::Mqtt,
        vec![Step::Call(CallStep::ok(
            SessionKey::Mqtt,
            "subscribe",
            json!({"topic_filter": "sensors/#", "qos": 0}),
        ))],
        OracleKind::GrantedQos { step: 0 },
    ));
    plan.push(TaskSpec::new(
        "Q3",
        Suite::Normal,
        Family::Mqtt,
        vec![Step::Call(CallStep::ok(
            SessionKey::Mqtt,
            "publish",
            json!({"topic": "factory/line1/cmd", "payload": "START", "qos": 0, "retain": false}),
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "Q4",
        Suite::Normal,
        Family::Mqtt,
        vec![Step::Call(CallStep::ok(
            SessionKey::Mqtt,
            "sp_publish_ddata",
            json!({
                "device": "device-1",
                "metrics": [{"name": "temperature", "datatype": "float", "value": {"$rep_offset": 20.0}}],
            }),
        ))],
        OracleKind::DdataTopic { step: 0, device: "device-1".to_string() },
    ));

    plan.push(TaskSpec::new(
        "O1",
        Suite::Normal,
        Family::Ua,
        vec![Step::Call(CallStep::ok(SessionKey::Ua, "read_node", ua_temperature.clone()))],
        OracleKind::FieldEquals { step: 0, pointer: "/datatype".to_string(), value: json!("float") },
    ));
    plan.push(TaskSpec::new(
        "O2",
        Suite::Normal,
        Family::Ua,
        vec![Step::Call(CallStep::ok(SessionKey::Ua, "browse", json!({"node": "ns=2;s=Actuators"})))],
        OracleKind::ArrayLen { step: 0, pointer: "/children".to_string(), len: 6 },
    ));
    plan.push(TaskSpec::new(
        "O3",
        Suite::Normal,
        Family::Ua,
        vec![
            Step::Call(CallStep::ok(
                SessionKey::Ua,
                "write_node",
                json!({"node": "ns=2;s=valve_position", "value": {"$rep_offset": 25.0}}),
            )),
            Step::Call(CallStep::ok(SessionKey::Ua, "read_node", json!({"node": "ns=2;s=valve_position"}))),
        ],
        OracleKind::NodeReadback { write_step: 0, read_step: 1 },
    ));
    plan.push(TaskSpec::new(
        "O4",
        Suite::Normal,
        Family::Ua,
        vec![Step::Call(CallStep::ok(SessionKey::Ua, "list_variables", json!({})))],
        OracleKind::MinCount { step: 0, pointer: "/count".to_string(), min: 14 },
    ));

    let snapshot_calls = || {
        vec![
            CallStep::ok(SessionKey::ModbusRw, "read_input_registers", modbus_block_read.clone()),
            CallStep::ok(
                SessionKey::Ua,
                "read_nodes",
                json!({"nodes": ["ns=2;s=temperature", "ns=2;s=pressure", "ns=2;s=valve_position"]}),
            ),
            CallStep::ok(SessionKey::Mqtt, "broker_info", json!({})),
        ]
    };
    let control_calls = || {
        vec![
            CallStep::ok(SessionKey::ModbusRw, "write_register", json!({"address": 5, "value": 77})),
            CallStep::ok(
                SessionKey::Ua,
                "write_node",
                json!({"node": "ns=2;s=pump_running", "value": true, "datatype": "boolean"}),
            ),
            CallStep::ok(
                SessionKey::Mqtt,
                "publish",
                json!({"topic": "factory/control/sequence", "payload": "X2-GO", "qos": 0, "retain": false}),
            ),
        ]
    };
    plan.push(TaskSpec::new(
        "X1",
        Suite::Normal,
        Family::Cross,
        snapshot_calls().into_iter().map(Step::Call).collect(),
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "X2",
        Suite::Normal,
        Family::Cross,
        control_calls().into_iter().map(Step::Call).collect(),
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "X1p",
        Suite::Normal,
        Family::Cross,
        vec![Step::Parallel(snapshot_calls())],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "X2p",
        Suite::Normal,
        Family::Cross,
        vec![Step::Parallel(control_calls())],
        OracleKind::AllExpected,
    ));

    // ---- fault suite ----
    plan.push(TaskSpec::new(
        "FM1",
        Suite::Fault,
        Family::Modbus,
        vec![Step::Call(CallStep::failing(
            SessionKey::ModbusRw,
            "read_holding_registers",
            json!({"address": 9999, "count": 1}),
            ErrorClass::ProtocolError,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "FM2",
        Suite::Fault,
        Family::Modbus,
        vec![Step::Call(CallStep::failing(
            SessionKey::ModbusRw,
            "write_register",
            json!({"address": 10, "value": 70000}),
            ErrorClass::RangeOverflow,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "FQ1",
        Suite::Fault,
        Family::Mqtt,
        vec![Step::Call(CallStep::failing(
            SessionKey::Mqtt,
            "publish",
            json!({"topic": "", "payload": "x", "qos": 0}),
            ErrorClass::InvalidInput,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "FQ2",
        Suite::Fault,
        Family::Mqtt,
        vec![Step::Call(CallStep::failing(
            SessionKey::Mqtt,
            "subscribe",
            json!({"topic_filter": "sensors/#", "qos": 5}),
            ErrorClass::InvalidInput,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "FO1",
        Suite::Fault,
        Family::Ua,
        vec![Step::Call(CallStep::failing(
            SessionKey::Ua,
            "read_node",
            json!({"node": "ns=2;i=99999"}),
            ErrorClass::IllegalAddress,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "FO2",
        Suite::Fault,
        Family::Ua,
        vec![Step::Call(CallStep::failing(
            SessionKey::Ua,
            "write_node",
            json!({"node": "ns=2;s=valve_position", "value": "hello"}),
            ErrorClass::ProtocolError,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "FX1",
        Suite::Fault,
        Family::Cross,
        vec![
            Step::Call(CallStep::ok(SessionKey::ModbusRw, "read_input_registers", modbus_block_read.clone())),
            Step::Call(CallStep::failing(
                SessionKey::Ua,
                "read_node",
                json!({"node": "ns=2;i=99999"}),
                ErrorClass::IllegalAddress,
            )),
            Step::Call(CallStep::ok(SessionKey::Mqtt, "broker_info", json!({}))),
        ],
        OracleKind::AllExpected,
    ));

    // ---- stress suite ----
    let concurrent = |call: CallStep, n: usize| -> Vec<CallStep> { vec![call; n] };
    plan.push(TaskSpec::new(
        "S1",
        Suite::Stress,
        Family::Modbus,
        vec![Step::Parallel(concurrent(
            CallStep::ok(SessionKey::ModbusRw, "read_input_registers", modbus_block_read.clone()),
            4,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "S2",
        Suite::Stress,
        Family::Mqtt,
        vec![Step::Parallel(concurrent(CallStep::ok(SessionKey::Mqtt, "broker_info", json!({})), 4))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "S3",
        Suite::Stress,
        Family::Ua,
        vec![Step::Parallel(concurrent(
            CallStep::ok(SessionKey::Ua, "read_node", ua_temperature.clone()),
            4,
        ))],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "S4",
        Suite::Stress,
        Family::Modbus,
        vec![Step::Parallel(vec![
            CallStep::ok(SessionKey::ModbusRw, "read_input_registers", modbus_block_read.clone()),
            CallStep::ok(SessionKey::ModbusRw, "write_register", json!({"address": 20, "value": 55})),
        ])],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "S5",
        Suite::Stress,
        Family::Mqtt,
        vec![Step::Parallel(vec![
            CallStep::ok(SessionKey::Mqtt, "broker_info", json!({})),
            CallStep::ok(
                SessionKey::Mqtt,
                "publish",
                json!({"topic": "stress/s5", "payload": "x", "qos": 0, "retain": false}),
            ),
        ])],
        OracleKind::AllExpected,
    ));
    plan.push(TaskSpec::new(
        "S6",
        Suite::Stress,
        Family::Ua,
        vec![Step::Parallel(vec![
            CallStep::ok(SessionKey::Ua, "read_node", ua_temperature.clone()),
            CallStep::ok(SessionKey::Ua, "write_node", json!({"node": "ns=2;s=fan_speed", "value": 33.0})),
        ])],
        OracleKind::AllExpected,
    ));

    let rapid_fire = |id: &str, family: Family, call: CallStep| {
        TaskSpec::new(
            id,
            Suite::Stress,
            family,
            (0..50).map(|_| Step::Call(call.clone())).collect(),
            OracleKind::AllExpected,
        )
    };
    plan.push(rapid_fire(
        "S7",
        Family::Modbus,
        CallStep::ok(SessionKey::ModbusRw, "read_input_registers", json!({"address": 0, "count": 1})),
    ));
    plan.push(rapid_fire("S8", Family::Mqtt, CallStep::ok(SessionKey::Mqtt, "broker_info", json!({}))));
    plan.push(rapid_fire("S9", Family::Ua, CallStep::ok(SessionKey::Ua, "read_node", ua_temperature.clone())));

    plan.push(three_phase("S10", Family::Modbus, SessionKey::ModbusRw, "read_input_registers", modbus_block_read));
    plan.push(three_phase(
        "S11",
        Family::Mqtt,
        SessionKey::Mqtt,
        "publish",
        json!({"topic": "stress/s11", "payload": "ping", "qos": 0, "retain": false}),
    ));
    plan.push(three_phase("S12", Family::Ua, SessionKey::Ua, "read_node", ua_temperature.clone()));

    // ---- recovery suite ----
    let recovery = |id: &str, family: Family, session: SessionKey, tool: &str, args: Value| {
        TaskSpec::new(
            id,
            Suite::Recovery,
            family,
            vec![Step::Call(CallStep::ok(session, tool, args))],
            OracleKind::AllExpected,
        )
    };
    plan.push(recovery(
        "R1",
        Family::Modbus,
        SessionKey::ModbusRw,
        "read_input_registers",
        json!({"address": 0, "count": 4}),
    ));
    plan.push(recovery(
        "R2",
        Family::Mqtt,
        SessionKey::Mqtt,
        "publish",
        json!({"topic": "recovery/r2", "payload": "ping", "qos": 0, "retain": false}),
    ));
    plan.push(recovery("R3", Family::Ua, SessionKey::Ua, "read_node", ua_temperature));

    plan
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_has_the_documented_shape() {
        let plan = load_plan();
        assert_eq!(plan.len(), 38);
        let count = |suite: Suite| plan.iter().filter(|t| t.suite == suite).count();
        assert_eq!(count(Suite::Normal), 16);
        assert_eq!(count(Suite::Fault), 7);
        assert_eq!(count(Suite::Stress), 12);
        assert_eq!(count(Suite::Recovery), 3);

        let total_runs: u32 = plan.iter().map(|t| t.repetitions).sum();
        assert_eq!(total_runs, 870, "16*30 + 7*30 + 12*10 + 3*20");
    }

    #[test]
    fn task_ids_are_unique() {
        let plan = load_plan();
        let mut ids: Vec<&str> = plan.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        let before = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), before);
    }

    #[test]
    fn m3_write_value_follows_the_repetition() {
        let plan = load_plan();
        let m3 = plan.iter().find(|t| t.id == "M3").unwrap();
        let Step::Call(write) = &m3.steps[0] else { panic!("M3 starts with a call") };
        assert_eq!(substitute(&write.args, 12)["value"], json!(52));
        assert_eq!(substitute(&write.args, 0)["value"], json!(40));
    }

    #[test]
    fn q4_and_o3_values_follow_the_repetition() {
        let plan = load_plan();
        let q4 = plan.iter().find(|t| t.id == "Q4").unwrap();
        let Step::Call(publish) = &q4.steps[0] else { panic!() };
        assert_eq!(substitute(&publish.args, 5)["metrics"][0]["value"], json!(25.0));
        let o3 = plan.iter().find(|t| t.id == "O3").unwrap();
        let Step::Call(write) = &o3.steps[0] else { panic!() };
        assert_eq!(substitute(&write.args, 5)["value"], json!(30.0));
    }

    #[test]
    fn s10_has_the_three_phase_structure() {
        let plan = load_plan();
        let s10 = plan.iter().find(|t| t.id == "S10").unwrap();
        let shape: Vec<&str> = s10
            .steps
            .iter()
            .map(|s| match s {
                Step::Call(c) => match c.expect {
                    CallExpect::Success => "call-ok",
                    CallExpect::StructuredFailure => "call-fail",
                    CallExpect::ErrorClass(_) => "call-class",
                },
                Step::StopMock(_) => "stop",
                Step::RestartMock(_) => "restart",
                Step::WaitMs(_) => "wait",
                Step::Parallel(_) => "parallel",
            })
            .collect();
        assert_eq!(shape, ["call-ok", "stop", "call-fail", "wait", "restart", "wait", "call-ok", "wait"]);
    }

    #[test]
    fn fault_tasks_pin_the_expected_classes() {
        let plan = load_plan();
        let class_of = |id: &str| {
            let task = plan.iter().find(|t| t.id == id).unwrap();
            task.call_steps()
                .iter()
                .find_map(|c| match c.expect {
                    CallExpect::ErrorClass(class) => Some(class),
                    _ => None,
                })
                .unwrap()
        };
        assert_eq!(class_of("FM1"), ErrorClass::ProtocolError);
        assert_eq!(class_of("FM2"), ErrorClass::RangeOverflow);
        assert_eq!(class_of("FQ1"), ErrorClass::InvalidInput);
        assert_eq!(class_of("FQ2"), ErrorClass::InvalidInput);
        assert_eq!(class_of("FO1"), ErrorClass::IllegalAddress);
        assert_eq!(class_of("FO2"), ErrorClass::ProtocolError);
    }

    #[test]
    fn substitution_reaches_nested_structures_and_leaves_others_alone() {
        let template = json!({
            "a": {"$rep_offset": 1.5},
            "b": [{"$rep_offset": 2}, "text"],
            "c": {"nested": {"$rep_offset": 0}},
            "d": true,
        });
        let out = substitute(&template, 3);
        assert_eq!(out["a"], json!(4.5));
        assert_eq!(out["b"][0], json!(5));
        assert_eq!(out["b"][1], json!("text"));
        assert_eq!(out["c"]["nested"], json!(3));
        assert_eq!(out["d"], json!(true));
    }
}
