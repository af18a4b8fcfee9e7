//! Node-model mock plant: 8 read-only sensors, 6 read-write actuators,
//! status variables, and 5 callable methods under ns=2, with 1 Hz dynamics
//! shared with the Modbus mock.
//!
//! Plant variables use string identifiers (`ns=2;s=temperature`); every
//! node also gets a numeric alias id assigned in build order starting at
//! `ns=2;i=1001`, so both forms resolve. Restarting the server rebuilds the
//! address space from scratch.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use otbridge_core::plantsim::{self, PlantInputs, PlantParams, PlantState};
use serde_json::{json, Value};

use crate::node::{NodeClass, NodeId, NodeIdentifier, NodeInfo, UaDataType};
use crate::wire::{error_class, WireRequest, WireResponse};

pub const ROOT_NODE: &str = "ns=0;i=84";
pub const SERVER_STATUS_NODE: &str = "ns=0;i=2256";
const NUMERIC_ALIAS_BASE: u64 = 1001;

/// Values are stored in display units; the dynamics core runs in register
/// units (x 10), converted at this boundary.
const DISPLAY_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    StartPump,
    StopPump,
    ResetCounters,
    SetMode,
    Calibrate,
}

struct Node {
    info: NodeInfo,
    value: Option<Value>,
    children: Vec<NodeId>,
    method: Option<MethodKind>,
}

pub struct AddressSpace {
    nodes: Vec<Node>,
    by_canonical: HashMap<String, usize>,
    sim: PlantState,
    started: Instant,
    pub tick_count: u64,
}

#[derive(Debug)]
pub enum SpaceError {
    UnknownNode(String),
    AccessDenied(String),
    TypeMismatch(String),
    NotAMethod(String),
    BadArguments(String),
}

impl SpaceError {
    pub fn wire_class(&self) -> &'static str {
        match self {
            SpaceError::UnknownNode(_) => error_class::ILLEGAL_ADDRESS,
            SpaceError::AccessDenied(_) => error_class::ACCESS_DENIED,
            SpaceError::TypeMismatch(_) => error_class::TYPE_MISMATCH,
            SpaceError::NotAMethod(_) => error_class::ILLEGAL_ADDRESS,
            SpaceError::BadArguments(_) => error_class::INVALID_INPUT,
        }
    }

    pub fn message(&self) -> String {
        match self {
            SpaceError::UnknownNode(id) => format!("node `{id}` does not exist"),
            SpaceError::AccessDenied(id) => format!("node `{id}` is not writable"),
            SpaceError::TypeMismatch(detail) => detail.clone(),
            SpaceError::NotAMethod(id) => format!("node `{id}` is not a callable method"),
            SpaceError::BadArguments(detail) => detail.clone(),
        }
    }
}

impl AddressSpace {
    fn add_node(
        &mut self,
        id: NodeId,
        browse_name: &str,
        node_class: NodeClass,
        datatype: Option<UaDataType>,
        value: Option<Value>,
        writable: bool,
        method: Option<MethodKind>,
    ) -> NodeId {
        let index = self.nodes.len();
        let info = NodeInfo {
            node_id: id.clone(),
            browse_name: browse_name.to_string(),
            node_class,
            datatype,
            readable: true,
            writable,
        };
        self.nodes.push(Node { info, value, children: Vec::new(), method });
        self.by_canonical.insert(id.to_string(), index);
        // numeric alias for string-identified plant nodes
        if matches!(id.identifier, NodeIdentifier::Text(_)) {
            let alias = NodeId::numeric(id.namespace, NUMERIC_ALIAS_BASE + index as u64);
            self.by_canonical.insert(alias.to_string(), index);
        }
        id
    }

    fn link(&mut self, parent: &NodeId, child: &NodeId) {
        let index = self.by_canonical[&parent.to_string()];
        self.nodes[index].children.push(child.clone());
    }

    fn lookup(&self, id: &NodeId) -> Result<usize, SpaceError> {
        self.by_canonical
            .get(&id.to_string())
            .copied()
            .ok_or_else(|| SpaceError::UnknownNode(id.to_string()))
    }

    /// Current value of a variable; status values are computed on read.
    pub fn read(&self, id: &NodeId) -> Result<(NodeInfo, Value), SpaceError> {
        let index = self.lookup(id)?;
        let node = &self.nodes[index];
        let value = match node.info.browse_name.as_str() {
            "uptime_s" => json!(self.started.elapsed().as_secs_f64()),
            "simulation_tick" => json!(self.tick_count as i64),
            _ => node
                .value
                .clone()
                .ok_or_else(|| SpaceError::TypeMismatch(format!("node `{id}` has no value attribute")))?,
        };
        Ok((node.info.clone(), value))
    }

    pub fn write(&mut self, id: &NodeId, value: &Value) -> Result<(), SpaceError> {
        let index = self.lookup(id)?;
        let node = &self.nodes[index];
        if node.info.node_class != NodeClass::Variable || !node.info.writable {
            return Err(SpaceError::AccessDenied(id.to_string()));
        }
        let datatype = node.info.datatype.expect("variables carry a datatype");
        let coerced = coerce(datatype, value).ok_or_else(|| {
            SpaceError::TypeMismatch(format!(
                "value {value} has the wrong type for {} node `{id}`",
                datatype.as_str()
            ))
        })?;
        self.nodes[index].value = Some(coerced);
        Ok(())
    }

    pub fn browse(&self, id: &NodeId) -> Result<Vec<NodeInfo>, SpaceError> {
        let index = self.lookup(id)?;
        Ok(self.nodes[index]
            .children
            .iter()
            .map(|child| {
                let child_index = self.by_canonical[&child.to_string()];
                self.nodes[child_index].info.clone()
            })
            .collect())
    }

    /// Depth-first enumeration of every variable under `root`.
    pub fn list_variables(&self, root: &NodeId) -> Result<Vec<NodeId>, SpaceError> {
        let mut out = Vec::new();
        let mut stack = vec![root.clone()];
        while let Some(id) = stack.pop() {
            let index = self.lookup(&id)?;
            let node = &self.nodes[index];
            if node.info.node_class == NodeClass::Variable {
                out.push(node.info.node_id.clone());
            }
            for child in node.children.iter().rev() {
                stack.push(child.clone());
            }
        }
        Ok(out)
    }

    pub fn call(&mut self, id: &NodeId, args: &Value) -> Result<Value, SpaceError> {
        let index = self.lookup(id)?;
        let method = self.nodes[index].method.ok_or_else(|| SpaceError::NotAMethod(id.to_string()))?;
        match method {
            MethodKind::StartPump => {
                self.write(&NodeId::text(2, "pump_running"), &json!(true))?;
                Ok(json!({"pump_running": true}))
            }
            MethodKind::StopPump => {
                self.write(&NodeId::text(2, "pump_running"), &json!(false))?;
                Ok(json!({"pump_running": false}))
            }
            MethodKind::ResetCounters => {
                self.tick_count = 0;
                self.sim.production_count = 0;
                Ok(json!({"simulation_tick": 0, "production_count": 0}))
            }
            MethodKind::SetMode => {
                let mode = args
                    .get("mode")
                    .and_then(Value::as_str)
                    .ok_or_else(|| SpaceError::BadArguments("set_mode requires a string `mode`".to_string()))?;
                let index = self.lookup(&NodeId::text(2, "device_state"))?;
                self.nodes[index].value = Some(json!(mode));
                Ok(json!({"device_state": mode}))
            }
            MethodKind::Calibrate => Ok(json!({"calibrated": true})),
        }
    }

    pub fn status(&self) -> Value {
        let state = self
            .read(&NodeId::text(2, "device_state"))
            .map(|(_, v)| v)
            .unwrap_or_else(|_| json!("running"));
        json!({
            "state": state,
            "uptime_s": self.started.elapsed().as_secs_f64(),
            "simulation_tick": self.tick_count as i64,
        })
    }

    fn variable_f64(&self, name: &str) -> f64 {
        self.nodes[self.by_canonical[&NodeId::text(2, name).to_string()]]
            .value
            .as_ref()
            .and_then(Value::as_f64)
            .unwrap_or(0.0)
    }

    fn variable_bool(&self, name: &str) -> bool {
        self.nodes[self.by_canonical[&NodeId::text(2, name).to_string()]]
            .value
            .as_ref()
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }

    fn set_sensor(&mut self, name: &str, display_value: f64) {
        let index = self.by_canonical[&NodeId::text(2, name).to_string()];
        self.nodes[index].value = Some(json!(display_value));
    }

    /// Advances the shared plant dynamics; actuator inputs convert into
    /// register units, sensor outputs convert back to display units.
    pub fn sim_tick(&mut self, dt_s: f64) {
        let inputs = PlantInputs {
            heater_power: self.variable_f64("heater_power") * DISPLAY_SCALE,
            pump_running: self.variable_bool("pump_running"),
            conveyor_speed: self.variable_f64("conveyor_speed") * DISPLAY_SCALE,
        };
        plantsim::step(&mut self.sim, &inputs, &PlantParams::default(), dt_s);
        self.set_sensor("temperature", self.sim.temperature / DISPLAY_SCALE);
        self.set_sensor("pressure", self.sim.pressure / DISPLAY_SCALE);
        self.set_sensor("flow_rate", self.sim.flow_rate / DISPLAY_SCALE);
        self.set_sensor("tank_level", self.sim.tank_level / DISPLAY_SCALE);
        self.tick_count += 1;
    }

    /// Raw dynamics state in register units, for cross-mock trajectory
    /// tests.
    pub fn sim_state(&self) -> PlantState {
        self.sim
    }
}

fn coerce(datatype: UaDataType, value: &Value) -> Option<Value> {
    match datatype {
        UaDataType::Float | UaDataType::Double => value.as_f64().map(|v| json!(v)),
        UaDataType::Boolean => value.as_bool().map(|v| json!(v)),
        UaDataType::Int32 => value.as_i64().filter(|v| i32::try_from(*v).is_ok()).map(|v| json!(v)),
        UaDataType::String => value.as_str().map(|v| json!(v)),
    }
}

/// Builds the mock plant hierarchy: Root -> {Sensors, Actuators, Status,
/// Methods}.
pub fn build_address_space() -> AddressSpace {
    let mut space = AddressSpace {
        nodes: Vec::new(),
        by_canonical: HashMap::new(),
        sim: PlantState::default(),
        started: Instant::now(),
        tick_count: 0,
    };

    let root = space.add_node(NodeId::parse(ROOT_NODE).unwrap(), "Root", NodeClass::Object, None, None, false, None);
    space.add_node(
        NodeId::parse(SERVER_STATUS_NODE).unwrap(),
        "ServerStatus",
        NodeClass::Variable,
        Some(UaDataType::String),
        Some(json!("running")),
        false,
        None,
    );

    let folders: [&str; 4] = ["Sensors", "Actuators", "Status", "Methods"];
    for folder in folders {
        let id = space.add_node(NodeId::text(2, folder), folder, NodeClass::Object, None, None, false, None);
        space.link(&root, &id);
    }
    let sensors = NodeId::text(2, "Sensors");
    let actuators = NodeId::text(2, "Actuators");
    let status = NodeId::text(2, "Status");
    let methods = NodeId::text(2, "Methods");

    let initial = PlantState::default();
    let sensor_values: [(&str, f64); 8] = [
        ("temperature", initial.temperature),
        ("pressure", initial.pressure),
        ("flow_rate", initial.flow_rate),
        ("tank_level", initial.tank_level),
        ("vibration", initial.vibration),
        ("ph", initial.ph),
        ("humidity", initial.humidity),
        ("motor_speed", initial.motor_speed),
    ];
    for (name, register_value) in sensor_values {
        let id = space.add_node(
            NodeId::text(2, name),
            name,
            NodeClass::Variable,
            Some(UaDataType::Float),
            Some(json!(register_value / DISPLAY_SCALE)),
            false,
            None,
        );
        space.link(&sensors, &id);
    }

    let float_actuators: [&str; 4] = ["valve_position", "heater_power", "fan_speed", "conveyor_speed"];
    for name in float_actuators {
        let id = space.add_node(
            NodeId::text(2, name),
            name,
            NodeClass::Variable,
            Some(UaDataType::Float),
            Some(json!(0.0)),
            true,
            None,
        );
        space.link(&actuators, &id);
    }
    let bool_actuators: [(&str, bool); 2] = [("pump_running", true), ("emergency_stop", false)];
    for (name, value) in bool_actuators {
        let id = space.add_node(
            NodeId::text(2, name),
            name,
            NodeClass::Variable,
            Some(UaDataType::Boolean),
            Some(json!(value)),
            true,
            None,
        );
        space.link(&actuators, &id);
    }

    let status_vars: [(&str, UaDataType, Value); 3] = [
        ("uptime_s", UaDataType::Float, json!(0.0)),
        ("simulation_tick", UaDataType::Int32, json!(0)),
        ("device_state", UaDataType::String, json!("running")),
    ];
    for (name, datatype, value) in status_vars {
        let id = space.add_node(
            NodeId::text(2, name),
            name,
            NodeClass::Variable,
            Some(datatype),
            Some(value),
            false,
            None,
        );
        space.link(&status, &id);
    }

    let method_nodes: [(&str, MethodKind); 5] = [
        ("start_pump", MethodKind::StartPump),
        ("stop_pump", MethodKind::StopPump),
        ("reset_counters", MethodKind::ResetCounters),
        ("set_mode", MethodKind::SetMode),
        ("calibrate", MethodKind::Calibrate),
    ];
    for (name, kind) in method_nodes {
        let id = space.add_node(NodeId::text(2, name), name, NodeClass::Method, None, None, false, Some(kind));
        space.link(&methods, &id);
    }

    space
}

fn handle_request(space: &Mutex<AddressSpace>, request: &WireRequest) -> WireResponse {
    let id = request.id;
    let parse_node = |key: &str, default: &str| -> Result<NodeId, WireResponse> {
        let text = request.params.get(key).and_then(Value::as_str).unwrap_or(default);
        NodeId::parse(text).map_err(|e| WireResponse::err(id, error_class::INVALID_INPUT, e))
    };
    match request.op.as_str() {
        "status" => WireResponse::ok(id, space.lock().expect("space lock").status()),
        "read" => {
            let node = match parse_node("node", SERVER_STATUS_NODE) {
                Ok(node) => node,
                Err(resp) => return resp,
            };
            match space.lock().expect("space lock").read(&node) {
                Ok((info, value)) => WireResponse::ok(
                    id,
                    json!({
                        "node": info.node_id.to_string(),
                        "value": value,
                        "datatype": info.datatype.map(|d| d.as_str()),
                    }),
                ),
                Err(e) => WireResponse::err(id, e.wire_class(), e.message()),
            }
        }
        "write" => {
            let node = match parse_node("node", "") {
                Ok(node) => node,
                Err(resp) => return resp,
            };
            let value = request.params.get("value").cloned().unwrap_or(Value::Null);
            match space.lock().expect("space lock").write(&node, &value) {
                Ok(()) => WireResponse::ok(id, json!({"node": node.to_string(), "value": value})),
                Err(e) => WireResponse::err(id, e.wire_class(), e.message()),
            }
        }
        "browse" => {
            let node = match parse_node("node", ROOT_NODE) {
                Ok(node) => node,
                Err(resp) => return resp,
            };
            match space.lock().expect("space lock").browse(&node) {
                Ok(children) => WireResponse::ok(
                    id,
                    json!({
                        "node": node.to_string(),
                        "children": serde_json::to_value(children).expect("node info serializes"),
                    }),
                ),
                Err(e) => WireResponse::err(id, e.wire_class(), e.message()),
            }
        }
        "read_many" => {
            let nodes = match request.params.get("nodes").and_then(Value::as_array) {
                Some(nodes) => nodes.clone(),
                None => return WireResponse::err(id, error_class::INVALID_INPUT, "read_many requires `nodes`"),
            };
            let space = space.lock().expect("space lock");
            let mut values = Vec::with_capacity(nodes.len());
            for raw in &nodes {
                let node = match raw.as_str().map(NodeId::parse) {
                    Some(Ok(node)) => node,
                    _ => return WireResponse::err(id, error_class::INVALID_INPUT, format!("bad node id {raw}")),
                };
                match space.read(&node) {
                    Ok((info, value)) => values.push(json!({
                        "node": info.node_id.to_string(),
                        "value": value,
                        "datatype": info.datatype.map(|d| d.as_str()),
                    })),
                    Err(e) => return WireResponse::err(id, e.wire_class(), e.message()),
                }
            }
            WireResponse::ok(id, json!({"values": values}))
        }
        "list" => {
            let root = match parse_node("root", ROOT_NODE) {
                Ok(node) => node,
                Err(resp) => return resp,
            };
            match space.lock().expect("space lock").list_variables(&root) {
                Ok(ids) => WireResponse::ok(
                    id,
                    json!({"variables": ids.iter().map(|n| n.to_string()).collect::<Vec<_>>()}),
                ),
                Err(e) => WireResponse::err(id, e.wire_class(), e.message()),
            }
        }
        "call" => {
            let method = match parse_node("method", "") {
                Ok(node) => node,
                Err(resp) => return resp,
            };
            let args = request.params.get("args").cloned().unwrap_or_else(|| json!({}));
            match space.lock().expect("space lock").call(&method, &args) {
                Ok(outputs) => WireResponse::ok(id, json!({"method": method.to_string(), "outputs": outputs})),
                Err(e) => WireResponse::err(id, e.wire_class(), e.message()),
            }
        }
        other => WireResponse::err(id, error_class::INVALID_INPUT, format!("unknown op `{other}`")),
    }
}

#[derive(Debug, Clone)]
pub struct MockOptions {
    pub sim: bool,
    pub tick_hz: f64,
}

impl Default for MockOptions {
    fn default() -> MockOptions {
        MockOptions { sim: true, tick_hz: 1.0 }
    }
}

pub struct MockHandle {
    pub addr: std::net::SocketAddr,
    pub space: Arc<Mutex<AddressSpace>>,
    shutdown: Arc<AtomicBool>,
    listener_thread: Option<thread::JoinHandle<()>>,
    sim_thread: Option<thread::JoinHandle<()>>,
}

impl MockHandle {
    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.listener_thread.take() {
            let _ = handle.join();
        }
        if let Some(handle) = self.sim_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn start(host: &str, port: u16, options: MockOptions) -> std::io::Result<MockHandle> {
    let listener = TcpListener::bind((host, port))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;

    let space = Arc::new(Mutex::new(build_address_space()));
    let shutdown = Arc::new(AtomicBool::new(false));

    let accept_space = Arc::clone(&space);
    let accept_shutdown = Arc::clone(&shutdown);
    let listener_thread = thread::spawn(move || {
        let mut connections = Vec::new();
        while !accept_shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let space = Arc::clone(&accept_space);
                    let shutdown = Arc::clone(&accept_shutdown);
                    connections.push(thread::spawn(move || serve_connection(stream, space, shutdown)));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(5));
                }
                Err(_) => break,
            }
        }
        for handle in connections {
            let _ = handle.join();
        }
    });

    let sim_thread = if options.sim {
        let sim_space = Arc::clone(&space);
        let sim_shutdown = Arc::clone(&shutdown);
        let interval = Duration::from_secs_f64(1.0 / options.tick_hz.max(0.001));
        Some(thread::spawn(move || loop {
            sleep_interruptible(interval, &sim_shutdown);
            if sim_shutdown.load(Ordering::SeqCst) {
                break;
            }
            sim_space.lock().expect("space lock").sim_tick(interval.as_secs_f64());
        }))
    } else {
        None
    };

    Ok(MockHandle { addr, space, shutdown, listener_thread: Some(listener_thread), sim_thread })
}

fn serve_connection(stream: TcpStream, space: Arc<Mutex<AddressSpace>>, shutdown: Arc<AtomicBool>) {
    let reader = match stream.try_clone() {
        Ok(r) => r,
        Err(_) => return,
    };
    if reader.set_read_timeout(Some(Duration::from_millis(200))).is_err() {
        return;
    }
    let mut reader = BufReader::new(reader);
    let mut writer = stream;
    let mut line = String::new();
    while !shutdown.load(Ordering::SeqCst) {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => return,
            Ok(_) => {}
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(_) => return,
        }
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<WireRequest>(&line) {
            Ok(request) => handle_request(&space, &request),
            Err(e) => WireResponse::err(0, error_class::INVALID_INPUT, format!("bad request: {e}")),
        };
        let mut bytes = serde_json::to_vec(&response).expect("response serializes");
        bytes.push(b'\n');
        if writer.write_all(&bytes).is_err() {
            return;
        }
    }
}

fn sleep_interruptible(total: Duration, shutdown: &Arc<AtomicBool>) {
    let mut slept = Duration::ZERO;
    while slept < total && !shutdown.load(Ordering::SeqCst) {
        let slice = (total - slept).min(Duration::from_millis(50));
        thread::sleep(slice);
        slept += slice;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_space_has_the_documented_shape() {
        let space = build_address_space();
        let root = NodeId::parse(ROOT_NODE).unwrap();
        let folders = space.browse(&root).unwrap();
        let names: Vec<&str> = folders.iter().map(|f| f.browse_name.as_str()).collect();
        assert_eq!(names, ["Sensors", "Actuators", "Status", "Methods"]);

        assert_eq!(space.browse(&NodeId::text(2, "Sensors")).unwrap().len(), 8);
        assert_eq!(space.browse(&NodeId::text(2, "Actuators")).unwrap().len(), 6);
        assert_eq!(space.browse(&NodeId::text(2, "Status")).unwrap().len(), 3);
        let methods = space.browse(&NodeId::text(2, "Methods")).unwrap();
        assert_eq!(methods.len(), 5);
        assert!(methods.iter().all(|m| m.node_class == NodeClass::Method));
    }

    #[test]
    fn sensors_are_read_only_and_actuators_writable() {
        let mut space = build_address_space();
        let err = space.write(&NodeId::text(2, "temperature"), &json!(99.0)).unwrap_err();
        assert!(matches!(err, SpaceError::AccessDenied(_)));
        let err = space.write(&NodeId::text(2, "simulation_tick"), &json!(5)).unwrap_err();
        assert!(matches!(err, SpaceError::AccessDenied(_)));

        space.write(&NodeId::text(2, "valve_position"), &json!(30.0)).unwrap();
        let (_, value) = space.read(&NodeId::text(2, "valve_position")).unwrap();
        assert_eq!(value, json!(30.0));
    }

    #[test]
    fn wrong_type_writes_are_rejected() {
        let mut space = build_address_space();
        let err = space.write(&NodeId::text(2, "valve_position"), &json!("hello")).unwrap_err();
        assert!(matches!(err, SpaceError::TypeMismatch(_)));
        let err = space.write(&NodeId::text(2, "pump_running"), &json!(1)).unwrap_err();
        assert!(matches!(err, SpaceError::TypeMismatch(_)));
    }

    #[test]
    fn unknown_node_is_illegal_address() {
        let space = build_address_space();
        let err = space.read(&NodeId::numeric(2, 99999)).unwrap_err();
        assert!(matches!(err, SpaceError::UnknownNode(_)));
        assert_eq!(err.wire_class(), error_class::ILLEGAL_ADDRESS);
    }

    #[test]
    fn numeric_aliases_resolve_to_the_same_node() {
        let space = build_address_space();
        let by_name = space.read(&NodeId::text(2, "temperature")).unwrap();
        // find the alias by scanning the assigned range
        let alias = (0..space.nodes.len() as u64)
            .map(|i| NodeId::numeric(2, NUMERIC_ALIAS_BASE + i))
            .find(|id| {
                space
                    .read(id)
                    .map(|(info, _)| info.browse_name == "temperature")
                    .unwrap_or(false)
            })
            .expect("temperature has a numeric alias");
        let by_alias = space.read(&alias).unwrap();
        assert_eq!(by_name.1, by_alias.1);
    }

    #[test]
    fn methods_have_observable_behavior() {
        let mut space = build_address_space();
        space.call(&NodeId::text(2, "stop_pump"), &json!({})).unwrap();
        assert_eq!(space.read(&NodeId::text(2, "pump_running")).unwrap().1, json!(false));
        space.call(&NodeId::text(2, "start_pump"), &json!({})).unwrap();
        assert_eq!(space.read(&NodeId::text(2, "pump_running")).unwrap().1, json!(true));

        space.sim_tick(1.0);
        space.sim_tick(1.0);
        assert_eq!(space.read(&NodeId::text(2, "simulation_tick")).unwrap().1, json!(2));
        space.call(&NodeId::text(2, "reset_counters"), &json!({})).unwrap();
        assert_eq!(space.read(&NodeId::text(2, "simulation_tick")).unwrap().1, json!(0));
        assert_eq!(space.sim_state().production_count, 0);

        let out = space.call(&NodeId::text(2, "set_mode"), &json!({"mode": "maintenance"})).unwrap();
        assert_eq!(out["device_state"], "maintenance");
        assert_eq!(space.read(&NodeId::text(2, "device_state")).unwrap().1, json!("maintenance"));

        let out = space.call(&NodeId::text(2, "calibrate"), &json!({})).unwrap();
        assert_eq!(out["calibrated"], true);

        let err = space.call(&NodeId::text(2, "no_such_method"), &json!({})).unwrap_err();
        assert_eq!(err.wire_class(), error_class::ILLEGAL_ADDRESS);
        let err = space.call(&NodeId::text(2, "temperature"), &json!({})).unwrap_err();
        assert_eq!(err.wire_class(), error_class::ILLEGAL_ADDRESS);
    }

    #[test]
    fn tick_increments_by_one_and_heater_drives_temperature() {
        let mut space = build_address_space();
        // drive to ambient then heat
        for _ in 0..200 {
            space.sim_tick(1.0);
        }
        space.write(&NodeId::text(2, "heater_power"), &json!(50.0)).unwrap();
        let before = space.read(&NodeId::text(2, "temperature")).unwrap().1.as_f64().unwrap();
        let tick_before = space.tick_count;
        let mut last = before;
        for _ in 0..3 {
            space.sim_tick(1.0);
            let now = space.read(&NodeId::text(2, "temperature")).unwrap().1.as_f64().unwrap();
            assert!(now > last, "temperature must increase under heater power");
            last = now;
        }
        assert_eq!(space.tick_count, tick_before + 3);
    }

    #[test]
    fn list_variables_counts_sensors_actuators_and_status() {
        let space = build_address_space();
        let root = NodeId::parse(ROOT_NODE).unwrap();
        let all = space.list_variables(&root).unwrap();
        assert_eq!(all.len(), 17, "8 sensors + 6 actuators + 3 status variables");
        let sensors = space.list_variables(&NodeId::text(2, "Sensors")).unwrap();
        assert_eq!(sensors.len(), 8);
        // determinism
        assert_eq!(space.list_variables(&root).unwrap(), all);
    }
}
