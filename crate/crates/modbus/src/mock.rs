//! Modbus TCP mock device: four 100-point banks with named process
//! variables and a 1 Hz simulation loop.
//!
//! Restarting the mock resets every bank to its initial state; the recovery
//! suite relies on that. Every well-formed frame received is appended to a
//! frame log so guard tests can prove no write-class frame was transmitted.

use std::fs::File;
use std::io::Write as IoWrite;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use otbridge_core::plantsim::{self, PlantInputs, PlantParams, PlantState};

use crate::codec::{
    decode_request_pdu, encode_response_adu, read_adu, split_adu, CodecError, ExceptionCode,
    RequestPdu, ResponsePdu,
};

pub const BANK_SIZE: usize = 100;

pub const DEVICE_VENDOR: &str = "OTBridge";
pub const DEVICE_PRODUCT: &str = "Plant Mock Device";
pub const DEVICE_REVISION: &str = "1.0";

/// Named plant points and their bank addresses.
pub mod plant_map {
    pub const VALVE_POSITION: u16 = 0; // holding
    pub const HEATER_POWER: u16 = 1;
    pub const FAN_SPEED: u16 = 2;
    pub const CONVEYOR_SPEED: u16 = 3;
    pub const COMMAND_WORD: u16 = 4;
    pub const TEMPERATURE: u16 = 0; // input
    pub const PRESSURE: u16 = 1;
    pub const FLOW_RATE: u16 = 2;
    pub const TANK_LEVEL: u16 = 3;
    pub const VIBRATION: u16 = 4;
    pub const PH: u16 = 5;
    pub const HUMIDITY: u16 = 6;
    pub const MOTOR_SPEED: u16 = 7;
    pub const PRODUCTION_COUNT: u16 = 8;
    pub const PUMP_RUNNING: u16 = 0; // coil
    pub const EMERGENCY_STOP: u16 = 1;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterBank {
    pub holding: Vec<u16>,
    pub input: Vec<u16>,
    pub coils: Vec<bool>,
    pub discrete: Vec<bool>,
}

impl RegisterBank {
    /// Deterministic startup state: sensors at their nominal plant values,
    /// holding registers zeroed, pump running.
    pub fn initial() -> RegisterBank {
        let mut bank = RegisterBank {
            holding: vec![0; BANK_SIZE],
            input: vec![0; BANK_SIZE],
            coils: vec![false; BANK_SIZE],
            discrete: vec![false; BANK_SIZE],
        };
        bank.coils[plant_map::PUMP_RUNNING as usize] = true;
        write_sensors(&mut bank, &PlantState::default());
        bank
    }
}

fn write_sensors(bank: &mut RegisterBank, sim: &PlantState) {
    bank.input[plant_map::TEMPERATURE as usize] = plantsim::quantize(sim.temperature);
    bank.input[plant_map::PRESSURE as usize] = plantsim::quantize(sim.pressure);
    bank.input[plant_map::FLOW_RATE as usize] = plantsim::quantize(sim.flow_rate);
    bank.input[plant_map::TANK_LEVEL as usize] = plantsim::quantize(sim.tank_level);
    bank.input[plant_map::VIBRATION as usize] = plantsim::quantize(sim.vibration);
    bank.input[plant_map::PH as usize] = plantsim::quantize(sim.ph);
    bank.input[plant_map::HUMIDITY as usize] = plantsim::quantize(sim.humidity);
    bank.input[plant_map::MOTOR_SPEED as usize] = plantsim::quantize(sim.motor_speed);
    bank.input[plant_map::PRODUCTION_COUNT as usize] = sim.production_count.min(u16::MAX as u64) as u16;
}

pub struct MockState {
    pub banks: RegisterBank,
    /// Function code of every well-formed frame received, in order.
    pub frame_log: Vec<u8>,
    pub tick_count: u64,
    sim: PlantState,
    frame_log_file: Option<File>,
}

impl MockState {
    fn new(frame_log_path: Option<&PathBuf>) -> MockState {
        let frame_log_file = frame_log_path.map(|p| File::create(p).expect("create frame log"));
        MockState {
            banks: RegisterBank::initial(),
            frame_log: Vec::new(),
            tick_count: 0,
            sim: PlantState::default(),
            frame_log_file,
        }
    }

    fn log_frame(&mut self, function: u8) {
        self.frame_log.push(function);
        if let Some(file) = self.frame_log_file.as_mut() {
            let _ = writeln!(file, "{function:02x}");
            let _ = file.flush();
        }
    }

    /// Advances the plant simulation by `dt_s`, reading actuator inputs
    /// from the holding/coil banks and writing sensor outputs back.
    pub fn sim_tick(&mut self, dt_s: f64) {
        let inputs = PlantInputs {
            heater_power: self.banks.holding[plant_map::HEATER_POWER as usize] as f64,
            pump_running: self.banks.coils[plant_map::PUMP_RUNNING as usize],
            conveyor_speed: self.banks.holding[plant_map::CONVEYOR_SPEED as usize] as f64,
        };
        plantsim::step(&mut self.sim, &inputs, &PlantParams::default(), dt_s);
        write_sensors(&mut self.banks, &self.sim);
        self.tick_count += 1;
    }

    /// Raw simulated sensor state, used by cross-mock trajectory tests.
    pub fn sim_state(&self) -> PlantState {
        self.sim
    }
}

fn exception(request_function: u8, code: ExceptionCode) -> ResponsePdu {
    ResponsePdu::Exception { function: request_function, code }
}

fn in_bounds(address: u16, quantity: usize) -> bool {
    (address as usize) + quantity <= BANK_SIZE
}

/// Applies one decoded request to the banks and produces the response PDU.
/// Out-of-range addresses answer exception 0x02 per the protocol rules.
pub fn handle_pdu(state: &mut MockState, pdu: &RequestPdu) -> ResponsePdu {
    let function = pdu.function();
    match pdu {
        RequestPdu::ReadCoils { address, quantity } | RequestPdu::ReadDiscreteInputs { address, quantity } => {
            if *quantity == 0 || *quantity > crate::codec::MAX_READ_BITS {
                return exception(function, ExceptionCode::IllegalDataValue);
            }
            if !in_bounds(*address, *quantity as usize) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            let bank = if function == 0x01 { &state.banks.coils } else { &state.banks.discrete };
            let values = bank[*address as usize..(*address + *quantity) as usize].to_vec();
            if function == 0x01 {
                ResponsePdu::ReadCoils { values }
            } else {
                ResponsePdu::ReadDiscreteInputs { values }
            }
        }
        RequestPdu::ReadHoldingRegisters { address, quantity }
        | RequestPdu::ReadInputRegisters { address, quantity } => {
            if *quantity == 0 || *quantity > crate::codec::MAX_READ_REGISTERS {
                return exception(function, ExceptionCode::IllegalDataValue);
            }
            if !in_bounds(*address, *quantity as usize) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            let bank = if function == 0x03 { &state.banks.holding } else { &state.banks.input };
            let values = bank[*address as usize..(*address + *quantity) as usize].to_vec();
            if function == 0x03 {
                ResponsePdu::ReadHoldingRegisters { values }
            } else {
                ResponsePdu::ReadInputRegisters { values }
            }
        }
        RequestPdu::WriteSingleCoil { address, value } => {
            if !in_bounds(*address, 1) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            state.banks.coils[*address as usize] = *value;
            ResponsePdu::WriteSingleCoil { address: *address, value: *value }
        }
        RequestPdu::WriteSingleRegister { address, value } => {
            if !in_bounds(*address, 1) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            state.banks.holding[*address as usize] = *value;
            ResponsePdu::WriteSingleRegister { address: *address, value: *value }
        }
        RequestPdu::WriteMultipleCoils { address, values } => {
            if values.is_empty() || values.len() > crate::codec::MAX_WRITE_BITS as usize {
                return exception(function, ExceptionCode::IllegalDataValue);
            }
            if !in_bounds(*address, values.len()) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            state.banks.coils[*address as usize..*address as usize + values.len()].copy_from_slice(values);
            ResponsePdu::WriteMultipleCoils { address: *address, quantity: values.len() as u16 }
        }
        RequestPdu::WriteMultipleRegisters { address, values } => {
            if values.is_empty() || values.len() > crate::codec::MAX_WRITE_REGISTERS as usize {
                return exception(function, ExceptionCode::IllegalDataValue);
            }
            if !in_bounds(*address, values.len()) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            state.banks.holding[*address as usize..*address as usize + values.len()].copy_from_slice(values);
            ResponsePdu::WriteMultipleRegisters { address: *address, quantity: values.len() as u16 }
        }
        RequestPdu::MaskWriteRegister { address, and_mask, or_mask } => {
            if !in_bounds(*address, 1) {
                return exception(function, ExceptionCode::IllegalDataAddress);
            }
            let current = state.banks.holding[*address as usize];
            state.banks.holding[*address as usize] =
                crate::data::mask_write_result(current, *and_mask, *or_mask);
            ResponsePdu::MaskWriteRegister { address: *address, and_mask: *and_mask, or_mask: *or_mask }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockOptions {
    pub sim: bool,
    pub tick_hz: f64,
    pub frame_log: Option<PathBuf>,
}

impl Default for MockOptions {
    fn default() -> MockOptions {
        MockOptions { sim: true, tick_hz: 1.0, frame_log: None }
    }
}

/// A running mock; dropping or stopping it releases the port.
pub struct MockHandle {
    pub addr: std::net::SocketAddr,
    pub state: Arc<Mutex<MockState>>,
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

/// Binds and serves in background threads; accepts multiple concurrent
/// connections. Pass port 0 to let the OS choose.
pub fn start(host: &str, port: u16, options: MockOptions) -> std::io::Result<MockHandle> {
    let listener = TcpListener::bind((host, port))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;

    let state = Arc::new(Mutex::new(MockState::new(options.frame_log.as_ref())));
    let shutdown = Arc::new(AtomicBool::new(false));

    let accept_state = Arc::clone(&state);
    let accept_shutdown = Arc::clone(&shutdown);
    let listener_thread = thread::spawn(move || {
        let mut connections: Vec<thread::JoinHandle<()>> = Vec::new();
        while !accept_shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let state = Arc::clone(&accept_state);
                    let shutdown = Arc::clone(&accept_shutdown);
                    connections.push(thread::spawn(move || serve_connection(stream, state, shutdown)));
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
        let sim_state = Arc::clone(&state);
        let sim_shutdown = Arc::clone(&shutdown);
        let interval = Duration::from_secs_f64(1.0 / options.tick_hz.max(0.001));
        Some(thread::spawn(move || loop {
            sleep_interruptible(interval, &sim_shutdown);
            if sim_shutdown.load(Ordering::SeqCst) {
                break;
            }
            sim_state.lock().expect("mock state lock").sim_tick(interval.as_secs_f64());
        }))
    } else {
        None
    };

    Ok(MockHandle { addr, state, shutdown, listener_thread: Some(listener_thread), sim_thread })
}

// sleeps in small slices so shutdown stays responsive
fn sleep_interruptible(total: Duration, shutdown: &Arc<AtomicBool>) {
    let mut slept = Duration::ZERO;
    while slept < total && !shutdown.load(Ordering::SeqCst) {
        let slice = (total - slept).min(Duration::from_millis(50));
        thread::sleep(slice);
        slept += slice;
    }
}

fn serve_connection(stream: TcpStream, state: Arc<Mutex<MockState>>, shutdown: Arc<AtomicBool>) {
    let mut reader = stream.try_clone().expect("clone stream");
    reader
        .set_read_timeout(Some(Duration::from_millis(200)))
        .expect("set read timeout");
    let mut writer = stream;
    while !shutdown.load(Ordering::SeqCst) {
        let frame = match read_adu(&mut reader) {
            Ok(frame) => frame,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(_) => return,
        };
        let (header, pdu_bytes) = match split_adu(&frame) {
            Ok(parts) => parts,
            Err(_) => return, // not Modbus TCP; drop the connection
        };
        let response = {
            let mut state = state.lock().expect("mock state lock");
            state.log_frame(pdu_bytes.first().copied().unwrap_or(0));
            match decode_request_pdu(pdu_bytes) {
                Ok(pdu) => handle_pdu(&mut state, &pdu),
                Err(CodecError::UnknownFunction(function)) => ResponsePdu::Exception {
                    function: function & 0x7F,
                    code: ExceptionCode::IllegalFunction,
                },
                Err(_) => return,
            }
        };
        let bytes = encode_response_adu(header, &response);
        if writer.write_all(&bytes).is_err() {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh_state() -> MockState {
        MockState::new(None)
    }

    #[test]
    fn out_of_range_read_answers_illegal_data_address() {
        let mut state = fresh_state();
        let response = handle_pdu(&mut state, &RequestPdu::ReadHoldingRegisters { address: 9999, quantity: 1 });
        assert_eq!(
            response,
            ResponsePdu::Exception { function: 0x03, code: ExceptionCode::IllegalDataAddress }
        );
    }

    #[test]
    fn write_then_read_back() {
        let mut state = fresh_state();
        handle_pdu(&mut state, &RequestPdu::WriteSingleRegister { address: 10, value: 45 });
        let response = handle_pdu(&mut state, &RequestPdu::ReadHoldingRegisters { address: 10, quantity: 1 });
        assert_eq!(response, ResponsePdu::ReadHoldingRegisters { values: vec![45] });
    }

    #[test]
    fn mask_write_applies_the_mask_formula() {
        let mut state = fresh_state();
        handle_pdu(&mut state, &RequestPdu::WriteSingleRegister { address: 0, value: 0x0012 });
        handle_pdu(
            &mut state,
            &RequestPdu::MaskWriteRegister { address: 0, and_mask: 0x00F2, or_mask: 0x0025 },
        );
        assert_eq!(state.banks.holding[0], 0x0017);
    }

    #[test]
    fn initial_sensor_registers_match_the_plant_defaults() {
        let state = fresh_state();
        assert_eq!(state.banks.input[0], 234);
        assert_eq!(state.banks.input[1], 1013);
        assert_eq!(state.banks.input[2], 500);
        assert_eq!(state.banks.input[3], 750);
        assert!(state.banks.coils[0], "pump starts running");
        assert!(state.banks.holding.iter().all(|&v| v == 0));
    }

    #[test]
    fn heater_power_raises_temperature_once_at_ambient() {
        let mut state = fresh_state();
        // drive temperature to ambient first, heater off
        for _ in 0..200 {
            state.sim_tick(1.0);
        }
        let settled = state.banks.input[0];
        assert!((settled as i32 - 200).abs() <= 1, "settled near ambient, got {settled}");
        state.banks.holding[plant_map::HEATER_POWER as usize] = 500;
        let mut last = state.sim_state().temperature;
        for _ in 0..5 {
            state.sim_tick(1.0);
            let now = state.sim_state().temperature;
            assert!(now > last, "temperature must rise under heater power");
            last = now;
        }
    }

    #[test]
    fn pump_off_decays_flow_toward_the_low_point() {
        let mut state = fresh_state();
        state.banks.coils[plant_map::PUMP_RUNNING as usize] = false;

        // independent scalar reference for the same relaxation recurrence
        let mut expected = 500.0f64;
        for _ in 0..6 {
            state.sim_tick(1.0);
            expected += 0.2 * (100.0 - expected);
            assert!((state.sim_state().flow_rate - expected).abs() < 1e-9);
        }
        assert!(state.banks.input[plant_map::FLOW_RATE as usize] < 500);
    }

    #[test]
    fn production_counts_only_while_conveyor_moves() {
        let mut state = fresh_state();
        state.sim_tick(1.0);
        assert_eq!(state.banks.input[plant_map::PRODUCTION_COUNT as usize], 0);
        state.banks.holding[plant_map::CONVEYOR_SPEED as usize] = 50;
        state.sim_tick(1.0);
        state.sim_tick(1.0);
        assert_eq!(state.banks.input[plant_map::PRODUCTION_COUNT as usize], 2);
    }

    #[test]
    fn simulation_is_deterministic_for_a_fixed_tick_count() {
        let run = || {
            let mut state = fresh_state();
            state.banks.holding[plant_map::HEATER_POWER as usize] = 120;
            for _ in 0..30 {
                state.sim_tick(1.0);
            }
            state.banks
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn frame_log_counts_every_well_formed_frame() {
        let mut state = fresh_state();
        state.log_frame(0x03);
        state.log_frame(0x06);
        assert_eq!(state.frame_log, vec![0x03, 0x06]);
    }
}
