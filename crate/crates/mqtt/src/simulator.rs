//! Sparkplug B edge-node simulator: NBIRTH, one DBIRTH per device, then
//! 1 Hz DDATA with sinusoidal metrics. Republishes births after a broker
//! loss, as a new Sparkplug session.

use std::f64::consts::TAU;
use std::io::Write;
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::codec::{encode_packet, read_packet, Packet};
use crate::sparkplug::{
    encode_payload, now_epoch_ms, MessageType, Metric, MetricValue, SparkplugSession, SpPayload,
    SpTopic, DEFAULT_EDGE_NODE_ID, DEFAULT_GROUP_ID,
};

#[derive(Debug, Clone)]
pub struct SimMetric {
    pub name: String,
    pub base: f64,
    pub amplitude: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone)]
pub struct SimDevice {
    pub device_id: String,
    pub metrics: Vec<SimMetric>,
}

/// The two simulated devices and their sinusoid constants.
pub fn default_devices() -> Vec<SimDevice> {
    let metric = |name: &str, base: f64, amplitude: f64, period_s: f64| SimMetric {
        name: name.to_string(),
        base,
        amplitude,
        period_s,
    };
    vec![
        SimDevice {
            device_id: "device-1".to_string(),
            metrics: vec![metric("temperature", 25.0, 5.0, 60.0), metric("humidity", 40.0, 10.0, 90.0)],
        },
        SimDevice {
            device_id: "device-2".to_string(),
            metrics: vec![metric("pressure", 1013.0, 20.0, 120.0), metric("flow", 50.0, 15.0, 45.0)],
        },
    ]
}

/// Metric value at simulation time `t_s`: base + amplitude * sin(2*pi*t/T).
pub fn sample(metric: &SimMetric, t_s: f64) -> f64 {
    metric.base + metric.amplitude * (TAU * t_s / metric.period_s).sin()
}

pub struct SimulatorHandle {
    shutdown: Arc<AtomicBool>,
    thread: Option<thread::JoinHandle<()>>,
}

impl SimulatorHandle {
    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for SimulatorHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn start(broker_host: &str, broker_port: u16, devices: Vec<SimDevice>, tick_hz: f64) -> SimulatorHandle {
    let shutdown = Arc::new(AtomicBool::new(false));
    let thread_shutdown = Arc::clone(&shutdown);
    let host = broker_host.to_string();
    let thread = thread::spawn(move || {
        run(&host, broker_port, &devices, tick_hz, &thread_shutdown);
    });
    SimulatorHandle { shutdown, thread: Some(thread) }
}

fn run(host: &str, port: u16, devices: &[SimDevice], tick_hz: f64, shutdown: &AtomicBool) {
    let mut session = SparkplugSession::new(DEFAULT_GROUP_ID, DEFAULT_EDGE_NODE_ID);
    let interval = Duration::from_secs_f64(1.0 / tick_hz.max(0.001));
    while !shutdown.load(Ordering::SeqCst) {
        let mut stream = match connect(host, port) {
            Ok(stream) => stream,
            Err(_) => {
                sleep_interruptible(Duration::from_millis(500), shutdown);
                continue;
            }
        };
        if publish_births(&mut stream, &mut session, devices).is_err() {
            continue; // broker vanished mid-birth; reconnect as a new session
        }
        let mut tick: u64 = 0;
        'session: loop {
            let t_s = tick as f64 / tick_hz.max(0.001);
            for device in devices {
                if publish_ddata(&mut stream, &mut session, device, t_s).is_err() {
                    break 'session;
                }
            }
            tick += 1;
            sleep_interruptible(interval, shutdown);
            if shutdown.load(Ordering::SeqCst) {
                return;
            }
        }
    }
}

fn connect(host: &str, port: u16) -> std::io::Result<TcpStream> {
    let addr: std::net::SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "bad address"))?;
    let mut stream = TcpStream::connect_timeout(&addr, Duration::from_millis(500))?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(Duration::from_millis(1000)))?;
    let connect = Packet::Connect {
        client_id: "sp-edge-simulator".to_string(),
        keep_alive_s: 60,
        clean_session: true,
    };
    stream.write_all(&encode_packet(&connect).expect("connect encodes"))?;
    match read_packet(&mut stream)? {
        Packet::Connack { return_code: 0 } => Ok(stream),
        other => Err(std::io::Error::other(format!("expected CONNACK, got {other:?}"))),
    }
}

fn publish_sp(stream: &mut TcpStream, topic: &SpTopic, payload: &SpPayload) -> std::io::Result<()> {
    let packet = Packet::Publish {
        topic: topic.render().expect("simulator topics are valid"),
        payload: encode_payload(payload),
        qos: 0,
        retain: false,
        packet_id: None,
    };
    stream.write_all(&encode_packet(&packet).expect("publish encodes"))
}

fn publish_births(
    stream: &mut TcpStream,
    session: &mut SparkplugSession,
    devices: &[SimDevice],
) -> std::io::Result<()> {
    let now = now_epoch_ms();
    let (topic, payload) = session.nbirth(Vec::new(), now);
    publish_sp(stream, &topic, &payload)?;
    for device in devices {
        let metrics = device
            .metrics
            .iter()
            .map(|m| Metric::new(&m.name, now, MetricValue::Float(sample(m, 0.0) as f32)))
            .collect();
        let (topic, payload) = session
            .sequenced(MessageType::Dbirth, Some(&device.device_id), metrics, now)
            .expect("session initialized by the nbirth above");
        publish_sp(stream, &topic, &payload)?;
    }
    Ok(())
}

fn publish_ddata(
    stream: &mut TcpStream,
    session: &mut SparkplugSession,
    device: &SimDevice,
    t_s: f64,
) -> std::io::Result<()> {
    let now = now_epoch_ms();
    let metrics = device
        .metrics
        .iter()
        .map(|m| Metric::new(&m.name, now, MetricValue::Float(sample(m, t_s) as f32)))
        .collect();
    let (topic, payload) = session
        .sequenced(MessageType::Ddata, Some(&device.device_id), metrics, now)
        .expect("session stays initialized");
    publish_sp(stream, &topic, &payload)
}

fn sleep_interruptible(total: Duration, shutdown: &AtomicBool) {
    let mut slept = Duration::ZERO;
    while slept < total && !shutdown.load(Ordering::SeqCst) {
        let slice = (total - slept).min(Duration::from_millis(25));
        thread::sleep(slice);
        slept += slice;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_hits_base_at_zero_and_peak_at_quarter_period() {
        let metric = SimMetric { name: "t".to_string(), base: 25.0, amplitude: 5.0, period_s: 60.0 };
        assert_eq!(sample(&metric, 0.0), 25.0, "sin 0 = 0");
        assert!((sample(&metric, 15.0) - 30.0).abs() < 1e-9, "sin pi/2 = 1");
        assert!((sample(&metric, 30.0) - 25.0).abs() < 1e-9);
        assert!((sample(&metric, 45.0) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn default_devices_match_the_documented_constants() {
        let devices = default_devices();
        assert_eq!(devices.len(), 2);
        assert_eq!(devices[0].device_id, "device-1");
        assert_eq!(devices[0].metrics[0].name, "temperature");
        assert_eq!(devices[0].metrics[0].base, 25.0);
        assert_eq!(devices[1].metrics[1].period_s, 45.0);
    }
}
