//! MQTT client on one broker connection, with a background loop that
//! dispatches inbound publishes and schedules reconnects.
//!
//! Reconnection is timer-driven, not call-driven: after a broker loss the
//! first attempt fires no earlier than `initial_delay_s`, doubling on each
//! consecutive failure up to `max_delay_s`. Tool calls made while
//! disconnected fail immediately instead of forcing a reconnect, so a tight
//! post-restart window can observe the adapter still down.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU16, AtomicU32, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::codec::{encode_packet, read_packet, Packet};
use crate::sparkplug::now_epoch_ms;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconnectPolicy {
    pub initial_delay_s: f64,
    pub multiplier: f64,
    pub max_delay_s: f64,
}

impl Default for ReconnectPolicy {
    fn default() -> ReconnectPolicy {
        ReconnectPolicy { initial_delay_s: 1.0, multiplier: 2.0, max_delay_s: 8.0 }
    }
}

impl ReconnectPolicy {
    /// Default policy with MQTT_RECONNECT_INITIAL_S applied when set.
    pub fn from_env() -> ReconnectPolicy {
        let mut policy = ReconnectPolicy::default();
        if let Some(initial) = std::env::var("MQTT_RECONNECT_INITIAL_S").ok().and_then(|v| v.parse().ok()) {
            if initial > 0.0 {
                policy.initial_delay_s = initial;
            }
        }
        policy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredMessage {
    pub topic: String,
    pub payload: Vec<u8>,
    pub qos: u8,
    pub received_at_ms: u64,
}

pub const MESSAGE_STORE_CAPACITY: usize = 1024;

/// Bounded FIFO of received publishes; the oldest message drops first.
#[derive(Debug, Default)]
pub struct MessageStore {
    messages: VecDeque<StoredMessage>,
}

impl MessageStore {
    fn push(&mut self, message: StoredMessage) {
        if self.messages.len() == MESSAGE_STORE_CAPACITY {
            self.messages.pop_front();
        }
        self.messages.push_back(message);
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientOpError {
    #[error("not connected to the broker")]
    Disconnected,
    #[error("broker did not acknowledge within {0} ms")]
    AckTimeout(u64),
    #[error("i/o failure: {0}")]
    Io(String),
}

struct Shared {
    host: String,
    port: u16,
    client_id: String,
    policy: ReconnectPolicy,
    writer: Mutex<Option<TcpStream>>,
    connack_code: Mutex<Option<u8>>,
    store: Mutex<MessageStore>,
    desired_subs: Mutex<BTreeMap<String, u8>>,
    pending_suback: Mutex<HashMap<u16, mpsc::Sender<Vec<u8>>>>,
    pending_ack: Mutex<HashMap<u16, mpsc::Sender<()>>>,
    next_packet_id: AtomicU16,
    attempt_log: Mutex<Vec<Instant>>,
    attempts_settled: AtomicU32,
    shutdown: AtomicBool,
}

impl Shared {
    fn send(&self, packet: &Packet) -> Result<(), ClientOpError> {
        let bytes = encode_packet(packet).map_err(|e| ClientOpError::Io(e.to_string()))?;
        let mut writer = self.writer.lock().expect("writer lock");
        match writer.as_mut() {
            Some(stream) => stream.write_all(&bytes).map_err(|e| {
                // the loop thread will notice the dead socket too; drop the
                // writer now so later calls fail fast
                *writer = None;
                ClientOpError::Io(e.to_string())
            }),
            None => Err(ClientOpError::Disconnected),
        }
    }

    fn take_packet_id(&self) -> u16 {
        loop {
            let id = self.next_packet_id.fetch_add(1, Ordering::SeqCst);
            if id != 0 {
                return id;
            }
        }
    }
}

pub struct MqttClient {
    shared: Arc<Shared>,
    loop_thread: Mutex<Option<thread::JoinHandle<()>>>,
}

impl MqttClient {
    /// Starts the connection loop and blocks until the first connect
    /// attempt settles (like a synchronous client connect). Reconnects
    /// after a broker loss remain purely timer-driven.
    pub fn connect(host: &str, port: u16, client_id: &str, policy: ReconnectPolicy) -> MqttClient {
        let shared = Arc::new(Shared {
            host: host.to_string(),
            port,
            client_id: client_id.to_string(),
            policy,
            writer: Mutex::new(None),
            connack_code: Mutex::new(None),
            store: Mutex::new(MessageStore::default()),
            desired_subs: Mutex::new(BTreeMap::new()),
            pending_suback: Mutex::new(HashMap::new()),
            pending_ack: Mutex::new(HashMap::new()),
            next_packet_id: AtomicU16::new(1),
            attempt_log: Mutex::new(Vec::new()),
            attempts_settled: AtomicU32::new(0),
            shutdown: AtomicBool::new(false),
        });
        let loop_shared = Arc::clone(&shared);
        let loop_thread = thread::spawn(move || connection_loop(loop_shared));
        let deadline = Instant::now() + Duration::from_millis(1500);
        while shared.attempts_settled.load(Ordering::SeqCst) == 0 && Instant::now() < deadline {
            thread::sleep(Duration::from_millis(2));
        }
        MqttClient { shared, loop_thread: Mutex::new(Some(loop_thread)) }
    }

    pub fn endpoint_uri(&self) -> String {
        format!("mqtt://{}:{}", self.shared.host, self.shared.port)
    }

    pub fn is_connected(&self) -> bool {
        self.shared.writer.lock().expect("writer lock").is_some()
    }

    pub fn connack_code(&self) -> Option<u8> {
        *self.shared.connack_code.lock().expect("connack lock")
    }

    /// Timestamps of every connect attempt made so far; used to assert the
    /// backoff invariant in tests.
    pub fn attempt_log(&self) -> Vec<Instant> {
        self.shared.attempt_log.lock().expect("attempt log lock").clone()
    }

    pub fn subscribe(&self, filter: &str, qos: u8, timeout_ms: u64) -> Result<Vec<u8>, ClientOpError> {
        let packet_id = self.shared.take_packet_id();
        let (tx, rx) = mpsc::channel();
        self.shared.pending_suback.lock().expect("suback lock").insert(packet_id, tx);
        let result = self
            .shared
            .send(&Packet::Subscribe { packet_id, filters: vec![(filter.to_string(), qos)] })
            .and_then(|_| {
                rx.recv_timeout(Duration::from_millis(timeout_ms))
                    .map_err(|_| ClientOpError::AckTimeout(timeout_ms))
            });
        self.shared.pending_suback.lock().expect("suback lock").remove(&packet_id);
        let granted = result?;
        self.shared
            .desired_subs
            .lock()
            .expect("subs lock")
            .insert(filter.to_string(), qos);
        Ok(granted)
    }

    pub fn unsubscribe(&self, filter: &str, timeout_ms: u64) -> Result<(), ClientOpError> {
        let packet_id = self.shared.take_packet_id();
        let (tx, rx) = mpsc::channel();
        self.shared.pending_ack.lock().expect("ack lock").insert(packet_id, tx);
        let result = self
            .shared
            .send(&Packet::Unsubscribe { packet_id, filters: vec![filter.to_string()] })
            .and_then(|_| {
                rx.recv_timeout(Duration::from_millis(timeout_ms))
                    .map_err(|_| ClientOpError::AckTimeout(timeout_ms))
            });
        self.shared.pending_ack.lock().expect("ack lock").remove(&packet_id);
        result?;
        self.shared.desired_subs.lock().expect("subs lock").remove(filter);
        Ok(())
    }

    /// Publishes; QoS 1 waits for the broker's PUBACK.
    pub fn publish(
        &self,
        topic: &str,
        payload: &[u8],
        qos: u8,
        retain: bool,
        timeout_ms: u64,
    ) -> Result<Option<u16>, ClientOpError> {
        let packet_id = if qos == 1 { Some(self.shared.take_packet_id()) } else { None };
        let packet = Packet::Publish {
            topic: topic.to_string(),
            payload: payload.to_vec(),
            qos,
            retain,
            packet_id,
        };
        match packet_id {
            None => {
                self.shared.send(&packet)?;
                Ok(None)
            }
            Some(id) => {
                let (tx, rx) = mpsc::channel();
                self.shared.pending_ack.lock().expect("ack lock").insert(id, tx);
                let result = self.shared.send(&packet).and_then(|_| {
                    rx.recv_timeout(Duration::from_millis(timeout_ms))
                        .map_err(|_| ClientOpError::AckTimeout(timeout_ms))
                });
                self.shared.pending_ack.lock().expect("ack lock").remove(&id);
                result?;
                Ok(Some(id))
            }
        }
    }

    pub fn subscriptions(&self) -> Vec<(String, u8)> {
        self.shared
            .desired_subs
            .lock()
            .expect("subs lock")
            .iter()
            .map(|(f, q)| (f.clone(), *q))
            .collect()
    }

    /// Returns (without removing) stored messages, optionally filtered,
    /// newest last.
    pub fn messages(&self, filter: Option<&str>, limit: usize) -> Vec<StoredMessage> {
        let store = self.shared.store.lock().expect("store lock");
        let matching: Vec<StoredMessage> = store
            .messages
            .iter()
            .filter(|m| filter.is_none_or(|f| crate::topic::topic_matches(f, &m.topic)))
            .cloned()
            .collect();
        let skip = matching.len().saturating_sub(limit);
        matching.into_iter().skip(skip).collect()
    }

    pub fn message_count(&self) -> usize {
        self.shared.store.lock().expect("store lock").len()
    }

    pub fn clear_messages(&self) -> usize {
        let mut store = self.shared.store.lock().expect("store lock");
        let cleared = store.messages.len();
        store.messages.clear();
        cleared
    }

    pub fn shutdown(&self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        // closing the socket unblocks the reader
        if let Some(stream) = self.shared.writer.lock().expect("writer lock").take() {
            let _ = stream.shutdown(std::net::Shutdown::Both);
        }
        if let Some(handle) = self.loop_thread.lock().expect("loop lock").take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MqttClient {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn connection_loop(shared: Arc<Shared>) {
    // None means attempt immediately (process start)
    let mut delay: Option<f64> = None;
    while !shared.shutdown.load(Ordering::SeqCst) {
        if let Some(seconds) = delay {
            sleep_interruptible(Duration::from_secs_f64(seconds), &shared.shutdown);
            if shared.shutdown.load(Ordering::SeqCst) {
                break;
            }
        }
        shared.attempt_log.lock().expect("attempt log lock").push(Instant::now());
        match establish(&shared) {
            Ok(stream) => {
                shared.attempts_settled.fetch_add(1, Ordering::SeqCst);
                resubscribe(&shared);
                read_until_error(&shared, stream);
                *shared.writer.lock().expect("writer lock") = None;
                // first reconnect attempt no earlier than the initial delay
                delay = Some(shared.policy.initial_delay_s);
            }
            Err(_) => {
                shared.attempts_settled.fetch_add(1, Ordering::SeqCst);
                delay = Some(match delay {
                    None => shared.policy.initial_delay_s,
                    Some(d) => (d * shared.policy.multiplier).min(shared.policy.max_delay_s),
                });
            }
        }
    }
    *shared.writer.lock().expect("writer lock") = None;
}

fn establish(shared: &Arc<Shared>) -> std::io::Result<TcpStream> {
    let addr: SocketAddr = (shared.host.as_str(), shared.port)
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "no address"))?;
    let mut stream = TcpStream::connect_timeout(&addr, Duration::from_millis(500))?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(Duration::from_millis(1000)))?;
    let connect = Packet::Connect {
        client_id: shared.client_id.clone(),
        keep_alive_s: 60,
        clean_session: true,
    };
    stream.write_all(&encode_packet(&connect).expect("connect encodes"))?;
    match read_packet(&mut stream)? {
        Packet::Connack { return_code: 0 } => {
            *shared.connack_code.lock().expect("connack lock") = Some(0);
            stream.set_read_timeout(None)?;
            *shared.writer.lock().expect("writer lock") = Some(stream.try_clone()?);
            Ok(stream)
        }
        Packet::Connack { return_code } => {
            *shared.connack_code.lock().expect("connack lock") = Some(return_code);
            Err(std::io::Error::other(format!("connection refused, code {return_code}")))
        }
        other => Err(std::io::Error::other(format!("expected CONNACK, got {other:?}"))),
    }
}

fn resubscribe(shared: &Arc<Shared>) {
    let subs = shared.desired_subs.lock().expect("subs lock").clone();
    for (filter, qos) in subs {
        let packet_id = shared.take_packet_id();
        let _ = shared.send(&Packet::Subscribe { packet_id, filters: vec![(filter, qos)] });
    }
}

fn read_until_error(shared: &Arc<Shared>, mut stream: TcpStream) {
    loop {
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let packet = match read_packet(&mut stream) {
            Ok(packet) => packet,
            Err(_) => return,
        };
        match packet {
            Packet::Publish { topic, payload, qos, packet_id, .. } => {
                shared.store.lock().expect("store lock").push(StoredMessage {
                    topic,
                    payload,
                    qos,
                    received_at_ms: now_epoch_ms(),
                });
                if let (1, Some(id)) = (qos, packet_id) {
                    let _ = shared.send(&Packet::Puback { packet_id: id });
                }
            }
            Packet::Suback { packet_id, granted } => {
                if let Some(tx) = shared.pending_suback.lock().expect("suback lock").remove(&packet_id) {
                    let _ = tx.send(granted);
                }
            }
            Packet::Puback { packet_id } | Packet::Unsuback { packet_id } => {
                if let Some(tx) = shared.pending_ack.lock().expect("ack lock").remove(&packet_id) {
                    let _ = tx.send(());
                }
            }
            Packet::Pingresp => {}
            Packet::Disconnect => return,
            _ => {}
        }
    }
}

fn sleep_interruptible(total: Duration, shutdown: &AtomicBool) {
    let mut slept = Duration::ZERO;
    while slept < total && !shutdown.load(Ordering::SeqCst) {
        let slice = (total - slept).min(Duration::from_millis(25));
        thread::sleep(slice);
        slept += slice;
    }
}
