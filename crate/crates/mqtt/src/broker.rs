//! Minimal MQTT 3.1.1 broker: connect/subscribe/publish routing with
//! wildcard matching, retained messages, and QoS 0/1.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crate::codec::{encode_packet, read_packet, Packet};
use crate::topic::{topic_matches, validate_filter};

struct ClientConn {
    writer: TcpStream,
    generation: u64,
}

#[derive(Debug, Clone)]
struct Subscription {
    client_id: String,
    filter: String,
    qos: u8,
}

#[derive(Default)]
struct BrokerCore {
    clients: HashMap<String, ClientConn>,
    subscriptions: Vec<Subscription>,
    retained: BTreeMap<String, (Vec<u8>, u8)>,
    next_out_id: u16,
}

impl BrokerCore {
    fn take_out_id(&mut self) -> u16 {
        self.next_out_id = self.next_out_id.wrapping_add(1).max(1);
        self.next_out_id
    }

    fn send_to(&mut self, client_id: &str, packet: &Packet) {
        if let Some(conn) = self.clients.get_mut(client_id) {
            let bytes = encode_packet(packet).expect("broker packets encode");
            let _ = conn.writer.write_all(&bytes);
        }
    }

    /// Routes a publish to every matching subscriber at min(publish, granted)
    /// QoS; the delivered copy never carries the retain flag.
    fn route(&mut self, topic: &str, payload: &[u8], qos: u8) {
        let targets: Vec<(String, u8)> = self
            .subscriptions
            .iter()
            .filter(|s| topic_matches(&s.filter, topic))
            .map(|s| (s.client_id.clone(), s.qos.min(qos)))
            .collect();
        for (client_id, out_qos) in targets {
            let packet_id = if out_qos == 1 { Some(self.take_out_id()) } else { None };
            let packet = Packet::Publish {
                topic: topic.to_string(),
                payload: payload.to_vec(),
                qos: out_qos,
                retain: false,
                packet_id,
            };
            self.send_to(&client_id, &packet);
        }
    }
}

pub struct BrokerHandle {
    pub addr: std::net::SocketAddr,
    shutdown: Arc<AtomicBool>,
    listener_thread: Option<thread::JoinHandle<()>>,
}

impl BrokerHandle {
    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.listener_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds and serves in background threads. Pass port 0 for an ephemeral
/// port.
pub fn start(host: &str, port: u16) -> std::io::Result<BrokerHandle> {
    let listener = TcpListener::bind((host, port))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;

    let core = Arc::new(Mutex::new(BrokerCore::default()));
    let generations = Arc::new(AtomicU64::new(0));
    let shutdown = Arc::new(AtomicBool::new(false));
    let accept_shutdown = Arc::clone(&shutdown);

    let listener_thread = thread::spawn(move || {
        let mut connections: Vec<thread::JoinHandle<()>> = Vec::new();
        while !accept_shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let core = Arc::clone(&core);
                    let shutdown = Arc::clone(&accept_shutdown);
                    let generations = Arc::clone(&generations);
                    connections.push(thread::spawn(move || {
                        serve_connection(stream, core, generations, shutdown)
                    }));
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

    Ok(BrokerHandle { addr, shutdown, listener_thread: Some(listener_thread) })
}

fn serve_connection(
    stream: TcpStream,
    core: Arc<Mutex<BrokerCore>>,
    generations: Arc<AtomicU64>,
    shutdown: Arc<AtomicBool>,
) {
    let mut reader = match stream.try_clone() {
        Ok(r) => r,
        Err(_) => return,
    };
    if reader.set_read_timeout(Some(Duration::from_millis(200))).is_err() {
        return;
    }

    // the first packet must be CONNECT
    let client_id = loop {
        if shutdown.load(Ordering::SeqCst) {
            return;
        }
        match read_packet(&mut reader) {
            Ok(Packet::Connect { client_id, .. }) => break client_id,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            _ => return,
        }
    };

    let generation = generations.fetch_add(1, Ordering::SeqCst);
    {
        let mut core = core.lock().expect("broker core lock");
        // a new connect for the same client id supersedes the old one
        if let Some(old) = core.clients.remove(&client_id) {
            let _ = old.writer.shutdown(std::net::Shutdown::Both);
            core.subscriptions.retain(|s| s.client_id != client_id);
        }
        let writer = match stream.try_clone() {
            Ok(w) => w,
            Err(_) => return,
        };
        core.clients.insert(client_id.clone(), ClientConn { writer, generation });
        core.send_to(&client_id, &Packet::Connack { return_code: 0 });
    }

    loop {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        let packet = match read_packet(&mut reader) {
            Ok(packet) => packet,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(_) => break,
        };
        let mut core = core.lock().expect("broker core lock");
        match packet {
            Packet::Publish { topic, payload, qos, retain, packet_id } => {
                if retain {
                    if payload.is_empty() {
                        core.retained.remove(&topic);
                    } else {
                        core.retained.insert(topic.clone(), (payload.clone(), qos));
                    }
                }
                core.route(&topic, &payload, qos);
                if let (1, Some(id)) = (qos, packet_id) {
                    core.send_to(&client_id, &Packet::Puback { packet_id: id });
                }
            }
            Packet::Subscribe { packet_id, filters } => {
                let mut granted = Vec::with_capacity(filters.len());
                let mut deliveries: Vec<Packet> = Vec::new();
                for (filter, qos) in filters {
                    if validate_filter(&filter).is_err() {
                        granted.push(0x80);
                        continue;
                    }
                    let qos = qos.min(1);
                    granted.push(qos);
                    core.subscriptions
                        .retain(|s| !(s.client_id == client_id && s.filter == filter));
                    core.subscriptions.push(Subscription {
                        client_id: client_id.clone(),
                        filter: filter.clone(),
                        qos,
                    });
                    // retained messages are delivered on subscribe with the
                    // retain flag set
                    for (topic, (payload, retained_qos)) in &core.retained {
                        if topic_matches(&filter, topic) {
                            let out_qos = qos.min(*retained_qos);
                            deliveries.push(Packet::Publish {
                                topic: topic.clone(),
                                payload: payload.clone(),
                                qos: out_qos,
                                retain: true,
                                packet_id: None,
                            });
                        }
                    }
                }
                core.send_to(&client_id, &Packet::Suback { packet_id, granted });
                for mut delivery in deliveries {
                    if let Packet::Publish { qos: 1, packet_id, .. } = &mut delivery {
                        *packet_id = Some(core.take_out_id());
                    }
                    core.send_to(&client_id, &delivery);
                }
            }
            Packet::Unsubscribe { packet_id, filters } => {
                core.subscriptions
                    .retain(|s| !(s.client_id == client_id && filters.contains(&s.filter)));
                core.send_to(&client_id, &Packet::Unsuback { packet_id });
            }
            Packet::Pingreq => core.send_to(&client_id, &Packet::Pingresp),
            Packet::Puback { .. } => {} // qos 1 outbound is fire-and-forget
            Packet::Disconnect => break,
            _ => break, // protocol violation: close the connection
        }
    }

    let mut core = core.lock().expect("broker core lock");
    // clean-session semantics: drop state unless a newer connection took over
    if core.clients.get(&client_id).is_some_and(|c| c.generation == generation) {
        core.clients.remove(&client_id);
        core.subscriptions.retain(|s| s.client_id != client_id);
    }
}
