//! Broker behavior through the real client: routing, retained messages,
//! granted QoS, supersession, and the reconnect-backoff timing invariant.

use std::time::{Duration, Instant};

use otbridge_mqtt::broker;
use otbridge_mqtt::client::{MqttClient, ReconnectPolicy};
use otbridge_mqtt::topic::topic_matches;

fn wait_connected(client: &MqttClient, timeout: Duration) {
    let deadline = Instant::now() + timeout;
    while !client.is_connected() {
        assert!(Instant::now() < deadline, "client did not connect in time");
        std::thread::sleep(Duration::from_millis(10));
    }
}

fn wait_for_message(client: &MqttClient, topic: &str, timeout: Duration) -> bool {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if client.messages(None, usize::MAX).iter().any(|m| m.topic == topic) {
            return true;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    false
}

#[test]
fn publish_routes_to_matching_wildcard_subscriber() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let subscriber = MqttClient::connect("127.0.0.1", broker.addr.port(), "sub-a", ReconnectPolicy::default());
    let publisher = MqttClient::connect("127.0.0.1", broker.addr.port(), "pub-b", ReconnectPolicy::default());
    wait_connected(&subscriber, Duration::from_secs(2));
    wait_connected(&publisher, Duration::from_secs(2));

    let granted = subscriber.subscribe("sensors/#", 0, 2000).unwrap();
    assert_eq!(granted, vec![0]);

    publisher.publish("sensors/t1", b"21.5", 0, false, 2000).unwrap();
    assert!(wait_for_message(&subscriber, "sensors/t1", Duration::from_secs(2)));

    publisher.publish("actuators/v1", b"x", 0, false, 2000).unwrap();
    publisher.publish("sensors/done", b"", 0, false, 2000).unwrap();
    assert!(wait_for_message(&subscriber, "sensors/done", Duration::from_secs(2)));
    assert!(
        !subscriber.messages(None, usize::MAX).iter().any(|m| m.topic == "actuators/v1"),
        "non-matching topic must not be delivered"
    );
}

#[test]
fn granted_qos_is_min_of_requested_and_one() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let client = MqttClient::connect("127.0.0.1", broker.addr.port(), "qos-client", ReconnectPolicy::default());
    wait_connected(&client, Duration::from_secs(2));
    assert_eq!(client.subscribe("a/b", 0, 2000).unwrap(), vec![0]);
    assert_eq!(client.subscribe("a/c", 1, 2000).unwrap(), vec![1]);
    // the broker caps anything above 1
    assert_eq!(client.subscribe("a/d", 7, 2000).unwrap(), vec![1]);
}

#[test]
fn qos1_publish_gets_a_puback() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let client = MqttClient::connect("127.0.0.1", broker.addr.port(), "ack-client", ReconnectPolicy::default());
    wait_connected(&client, Duration::from_secs(2));
    let packet_id = client.publish("ctl/x", b"go", 1, false, 2000).unwrap();
    assert!(packet_id.is_some());
}

#[test]
fn retained_message_is_delivered_to_a_later_subscriber() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let publisher = MqttClient::connect("127.0.0.1", broker.addr.port(), "ret-pub", ReconnectPolicy::default());
    wait_connected(&publisher, Duration::from_secs(2));
    publisher.publish("status/last", b"ONLINE", 0, true, 2000).unwrap();

    let late = MqttClient::connect("127.0.0.1", broker.addr.port(), "ret-sub", ReconnectPolicy::default());
    wait_connected(&late, Duration::from_secs(2));
    late.subscribe("status/#", 0, 2000).unwrap();
    assert!(wait_for_message(&late, "status/last", Duration::from_secs(2)));
    let stored = late.messages(Some("status/last"), 10);
    assert_eq!(stored[0].payload, b"ONLINE");
}

/// Broker routing equals the wildcard matcher on 200 deterministic random
/// (filter, topic) pairs. A per-pair sync marker keeps this ordering-exact
/// with no sleeps: the broker routes the probe (if it matches) strictly
/// before the marker on the same connection.
#[test]
fn routing_matches_the_brute_force_matcher_on_random_pairs() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let client = MqttClient::connect("127.0.0.1", broker.addr.port(), "routing", ReconnectPolicy::default());
    wait_connected(&client, Duration::from_secs(2));
    client.subscribe("sync/#", 0, 2000).unwrap();

    // small deterministic LCG; no external RNG needed
    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self, bound: usize) -> usize {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 33) as usize) % bound
        }
        fn levels(&mut self, wildcards: bool) -> Vec<String> {
            let symbols = ["a", "b", "c"];
            let depth = 1 + self.next(3);
            (0..depth)
                .map(|_| {
                    if wildcards && self.next(5) == 0 {
                        "+".to_string()
                    } else {
                        symbols[self.next(3)].to_string()
                    }
                })
                .collect()
        }
    }
    let mut rng = Lcg(0x2545F491_4F6CDD1D);

    for round in 0..200 {
        let mut filter_levels = rng.levels(true);
        if rng.next(4) == 0 {
            filter_levels.push("#".to_string());
        }
        let filter = filter_levels.join("/");
        let topic = rng.levels(false).join("/");
        let expected = topic_matches(&filter, &topic);

        client.subscribe(&filter, 0, 2000).unwrap();
        client.publish(&topic, b"probe", 0, false, 2000).unwrap();
        let marker = format!("sync/{round}");
        client.publish(&marker, b"", 0, false, 2000).unwrap();
        assert!(wait_for_message(&client, &marker, Duration::from_secs(2)), "marker lost at round {round}");

        let delivered = client.messages(None, usize::MAX).iter().any(|m| m.topic == topic);
        assert_eq!(delivered, expected, "round {round}: filter={filter} topic={topic}");

        client.unsubscribe(&filter, 2000).unwrap();
        client.clear_messages();
    }
}

#[test]
fn new_connection_with_same_client_id_supersedes_the_old() {
    let broker = broker::start("127.0.0.1", 0).unwrap();
    let first = MqttClient::connect("127.0.0.1", broker.addr.port(), "same-id", ReconnectPolicy::default());
    wait_connected(&first, Duration::from_secs(2));
    let second = MqttClient::connect("127.0.0.1", broker.addr.port(), "same-id", ReconnectPolicy::default());
    wait_connected(&second, Duration::from_secs(2));
    // the second session works; the first was closed by the broker
    second.subscribe("x/y", 0, 2000).unwrap();
    second.publish("x/y", b"1", 0, false, 2000).unwrap();
    assert!(wait_for_message(&second, "x/y", Duration::from_secs(2)));
}

/// The backoff invariant: after a broker loss, no reconnect attempt fires
/// before `initial_delay_s`. This is what makes a tight post-restart window
/// observe the adapter still disconnected.
#[test]
fn no_reconnect_attempt_before_the_initial_delay() {
    let mut broker = broker::start("127.0.0.1", 0).unwrap();
    let port = broker.addr.port();
    let policy = ReconnectPolicy { initial_delay_s: 0.4, multiplier: 2.0, max_delay_s: 8.0 };
    let client = MqttClient::connect("127.0.0.1", port, "backoff", ReconnectPolicy { ..policy });
    wait_connected(&client, Duration::from_secs(2));
    client.subscribe("keep/me", 0, 2000).unwrap();

    let before_stop = Instant::now();
    broker.stop();
    // immediate restart: the broker is back well before the first allowed
    // reconnect attempt
    let _broker2 = broker::start("127.0.0.1", port, ).unwrap();

    let deadline = Instant::now() + Duration::from_secs(3);
    while !client.is_connected() {
        assert!(Instant::now() < deadline, "client never reconnected");
        std::thread::sleep(Duration::from_millis(10));
    }

    let attempts: Vec<Instant> = client
        .attempt_log()
        .into_iter()
        .filter(|t| *t > before_stop)
        .collect();
    assert!(!attempts.is_empty(), "a reconnect attempt must have happened");
    let gap = attempts[0].duration_since(before_stop);
    assert!(
        gap >= Duration::from_secs_f64(policy.initial_delay_s),
        "first reconnect fired after {gap:?}, before the {}s initial delay",
        policy.initial_delay_s
    );

    // the desired subscription survives the reconnect
    client.publish("keep/me", b"back", 0, false, 2000).unwrap();
    assert!(wait_for_message(&client, "keep/me", Duration::from_secs(2)));
}

#[test]
fn calls_while_disconnected_fail_immediately() {
    let mut broker = broker::start("127.0.0.1", 0).unwrap();
    let client = MqttClient::connect("127.0.0.1", broker.addr.port(), "down", ReconnectPolicy::default());
    wait_connected(&client, Duration::from_secs(2));
    broker.stop();
    // wait for the client to notice
    let deadline = Instant::now() + Duration::from_secs(2);
    while client.is_connected() && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(5));
    }
    let started = Instant::now();
    let result = client.publish("t", b"x", 0, false, 2000);
    assert!(result.is_err());
    assert!(started.elapsed() < Duration::from_millis(200), "disconnected publish must fail fast");
}
