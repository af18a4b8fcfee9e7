//! Sparkplug B: topic construction, the sequence-number lifecycle, and the
//! metric-payload codec.
//!
//! Payloads use the Protocol Buffers wire format over the field-number
//! subset of the Eclipse Sparkplug B payload schema:
//!
//! ```text
//! Payload: timestamp = 1 (varint), metrics = 2 (message), seq = 3 (varint)
//! Metric:  name = 1 (string), alias = 2 (varint), timestamp = 3 (varint),
//!          datatype = 4 (varint), int_value = 10 (varint),
//!          long_value = 11 (varint), float_value = 12 (fixed32),
//!          double_value = 13 (fixed64), boolean_value = 14 (varint),
//!          string_value = 15 (string)
//! ```
//!
//! Datatype codes follow the same schema: Int32 = 3, Int64 = 4, Float = 9,
//! Double = 10, Boolean = 11, String = 12. Third-party Sparkplug decoders
//! can therefore read every payload this module emits.

pub const NAMESPACE: &str = "spBv1.0";

pub const DEFAULT_GROUP_ID: &str = "otbridge";
pub const DEFAULT_EDGE_NODE_ID: &str = "edge-node-1";
pub const DEFAULT_DEVICES: [&str; 2] = ["device-1", "device-2"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SparkplugError {
    #[error("invalid topic: {0}")]
    Topic(String),
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("sequence not initialized; publish an NBIRTH first")]
    SequenceUninitialized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageType {
    Nbirth,
    Ndeath,
    Dbirth,
    Ddeath,
    Ndata,
    Ddata,
    Ncmd,
    Dcmd,
}

impl MessageType {
    pub const ALL: [MessageType; 8] = [
        MessageType::Nbirth,
        MessageType::Ndeath,
        MessageType::Dbirth,
        MessageType::Ddeath,
        MessageType::Ndata,
        MessageType::Ddata,
        MessageType::Ncmd,
        MessageType::Dcmd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::Nbirth => "NBIRTH",
            MessageType::Ndeath => "NDEATH",
            MessageType::Dbirth => "DBIRTH",
            MessageType::Ddeath => "DDEATH",
            MessageType::Ndata => "NDATA",
            MessageType::Ddata => "DDATA",
            MessageType::Ncmd => "NCMD",
            MessageType::Dcmd => "DCMD",
        }
    }

    pub fn parse(s: &str) -> Option<MessageType> {
        MessageType::ALL.iter().copied().find(|t| t.as_str() == s)
    }

    /// Device-scoped types require a device id; node-scoped types forbid it.
    pub fn is_device_scoped(self) -> bool {
        matches!(self, MessageType::Dbirth | MessageType::Ddeath | MessageType::Ddata | MessageType::Dcmd)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpTopic {
    pub group_id: String,
    pub message_type: MessageType,
    pub edge_node_id: String,
    pub device_id: Option<String>,
}

fn valid_segment(segment: &str) -> bool {
    !segment.is_empty() && !segment.contains(['/', '+', '#'])
}

impl SpTopic {
    pub fn node(group_id: &str, message_type: MessageType, edge_node_id: &str) -> SpTopic {
        SpTopic {
            group_id: group_id.to_string(),
            message_type,
            edge_node_id: edge_node_id.to_string(),
            device_id: None,
        }
    }

    pub fn device(group_id: &str, message_type: MessageType, edge_node_id: &str, device_id: &str) -> SpTopic {
        SpTopic {
            group_id: group_id.to_string(),
            message_type,
            edge_node_id: edge_node_id.to_string(),
            device_id: Some(device_id.to_string()),
        }
    }

    /// Renders `spBv1.0/{group}/{type}/{edge}[/{device}]`.
    pub fn render(&self) -> Result<String, SparkplugError> {
        if self.message_type.is_device_scoped() != self.device_id.is_some() {
            return Err(SparkplugError::Topic(format!(
                "{} topics {} a device id",
                self.message_type.as_str(),
                if self.message_type.is_device_scoped() { "require" } else { "forbid" }
            )));
        }
        for segment in [Some(self.group_id.as_str()), Some(self.edge_node_id.as_str()), self.device_id.as_deref()]
            .into_iter()
            .flatten()
        {
            if !valid_segment(segment) {
                return Err(SparkplugError::Topic(format!("invalid topic segment `{segment}`")));
            }
        }
        let mut topic = format!("{NAMESPACE}/{}/{}/{}", self.group_id, self.message_type.as_str(), self.edge_node_id);
        if let Some(device) = &self.device_id {
            topic.push('/');
            topic.push_str(device);
        }
        Ok(topic)
    }

    /// Parse inverse of `render`.
    pub fn parse(topic: &str) -> Result<SpTopic, SparkplugError> {
        let segments: Vec<&str> = topic.split('/').collect();
        if segments.len() != 4 && segments.len() != 5 {
            return Err(SparkplugError::Topic(format!("expected 4 or 5 segments, got {}", segments.len())));
        }
        if segments[0] != NAMESPACE {
            return Err(SparkplugError::Topic(format!("unexpected namespace `{}`", segments[0])));
        }
        let message_type = MessageType::parse(segments[2])
            .ok_or_else(|| SparkplugError::Topic(format!("unknown message type `{}`", segments[2])))?;
        let parsed = SpTopic {
            group_id: segments[1].to_string(),
            message_type,
            edge_node_id: segments[3].to_string(),
            device_id: segments.get(4).map(|s| s.to_string()),
        };
        // re-render to enforce the device-scoping and segment rules
        parsed.render()?;
        Ok(parsed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Int32(i32),
    Int64(i64),
    Float(f32),
    Double(f64),
    Boolean(bool),
    String(String),
}

impl MetricValue {
    pub fn datatype_code(&self) -> u64 {
        match self {
            MetricValue::Int32(_) => 3,
            MetricValue::Int64(_) => 4,
            MetricValue::Float(_) => 9,
            MetricValue::Double(_) => 10,
            MetricValue::Boolean(_) => 11,
            MetricValue::String(_) => 12,
        }
    }

    pub fn datatype_name(&self) -> &'static str {
        match self {
            MetricValue::Int32(_) => "int32",
            MetricValue::Int64(_) => "int64",
            MetricValue::Float(_) => "float",
            MetricValue::Double(_) => "double",
            MetricValue::Boolean(_) => "boolean",
            MetricValue::String(_) => "string",
        }
    }
}

/// One timestamped metric; the datatype is implied by the value so the
/// "exactly one value field" invariant holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub alias: Option<u64>,
    pub timestamp_ms: u64,
    pub value: MetricValue,
}

impl Metric {
    pub fn new(name: &str, timestamp_ms: u64, value: MetricValue) -> Metric {
        Metric { name: name.to_string(), alias: None, timestamp_ms, value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpPayload {
    pub timestamp_ms: u64,
    pub metrics: Vec<Metric>,
    pub seq: u8,
}

// ---- protobuf wire primitives ----

pub fn encode_varint(mut value: u64, out: &mut Vec<u8>) {
    loop {
        let byte = (value & 0x7F) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub fn decode_varint(bytes: &[u8], at: &mut usize) -> Result<u64, SparkplugError> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = *bytes.get(*at).ok_or_else(|| SparkplugError::Payload("truncated varint".to_string()))?;
        *at += 1;
        value |= ((byte & 0x7F) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
        if shift >= 64 {
            return Err(SparkplugError::Payload("varint too long".to_string()));
        }
    }
}

fn tag(field: u64, wire_type: u64) -> u64 {
    (field << 3) | wire_type
}

fn push_field_varint(out: &mut Vec<u8>, field: u64, value: u64) {
    encode_varint(tag(field, 0), out);
    encode_varint(value, out);
}

fn push_field_bytes(out: &mut Vec<u8>, field: u64, data: &[u8]) {
    encode_varint(tag(field, 2), out);
    encode_varint(data.len() as u64, out);
    out.extend_from_slice(data);
}

fn encode_metric(metric: &Metric) -> Vec<u8> {
    let mut out = Vec::new();
    push_field_bytes(&mut out, 1, metric.name.as_bytes());
    if let Some(alias) = metric.alias {
        push_field_varint(&mut out, 2, alias);
    }
    push_field_varint(&mut out, 3, metric.timestamp_ms);
    push_field_varint(&mut out, 4, metric.value.datatype_code());
    match &metric.value {
        MetricValue::Int32(v) => push_field_varint(&mut out, 10, *v as u32 as u64),
        MetricValue::Int64(v) => push_field_varint(&mut out, 11, *v as u64),
        MetricValue::Float(v) => {
            encode_varint(tag(12, 5), &mut out);
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        MetricValue::Double(v) => {
            encode_varint(tag(13, 1), &mut out);
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        MetricValue::Boolean(v) => push_field_varint(&mut out, 14, u64::from(*v)),
        MetricValue::String(v) => push_field_bytes(&mut out, 15, v.as_bytes()),
    }
    out
}

pub fn encode_payload(payload: &SpPayload) -> Vec<u8> {
    let mut out = Vec::new();
    push_field_varint(&mut out, 1, payload.timestamp_ms);
    for metric in &payload.metrics {
        push_field_bytes(&mut out, 2, &encode_metric(metric));
    }
    push_field_varint(&mut out, 3, payload.seq as u64);
    out
}

fn skip_field(wire_type: u64, bytes: &[u8], at: &mut usize) -> Result<(), SparkplugError> {
    match wire_type {
        0 => {
            decode_varint(bytes, at)?;
        }
        1 => *at += 8,
        2 => {
            let len = decode_varint(bytes, at)? as usize;
            *at += len;
        }
        5 => *at += 4,
        other => return Err(SparkplugError::Payload(format!("unsupported wire type {other}"))),
    }
    if *at > bytes.len() {
        return Err(SparkplugError::Payload("field extends past the payload".to_string()));
    }
    Ok(())
}

fn take_bytes<'a>(bytes: &'a [u8], at: &mut usize, len: usize) -> Result<&'a [u8], SparkplugError> {
    let slice = bytes
        .get(*at..*at + len)
        .ok_or_else(|| SparkplugError::Payload("truncated length-delimited field".to_string()))?;
    *at += len;
    Ok(slice)
}

fn decode_metric(bytes: &[u8]) -> Result<Metric, SparkplugError> {
    let mut at = 0usize;
    let mut name = String::new();
    let mut alias = None;
    let mut timestamp_ms = 0u64;
    let mut datatype: Option<u64> = None;
    let mut value: Option<MetricValue> = None;
    while at < bytes.len() {
        let key = decode_varint(bytes, &mut at)?;
        let (field, wire_type) = (key >> 3, key & 0x07);
        match (field, wire_type) {
            (1, 2) => {
                let len = decode_varint(bytes, &mut at)? as usize;
                name = String::from_utf8(take_bytes(bytes, &mut at, len)?.to_vec())
                    .map_err(|_| SparkplugError::Payload("metric name is not utf-8".to_string()))?;
            }
            (2, 0) => alias = Some(decode_varint(bytes, &mut at)?),
            (3, 0) => timestamp_ms = decode_varint(bytes, &mut at)?,
            (4, 0) => datatype = Some(decode_varint(bytes, &mut at)?),
            (10, 0) => value = Some(MetricValue::Int32(decode_varint(bytes, &mut at)? as u32 as i32)),
            (11, 0) => value = Some(MetricValue::Int64(decode_varint(bytes, &mut at)? as i64)),
            (12, 5) => {
                let raw = take_bytes(bytes, &mut at, 4)?;
                value = Some(MetricValue::Float(f32::from_bits(u32::from_le_bytes(raw.try_into().unwrap()))));
            }
            (13, 1) => {
                let raw = take_bytes(bytes, &mut at, 8)?;
                value = Some(MetricValue::Double(f64::from_bits(u64::from_le_bytes(raw.try_into().unwrap()))));
            }
            (14, 0) => value = Some(MetricValue::Boolean(decode_varint(bytes, &mut at)? != 0)),
            (15, 2) => {
                let len = decode_varint(bytes, &mut at)? as usize;
                value = Some(MetricValue::String(
                    String::from_utf8(take_bytes(bytes, &mut at, len)?.to_vec())
                        .map_err(|_| SparkplugError::Payload("metric string is not utf-8".to_string()))?,
                ));
            }
            (_, wt) => skip_field(wt, bytes, &mut at)?,
        }
    }
    let value = value.ok_or_else(|| SparkplugError::Payload(format!("metric `{name}` has no value field")))?;
    if let Some(code) = datatype {
        if code != value.datatype_code() {
            return Err(SparkplugError::Payload(format!(
                "metric `{name}` datatype {code} does not match its value field"
            )));
        }
    }
    Ok(Metric { name, alias, timestamp_ms, value })
}

pub fn decode_payload(bytes: &[u8]) -> Result<SpPayload, SparkplugError> {
    let mut at = 0usize;
    let mut payload = SpPayload { timestamp_ms: 0, metrics: Vec::new(), seq: 0 };
    while at < bytes.len() {
        let key = decode_varint(bytes, &mut at)?;
        let (field, wire_type) = (key >> 3, key & 0x07);
        match (field, wire_type) {
            (1, 0) => payload.timestamp_ms = decode_varint(bytes, &mut at)?,
            (2, 2) => {
                let len = decode_varint(bytes, &mut at)? as usize;
                payload.metrics.push(decode_metric(take_bytes(bytes, &mut at, len)?)?);
            }
            (3, 0) => payload.seq = (decode_varint(bytes, &mut at)? % 256) as u8,
            (_, wt) => skip_field(wt, bytes, &mut at)?,
        }
    }
    Ok(payload)
}

/// Sequence lifecycle for one edge node: NBIRTH resets seq to 0 and bumps
/// bdSeq; every subsequent node publish takes the next value mod 256.
#[derive(Debug, Clone)]
pub struct SparkplugSession {
    pub group_id: String,
    pub edge_node_id: String,
    bd_seq: u64,
    seq: Option<u8>,
    sessions_started: u64,
}

impl SparkplugSession {
    pub fn new(group_id: &str, edge_node_id: &str) -> SparkplugSession {
        SparkplugSession {
            group_id: group_id.to_string(),
            edge_node_id: edge_node_id.to_string(),
            bd_seq: 0,
            seq: None,
            sessions_started: 0,
        }
    }

    pub fn bd_seq(&self) -> u64 {
        self.bd_seq
    }

    pub fn is_initialized(&self) -> bool {
        self.seq.is_some()
    }

    /// Starts (or restarts) the session: seq resets to 0 and the returned
    /// payload carries the bdSeq metric.
    pub fn nbirth(&mut self, mut metrics: Vec<Metric>, timestamp_ms: u64) -> (SpTopic, SpPayload) {
        if self.sessions_started > 0 {
            self.bd_seq += 1;
        }
        self.sessions_started += 1;
        self.seq = Some(0);
        metrics.push(Metric::new("bdSeq", timestamp_ms, MetricValue::Int64(self.bd_seq as i64)));
        (
            SpTopic::node(&self.group_id, MessageType::Nbirth, &self.edge_node_id),
            SpPayload { timestamp_ms, metrics, seq: 0 },
        )
    }

    pub fn ndeath(&self, timestamp_ms: u64) -> (SpTopic, SpPayload) {
        let metrics = vec![Metric::new("bdSeq", timestamp_ms, MetricValue::Int64(self.bd_seq as i64))];
        (
            SpTopic::node(&self.group_id, MessageType::Ndeath, &self.edge_node_id),
            SpPayload { timestamp_ms, metrics, seq: self.seq.unwrap_or(0) },
        )
    }

    pub fn next_seq(&mut self) -> Result<u8, SparkplugError> {
        let current = self.seq.ok_or(SparkplugError::SequenceUninitialized)?;
        let next = current.wrapping_add(1);
        self.seq = Some(next);
        Ok(next)
    }

    /// Builds the next sequenced publish for a node- or device-scoped type.
    pub fn sequenced(
        &mut self,
        message_type: MessageType,
        device_id: Option<&str>,
        metrics: Vec<Metric>,
        timestamp_ms: u64,
    ) -> Result<(SpTopic, SpPayload), SparkplugError> {
        let seq = self.next_seq()?;
        let topic = SpTopic {
            group_id: self.group_id.clone(),
            message_type,
            edge_node_id: self.edge_node_id.clone(),
            device_id: device_id.map(str::to_string),
        };
        topic.render()?;
        Ok((topic, SpPayload { timestamp_ms, metrics, seq }))
    }
}

pub fn now_epoch_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ddata_topic_renders_five_segments() {
        let topic = SpTopic::device("plantA", MessageType::Ddata, "edge-node-1", "device-1");
        assert_eq!(topic.render().unwrap(), "spBv1.0/plantA/DDATA/edge-node-1/device-1");
    }

    #[test]
    fn nbirth_topic_renders_four_segments() {
        let topic = SpTopic::node("g", MessageType::Nbirth, "e");
        assert_eq!(topic.render().unwrap(), "spBv1.0/g/NBIRTH/e");
    }

    #[test]
    fn nbirth_with_device_id_is_rejected() {
        let topic = SpTopic::device("g", MessageType::Nbirth, "e", "d");
        assert!(matches!(topic.render(), Err(SparkplugError::Topic(_))));
        let topic = SpTopic::node("g", MessageType::Ddata, "e");
        assert!(matches!(topic.render(), Err(SparkplugError::Topic(_))));
    }

    #[test]
    fn topic_parse_inverts_render() {
        let topic = SpTopic::device("grp", MessageType::Dcmd, "edge", "dev");
        let rendered = topic.render().unwrap();
        assert_eq!(SpTopic::parse(&rendered).unwrap(), topic);
    }

    #[test]
    fn varint_of_300_is_ac_02() {
        let mut out = Vec::new();
        encode_varint(300, &mut out);
        assert_eq!(out, vec![0xAC, 0x02]);
        let mut at = 0;
        assert_eq!(decode_varint(&out, &mut at).unwrap(), 300);
    }

    #[test]
    fn empty_payload_round_trips() {
        let payload = SpPayload { timestamp_ms: 0, metrics: Vec::new(), seq: 0 };
        let bytes = encode_payload(&payload);
        assert_eq!(decode_payload(&bytes).unwrap(), payload);
    }

    #[test]
    fn float_metric_uses_ieee754_little_endian_fixed32() {
        let metric = Metric::new("temperature", 1000, MetricValue::Float(25.0));
        let payload = SpPayload { timestamp_ms: 1000, metrics: vec![metric.clone()], seq: 3 };
        let bytes = encode_payload(&payload);

        // 25.0f32 bits are 0x41C80000; fixed32 is little-endian on the wire
        assert_eq!((25.0f32).to_bits(), 0x41C8_0000);
        let fixed32: Vec<u8> = vec![0x00, 0x00, 0xC8, 0x41];
        assert!(
            bytes.windows(4).any(|w| w == fixed32.as_slice()),
            "encoded payload must contain the little-endian float bits"
        );

        let decoded = decode_payload(&bytes).unwrap();
        assert_eq!(decoded.metrics[0], metric);
        assert_eq!(decoded.metrics[0].value, MetricValue::Float(25.0));
    }

    #[test]
    fn sequence_lifecycle_follows_the_birth_rule() {
        let mut session = SparkplugSession::new("g", "e");
        assert!(session.next_seq().is_err(), "seq requires an NBIRTH first");

        let (_, birth) = session.nbirth(Vec::new(), 0);
        assert_eq!(birth.seq, 0);
        assert!(birth.metrics.iter().any(|m| m.name == "bdSeq"));

        let (_, first) = session
            .sequenced(MessageType::Ddata, Some("device-1"), Vec::new(), 1)
            .unwrap();
        assert_eq!(first.seq, 1, "first DDATA after NBIRTH carries seq 1");
        let (_, second) = session
            .sequenced(MessageType::Ddata, Some("device-1"), Vec::new(), 2)
            .unwrap();
        assert_eq!(second.seq, 2, "consecutive publishes take consecutive seq");
    }

    #[test]
    fn sequence_wraps_modulo_256() {
        let mut session = SparkplugSession::new("g", "e");
        session.nbirth(Vec::new(), 0);
        for _ in 0..254 {
            session.next_seq().unwrap();
        }
        assert_eq!(session.next_seq().unwrap(), 255);
        assert_eq!(session.next_seq().unwrap(), 0, "255 wraps to 0");
    }

    #[test]
    fn rebirth_increments_bd_seq_and_resets_seq() {
        let mut session = SparkplugSession::new("g", "e");
        let (_, first) = session.nbirth(Vec::new(), 0);
        assert_eq!(session.bd_seq(), 0);
        session.next_seq().unwrap();
        let (_, second) = session.nbirth(Vec::new(), 1);
        assert_eq!(session.bd_seq(), 1);
        assert_eq!(first.seq, 0);
        assert_eq!(second.seq, 0);
    }

    #[test]
    fn malformed_varint_is_a_payload_error() {
        // truncated continuation byte
        assert!(decode_payload(&[0x08, 0xFF]).is_err());
    }

    #[test]
    fn unknown_fields_are_skipped() {
        let mut bytes = encode_payload(&SpPayload { timestamp_ms: 5, metrics: Vec::new(), seq: 1 });
        // append field 4 (uuid, wire type 2) which our subset does not model
        bytes.push((4 << 3) | 2);
        bytes.push(3);
        bytes.extend_from_slice(b"abc");
        let decoded = decode_payload(&bytes).unwrap();
        assert_eq!(decoded.timestamp_ms, 5);
        assert_eq!(decoded.seq, 1);
    }
}
