//! MQTT 3.1.1 wire codec for the packet subset the broker and client use.
//! QoS is limited to 0 and 1 throughout.

use std::io::Read;

pub const MAX_REMAINING_LENGTH: usize = 268_435_455;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("malformed remaining length")]
    BadRemainingLength,
    #[error("packet truncated")]
    Truncated,
    #[error("unknown packet type {0:#x}")]
    UnknownType(u8),
    #[error("malformed packet: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Connect { client_id: String, keep_alive_s: u16, clean_session: bool },
    Connack { return_code: u8 },
    Publish { topic: String, payload: Vec<u8>, qos: u8, retain: bool, packet_id: Option<u16> },
    Puback { packet_id: u16 },
    Subscribe { packet_id: u16, filters: Vec<(String, u8)> },
    Suback { packet_id: u16, granted: Vec<u8> },
    Unsubscribe { packet_id: u16, filters: Vec<String> },
    Unsuback { packet_id: u16 },
    Pingreq,
    Pingresp,
    Disconnect,
}

/// Encodes a length as the MQTT variable-length quantity (1-4 bytes).
pub fn encode_remaining_length(mut length: usize) -> Result<Vec<u8>, CodecError> {
    if length > MAX_REMAINING_LENGTH {
        return Err(CodecError::BadRemainingLength);
    }
    let mut out = Vec::with_capacity(4);
    loop {
        let mut byte = (length % 128) as u8;
        length /= 128;
        if length > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if length == 0 {
            return Ok(out);
        }
    }
}

/// Decodes a variable-length quantity, returning (value, bytes consumed).
pub fn decode_remaining_length(bytes: &[u8]) -> Result<(usize, usize), CodecError> {
    let mut value = 0usize;
    let mut multiplier = 1usize;
    for (i, byte) in bytes.iter().enumerate().take(4) {
        value += ((byte & 0x7F) as usize) * multiplier;
        if byte & 0x80 == 0 {
            return Ok((value, i + 1));
        }
        multiplier *= 128;
    }
    if bytes.len() < 4 {
        Err(CodecError::Truncated)
    } else {
        Err(CodecError::BadRemainingLength)
    }
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u16).to_be_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn read_u16(bytes: &[u8], at: &mut usize) -> Result<u16, CodecError> {
    let hi = *bytes.get(*at).ok_or(CodecError::Truncated)?;
    let lo = *bytes.get(*at + 1).ok_or(CodecError::Truncated)?;
    *at += 2;
    Ok(u16::from_be_bytes([hi, lo]))
}

fn read_str(bytes: &[u8], at: &mut usize) -> Result<String, CodecError> {
    let len = read_u16(bytes, at)? as usize;
    let slice = bytes.get(*at..*at + len).ok_or(CodecError::Truncated)?;
    *at += len;
    String::from_utf8(slice.to_vec()).map_err(|_| CodecError::Malformed("invalid utf-8 string".to_string()))
}

pub fn encode_packet(packet: &Packet) -> Result<Vec<u8>, CodecError> {
    let (first_byte, body): (u8, Vec<u8>) = match packet {
        Packet::Connect { client_id, keep_alive_s, clean_session } => {
            let mut body = Vec::new();
            push_str(&mut body, "MQTT");
            body.push(4); // protocol level 3.1.1
            body.push(if *clean_session { 0x02 } else { 0x00 });
            body.extend_from_slice(&keep_alive_s.to_be_bytes());
            push_str(&mut body, client_id);
            (0x10, body)
        }
        Packet::Connack { return_code } => (0x20, vec![0x00, *return_code]),
        Packet::Publish { topic, payload, qos, retain, packet_id } => {
            if *qos > 1 {
                return Err(CodecError::Malformed("qos above 1 is not supported".to_string()));
            }
            if (*qos == 1) != packet_id.is_some() {
                return Err(CodecError::Malformed("packet id present iff qos 1".to_string()));
            }
            let mut body = Vec::new();
            push_str(&mut body, topic);
            if let Some(id) = packet_id {
                body.extend_from_slice(&id.to_be_bytes());
            }
            body.extend_from_slice(payload);
            (0x30 | (qos << 1) | u8::from(*retain), body)
        }
        Packet::Puback { packet_id } => (0x40, packet_id.to_be_bytes().to_vec()),
        Packet::Subscribe { packet_id, filters } => {
            let mut body = packet_id.to_be_bytes().to_vec();
            for (filter, qos) in filters {
                push_str(&mut body, filter);
                body.push(*qos);
            }
            (0x82, body)
        }
        Packet::Suback { packet_id, granted } => {
            let mut body = packet_id.to_be_bytes().to_vec();
            body.extend_from_slice(granted);
            (0x90, body)
        }
        Packet::Unsubscribe { packet_id, filters } => {
            let mut body = packet_id.to_be_bytes().to_vec();
            for filter in filters {
                push_str(&mut body, filter);
            }
            (0xA2, body)
        }
        Packet::Unsuback { packet_id } => (0xB0, packet_id.to_be_bytes().to_vec()),
        Packet::Pingreq => (0xC0, Vec::new()),
        Packet::Pingresp => (0xD0, Vec::new()),
        Packet::Disconnect => (0xE0, Vec::new()),
    };
    let mut out = vec![first_byte];
    out.extend_from_slice(&encode_remaining_length(body.len())?);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decodes one packet from a complete buffer, returning it and the bytes
/// consumed.
pub fn decode_packet(bytes: &[u8]) -> Result<(Packet, usize), CodecError> {
    let first = *bytes.first().ok_or(CodecError::Truncated)?;
    let (length, length_bytes) = decode_remaining_length(bytes.get(1..).ok_or(CodecError::Truncated)?)?;
    let body_start = 1 + length_bytes;
    let body = bytes.get(body_start..body_start + length).ok_or(CodecError::Truncated)?;
    let packet = decode_body(first, body)?;
    Ok((packet, body_start + length))
}

fn decode_body(first: u8, body: &[u8]) -> Result<Packet, CodecError> {
    let packet_type = first >> 4;
    let flags = first & 0x0F;
    let mut at = 0usize;
    let packet = match packet_type {
        1 => {
            let protocol = read_str(body, &mut at)?;
            if protocol != "MQTT" {
                return Err(CodecError::Malformed(format!("unexpected protocol name {protocol}")));
            }
            let level = *body.get(at).ok_or(CodecError::Truncated)?;
            at += 1;
            if level != 4 {
                return Err(CodecError::Malformed(format!("unsupported protocol level {level}")));
            }
            let connect_flags = *body.get(at).ok_or(CodecError::Truncated)?;
            at += 1;
            let keep_alive_s = read_u16(body, &mut at)?;
            let client_id = read_str(body, &mut at)?;
            Packet::Connect { client_id, keep_alive_s, clean_session: connect_flags & 0x02 != 0 }
        }
        2 => Packet::Connack { return_code: *body.get(1).ok_or(CodecError::Truncated)? },
        3 => {
            let qos = (flags >> 1) & 0x03;
            if qos > 1 {
                return Err(CodecError::Malformed("qos above 1 is not supported".to_string()));
            }
            let retain = flags & 0x01 != 0;
            let topic = read_str(body, &mut at)?;
            let packet_id = if qos == 1 { Some(read_u16(body, &mut at)?) } else { None };
            Packet::Publish { topic, payload: body[at..].to_vec(), qos, retain, packet_id }
        }
        4 => Packet::Puback { packet_id: read_u16(body, &mut at)? },
        8 => {
            if flags != 0x02 {
                return Err(CodecError::Malformed("subscribe flags must be 0b0010".to_string()));
            }
            let packet_id = read_u16(body, &mut at)?;
            let mut filters = Vec::new();
            while at < body.len() {
                let filter = read_str(body, &mut at)?;
                let qos = *body.get(at).ok_or(CodecError::Truncated)?;
                at += 1;
                filters.push((filter, qos));
            }
            if filters.is_empty() {
                return Err(CodecError::Malformed("subscribe requires at least one filter".to_string()));
            }
            Packet::Subscribe { packet_id, filters }
        }
        9 => {
            let packet_id = read_u16(body, &mut at)?;
            Packet::Suback { packet_id, granted: body[at..].to_vec() }
        }
        10 => {
            if flags != 0x02 {
                return Err(CodecError::Malformed("unsubscribe flags must be 0b0010".to_string()));
            }
            let packet_id = read_u16(body, &mut at)?;
            let mut filters = Vec::new();
            while at < body.len() {
                filters.push(read_str(body, &mut at)?);
            }
            Packet::Unsubscribe { packet_id, filters }
        }
        11 => Packet::Unsuback { packet_id: read_u16(body, &mut at)? },
        12 => Packet::Pingreq,
        13 => Packet::Pingresp,
        14 => Packet::Disconnect,
        other => return Err(CodecError::UnknownType(other)),
    };
    Ok(packet)
}

/// Reads exactly one packet from a blocking stream.
pub fn read_packet<R: Read>(reader: &mut R) -> std::io::Result<Packet> {
    let mut first = [0u8; 1];
    reader.read_exact(&mut first)?;
    let mut length_bytes = Vec::with_capacity(4);
    let length = loop {
        let mut byte = [0u8; 1];
        reader.read_exact(&mut byte)?;
        length_bytes.push(byte[0]);
        match decode_remaining_length(&length_bytes) {
            Ok((value, _)) => break value,
            Err(CodecError::Truncated) if length_bytes.len() < 4 => continue,
            Err(e) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())),
        }
    };
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    decode_body(first[0], &body).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remaining_length_of_321_uses_two_bytes() {
        // 321 = 0b101000001: low 7 bits 65 -> 0xC1 with continuation, then 2
        assert_eq!(encode_remaining_length(321).unwrap(), vec![0xC1, 0x02]);
        assert_eq!(decode_remaining_length(&[0xC1, 0x02]).unwrap(), (321, 2));
    }

    #[test]
    fn remaining_length_boundaries() {
        assert_eq!(encode_remaining_length(0).unwrap(), vec![0x00]);
        assert_eq!(encode_remaining_length(127).unwrap(), vec![0x7F]);
        assert_eq!(encode_remaining_length(128).unwrap(), vec![0x80, 0x01]);
        assert_eq!(
            encode_remaining_length(MAX_REMAINING_LENGTH).unwrap(),
            vec![0xFF, 0xFF, 0xFF, 0x7F]
        );
        assert_eq!(encode_remaining_length(MAX_REMAINING_LENGTH + 1), Err(CodecError::BadRemainingLength));
        assert_eq!(
            decode_remaining_length(&[0xFF, 0xFF, 0xFF, 0xFF]),
            Err(CodecError::BadRemainingLength)
        );
    }

    #[test]
    fn pingreq_is_the_fixed_two_byte_packet() {
        assert_eq!(encode_packet(&Packet::Pingreq).unwrap(), vec![0xC0, 0x00]);
    }

    #[test]
    fn publish_round_trip() {
        let packet = Packet::Publish {
            topic: "a/b".to_string(),
            payload: b"x".to_vec(),
            qos: 0,
            retain: false,
            packet_id: None,
        };
        let bytes = encode_packet(&packet).unwrap();
        let (decoded, used) = decode_packet(&bytes).unwrap();
        assert_eq!(decoded, packet);
        assert_eq!(used, bytes.len());
    }

    #[test]
    fn qos1_publish_carries_its_packet_id() {
        let packet = Packet::Publish {
            topic: "ctl/valve".to_string(),
            payload: b"OPEN".to_vec(),
            qos: 1,
            retain: true,
            packet_id: Some(77),
        };
        let bytes = encode_packet(&packet).unwrap();
        assert_eq!(decode_packet(&bytes).unwrap().0, packet);
    }

    #[test]
    fn qos2_is_rejected_by_the_codec() {
        let packet = Packet::Publish {
            topic: "t".to_string(),
            payload: Vec::new(),
            qos: 2,
            retain: false,
            packet_id: Some(1),
        };
        assert!(encode_packet(&packet).is_err());
    }

    #[test]
    fn truncated_body_is_flagged() {
        let mut bytes = encode_packet(&Packet::Puback { packet_id: 7 }).unwrap();
        bytes.truncate(3);
        assert_eq!(decode_packet(&bytes), Err(CodecError::Truncated));
    }
}
