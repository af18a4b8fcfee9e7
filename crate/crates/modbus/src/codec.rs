//! Modbus TCP framing: MBAP header plus the nine supported PDUs, with
//! exception responses. All multi-byte fields are big-endian.

use std::io::Read;

pub const PROTOCOL_ID: u16 = 0;
/// Single-device mock; both ends pin unit id 1.
pub const UNIT_ID: u8 = 1;

pub const MAX_READ_REGISTERS: u16 = 125;
pub const MAX_READ_BITS: u16 = 2000;
pub const MAX_WRITE_REGISTERS: u16 = 123;
pub const MAX_WRITE_BITS: u16 = 1968;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("quantity {quantity} outside 1..={max} for function {function:#04x}")]
    InvalidQuantity { function: u8, quantity: u16, max: u16 },
    #[error("frame truncated")]
    Truncated,
    #[error("protocol id {0} is not Modbus TCP")]
    BadProtocolId(u16),
    #[error("unknown function code {0:#04x}")]
    UnknownFunction(u8),
    #[error("malformed pdu: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbapHeader {
    pub transaction_id: u16,
    pub unit_id: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestPdu {
    ReadCoils { address: u16, quantity: u16 },
    ReadDiscreteInputs { address: u16, quantity: u16 },
    ReadHoldingRegisters { address: u16, quantity: u16 },
    ReadInputRegisters { address: u16, quantity: u16 },
    WriteSingleCoil { address: u16, value: bool },
    WriteSingleRegister { address: u16, value: u16 },
    WriteMultipleCoils { address: u16, values: Vec<bool> },
    WriteMultipleRegisters { address: u16, values: Vec<u16> },
    MaskWriteRegister { address: u16, and_mask: u16, or_mask: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponsePdu {
    ReadCoils { values: Vec<bool> },
    ReadDiscreteInputs { values: Vec<bool> },
    ReadHoldingRegisters { values: Vec<u16> },
    ReadInputRegisters { values: Vec<u16> },
    WriteSingleCoil { address: u16, value: bool },
    WriteSingleRegister { address: u16, value: u16 },
    WriteMultipleCoils { address: u16, quantity: u16 },
    WriteMultipleRegisters { address: u16, quantity: u16 },
    MaskWriteRegister { address: u16, and_mask: u16, or_mask: u16 },
    Exception { function: u8, code: ExceptionCode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExceptionCode {
    IllegalFunction,
    IllegalDataAddress,
    IllegalDataValue,
    ServerDeviceFailure,
    Other(u8),
}

impl ExceptionCode {
    pub fn as_u8(self) -> u8 {
        match self {
            ExceptionCode::IllegalFunction => 0x01,
            ExceptionCode::IllegalDataAddress => 0x02,
            ExceptionCode::IllegalDataValue => 0x03,
            ExceptionCode::ServerDeviceFailure => 0x04,
            ExceptionCode::Other(code) => code,
        }
    }

    pub fn from_u8(code: u8) -> ExceptionCode {
        match code {
            0x01 => ExceptionCode::IllegalFunction,
            0x02 => ExceptionCode::IllegalDataAddress,
            0x03 => ExceptionCode::IllegalDataValue,
            0x04 => ExceptionCode::ServerDeviceFailure,
            other => ExceptionCode::Other(other),
        }
    }

    pub fn name(self) -> String {
        match self {
            ExceptionCode::IllegalFunction => "illegal_function".to_string(),
            ExceptionCode::IllegalDataAddress => "illegal_data_address".to_string(),
            ExceptionCode::IllegalDataValue => "illegal_data_value".to_string(),
            ExceptionCode::ServerDeviceFailure => "server_device_failure".to_string(),
            ExceptionCode::Other(code) => format!("exception_{code:#04x}"),
        }
    }
}

impl RequestPdu {
    pub fn function(&self) -> u8 {
        match self {
            RequestPdu::ReadCoils { .. } => 0x01,
            RequestPdu::ReadDiscreteInputs { .. } => 0x02,
            RequestPdu::ReadHoldingRegisters { .. } => 0x03,
            RequestPdu::ReadInputRegisters { .. } => 0x04,
            RequestPdu::WriteSingleCoil { .. } => 0x05,
            RequestPdu::WriteSingleRegister { .. } => 0x06,
            RequestPdu::WriteMultipleCoils { .. } => 0x0F,
            RequestPdu::WriteMultipleRegisters { .. } => 0x10,
            RequestPdu::MaskWriteRegister { .. } => 0x16,
        }
    }

    pub fn is_write(&self) -> bool {
        is_write_function(self.function())
    }

    fn validate(&self) -> Result<(), CodecError> {
        let check = |function: u8, quantity: u16, max: u16| {
            if quantity == 0 || quantity > max {
                Err(CodecError::InvalidQuantity { function, quantity, max })
            } else {
                Ok(())
            }
        };
        match self {
            RequestPdu::ReadCoils { quantity, .. } | RequestPdu::ReadDiscreteInputs { quantity, .. } => {
                check(self.function(), *quantity, MAX_READ_BITS)
            }
            RequestPdu::ReadHoldingRegisters { quantity, .. }
            | RequestPdu::ReadInputRegisters { quantity, .. } => {
                check(self.function(), *quantity, MAX_READ_REGISTERS)
            }
            RequestPdu::WriteMultipleCoils { values, .. } => {
                check(self.function(), values.len() as u16, MAX_WRITE_BITS)
            }
            RequestPdu::WriteMultipleRegisters { values, .. } => {
                check(self.function(), values.len() as u16, MAX_WRITE_REGISTERS)
            }
            _ => Ok(()),
        }
    }
}

impl ResponsePdu {
    pub fn function(&self) -> u8 {
        match self {
            ResponsePdu::ReadCoils { .. } => 0x01,
            ResponsePdu::ReadDiscreteInputs { .. } => 0x02,
            ResponsePdu::ReadHoldingRegisters { .. } => 0x03,
            ResponsePdu::ReadInputRegisters { .. } => 0x04,
            ResponsePdu::WriteSingleCoil { .. } => 0x05,
            ResponsePdu::WriteSingleRegister { .. } => 0x06,
            ResponsePdu::WriteMultipleCoils { .. } => 0x0F,
            ResponsePdu::WriteMultipleRegisters { .. } => 0x10,
            ResponsePdu::MaskWriteRegister { .. } => 0x16,
            ResponsePdu::Exception { function, .. } => function | 0x80,
        }
    }
}

pub fn is_write_function(function: u8) -> bool {
    matches!(function, 0x05 | 0x06 | 0x0F | 0x10 | 0x16)
}

fn push_u16(buf: &mut Vec<u8>, value: u16) {
    buf.extend_from_slice(&value.to_be_bytes());
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16, CodecError> {
    let hi = *bytes.get(at).ok_or(CodecError::Truncated)?;
    let lo = *bytes.get(at + 1).ok_or(CodecError::Truncated)?;
    Ok(u16::from_be_bytes([hi, lo]))
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, bit) in bits.iter().enumerate() {
        if *bit {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    bytes
}

fn unpack_bits(bytes: &[u8], count: usize) -> Vec<bool> {
    (0..count).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect()
}

pub fn encode_request_pdu(pdu: &RequestPdu) -> Result<Vec<u8>, CodecError> {
    pdu.validate()?;
    let mut buf = vec![pdu.function()];
    match pdu {
        RequestPdu::ReadCoils { address, quantity }
        | RequestPdu::ReadDiscreteInputs { address, quantity }
        | RequestPdu::ReadHoldingRegisters { address, quantity }
        | RequestPdu::ReadInputRegisters { address, quantity } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, *quantity);
        }
        RequestPdu::WriteSingleCoil { address, value } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, if *value { 0xFF00 } else { 0x0000 });
        }
        RequestPdu::WriteSingleRegister { address, value } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, *value);
        }
        RequestPdu::WriteMultipleCoils { address, values } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, values.len() as u16);
            let packed = pack_bits(values);
            buf.push(packed.len() as u8);
            buf.extend_from_slice(&packed);
        }
        RequestPdu::WriteMultipleRegisters { address, values } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, values.len() as u16);
            buf.push((values.len() * 2) as u8);
            for value in values {
                push_u16(&mut buf, *value);
            }
        }
        RequestPdu::MaskWriteRegister { address, and_mask, or_mask } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, *and_mask);
            push_u16(&mut buf, *or_mask);
        }
    }
    Ok(buf)
}

pub fn decode_request_pdu(bytes: &[u8]) -> Result<RequestPdu, CodecError> {
    let function = *bytes.first().ok_or(CodecError::Truncated)?;
    let pdu = match function {
        0x01 | 0x02 | 0x03 | 0x04 => {
            let address = read_u16(bytes, 1)?;
            let quantity = read_u16(bytes, 3)?;
            match function {
                0x01 => RequestPdu::ReadCoils { address, quantity },
                0x02 => RequestPdu::ReadDiscreteInputs { address, quantity },
                0x03 => RequestPdu::ReadHoldingRegisters { address, quantity },
                _ => RequestPdu::ReadInputRegisters { address, quantity },
            }
        }
        0x05 => {
            let address = read_u16(bytes, 1)?;
            let raw = read_u16(bytes, 3)?;
            let value = match raw {
                0xFF00 => true,
                0x0000 => false,
                other => return Err(CodecError::Malformed(format!("coil value {other:#06x}"))),
            };
            RequestPdu::WriteSingleCoil { address, value }
        }
        0x06 => RequestPdu::WriteSingleRegister { address: read_u16(bytes, 1)?, value: read_u16(bytes, 3)? },
        0x0F => {
            let address = read_u16(bytes, 1)?;
            let quantity = read_u16(bytes, 3)? as usize;
            let byte_count = *bytes.get(5).ok_or(CodecError::Truncated)? as usize;
            let data = bytes.get(6..6 + byte_count).ok_or(CodecError::Truncated)?;
            if byte_count != quantity.div_ceil(8) {
                return Err(CodecError::Malformed("coil byte count mismatch".to_string()));
            }
            RequestPdu::WriteMultipleCoils { address, values: unpack_bits(data, quantity) }
        }
        0x10 => {
            let address = read_u16(bytes, 1)?;
            let quantity = read_u16(bytes, 3)? as usize;
            let byte_count = *bytes.get(5).ok_or(CodecError::Truncated)? as usize;
            if byte_count != quantity * 2 {
                return Err(CodecError::Malformed("register byte count mismatch".to_string()));
            }
            let mut values = Vec::with_capacity(quantity);
            for i in 0..quantity {
                values.push(read_u16(bytes, 6 + 2 * i)?);
            }
            RequestPdu::WriteMultipleRegisters { address, values }
        }
        0x16 => RequestPdu::MaskWriteRegister {
            address: read_u16(bytes, 1)?,
            and_mask: read_u16(bytes, 3)?,
            or_mask: read_u16(bytes, 5)?,
        },
        other => return Err(CodecError::UnknownFunction(other)),
    };
    Ok(pdu)
}

pub fn encode_response_pdu(pdu: &ResponsePdu) -> Vec<u8> {
    let mut buf = vec![pdu.function()];
    match pdu {
        ResponsePdu::ReadCoils { values } | ResponsePdu::ReadDiscreteInputs { values } => {
            let packed = pack_bits(values);
            buf.push(packed.len() as u8);
            buf.extend_from_slice(&packed);
        }
        ResponsePdu::ReadHoldingRegisters { values } | ResponsePdu::ReadInputRegisters { values } => {
            buf.push((values.len() * 2) as u8);
            for value in values {
                push_u16(&mut buf, *value);
            }
        }
        ResponsePdu::WriteSingleCoil { address, value } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, if *value { 0xFF00 } else { 0x0000 });
        }
        ResponsePdu::WriteSingleRegister { address, value } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, *value);
        }
        ResponsePdu::WriteMultipleCoils { address, quantity }
        | ResponsePdu::WriteMultipleRegisters { address, quantity } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, *quantity);
        }
        ResponsePdu::MaskWriteRegister { address, and_mask, or_mask } => {
            push_u16(&mut buf, *address);
            push_u16(&mut buf, *and_mask);
            push_u16(&mut buf, *or_mask);
        }
        ResponsePdu::Exception { code, .. } => {
            buf.push(code.as_u8());
        }
    }
    buf
}

/// Decodes a response against the request that elicited it; coil counts are
/// only known from the request.
pub fn decode_response_pdu(request: &RequestPdu, bytes: &[u8]) -> Result<ResponsePdu, CodecError> {
    let function = *bytes.first().ok_or(CodecError::Truncated)?;
    if function & 0x80 != 0 {
        let code = *bytes.get(1).ok_or(CodecError::Truncated)?;
        return Ok(ResponsePdu::Exception {
            function: function & 0x7F,
            code: ExceptionCode::from_u8(code),
        });
    }
    if function != request.function() {
        return Err(CodecError::Malformed(format!(
            "response function {function:#04x} does not match request {:#04x}",
            request.function()
        )));
    }
    let pdu = match request {
        RequestPdu::ReadCoils { quantity, .. } | RequestPdu::ReadDiscreteInputs { quantity, .. } => {
            let byte_count = *bytes.get(1).ok_or(CodecError::Truncated)? as usize;
            let data = bytes.get(2..2 + byte_count).ok_or(CodecError::Truncated)?;
            if byte_count != (*quantity as usize).div_ceil(8) {
                return Err(CodecError::Malformed("coil byte count mismatch".to_string()));
            }
            let values = unpack_bits(data, *quantity as usize);
            if function == 0x01 {
                ResponsePdu::ReadCoils { values }
            } else {
                ResponsePdu::ReadDiscreteInputs { values }
            }
        }
        RequestPdu::ReadHoldingRegisters { quantity, .. } | RequestPdu::ReadInputRegisters { quantity, .. } => {
            let byte_count = *bytes.get(1).ok_or(CodecError::Truncated)? as usize;
            if byte_count != *quantity as usize * 2 {
                return Err(CodecError::Malformed("register byte count mismatch".to_string()));
            }
            let mut values = Vec::with_capacity(*quantity as usize);
            for i in 0..*quantity as usize {
                values.push(read_u16(bytes, 2 + 2 * i)?);
            }
            if function == 0x03 {
                ResponsePdu::ReadHoldingRegisters { values }
            } else {
                ResponsePdu::ReadInputRegisters { values }
            }
        }
        RequestPdu::WriteSingleCoil { .. } => {
            let address = read_u16(bytes, 1)?;
            let value = read_u16(bytes, 3)? == 0xFF00;
            ResponsePdu::WriteSingleCoil { address, value }
        }
        RequestPdu::WriteSingleRegister { .. } => {
            ResponsePdu::WriteSingleRegister { address: read_u16(bytes, 1)?, value: read_u16(bytes, 3)? }
        }
        RequestPdu::WriteMultipleCoils { .. } => {
            ResponsePdu::WriteMultipleCoils { address: read_u16(bytes, 1)?, quantity: read_u16(bytes, 3)? }
        }
        RequestPdu::WriteMultipleRegisters { .. } => {
            ResponsePdu::WriteMultipleRegisters { address: read_u16(bytes, 1)?, quantity: read_u16(bytes, 3)? }
        }
        RequestPdu::MaskWriteRegister { .. } => ResponsePdu::MaskWriteRegister {
            address: read_u16(bytes, 1)?,
            and_mask: read_u16(bytes, 3)?,
            or_mask: read_u16(bytes, 5)?,
        },
    };
    Ok(pdu)
}

fn encode_adu(header: MbapHeader, pdu_bytes: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(7 + pdu_bytes.len());
    push_u16(&mut buf, header.transaction_id);
    push_u16(&mut buf, PROTOCOL_ID);
    push_u16(&mut buf, (pdu_bytes.len() + 1) as u16);
    buf.push(header.unit_id);
    buf.extend_from_slice(pdu_bytes);
    buf
}

pub fn encode_request_adu(header: MbapHeader, pdu: &RequestPdu) -> Result<Vec<u8>, CodecError> {
    Ok(encode_adu(header, &encode_request_pdu(pdu)?))
}

pub fn encode_response_adu(header: MbapHeader, pdu: &ResponsePdu) -> Vec<u8> {
    encode_adu(header, &encode_response_pdu(pdu))
}

/// Splits a complete ADU buffer into its header and PDU bytes.
pub fn split_adu(bytes: &[u8]) -> Result<(MbapHeader, &[u8]), CodecError> {
    if bytes.len() < 8 {
        return Err(CodecError::Truncated);
    }
    let transaction_id = read_u16(bytes, 0)?;
    let protocol_id = read_u16(bytes, 2)?;
    if protocol_id != PROTOCOL_ID {
        return Err(CodecError::BadProtocolId(protocol_id));
    }
    let length = read_u16(bytes, 4)? as usize;
    let unit_id = bytes[6];
    if bytes.len() != 6 + length {
        return Err(CodecError::Truncated);
    }
    Ok((MbapHeader { transaction_id, unit_id }, &bytes[7..]))
}

/// Reads one complete ADU frame from a stream using the MBAP length prefix.
pub fn read_adu<R: Read>(reader: &mut R) -> std::io::Result<Vec<u8>> {
    let mut header = [0u8; 7];
    reader.read_exact(&mut header)?;
    let length = u16::from_be_bytes([header[4], header[5]]) as usize;
    if length == 0 || length > 254 {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "bad mbap length"));
    }
    let mut frame = header.to_vec();
    frame.resize(7 + length - 1, 0);
    reader.read_exact(&mut frame[7..])?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_holding_request_encodes_to_known_bytes() {
        // hand-assembled: txn 0x0001, proto 0x0000, len 0x0006, unit 0x01,
        // fc 0x03, addr 0x0000, qty 0x0004
        let adu = encode_request_adu(
            MbapHeader { transaction_id: 1, unit_id: 1 },
            &RequestPdu::ReadHoldingRegisters { address: 0, quantity: 4 },
        )
        .unwrap();
        assert_eq!(adu, [0x00, 0x01, 0x00, 0x00, 0x00, 0x06, 0x01, 0x03, 0x00, 0x00, 0x00, 0x04]);
    }

    #[test]
    fn read_coils_request_frame_shape() {
        let adu = encode_request_adu(
            MbapHeader { transaction_id: 0, unit_id: 0 },
            &RequestPdu::ReadCoils { address: 0, quantity: 1 },
        )
        .unwrap();
        assert_eq!(adu.len(), 12);
        assert_eq!(&adu[4..6], &[0x00, 0x06], "length field counts unit id + 5 pdu bytes");
    }

    #[test]
    fn oversized_read_quantity_is_rejected_before_encoding() {
        let err = encode_request_adu(
            MbapHeader { transaction_id: 1, unit_id: 1 },
            &RequestPdu::ReadHoldingRegisters { address: 0, quantity: 126 },
        )
        .unwrap_err();
        assert!(matches!(err, CodecError::InvalidQuantity { quantity: 126, max: 125, .. }));
    }

    #[test]
    fn request_round_trip() {
        let pdu = RequestPdu::WriteMultipleRegisters { address: 7, values: vec![1, 2, 65535] };
        let adu = encode_request_adu(MbapHeader { transaction_id: 42, unit_id: 1 }, &pdu).unwrap();
        let (header, pdu_bytes) = split_adu(&adu).unwrap();
        assert_eq!(header.transaction_id, 42);
        assert_eq!(decode_request_pdu(pdu_bytes).unwrap(), pdu);
    }

    #[test]
    fn exception_response_decodes_to_illegal_data_address() {
        // response pdu 0x83 0x02 answers an fc-03 read of a bad address
        let request = RequestPdu::ReadHoldingRegisters { address: 9999, quantity: 1 };
        let decoded = decode_response_pdu(&request, &[0x83, 0x02]).unwrap();
        assert_eq!(
            decoded,
            ResponsePdu::Exception { function: 0x03, code: ExceptionCode::IllegalDataAddress }
        );
    }

    #[test]
    fn nonzero_protocol_id_is_rejected() {
        let mut adu = encode_request_adu(
            MbapHeader { transaction_id: 1, unit_id: 1 },
            &RequestPdu::ReadCoils { address: 0, quantity: 1 },
        )
        .unwrap();
        adu[3] = 1;
        assert_eq!(split_adu(&adu).unwrap_err(), CodecError::BadProtocolId(1));
    }

    #[test]
    fn unknown_function_is_flagged() {
        assert_eq!(decode_request_pdu(&[0x2B, 0x00]).unwrap_err(), CodecError::UnknownFunction(0x2B));
    }

    #[test]
    fn write_function_classification_matches_the_guarded_set() {
        for fc in [0x05u8, 0x06, 0x0F, 0x10, 0x16] {
            assert!(is_write_function(fc));
        }
        for fc in [0x01u8, 0x02, 0x03, 0x04] {
            assert!(!is_write_function(fc));
        }
    }
}
