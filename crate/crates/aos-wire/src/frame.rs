//! Frame header layout and blocking frame i/o.

use std::io::{Read, Write};

use crate::error::WireError;

pub const MAGIC: [u8; 4] = *b"AOS1";
/// Payload cap. Larger transfers must be chunked by the caller; this
/// keeps memory accounting on constrained-client simulations honest.
pub const MAX_PAYLOAD: usize = 256 * 1024 * 1024;
/// Magic + length + msg_type + request_id.
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub payload_len: u32,
    pub msg_type: u8,
    pub request_id: u64,
}

impl FrameHeader {
    pub fn decode(bytes: &[u8; HEADER_LEN]) -> Result<FrameHeader, WireError> {
        if bytes[0..4] != MAGIC {
            return Err(WireError::ProtocolMismatch);
        }
        let payload_len = u32::from_be_bytes(bytes[4..8].try_into().unwrap());
        if payload_len as usize > MAX_PAYLOAD {
            return Err(WireError::FrameTooLarge(payload_len as u64));
        }
        Ok(FrameHeader {
            payload_len,
            msg_type: bytes[8],
            request_id: u64::from_be_bytes(bytes[9..17].try_into().unwrap()),
        })
    }
}

/// Assemble a full frame. The HEALTH request (empty payload) is exactly
/// [`HEADER_LEN`] bytes.
pub fn encode_frame(msg_type: u8, request_id: u64, payload: &[u8]) -> Result<Vec<u8>, WireError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(WireError::FrameTooLarge(payload.len() as u64));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.push(msg_type);
    out.extend_from_slice(&request_id.to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Blocking read of one frame. `Ok(None)` means the peer closed the
/// stream cleanly between frames.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<(FrameHeader, Vec<u8>)>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) => {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(WireError::ConnectionClosed);
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(WireError::Io(e)),
        }
    }
    let header = FrameHeader::decode(&header)?;
    let mut payload = vec![0u8; header.payload_len as usize];
    reader.read_exact(&mut payload).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            WireError::ConnectionClosed
        } else {
            WireError::Io(e)
        }
    })?;
    Ok(Some((header, payload)))
}

pub fn write_frame<W: Write>(
    writer: &mut W,
    msg_type: u8,
    request_id: u64,
    payload: &[u8],
) -> Result<usize, WireError> {
    let frame = encode_frame(msg_type, request_id, payload)?;
    writer.write_all(&frame)?;
    writer.flush()?;
    Ok(frame.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn health_frame_is_17_bytes() {
        // Oracle: 4 magic + 4 length + 1 type + 8 request_id + 0 payload.
        let frame = encode_frame(crate::message::msg_type::HEALTH, 1, &[]).unwrap();
        assert_eq!(frame.len(), 4 + 4 + 1 + 8);
        assert_eq!(frame.len(), HEADER_LEN);
    }

    #[test]
    fn bad_magic_is_protocol_mismatch() {
        let mut frame = encode_frame(8, 1, &[]).unwrap();
        frame[0..4].copy_from_slice(b"XXXX");
        let err = FrameHeader::decode(frame[..HEADER_LEN].try_into().unwrap()).unwrap_err();
        assert!(matches!(err, WireError::ProtocolMismatch));
    }

    #[test]
    fn oversized_length_rejected() {
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(&MAGIC);
        header[4..8].copy_from_slice(&((MAX_PAYLOAD as u32) + 1).to_be_bytes());
        let err = FrameHeader::decode(&header).unwrap_err();
        assert!(matches!(err, WireError::FrameTooLarge(_)));
    }

    #[test]
    fn header_round_trip() {
        let frame = encode_frame(0x82, 0xdead_beef_0042, b"xyz").unwrap();
        let header = FrameHeader::decode(frame[..HEADER_LEN].try_into().unwrap()).unwrap();
        assert_eq!(header.msg_type, 0x82);
        assert_eq!(header.request_id, 0xdead_beef_0042);
        assert_eq!(header.payload_len, 3);
    }
}
