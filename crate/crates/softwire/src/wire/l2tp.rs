//! L2TPv2 packet header and control-message codec (RFC 2661 section 3.1).
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |T|L|x|x|S|x|O|P|x|x|x|x|  Ver  |          Length (opt)         |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |           Tunnel ID           |           Session ID          |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |             Ns (opt)          |             Nr (opt)          |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |      Offset Size (opt)        |    Offset pad ... (opt)       |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! ```
//!
//! Control messages always carry Length and Ns/Nr and never Offset or
//! Priority. Data messages here carry the Length field (8-byte header) so
//! the receiver can delimit the PPP frame without trusting the transport;
//! the MTU ledger in the PPP layer accounts for exactly that shape.

use std::fmt;

use super::avp::{Avp, AVP_HEADER_LEN};
use super::WireError;

const FLAG_TYPE: u16 = 0x8000;
const FLAG_LENGTH: u16 = 0x4000;
const FLAG_SEQUENCE: u16 = 0x0800;
const FLAG_OFFSET: u16 = 0x0200;
const FLAG_PRIORITY: u16 = 0x0100;
const VERSION_MASK: u16 = 0x000F;

/// Size of a data header carrying the Length field.
pub const DATA_HEADER_LEN: usize = 8;
/// Size of a control header (flags, length, ids, Ns, Nr).
pub const CONTROL_HEADER_LEN: usize = 12;

/// Ns/Nr pair present when the S bit is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SequencePair {
    pub ns: u16,
    pub nr: u16,
}

/// Decoded L2TPv2 packet header. Optional fields double as the presence
/// flags: `length.is_some()` is the L bit and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L2tpHeader {
    pub is_control: bool,
    pub priority: bool,
    /// Always 2 on anything we emit; kept as a field so a bad value can be
    /// constructed and rejected in tests.
    pub version: u8,
    pub length: Option<u16>,
    pub tunnel_id: u16,
    pub session_id: u16,
    pub seq: Option<SequencePair>,
    /// Offset Size field; never used by this profile but decoded for
    /// completeness.
    pub offset: Option<u16>,
}

impl L2tpHeader {
    /// Control header for the given tunnel with sequence state. The length
    /// field is filled in by [`ControlMessage::encode`].
    pub fn control(tunnel_id: u16, ns: u16, nr: u16) -> L2tpHeader {
        L2tpHeader {
            is_control: true,
            priority: false,
            version: 2,
            length: Some(0),
            tunnel_id,
            session_id: 0,
            seq: Some(SequencePair { ns, nr }),
            offset: None,
        }
    }

    /// Data header with the Length field set for `payload_len` bytes of
    /// PPP frame.
    pub fn data(tunnel_id: u16, session_id: u16, payload_len: usize) -> L2tpHeader {
        L2tpHeader {
            is_control: false,
            priority: false,
            version: 2,
            length: Some((DATA_HEADER_LEN + payload_len) as u16),
            tunnel_id,
            session_id,
            seq: None,
            offset: None,
        }
    }

    pub fn encoded_len(&self) -> usize {
        let mut len = 6;
        if self.length.is_some() {
            len += 2;
        }
        if self.seq.is_some() {
            len += 4;
        }
        if self.offset.is_some() {
            len += 2;
        }
        len
    }

    fn check_invariants(&self) -> Result<(), WireError> {
        if self.version != 2 {
            return Err(WireError::InvalidHeader("version must be 2"));
        }
        if self.is_control {
            if self.length.is_none() || self.seq.is_none() {
                return Err(WireError::InvalidHeader(
                    "control header requires L and S bits",
                ));
            }
            if self.offset.is_some() || self.priority {
                return Err(WireError::InvalidHeader(
                    "control header forbids O and P bits",
                ));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        self.check_invariants()?;
        let mut flags = self.version as u16 & VERSION_MASK;
        if self.is_control {
            flags |= FLAG_TYPE;
        }
        if self.length.is_some() {
            flags |= FLAG_LENGTH;
        }
        if self.seq.is_some() {
            flags |= FLAG_SEQUENCE;
        }
        if self.offset.is_some() {
            flags |= FLAG_OFFSET;
        }
        if self.priority {
            flags |= FLAG_PRIORITY;
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&flags.to_be_bytes());
        if let Some(length) = self.length {
            out.extend_from_slice(&length.to_be_bytes());
        }
        out.extend_from_slice(&self.tunnel_id.to_be_bytes());
        out.extend_from_slice(&self.session_id.to_be_bytes());
        if let Some(seq) = self.seq {
            out.extend_from_slice(&seq.ns.to_be_bytes());
            out.extend_from_slice(&seq.nr.to_be_bytes());
        }
        if let Some(offset) = self.offset {
            out.extend_from_slice(&offset.to_be_bytes());
        }
        Ok(out)
    }

    /// Decode the header from the front of `buf`, returning it and the
    /// remaining bytes (AVPs or PPP payload).
    pub fn decode(buf: &[u8]) -> Result<(L2tpHeader, &[u8]), WireError> {
        if buf.len() < 6 {
            return Err(WireError::Truncated("L2TP header"));
        }
        let flags = u16::from_be_bytes([buf[0], buf[1]]);
        let version = (flags & VERSION_MASK) as u8;
        if version != 2 {
            return Err(WireError::BadVersion(version));
        }
        let mut pos = 2;
        let mut read_u16 = |buf: &[u8]| -> Result<u16, WireError> {
            if buf.len() < pos + 2 {
                return Err(WireError::Truncated("L2TP header field"));
            }
            let v = u16::from_be_bytes([buf[pos], buf[pos + 1]]);
            pos += 2;
            Ok(v)
        };
        let length = if flags & FLAG_LENGTH != 0 {
            Some(read_u16(buf)?)
        } else {
            None
        };
        let tunnel_id = read_u16(buf)?;
        let session_id = read_u16(buf)?;
        let seq = if flags & FLAG_SEQUENCE != 0 {
            let ns = read_u16(buf)?;
            let nr = read_u16(buf)?;
            Some(SequencePair { ns, nr })
        } else {
            None
        };
        let offset = if flags & FLAG_OFFSET != 0 {
            Some(read_u16(buf)?)
        } else {
            None
        };
        let header = L2tpHeader {
            is_control: flags & FLAG_TYPE != 0,
            priority: flags & FLAG_PRIORITY != 0,
            version,
            length,
            tunnel_id,
            session_id,
            seq,
            offset,
        };
        header.check_invariants()?;
        if let Some(declared) = header.length {
            if (declared as usize) < pos {
                return Err(WireError::InvalidMessage("length below header size"));
            }
            if buf.len() < declared as usize {
                return Err(WireError::Truncated("body shorter than length field"));
            }
        }
        Ok((header, &buf[pos..]))
    }
}

/// L2TPv2 control message types. Only the incoming-call flow plus channel
/// management is used on a softwire; outgoing-call types decode as
/// [`MessageType::Other`] so the state machine can refuse them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageType {
    Sccrq,
    Sccrp,
    Scccn,
    StopCcn,
    Hello,
    Icrq,
    Icrp,
    Iccn,
    Cdn,
    /// Zero-length body: a bare acknowledging header.
    Zlb,
    /// Any other RFC 2661 type (OCRQ/OCRP/OCCN, WEN, SLI, ...).
    Other(u16),
}

impl MessageType {
    pub fn from_u16(value: u16) -> MessageType {
        match value {
            1 => MessageType::Sccrq,
            2 => MessageType::Sccrp,
            3 => MessageType::Scccn,
            4 => MessageType::StopCcn,
            6 => MessageType::Hello,
            10 => MessageType::Icrq,
            11 => MessageType::Icrp,
            12 => MessageType::Iccn,
            14 => MessageType::Cdn,
            other => MessageType::Other(other),
        }
    }

    pub fn as_u16(self) -> u16 {
        match self {
            MessageType::Sccrq => 1,
            MessageType::Sccrp => 2,
            MessageType::Scccn => 3,
            MessageType::StopCcn => 4,
            MessageType::Hello => 6,
            MessageType::Icrq => 10,
            MessageType::Icrp => 11,
            MessageType::Iccn => 12,
            MessageType::Cdn => 14,
            MessageType::Zlb => 0,
            MessageType::Other(v) => v,
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageType::Sccrq => write!(f, "SCCRQ"),
            MessageType::Sccrp => write!(f, "SCCRP"),
            MessageType::Scccn => write!(f, "SCCCN"),
            MessageType::StopCcn => write!(f, "StopCCN"),
            MessageType::Hello => write!(f, "HELLO"),
            MessageType::Icrq => write!(f, "ICRQ"),
            MessageType::Icrp => write!(f, "ICRP"),
            MessageType::Iccn => write!(f, "ICCN"),
            MessageType::Cdn => write!(f, "CDN"),
            MessageType::Zlb => write!(f, "ZLB"),
            MessageType::Other(v) => write!(f, "Other({v})"),
        }
    }
}

/// A decoded control message: header plus the ordered AVP list. The first
/// AVP is always Message Type; a ZLB has none at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMessage {
    pub header: L2tpHeader,
    pub message_type: MessageType,
    pub avps: Vec<Avp>,
}

impl ControlMessage {
    /// Build a control message; `body` is every AVP after the leading
    /// Message Type AVP, which is prepended here.
    pub fn new(
        tunnel_id: u16,
        ns: u16,
        nr: u16,
        mt: MessageType,
        body: Vec<Avp>,
    ) -> ControlMessage {
        let mut avps = Vec::with_capacity(body.len() + 1);
        avps.push(Avp::message_type(mt));
        avps.extend(body);
        ControlMessage {
            header: L2tpHeader::control(tunnel_id, ns, nr),
            message_type: mt,
            avps,
        }
    }

    pub fn zlb(tunnel_id: u16, ns: u16, nr: u16) -> ControlMessage {
        ControlMessage {
            header: L2tpHeader::control(tunnel_id, ns, nr),
            message_type: MessageType::Zlb,
            avps: Vec::new(),
        }
    }

    pub fn is_zlb(&self) -> bool {
        self.avps.is_empty()
    }

    /// First AVP of the given registry type, if present.
    pub fn find_avp(&self, avp_type: super::AvpType) -> Option<&Avp> {
        self.avps
            .iter()
            .find(|a| a.vendor_id == 0 && a.attribute_type == avp_type.as_u16())
    }

    /// Comma-separated AVP names for trace output.
    pub fn avp_summary(&self) -> String {
        self.avps
            .iter()
            .map(|a| a.display_name())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut body = Vec::new();
        for avp in &self.avps {
            avp.encode_into(&mut body)?;
        }
        let mut header = self.header.clone();
        let total = header.encoded_len() + body.len();
        if total > u16::MAX as usize {
            return Err(WireError::InvalidMessage("message exceeds 65535 bytes"));
        }
        header.length = Some(total as u16);
        let mut out = header.encode()?;
        out.extend_from_slice(&body);
        Ok(out)
    }

    /// Decode a whole control packet. Unknown non-mandatory AVPs are kept
    /// in order (callers ignore them but can show them in traces); an
    /// unknown mandatory AVP is an error that obliges teardown.
    pub fn decode(buf: &[u8]) -> Result<ControlMessage, WireError> {
        let (header, rest) = L2tpHeader::decode(buf)?;
        if !header.is_control {
            return Err(WireError::InvalidMessage("not a control packet"));
        }
        let declared = header.length.expect("control header has length") as usize;
        if declared != buf.len() {
            return Err(WireError::InvalidMessage(
                "length field disagrees with datagram size",
            ));
        }
        let mut body = &rest[..declared - header.encoded_len()];
        let mut avps = Vec::new();
        while !body.is_empty() {
            let (avp, next) = Avp::decode(body)?;
            if avp.avp_type().is_none() && avp.mandatory {
                return Err(WireError::MandatoryUnknownAvp {
                    vendor_id: avp.vendor_id,
                    attribute_type: avp.attribute_type,
                });
            }
            avps.push(avp);
            body = next;
        }
        let message_type = match avps.first() {
            None => MessageType::Zlb,
            Some(first) => {
                if first.vendor_id != 0
                    || first.attribute_type != super::AvpType::MessageType.as_u16()
                {
                    return Err(WireError::InvalidMessage("first AVP is not Message Type"));
                }
                if !first.mandatory {
                    return Err(WireError::InvalidMessage(
                        "Message Type AVP must be mandatory",
                    ));
                }
                MessageType::from_u16(first.value_as_u16()?)
            }
        };
        Ok(ControlMessage {
            header,
            message_type,
            avps,
        })
    }

    /// AVPs the receiver will ignore: unknown types and types that have no
    /// business on this message. Surfaced for trace output.
    pub fn ignorable_avps(&self) -> Vec<&Avp> {
        self.avps
            .iter()
            .filter(|a| match a.avp_type() {
                None => true,
                Some(t) => {
                    super::classify_avp(self.message_type, t) == super::Relevance::NotRelevant
                }
            })
            .collect()
    }
}

/// A data packet: header plus an opaque PPP frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataMessage {
    pub header: L2tpHeader,
    pub payload: Vec<u8>,
}

impl DataMessage {
    pub fn new(tunnel_id: u16, session_id: u16, payload: Vec<u8>) -> DataMessage {
        DataMessage {
            header: L2tpHeader::data(tunnel_id, session_id, payload.len()),
            payload,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = self.header.encode()?;
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<DataMessage, WireError> {
        let (header, rest) = L2tpHeader::decode(buf)?;
        if header.is_control {
            return Err(WireError::InvalidMessage("not a data packet"));
        }
        let payload = match header.length {
            Some(declared) => rest[..declared as usize - header.encoded_len()].to_vec(),
            None => rest.to_vec(),
        };
        Ok(DataMessage { header, payload })
    }
}

/// Minimum size a control packet can have and still hold a Message Type
/// AVP. Used by receive paths to cheaply discard noise.
pub const MIN_CONTROL_LEN: usize = CONTROL_HEADER_LEN + AVP_HEADER_LEN;
