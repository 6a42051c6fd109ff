//! L2TPv2 attribute-value pairs (RFC 2661 section 4.1).
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |M|H| rsvd  |      Length       |           Vendor ID           |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |         Attribute Type        |        Attribute Value ...
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! ```
//!
//! Length counts the 6-byte header, so a value may be at most 1017 bytes.
//! The H (hidden) bit is never set on emission and is rejected on receipt:
//! none of the AVPs used on a softwire carry data worth hiding, and
//! dropping the unhide path removes the shared-secret coupling from the
//! codec entirely.

use std::fmt;

use super::{MessageType, WireError};

const FLAG_MANDATORY: u16 = 0x8000;
const FLAG_HIDDEN: u16 = 0x4000;
const LENGTH_MASK: u16 = 0x03FF;

/// AVP header size in bytes.
pub const AVP_HEADER_LEN: usize = 6;
/// Largest value that fits the 10-bit length field.
pub const MAX_VALUE_LEN: usize = 1023 - AVP_HEADER_LEN;

/// IETF (vendor 0) attribute types from the RFC 2661 registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u16)]
pub enum AvpType {
    MessageType = 0,
    ResultCode = 1,
    ProtocolVersion = 2,
    FramingCapabilities = 3,
    BearerCapabilities = 4,
    TieBreaker = 5,
    FirmwareRevision = 6,
    HostName = 7,
    VendorName = 8,
    AssignedTunnelId = 9,
    ReceiveWindowSize = 10,
    Challenge = 11,
    Q931CauseCode = 12,
    ChallengeResponse = 13,
    AssignedSessionId = 14,
    CallSerialNumber = 15,
    MinimumBps = 16,
    MaximumBps = 17,
    BearerType = 18,
    FramingType = 19,
    CalledNumber = 21,
    CallingNumber = 22,
    SubAddress = 23,
    ConnectSpeed = 24,
    PhysicalChannelId = 25,
    InitialReceivedLcpConfreq = 26,
    LastSentLcpConfreq = 27,
    LastReceivedLcpConfreq = 28,
    ProxyAuthenType = 29,
    ProxyAuthenName = 30,
    ProxyAuthenChallenge = 31,
    ProxyAuthenId = 32,
    ProxyAuthenResponse = 33,
    CallErrors = 34,
    Accm = 35,
    RandomVector = 36,
    PrivateGroupId = 37,
    RxConnectSpeed = 38,
    SequencingRequired = 39,
}

impl AvpType {
    pub fn from_u16(value: u16) -> Option<AvpType> {
        use AvpType::*;
        Some(match value {
            0 => MessageType,
            1 => ResultCode,
            2 => ProtocolVersion,
            3 => FramingCapabilities,
            4 => BearerCapabilities,
            5 => TieBreaker,
            6 => FirmwareRevision,
            7 => HostName,
            8 => VendorName,
            9 => AssignedTunnelId,
            10 => ReceiveWindowSize,
            11 => Challenge,
            12 => Q931CauseCode,
            13 => ChallengeResponse,
            14 => AssignedSessionId,
            15 => CallSerialNumber,
            16 => MinimumBps,
            17 => MaximumBps,
            18 => BearerType,
            19 => FramingType,
            21 => CalledNumber,
            22 => CallingNumber,
            23 => SubAddress,
            24 => ConnectSpeed,
            25 => PhysicalChannelId,
            26 => InitialReceivedLcpConfreq,
            27 => LastSentLcpConfreq,
            28 => LastReceivedLcpConfreq,
            29 => ProxyAuthenType,
            30 => ProxyAuthenName,
            31 => ProxyAuthenChallenge,
            32 => ProxyAuthenId,
            33 => ProxyAuthenResponse,
            34 => CallErrors,
            35 => Accm,
            36 => RandomVector,
            37 => PrivateGroupId,
            38 => RxConnectSpeed,
            39 => SequencingRequired,
            _ => return None,
        })
    }

    pub fn as_u16(self) -> u16 {
        self as u16
    }
}

impl fmt::Display for AvpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AvpType::MessageType => "MessageType",
            AvpType::ResultCode => "ResultCode",
            AvpType::ProtocolVersion => "ProtocolVersion",
            AvpType::FramingCapabilities => "FramingCapabilities",
            AvpType::BearerCapabilities => "BearerCapabilities",
            AvpType::TieBreaker => "TieBreaker",
            AvpType::FirmwareRevision => "FirmwareRevision",
            AvpType::HostName => "HostName",
            AvpType::VendorName => "VendorName",
            AvpType::AssignedTunnelId => "AssignedTunnelId",
            AvpType::ReceiveWindowSize => "ReceiveWindowSize",
            AvpType::Challenge => "Challenge",
            AvpType::Q931CauseCode => "Q931CauseCode",
            AvpType::ChallengeResponse => "ChallengeResponse",
            AvpType::AssignedSessionId => "AssignedSessionId",
            AvpType::CallSerialNumber => "CallSerialNumber",
            AvpType::MinimumBps => "MinimumBps",
            AvpType::MaximumBps => "MaximumBps",
            AvpType::BearerType => "BearerType",
            AvpType::FramingType => "FramingType",
            AvpType::CalledNumber => "CalledNumber",
            AvpType::CallingNumber => "CallingNumber",
            AvpType::SubAddress => "SubAddress",
            AvpType::ConnectSpeed => "ConnectSpeed",
            AvpType::PhysicalChannelId => "PhysicalChannelId",
            AvpType::InitialReceivedLcpConfreq => "InitialReceivedLcpConfreq",
            AvpType::LastSentLcpConfreq => "LastSentLcpConfreq",
            AvpType::LastReceivedLcpConfreq => "LastReceivedLcpConfreq",
            AvpType::ProxyAuthenType => "ProxyAuthenType",
            AvpType::ProxyAuthenName => "ProxyAuthenName",
            AvpType::ProxyAuthenChallenge => "ProxyAuthenChallenge",
            AvpType::ProxyAuthenId => "ProxyAuthenId",
            AvpType::ProxyAuthenResponse => "ProxyAuthenResponse",
            AvpType::CallErrors => "CallErrors",
            AvpType::Accm => "Accm",
            AvpType::RandomVector => "RandomVector",
            AvpType::PrivateGroupId => "PrivateGroupId",
            AvpType::RxConnectSpeed => "RxConnectSpeed",
            AvpType::SequencingRequired => "SequencingRequired",
        };
        f.write_str(name)
    }
}

/// One attribute-value pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Avp {
    pub mandatory: bool,
    /// Retained from decode so a rejected fixture can be described; the
    /// encoder refuses to set it.
    pub hidden: bool,
    pub vendor_id: u16,
    pub attribute_type: u16,
    pub value: Vec<u8>,
}

impl Avp {
    pub fn new(mandatory: bool, attribute_type: AvpType, value: Vec<u8>) -> Avp {
        Avp {
            mandatory,
            hidden: false,
            vendor_id: 0,
            attribute_type: attribute_type.as_u16(),
            value,
        }
    }

    /// IETF attribute type, if this is a vendor-0 AVP from the registry.
    pub fn avp_type(&self) -> Option<AvpType> {
        if self.vendor_id == 0 {
            AvpType::from_u16(self.attribute_type)
        } else {
            None
        }
    }

    /// Name used in traces: the registry name or `vendor/type` numbers.
    pub fn display_name(&self) -> String {
        match self.avp_type() {
            Some(t) => t.to_string(),
            None => format!("Avp({}/{})", self.vendor_id, self.attribute_type),
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        if self.value.len() > MAX_VALUE_LEN {
            return Err(WireError::ValueTooLong(self.value.len()));
        }
        debug_assert!(!self.hidden, "hidden AVPs are never emitted");
        let length = (AVP_HEADER_LEN + self.value.len()) as u16;
        let mut flags_length = length & LENGTH_MASK;
        if self.mandatory {
            flags_length |= FLAG_MANDATORY;
        }
        out.extend_from_slice(&flags_length.to_be_bytes());
        out.extend_from_slice(&self.vendor_id.to_be_bytes());
        out.extend_from_slice(&self.attribute_type.to_be_bytes());
        out.extend_from_slice(&self.value);
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(AVP_HEADER_LEN + self.value.len());
        self.encode_into(&mut out)?;
        Ok(out)
    }

    /// Decode one AVP from the front of `buf`, returning it and the rest.
    pub fn decode(buf: &[u8]) -> Result<(Avp, &[u8]), WireError> {
        if buf.len() < AVP_HEADER_LEN {
            return Err(WireError::Truncated("AVP header"));
        }
        let flags_length = u16::from_be_bytes([buf[0], buf[1]]);
        let vendor_id = u16::from_be_bytes([buf[2], buf[3]]);
        let attribute_type = u16::from_be_bytes([buf[4], buf[5]]);
        let length = (flags_length & LENGTH_MASK) as usize;
        if length < AVP_HEADER_LEN {
            return Err(WireError::InvalidMessage("AVP length below header size"));
        }
        if buf.len() < length {
            return Err(WireError::Truncated("AVP value"));
        }
        if flags_length & FLAG_HIDDEN != 0 {
            return Err(WireError::HiddenAvpRejected { attribute_type });
        }
        let avp = Avp {
            mandatory: flags_length & FLAG_MANDATORY != 0,
            hidden: false,
            vendor_id,
            attribute_type,
            value: buf[AVP_HEADER_LEN..length].to_vec(),
        };
        Ok((avp, &buf[length..]))
    }

    pub fn value_as_u16(&self) -> Result<u16, WireError> {
        if self.value.len() != 2 {
            return Err(WireError::InvalidMessage("expected 2-byte AVP value"));
        }
        Ok(u16::from_be_bytes([self.value[0], self.value[1]]))
    }

    pub fn value_as_u32(&self) -> Result<u32, WireError> {
        if self.value.len() != 4 {
            return Err(WireError::InvalidMessage("expected 4-byte AVP value"));
        }
        Ok(u32::from_be_bytes([
            self.value[0],
            self.value[1],
            self.value[2],
            self.value[3],
        ]))
    }

    pub fn value_as_string(&self) -> String {
        String::from_utf8_lossy(&self.value).into_owned()
    }
}

// Typed constructors for every AVP a softwire endpoint emits. Mandatory
// bits follow RFC 2661.

/// Framing Capabilities / Framing Type bit for synchronous framing.
pub const FRAMING_SYNC: u32 = 0x0000_0001;
/// Framing Capabilities bit for asynchronous framing.
pub const FRAMING_ASYNC: u32 = 0x0000_0002;

impl Avp {
    pub fn message_type(mt: MessageType) -> Avp {
        Avp::new(
            true,
            AvpType::MessageType,
            mt.as_u16().to_be_bytes().to_vec(),
        )
    }

    /// Protocol version 1, revision 0.
    pub fn protocol_version() -> Avp {
        Avp::new(true, AvpType::ProtocolVersion, vec![1, 0])
    }

    pub fn host_name(name: &str) -> Avp {
        Avp::new(true, AvpType::HostName, name.as_bytes().to_vec())
    }

    /// Both framing bits are advertised; the receiver ignores the value.
    pub fn framing_capabilities() -> Avp {
        Avp::new(
            true,
            AvpType::FramingCapabilities,
            (FRAMING_SYNC | FRAMING_ASYNC).to_be_bytes().to_vec(),
        )
    }

    /// Synchronous framing only, carried on ICCN.
    pub fn framing_type_sync() -> Avp {
        Avp::new(
            true,
            AvpType::FramingType,
            FRAMING_SYNC.to_be_bytes().to_vec(),
        )
    }

    pub fn assigned_tunnel_id(id: u16) -> Avp {
        Avp::new(true, AvpType::AssignedTunnelId, id.to_be_bytes().to_vec())
    }

    pub fn assigned_session_id(id: u16) -> Avp {
        Avp::new(true, AvpType::AssignedSessionId, id.to_be_bytes().to_vec())
    }

    pub fn call_serial_number(serial: u32) -> Avp {
        Avp::new(
            true,
            AvpType::CallSerialNumber,
            serial.to_be_bytes().to_vec(),
        )
    }

    /// Connect speed is meaningless on a softwire; senders put 0 and
    /// receivers ignore it.
    pub fn connect_speed(bps: u32) -> Avp {
        Avp::new(true, AvpType::ConnectSpeed, bps.to_be_bytes().to_vec())
    }

    pub fn receive_window_size(size: u16) -> Avp {
        Avp::new(
            true,
            AvpType::ReceiveWindowSize,
            size.to_be_bytes().to_vec(),
        )
    }

    pub fn challenge(value: Vec<u8>) -> Avp {
        Avp::new(true, AvpType::Challenge, value)
    }

    pub fn challenge_response(digest: [u8; 16]) -> Avp {
        Avp::new(true, AvpType::ChallengeResponse, digest.to_vec())
    }

    pub fn firmware_revision(rev: u16) -> Avp {
        Avp::new(false, AvpType::FirmwareRevision, rev.to_be_bytes().to_vec())
    }

    pub fn vendor_name(name: &str) -> Avp {
        Avp::new(false, AvpType::VendorName, name.as_bytes().to_vec())
    }

    /// Result Code AVP: result, optional error code, optional message.
    pub fn result_code(result: u16, error: u16, message: &str) -> Avp {
        let mut value = Vec::with_capacity(4 + message.len());
        value.extend_from_slice(&result.to_be_bytes());
        value.extend_from_slice(&error.to_be_bytes());
        value.extend_from_slice(message.as_bytes());
        Avp::new(true, AvpType::ResultCode, value)
    }
}
