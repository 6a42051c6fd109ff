//! PPP control-protocol packets: the code/identifier/length layout shared
//! by LCP (RFC 1661), IPCP (RFC 1332) and IPV6CP (RFC 5072), plus the
//! type-length-value configuration options they negotiate.

use super::WireError;

/// Control-protocol packet codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CpCode {
    ConfigureRequest = 1,
    ConfigureAck = 2,
    ConfigureNak = 3,
    ConfigureReject = 4,
    TerminateRequest = 5,
    TerminateAck = 6,
    CodeReject = 7,
    ProtocolReject = 8,
    EchoRequest = 9,
    EchoReply = 10,
    DiscardRequest = 11,
}

impl CpCode {
    pub fn from_u8(value: u8) -> Option<CpCode> {
        Some(match value {
            1 => CpCode::ConfigureRequest,
            2 => CpCode::ConfigureAck,
            3 => CpCode::ConfigureNak,
            4 => CpCode::ConfigureReject,
            5 => CpCode::TerminateRequest,
            6 => CpCode::TerminateAck,
            7 => CpCode::CodeReject,
            8 => CpCode::ProtocolReject,
            9 => CpCode::EchoRequest,
            10 => CpCode::EchoReply,
            11 => CpCode::DiscardRequest,
            _ => return None,
        })
    }
}

/// One control-protocol packet.
///
/// ```text
/// +------+------------+--------+---------+
/// | Code | Identifier | Length | Data... |
/// +------+------------+--------+---------+
///    1         1          2
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpPacket {
    pub code: CpCode,
    pub id: u8,
    pub data: Vec<u8>,
}

impl CpPacket {
    pub fn new(code: CpCode, id: u8, data: Vec<u8>) -> CpPacket {
        CpPacket { code, id, data }
    }

    /// Configuration packet carrying an option list.
    pub fn config(code: CpCode, id: u8, options: &[CpOption]) -> CpPacket {
        CpPacket::new(code, id, encode_options(options))
    }

    pub fn encode(&self) -> Vec<u8> {
        let length = (4 + self.data.len()) as u16;
        let mut out = Vec::with_capacity(length as usize);
        out.push(self.code as u8);
        out.push(self.id);
        out.extend_from_slice(&length.to_be_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<CpPacket, WireError> {
        if buf.len() < 4 {
            return Err(WireError::Truncated("control-protocol header"));
        }
        let code = CpCode::from_u8(buf[0])
            .ok_or(WireError::InvalidMessage("unknown control-protocol code"))?;
        let id = buf[1];
        let length = u16::from_be_bytes([buf[2], buf[3]]) as usize;
        if length < 4 || buf.len() < length {
            return Err(WireError::Truncated("control-protocol body"));
        }
        Ok(CpPacket {
            code,
            id,
            data: buf[4..length].to_vec(),
        })
    }

    pub fn options(&self) -> Result<Vec<CpOption>, WireError> {
        decode_options(&self.data)
    }
}

/// A configuration option in type-length-value form; length covers the
/// 2-byte type/length header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpOption {
    pub kind: u8,
    pub data: Vec<u8>,
}

impl CpOption {
    pub fn new(kind: u8, data: Vec<u8>) -> CpOption {
        CpOption { kind, data }
    }

    pub fn u16_value(&self) -> Result<u16, WireError> {
        if self.data.len() != 2 {
            return Err(WireError::InvalidMessage("expected 2-byte option"));
        }
        Ok(u16::from_be_bytes([self.data[0], self.data[1]]))
    }

    pub fn u32_value(&self) -> Result<u32, WireError> {
        if self.data.len() != 4 {
            return Err(WireError::InvalidMessage("expected 4-byte option"));
        }
        Ok(u32::from_be_bytes([
            self.data[0],
            self.data[1],
            self.data[2],
            self.data[3],
        ]))
    }

    pub fn u64_value(&self) -> Result<u64, WireError> {
        if self.data.len() != 8 {
            return Err(WireError::InvalidMessage("expected 8-byte option"));
        }
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&self.data);
        Ok(u64::from_be_bytes(bytes))
    }
}

pub fn encode_options(options: &[CpOption]) -> Vec<u8> {
    let mut out = Vec::new();
    for opt in options {
        out.push(opt.kind);
        out.push((2 + opt.data.len()) as u8);
        out.extend_from_slice(&opt.data);
    }
    out
}

pub fn decode_options(mut buf: &[u8]) -> Result<Vec<CpOption>, WireError> {
    let mut options = Vec::new();
    while !buf.is_empty() {
        if buf.len() < 2 {
            return Err(WireError::Truncated("option header"));
        }
        let kind = buf[0];
        let length = buf[1] as usize;
        if length < 2 || buf.len() < length {
            return Err(WireError::Truncated("option body"));
        }
        options.push(CpOption {
            kind,
            data: buf[2..length].to_vec(),
        });
        buf = &buf[length..];
    }
    Ok(options)
}

// LCP option types (RFC 1661).
pub const LCP_OPT_MRU: u8 = 1;
pub const LCP_OPT_AUTH_PROTOCOL: u8 = 3;
pub const LCP_OPT_MAGIC_NUMBER: u8 = 5;
pub const LCP_OPT_PFC: u8 = 7;
pub const LCP_OPT_ACFC: u8 = 8;

// IPCP option types (RFC 1332, RFC 1877).
pub const IPCP_OPT_IP_ADDRESS: u8 = 3;
pub const IPCP_OPT_PRIMARY_DNS: u8 = 129;
pub const IPCP_OPT_SECONDARY_DNS: u8 = 131;

// IPV6CP option types (RFC 5072).
pub const IPV6CP_OPT_INTERFACE_ID: u8 = 1;

/// Auth-protocol option value selecting CHAP with MD5 (RFC 1994):
/// protocol 0xC223, algorithm 5.
pub fn chap_md5_auth_option() -> CpOption {
    CpOption::new(LCP_OPT_AUTH_PROTOCOL, vec![0xC2, 0x23, 0x05])
}
