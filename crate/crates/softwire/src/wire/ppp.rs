//! Bare PPP framing as carried inside L2TP payloads.
//!
//! L2TP transports PPP without HDLC flags or FCS. This profile also omits
//! the 0xFF03 address/control bytes: every session payload starts directly
//! with the 2-byte protocol field. ACFC negotiation therefore changes only
//! the MTU arithmetic, never the bytes this codec produces.

use std::fmt;

use super::WireError;

/// PPP protocol numbers carried on a softwire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PppProtocol {
    /// IPv4 datagram.
    Ipv4,
    /// IPv6 datagram.
    Ipv6,
    /// Link Control Protocol.
    Lcp,
    /// Challenge Handshake Authentication Protocol.
    Chap,
    /// IPv4 network control protocol.
    Ipcp,
    /// IPv6 network control protocol.
    Ipv6cp,
}

pub const PROTOCOL_IPV4: u16 = 0x0021;
pub const PROTOCOL_IPV6: u16 = 0x0057;
pub const PROTOCOL_IPCP: u16 = 0x8021;
pub const PROTOCOL_IPV6CP: u16 = 0x8057;
pub const PROTOCOL_LCP: u16 = 0xC021;
pub const PROTOCOL_CHAP: u16 = 0xC223;

impl PppProtocol {
    pub fn from_u16(value: u16) -> Result<PppProtocol, WireError> {
        match value {
            PROTOCOL_IPV4 => Ok(PppProtocol::Ipv4),
            PROTOCOL_IPV6 => Ok(PppProtocol::Ipv6),
            PROTOCOL_IPCP => Ok(PppProtocol::Ipcp),
            PROTOCOL_IPV6CP => Ok(PppProtocol::Ipv6cp),
            PROTOCOL_LCP => Ok(PppProtocol::Lcp),
            PROTOCOL_CHAP => Ok(PppProtocol::Chap),
            other => Err(WireError::UnknownPppProtocol(other)),
        }
    }

    pub fn as_u16(self) -> u16 {
        match self {
            PppProtocol::Ipv4 => PROTOCOL_IPV4,
            PppProtocol::Ipv6 => PROTOCOL_IPV6,
            PppProtocol::Ipcp => PROTOCOL_IPCP,
            PppProtocol::Ipv6cp => PROTOCOL_IPV6CP,
            PppProtocol::Lcp => PROTOCOL_LCP,
            PppProtocol::Chap => PROTOCOL_CHAP,
        }
    }

    /// True for the two data protocols (as opposed to control traffic).
    pub fn is_data(self) -> bool {
        matches!(self, PppProtocol::Ipv4 | PppProtocol::Ipv6)
    }
}

impl fmt::Display for PppProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PppProtocol::Ipv4 => write!(f, "IPv4"),
            PppProtocol::Ipv6 => write!(f, "IPv6"),
            PppProtocol::Ipcp => write!(f, "IPCP"),
            PppProtocol::Ipv6cp => write!(f, "IPV6CP"),
            PppProtocol::Lcp => write!(f, "LCP"),
            PppProtocol::Chap => write!(f, "CHAP"),
        }
    }
}

/// A PPP frame: protocol number plus payload, nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PppFrame {
    pub protocol: PppProtocol,
    pub payload: Vec<u8>,
}

impl PppFrame {
    pub fn new(protocol: PppProtocol, payload: Vec<u8>) -> PppFrame {
        PppFrame { protocol, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + self.payload.len());
        out.extend_from_slice(&self.protocol.as_u16().to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<PppFrame, WireError> {
        if buf.len() < 2 {
            return Err(WireError::Truncated("PPP protocol field"));
        }
        let protocol = PppProtocol::from_u16(u16::from_be_bytes([buf[0], buf[1]]))?;
        Ok(PppFrame {
            protocol,
            payload: buf[2..].to_vec(),
        })
    }
}
