//! Bit-exact wire formats: the L2TPv2 header and control messages
//! (RFC 2661), their attribute-value pairs, and bare PPP frames as carried
//! inside L2TP payloads.
//!
//! Everything in this module is a pure function over byte buffers; all
//! multi-byte fields are network byte order. The profile implemented here
//! is the single-session voluntary one: hidden AVPs are rejected outright
//! (nothing we carry is sensitive, so the hiding mechanism is never used)
//! and [`relevance`] classifies which AVPs belong on which control message
//! for this deployment model.

pub mod avp;
pub mod chap;
pub mod cp;
pub mod l2tp;
pub mod ppp;
pub mod relevance;

pub use avp::{Avp, AvpType};
pub use l2tp::{ControlMessage, DataMessage, L2tpHeader, MessageType};
pub use ppp::{PppFrame, PppProtocol};
pub use relevance::{classify_avp, Relevance};

use thiserror::Error;

/// Decode/encode failures for all wire formats in this module.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    /// Buffer ends before a declared or minimum length.
    #[error("truncated: {0}")]
    Truncated(&'static str),
    /// L2TP version field is not 2.
    #[error("unsupported L2TP version {0}")]
    BadVersion(u8),
    /// Header flag combination violates the control-header discipline.
    #[error("invalid header: {0}")]
    InvalidHeader(&'static str),
    /// An AVP arrived with the H bit set; this profile never hides AVPs.
    #[error("hidden AVP {attribute_type} rejected")]
    HiddenAvpRejected { attribute_type: u16 },
    /// An AVP we do not understand arrived with the M bit set; the peer
    /// demands we act on it, so the only correct move is teardown.
    #[error("unknown mandatory AVP {attribute_type} (vendor {vendor_id})")]
    MandatoryUnknownAvp { vendor_id: u16, attribute_type: u16 },
    /// AVP value exceeds the 10-bit length field minus the 6-byte header.
    #[error("AVP value of {0} bytes exceeds maximum of 1017")]
    ValueTooLong(usize),
    /// PPP protocol number not carried on softwires.
    #[error("unknown PPP protocol {0:#06x}")]
    UnknownPppProtocol(u16),
    /// Structurally invalid message body.
    #[error("invalid message: {0}")]
    InvalidMessage(&'static str),
}
