//! Softwire hub-and-spoke simulator: L2TPv2 + PPP tunnel endpoints over a
//! deterministic virtual network.
//!
//! A softwire carries one IP address family across an access network of the
//! other family. Here it is built from three layers, mirroring a voluntary
//! L2TPv2 deployment:
//!
//! * an L2TPv2 control connection plus exactly one session ([`tunnel`]),
//! * a PPP link negotiated over that session ([`ppp`]),
//! * address and prefix provisioning on top of the PPP link
//!   ([`provisioning`]), backed by an in-process AAA directory ([`aaa`]).
//!
//! The two endpoints are the softwire initiator (SI, the customer side,
//! playing the LAC-client role of RFC 2661) and the softwire concentrator
//! (SC, the ISP side, playing the LNS role). Everything runs over the
//! discrete-event fabric in [`netsim`], which models UDP delivery, loss,
//! delay and NAT middleboxes with the RFC 4787 filtering behaviors. The
//! [`scenario`] module wires a full SI/SC pair together and drives the
//! canonical deployment scenarios end to end.
//!
//! All state machines are plain values stepped by `(state, event, now)`
//! calls that return inert actions; no module performs I/O. Given equal
//! seeds and configuration, runs are bit-for-bit reproducible.

pub mod aaa;
pub mod netsim;
pub mod packet;
pub mod ppp;
pub mod prefix;
pub mod provisioning;
pub mod scenario;
pub mod time;
pub mod trace;
pub mod tunnel;
pub mod wire;

use std::fmt;

use serde::{Deserialize, Serialize};

/// IP address family of a packet, link or pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Af {
    #[serde(rename = "v4")]
    V4,
    #[serde(rename = "v6")]
    V6,
}

impl Af {
    /// The opposite family. A softwire payload family is usually the
    /// opposite of its transport family.
    pub fn other(self) -> Af {
        match self {
            Af::V4 => Af::V6,
            Af::V6 => Af::V4,
        }
    }

    /// Size of the IP header this family contributes to encapsulation
    /// overhead (IPv4 without options, fixed IPv6 header).
    pub fn header_len(self) -> u32 {
        match self {
            Af::V4 => 20,
            Af::V6 => 40,
        }
    }
}

impl fmt::Display for Af {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Af::V4 => write!(f, "v4"),
            Af::V6 => write!(f, "v6"),
        }
    }
}

/// Which end of the softwire an endpoint implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Softwire initiator: the customer-side endpoint. Always initiates
    /// the control connection, the session and the PPP link.
    #[serde(rename = "si")]
    Si,
    /// Softwire concentrator: the provider-side endpoint terminating the
    /// tunnel and the PPP link.
    #[serde(rename = "sc")]
    Sc,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Si => write!(f, "si"),
            Role::Sc => write!(f, "sc"),
        }
    }
}
