//! DHCPv4 subnet allocation over an IPv4 softwire: a router initiator
//! asks for a whole prefix to serve its LAN, the concentrator carves one
//! out of its pool and routes it back through the softwire.
//!
//! The Subnet-Request suboption always has the h bit set (the initiator
//! runs the DHCP server for the delegated subnet). The i bit is 0 on the
//! first request and 1 on renewals, in which case the Subnet-Information
//! suboption names the previously held prefix with the c and s bits clear.

use std::net::Ipv4Addr;

use crate::packet::{Dhcpv4Message, Dhcpv4MsgType, SubnetInfo, SubnetRequest};
use crate::prefix::Ipv4Prefix;

use super::pool::V4PrefixPool;
use super::ProvisioningError;

/// Build the Subnet-Request suboption for a first request or a renewal.
/// `supported_len` is the longest prefix length the client can run a
/// subnet at, when it is constrained; 0 means any.
pub fn build_subnet_request(prior: Option<Ipv4Prefix>, supported_len: Option<u8>) -> SubnetRequest {
    match prior {
        None => SubnetRequest {
            h: true,
            i: false,
            prefix_len: supported_len.unwrap_or(0),
            prior: None,
        },
        Some(prefix) => SubnetRequest {
            h: true,
            i: true,
            prefix_len: supported_len.unwrap_or(0),
            prior: Some(SubnetInfo {
                prefix,
                c: false,
                s: false,
            }),
        },
    }
}

/// Wrap a subnet request into a DHCPv4 message.
pub fn client_request(client_id: u64, request: SubnetRequest, want_dns: bool) -> Dhcpv4Message {
    Dhcpv4Message {
        msg_type: Dhcpv4MsgType::Request,
        client_id,
        subnet_request: Some(request),
        subnet_reply: None,
        dns: Vec::new(),
        ok: want_dns,
    }
}

/// Server side: the delegation pool and DNS list.
#[derive(Debug)]
pub struct Dhcpv4Server {
    pool: V4PrefixPool,
    dns: Vec<Ipv4Addr>,
}

impl Dhcpv4Server {
    pub fn new(pool: V4PrefixPool, dns: Vec<Ipv4Addr>) -> Dhcpv4Server {
        Dhcpv4Server { pool, dns }
    }

    /// Pin a delegation ahead of the exchange (stable reconnection).
    /// Returns false if the prefix is no longer free.
    pub fn reserve(&mut self, prefix: Ipv4Prefix) -> bool {
        self.pool.try_reserve(prefix)
    }

    /// Answer a subnet-allocation request. `pinned` short-circuits the
    /// allocation for a reconnecting user; the client's renewal hint is
    /// honored when the prior prefix is still free; length constraints
    /// are enforced.
    pub fn handle(
        &mut self,
        msg: &Dhcpv4Message,
        pinned: Option<Ipv4Prefix>,
    ) -> Result<Dhcpv4Message, ProvisioningError> {
        let request = match &msg.subnet_request {
            Some(r) => r,
            None => {
                // Plain configuration request: DNS only.
                return Ok(Dhcpv4Message {
                    msg_type: Dhcpv4MsgType::Ack,
                    client_id: msg.client_id,
                    subnet_request: None,
                    subnet_reply: None,
                    dns: self.dns.clone(),
                    ok: true,
                });
            }
        };
        let prefix = match pinned {
            Some(p) if self.pool.try_reserve(p) => p,
            _ => self.delegate(request)?,
        };
        Ok(Dhcpv4Message {
            msg_type: Dhcpv4MsgType::Ack,
            client_id: msg.client_id,
            subnet_request: None,
            subnet_reply: Some(prefix),
            dns: self.dns.clone(),
            ok: true,
        })
    }

    /// Produce the refusal message for a failed delegation.
    pub fn refusal(&self, msg: &Dhcpv4Message) -> Dhcpv4Message {
        Dhcpv4Message {
            msg_type: Dhcpv4MsgType::Nak,
            client_id: msg.client_id,
            subnet_request: None,
            subnet_reply: None,
            dns: Vec::new(),
            ok: false,
        }
    }

    fn delegate(&mut self, request: &SubnetRequest) -> Result<Ipv4Prefix, ProvisioningError> {
        // Renewal: hand the same prefix back when it is still available
        // and matches any length constraint.
        if request.i {
            if let Some(info) = &request.prior {
                let len_ok = request.prefix_len == 0 || info.prefix.len() == request.prefix_len;
                if len_ok && self.pool.try_reserve(info.prefix) {
                    return Ok(info.prefix);
                }
            }
        }
        let requested_len = if request.prefix_len == 0 {
            None
        } else {
            Some(request.prefix_len)
        };
        self.pool.allocate(requested_len)
    }
}
