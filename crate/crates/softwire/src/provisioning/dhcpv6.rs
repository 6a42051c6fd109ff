//! DHCPv6 over the softwire: prefix delegation for router initiators,
//! optional address assignment when the RA said so, and DNS for everyone.
//!
//! A router initiator puts an IA_PD in its Solicit and walks the full
//! Solicit/Advertise/Request/Reply exchange; a host initiator either
//! solicits without IA_PD or, when it only wants configuration, uses the
//! stateless two-message Information-Request/Reply. The server binds each
//! DUID to the user of the tunnel it first appeared on and refuses to see
//! it anywhere else.

use std::collections::BTreeMap;
use std::net::Ipv6Addr;

use crate::packet::{Dhcpv6Message, Dhcpv6MsgType, Dhcpv6Status, IaNa, IaPd};
use crate::prefix::Ipv6Prefix;

use super::pool::V6PrefixPool;
use super::ProvisioningError;

/// What the client wants from the exchange. All false is a plain Solicit
/// probing for configuration; `info_only` switches to the stateless
/// two-message Information-Request/Reply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClientPlan {
    /// Router role: include IA_PD and request a delegated prefix.
    pub ia_pd: bool,
    /// The RA's managed flag was set: request an address via IA_NA.
    pub ia_na: bool,
    /// Nothing stateful wanted at all; use Information-Request.
    pub info_only: bool,
}

/// Client outcome once the exchange completes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClientOutcome {
    pub address: Option<Ipv6Addr>,
    pub delegated_prefix: Option<Ipv6Prefix>,
    pub dns: Vec<Ipv6Addr>,
}

/// Client half of the exchange.
#[derive(Debug)]
pub struct Dhcpv6Client {
    duid: u64,
    plan: ClientPlan,
    /// Prefix held before (renewal hint).
    prior_prefix: Option<Ipv6Prefix>,
    outcome: Option<ClientOutcome>,
}

impl Dhcpv6Client {
    pub fn new(duid: u64, plan: ClientPlan, prior_prefix: Option<Ipv6Prefix>) -> Dhcpv6Client {
        Dhcpv6Client {
            duid,
            plan,
            prior_prefix,
            outcome: None,
        }
    }

    /// First message of the exchange.
    pub fn start(&self) -> Dhcpv6Message {
        if self.plan.info_only && !self.plan.ia_pd && !self.plan.ia_na {
            return Dhcpv6Message {
                msg_type: Dhcpv6MsgType::InformationRequest,
                duid: self.duid,
                want_dns: true,
                ia_pd: None,
                ia_na: None,
                dns: Vec::new(),
                status: Dhcpv6Status::Success,
            };
        }
        Dhcpv6Message {
            msg_type: Dhcpv6MsgType::Solicit,
            duid: self.duid,
            want_dns: true,
            ia_pd: self.plan.ia_pd.then_some(IaPd {
                hint: self.prior_prefix,
                delegated: None,
            }),
            ia_na: self.plan.ia_na.then_some(IaNa { address: None }),
            dns: Vec::new(),
            status: Dhcpv6Status::Success,
        }
    }

    /// Process a server message; returns the next message to send, if any.
    pub fn handle(
        &mut self,
        msg: &Dhcpv6Message,
    ) -> Result<Option<Dhcpv6Message>, ProvisioningError> {
        if msg.status == Dhcpv6Status::NoPrefixAvail {
            return Err(ProvisioningError::NoPrefixAvailable);
        }
        match msg.msg_type {
            Dhcpv6MsgType::Advertise => {
                if !self.plan.ia_pd && !self.plan.ia_na {
                    // Nothing stateful to commit to; take the
                    // configuration and stop.
                    self.outcome = Some(ClientOutcome {
                        address: None,
                        delegated_prefix: None,
                        dns: msg.dns.clone(),
                    });
                    return Ok(None);
                }
                // Commit to the advertised bindings.
                Ok(Some(Dhcpv6Message {
                    msg_type: Dhcpv6MsgType::Request,
                    duid: self.duid,
                    want_dns: true,
                    ia_pd: msg.ia_pd,
                    ia_na: msg.ia_na,
                    dns: Vec::new(),
                    status: Dhcpv6Status::Success,
                }))
            }
            Dhcpv6MsgType::Reply => {
                self.outcome = Some(ClientOutcome {
                    address: msg.ia_na.and_then(|ia| ia.address),
                    delegated_prefix: msg.ia_pd.and_then(|ia| ia.delegated),
                    dns: msg.dns.clone(),
                });
                Ok(None)
            }
            _ => Ok(None),
        }
    }

    pub fn outcome(&self) -> Option<&ClientOutcome> {
        self.outcome.as_ref()
    }
}

/// Server half: delegation pool, optional address pool, DNS and the
/// DUID-to-user association table.
#[derive(Debug)]
pub struct Dhcpv6Server {
    delegation_pool: V6PrefixPool,
    dns: Vec<Ipv6Addr>,
    duid_user: BTreeMap<u64, String>,
    /// Delegations already made, per DUID, so a Request after Advertise
    /// (or a reconnect) yields the same prefix.
    delegated: BTreeMap<u64, Ipv6Prefix>,
    /// Addresses handed out via IA_NA, per DUID.
    addresses: BTreeMap<u64, Ipv6Addr>,
    /// Pool for IA_NA addresses, when the managed flag is in use: hands
    /// out host addresses inside this /64.
    address_prefix: Option<Ipv6Prefix>,
    next_host: u64,
}

impl Dhcpv6Server {
    pub fn new(delegation_pool: V6PrefixPool, dns: Vec<Ipv6Addr>) -> Dhcpv6Server {
        Dhcpv6Server {
            delegation_pool,
            dns,
            duid_user: BTreeMap::new(),
            delegated: BTreeMap::new(),
            addresses: BTreeMap::new(),
            address_prefix: None,
            next_host: 0x100,
        }
    }

    /// Enable IA_NA assignment out of the given /64.
    pub fn set_address_prefix(&mut self, prefix: Ipv6Prefix) {
        self.address_prefix = Some(prefix);
    }

    /// Pin a delegation before the exchange (stable store reconnection).
    pub fn reserve_delegation(&mut self, duid: u64, prefix: Ipv6Prefix) {
        self.delegation_pool.reserve(prefix);
        self.delegated.insert(duid, prefix);
    }

    /// The user a DUID is bound to, if seen before.
    pub fn user_of(&self, duid: u64) -> Option<&str> {
        self.duid_user.get(&duid).map(String::as_str)
    }

    /// Handle one client message on the tunnel belonging to `user`.
    /// `pinned_prefix` fixes the delegation (AAA Delegated-IPv6-Prefix).
    pub fn handle(
        &mut self,
        msg: &Dhcpv6Message,
        user: &str,
        pinned_prefix: Option<Ipv6Prefix>,
    ) -> Result<Dhcpv6Message, ProvisioningError> {
        match self.duid_user.get(&msg.duid) {
            Some(bound) if bound != user => {
                return Err(ProvisioningError::DuidMismatch {
                    duid: msg.duid,
                    bound: bound.clone(),
                });
            }
            Some(_) => {}
            None => {
                self.duid_user.insert(msg.duid, user.to_string());
            }
        }

        let reply_type = match msg.msg_type {
            Dhcpv6MsgType::Solicit => Dhcpv6MsgType::Advertise,
            Dhcpv6MsgType::Request | Dhcpv6MsgType::InformationRequest => Dhcpv6MsgType::Reply,
            // Not a client message; echo nothing sensible.
            _ => Dhcpv6MsgType::Reply,
        };

        let ia_pd = match msg.ia_pd {
            Some(_) if msg.msg_type != Dhcpv6MsgType::InformationRequest => {
                let prefix = self.delegation_for(msg.duid, pinned_prefix)?;
                Some(IaPd {
                    hint: None,
                    delegated: Some(prefix),
                })
            }
            _ => None,
        };

        let ia_na = match msg.ia_na {
            Some(_) if msg.msg_type != Dhcpv6MsgType::InformationRequest => Some(IaNa {
                address: Some(self.address_for(msg.duid)?),
            }),
            _ => None,
        };

        Ok(Dhcpv6Message {
            msg_type: reply_type,
            duid: msg.duid,
            want_dns: false,
            ia_pd,
            ia_na,
            dns: if msg.want_dns {
                self.dns.clone()
            } else {
                Vec::new()
            },
            status: Dhcpv6Status::Success,
        })
    }

    fn delegation_for(
        &mut self,
        duid: u64,
        pinned: Option<Ipv6Prefix>,
    ) -> Result<Ipv6Prefix, ProvisioningError> {
        if let Some(prefix) = self.delegated.get(&duid) {
            return Ok(*prefix);
        }
        let prefix = match pinned {
            Some(p) => {
                self.delegation_pool.reserve(p);
                p
            }
            None => self.delegation_pool.allocate()?,
        };
        self.delegated.insert(duid, prefix);
        Ok(prefix)
    }

    fn address_for(&mut self, duid: u64) -> Result<Ipv6Addr, ProvisioningError> {
        if let Some(addr) = self.addresses.get(&duid) {
            return Ok(*addr);
        }
        let prefix = self
            .address_prefix
            .ok_or(ProvisioningError::NoPrefixAvailable)?;
        let addr = prefix
            .with_interface_id(self.next_host)
            .ok_or(ProvisioningError::NoPrefixAvailable)?;
        self.next_host += 1;
        self.addresses.insert(duid, addr);
        Ok(addr)
    }
}
