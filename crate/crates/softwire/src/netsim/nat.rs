//! NAT/NAPT middlebox model with the RFC 4787 filtering behaviors.
//!
//! Mapping behavior is fixed to endpoint-independent (one external tuple
//! per internal tuple, whatever the destination), which is the common case
//! for deployed home gateways; only the filtering side varies. Bindings
//! are created and refreshed by outbound traffic and expire after
//! `binding_ttl` of idleness.

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::time::{Duration, SimTime};

/// How inbound packets are matched against a live binding, per RFC 4787
/// section 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Filtering {
    /// Any remote tuple may reach a live binding.
    #[serde(rename = "eif")]
    EndpointIndependent,
    /// The remote address must be one this binding has sent to.
    #[serde(rename = "adf")]
    AddressDependent,
    /// The remote address and port must both match a prior destination.
    #[serde(rename = "apdf")]
    AddressAndPortDependent,
}

impl std::fmt::Display for Filtering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Filtering::EndpointIndependent => write!(f, "eif"),
            Filtering::AddressDependent => write!(f, "adf"),
            Filtering::AddressAndPortDependent => write!(f, "apdf"),
        }
    }
}

/// Why an inbound packet was not translated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterReason {
    /// No binding exists for the external tuple.
    NoBinding,
    /// A binding existed but has been idle past its lifetime.
    BindingExpired,
    /// The remote tuple failed the configured filtering behavior.
    Filtered,
}

impl std::fmt::Display for FilterReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterReason::NoBinding => write!(f, "no binding"),
            FilterReason::BindingExpired => write!(f, "binding expired"),
            FilterReason::Filtered => write!(f, "filtering behavior"),
        }
    }
}

/// A transport tuple as the NAT sees it.
pub type Tuple = (IpAddr, u16);

#[derive(Debug, Clone)]
struct Binding {
    internal: Tuple,
    external_port: u16,
    last_activity: SimTime,
    /// Remote tuples this binding has sent to; what the filtering modes
    /// match against.
    contacted: BTreeSet<Tuple>,
}

/// Configuration for one NAT box on the path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NatConfig {
    pub filtering: Filtering,
    /// Address the NAT translates inside sources to.
    pub external_ip: IpAddr,
    /// Hosts (by address) living behind this NAT.
    pub inside: Vec<IpAddr>,
    /// Idle lifetime of a binding, refreshed by traffic.
    pub binding_ttl: Duration,
}

const FIRST_EXTERNAL_PORT: u16 = 40_000;

/// One NAT middlebox.
#[derive(Debug)]
pub struct NatBox {
    config: NatConfig,
    bindings: BTreeMap<Tuple, Binding>,
    by_external_port: BTreeMap<u16, Tuple>,
    next_port: u16,
}

impl NatBox {
    pub fn new(config: NatConfig) -> NatBox {
        NatBox {
            config,
            bindings: BTreeMap::new(),
            by_external_port: BTreeMap::new(),
            next_port: FIRST_EXTERNAL_PORT,
        }
    }

    pub fn config(&self) -> &NatConfig {
        &self.config
    }

    pub fn is_inside(&self, ip: IpAddr) -> bool {
        self.config.inside.contains(&ip)
    }

    pub fn external_ip(&self) -> IpAddr {
        self.config.external_ip
    }

    /// Translate an outbound packet's source tuple, creating or refreshing
    /// the binding. Returns the external tuple and whether the binding is
    /// new (for trace output).
    pub fn outbound(&mut self, src: Tuple, dst: Tuple, now: SimTime) -> (Tuple, bool) {
        self.expire_idle(now);
        let (external_port, created) = match self.bindings.get_mut(&src) {
            Some(binding) => {
                binding.last_activity = now;
                binding.contacted.insert(dst);
                (binding.external_port, false)
            }
            None => {
                let port = self.next_port;
                self.next_port += 1;
                let mut contacted = BTreeSet::new();
                contacted.insert(dst);
                self.bindings.insert(
                    src,
                    Binding {
                        internal: src,
                        external_port: port,
                        last_activity: now,
                        contacted,
                    },
                );
                self.by_external_port.insert(port, src);
                (port, true)
            }
        };
        ((self.config.external_ip, external_port), created)
    }

    /// Match an inbound packet addressed to `external` against the binding
    /// table, applying the configured filtering behavior to `remote`.
    /// Returns the internal tuple to rewrite the destination to.
    pub fn inbound(
        &mut self,
        external: Tuple,
        remote: Tuple,
        now: SimTime,
    ) -> Result<Tuple, FilterReason> {
        if external.0 != self.config.external_ip {
            return Err(FilterReason::NoBinding);
        }
        let internal = match self.by_external_port.get(&external.1) {
            Some(t) => *t,
            None => return Err(FilterReason::NoBinding),
        };
        let expired = {
            let binding = &self.bindings[&internal];
            now.since(binding.last_activity) > self.config.binding_ttl
        };
        if expired {
            self.remove(internal);
            return Err(FilterReason::BindingExpired);
        }
        let binding = self.bindings.get_mut(&internal).expect("binding exists");
        let passes = match self.config.filtering {
            Filtering::EndpointIndependent => true,
            Filtering::AddressDependent => binding.contacted.iter().any(|(ip, _)| *ip == remote.0),
            Filtering::AddressAndPortDependent => binding.contacted.contains(&remote),
        };
        if !passes {
            return Err(FilterReason::Filtered);
        }
        binding.last_activity = now;
        Ok(binding.internal)
    }

    fn remove(&mut self, internal: Tuple) {
        if let Some(binding) = self.bindings.remove(&internal) {
            self.by_external_port.remove(&binding.external_port);
        }
    }

    fn expire_idle(&mut self, now: SimTime) {
        let ttl = self.config.binding_ttl;
        let stale: Vec<Tuple> = self
            .bindings
            .values()
            .filter(|b| now.since(b.last_activity) > ttl)
            .map(|b| b.internal)
            .collect();
        for internal in stale {
            self.remove(internal);
        }
    }

    #[cfg(test)]
    pub fn binding_count(&self) -> usize {
        self.bindings.len()
    }
}
