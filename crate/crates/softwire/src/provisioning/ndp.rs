//! Router discovery and address autoconfiguration over the softwire:
//! the concentrator answers router solicitations with the /64 to use, the
//! initiator forms its address from that prefix and its negotiated
//! interface identifier, then proves uniqueness with duplicate address
//! detection before using it.

use std::net::Ipv6Addr;

use crate::aaa::RaPrefixSource;
use crate::packet::RouterAdvert;
use crate::prefix::Ipv6Prefix;
use crate::time::{Duration, SimTime};

use super::pool::V6PrefixPool;
use super::ProvisioningError;

/// RA flags policy on the concentrator.
#[derive(Debug, Clone, Copy, Default)]
pub struct RaPolicy {
    /// Set the managed flag: addresses come from DHCPv6 (IA_NA).
    pub dhcpv6_addresses: bool,
    /// Set the other-config flag: stateless DHCPv6 offers extras (DNS).
    pub dhcpv6_other: bool,
}

/// Concentrator-side responder owning the endpoint /64 pools.
#[derive(Debug)]
pub struct RaResponder {
    local_pool: V6PrefixPool,
    /// Named pools selectable by the Framed-IPv6-Pool attribute.
    named_pools: Vec<(String, V6PrefixPool)>,
    policy: RaPolicy,
}

impl RaResponder {
    pub fn new(local_pool: V6PrefixPool, policy: RaPolicy) -> RaResponder {
        RaResponder {
            local_pool,
            named_pools: Vec::new(),
            policy,
        }
    }

    pub fn add_named_pool(&mut self, name: &str, pool: V6PrefixPool) {
        self.named_pools.push((name.to_string(), pool));
    }

    /// Reserve a /64 ahead of allocation (stable reconnection).
    pub fn reserve(&mut self, prefix: Ipv6Prefix) {
        self.local_pool.reserve(prefix);
        for (_, pool) in &mut self.named_pools {
            pool.reserve(prefix);
        }
    }

    /// Answer a router solicitation. Precedence: the exact AAA prefix,
    /// else the named AAA pool, else the local pool. `pinned` short-cuts
    /// allocation for a reconnecting user.
    pub fn handle_rs(
        &mut self,
        source: &RaPrefixSource,
        pinned: Option<Ipv6Prefix>,
    ) -> Result<RouterAdvert, ProvisioningError> {
        let prefix = match source {
            RaPrefixSource::Exact(prefix) => *prefix,
            RaPrefixSource::Pool(name) => {
                let pool = self
                    .named_pools
                    .iter_mut()
                    .find(|(n, _)| n == name)
                    .map(|(_, p)| p)
                    .ok_or(ProvisioningError::NoPrefixAvailable)?;
                match pinned {
                    Some(p) => {
                        pool.reserve(p);
                        p
                    }
                    None => pool.allocate()?,
                }
            }
            RaPrefixSource::Local => match pinned {
                Some(p) => {
                    self.local_pool.reserve(p);
                    p
                }
                None => self.local_pool.allocate()?,
            },
        };
        Ok(RouterAdvert {
            prefix,
            managed: self.policy.dhcpv6_addresses,
            other_config: self.policy.dhcpv6_other,
        })
    }
}

/// SLAAC: join the advertised /64 with the 64-bit interface identifier.
pub fn slaac_configure(ra: &RouterAdvert, iid: u64) -> Option<Ipv6Addr> {
    ra.prefix.with_interface_id(iid)
}

/// Duplicate address detection on the initiator: probe, wait, and claim
/// the address if nobody defends the target.
#[derive(Debug)]
pub struct DadProbe {
    target: Ipv6Addr,
    deadline: SimTime,
    failed: bool,
}

/// How long to listen for a defense, in simulated time.
pub const DAD_WAIT: Duration = Duration::from_millis(1000);

impl DadProbe {
    pub fn start(target: Ipv6Addr, now: SimTime) -> DadProbe {
        DadProbe {
            target,
            deadline: now + DAD_WAIT,
            failed: false,
        }
    }

    pub fn target(&self) -> Ipv6Addr {
        self.target
    }

    pub fn deadline(&self) -> SimTime {
        self.deadline
    }

    /// A neighbor advertisement arrived; fatal if it defends our target.
    pub fn on_neighbor_advert(&mut self, target: Ipv6Addr) {
        if target == self.target {
            self.failed = true;
        }
    }

    /// Resolve once the wait has elapsed.
    pub fn poll(&self, now: SimTime) -> Option<Result<Ipv6Addr, ProvisioningError>> {
        if self.failed {
            return Some(Err(ProvisioningError::DadFailed(self.target)));
        }
        if now >= self.deadline {
            return Some(Ok(self.target));
        }
        None
    }
}

/// Does an endpoint holding `owned` need to defend `target`?
pub fn dad_defends(owned: Option<Ipv6Addr>, target: Ipv6Addr) -> bool {
    owned == Some(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> V6PrefixPool {
        V6PrefixPool::endpoint("2001:db8:1::/48".parse().unwrap()).unwrap()
    }

    #[test]
    fn aaa_exact_prefix_wins() {
        let mut responder = RaResponder::new(pool(), RaPolicy::default());
        let exact: Ipv6Prefix = "2001:db8:99::/64".parse().unwrap();
        let ra = responder
            .handle_rs(&RaPrefixSource::Exact(exact), None)
            .unwrap();
        assert_eq!(ra.prefix, exact);
        assert!(!ra.managed);
    }

    #[test]
    fn named_pool_allocation() {
        let mut responder = RaResponder::new(pool(), RaPolicy::default());
        responder.add_named_pool(
            "gold",
            V6PrefixPool::endpoint("2001:db8:2::/48".parse().unwrap()).unwrap(),
        );
        let ra = responder
            .handle_rs(&RaPrefixSource::Pool("gold".into()), None)
            .unwrap();
        assert_eq!(ra.prefix.to_string(), "2001:db8:2::/64");
        // Unknown pool name has nothing to give.
        assert_eq!(
            responder.handle_rs(&RaPrefixSource::Pool("missing".into()), None),
            Err(ProvisioningError::NoPrefixAvailable)
        );
    }

    #[test]
    fn local_pool_is_the_fallback() {
        let mut responder = RaResponder::new(pool(), RaPolicy::default());
        let ra = responder.handle_rs(&RaPrefixSource::Local, None).unwrap();
        assert_eq!(ra.prefix.to_string(), "2001:db8:1::/64");
        let ra2 = responder.handle_rs(&RaPrefixSource::Local, None).unwrap();
        assert_eq!(ra2.prefix.to_string(), "2001:db8:1:1::/64");
    }

    #[test]
    fn managed_flag_follows_policy() {
        let mut responder = RaResponder::new(
            pool(),
            RaPolicy {
                dhcpv6_addresses: true,
                dhcpv6_other: false,
            },
        );
        let ra = responder.handle_rs(&RaPrefixSource::Local, None).unwrap();
        assert!(ra.managed);
        assert!(!ra.other_config);
    }

    #[test]
    fn slaac_concatenates_prefix_and_iid() {
        let ra = RouterAdvert {
            prefix: "2001:db8:1::/64".parse().unwrap(),
            managed: false,
            other_config: false,
        };
        assert_eq!(
            slaac_configure(&ra, 0x1).unwrap().to_string(),
            "2001:db8:1::1"
        );
    }

    #[test]
    fn dad_passes_when_undefended() {
        let target: Ipv6Addr = "2001:db8:1::1".parse().unwrap();
        let probe = DadProbe::start(target, SimTime::ZERO);
        assert_eq!(probe.poll(SimTime::from_millis(999)), None);
        assert_eq!(probe.poll(SimTime::from_millis(1000)), Some(Ok(target)));
    }

    #[test]
    fn dad_fails_on_defense() {
        let target: Ipv6Addr = "2001:db8:1::1".parse().unwrap();
        let mut probe = DadProbe::start(target, SimTime::ZERO);
        probe.on_neighbor_advert(target);
        assert_eq!(
            probe.poll(SimTime::from_millis(10)),
            Some(Err(ProvisioningError::DadFailed(target)))
        );
    }

    #[test]
    fn defense_check() {
        let owned: Ipv6Addr = "2001:db8:1::2".parse().unwrap();
        assert!(dad_defends(Some(owned), owned));
        assert!(!dad_defends(Some(owned), "2001:db8:1::3".parse().unwrap()));
        assert!(!dad_defends(None, owned));
    }
}
