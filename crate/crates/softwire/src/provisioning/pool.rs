//! Deterministic address and prefix pools: ascending first-fit, with
//! reservation so stable or AAA-pinned assignments survive restarts.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use crate::prefix::{Ipv4Prefix, Ipv6Prefix};

use super::{
    ProvisioningError, V4_DELEGATION_MAX_LEN, V4_DELEGATION_MIN_LEN, V6_DELEGATION_MAX_LEN,
    V6_DELEGATION_MIN_LEN,
};

/// Pool of fixed-length IPv6 subprefixes carved out of a base prefix.
#[derive(Debug, Clone)]
pub struct V6PrefixPool {
    base: Ipv6Prefix,
    sub_len: u8,
    next: u64,
    taken: BTreeSet<Ipv6Prefix>,
}

impl V6PrefixPool {
    /// Pool handing out endpoint /64s (no delegation length bounds).
    pub fn endpoint(base: Ipv6Prefix) -> Result<V6PrefixPool, ProvisioningError> {
        if base.len() > 64 {
            return Err(ProvisioningError::LengthOutOfBounds {
                len: base.len(),
                min: 0,
                max: 64,
            });
        }
        Ok(V6PrefixPool {
            base,
            sub_len: 64,
            next: 0,
            taken: BTreeSet::new(),
        })
    }

    /// Pool delegating prefixes of `sub_len`, which must sit in /48../64.
    pub fn delegation(base: Ipv6Prefix, sub_len: u8) -> Result<V6PrefixPool, ProvisioningError> {
        if !(V6_DELEGATION_MIN_LEN..=V6_DELEGATION_MAX_LEN).contains(&sub_len) {
            return Err(ProvisioningError::LengthOutOfBounds {
                len: sub_len,
                min: V6_DELEGATION_MIN_LEN,
                max: V6_DELEGATION_MAX_LEN,
            });
        }
        if base.len() > sub_len {
            return Err(ProvisioningError::LengthOutOfBounds {
                len: base.len(),
                min: 0,
                max: sub_len,
            });
        }
        Ok(V6PrefixPool {
            base,
            sub_len,
            next: 0,
            taken: BTreeSet::new(),
        })
    }

    pub fn sub_len(&self) -> u8 {
        self.sub_len
    }

    /// Next free subprefix, ascending.
    pub fn allocate(&mut self) -> Result<Ipv6Prefix, ProvisioningError> {
        loop {
            let candidate = self
                .base
                .nth_subnet(self.sub_len, self.next)
                .ok_or(ProvisioningError::NoPrefixAvailable)?;
            self.next += 1;
            if self.taken.insert(candidate) {
                return Ok(candidate);
            }
        }
    }

    /// Pin a specific prefix (stable reconnection, AAA override). Fine if
    /// it lies outside the base; then there is nothing to collide with.
    pub fn reserve(&mut self, prefix: Ipv6Prefix) {
        self.taken.insert(prefix);
    }

    pub fn is_taken(&self, prefix: &Ipv6Prefix) -> bool {
        self.taken.contains(prefix)
    }
}

/// Pool of fixed-length IPv4 subprefixes for delegation.
#[derive(Debug, Clone)]
pub struct V4PrefixPool {
    base: Ipv4Prefix,
    default_len: u8,
    next: u32,
    taken: BTreeSet<Ipv4Prefix>,
}

impl V4PrefixPool {
    pub fn delegation(
        base: Ipv4Prefix,
        default_len: u8,
    ) -> Result<V4PrefixPool, ProvisioningError> {
        if !(V4_DELEGATION_MIN_LEN..=V4_DELEGATION_MAX_LEN).contains(&default_len) {
            return Err(ProvisioningError::LengthOutOfBounds {
                len: default_len,
                min: V4_DELEGATION_MIN_LEN,
                max: V4_DELEGATION_MAX_LEN,
            });
        }
        if base.len() > default_len {
            return Err(ProvisioningError::LengthOutOfBounds {
                len: base.len(),
                min: 0,
                max: default_len,
            });
        }
        Ok(V4PrefixPool {
            base,
            default_len,
            next: 0,
            taken: BTreeSet::new(),
        })
    }

    pub fn default_len(&self) -> u8 {
        self.default_len
    }

    /// Allocate at the default length, or at the client's requested
    /// length when it names one it supports.
    pub fn allocate(&mut self, requested_len: Option<u8>) -> Result<Ipv4Prefix, ProvisioningError> {
        let len = match requested_len {
            None | Some(0) => self.default_len,
            Some(len) => {
                if !(V4_DELEGATION_MIN_LEN..=V4_DELEGATION_MAX_LEN).contains(&len)
                    || len < self.base.len()
                {
                    return Err(ProvisioningError::UnsupportedLength(len));
                }
                len
            }
        };
        // Ascending scan at the chosen length; taken prefixes of any
        // length block overlapping candidates.
        let count = 1u64 << (len - self.base.len());
        let mut n = if len == self.default_len {
            self.next
        } else {
            0
        };
        while u64::from(n) < count {
            let candidate = self
                .base
                .nth_subnet(len, n)
                .ok_or(ProvisioningError::NoPrefixAvailable)?;
            n += 1;
            let overlapping = self.taken.iter().any(|t| t.overlaps(&candidate));
            if !overlapping {
                self.taken.insert(candidate);
                if len == self.default_len {
                    self.next = n;
                }
                return Ok(candidate);
            }
        }
        Err(ProvisioningError::NoPrefixAvailable)
    }

    /// Re-delegate a specific prefix if it is still free (renewal hint).
    pub fn try_reserve(&mut self, prefix: Ipv4Prefix) -> bool {
        if self
            .taken
            .iter()
            .any(|t| t != &prefix && t.overlaps(&prefix))
        {
            return false;
        }
        self.taken.insert(prefix);
        true
    }
}

/// Pool of IPv4 host addresses for PPP endpoints, ascending from the
/// first host, skipping reserved addresses (the concentrator's own).
#[derive(Debug, Clone)]
pub struct V4HostPool {
    prefix: Ipv4Prefix,
    next: u32,
    taken: BTreeSet<Ipv4Addr>,
}

impl V4HostPool {
    pub fn new(prefix: Ipv4Prefix) -> V4HostPool {
        V4HostPool {
            prefix,
            next: 1, // skip the network address
            taken: BTreeSet::new(),
        }
    }

    pub fn allocate(&mut self) -> Result<Ipv4Addr, ProvisioningError> {
        loop {
            let candidate = self
                .prefix
                .nth_host(self.next)
                .ok_or(ProvisioningError::PoolExhausted)?;
            self.next += 1;
            if self.taken.insert(candidate) {
                return Ok(candidate);
            }
        }
    }

    pub fn reserve(&mut self, addr: Ipv4Addr) {
        self.taken.insert(addr);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v6_delegation_ascending_order() {
        let mut pool = V6PrefixPool::delegation("2001:db8:100::/40".parse().unwrap(), 48).unwrap();
        assert_eq!(pool.allocate().unwrap().to_string(), "2001:db8:100::/48");
        assert_eq!(pool.allocate().unwrap().to_string(), "2001:db8:101::/48");
    }

    #[test]
    fn v6_delegation_length_bounds_enforced() {
        let base: Ipv6Prefix = "2001:db8::/32".parse().unwrap();
        assert!(V6PrefixPool::delegation(base, 47).is_err());
        assert!(V6PrefixPool::delegation(base, 65).is_err());
        assert!(V6PrefixPool::delegation(base, 48).is_ok());
        assert!(V6PrefixPool::delegation(base, 64).is_ok());
    }

    #[test]
    fn v4_delegation_length_bounds_enforced() {
        let base: Ipv4Prefix = "100.64.0.0/10".parse().unwrap();
        assert!(V4PrefixPool::delegation(base, 7).is_err());
        assert!(V4PrefixPool::delegation(base, 31).is_err());
        assert!(V4PrefixPool::delegation(base, 24).is_ok());
    }

    #[test]
    fn v4_requested_length_validated() {
        let mut pool = V4PrefixPool::delegation("100.64.0.0/16".parse().unwrap(), 24).unwrap();
        assert_eq!(
            pool.allocate(Some(31)),
            Err(ProvisioningError::UnsupportedLength(31))
        );
        // Shorter than the base is impossible to carve.
        assert_eq!(
            pool.allocate(Some(12)),
            Err(ProvisioningError::UnsupportedLength(12))
        );
        let p28 = pool.allocate(Some(28)).unwrap();
        assert_eq!(p28.len(), 28);
    }

    #[test]
    fn v4_renewal_reservation() {
        let mut pool = V4PrefixPool::delegation("100.64.0.0/16".parse().unwrap(), 24).unwrap();
        let prior: Ipv4Prefix = "100.64.5.0/24".parse().unwrap();
        assert!(pool.try_reserve(prior));
        // The same prefix can be re-reserved by its owner on renewal.
        assert!(pool.try_reserve(prior));
        // A fresh allocation cannot collide with it.
        for _ in 0..10 {
            assert!(!pool.allocate(None).unwrap().overlaps(&prior));
        }
    }

    #[test]
    fn exhaustion() {
        let mut pool = V4PrefixPool::delegation("100.64.0.0/23".parse().unwrap(), 24).unwrap();
        pool.allocate(None).unwrap();
        pool.allocate(None).unwrap();
        assert_eq!(
            pool.allocate(None),
            Err(ProvisioningError::NoPrefixAvailable)
        );
    }

    #[test]
    fn host_pool_skips_reserved() {
        let mut pool = V4HostPool::new("198.51.100.0/29".parse().unwrap());
        pool.reserve("198.51.100.1".parse().unwrap());
        assert_eq!(pool.allocate().unwrap().to_string(), "198.51.100.2");
        assert_eq!(pool.allocate().unwrap().to_string(), "198.51.100.3");
    }

    #[test]
    fn endpoint_pool_64s() {
        let mut pool = V6PrefixPool::endpoint("2001:db8:1::/48".parse().unwrap()).unwrap();
        assert_eq!(pool.allocate().unwrap().to_string(), "2001:db8:1::/64");
        pool.reserve("2001:db8:1:1::/64".parse().unwrap());
        assert_eq!(pool.allocate().unwrap().to_string(), "2001:db8:1:2::/64");
    }
}
