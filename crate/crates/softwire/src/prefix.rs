//! IPv4 and IPv6 prefix types used by the provisioning plane and the
//! simulated routing tables.
//!
//! Prefixes are always stored in canonical form (host bits zero); parsing
//! rejects non-canonical input rather than silently masking it.

use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrefixError {
    #[error("prefix length {0} out of range")]
    BadLength(u8),
    #[error("host bits set below prefix length")]
    HostBitsSet,
    #[error("malformed prefix: {0}")]
    Malformed(String),
}

/// An IPv4 prefix in CIDR form, e.g. `198.51.100.0/28`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv4Prefix {
    addr: Ipv4Addr,
    len: u8,
}

impl Ipv4Prefix {
    pub fn new(addr: Ipv4Addr, len: u8) -> Result<Ipv4Prefix, PrefixError> {
        if len > 32 {
            return Err(PrefixError::BadLength(len));
        }
        if u32::from(addr) & host_mask32(len) != 0 {
            return Err(PrefixError::HostBitsSet);
        }
        Ok(Ipv4Prefix { addr, len })
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.addr
    }

    /// The prefix length (the part before the slash).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        u32::from(ip) & !host_mask32(self.len) == u32::from(self.addr)
    }

    pub fn overlaps(&self, other: &Ipv4Prefix) -> bool {
        let len = self.len.min(other.len);
        let mask = !host_mask32(len);
        u32::from(self.addr) & mask == u32::from(other.addr) & mask
    }

    /// The `n`-th subprefix of length `sub_len`, counting up from the
    /// network address. Returns `None` once the pool is exhausted.
    pub fn nth_subnet(&self, sub_len: u8, n: u32) -> Option<Ipv4Prefix> {
        if sub_len < self.len || sub_len > 32 {
            return None;
        }
        let count = 1u64 << (sub_len - self.len);
        if u64::from(n) >= count {
            return None;
        }
        let base = u32::from(self.addr) | (n << (32 - sub_len));
        Some(Ipv4Prefix {
            addr: Ipv4Addr::from(base),
            len: sub_len,
        })
    }

    /// The `n`-th host address inside the prefix (network address is n=0).
    pub fn nth_host(&self, n: u32) -> Option<Ipv4Addr> {
        if self.len == 32 && n > 0 {
            return None;
        }
        if self.len < 32 && u64::from(n) >= 1u64 << (32 - self.len) {
            return None;
        }
        Some(Ipv4Addr::from(u32::from(self.addr) + n))
    }

    /// Netmask form of the prefix length, e.g. /24 -> 255.255.255.0.
    pub fn netmask(&self) -> Ipv4Addr {
        Ipv4Addr::from(!host_mask32(self.len))
    }

    /// Recover a prefix length from a contiguous netmask.
    pub fn len_from_netmask(mask: Ipv4Addr) -> Option<u8> {
        let m = u32::from(mask);
        let len = m.leading_ones() as u8;
        if m == !host_mask32(len) {
            Some(len)
        } else {
            None
        }
    }
}

fn host_mask32(len: u8) -> u32 {
    if len >= 32 {
        0
    } else {
        u32::MAX >> len
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for Ipv4Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Ipv4Prefix, PrefixError> {
        let (addr, len) = split_cidr(s)?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| PrefixError::Malformed(s.to_string()))?;
        Ipv4Prefix::new(addr, len)
    }
}

/// An IPv6 prefix in CIDR form, e.g. `2001:db8:1::/48`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv6Prefix {
    addr: Ipv6Addr,
    len: u8,
}

impl Ipv6Prefix {
    pub fn new(addr: Ipv6Addr, len: u8) -> Result<Ipv6Prefix, PrefixError> {
        if len > 128 {
            return Err(PrefixError::BadLength(len));
        }
        if u128::from(addr) & host_mask128(len) != 0 {
            return Err(PrefixError::HostBitsSet);
        }
        Ok(Ipv6Prefix { addr, len })
    }

    pub fn addr(&self) -> Ipv6Addr {
        self.addr
    }

    /// The prefix length (the part before the slash).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn contains(&self, ip: Ipv6Addr) -> bool {
        u128::from(ip) & !host_mask128(self.len) == u128::from(self.addr)
    }

    pub fn overlaps(&self, other: &Ipv6Prefix) -> bool {
        let len = self.len.min(other.len);
        let mask = !host_mask128(len);
        u128::from(self.addr) & mask == u128::from(other.addr) & mask
    }

    pub fn nth_subnet(&self, sub_len: u8, n: u64) -> Option<Ipv6Prefix> {
        if sub_len < self.len || sub_len > 128 {
            return None;
        }
        let bits = sub_len - self.len;
        if bits < 64 && n >= 1u64 << bits {
            return None;
        }
        let base = u128::from(self.addr) | (u128::from(n) << (128 - sub_len));
        Some(Ipv6Prefix {
            addr: Ipv6Addr::from(base),
            len: sub_len,
        })
    }

    /// Join a /64 prefix with a 64-bit interface identifier, the SLAAC
    /// address construction.
    pub fn with_interface_id(&self, iid: u64) -> Option<Ipv6Addr> {
        if self.len != 64 {
            return None;
        }
        Some(Ipv6Addr::from(u128::from(self.addr) | u128::from(iid)))
    }
}

fn host_mask128(len: u8) -> u128 {
    if len >= 128 {
        0
    } else {
        u128::MAX >> len
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for Ipv6Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Ipv6Prefix, PrefixError> {
        let (addr, len) = split_cidr(s)?;
        let addr: Ipv6Addr = addr
            .parse()
            .map_err(|_| PrefixError::Malformed(s.to_string()))?;
        Ipv6Prefix::new(addr, len)
    }
}

fn split_cidr(s: &str) -> Result<(&str, u8), PrefixError> {
    let (addr, len) = s
        .split_once('/')
        .ok_or_else(|| PrefixError::Malformed(s.to_string()))?;
    let len: u8 = len
        .parse()
        .map_err(|_| PrefixError::Malformed(s.to_string()))?;
    Ok((addr, len))
}

macro_rules! serde_as_string {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

serde_as_string!(Ipv4Prefix);
serde_as_string!(Ipv6Prefix);
