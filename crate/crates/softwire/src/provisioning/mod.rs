//! Address and prefix provisioning over an established softwire: router
//! advertisements and SLAAC with duplicate address detection, DHCPv6
//! prefix delegation, DHCPv4 subnet allocation, route injection into
//! simulated RIBs, the address-scope combination tables and the stable
//! address store.

pub mod combos;
pub mod dhcpv4;
pub mod dhcpv6;
pub mod ndp;
pub mod pool;
pub mod rib;
pub mod stable;

use std::net::{Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prefix::{Ipv4Prefix, Ipv6Prefix};

pub use combos::{validate_combo, Combo, ComboVerdict, V4Scope, V6PrefixScope, V6Scope, Verdict};
pub use rib::{Rib, RibEntry, RouteOrigin, RoutePrefix};
pub use stable::{Assignment, StablePolicy, StableStore};

/// Delegated IPv6 prefixes must be /48../64.
pub const V6_DELEGATION_MIN_LEN: u8 = 48;
pub const V6_DELEGATION_MAX_LEN: u8 = 64;
/// Delegated IPv4 prefixes must be /8../30.
pub const V4_DELEGATION_MIN_LEN: u8 = 8;
pub const V4_DELEGATION_MAX_LEN: u8 = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProvisioningError {
    #[error("no prefix available")]
    NoPrefixAvailable,
    #[error("address pool exhausted")]
    PoolExhausted,
    #[error("duplicate address detected for {0}")]
    DadFailed(Ipv6Addr),
    #[error("DUID {duid:#x} is already associated with user {bound}")]
    DuidMismatch { duid: u64, bound: String },
    #[error("route for {prefix} conflicts with existing route via {existing_next_hop}")]
    RouteConflict {
        prefix: String,
        existing_next_hop: String,
    },
    #[error("requested prefix length /{0} is not supported")]
    UnsupportedLength(u8),
    #[error("delegated prefix length /{len} outside /{min}../{max}")]
    LengthOutOfBounds { len: u8, min: u8, max: u8 },
}

/// Everything the provisioning plane handed one user, for reports and the
/// stable store.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisioningRecord {
    pub user: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_v6: Option<Ipv6Addr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_v4: Option<Ipv4Addr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delegated_v6: Option<Ipv6Prefix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delegated_v4: Option<Ipv4Prefix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duid: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub dns_v6: Vec<Ipv6Addr>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub dns_v4: Vec<Ipv4Addr>,
    /// (prefix, next hop) pairs this record put into a RIB.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub routes: Vec<(String, String)>,
}

impl ProvisioningRecord {
    pub fn new(user: &str) -> ProvisioningRecord {
        ProvisioningRecord {
            user: user.to_string(),
            ..ProvisioningRecord::default()
        }
    }

    pub fn assignment(&self) -> Assignment {
        Assignment {
            endpoint_v6: self.endpoint_v6,
            endpoint_v4: self.endpoint_v4,
            delegated_v6: self.delegated_v6,
            delegated_v4: self.delegated_v4,
        }
    }
}

/// Scope of an IPv6 address by its leading bits.
pub fn v6_scope_of(addr: Ipv6Addr) -> V6Scope {
    let bits = u128::from(addr);
    if bits >> 118 == 0x3fa {
        // fe80::/10
        V6Scope::LinkLocal
    } else if bits >> 121 == 0x7e {
        // fc00::/7
        V6Scope::Ula
    } else {
        V6Scope::Global
    }
}

/// Scope of an IPv4 address: the private-use blocks versus everything
/// else.
pub fn v4_scope_of(addr: Ipv4Addr) -> V4Scope {
    if addr.is_private() {
        V4Scope::Private
    } else {
        V4Scope::Public
    }
}
