//! Simulated routing information base.
//!
//! One RIB per endpoint. The initiator holds a default route through the
//! softwire while the session is up; the concentrator holds one route per
//! delegated prefix with the initiator as next hop. Overlapping delegated
//! prefixes pointing at different softwires are refused.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::prefix::{Ipv4Prefix, Ipv6Prefix};
use crate::Af;

use super::ProvisioningError;

/// A route target of either family, including the default routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoutePrefix {
    V4(Ipv4Prefix),
    V6(Ipv6Prefix),
}

impl RoutePrefix {
    pub fn af(&self) -> Af {
        match self {
            RoutePrefix::V4(_) => Af::V4,
            RoutePrefix::V6(_) => Af::V6,
        }
    }

    pub fn default_route(af: Af) -> RoutePrefix {
        match af {
            Af::V4 => RoutePrefix::V4("0.0.0.0/0".parse().unwrap()),
            Af::V6 => RoutePrefix::V6("::/0".parse().unwrap()),
        }
    }

    fn overlaps(&self, other: &RoutePrefix) -> bool {
        match (self, other) {
            (RoutePrefix::V4(a), RoutePrefix::V4(b)) => a.overlaps(b),
            (RoutePrefix::V6(a), RoutePrefix::V6(b)) => a.overlaps(b),
            _ => false,
        }
    }
}

impl fmt::Display for RoutePrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoutePrefix::V4(p) => write!(f, "{p}"),
            RoutePrefix::V6(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouteOrigin {
    /// The softwire default route.
    #[serde(rename = "default")]
    Default,
    /// Installed for a delegated prefix.
    #[serde(rename = "delegated")]
    Delegated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RibEntry {
    pub prefix: RoutePrefix,
    pub next_hop: String,
    pub origin: RouteOrigin,
}

impl fmt::Display for RibEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} via {} ({})",
            self.prefix,
            self.next_hop,
            match self.origin {
                RouteOrigin::Default => "default",
                RouteOrigin::Delegated => "delegated",
            }
        )
    }
}

#[derive(Debug, Default)]
pub struct Rib {
    entries: Vec<RibEntry>,
}

impl Rib {
    pub fn new() -> Rib {
        Rib::default()
    }

    /// Install a route. Re-installing the same (prefix, next hop) is
    /// idempotent; a delegated prefix overlapping one routed to a
    /// different softwire is a conflict.
    pub fn inject(
        &mut self,
        prefix: RoutePrefix,
        next_hop: &str,
        origin: RouteOrigin,
    ) -> Result<(), ProvisioningError> {
        if let Some(existing) = self.entries.iter().find(|e| e.prefix == prefix) {
            if existing.next_hop == next_hop {
                return Ok(());
            }
            return Err(ProvisioningError::RouteConflict {
                prefix: prefix.to_string(),
                existing_next_hop: existing.next_hop.clone(),
            });
        }
        if origin == RouteOrigin::Delegated {
            if let Some(existing) = self.entries.iter().find(|e| {
                e.origin == RouteOrigin::Delegated
                    && e.next_hop != next_hop
                    && e.prefix.overlaps(&prefix)
            }) {
                return Err(ProvisioningError::RouteConflict {
                    prefix: prefix.to_string(),
                    existing_next_hop: existing.next_hop.clone(),
                });
            }
        }
        self.entries.push(RibEntry {
            prefix,
            next_hop: next_hop.to_string(),
            origin,
        });
        Ok(())
    }

    /// Drop every route through `next_hop`; returns what was removed so
    /// the caller can trace it.
    pub fn remove_next_hop(&mut self, next_hop: &str) -> Vec<RibEntry> {
        let (gone, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|e| e.next_hop == next_hop);
        self.entries = kept;
        gone
    }

    pub fn has_default(&self, af: Af) -> bool {
        let default = RoutePrefix::default_route(af);
        self.entries.iter().any(|e| e.prefix == default)
    }

    pub fn lookup_exact(&self, prefix: RoutePrefix) -> Option<&RibEntry> {
        self.entries.iter().find(|e| e.prefix == prefix)
    }

    pub fn entries(&self) -> &[RibEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
