//! Stable address store: a reconnecting user gets the same addresses and
//! prefixes from the same concentrator.
//!
//! Backed by an append-only JSON-lines log keyed by (user, concentrator);
//! the newest line for a key wins on load. Moving to a different
//! concentrator yields fresh assignments unless the operator opts into
//! sharing; a roaming/temporary service keeps no state at all.

use std::collections::BTreeMap;
use std::net::{Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

use crate::prefix::{Ipv4Prefix, Ipv6Prefix};

/// What gets remembered per (user, concentrator).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_v6: Option<Ipv6Addr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_v4: Option<Ipv4Addr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delegated_v6: Option<Ipv6Prefix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delegated_v4: Option<Ipv4Prefix>,
}

/// Stability policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StablePolicy {
    /// Same assignments at the same concentrator (the default).
    #[default]
    #[serde(rename = "per-concentrator")]
    PerConcentrator,
    /// Same assignments across all concentrators (costs routing-table
    /// fragmentation, buys mobility).
    #[serde(rename = "shared")]
    Shared,
    /// Roaming service: always a fresh, temporary assignment.
    #[serde(rename = "temporary")]
    Temporary,
}

/// One log line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StableRecord {
    user: String,
    sc_id: String,
    #[serde(flatten)]
    assignment: Assignment,
    time_ms: u64,
}

#[derive(Debug, Default)]
pub struct StableStore {
    policy: StablePolicy,
    log: Vec<StableRecord>,
    current: BTreeMap<(String, String), Assignment>,
}

impl StableStore {
    pub fn new(policy: StablePolicy) -> StableStore {
        StableStore {
            policy,
            log: Vec::new(),
            current: BTreeMap::new(),
        }
    }

    pub fn policy(&self) -> StablePolicy {
        self.policy
    }

    /// Assignment to reuse for a reconnecting user, per policy.
    pub fn lookup(&self, user: &str, sc_id: &str) -> Option<Assignment> {
        match self.policy {
            StablePolicy::Temporary => None,
            StablePolicy::PerConcentrator => self
                .current
                .get(&(user.to_string(), sc_id.to_string()))
                .copied(),
            StablePolicy::Shared => self
                .current
                .get(&(user.to_string(), sc_id.to_string()))
                .copied()
                .or_else(|| {
                    self.current
                        .iter()
                        .find(|((u, _), _)| u == user)
                        .map(|(_, a)| *a)
                }),
        }
    }

    /// Record the assignment handed out this session.
    pub fn commit(&mut self, user: &str, sc_id: &str, assignment: Assignment, time_ms: u64) {
        if self.policy == StablePolicy::Temporary {
            return;
        }
        self.log.push(StableRecord {
            user: user.to_string(),
            sc_id: sc_id.to_string(),
            assignment,
            time_ms,
        });
        self.current
            .insert((user.to_string(), sc_id.to_string()), assignment);
    }

    /// Every current assignment held at one concentrator, for pool
    /// pre-reservation when the concentrator restarts.
    pub fn assignments_at(&self, sc_id: &str) -> Vec<(&str, &Assignment)> {
        self.current
            .iter()
            .filter(|((_, sc), _)| sc == sc_id)
            .map(|((user, _), a)| (user.as_str(), a))
            .collect()
    }

    /// Serialize the full append-only log.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.log {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Load a log; later lines supersede earlier ones for the same key.
    pub fn load_jsonl(policy: StablePolicy, input: &str) -> Result<StableStore, serde_json::Error> {
        let mut store = StableStore::new(policy);
        for line in input.lines().filter(|l| !l.trim().is_empty()) {
            let record: StableRecord = serde_json::from_str(line)?;
            store.current.insert(
                (record.user.clone(), record.sc_id.clone()),
                record.assignment,
            );
            store.log.push(record);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment_a() -> Assignment {
        Assignment {
            endpoint_v6: Some("2001:db8:1::1".parse().unwrap()),
            delegated_v6: Some("2001:db8:100::/48".parse().unwrap()),
            ..Assignment::default()
        }
    }

    #[test]
    fn reconnect_same_sc_same_assignment() {
        let mut store = StableStore::new(StablePolicy::PerConcentrator);
        store.commit("user1", "sc1", assignment_a(), 1000);
        assert_eq!(store.lookup("user1", "sc1"), Some(assignment_a()));
    }

    #[test]
    fn different_sc_fresh_by_default() {
        let mut store = StableStore::new(StablePolicy::PerConcentrator);
        store.commit("user1", "sc1", assignment_a(), 1000);
        assert_eq!(store.lookup("user1", "sc2"), None);
    }

    #[test]
    fn shared_policy_crosses_concentrators() {
        let mut store = StableStore::new(StablePolicy::Shared);
        store.commit("user1", "sc1", assignment_a(), 1000);
        assert_eq!(store.lookup("user1", "sc2"), Some(assignment_a()));
    }

    #[test]
    fn temporary_policy_remembers_nothing() {
        let mut store = StableStore::new(StablePolicy::Temporary);
        store.commit("user1", "sc1", assignment_a(), 1000);
        assert_eq!(store.lookup("user1", "sc1"), None);
        assert!(store.to_jsonl().is_empty());
    }

    #[test]
    fn jsonl_roundtrip_latest_wins() {
        let mut store = StableStore::new(StablePolicy::PerConcentrator);
        store.commit("user1", "sc1", Assignment::default(), 1000);
        store.commit("user1", "sc1", assignment_a(), 2000);
        let text = store.to_jsonl();
        assert_eq!(text.lines().count(), 2, "append-only log keeps history");
        let loaded = StableStore::load_jsonl(StablePolicy::PerConcentrator, &text).unwrap();
        assert_eq!(loaded.lookup("user1", "sc1"), Some(assignment_a()));
    }
}
