//! Scenario configuration and the end-to-end runner.
//!
//! A scenario names the deployment shape - which family is carried over
//! which, whether the initiator is a host or a router, what sits on the
//! path - plus seeds, pools, users and traffic. Eight canonical shapes
//! are built in, covering both encapsulation directions with host and
//! router initiators, directly attached or behind a translating gateway.
//!
//! [`Runner::run`] drives the full pipeline: L2TPv2 establishment, PPP
//! with its one NCP, provisioning, an optional traffic phase, scenario
//! postcondition checks and teardown, emitting the trace and report the
//! CLI and the test suites consume.

pub mod endpoint;
pub mod runner;

use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::aaa::{AccountingRecord, UserProfile};
use crate::netsim::Filtering;
use crate::provisioning::{ProvisioningRecord, RibEntry, StablePolicy};
use crate::trace::Trace;
use crate::tunnel::{KeepaliveConfig, TunnelStats};
use crate::Af;

pub use runner::Runner;

/// Where the concentrator sources its replies from. Anything but the
/// original tuple is NOT RECOMMENDED precisely because of NAT filtering;
/// the alternate modes exist to demonstrate that on the simulated NATs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScReplySource {
    /// Reply from the tuple the initiator targeted.
    #[default]
    #[serde(rename = "original")]
    Original,
    /// Same address, different UDP port.
    #[serde(rename = "alternate-port")]
    AlternatePort,
    /// Different address and port.
    #[serde(rename = "alternate-address-port")]
    AlternateAddressPort,
}

/// NAT on the access path, in scenario-config form.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NatScenario {
    pub filtering: Filtering,
    #[serde(default = "default_binding_ttl")]
    pub binding_ttl_secs: u64,
}

fn default_binding_ttl() -> u64 {
    120
}

/// Access network parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkScenario {
    #[serde(default = "default_delay_ms")]
    pub delay_ms: u64,
    #[serde(default)]
    pub loss_rate: f64,
    #[serde(default)]
    pub jitter_ms: u64,
    #[serde(default = "default_link_mtu")]
    pub link_mtu: u32,
    #[serde(default)]
    pub nat: Option<NatScenario>,
}

fn default_delay_ms() -> u64 {
    10
}

fn default_link_mtu() -> u32 {
    1500
}

impl Default for NetworkScenario {
    fn default() -> NetworkScenario {
        NetworkScenario {
            delay_ms: default_delay_ms(),
            loss_rate: 0.0,
            jitter_ms: 0,
            link_mtu: default_link_mtu(),
            nat: None,
        }
    }
}

/// Initiator-side identity and policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiScenario {
    #[serde(default = "default_si_host")]
    pub host_name: String,
    #[serde(default = "default_user")]
    pub user: String,
    #[serde(default = "default_secret")]
    pub secret: String,
    /// Propose address/control-field compression during LCP.
    #[serde(default)]
    pub propose_acfc: bool,
}

fn default_si_host() -> String {
    "si.example".to_string()
}

fn default_user() -> String {
    "user1".to_string()
}

fn default_secret() -> String {
    "pw1".to_string()
}

impl Default for SiScenario {
    fn default() -> SiScenario {
        SiScenario {
            host_name: default_si_host(),
            user: default_user(),
            secret: default_secret(),
            propose_acfc: false,
        }
    }
}

/// Concentrator-side identity and policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScScenario {
    #[serde(default = "default_sc_host")]
    pub host_name: String,
    /// Demand CHAP from the initiator.
    #[serde(default = "default_true")]
    pub chap: bool,
    /// Shared secret enabling L2TP tunnel authentication.
    #[serde(default)]
    pub tunnel_secret: Option<String>,
    /// Accept an ACFC proposal instead of Configure-Rejecting it.
    #[serde(default)]
    pub accept_acfc: bool,
    /// Set the RA managed flag and serve addresses over DHCPv6.
    #[serde(default)]
    pub dhcpv6_addresses: bool,
    #[serde(default)]
    pub reply_source: ScReplySource,
    #[serde(default)]
    pub stable_policy: StablePolicy,
}

fn default_sc_host() -> String {
    "sc.example".to_string()
}

fn default_true() -> bool {
    true
}

impl Default for ScScenario {
    fn default() -> ScScenario {
        ScScenario {
            host_name: default_sc_host(),
            chap: true,
            tunnel_secret: None,
            accept_acfc: false,
            dhcpv6_addresses: false,
            reply_source: ScReplySource::Original,
            stable_policy: StablePolicy::PerConcentrator,
        }
    }
}

/// A named endpoint-prefix pool, selectable via the Framed-IPv6-Pool
/// attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedPool {
    pub name: String,
    pub prefix: String,
}

/// Address and prefix pools on the concentrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolScenario {
    #[serde(default = "default_v6_endpoint_pool")]
    pub v6_endpoint: String,
    #[serde(default)]
    pub v6_named: Vec<NamedPool>,
    #[serde(default = "default_v6_delegation_pool")]
    pub v6_delegation: String,
    #[serde(default = "default_v6_delegation_len")]
    pub v6_delegation_len: u8,
    #[serde(default = "default_v4_endpoint_pool")]
    pub v4_endpoint: String,
    #[serde(default = "default_v4_delegation_pool")]
    pub v4_delegation: String,
    #[serde(default = "default_v4_delegation_len")]
    pub v4_delegation_len: u8,
    #[serde(default = "default_dns_v6")]
    pub dns_v6: Vec<String>,
    #[serde(default = "default_dns_v4")]
    pub dns_v4: Vec<String>,
}

fn default_v6_endpoint_pool() -> String {
    "2001:db8:1::/48".to_string()
}

fn default_v6_delegation_pool() -> String {
    "2001:db8:100::/40".to_string()
}

fn default_v6_delegation_len() -> u8 {
    48
}

fn default_v4_endpoint_pool() -> String {
    "198.51.100.0/24".to_string()
}

fn default_v4_delegation_pool() -> String {
    "100.64.0.0/16".to_string()
}

fn default_v4_delegation_len() -> u8 {
    24
}

fn default_dns_v6() -> Vec<String> {
    vec!["2001:db8:53::53".to_string()]
}

fn default_dns_v4() -> Vec<String> {
    vec!["192.0.2.53".to_string()]
}

impl Default for PoolScenario {
    fn default() -> PoolScenario {
        PoolScenario {
            v6_endpoint: default_v6_endpoint_pool(),
            v6_named: Vec::new(),
            v6_delegation: default_v6_delegation_pool(),
            v6_delegation_len: default_v6_delegation_len(),
            v4_endpoint: default_v4_endpoint_pool(),
            v4_delegation: default_v4_delegation_pool(),
            v4_delegation_len: default_v4_delegation_len(),
            dns_v6: default_dns_v6(),
            dns_v4: default_dns_v4(),
        }
    }
}

/// Payload traffic exchanged after provisioning completes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrafficScenario {
    #[serde(default = "default_traffic_packets")]
    pub packets_si_to_sc: u32,
    #[serde(default)]
    pub packets_sc_to_si: u32,
    #[serde(default = "default_packet_bytes")]
    pub packet_bytes: u32,
}

fn default_traffic_packets() -> u32 {
    4
}

fn default_packet_bytes() -> u32 {
    100
}

impl Default for TrafficScenario {
    fn default() -> TrafficScenario {
        TrafficScenario {
            packets_si_to_sc: default_traffic_packets(),
            packets_sc_to_si: 0,
            packet_bytes: default_packet_bytes(),
        }
    }
}

/// The role the home equipment plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiRole {
    /// A single dual-stack host terminates the softwire.
    #[serde(rename = "host")]
    Host,
    /// A router terminates it and needs a prefix for the network behind.
    #[serde(rename = "router")]
    Router,
}

/// One complete scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub transport_af: Af,
    pub payload_af: Af,
    pub si_role: SiRole,
    /// Mandatory: every run is reproducible from its file.
    pub seed: u64,
    #[serde(default)]
    pub network: NetworkScenario,
    #[serde(default)]
    pub si: SiScenario,
    #[serde(default)]
    pub sc: ScScenario,
    #[serde(default)]
    pub keepalive: KeepaliveConfig,
    #[serde(default)]
    pub pools: PoolScenario,
    #[serde(default)]
    pub traffic: TrafficScenario,
    /// Extra profiles besides the one synthesized from `si`.
    #[serde(default)]
    pub aaa_users: Vec<UserProfile>,
    /// Exercise the wrong-family rejection after provisioning.
    #[serde(default = "default_true")]
    pub check_wrong_af: bool,
}

impl ScenarioConfig {
    /// A named scenario with its canonical shape. Behind-gateway variants
    /// default to an endpoint-independent NAT on the path.
    pub fn named(id: &str, seed: u64) -> Option<ScenarioConfig> {
        let (transport_af, payload_af, si_role, nat, name) = match id {
            "3.1.1" => (
                Af::V4,
                Af::V6,
                SiRole::Host,
                false,
                "host CPE initiator, IPv6 over IPv4",
            ),
            "3.1.2" => (
                Af::V4,
                Af::V6,
                SiRole::Router,
                false,
                "router CPE initiator, IPv6 over IPv4",
            ),
            "3.1.3" => (
                Af::V4,
                Af::V6,
                SiRole::Host,
                true,
                "host behind CPE initiator, IPv6 over IPv4",
            ),
            "3.1.4" => (
                Af::V4,
                Af::V6,
                SiRole::Router,
                true,
                "router behind CPE initiator, IPv6 over IPv4",
            ),
            "3.2.1" => (
                Af::V6,
                Af::V4,
                SiRole::Host,
                false,
                "host CPE initiator, IPv4 over IPv6",
            ),
            "3.2.2" => (
                Af::V6,
                Af::V4,
                SiRole::Router,
                false,
                "router CPE initiator, IPv4 over IPv6",
            ),
            "3.2.3" => (
                Af::V6,
                Af::V4,
                SiRole::Host,
                true,
                "host behind CPE initiator, IPv4 over IPv6",
            ),
            "3.2.4" => (
                Af::V6,
                Af::V4,
                SiRole::Router,
                true,
                "router behind CPE initiator, IPv4 over IPv6",
            ),
            _ => return None,
        };
        Some(ScenarioConfig {
            id: id.to_string(),
            name: name.to_string(),
            transport_af,
            payload_af,
            si_role,
            seed,
            network: NetworkScenario {
                nat: nat.then_some(NatScenario {
                    filtering: Filtering::EndpointIndependent,
                    binding_ttl_secs: default_binding_ttl(),
                }),
                ..NetworkScenario::default()
            },
            si: SiScenario::default(),
            sc: ScScenario::default(),
            keepalive: KeepaliveConfig::default(),
            pools: PoolScenario::default(),
            traffic: TrafficScenario::default(),
            aaa_users: Vec::new(),
            check_wrong_af: true,
        })
    }

    pub const NAMED_IDS: [&'static str; 8] = [
        "3.1.1", "3.1.2", "3.1.3", "3.1.4", "3.2.1", "3.2.2", "3.2.3", "3.2.4",
    ];

    /// Remove or replace the NAT regardless of the scenario default.
    pub fn set_nat(&mut self, filtering: Option<Filtering>) {
        self.network.nat = filtering.map(|f| NatScenario {
            filtering: f,
            binding_ttl_secs: default_binding_ttl(),
        });
    }

    /// Fixed address plan per transport family. The initiator moves to a
    /// private address when a NAT sits on the path.
    pub fn si_ip(&self) -> IpAddr {
        match (self.transport_af, self.network.nat.is_some()) {
            (Af::V4, false) => "192.0.2.1".parse().unwrap(),
            (Af::V4, true) => "10.0.0.2".parse().unwrap(),
            (Af::V6, false) => "2001:db8:ffff::1".parse().unwrap(),
            (Af::V6, true) => "fd00:cafe::2".parse().unwrap(),
        }
    }

    pub fn sc_ip(&self) -> IpAddr {
        match self.transport_af {
            Af::V4 => "192.0.2.10".parse().unwrap(),
            Af::V6 => "2001:db8:ffff::2".parse().unwrap(),
        }
    }

    /// Second concentrator address for the alternate-source reply mode.
    pub fn sc_alt_ip(&self) -> IpAddr {
        match self.transport_af {
            Af::V4 => "192.0.2.11".parse().unwrap(),
            Af::V6 => "2001:db8:ffff::3".parse().unwrap(),
        }
    }

    pub fn nat_external_ip(&self) -> IpAddr {
        match self.transport_af {
            Af::V4 => "203.0.113.1".parse().unwrap(),
            Af::V6 => "2001:db8:fffe::1".parse().unwrap(),
        }
    }

    /// The user directory: the initiator's own credentials plus extras.
    pub fn user_profiles(&self) -> Vec<UserProfile> {
        let mut profiles = vec![UserProfile {
            user: self.si.user.clone(),
            secret: self.si.secret.clone(),
            attributes: Default::default(),
        }];
        for extra in &self.aaa_users {
            if let Some(existing) = profiles.iter_mut().find(|p| p.user == extra.user) {
                *existing = extra.clone();
            } else {
                profiles.push(extra.clone());
            }
        }
        profiles
    }
}

/// Everything a run leaves behind.
#[derive(Debug)]
pub struct RunReport {
    pub exit_code: i32,
    /// Name of the first failing step, when the run did not succeed.
    pub failed_step: Option<String>,
    /// Steps completed, in order.
    pub steps: Vec<String>,
    pub trace: Trace,
    pub si_stats: TunnelStats,
    pub sc_stats: TunnelStats,
    pub si_record: ProvisioningRecord,
    pub sc_record: ProvisioningRecord,
    pub si_rib: Vec<RibEntry>,
    pub sc_rib: Vec<RibEntry>,
    pub accounting: Vec<AccountingRecord>,
    /// Stable store after the run, for reconnection tests and persistence.
    pub stable_store: crate::provisioning::StableStore,
}

impl RunReport {
    pub fn accounting_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.accounting {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}
