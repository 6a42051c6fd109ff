//! In-process AAA: a configuration-backed user directory with RADIUS
//! attribute semantics, plus per-session accounting.
//!
//! There is no RADIUS wire protocol here - the concentrator consults the
//! directory directly. What is modeled faithfully is the meaning of the
//! attributes a RADIUS server would return in an Access-Accept and how
//! they steer the PPP and provisioning layers:
//!
//! * Framed-Interface-Id goes into the SC's IPV6CP Configure-Request;
//! * Framed-IPv6-Prefix (else Framed-IPv6-Pool) picks the RA prefix;
//! * Framed-IP-Address alone fixes the IPCP-assigned endpoint address;
//! * Framed-IP-Address plus Framed-IP-Netmask instead delegates an IPv4
//!   prefix routed to the initiator;
//! * Delegated-IPv6-Prefix pins the DHCPv6 IA_PD answer.
//!
//! Accounting produces one Start record when the session comes up and one
//! Stop record at teardown, with traffic split by payload address family.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prefix::{Ipv4Prefix, Ipv6Prefix};
use crate::time::SimTime;
use crate::tunnel::auth::md5_response;
use crate::tunnel::TunnelStats;
use crate::Af;

/// Attribute bundle attached to a user profile, returned on Accept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub framed_interface_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub framed_ipv6_prefix: Option<Ipv6Prefix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub framed_ipv6_pool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub framed_ip_address: Option<Ipv4Addr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub framed_ip_netmask: Option<Ipv4Addr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delegated_ipv6_prefix: Option<Ipv6Prefix>,
}

/// One attribute, for order-independence tests and tooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attribute {
    FramedInterfaceId(u64),
    FramedIpv6Prefix(Ipv6Prefix),
    FramedIpv6Pool(String),
    FramedIpAddress(Ipv4Addr),
    FramedIpNetmask(Ipv4Addr),
    DelegatedIpv6Prefix(Ipv6Prefix),
}

impl AttributeSet {
    /// Collect attributes from any order into the canonical set; later
    /// duplicates win, but directives never depend on arrival order.
    pub fn collect<I: IntoIterator<Item = Attribute>>(attrs: I) -> AttributeSet {
        let mut set = AttributeSet::default();
        for attr in attrs {
            match attr {
                Attribute::FramedInterfaceId(v) => set.framed_interface_id = Some(v),
                Attribute::FramedIpv6Prefix(v) => set.framed_ipv6_prefix = Some(v),
                Attribute::FramedIpv6Pool(v) => set.framed_ipv6_pool = Some(v),
                Attribute::FramedIpAddress(v) => set.framed_ip_address = Some(v),
                Attribute::FramedIpNetmask(v) => set.framed_ip_netmask = Some(v),
                Attribute::DelegatedIpv6Prefix(v) => set.delegated_ipv6_prefix = Some(v),
            }
        }
        set
    }
}

/// One entry in the user directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserProfile {
    pub user: String,
    pub secret: String,
    #[serde(default)]
    pub attributes: AttributeSet,
}

/// Access decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessResult {
    Accept(AttributeSet),
    Reject,
}

/// CHAP material presented by the supplicant.
#[derive(Debug, Clone)]
pub struct ChapCredentials<'a> {
    pub id: u8,
    pub challenge: &'a [u8],
    pub response: &'a [u8],
}

/// Hint attributes the tunnel endpoint includes with the request.
#[derive(Debug, Clone, Copy)]
pub struct TunnelHint {
    /// Tunnel-Type is always L2TP here.
    pub tunnel_medium: Af,
}

/// The in-process directory and decision log.
#[derive(Debug, Default)]
pub struct AaaService {
    users: BTreeMap<String, UserProfile>,
    decision_log: Vec<String>,
}

impl AaaService {
    pub fn new(profiles: impl IntoIterator<Item = UserProfile>) -> AaaService {
        AaaService {
            users: profiles.into_iter().map(|p| (p.user.clone(), p)).collect(),
            decision_log: Vec::new(),
        }
    }

    pub fn decision_log(&self) -> &[String] {
        &self.decision_log
    }

    /// Authenticate a CHAP response against the stored secret. Unknown
    /// users and bad digests both come back Reject.
    pub fn access_request(
        &mut self,
        user: &str,
        credentials: ChapCredentials<'_>,
        hint: TunnelHint,
    ) -> AccessResult {
        let profile = match self.users.get(user) {
            Some(p) => p,
            None => {
                self.decision_log.push(format!(
                    "reject user={user} tunnel-type=l2tp tunnel-medium={} (unknown user)",
                    hint.tunnel_medium
                ));
                return AccessResult::Reject;
            }
        };
        let expected = md5_response(
            credentials.id,
            profile.secret.as_bytes(),
            credentials.challenge,
        );
        if credentials.response != expected {
            self.decision_log.push(format!(
                "reject user={user} tunnel-type=l2tp tunnel-medium={} (bad secret)",
                hint.tunnel_medium
            ));
            return AccessResult::Reject;
        }
        self.decision_log.push(format!(
            "accept user={user} tunnel-type=l2tp tunnel-medium={}",
            hint.tunnel_medium
        ));
        AccessResult::Accept(profile.attributes.clone())
    }
}

/// Where the RA prefix should come from, in precedence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RaPrefixSource {
    /// Framed-IPv6-Prefix: use exactly this.
    Exact(Ipv6Prefix),
    /// Framed-IPv6-Pool: draw from the named pool.
    Pool(String),
    /// Neither attribute present: the SC's local pool.
    Local,
}

/// Concrete steering derived from an attribute set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Directives {
    /// Interface identifier the SC must put in its IPV6CP request.
    pub ipv6cp_iid: Option<u64>,
    pub ra_prefix: RaPrefixSource,
    /// Endpoint address for IPCP (exclusive with `delegated_v4`).
    pub ipcp_address: Option<Ipv4Addr>,
    /// IPv4 prefix to delegate, with a route via the initiator.
    pub delegated_v4: Option<Ipv4Prefix>,
    /// Fixed answer for the DHCPv6 IA_PD delegation.
    pub ia_pd_prefix: Option<Ipv6Prefix>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttributeError {
    #[error("Framed-IP-Netmask without Framed-IP-Address")]
    NetmaskWithoutAddress,
    #[error("Framed-IP-Netmask {0} is not a contiguous mask")]
    BadNetmask(Ipv4Addr),
    #[error("Framed-IP-Address has bits below the netmask")]
    AddressNotPrefixBase,
}

/// Turn an attribute set into directives. Pure: the set has no order, so
/// permuting attribute arrival cannot change the result.
pub fn apply_attributes(attrs: &AttributeSet) -> Result<Directives, AttributeError> {
    let ra_prefix = if let Some(prefix) = attrs.framed_ipv6_prefix {
        RaPrefixSource::Exact(prefix)
    } else if let Some(pool) = &attrs.framed_ipv6_pool {
        RaPrefixSource::Pool(pool.clone())
    } else {
        RaPrefixSource::Local
    };

    // Netmask present turns the address into a delegated prefix; absent,
    // the address is the endpoint address. The two modes are exclusive.
    let (ipcp_address, delegated_v4) = match (attrs.framed_ip_address, attrs.framed_ip_netmask) {
        (None, None) => (None, None),
        (Some(addr), None) => (Some(addr), None),
        (None, Some(_)) => return Err(AttributeError::NetmaskWithoutAddress),
        (Some(addr), Some(mask)) => {
            let len = Ipv4Prefix::len_from_netmask(mask).ok_or(AttributeError::BadNetmask(mask))?;
            let prefix =
                Ipv4Prefix::new(addr, len).map_err(|_| AttributeError::AddressNotPrefixBase)?;
            (None, Some(prefix))
        }
    };

    Ok(Directives {
        ipv6cp_iid: attrs.framed_interface_id,
        ra_prefix,
        ipcp_address,
        delegated_v4,
        ia_pd_prefix: attrs.delegated_ipv6_prefix,
    })
}

/// Accounting record kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcctKind {
    #[serde(rename = "start")]
    Start,
    #[serde(rename = "stop")]
    Stop,
}

/// One accounting record, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountingRecord {
    pub kind: AcctKind,
    pub user: String,
    pub time_ms: u64,
    pub tunnel_type: String,
    pub tunnel_medium: Af,
    pub local_tunnel_id: u16,
    pub remote_tunnel_id: u16,
    /// Session duration in whole seconds; Stop records only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_secs: Option<u64>,
    pub v4_packets_in: u64,
    pub v4_packets_out: u64,
    pub v4_octets_in: u64,
    pub v4_octets_out: u64,
    pub v6_packets_in: u64,
    pub v6_packets_out: u64,
    pub v6_octets_in: u64,
    pub v6_octets_out: u64,
}

/// Tracks session lifetime and emits the Start/Stop pair. "In" counts
/// traffic received from the peer, "out" traffic sent toward it.
#[derive(Debug)]
pub struct Accountant {
    user: String,
    tunnel_medium: Af,
    session_start: Option<SimTime>,
    records: Vec<AccountingRecord>,
}

impl Accountant {
    pub fn new(user: &str, tunnel_medium: Af) -> Accountant {
        Accountant {
            user: user.to_string(),
            tunnel_medium,
            session_start: None,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[AccountingRecord] {
        &self.records
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Session established: emit the Start record (once).
    pub fn session_up(
        &mut self,
        now: SimTime,
        local_tunnel_id: u16,
        remote_tunnel_id: u16,
    ) -> Option<&AccountingRecord> {
        if self.session_start.is_some() {
            return None;
        }
        self.session_start = Some(now);
        self.records.push(AccountingRecord {
            kind: AcctKind::Start,
            user: self.user.clone(),
            time_ms: now.as_millis(),
            tunnel_type: "l2tp".to_string(),
            tunnel_medium: self.tunnel_medium,
            local_tunnel_id,
            remote_tunnel_id,
            duration_secs: None,
            v4_packets_in: 0,
            v4_packets_out: 0,
            v4_octets_in: 0,
            v4_octets_out: 0,
            v6_packets_in: 0,
            v6_packets_out: 0,
            v6_octets_in: 0,
            v6_octets_out: 0,
        });
        self.records.last()
    }

    /// Teardown: emit the Stop record with the final counter snapshot
    /// (once, and only after a Start).
    pub fn session_down(
        &mut self,
        now: SimTime,
        local_tunnel_id: u16,
        remote_tunnel_id: u16,
        stats: &TunnelStats,
    ) -> Option<&AccountingRecord> {
        let started = self.session_start.take()?;
        self.records.push(AccountingRecord {
            kind: AcctKind::Stop,
            user: self.user.clone(),
            time_ms: now.as_millis(),
            tunnel_type: "l2tp".to_string(),
            tunnel_medium: self.tunnel_medium,
            local_tunnel_id,
            remote_tunnel_id,
            duration_secs: Some(now.since(started).as_secs()),
            v4_packets_in: stats.v4.rx_packets,
            v4_packets_out: stats.v4.tx_packets,
            v4_octets_in: stats.v4.rx_octets,
            v4_octets_out: stats.v4.tx_octets,
            v6_packets_in: stats.v6.rx_packets,
            v6_packets_out: stats.v6.tx_packets,
            v6_octets_in: stats.v6.rx_octets,
            v6_octets_out: stats.v6.tx_octets,
        });
        self.records.last()
    }
}
