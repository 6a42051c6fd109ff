//! One fully assembled softwire endpoint: the L2TPv2 tunnel engine, the
//! PPP link over its session, and the provisioning plane on top, glued to
//! the simulated network by plain datagrams.
//!
//! The endpoint is driven by three entry points - `start`, `on_datagram`
//! and `on_timer` - and returns the datagrams to put on the wire. All
//! observable activity lands in the shared trace.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aaa::{
    apply_attributes, AaaService, AccessResult, Accountant, AccountingRecord, ChapCredentials,
    Directives, RaPrefixSource, TunnelHint,
};
use crate::netsim::{Datagram, Endpoint};
use crate::packet::{Dhcpv4MsgType, PacketKind, RouterAdvert, SimPacket};
use crate::ppp::{AuthConfig, EchoConfig, Phase, PppConfig, PppEvent, PppLink};
use crate::prefix::{Ipv4Prefix, Ipv6Prefix};
use crate::provisioning::dhcpv4::{build_subnet_request, client_request, Dhcpv4Server};
use crate::provisioning::dhcpv6::{ClientPlan, Dhcpv6Client, Dhcpv6Server};
use crate::provisioning::ndp::{dad_defends, slaac_configure, DadProbe, RaPolicy, RaResponder};
use crate::provisioning::pool::{V4HostPool, V4PrefixPool, V6PrefixPool};
use crate::provisioning::{
    Assignment, ProvisioningRecord, Rib, RouteOrigin, RoutePrefix, StableStore,
};
use crate::time::SimTime;
use crate::trace::{ev, Trace, TraceEvent};
use crate::tunnel::{Action, DownReason, TunnelConfig, TunnelEndpoint};
use crate::wire::{ControlMessage, PppFrame, WireError};
use crate::{Af, Role};

use super::{ScReplySource, ScenarioConfig, SiRole};

/// Provisioning progress on the initiator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SiProv {
    /// Link not up yet.
    Idle,
    /// Router solicitation sent, waiting for the advertisement.
    AwaitRa,
    /// Duplicate address detection running on the tentative address.
    Dad,
    /// DHCP exchange in flight.
    Dhcp,
    /// DAD on the DHCPv6-assigned address (managed mode).
    DadManaged,
    Done,
    Failed,
}

/// Concentrator-side services: directory, pools, servers, accounting.
struct ScServices {
    aaa: AaaService,
    /// CHAP is demanded; endpoint assignment waits for the AAA verdict.
    chap_enabled: bool,
    directives: Option<Directives>,
    authenticated_user: Option<String>,
    ra: RaResponder,
    dhcpv6: Dhcpv6Server,
    dhcpv4: Dhcpv4Server,
    v4_hosts: V4HostPool,
    stable: StableStore,
    accountant: Option<Accountant>,
    /// Concentrator's own address on the shared /64, for DAD defense.
    own_v6: Option<Ipv6Addr>,
    /// Assignment being built this session, committed on teardown.
    draft: Assignment,
    sc_id: String,
}

/// A complete softwire endpoint.
pub struct SoftwireEndpoint {
    name: &'static str,
    role: Role,
    si_role: SiRole,
    payload_af: Af,
    transport_af: Af,
    addr: Endpoint,
    reply_from: Endpoint,
    peer: Option<Endpoint>,
    peer_name: &'static str,
    tunnel: TunnelEndpoint,
    ppp: PppLink,
    rib: Rib,
    record: ProvisioningRecord,
    user: String,
    duid: u64,
    // SI provisioning chain.
    prov: SiProv,
    ra: Option<RouterAdvert>,
    dad: Option<DadProbe>,
    dhcpv6_client: Option<Dhcpv6Client>,
    services: Option<Box<ScServices>>,
    failure: Option<String>,
}

const L2TP_PORT: u16 = 1701;
const SC_ALT_PORT: u16 = 1702;

fn link_local(iid: u64) -> Ipv6Addr {
    Ipv6Addr::from((0xfe80u128 << 112) | u128::from(iid))
}

impl SoftwireEndpoint {
    pub fn new_si(config: &ScenarioConfig) -> SoftwireEndpoint {
        let addr = Endpoint::new(config.si_ip(), L2TP_PORT);
        let peer = Endpoint::new(config.sc_ip(), L2TP_PORT);
        let mut tunnel_config = TunnelConfig::new(
            Role::Si,
            config.payload_af,
            &config.si.host_name,
            config.seed,
        );
        tunnel_config.keepalive = config.keepalive.clone();
        tunnel_config.secret = config.sc.tunnel_secret.clone();

        let mut ppp_config = PppConfig::new(
            Role::Si,
            config.payload_af,
            config.transport_af,
            config.network.link_mtu,
            config.seed,
        );
        ppp_config.propose_acfc = config.si.propose_acfc;
        ppp_config.auth = Some(AuthConfig::Credentials {
            user: config.si.user.clone(),
            secret: config.si.secret.clone(),
        });
        ppp_config.request_dns = config.payload_af == Af::V4;
        if config.keepalive.lcp_echo_enabled {
            ppp_config.echo = Some(EchoConfig {
                interval: config.keepalive.effective_echo_interval(),
                max_missed: config.keepalive.lcp_echo_max_missed,
            });
        }

        let duid = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6475_6964).gen();
        SoftwireEndpoint {
            name: "si",
            role: Role::Si,
            si_role: config.si_role,
            payload_af: config.payload_af,
            transport_af: config.transport_af,
            addr,
            reply_from: addr,
            peer: Some(peer),
            peer_name: "sc",
            tunnel: TunnelEndpoint::new(tunnel_config),
            ppp: PppLink::new(ppp_config),
            rib: Rib::new(),
            record: ProvisioningRecord::new(&config.si.user),
            user: config.si.user.clone(),
            duid,
            prov: SiProv::Idle,
            ra: None,
            dad: None,
            dhcpv6_client: None,
            services: None,
            failure: None,
        }
    }

    pub fn new_sc(config: &ScenarioConfig, stable: StableStore) -> SoftwireEndpoint {
        let addr = Endpoint::new(config.sc_ip(), L2TP_PORT);
        let reply_from = match config.sc.reply_source {
            ScReplySource::Original => addr,
            ScReplySource::AlternatePort => Endpoint::new(config.sc_ip(), SC_ALT_PORT),
            ScReplySource::AlternateAddressPort => Endpoint::new(config.sc_alt_ip(), SC_ALT_PORT),
        };
        let mut tunnel_config = TunnelConfig::new(
            Role::Sc,
            config.payload_af,
            &config.sc.host_name,
            config.seed,
        );
        tunnel_config.keepalive = config.keepalive.clone();
        tunnel_config.secret = config.sc.tunnel_secret.clone();

        let pools = &config.pools;
        let v4_endpoint_prefix: Ipv4Prefix =
            pools.v4_endpoint.parse().expect("valid v4 endpoint pool");
        // Gateway: the last usable host address in the endpoint pool.
        let host_count = 1u32 << (32 - v4_endpoint_prefix.len());
        let own_v4 = v4_endpoint_prefix
            .nth_host(host_count - 2)
            .expect("pool has a gateway address");
        let mut v4_hosts = V4HostPool::new(v4_endpoint_prefix);
        v4_hosts.reserve(own_v4);

        let dns_v4: Vec<Ipv4Addr> = pools
            .dns_v4
            .iter()
            .map(|s| s.parse().expect("valid v4 dns"))
            .collect();
        let dns_v6: Vec<Ipv6Addr> = pools
            .dns_v6
            .iter()
            .map(|s| s.parse().expect("valid v6 dns"))
            .collect();

        let mut ppp_config = PppConfig::new(
            Role::Sc,
            config.payload_af,
            config.transport_af,
            config.network.link_mtu,
            config.seed,
        );
        ppp_config.accept_acfc = config.sc.accept_acfc;
        if config.sc.chap {
            ppp_config.auth = Some(AuthConfig::Authenticator {
                name: config.sc.host_name.clone(),
            });
        }
        if config.payload_af == Af::V4 {
            ppp_config.local_ipv4 = Some(own_v4);
            ppp_config.dns_servers = dns_v4.clone();
        }
        if config.keepalive.lcp_echo_enabled {
            ppp_config.echo = Some(EchoConfig {
                interval: config.keepalive.effective_echo_interval(),
                max_missed: config.keepalive.lcp_echo_max_missed,
            });
        }

        let ra_policy = RaPolicy {
            dhcpv6_addresses: config.sc.dhcpv6_addresses,
            dhcpv6_other: true,
        };
        let mut ra = RaResponder::new(
            V6PrefixPool::endpoint(pools.v6_endpoint.parse().expect("valid v6 endpoint pool"))
                .expect("valid endpoint pool"),
            ra_policy,
        );
        for named in &pools.v6_named {
            ra.add_named_pool(
                &named.name,
                V6PrefixPool::endpoint(named.prefix.parse().expect("valid named pool"))
                    .expect("valid named pool"),
            );
        }
        let dhcpv6 = Dhcpv6Server::new(
            V6PrefixPool::delegation(
                pools
                    .v6_delegation
                    .parse()
                    .expect("valid v6 delegation pool"),
                pools.v6_delegation_len,
            )
            .expect("valid delegation pool"),
            dns_v6,
        );
        let mut dhcpv4 = Dhcpv4Server::new(
            V4PrefixPool::delegation(
                pools
                    .v4_delegation
                    .parse()
                    .expect("valid v4 delegation pool"),
                pools.v4_delegation_len,
            )
            .expect("valid delegation pool"),
            dns_v4.clone(),
        );

        // Reconnecting users keep their assignments: pre-reserve what the
        // stable store remembers for this concentrator.
        let sc_id = config.sc.host_name.clone();
        for (_, assignment) in stable.assignments_at(&sc_id) {
            if let Some(addr) = assignment.endpoint_v6 {
                if let Ok(p64) = endpoint_prefix64(addr) {
                    ra.reserve(p64);
                }
            }
            if let Some(addr) = assignment.endpoint_v4 {
                v4_hosts.reserve(addr);
            }
            if let Some(prefix) = assignment.delegated_v4 {
                dhcpv4.reserve(prefix);
            }
            // Delegated v6 prefixes are pinned per DUID at exchange time.
        }

        let services = ScServices {
            aaa: AaaService::new(config.user_profiles()),
            chap_enabled: config.sc.chap,
            directives: None,
            authenticated_user: None,
            ra,
            dhcpv6,
            dhcpv4,
            v4_hosts,
            stable,
            accountant: None,
            own_v6: None,
            draft: Assignment::default(),
            sc_id,
        };

        SoftwireEndpoint {
            name: "sc",
            role: Role::Sc,
            si_role: config.si_role,
            payload_af: config.payload_af,
            transport_af: config.transport_af,
            addr,
            reply_from,
            peer: None,
            peer_name: "si",
            tunnel: TunnelEndpoint::new(tunnel_config),
            ppp: PppLink::new(ppp_config),
            rib: Rib::new(),
            record: ProvisioningRecord::new(""),
            user: String::new(),
            duid: 0,
            prov: SiProv::Idle,
            ra: None,
            dad: None,
            dhcpv6_client: None,
            services: Some(Box::new(services)),
            failure: None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn addr(&self) -> Endpoint {
        self.addr
    }

    pub fn tunnel(&self) -> &TunnelEndpoint {
        &self.tunnel
    }

    pub fn ppp(&self) -> &PppLink {
        &self.ppp
    }

    pub fn rib(&self) -> &Rib {
        &self.rib
    }

    pub fn record(&self) -> &ProvisioningRecord {
        &self.record
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn provisioning_done(&self) -> bool {
        self.prov == SiProv::Done
    }

    pub fn softwire_up(&self) -> bool {
        self.ppp.phase() == Phase::Up
    }

    pub fn accounting(&self) -> Vec<AccountingRecord> {
        self.services
            .as_ref()
            .and_then(|s| s.accountant.as_ref())
            .map(|a| a.records().to_vec())
            .unwrap_or_default()
    }

    pub fn aaa_decision_log(&self) -> Vec<String> {
        self.services
            .as_ref()
            .map(|s| s.aaa.decision_log().to_vec())
            .unwrap_or_default()
    }

    /// Take the stable store back after a run (SC only).
    pub fn take_stable_store(&mut self) -> StableStore {
        self.services
            .as_mut()
            .map(|s| std::mem::take(&mut s.stable))
            .unwrap_or_default()
    }

    /// Kick off establishment (initiator only).
    pub fn start(&mut self, now: SimTime, trace: &mut Trace) -> Vec<Datagram> {
        let actions = self.tunnel.start(now);
        let mut out = Vec::new();
        self.process_tunnel_actions(actions, now, trace, &mut out);
        out
    }

    pub fn next_deadline(&self) -> Option<SimTime> {
        let dad = self.dad.as_ref().map(|d| d.deadline());
        [self.tunnel.next_deadline(), self.ppp.next_deadline(), dad]
            .into_iter()
            .flatten()
            .min()
    }

    pub fn on_timer(&mut self, now: SimTime, trace: &mut Trace) -> Vec<Datagram> {
        let mut out = Vec::new();
        let actions = self.tunnel.on_timer(now);
        self.process_tunnel_actions(actions, now, trace, &mut out);
        let events = self.ppp.on_timer(now);
        self.process_ppp_events(events, now, trace, &mut out);
        self.poll_dad(now, trace, &mut out);
        out
    }

    /// A datagram from the fabric.
    pub fn on_datagram(
        &mut self,
        datagram: Datagram,
        now: SimTime,
        trace: &mut Trace,
    ) -> Vec<Datagram> {
        if self.peer.is_none() {
            // Concentrator learns the initiator's (possibly translated)
            // tuple from its first packet.
            self.peer = Some(datagram.src);
        }
        let mut out = Vec::new();
        let bytes = &datagram.payload;
        let is_control = bytes.first().map(|b| b & 0x80 != 0).unwrap_or(false);
        if is_control {
            match ControlMessage::decode(bytes) {
                Ok(msg) => {
                    trace.push(
                        TraceEvent::new(
                            now,
                            ev::CTRL_RX,
                            self.peer_name,
                            self.name,
                            format!("{}", msg.message_type),
                        )
                        .with_avps(msg.avp_summary()),
                    );
                    let actions = self.tunnel.handle_control(&msg, now);
                    self.process_tunnel_actions(actions, now, trace, &mut out);
                }
                Err(
                    err @ (WireError::HiddenAvpRejected { .. }
                    | WireError::MandatoryUnknownAvp { .. }),
                ) => {
                    // The profile obliges teardown for these.
                    trace.push(TraceEvent::new(
                        now,
                        ev::CTRL_RX,
                        self.peer_name,
                        self.name,
                        format!("rejected: {err}"),
                    ));
                    let actions = self
                        .tunnel
                        .teardown(DownReason::ProtocolViolation("unacceptable AVP"), now);
                    self.process_tunnel_actions(actions, now, trace, &mut out);
                }
                Err(err) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::CTRL_RX,
                        self.peer_name,
                        self.name,
                        format!("undecodable: {err}"),
                    ));
                }
            }
        } else {
            match self.tunnel.decapsulate(bytes, now) {
                Ok(frame) => self.on_ppp_frame(frame, now, trace, &mut out),
                Err(err) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::DATA_DROP,
                        self.peer_name,
                        self.name,
                        format!("{err}"),
                    ));
                }
            }
        }
        out
    }

    fn on_ppp_frame(
        &mut self,
        frame: PppFrame,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        if frame.protocol.is_data() {
            let af = match frame.protocol {
                crate::wire::PppProtocol::Ipv4 => Af::V4,
                _ => Af::V6,
            };
            trace.push(
                TraceEvent::new(
                    now,
                    ev::DATA_RX,
                    self.peer_name,
                    self.name,
                    format!("{} bytes", frame.payload.len()),
                )
                .with_payload(af, frame.payload.len() as u64),
            );
            match SimPacket::decode(&frame.payload) {
                Ok(packet) => self.on_sim_packet(packet, now, trace, out),
                Err(err) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::DATA_DROP,
                        self.peer_name,
                        self.name,
                        format!("undecodable payload: {err}"),
                    ));
                }
            }
        } else {
            let events = self.ppp.handle_frame(&frame, now);
            self.process_ppp_events(events, now, trace, out);
        }
    }

    // ---- outgoing plumbing ---------------------------------------------

    fn to_peer(&self, payload: Vec<u8>) -> Option<Datagram> {
        self.peer.map(|dst| Datagram {
            src: self.reply_from,
            dst,
            payload,
        })
    }

    fn send_ppp_frame(
        &mut self,
        frame: &PppFrame,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        match self.tunnel.wrap_ppp(frame) {
            Ok(bytes) => {
                trace.push(TraceEvent::new(
                    now,
                    "ppp",
                    self.name,
                    self.peer_name,
                    format!("{} frame", frame.protocol),
                ));
                if let Some(datagram) = self.to_peer(bytes) {
                    out.push(datagram);
                }
            }
            Err(err) => {
                trace.push(TraceEvent::new(
                    now,
                    ev::DATA_DROP,
                    self.name,
                    self.peer_name,
                    format!("ppp frame not sent: {err}"),
                ));
            }
        }
    }

    /// Encapsulate and queue one simulated IP packet of the payload family.
    fn send_sim_packet(
        &mut self,
        packet: &SimPacket,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        let bytes = packet.encode();
        match self.tunnel.encapsulate(&bytes, packet.af, now) {
            Ok(wrapped) => {
                trace.push(
                    TraceEvent::new(
                        now,
                        ev::DATA_TX,
                        self.name,
                        self.peer_name,
                        format!("{} bytes", bytes.len()),
                    )
                    .with_payload(packet.af, bytes.len() as u64),
                );
                if let Some(datagram) = self.to_peer(wrapped) {
                    out.push(datagram);
                }
            }
            Err(err) => {
                trace.push(TraceEvent::new(
                    now,
                    ev::DATA_DROP,
                    self.name,
                    self.peer_name,
                    format!("{err}"),
                ));
            }
        }
    }

    /// Inject an opaque payload packet (traffic phase, wrong-family check).
    /// Returns the encapsulation error, if any.
    pub fn send_payload(
        &mut self,
        af: Af,
        size: usize,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) -> Option<crate::tunnel::TunnelError> {
        let (src, dst) = self.payload_addresses(af);
        let packet = SimPacket::data(af, src, dst, vec![0xAB; size.saturating_sub(36)]);
        let bytes = packet.encode();
        match self.tunnel.encapsulate(&bytes, af, now) {
            Ok(wrapped) => {
                trace.push(
                    TraceEvent::new(
                        now,
                        ev::DATA_TX,
                        self.name,
                        self.peer_name,
                        format!("{} bytes", bytes.len()),
                    )
                    .with_payload(af, bytes.len() as u64),
                );
                if let Some(datagram) = self.to_peer(wrapped) {
                    out.push(datagram);
                }
                None
            }
            Err(err) => {
                trace.push(TraceEvent::new(
                    now,
                    ev::DATA_DROP,
                    self.name,
                    self.peer_name,
                    format!("{err}"),
                ));
                Some(err)
            }
        }
    }

    fn payload_addresses(&self, af: Af) -> (IpAddr, IpAddr) {
        match af {
            Af::V6 => {
                let local = self
                    .record
                    .endpoint_v6
                    .map(IpAddr::V6)
                    .unwrap_or_else(|| IpAddr::V6(link_local(self.ppp.local_iid())));
                let remote = self
                    .ppp
                    .remote_iid()
                    .map(|iid| IpAddr::V6(link_local(iid)))
                    .unwrap_or(IpAddr::V6(Ipv6Addr::LOCALHOST));
                (local, remote)
            }
            Af::V4 => {
                let local = self
                    .ppp
                    .local_ipv4()
                    .map(IpAddr::V4)
                    .unwrap_or(IpAddr::V4(Ipv4Addr::UNSPECIFIED));
                let remote = self
                    .ppp
                    .remote_ipv4()
                    .map(IpAddr::V4)
                    .unwrap_or(IpAddr::V4(Ipv4Addr::BROADCAST));
                (local, remote)
            }
        }
    }

    /// Administrative teardown.
    pub fn admin_stop(&mut self, now: SimTime, trace: &mut Trace) -> Vec<Datagram> {
        let actions = self.tunnel.teardown(DownReason::AdminStop, now);
        let mut out = Vec::new();
        self.process_tunnel_actions(actions, now, trace, &mut out);
        out
    }

    // ---- tunnel action handling ------------------------------------------

    fn process_tunnel_actions(
        &mut self,
        actions: Vec<Action>,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        for action in actions {
            match action {
                Action::SendControl(msg) => {
                    trace.push(
                        TraceEvent::new(
                            now,
                            ev::CTRL_TX,
                            self.name,
                            self.peer_name,
                            format!("{}", msg.message_type),
                        )
                        .with_avps(msg.avp_summary()),
                    );
                    match msg.encode() {
                        Ok(bytes) => {
                            if let Some(datagram) = self.to_peer(bytes) {
                                out.push(datagram);
                            }
                        }
                        Err(err) => {
                            trace.push(TraceEvent::new(
                                now,
                                ev::DATA_DROP,
                                self.name,
                                self.peer_name,
                                format!("encode failed: {err}"),
                            ));
                        }
                    }
                }
                Action::SessionUp => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::SESSION_UP,
                        self.name,
                        "*",
                        format!(
                            "tunnel {} session {}",
                            self.tunnel.local_tunnel_id(),
                            self.tunnel.local_session_id()
                        ),
                    ));
                    self.on_session_up(now, trace, out);
                }
                Action::TunnelDown(reason) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::TUNNEL_DOWN,
                        self.name,
                        "*",
                        format!("{reason}"),
                    ));
                    self.on_tunnel_down(&reason, now, trace);
                }
            }
        }
    }

    fn on_session_up(&mut self, now: SimTime, trace: &mut Trace, out: &mut Vec<Datagram>) {
        if let Some(services) = self.services.as_mut() {
            // Accounting identity: the authenticated user once CHAP has
            // run; the Host Name AVP serves until then.
            let user = self
                .tunnel
                .peer_host_name()
                .unwrap_or("unknown")
                .to_string();
            self.user = user.clone();
            self.record.user = user.clone();
            let mut accountant = Accountant::new(&user, self.transport_af);
            if let Some(record) = accountant.session_up(
                now,
                self.tunnel.local_tunnel_id(),
                self.tunnel.remote_tunnel_id(),
            ) {
                trace.push(TraceEvent::new(
                    now,
                    ev::ACCT,
                    self.name,
                    "*",
                    format!("start user={}", record.user),
                ));
            }
            services.accountant = Some(accountant);
        }
        // Without an authentication phase the concentrator must settle the
        // IPCP assignment before opening PPP; with CHAP the AAA verdict
        // does so before the NCP starts.
        let chap = self
            .services
            .as_ref()
            .map(|s| s.chap_enabled)
            .unwrap_or(false);
        if self.role == Role::Sc && !chap {
            self.configure_sc_ppp(now, trace);
        }
        let events = self.ppp.open(now);
        self.process_ppp_events(events, now, trace, out);
    }

    fn on_tunnel_down(&mut self, reason: &DownReason, now: SimTime, trace: &mut Trace) {
        // Routes through the softwire disappear with it.
        for entry in self.rib.remove_next_hop(self.peer_name) {
            trace.push(
                TraceEvent::new(now, ev::ROUTE_DEL, self.name, "*", "softwire down")
                    .with_route(entry.prefix.to_string(), entry.next_hop.clone()),
            );
        }
        if let Some(services) = self.services.as_mut() {
            services.stable.commit(
                &self.user,
                &services.sc_id.clone(),
                services.draft,
                now.as_millis(),
            );
            if let Some(accountant) = services.accountant.as_mut() {
                if let Some(record) = accountant.session_down(
                    now,
                    self.tunnel.local_tunnel_id(),
                    self.tunnel.remote_tunnel_id(),
                    self.tunnel.stats(),
                ) {
                    trace.push(TraceEvent::new(
                        now,
                        ev::ACCT,
                        self.name,
                        "*",
                        format!(
                            "stop user={} duration={}s",
                            record.user,
                            record.duration_secs.unwrap_or(0)
                        ),
                    ));
                }
            }
        }
        match reason {
            DownReason::AdminStop | DownReason::PeerStop(6) => {}
            other => {
                if self.failure.is_none() {
                    self.failure = Some(format!("tunnel down: {other}"));
                }
            }
        }
    }

    // ---- PPP event handling ----------------------------------------------

    fn process_ppp_events(
        &mut self,
        events: Vec<PppEvent>,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        for event in events {
            match event {
                PppEvent::Frame(frame) => self.send_ppp_frame(&frame, now, trace, out),
                PppEvent::AuthNeeded {
                    user,
                    id,
                    challenge,
                    response,
                } => self.on_auth_needed(user, id, challenge, response, now, trace, out),
                PppEvent::AuthFailed => {
                    let actions = self.tunnel.teardown(DownReason::AuthFailure, now);
                    self.process_tunnel_actions(actions, now, trace, out);
                }
                PppEvent::LinkUp => self.on_link_up(now, trace, out),
                PppEvent::LinkDead(reason) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::STATE,
                        self.name,
                        "*",
                        format!("ppp dead: {reason}"),
                    ));
                    let down = if reason == "lcp echo timeout" {
                        DownReason::DeadPeer
                    } else {
                        DownReason::ProtocolViolation("ppp failure")
                    };
                    let actions = self.tunnel.teardown(down, now);
                    self.process_tunnel_actions(actions, now, trace, out);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on_auth_needed(
        &mut self,
        user: String,
        id: u8,
        challenge: Vec<u8>,
        response: Vec<u8>,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        let hint = TunnelHint {
            tunnel_medium: self.transport_af,
        };
        let accept = {
            let services = self.services.as_mut().expect("authenticator has services");
            let result = services.aaa.access_request(
                &user,
                ChapCredentials {
                    id,
                    challenge: &challenge,
                    response: &response,
                },
                hint,
            );
            match result {
                AccessResult::Accept(attrs) => match apply_attributes(&attrs) {
                    Ok(directives) => {
                        services.authenticated_user = Some(user.clone());
                        services.directives = Some(directives);
                        true
                    }
                    Err(err) => {
                        trace.push(TraceEvent::new(
                            now,
                            ev::STATE,
                            self.name,
                            "*",
                            format!("inconsistent AAA attributes: {err}"),
                        ));
                        false
                    }
                },
                AccessResult::Reject => false,
            }
        };
        trace.push(TraceEvent::new(
            now,
            ev::STATE,
            self.name,
            "*",
            format!(
                "chap {} for user {user}",
                if accept { "accept" } else { "reject" }
            ),
        ));
        if accept {
            self.user = user.clone();
            self.record.user = user;
            // AAA steering must land before the NCP request goes out.
            self.configure_sc_ppp(now, trace);
        }
        let events = self.ppp.resolve_auth(accept, now);
        self.process_ppp_events(events, now, trace, out);
    }

    /// Settle what the concentrator's NCP will propose and assign:
    /// AAA directives first, then the stable store, then the local pools.
    fn configure_sc_ppp(&mut self, now: SimTime, trace: &mut Trace) {
        let services = match self.services.as_mut() {
            Some(s) => s,
            None => return,
        };
        let pinned = services.stable.lookup(&self.user, &services.sc_id);
        if let Some(directives) = &services.directives {
            if let Some(iid) = directives.ipv6cp_iid {
                self.ppp.set_iid(iid);
            }
        }
        if self.payload_af == Af::V4 {
            let from_aaa = services.directives.as_ref().and_then(|d| d.ipcp_address);
            let from_stable = pinned.and_then(|a| a.endpoint_v4);
            let assigned = match from_aaa.or(from_stable) {
                Some(addr) => {
                    services.v4_hosts.reserve(addr);
                    Ok(addr)
                }
                None => services.v4_hosts.allocate(),
            };
            match assigned {
                Ok(addr) => {
                    self.ppp.set_peer_ipv4(addr);
                    services.draft.endpoint_v4 = Some(addr);
                    trace.push(TraceEvent::new(
                        now,
                        ev::PROVISION,
                        self.name,
                        "*",
                        format!("ipcp will assign {addr}"),
                    ));
                }
                Err(err) => {
                    self.failure = Some(format!("ipv4 endpoint pool: {err}"));
                }
            }
        }
    }

    // ---- link-up and the provisioning chain -------------------------------

    fn on_link_up(&mut self, now: SimTime, trace: &mut Trace, out: &mut Vec<Datagram>) {
        self.tunnel.set_ppp_mtu(self.ppp.mtu());
        trace.push(TraceEvent::new(
            now,
            ev::STATE,
            self.name,
            "*",
            format!(
                "ppp up mtu={} acfc={} ncp={}",
                self.ppp.mtu(),
                self.ppp.acfc_accepted(),
                match self.payload_af {
                    Af::V6 => "ipv6cp",
                    Af::V4 => "ipcp",
                }
            ),
        ));
        match self.role {
            Role::Si => {
                // Default route through the softwire, both families.
                if self
                    .rib
                    .inject(
                        RoutePrefix::default_route(self.payload_af),
                        self.peer_name,
                        RouteOrigin::Default,
                    )
                    .is_ok()
                {
                    trace.push(
                        TraceEvent::new(now, ev::ROUTE_ADD, self.name, "*", "default route")
                            .with_route(
                                RoutePrefix::default_route(self.payload_af).to_string(),
                                self.peer_name.to_string(),
                            ),
                    );
                }
                match self.payload_af {
                    Af::V6 => {
                        // A router solicitation is mandatory on link-up.
                        self.prov = SiProv::AwaitRa;
                        let rs = SimPacket {
                            af: Af::V6,
                            src: IpAddr::V6(link_local(self.ppp.local_iid())),
                            dst: IpAddr::V6(link_local(self.ppp.remote_iid().unwrap_or(0))),
                            kind: PacketKind::RouterSolicit,
                        };
                        self.send_sim_packet(&rs, now, trace, out);
                    }
                    Af::V4 => {
                        self.record.endpoint_v4 = self.ppp.local_ipv4();
                        self.record.dns_v4 = self.ppp.dns().to_vec();
                        trace.push(TraceEvent::new(
                            now,
                            ev::PROVISION,
                            self.name,
                            "*",
                            format!(
                                "ipcp address {}",
                                self.ppp
                                    .local_ipv4()
                                    .map(|a| a.to_string())
                                    .unwrap_or_default()
                            ),
                        ));
                        match self.si_role {
                            SiRole::Host => self.finish_provisioning(now, trace),
                            SiRole::Router => {
                                self.prov = SiProv::Dhcp;
                                let request = client_request(
                                    self.duid,
                                    build_subnet_request(None, None),
                                    true,
                                );
                                let (src, dst) = self.payload_addresses(Af::V4);
                                let packet = SimPacket {
                                    af: Af::V4,
                                    src,
                                    dst,
                                    kind: PacketKind::Dhcpv4(request),
                                };
                                self.send_sim_packet(&packet, now, trace, out);
                            }
                        }
                    }
                }
            }
            Role::Sc => {
                if self.payload_af == Af::V4 {
                    self.record.endpoint_v4 = self.ppp.remote_ipv4();
                    self.apply_aaa_v4_delegation(now, trace);
                }
            }
        }
    }

    fn finish_provisioning(&mut self, now: SimTime, trace: &mut Trace) {
        if self.prov != SiProv::Done {
            self.prov = SiProv::Done;
            trace.push(TraceEvent::new(
                now,
                ev::PROVISION,
                self.name,
                "*",
                "provisioning complete",
            ));
        }
    }

    fn fail_provisioning(&mut self, what: String, now: SimTime, trace: &mut Trace) {
        trace.push(TraceEvent::new(
            now,
            ev::PROVISION,
            self.name,
            "*",
            format!("failed: {what}"),
        ));
        self.prov = SiProv::Failed;
        if self.failure.is_none() {
            self.failure = Some(what);
        }
    }

    fn poll_dad(&mut self, now: SimTime, trace: &mut Trace, out: &mut Vec<Datagram>) {
        let resolution = match &self.dad {
            Some(probe) => probe.poll(now),
            None => None,
        };
        match resolution {
            Some(Ok(address)) => {
                self.dad = None;
                trace.push(TraceEvent::new(
                    now,
                    ev::PROVISION,
                    self.name,
                    "*",
                    format!("dad passed for {address}"),
                ));
                self.record.endpoint_v6 = Some(address);
                match self.prov {
                    SiProv::Dad => {
                        // SLAAC address usable; see what DHCPv6 has to add.
                        self.start_dhcpv6(false, now, trace, out);
                    }
                    SiProv::DadManaged => self.finish_provisioning(now, trace),
                    _ => {}
                }
            }
            Some(Err(err)) => {
                self.dad = None;
                self.fail_provisioning(err.to_string(), now, trace);
            }
            None => {}
        }
    }

    fn start_dhcpv6(
        &mut self,
        want_address: bool,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        self.prov = SiProv::Dhcp;
        let plan = ClientPlan {
            ia_pd: self.si_role == SiRole::Router,
            ia_na: want_address,
            info_only: false,
        };
        let client = Dhcpv6Client::new(self.duid, plan, None);
        let start = client.start();
        self.dhcpv6_client = Some(client);
        self.record.duid = Some(self.duid);
        trace.push(TraceEvent::new(
            now,
            ev::PROVISION,
            self.name,
            "*",
            format!("dhcpv6 solicit ia_pd={} ia_na={}", plan.ia_pd, plan.ia_na),
        ));
        let (src, dst) = self.payload_addresses(Af::V6);
        let packet = SimPacket {
            af: Af::V6,
            src,
            dst,
            kind: PacketKind::Dhcpv6(start),
        };
        self.send_sim_packet(&packet, now, trace, out);
    }

    // ---- provisioning packet dispatch -------------------------------------

    fn on_sim_packet(
        &mut self,
        packet: SimPacket,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        match (self.role, packet.kind) {
            (_, PacketKind::Data(_)) => {}
            (Role::Sc, PacketKind::RouterSolicit) => self.sc_on_rs(now, trace, out),
            (Role::Si, PacketKind::RouterAdvert(ra)) => self.si_on_ra(ra, now, trace, out),
            (_, PacketKind::NeighborSolicit(target)) => {
                // Defend the address if we own it.
                let owned = match self.role {
                    Role::Sc => self.services.as_ref().and_then(|s| s.own_v6),
                    Role::Si => self.record.endpoint_v6,
                };
                if dad_defends(owned, target) {
                    let (src, dst) = self.payload_addresses(Af::V6);
                    let advert = SimPacket {
                        af: Af::V6,
                        src,
                        dst,
                        kind: PacketKind::NeighborAdvert(target),
                    };
                    self.send_sim_packet(&advert, now, trace, out);
                }
            }
            (Role::Si, PacketKind::NeighborAdvert(target)) => {
                if let Some(dad) = self.dad.as_mut() {
                    dad.on_neighbor_advert(target);
                }
                self.poll_dad(now, trace, out);
            }
            (Role::Si, PacketKind::Dhcpv6(msg)) => self.si_on_dhcpv6(msg, now, trace, out),
            (Role::Sc, PacketKind::Dhcpv6(msg)) => self.sc_on_dhcpv6(msg, now, trace, out),
            (Role::Si, PacketKind::Dhcpv4(msg)) => self.si_on_dhcpv4(msg, now, trace),
            (Role::Sc, PacketKind::Dhcpv4(msg)) => self.sc_on_dhcpv4(msg, now, trace, out),
            _ => {}
        }
    }

    fn sc_on_rs(&mut self, now: SimTime, trace: &mut Trace, out: &mut Vec<Datagram>) {
        let remote_iid = self.ppp.remote_iid().unwrap_or(0);
        let local_iid = self.ppp.local_iid();
        let (ra, own_v6, endpoint_v6) = {
            let services = self.services.as_mut().expect("sc has services");
            let source = services
                .directives
                .as_ref()
                .map(|d| d.ra_prefix.clone())
                .unwrap_or(RaPrefixSource::Local);
            let pinned = services
                .stable
                .lookup(&self.user, &services.sc_id)
                .and_then(|a| a.endpoint_v6)
                .and_then(|addr| endpoint_prefix64(addr).ok());
            match services.ra.handle_rs(&source, pinned) {
                Ok(ra) => {
                    // One /64 addresses both ends of the softwire.
                    let own = ra.prefix.with_interface_id(local_iid);
                    let endpoint = ra.prefix.with_interface_id(remote_iid);
                    services.own_v6 = own;
                    services.draft.endpoint_v6 = endpoint;
                    if ra.managed {
                        services.dhcpv6.set_address_prefix(ra.prefix);
                    }
                    (ra, own, endpoint)
                }
                Err(err) => {
                    self.failure = Some(format!("router advertisement: {err}"));
                    trace.push(TraceEvent::new(
                        now,
                        ev::PROVISION,
                        self.name,
                        "*",
                        format!("rs failed: {err}"),
                    ));
                    return;
                }
            }
        };
        self.record.endpoint_v6 = endpoint_v6;
        trace.push(TraceEvent::new(
            now,
            ev::PROVISION,
            self.name,
            "*",
            format!(
                "ra prefix={} managed={} own={}",
                ra.prefix,
                ra.managed,
                own_v6.map(|a| a.to_string()).unwrap_or_default()
            ),
        ));
        let packet = SimPacket {
            af: Af::V6,
            src: IpAddr::V6(link_local(local_iid)),
            dst: IpAddr::V6(link_local(remote_iid)),
            kind: PacketKind::RouterAdvert(ra),
        };
        self.send_sim_packet(&packet, now, trace, out);
    }

    fn si_on_ra(
        &mut self,
        ra: RouterAdvert,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        if self.prov != SiProv::AwaitRa {
            return;
        }
        trace.push(TraceEvent::new(
            now,
            ev::PROVISION,
            self.name,
            "*",
            format!("ra prefix={} managed={}", ra.prefix, ra.managed),
        ));
        let managed = ra.managed;
        self.ra = Some(ra.clone());
        if managed {
            // Address comes from DHCPv6; ask for it, DAD afterwards.
            self.start_dhcpv6(true, now, trace, out);
        } else {
            match slaac_configure(&ra, self.ppp.local_iid()) {
                Some(address) => {
                    self.prov = SiProv::Dad;
                    self.dad = Some(DadProbe::start(address, now));
                    trace.push(TraceEvent::new(
                        now,
                        ev::PROVISION,
                        self.name,
                        "*",
                        format!("slaac {address}, dad probe"),
                    ));
                    let probe = SimPacket {
                        af: Af::V6,
                        src: IpAddr::V6(link_local(self.ppp.local_iid())),
                        dst: IpAddr::V6(link_local(self.ppp.remote_iid().unwrap_or(0))),
                        kind: PacketKind::NeighborSolicit(address),
                    };
                    self.send_sim_packet(&probe, now, trace, out);
                }
                None => self.fail_provisioning("advertised prefix is not a /64".into(), now, trace),
            }
        }
    }

    fn si_on_dhcpv6(
        &mut self,
        msg: crate::packet::Dhcpv6Message,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        let client = match self.dhcpv6_client.as_mut() {
            Some(c) => c,
            None => return,
        };
        match client.handle(&msg) {
            Ok(Some(next)) => {
                let (src, dst) = self.payload_addresses(Af::V6);
                let packet = SimPacket {
                    af: Af::V6,
                    src,
                    dst,
                    kind: PacketKind::Dhcpv6(next),
                };
                self.send_sim_packet(&packet, now, trace, out);
            }
            Ok(None) => {
                if let Some(outcome) = client.outcome().cloned() {
                    self.dhcpv6_client = None;
                    self.record.dns_v6 = outcome.dns.clone();
                    if let Some(prefix) = outcome.delegated_prefix {
                        self.record.delegated_v6 = Some(prefix);
                        trace.push(TraceEvent::new(
                            now,
                            ev::PROVISION,
                            self.name,
                            "*",
                            format!("ia_pd delegated {prefix}"),
                        ));
                    }
                    match outcome.address {
                        Some(address) => {
                            // Managed mode: the assigned address still
                            // needs duplicate address detection.
                            self.prov = SiProv::DadManaged;
                            self.dad = Some(DadProbe::start(address, now));
                            let probe = SimPacket {
                                af: Af::V6,
                                src: IpAddr::V6(link_local(self.ppp.local_iid())),
                                dst: IpAddr::V6(link_local(self.ppp.remote_iid().unwrap_or(0))),
                                kind: PacketKind::NeighborSolicit(address),
                            };
                            self.send_sim_packet(&probe, now, trace, out);
                        }
                        None => self.finish_provisioning(now, trace),
                    }
                }
            }
            Err(err) => self.fail_provisioning(err.to_string(), now, trace),
        }
    }

    fn sc_on_dhcpv6(
        &mut self,
        msg: crate::packet::Dhcpv6Message,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        let user = self.user.clone();
        let (reply, delegated) = {
            let services = self.services.as_mut().expect("sc has services");
            let pinned = services
                .directives
                .as_ref()
                .and_then(|d| d.ia_pd_prefix)
                .or_else(|| {
                    services
                        .stable
                        .lookup(&user, &services.sc_id)
                        .and_then(|a| a.delegated_v6)
                });
            match services.dhcpv6.handle(&msg, &user, pinned) {
                Ok(reply) => {
                    let delegated = match reply.msg_type {
                        crate::packet::Dhcpv6MsgType::Reply => {
                            reply.ia_pd.and_then(|ia| ia.delegated)
                        }
                        _ => None,
                    };
                    if let Some(prefix) = delegated {
                        services.draft.delegated_v6 = Some(prefix);
                    }
                    if let Some(address) = reply.ia_na.and_then(|ia| ia.address) {
                        // Managed mode: the served address supersedes the
                        // autoconfigured form in the stable assignment.
                        services.draft.endpoint_v6 = Some(address);
                    }
                    (reply, delegated)
                }
                Err(err) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::PROVISION,
                        self.name,
                        "*",
                        format!("dhcpv6 refused: {err}"),
                    ));
                    let mut refusal = msg.clone();
                    refusal.msg_type = crate::packet::Dhcpv6MsgType::Reply;
                    refusal.status = crate::packet::Dhcpv6Status::NoPrefixAvail;
                    refusal.ia_pd = None;
                    refusal.ia_na = None;
                    refusal.dns = Vec::new();
                    (refusal, None)
                }
            }
        };
        self.record.duid = Some(msg.duid);
        if let Some(address) = reply.ia_na.and_then(|ia| ia.address) {
            self.record.endpoint_v6 = Some(address);
        }
        if let Some(prefix) = delegated {
            // Reaching the delegated prefix means routing it at the
            // initiator across this softwire.
            match self.rib.inject(
                RoutePrefix::V6(prefix),
                self.peer_name,
                RouteOrigin::Delegated,
            ) {
                Ok(()) => {
                    self.record.delegated_v6 = Some(prefix);
                    self.record
                        .routes
                        .push((prefix.to_string(), self.peer_name.to_string()));
                    trace.push(
                        TraceEvent::new(now, ev::ROUTE_ADD, self.name, "*", "ia_pd delegation")
                            .with_route(prefix.to_string(), self.peer_name.to_string()),
                    );
                }
                Err(err) => {
                    self.failure = Some(format!("route injection: {err}"));
                }
            }
        }
        let (src, dst) = self.payload_addresses(Af::V6);
        let packet = SimPacket {
            af: Af::V6,
            src,
            dst,
            kind: PacketKind::Dhcpv6(reply),
        };
        self.send_sim_packet(&packet, now, trace, out);
    }

    fn si_on_dhcpv4(&mut self, msg: crate::packet::Dhcpv4Message, now: SimTime, trace: &mut Trace) {
        if msg.msg_type == Dhcpv4MsgType::Nak || !msg.ok {
            self.fail_provisioning("dhcpv4 delegation refused".into(), now, trace);
            return;
        }
        if let Some(prefix) = msg.subnet_reply {
            self.record.delegated_v4 = Some(prefix);
            trace.push(TraceEvent::new(
                now,
                ev::PROVISION,
                self.name,
                "*",
                format!("subnet allocation {prefix}"),
            ));
        }
        if !msg.dns.is_empty() {
            self.record.dns_v4 = msg.dns.clone();
        }
        self.finish_provisioning(now, trace);
    }

    fn sc_on_dhcpv4(
        &mut self,
        msg: crate::packet::Dhcpv4Message,
        now: SimTime,
        trace: &mut Trace,
        out: &mut Vec<Datagram>,
    ) {
        let user = self.user.clone();
        let reply = {
            let services = self.services.as_mut().expect("sc has services");
            let pinned = services
                .directives
                .as_ref()
                .and_then(|d| d.delegated_v4)
                .or_else(|| {
                    services
                        .stable
                        .lookup(&user, &services.sc_id)
                        .and_then(|a| a.delegated_v4)
                });
            match services.dhcpv4.handle(&msg, pinned) {
                Ok(reply) => {
                    if let Some(prefix) = reply.subnet_reply {
                        services.draft.delegated_v4 = Some(prefix);
                    }
                    reply
                }
                Err(err) => {
                    trace.push(TraceEvent::new(
                        now,
                        ev::PROVISION,
                        self.name,
                        "*",
                        format!("dhcpv4 refused: {err}"),
                    ));
                    services.dhcpv4.refusal(&msg)
                }
            }
        };
        if let Some(prefix) = reply.subnet_reply {
            match self.rib.inject(
                RoutePrefix::V4(prefix),
                self.peer_name,
                RouteOrigin::Delegated,
            ) {
                Ok(()) => {
                    self.record.delegated_v4 = Some(prefix);
                    self.record
                        .routes
                        .push((prefix.to_string(), self.peer_name.to_string()));
                    trace.push(
                        TraceEvent::new(now, ev::ROUTE_ADD, self.name, "*", "subnet allocation")
                            .with_route(prefix.to_string(), self.peer_name.to_string()),
                    );
                }
                Err(err) => {
                    self.failure = Some(format!("route injection: {err}"));
                }
            }
        }
        let (src, dst) = self.payload_addresses(Af::V4);
        let packet = SimPacket {
            af: Af::V4,
            src,
            dst,
            kind: PacketKind::Dhcpv4(reply),
        };
        self.send_sim_packet(&packet, now, trace, out);
    }

    /// AAA-driven IPv4 prefix delegation: the Framed-IP-Address plus
    /// Framed-IP-Netmask pair makes the concentrator route that prefix to
    /// the initiator, with no DHCPv4 involved. Applied once PPP is up.
    pub fn apply_aaa_v4_delegation(&mut self, now: SimTime, trace: &mut Trace) {
        let prefix = match self
            .services
            .as_ref()
            .and_then(|s| s.directives.as_ref())
            .and_then(|d| d.delegated_v4)
        {
            Some(p) => p,
            None => return,
        };
        if self.record.delegated_v4.is_some() {
            return;
        }
        match self.rib.inject(
            RoutePrefix::V4(prefix),
            self.peer_name,
            RouteOrigin::Delegated,
        ) {
            Ok(()) => {
                self.record.delegated_v4 = Some(prefix);
                self.record
                    .routes
                    .push((prefix.to_string(), self.peer_name.to_string()));
                if let Some(services) = self.services.as_mut() {
                    services.draft.delegated_v4 = Some(prefix);
                }
                trace.push(
                    TraceEvent::new(now, ev::ROUTE_ADD, self.name, "*", "aaa v4 delegation")
                        .with_route(prefix.to_string(), self.peer_name.to_string()),
                );
            }
            Err(err) => {
                self.failure = Some(format!("route injection: {err}"));
            }
        }
    }
}

/// The /64 an endpoint address lives in.
fn endpoint_prefix64(addr: Ipv6Addr) -> Result<Ipv6Prefix, crate::prefix::PrefixError> {
    let masked = u128::from(addr) & !(u128::MAX >> 64);
    Ipv6Prefix::new(Ipv6Addr::from(masked), 64)
}
