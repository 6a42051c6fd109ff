//! PPP over the L2TP session: LCP negotiation, optional CHAP, exactly one
//! NCP (IPV6CP or IPCP, chosen by the softwire payload family) and LCP
//! echo keepalives.
//!
//! The link walks `Dead -> LcpNegotiating -> [Authenticating] ->
//! NcpNegotiating -> Up` and never skips forward except around the
//! optional authentication phase. Both sides fire their initial
//! Configure-Request on open; RFC 1661 is symmetric about who goes first.
//!
//! Like the tunnel engine this is a pure state machine: frames in, frames
//! and events out, time passed explicitly. CHAP verification is not done
//! here - the authenticator side surfaces [`PppEvent::AuthNeeded`] and the
//! owner answers with [`PppLink::resolve_auth`] after consulting whatever
//! directory it trusts.

pub mod mtu;

use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::time::{Duration, SimTime};
use crate::tunnel::auth::md5_response;
use crate::wire::chap::{ChapCode, ChapPacket};
use crate::wire::cp::{
    chap_md5_auth_option, CpCode, CpOption, CpPacket, IPCP_OPT_IP_ADDRESS, IPCP_OPT_PRIMARY_DNS,
    IPCP_OPT_SECONDARY_DNS, IPV6CP_OPT_INTERFACE_ID, LCP_OPT_ACFC, LCP_OPT_AUTH_PROTOCOL,
    LCP_OPT_MAGIC_NUMBER, LCP_OPT_MRU,
};
use crate::wire::{PppFrame, PppProtocol};
use crate::{Af, Role};

pub use mtu::{compute_ppp_mtu, MtuError};

/// PPP link phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Dead,
    LcpNegotiating,
    Authenticating,
    NcpNegotiating,
    Up,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Dead => "dead",
            Phase::LcpNegotiating => "lcp",
            Phase::Authenticating => "auth",
            Phase::NcpNegotiating => "ncp",
            Phase::Up => "up",
        };
        f.write_str(s)
    }
}

/// Which network control protocol this link negotiates; exactly one,
/// fixed by the payload family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcpKind {
    Ipv6cp,
    Ipcp,
}

impl NcpKind {
    pub fn for_payload(af: Af) -> NcpKind {
        match af {
            Af::V6 => NcpKind::Ipv6cp,
            Af::V4 => NcpKind::Ipcp,
        }
    }

    fn protocol(self) -> PppProtocol {
        match self {
            NcpKind::Ipv6cp => PppProtocol::Ipv6cp,
            NcpKind::Ipcp => PppProtocol::Ipcp,
        }
    }
}

/// Authentication role on this link.
#[derive(Debug, Clone)]
pub enum AuthConfig {
    /// Demand CHAP from the peer and verify through the owner (SC side).
    Authenticator { name: String },
    /// Answer challenges with these credentials (SI side).
    Credentials { user: String, secret: String },
}

/// Echo keepalive parameters (already clamped by the caller).
#[derive(Debug, Clone, Copy)]
pub struct EchoConfig {
    pub interval: Duration,
    pub max_missed: u32,
}

/// Link configuration.
#[derive(Debug, Clone)]
pub struct PppConfig {
    pub role: Role,
    pub ncp: NcpKind,
    pub link_mtu: u32,
    pub transport_af: Af,
    /// Offer address/control-field compression in our Configure-Request.
    pub propose_acfc: bool,
    /// Accept the peer's ACFC proposal instead of Configure-Rejecting it.
    pub accept_acfc: bool,
    pub auth: Option<AuthConfig>,
    /// Preset interface identifier (AAA override on the SC); random
    /// otherwise.
    pub iid: Option<u64>,
    /// Our own IPv4 address in IPCP (the SC's side of the link).
    pub local_ipv4: Option<Ipv4Addr>,
    /// Address to hand the peer in an IPCP Nak (SC side; from AAA or
    /// pool). The SI leaves this empty and asks with 0.0.0.0.
    pub peer_ipv4: Option<Ipv4Addr>,
    /// DNS servers served through IPCP when the peer asks.
    pub dns_servers: Vec<Ipv4Addr>,
    /// Ask for DNS servers in our IPCP request (SI side).
    pub request_dns: bool,
    pub echo: Option<EchoConfig>,
    /// Give up after this many Configure-Requests per protocol.
    pub max_configure: u32,
    pub seed: u64,
}

impl PppConfig {
    pub fn new(
        role: Role,
        payload_af: Af,
        transport_af: Af,
        link_mtu: u32,
        seed: u64,
    ) -> PppConfig {
        PppConfig {
            role,
            ncp: NcpKind::for_payload(payload_af),
            link_mtu,
            transport_af,
            propose_acfc: false,
            accept_acfc: false,
            auth: None,
            iid: None,
            local_ipv4: None,
            peer_ipv4: None,
            dns_servers: Vec::new(),
            request_dns: false,
            echo: None,
            max_configure: 10,
            seed,
        }
    }
}

/// Outputs of a link step.
#[derive(Debug)]
pub enum PppEvent {
    /// Send this frame over the session.
    Frame(PppFrame),
    /// Authenticator: a CHAP response needs a verdict. Answer with
    /// [`PppLink::resolve_auth`].
    AuthNeeded {
        user: String,
        id: u8,
        challenge: Vec<u8>,
        response: Vec<u8>,
    },
    /// Authentication failed; tear the softwire down.
    AuthFailed,
    /// NCP converged; the link carries payload now.
    LinkUp,
    /// The link died (echo timeout, negotiation divergence, failure).
    LinkDead(&'static str),
}

/// One side's convergence state for one control protocol.
#[derive(Debug, Default)]
struct Negotiation {
    ours_acked: bool,
    theirs_acked: bool,
    next_id: u8,
    requests_sent: u32,
    /// IPV6CP: times we Nak'd the peer's identifier without convergence.
    nak_rounds: u32,
}

impl Negotiation {
    fn done(&self) -> bool {
        self.ours_acked && self.theirs_acked
    }

    fn take_id(&mut self) -> u8 {
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1);
        id
    }
}

#[derive(Debug, Default)]
struct EchoState {
    next_at: Option<SimTime>,
    outstanding: u32,
}

/// The PPP link state machine and its negotiated results.
#[derive(Debug)]
pub struct PppLink {
    config: PppConfig,
    rng: ChaCha8Rng,
    phase: Phase,
    lcp: Negotiation,
    ncp: Negotiation,
    magic: u32,
    /// What the peer can receive; caps our send MTU.
    peer_mru: Option<u16>,
    /// Our ACFC proposal was accepted (affects the MTU ledger only).
    acfc_accepted: bool,
    /// CHAP was agreed during LCP (we demanded or accepted it).
    auth_agreed: bool,
    chap_id: u8,
    sent_challenge: Option<Vec<u8>>,
    pending_auth: bool,
    local_iid: u64,
    remote_iid: Option<u64>,
    local_ipv4: Option<Ipv4Addr>,
    remote_ipv4: Option<Ipv4Addr>,
    dns: Vec<Ipv4Addr>,
    mtu: u32,
    echo: EchoState,
    dead_reason: Option<&'static str>,
}

impl PppLink {
    pub fn new(config: PppConfig) -> PppLink {
        let salt = match config.role {
            Role::Si => 0x7070_7049,
            Role::Sc => 0x7070_7043,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ salt);
        let magic: u32 = rng.gen();
        let local_iid = config.iid.unwrap_or_else(|| loop {
            let iid: u64 = rng.gen();
            if iid != 0 {
                break iid;
            }
        });
        let local_ipv4 = config.local_ipv4;
        PppLink {
            config,
            rng,
            phase: Phase::Dead,
            lcp: Negotiation::default(),
            ncp: Negotiation::default(),
            magic,
            peer_mru: None,
            acfc_accepted: false,
            auth_agreed: false,
            chap_id: 0,
            sent_challenge: None,
            pending_auth: false,
            local_iid,
            remote_iid: None,
            local_ipv4,
            remote_ipv4: None,
            dns: Vec::new(),
            mtu: 0,
            echo: EchoState::default(),
            dead_reason: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn mtu(&self) -> u32 {
        self.mtu
    }

    pub fn acfc_accepted(&self) -> bool {
        self.acfc_accepted
    }

    pub fn local_iid(&self) -> u64 {
        self.local_iid
    }

    pub fn remote_iid(&self) -> Option<u64> {
        self.remote_iid
    }

    pub fn local_ipv4(&self) -> Option<Ipv4Addr> {
        self.local_ipv4
    }

    pub fn remote_ipv4(&self) -> Option<Ipv4Addr> {
        self.remote_ipv4
    }

    pub fn dns(&self) -> &[Ipv4Addr] {
        &self.dns
    }

    pub fn dead_reason(&self) -> Option<&'static str> {
        self.dead_reason
    }

    /// Authenticator: a response is waiting for a verdict.
    pub fn auth_pending(&self) -> bool {
        self.pending_auth
    }

    /// Override the interface identifier before IPV6CP starts (AAA
    /// Framed-Interface-Id on the SC).
    pub fn set_iid(&mut self, iid: u64) {
        self.local_iid = iid;
    }

    /// Set the address to assign the peer before IPCP starts (AAA
    /// Framed-IP-Address or pool allocation on the SC).
    pub fn set_peer_ipv4(&mut self, addr: Ipv4Addr) {
        self.config.peer_ipv4 = Some(addr);
    }

    pub fn set_dns_servers(&mut self, servers: Vec<Ipv4Addr>) {
        self.config.dns_servers = servers;
    }

    /// Start LCP. Both ends call this when the L2TP session comes up.
    pub fn open(&mut self, _now: SimTime) -> Vec<PppEvent> {
        if self.phase != Phase::Dead || self.dead_reason.is_some() {
            return Vec::new();
        }
        self.phase = Phase::LcpNegotiating;
        vec![self.send_lcp_request()]
    }

    fn lcp_options(&self) -> Vec<CpOption> {
        let mut options = Vec::new();
        // Advertise what we can receive on this link.
        let own_mru = compute_ppp_mtu(
            self.config.link_mtu,
            self.config.transport_af,
            self.config.propose_acfc,
        )
        .unwrap_or(mtu::MIN_PPP_MTU);
        options.push(CpOption::new(
            LCP_OPT_MRU,
            (own_mru as u16).to_be_bytes().to_vec(),
        ));
        if matches!(self.config.auth, Some(AuthConfig::Authenticator { .. })) {
            options.push(chap_md5_auth_option());
        }
        options.push(CpOption::new(
            LCP_OPT_MAGIC_NUMBER,
            self.magic.to_be_bytes().to_vec(),
        ));
        if self.config.propose_acfc {
            options.push(CpOption::new(LCP_OPT_ACFC, Vec::new()));
        }
        options
    }

    fn send_lcp_request(&mut self) -> PppEvent {
        self.lcp.requests_sent += 1;
        let id = self.lcp.take_id();
        let pkt = CpPacket::config(CpCode::ConfigureRequest, id, &self.lcp_options());
        PppEvent::Frame(PppFrame::new(PppProtocol::Lcp, pkt.encode()))
    }

    /// Feed a frame from the session into the link.
    pub fn handle_frame(&mut self, frame: &PppFrame, now: SimTime) -> Vec<PppEvent> {
        if self.phase == Phase::Dead {
            return Vec::new();
        }
        match frame.protocol {
            PppProtocol::Lcp => match CpPacket::decode(&frame.payload) {
                Ok(pkt) => self.handle_lcp(pkt, now),
                Err(_) => Vec::new(),
            },
            PppProtocol::Chap => match ChapPacket::decode(&frame.payload) {
                Ok(pkt) => self.handle_chap(pkt, now),
                Err(_) => Vec::new(),
            },
            p if p == self.config.ncp.protocol() => match CpPacket::decode(&frame.payload) {
                Ok(pkt) => self.handle_ncp(pkt, now),
                Err(_) => Vec::new(),
            },
            // The other NCP (or data before Up): drop. Exactly one NCP is
            // ever negotiated per link.
            _ => Vec::new(),
        }
    }

    // ---- LCP ----------------------------------------------------------

    fn handle_lcp(&mut self, pkt: CpPacket, now: SimTime) -> Vec<PppEvent> {
        match pkt.code {
            CpCode::ConfigureRequest => self.lcp_on_request(pkt, now),
            CpCode::ConfigureAck => {
                self.lcp.ours_acked = true;
                // Our proposal stands, including ACFC if we offered it.
                self.acfc_accepted = self.config.propose_acfc;
                self.after_lcp_step(now)
            }
            CpCode::ConfigureNak => self.lcp_on_nak(pkt),
            CpCode::ConfigureReject => self.lcp_on_reject(pkt),
            CpCode::EchoRequest => {
                if self.phase == Phase::Up {
                    let mut data = self.magic.to_be_bytes().to_vec();
                    data.extend_from_slice(pkt.data.get(4..).unwrap_or_default());
                    let reply = CpPacket::new(CpCode::EchoReply, pkt.id, data);
                    vec![PppEvent::Frame(PppFrame::new(
                        PppProtocol::Lcp,
                        reply.encode(),
                    ))]
                } else {
                    Vec::new()
                }
            }
            CpCode::EchoReply => {
                self.echo.outstanding = 0;
                Vec::new()
            }
            CpCode::TerminateRequest => {
                self.phase = Phase::Dead;
                self.dead_reason = Some("peer terminated");
                let reply = CpPacket::new(CpCode::TerminateAck, pkt.id, Vec::new());
                vec![
                    PppEvent::Frame(PppFrame::new(PppProtocol::Lcp, reply.encode())),
                    PppEvent::LinkDead("peer terminated"),
                ]
            }
            _ => Vec::new(),
        }
    }

    fn lcp_on_request(&mut self, pkt: CpPacket, now: SimTime) -> Vec<PppEvent> {
        let options = match pkt.options() {
            Ok(o) => o,
            Err(_) => return Vec::new(),
        };
        let mut rejected = Vec::new();
        let mut naked = Vec::new();
        let mut peer_mru = None;
        let mut peer_wants_auth = false;
        for opt in &options {
            match opt.kind {
                LCP_OPT_MRU => match opt.u16_value() {
                    Ok(v) if u32::from(v) >= mtu::MIN_PPP_MTU => peer_mru = Some(v),
                    _ => naked.push(CpOption::new(
                        LCP_OPT_MRU,
                        (mtu::MIN_PPP_MTU as u16).to_be_bytes().to_vec(),
                    )),
                },
                LCP_OPT_MAGIC_NUMBER => {}
                LCP_OPT_AUTH_PROTOCOL => {
                    // Only CHAP with MD5 is acceptable.
                    if opt.data == [0xC2, 0x23, 0x05] {
                        peer_wants_auth = true;
                    } else {
                        naked.push(chap_md5_auth_option());
                    }
                }
                LCP_OPT_ACFC => {
                    if !self.config.accept_acfc {
                        rejected.push(opt.clone());
                    }
                }
                _ => rejected.push(opt.clone()),
            }
        }
        if !rejected.is_empty() {
            let reply = CpPacket::config(CpCode::ConfigureReject, pkt.id, &rejected);
            return vec![PppEvent::Frame(PppFrame::new(
                PppProtocol::Lcp,
                reply.encode(),
            ))];
        }
        if !naked.is_empty() {
            let reply = CpPacket::config(CpCode::ConfigureNak, pkt.id, &naked);
            return vec![PppEvent::Frame(PppFrame::new(
                PppProtocol::Lcp,
                reply.encode(),
            ))];
        }
        self.peer_mru = peer_mru;
        if peer_wants_auth {
            self.auth_agreed = true;
        }
        self.lcp.theirs_acked = true;
        let ack = CpPacket::new(CpCode::ConfigureAck, pkt.id, pkt.data);
        let mut events = vec![PppEvent::Frame(PppFrame::new(
            PppProtocol::Lcp,
            ack.encode(),
        ))];
        events.extend(self.after_lcp_step(now));
        events
    }

    fn lcp_on_nak(&mut self, pkt: CpPacket) -> Vec<PppEvent> {
        if self.lcp.requests_sent >= self.config.max_configure {
            return self.die("lcp negotiation diverged");
        }
        // Adopt suggested values we can live with and re-request.
        if let Ok(options) = pkt.options() {
            for opt in options {
                if opt.kind == LCP_OPT_AUTH_PROTOCOL && opt.data == [0xC2, 0x23, 0x05] {
                    // Peer insists on CHAP; as supplicant we already agree.
                    self.auth_agreed = true;
                }
            }
        }
        vec![self.send_lcp_request()]
    }

    fn lcp_on_reject(&mut self, pkt: CpPacket) -> Vec<PppEvent> {
        if self.lcp.requests_sent >= self.config.max_configure {
            return self.die("lcp negotiation diverged");
        }
        if let Ok(options) = pkt.options() {
            for opt in options {
                match opt.kind {
                    LCP_OPT_ACFC => self.config.propose_acfc = false,
                    LCP_OPT_AUTH_PROTOCOL => {
                        // Peer refuses authentication outright; drop the
                        // demand and fail later if policy requires it.
                        self.config.auth = None;
                    }
                    _ => {}
                }
            }
        }
        vec![self.send_lcp_request()]
    }

    /// On each LCP convergence step, move forward when both sides are
    /// done: into CHAP if agreed, else straight to the one NCP.
    fn after_lcp_step(&mut self, _now: SimTime) -> Vec<PppEvent> {
        if !self.lcp.done() || self.phase != Phase::LcpNegotiating {
            return Vec::new();
        }
        // Effective MTU: what we computed for our direction, capped by
        // what the peer says it can receive.
        let own = compute_ppp_mtu(
            self.config.link_mtu,
            self.config.transport_af,
            self.acfc_accepted,
        )
        .unwrap_or(mtu::MIN_PPP_MTU);
        self.mtu = match self.peer_mru {
            Some(mru) => own.min(u32::from(mru)),
            None => own,
        };
        if matches!(self.config.auth, Some(AuthConfig::Authenticator { .. })) {
            self.phase = Phase::Authenticating;
            return self.send_challenge();
        }
        if self.auth_agreed {
            // Supplicant: wait for the authenticator's challenge.
            self.phase = Phase::Authenticating;
            return Vec::new();
        }
        self.enter_ncp()
    }

    // ---- CHAP ---------------------------------------------------------

    fn send_challenge(&mut self) -> Vec<PppEvent> {
        let name = match &self.config.auth {
            Some(AuthConfig::Authenticator { name }) => name.clone(),
            _ => String::new(),
        };
        self.chap_id = self.chap_id.wrapping_add(1);
        let mut challenge = vec![0u8; 16];
        self.rng.fill(challenge.as_mut_slice());
        self.sent_challenge = Some(challenge.clone());
        let pkt = ChapPacket::challenge(self.chap_id, challenge, &name);
        vec![PppEvent::Frame(PppFrame::new(
            PppProtocol::Chap,
            pkt.encode(),
        ))]
    }

    fn handle_chap(&mut self, pkt: ChapPacket, _now: SimTime) -> Vec<PppEvent> {
        if self.phase != Phase::Authenticating {
            return Vec::new();
        }
        match (pkt.code(), &self.config.auth) {
            (ChapCode::Challenge, Some(AuthConfig::Credentials { user, secret })) => {
                if let ChapPacket::Value { id, value, .. } = &pkt {
                    let digest = md5_response(*id, secret.as_bytes(), value);
                    let response = ChapPacket::response(*id, digest.to_vec(), user);
                    vec![PppEvent::Frame(PppFrame::new(
                        PppProtocol::Chap,
                        response.encode(),
                    ))]
                } else {
                    Vec::new()
                }
            }
            (ChapCode::Challenge, _) => {
                // Challenged without credentials: we cannot answer.
                let mut events = self.die("chap challenge without credentials");
                events.push(PppEvent::AuthFailed);
                events
            }
            (ChapCode::Response, Some(AuthConfig::Authenticator { .. })) => {
                if let ChapPacket::Value {
                    id, value, name, ..
                } = &pkt
                {
                    if *id != self.chap_id || self.sent_challenge.is_none() {
                        return Vec::new();
                    }
                    self.pending_auth = true;
                    vec![PppEvent::AuthNeeded {
                        user: name.clone(),
                        id: *id,
                        challenge: self.sent_challenge.clone().unwrap(),
                        response: value.clone(),
                    }]
                } else {
                    Vec::new()
                }
            }
            (ChapCode::Success, _) => self.enter_ncp(),
            (ChapCode::Failure, _) => {
                let mut events = self.die("chap failure");
                events.push(PppEvent::AuthFailed);
                events
            }
            _ => Vec::new(),
        }
    }

    /// Authenticator verdict for the pending CHAP response.
    pub fn resolve_auth(&mut self, accept: bool, _now: SimTime) -> Vec<PppEvent> {
        if !self.pending_auth {
            return Vec::new();
        }
        self.pending_auth = false;
        self.sent_challenge = None;
        if accept {
            let success = ChapPacket::success(self.chap_id);
            let mut events = vec![PppEvent::Frame(PppFrame::new(
                PppProtocol::Chap,
                success.encode(),
            ))];
            events.extend(self.enter_ncp());
            events
        } else {
            let failure = ChapPacket::failure(self.chap_id, "authentication failed");
            let mut events = vec![PppEvent::Frame(PppFrame::new(
                PppProtocol::Chap,
                failure.encode(),
            ))];
            events.extend(self.die("chap failure"));
            events.push(PppEvent::AuthFailed);
            events
        }
    }

    // ---- NCP ----------------------------------------------------------

    fn enter_ncp(&mut self) -> Vec<PppEvent> {
        if self.phase == Phase::Dead {
            return Vec::new();
        }
        self.phase = Phase::NcpNegotiating;
        vec![self.send_ncp_request()]
    }

    fn ncp_options(&self) -> Vec<CpOption> {
        match self.config.ncp {
            NcpKind::Ipv6cp => vec![CpOption::new(
                IPV6CP_OPT_INTERFACE_ID,
                self.local_iid.to_be_bytes().to_vec(),
            )],
            NcpKind::Ipcp => {
                // The SI asks with 0.0.0.0 and learns its address from the
                // Nak; the SC states its own address outright.
                let addr = self.local_ipv4.unwrap_or(Ipv4Addr::UNSPECIFIED);
                let mut options = vec![CpOption::new(IPCP_OPT_IP_ADDRESS, addr.octets().to_vec())];
                if self.config.request_dns {
                    let dns: [u8; 4] = self.dns.first().map(|d| d.octets()).unwrap_or([0, 0, 0, 0]);
                    options.push(CpOption::new(IPCP_OPT_PRIMARY_DNS, dns.to_vec()));
                    let dns2: [u8; 4] = self.dns.get(1).map(|d| d.octets()).unwrap_or([0, 0, 0, 0]);
                    options.push(CpOption::new(IPCP_OPT_SECONDARY_DNS, dns2.to_vec()));
                }
                options
            }
        }
    }

    fn send_ncp_request(&mut self) -> PppEvent {
        self.ncp.requests_sent += 1;
        let id = self.ncp.take_id();
        let pkt = CpPacket::config(CpCode::ConfigureRequest, id, &self.ncp_options());
        PppEvent::Frame(PppFrame::new(self.config.ncp.protocol(), pkt.encode()))
    }

    fn handle_ncp(&mut self, pkt: CpPacket, now: SimTime) -> Vec<PppEvent> {
        if self.phase < Phase::NcpNegotiating {
            return Vec::new();
        }
        match pkt.code {
            CpCode::ConfigureRequest => match self.config.ncp {
                NcpKind::Ipv6cp => self.ipv6cp_on_request(pkt, now),
                NcpKind::Ipcp => self.ipcp_on_request(pkt, now),
            },
            CpCode::ConfigureAck => {
                self.ncp.ours_acked = true;
                self.after_ncp_step(now)
            }
            CpCode::ConfigureNak => match self.config.ncp {
                NcpKind::Ipv6cp => self.ipv6cp_on_nak(pkt),
                NcpKind::Ipcp => self.ipcp_on_nak(pkt),
            },
            CpCode::ConfigureReject => {
                if self.ncp.requests_sent >= self.config.max_configure {
                    return self.die("ncp negotiation diverged");
                }
                vec![self.send_ncp_request()]
            }
            _ => Vec::new(),
        }
    }

    fn ipv6cp_on_request(&mut self, pkt: CpPacket, now: SimTime) -> Vec<PppEvent> {
        let options = match pkt.options() {
            Ok(o) => o,
            Err(_) => return Vec::new(),
        };
        let their_iid = options
            .iter()
            .find(|o| o.kind == IPV6CP_OPT_INTERFACE_ID)
            .and_then(|o| o.u64_value().ok());
        // Uniqueness validation is the concentrator's job. If both ends
        // pick the same identifier and both Nak with the same deterministic
        // alternative they mirror each other forever, so only the SC Naks
        // a collision; the SI adopts whatever it is Nak'd to. Zero is
        // invalid from anyone.
        let must_nak = match their_iid {
            Some(0) | None => their_iid.is_some(),
            Some(iid) => iid == self.local_iid && self.config.role == Role::Sc,
        };
        match their_iid {
            Some(iid) if !must_nak && iid != 0 => {
                self.remote_iid = Some(iid);
                self.ncp.theirs_acked = true;
                let ack = CpPacket::new(CpCode::ConfigureAck, pkt.id, pkt.data);
                let mut events = vec![PppEvent::Frame(PppFrame::new(
                    self.config.ncp.protocol(),
                    ack.encode(),
                ))];
                events.extend(self.after_ncp_step(now));
                events
            }
            Some(colliding) => {
                // Suggest a deterministic alternative: +1, skipping zero
                // and our own value.
                self.ncp.nak_rounds += 1;
                if self.ncp.nak_rounds > 3 {
                    return self.die("interface identifiers failed to converge");
                }
                let mut alternative = colliding.wrapping_add(1);
                while alternative == 0 || alternative == self.local_iid {
                    alternative = alternative.wrapping_add(1);
                }
                let nak = CpPacket::config(
                    CpCode::ConfigureNak,
                    pkt.id,
                    &[CpOption::new(
                        IPV6CP_OPT_INTERFACE_ID,
                        alternative.to_be_bytes().to_vec(),
                    )],
                );
                vec![PppEvent::Frame(PppFrame::new(
                    self.config.ncp.protocol(),
                    nak.encode(),
                ))]
            }
            None => {
                let reject = CpPacket::new(CpCode::ConfigureReject, pkt.id, pkt.data);
                vec![PppEvent::Frame(PppFrame::new(
                    self.config.ncp.protocol(),
                    reject.encode(),
                ))]
            }
        }
    }

    fn ipv6cp_on_nak(&mut self, pkt: CpPacket) -> Vec<PppEvent> {
        if self.ncp.requests_sent >= self.config.max_configure {
            return self.die("interface identifiers failed to converge");
        }
        if let Ok(options) = pkt.options() {
            if let Some(suggested) = options
                .iter()
                .find(|o| o.kind == IPV6CP_OPT_INTERFACE_ID)
                .and_then(|o| o.u64_value().ok())
            {
                if suggested != 0 {
                    self.local_iid = suggested;
                }
            }
        }
        vec![self.send_ncp_request()]
    }

    fn ipcp_on_request(&mut self, pkt: CpPacket, now: SimTime) -> Vec<PppEvent> {
        let options = match pkt.options() {
            Ok(o) => o,
            Err(_) => return Vec::new(),
        };
        let mut naks = Vec::new();
        for opt in &options {
            match opt.kind {
                IPCP_OPT_IP_ADDRESS => {
                    let addr = match opt.u32_value() {
                        Ok(v) => Ipv4Addr::from(v),
                        Err(_) => continue,
                    };
                    match self.config.role {
                        Role::Sc => {
                            // Assign the configured address unless the SI
                            // is already asking for exactly that.
                            let assigned = self.config.peer_ipv4;
                            match assigned {
                                Some(a) if addr == a => {
                                    self.remote_ipv4 = Some(a);
                                }
                                Some(a) => {
                                    naks.push(CpOption::new(
                                        IPCP_OPT_IP_ADDRESS,
                                        a.octets().to_vec(),
                                    ));
                                }
                                None => {
                                    return self.die("ipv4 pool exhausted");
                                }
                            }
                        }
                        Role::Si => {
                            // The SC states its own (gateway) address.
                            if addr != Ipv4Addr::UNSPECIFIED {
                                self.remote_ipv4 = Some(addr);
                            }
                        }
                    }
                }
                IPCP_OPT_PRIMARY_DNS => {
                    if self.config.role == Role::Sc {
                        if let Some(dns) = self.config.dns_servers.first() {
                            let asked = opt.u32_value().map(Ipv4Addr::from).ok();
                            if asked != Some(*dns) {
                                naks.push(CpOption::new(
                                    IPCP_OPT_PRIMARY_DNS,
                                    dns.octets().to_vec(),
                                ));
                            }
                        }
                    }
                }
                IPCP_OPT_SECONDARY_DNS => {
                    if self.config.role == Role::Sc {
                        if let Some(dns) = self.config.dns_servers.get(1) {
                            let asked = opt.u32_value().map(Ipv4Addr::from).ok();
                            if asked != Some(*dns) {
                                naks.push(CpOption::new(
                                    IPCP_OPT_SECONDARY_DNS,
                                    dns.octets().to_vec(),
                                ));
                            }
                        }
                    }
                }
                _ => {
                    let reject = CpPacket::config(
                        CpCode::ConfigureReject,
                        pkt.id,
                        std::slice::from_ref(opt),
                    );
                    return vec![PppEvent::Frame(PppFrame::new(
                        self.config.ncp.protocol(),
                        reject.encode(),
                    ))];
                }
            }
        }
        if !naks.is_empty() {
            let nak = CpPacket::config(CpCode::ConfigureNak, pkt.id, &naks);
            return vec![PppEvent::Frame(PppFrame::new(
                self.config.ncp.protocol(),
                nak.encode(),
            ))];
        }
        self.ncp.theirs_acked = true;
        let ack = CpPacket::new(CpCode::ConfigureAck, pkt.id, pkt.data);
        let mut events = vec![PppEvent::Frame(PppFrame::new(
            self.config.ncp.protocol(),
            ack.encode(),
        ))];
        events.extend(self.after_ncp_step(now));
        events
    }

    fn ipcp_on_nak(&mut self, pkt: CpPacket) -> Vec<PppEvent> {
        if self.ncp.requests_sent >= self.config.max_configure {
            return self.die("ipcp negotiation diverged");
        }
        if let Ok(options) = pkt.options() {
            for opt in options {
                match opt.kind {
                    IPCP_OPT_IP_ADDRESS => {
                        if let Ok(v) = opt.u32_value() {
                            self.local_ipv4 = Some(Ipv4Addr::from(v));
                        }
                    }
                    IPCP_OPT_PRIMARY_DNS => {
                        if let Ok(v) = opt.u32_value() {
                            let addr = Ipv4Addr::from(v);
                            if self.dns.is_empty() {
                                self.dns.push(addr);
                            } else {
                                self.dns[0] = addr;
                            }
                        }
                    }
                    IPCP_OPT_SECONDARY_DNS => {
                        if let Ok(v) = opt.u32_value() {
                            let addr = Ipv4Addr::from(v);
                            while self.dns.len() < 2 {
                                self.dns.push(Ipv4Addr::UNSPECIFIED);
                            }
                            self.dns[1] = addr;
                        }
                    }
                    _ => {}
                }
            }
        }
        vec![self.send_ncp_request()]
    }

    fn after_ncp_step(&mut self, now: SimTime) -> Vec<PppEvent> {
        if !self.ncp.done() || self.phase != Phase::NcpNegotiating {
            return Vec::new();
        }
        // Our request was acked: negotiated values stand.
        if self.config.ncp == NcpKind::Ipcp && self.config.role == Role::Si {
            // local_ipv4 was filled by the Nak cycle.
            if self.local_ipv4.is_none() {
                return self.die("ipcp converged without an address");
            }
        }
        if self.config.ncp == NcpKind::Ipv6cp && Some(self.local_iid) == self.remote_iid {
            // Cannot happen against a conforming peer; refuse to come up
            // with equal identifiers.
            return self.die("interface identifiers failed to converge");
        }
        self.phase = Phase::Up;
        if let Some(echo) = self.config.echo {
            self.echo.next_at = Some(now + echo.interval);
        }
        vec![PppEvent::LinkUp]
    }

    // ---- echo keepalive ------------------------------------------------

    pub fn next_deadline(&self) -> Option<SimTime> {
        if self.phase != Phase::Up {
            return None;
        }
        self.echo.next_at
    }

    /// Drive the echo keepalive. Call at `next_deadline`.
    pub fn on_timer(&mut self, now: SimTime) -> Vec<PppEvent> {
        let config = match self.config.echo {
            Some(c) => c,
            None => return Vec::new(),
        };
        if self.phase != Phase::Up {
            return Vec::new();
        }
        let due = match self.echo.next_at {
            Some(at) => now >= at,
            None => false,
        };
        if !due {
            return Vec::new();
        }
        if self.echo.outstanding >= config.max_missed {
            return self.die("lcp echo timeout");
        }
        self.echo.outstanding += 1;
        self.echo.next_at = Some(now + config.interval);
        let pkt = CpPacket::new(
            CpCode::EchoRequest,
            self.lcp.take_id(),
            self.magic.to_be_bytes().to_vec(),
        );
        vec![PppEvent::Frame(PppFrame::new(
            PppProtocol::Lcp,
            pkt.encode(),
        ))]
    }

    fn die(&mut self, reason: &'static str) -> Vec<PppEvent> {
        self.phase = Phase::Dead;
        self.dead_reason = Some(reason);
        vec![PppEvent::LinkDead(reason)]
    }
}

#[cfg(test)]
mod tests;
