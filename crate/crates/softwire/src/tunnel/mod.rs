//! L2TPv2 control-connection endpoint: the state machines for both ends
//! of a softwire tunnel.
//!
//! One endpoint owns one control connection and at most one session; the
//! initiator (SI) starts both, the concentrator (SC) answers. Establishment
//! is the fixed exchange
//!
//! ```text
//!   SI -> SCCRQ -> SC        control connection
//!   SI <- SCCRP <- SC
//!   SI -> SCCCN -> SC
//!   SI -> ICRQ  -> SC        the single session (incoming-call flow)
//!   SI <- ICRP  <- SC
//!   SI -> ICCN  -> SC
//! ```
//!
//! with ZLB acknowledgments interleaved by the reliable channel. Outgoing
//! calls are never made and are refused on receipt. After establishment
//! the endpoint exchanges HELLO keepalives, watches for a dead peer (83
//! seconds with default timers) and encapsulates IP packets of the
//! negotiated payload family as PPP inside L2TP data messages.
//!
//! The engine does no I/O: every step takes the current time and returns
//! inert [`Action`]s for the caller to perform.

pub mod auth;
pub mod reliable;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, SimTime};
use crate::wire::l2tp::DATA_HEADER_LEN;
use crate::wire::{
    relevance::required_avps, Avp, AvpType, ControlMessage, DataMessage, MessageType, PppFrame,
    PppProtocol, WireError,
};
use crate::{Af, Role};

use reliable::{ChannelEvent, ReliableChannel, RetransmitConfig, SeqDisposition};

/// Control-connection states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcState {
    Idle,
    WaitCtlReply,
    WaitCtlConn,
    Established,
    Stopping,
    Dead,
}

impl std::fmt::Display for CcState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CcState::Idle => "idle",
            CcState::WaitCtlReply => "wait-ctl-reply",
            CcState::WaitCtlConn => "wait-ctl-conn",
            CcState::Established => "established",
            CcState::Stopping => "stopping",
            CcState::Dead => "dead",
        };
        f.write_str(s)
    }
}

/// Session states; a softwire tunnel has exactly one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    None,
    WaitReply,
    WaitConnect,
    Established,
}

impl std::fmt::Display for SessionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SessionState::None => "none",
            SessionState::WaitReply => "wait-reply",
            SessionState::WaitConnect => "wait-connect",
            SessionState::Established => "established",
        };
        f.write_str(s)
    }
}

/// Keepalive and retransmission knobs, shared with the PPP echo layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeepaliveConfig {
    /// HELLO after this many seconds without traffic from the peer;
    /// `None` disables keepalives entirely.
    pub hello_interval_secs: Option<u64>,
    pub retransmit_base_secs: u64,
    pub retransmit_max_secs: u64,
    /// Timeouts before declaring the peer dead (the last one does not
    /// retransmit). Defaults give 1+2+4+8+8 = 23s on top of the HELLO
    /// interval: death 83s after the last traffic.
    pub max_retransmits: u32,
    /// Run LCP echo probes on the PPP link in addition to HELLO.
    pub lcp_echo_enabled: bool,
    pub lcp_echo_interval_secs: u64,
    /// Unanswered echoes tolerated before the link is declared dead.
    pub lcp_echo_max_missed: u32,
}

impl Default for KeepaliveConfig {
    fn default() -> KeepaliveConfig {
        KeepaliveConfig {
            hello_interval_secs: Some(60),
            retransmit_base_secs: 1,
            retransmit_max_secs: 8,
            max_retransmits: 5,
            lcp_echo_enabled: false,
            lcp_echo_interval_secs: 30,
            lcp_echo_max_missed: 3,
        }
    }
}

impl KeepaliveConfig {
    pub fn hello_interval(&self) -> Option<Duration> {
        self.hello_interval_secs.map(Duration::from_secs)
    }

    pub fn retransmit(&self) -> RetransmitConfig {
        RetransmitConfig {
            base: Duration::from_secs(self.retransmit_base_secs),
            max: Duration::from_secs(self.retransmit_max_secs),
            max_retransmits: self.max_retransmits,
        }
    }

    /// LCP echo interval clamped to [10s, min(hello, 60s)]: echoes must
    /// probe more often than HELLO or they add nothing.
    pub fn effective_echo_interval(&self) -> Duration {
        let ceiling = self.hello_interval_secs.unwrap_or(60).min(60);
        Duration::from_secs(self.lcp_echo_interval_secs.clamp(10, ceiling.max(10)))
    }
}

/// Endpoint configuration.
#[derive(Debug, Clone)]
pub struct TunnelConfig {
    pub role: Role,
    /// Family carried inside the softwire (the payload header family).
    pub payload_af: Af,
    pub host_name: String,
    pub keepalive: KeepaliveConfig,
    /// Shared secret enabling tunnel authentication.
    pub secret: Option<String>,
    /// Advertise a Receive Window Size AVP with this value.
    pub receive_window: Option<u16>,
    pub firmware_revision: Option<u16>,
    pub vendor_name: Option<String>,
    /// Seed for id allocation and challenge bytes.
    pub seed: u64,
}

impl TunnelConfig {
    pub fn new(role: Role, payload_af: Af, host_name: &str, seed: u64) -> TunnelConfig {
        TunnelConfig {
            role,
            payload_af,
            host_name: host_name.to_string(),
            keepalive: KeepaliveConfig::default(),
            secret: None,
            receive_window: None,
            firmware_revision: None,
            vendor_name: None,
            seed,
        }
    }
}

/// Why a tunnel went down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DownReason {
    /// Local administrative stop.
    AdminStop,
    /// Keepalive/retransmission exhaustion.
    DeadPeer,
    /// Peer sent something illegal in the current state.
    ProtocolViolation(&'static str),
    /// Tunnel authentication failed.
    AuthFailure,
    /// Peer sent StopCCN with this result code.
    PeerStop(u16),
    /// Peer closed the only session; the softwire cannot continue.
    PeerClosedSession,
}

impl DownReason {
    /// StopCCN result codes (RFC 2661 section 4.4.2):
    ///   4 - requester is not authorized
    ///   6 - requester is being shut down
    ///   7 - finite state machine error
    /// DeadPeer and PeerStop perform local cleanup only and send nothing.
    fn result_code(&self) -> Option<(u16, &'static str)> {
        match self {
            DownReason::AdminStop => Some((6, "administrative shutdown")),
            DownReason::ProtocolViolation(what) => Some((7, what)),
            DownReason::AuthFailure => Some((4, "tunnel authentication failed")),
            DownReason::PeerClosedSession => Some((6, "session closed by peer")),
            DownReason::DeadPeer | DownReason::PeerStop(_) => None,
        }
    }
}

impl std::fmt::Display for DownReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DownReason::AdminStop => write!(f, "admin stop"),
            DownReason::DeadPeer => write!(f, "dead peer"),
            DownReason::ProtocolViolation(what) => write!(f, "protocol violation: {what}"),
            DownReason::AuthFailure => write!(f, "auth failure"),
            DownReason::PeerStop(code) => write!(f, "peer stop (result {code})"),
            DownReason::PeerClosedSession => write!(f, "peer closed session"),
        }
    }
}

/// Inert outputs of an engine step; the caller performs them.
#[derive(Debug)]
pub enum Action {
    /// Hand this control message to the transport.
    SendControl(ControlMessage),
    /// The session is established end to end; PPP may start.
    SessionUp,
    /// The tunnel (and its session) is gone.
    TunnelDown(DownReason),
}

/// Data-plane errors.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TunnelError {
    #[error("session is not established")]
    SessionNotUp,
    #[error("{got} payload on a {expected} softwire")]
    WrongAddressFamily { expected: Af, got: Af },
    #[error("{len}-byte packet exceeds PPP MTU of {mtu}")]
    PacketTooBig { len: usize, mtu: u32 },
    #[error("datagram not addressed to this tunnel/session")]
    NotThisTunnel,
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Per-address-family traffic counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AfCounters {
    pub tx_packets: u64,
    pub tx_octets: u64,
    pub rx_packets: u64,
    pub rx_octets: u64,
}

/// Traffic statistics kept by the endpoint; snapshotted into accounting
/// records at teardown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunnelStats {
    pub v4: AfCounters,
    pub v6: AfCounters,
    pub ctrl_tx: u64,
    pub ctrl_rx: u64,
    pub wrong_af_drops: u64,
    pub too_big_drops: u64,
}

impl TunnelStats {
    pub fn af(&self, af: Af) -> &AfCounters {
        match af {
            Af::V4 => &self.v4,
            Af::V6 => &self.v6,
        }
    }

    fn af_mut(&mut self, af: Af) -> &mut AfCounters {
        match af {
            Af::V4 => &mut self.v4,
            Af::V6 => &mut self.v6,
        }
    }
}

/// One LCCE: the full control-channel, session and data-plane state of a
/// softwire endpoint.
#[derive(Debug)]
pub struct TunnelEndpoint {
    config: TunnelConfig,
    rng: ChaCha8Rng,
    cc_state: CcState,
    session_state: SessionState,
    local_tunnel_id: u16,
    remote_tunnel_id: u16,
    local_session_id: u16,
    remote_session_id: u16,
    channel: ReliableChannel,
    /// Time of the last control or data message from the peer; the HELLO
    /// timer runs from here.
    last_rx: SimTime,
    /// Cleared while a HELLO is outstanding so the timer cannot re-fire
    /// until the peer speaks again.
    hello_armed: bool,
    /// Challenge we issued, awaiting the peer's response.
    sent_challenge: Option<Vec<u8>>,
    /// Challenge the peer issued, to be answered in our next message.
    peer_challenge: Option<Vec<u8>>,
    /// Host Name the peer sent; user identification or logging handle.
    peer_host_name: Option<String>,
    ppp_mtu: u32,
    stats: TunnelStats,
    down_reason: Option<DownReason>,
}

/// Internal default when the peer does not advertise a window.
const DEFAULT_RECEIVE_WINDOW: u16 = 4;
/// Tunnel-authentication challenges are 16 random bytes.
const CHALLENGE_LEN: usize = 16;

impl TunnelEndpoint {
    pub fn new(config: TunnelConfig) -> TunnelEndpoint {
        let salt = match config.role {
            Role::Si => 0x5349,
            Role::Sc => 0x5343,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ salt);
        let local_tunnel_id = alloc_id(&mut rng, 0);
        let retransmit = config.keepalive.retransmit();
        TunnelEndpoint {
            config,
            rng,
            cc_state: CcState::Idle,
            session_state: SessionState::None,
            local_tunnel_id,
            remote_tunnel_id: 0,
            local_session_id: 0,
            remote_session_id: 0,
            channel: ReliableChannel::new(retransmit, DEFAULT_RECEIVE_WINDOW),
            last_rx: SimTime::ZERO,
            hello_armed: false,
            sent_challenge: None,
            peer_challenge: None,
            peer_host_name: None,
            ppp_mtu: u32::MAX,
            stats: TunnelStats::default(),
            down_reason: None,
        }
    }

    pub fn role(&self) -> Role {
        self.config.role
    }

    pub fn cc_state(&self) -> CcState {
        self.cc_state
    }

    pub fn session_state(&self) -> SessionState {
        self.session_state
    }

    pub fn local_tunnel_id(&self) -> u16 {
        self.local_tunnel_id
    }

    pub fn remote_tunnel_id(&self) -> u16 {
        self.remote_tunnel_id
    }

    pub fn local_session_id(&self) -> u16 {
        self.local_session_id
    }

    pub fn payload_af(&self) -> Af {
        self.config.payload_af
    }

    pub fn stats(&self) -> &TunnelStats {
        &self.stats
    }

    pub fn down_reason(&self) -> Option<&DownReason> {
        self.down_reason.as_ref()
    }

    /// The peer's Host Name AVP value, once seen.
    pub fn peer_host_name(&self) -> Option<&str> {
        self.peer_host_name.as_deref()
    }

    /// Set the PPP MTU once LCP has converged; the data plane enforces it.
    pub fn set_ppp_mtu(&mut self, mtu: u32) {
        self.ppp_mtu = mtu;
    }

    /// Kick off establishment. Only the initiator ever sends SCCRQ.
    pub fn start(&mut self, now: SimTime) -> Vec<Action> {
        if self.config.role != Role::Si || self.cc_state != CcState::Idle {
            return Vec::new();
        }
        let mut avps = vec![
            Avp::protocol_version(),
            Avp::host_name(&self.config.host_name),
            Avp::framing_capabilities(),
            Avp::assigned_tunnel_id(self.local_tunnel_id),
        ];
        self.push_optional_start_avps(&mut avps, MessageType::Sccrq);
        self.cc_state = CcState::WaitCtlReply;
        // Remote tunnel id is still unknown: SCCRQ goes to tunnel 0.
        let sends = self.channel.send(0, MessageType::Sccrq, avps, now);
        self.sends_to_actions(sends)
    }

    /// Optional AVPs shared by SCCRQ and SCCRP: window advertisement, a
    /// fresh challenge when authenticating, and identification strings.
    fn push_optional_start_avps(&mut self, avps: &mut Vec<Avp>, mt: MessageType) {
        if mt == MessageType::Sccrq {
            if let Some(window) = self.config.receive_window {
                avps.push(Avp::receive_window_size(window));
            }
            if self.config.secret.is_some() {
                let challenge = self.fresh_challenge();
                avps.push(Avp::challenge(challenge));
            }
            if let Some(rev) = self.config.firmware_revision {
                avps.push(Avp::firmware_revision(rev));
            }
            if let Some(name) = self.config.vendor_name.clone() {
                avps.push(Avp::vendor_name(&name));
            }
        } else {
            if let Some(rev) = self.config.firmware_revision {
                avps.push(Avp::firmware_revision(rev));
            }
            if let Some(name) = self.config.vendor_name.clone() {
                avps.push(Avp::vendor_name(&name));
            }
            if let Some(window) = self.config.receive_window {
                avps.push(Avp::receive_window_size(window));
            }
            if self.config.secret.is_some() {
                let challenge = self.fresh_challenge();
                avps.push(Avp::challenge(challenge));
            }
        }
    }

    fn fresh_challenge(&mut self) -> Vec<u8> {
        let mut challenge = vec![0u8; CHALLENGE_LEN];
        self.rng.fill(challenge.as_mut_slice());
        self.sent_challenge = Some(challenge.clone());
        challenge
    }

    /// Feed a decoded control message into the state machine.
    pub fn handle_control(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        if self.cc_state == CcState::Dead {
            return Vec::new();
        }
        if !self.addressed_to_us(msg) {
            return Vec::new();
        }
        self.stats.ctrl_rx += 1;
        self.last_rx = now;
        self.hello_armed = true;

        let seq = msg.header.seq.expect("control messages carry Ns/Nr");
        let released = self.channel.acknowledge(seq.nr, now);
        let mut actions = self.sends_to_actions(released);
        if self.cc_state == CcState::Stopping && !self.channel.has_pending() {
            // Our StopCCN has been acknowledged.
            self.cc_state = CcState::Dead;
        }

        if msg.is_zlb() {
            return actions;
        }

        match self.channel.receive_seq(seq.ns) {
            SeqDisposition::InOrder => {}
            SeqDisposition::Duplicate => {
                actions.push(self.zlb_action());
                return actions;
            }
            SeqDisposition::Future => {
                // Out of order; the peer will retransmit in order.
                return actions;
            }
        }

        let before = actions.len();
        let step = self.dispatch(msg, now);
        actions.extend(step);
        let replied = actions[before..]
            .iter()
            .any(|a| matches!(a, Action::SendControl(_)));
        if !replied {
            // Nothing piggybacked the acknowledgment; ZLB it. This also
            // covers the final ack of a peer's StopCCN.
            actions.push(self.zlb_action());
        }
        actions
    }

    fn addressed_to_us(&self, msg: &ControlMessage) -> bool {
        let id = msg.header.tunnel_id;
        if msg.message_type == MessageType::Sccrq {
            return id == 0;
        }
        id == self.local_tunnel_id
    }

    fn dispatch(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        use MessageType::*;
        match (self.config.role, msg.message_type) {
            (_, StopCcn) => {
                let code = msg
                    .find_avp(AvpType::ResultCode)
                    .and_then(|a| {
                        if a.value.len() >= 2 {
                            Some(u16::from_be_bytes([a.value[0], a.value[1]]))
                        } else {
                            None
                        }
                    })
                    .unwrap_or(0);
                self.session_state = SessionState::None;
                self.cc_state = CcState::Dead;
                if self.down_reason.is_none() {
                    self.down_reason = Some(DownReason::PeerStop(code));
                    vec![Action::TunnelDown(DownReason::PeerStop(code))]
                } else {
                    Vec::new()
                }
            }
            (_, Hello) => Vec::new(),
            (_, Cdn) => {
                // The only session is gone; fold the tunnel as well.
                self.session_state = SessionState::None;
                self.teardown(DownReason::PeerClosedSession, now)
            }
            (Role::Sc, Sccrq) if self.cc_state == CcState::Idle => self.sc_on_sccrq(msg, now),
            (Role::Si, Sccrp) if self.cc_state == CcState::WaitCtlReply => {
                self.si_on_sccrp(msg, now)
            }
            (Role::Sc, Scccn) if self.cc_state == CcState::WaitCtlConn => {
                self.sc_on_scccn(msg, now)
            }
            (Role::Sc, Icrq)
                if self.cc_state == CcState::Established
                    && self.session_state == SessionState::None =>
            {
                self.sc_on_icrq(msg, now)
            }
            (Role::Si, Icrp) if self.session_state == SessionState::WaitReply => {
                self.si_on_icrp(msg, now)
            }
            (Role::Sc, Iccn) if self.session_state == SessionState::WaitConnect => {
                self.sc_on_iccn(msg, now)
            }
            // Outgoing calls are never permitted, and anything else is
            // illegal in the current state.
            (_, Other(_)) => self.teardown(
                DownReason::ProtocolViolation("unsupported message type"),
                now,
            ),
            _ => self.teardown(
                DownReason::ProtocolViolation("message illegal in current state"),
                now,
            ),
        }
    }

    fn sc_on_sccrq(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        if let Err(what) = validate_required(msg) {
            return self.teardown(DownReason::ProtocolViolation(what), now);
        }
        self.remote_tunnel_id = msg
            .find_avp(AvpType::AssignedTunnelId)
            .and_then(|a| a.value_as_u16().ok())
            .unwrap_or(0);
        self.peer_host_name = msg.find_avp(AvpType::HostName).map(|a| a.value_as_string());
        if let Some(window) = msg
            .find_avp(AvpType::ReceiveWindowSize)
            .and_then(|a| a.value_as_u16().ok())
        {
            self.channel.set_window(window);
        }
        self.peer_challenge = msg.find_avp(AvpType::Challenge).map(|a| a.value.clone());

        let mut avps = vec![
            Avp::protocol_version(),
            Avp::framing_capabilities(),
            Avp::host_name(&self.config.host_name),
            Avp::assigned_tunnel_id(self.local_tunnel_id),
        ];
        if let Some(challenge) = self.peer_challenge.take() {
            match &self.config.secret {
                Some(secret) => {
                    avps.push(Avp::challenge_response(auth::compute_response(
                        secret.as_bytes(),
                        &challenge,
                        MessageType::Sccrp,
                    )));
                }
                None => {
                    // Challenged without a shared secret: we cannot answer.
                    return self.teardown(DownReason::AuthFailure, now);
                }
            }
        }
        self.push_optional_start_avps(&mut avps, MessageType::Sccrp);
        self.cc_state = CcState::WaitCtlConn;
        let sends = self
            .channel
            .send(self.remote_tunnel_id, MessageType::Sccrp, avps, now);
        self.sends_to_actions(sends)
    }

    fn si_on_sccrp(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        if let Err(what) = validate_required(msg) {
            return self.teardown(DownReason::ProtocolViolation(what), now);
        }
        self.remote_tunnel_id = msg
            .find_avp(AvpType::AssignedTunnelId)
            .and_then(|a| a.value_as_u16().ok())
            .unwrap_or(0);
        self.peer_host_name = msg.find_avp(AvpType::HostName).map(|a| a.value_as_string());
        if let Some(window) = msg
            .find_avp(AvpType::ReceiveWindowSize)
            .and_then(|a| a.value_as_u16().ok())
        {
            self.channel.set_window(window);
        }
        // Verify the peer's answer to our challenge, if we issued one.
        if let Some(challenge) = self.sent_challenge.take() {
            let secret = self
                .config
                .secret
                .as_ref()
                .expect("challenge implies secret");
            let ok = msg
                .find_avp(AvpType::ChallengeResponse)
                .map(|a| {
                    auth::verify_response(
                        secret.as_bytes(),
                        &challenge,
                        MessageType::Sccrp,
                        &a.value,
                    )
                })
                .unwrap_or(false);
            if !ok {
                return self.teardown(DownReason::AuthFailure, now);
            }
        }
        // Answer the peer's challenge in SCCCN.
        let mut avps = Vec::new();
        if let Some(challenge) = msg.find_avp(AvpType::Challenge).map(|a| a.value.clone()) {
            match &self.config.secret {
                Some(secret) => avps.push(Avp::challenge_response(auth::compute_response(
                    secret.as_bytes(),
                    &challenge,
                    MessageType::Scccn,
                ))),
                None => return self.teardown(DownReason::AuthFailure, now),
            }
        }
        self.cc_state = CcState::Established;
        let mut sends = self
            .channel
            .send(self.remote_tunnel_id, MessageType::Scccn, avps, now);

        // Control connection is up: immediately open the one session.
        self.local_session_id = alloc_id(&mut self.rng, self.local_tunnel_id);
        let serial: u32 = self.rng.gen();
        let session_avps = vec![
            Avp::assigned_session_id(self.local_session_id),
            Avp::call_serial_number(serial),
        ];
        self.session_state = SessionState::WaitReply;
        sends.extend(self.channel.send(
            self.remote_tunnel_id,
            MessageType::Icrq,
            session_avps,
            now,
        ));
        self.sends_to_actions(sends)
    }

    fn sc_on_scccn(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        if let Some(challenge) = self.sent_challenge.take() {
            let secret = self
                .config
                .secret
                .as_ref()
                .expect("challenge implies secret");
            let ok = msg
                .find_avp(AvpType::ChallengeResponse)
                .map(|a| {
                    auth::verify_response(
                        secret.as_bytes(),
                        &challenge,
                        MessageType::Scccn,
                        &a.value,
                    )
                })
                .unwrap_or(false);
            if !ok {
                return self.teardown(DownReason::AuthFailure, now);
            }
        }
        self.cc_state = CcState::Established;
        Vec::new()
    }

    fn sc_on_icrq(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        if let Err(what) = validate_required(msg) {
            return self.teardown(DownReason::ProtocolViolation(what), now);
        }
        self.remote_session_id = msg
            .find_avp(AvpType::AssignedSessionId)
            .and_then(|a| a.value_as_u16().ok())
            .unwrap_or(0);
        self.local_session_id = alloc_id(&mut self.rng, self.local_tunnel_id);
        self.session_state = SessionState::WaitConnect;
        let avps = vec![Avp::assigned_session_id(self.local_session_id)];
        let sends = self
            .channel
            .send(self.remote_tunnel_id, MessageType::Icrp, avps, now);
        self.sends_to_actions(sends)
    }

    fn si_on_icrp(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        if let Err(what) = validate_required(msg) {
            return self.teardown(DownReason::ProtocolViolation(what), now);
        }
        self.remote_session_id = msg
            .find_avp(AvpType::AssignedSessionId)
            .and_then(|a| a.value_as_u16().ok())
            .unwrap_or(0);
        // Connect speed is meaningless here: send 0, receiver ignores it.
        let avps = vec![Avp::connect_speed(0), Avp::framing_type_sync()];
        self.session_state = SessionState::Established;
        let sends = self
            .channel
            .send(self.remote_tunnel_id, MessageType::Iccn, avps, now);
        let mut actions = self.sends_to_actions(sends);
        actions.push(Action::SessionUp);
        actions
    }

    fn sc_on_iccn(&mut self, msg: &ControlMessage, now: SimTime) -> Vec<Action> {
        // Presence of Connect Speed and Framing Type is required; their
        // values are ignored.
        if let Err(what) = validate_required(msg) {
            return self.teardown(DownReason::ProtocolViolation(what), now);
        }
        self.session_state = SessionState::Established;
        vec![Action::SessionUp]
    }

    /// Tear the tunnel down. Sends StopCCN unless the peer is already
    /// gone (DeadPeer / PeerStop), which cleans up locally.
    pub fn teardown(&mut self, reason: DownReason, now: SimTime) -> Vec<Action> {
        if matches!(self.cc_state, CcState::Dead | CcState::Stopping) {
            return Vec::new();
        }
        self.session_state = SessionState::None;
        self.hello_armed = false;
        self.down_reason = Some(reason.clone());
        match reason.result_code() {
            Some((code, text)) => {
                let avps = vec![
                    Avp::assigned_tunnel_id(self.local_tunnel_id),
                    Avp::result_code(code, 0, text),
                ];
                self.cc_state = CcState::Stopping;
                let sends =
                    self.channel
                        .send(self.remote_tunnel_id, MessageType::StopCcn, avps, now);
                let mut actions = self.sends_to_actions(sends);
                actions.push(Action::TunnelDown(reason));
                actions
            }
            None => {
                self.cc_state = CcState::Dead;
                vec![Action::TunnelDown(reason)]
            }
        }
    }

    /// Fire due timers: retransmissions, dead-peer detection, HELLO.
    pub fn on_timer(&mut self, now: SimTime) -> Vec<Action> {
        if self.cc_state == CcState::Dead {
            return Vec::new();
        }
        let mut actions = Vec::new();
        for event in self.channel.on_timer(now) {
            match event {
                ChannelEvent::Transmit(msg) => {
                    self.stats.ctrl_tx += 1;
                    actions.push(Action::SendControl(msg));
                }
                ChannelEvent::PeerDead => {
                    if self.cc_state == CcState::Stopping {
                        // StopCCN was never acknowledged; give up quietly.
                        self.cc_state = CcState::Dead;
                    } else {
                        self.session_state = SessionState::None;
                        self.cc_state = CcState::Dead;
                        if self.down_reason.is_none() {
                            self.down_reason = Some(DownReason::DeadPeer);
                            actions.push(Action::TunnelDown(DownReason::DeadPeer));
                        }
                    }
                    return actions;
                }
            }
        }
        if let Some(deadline) = self.hello_deadline() {
            if now >= deadline {
                self.hello_armed = false;
                let sends =
                    self.channel
                        .send(self.remote_tunnel_id, MessageType::Hello, Vec::new(), now);
                actions.extend(self.sends_to_actions(sends));
            }
        }
        actions
    }

    fn hello_deadline(&self) -> Option<SimTime> {
        if self.cc_state != CcState::Established || !self.hello_armed {
            return None;
        }
        self.config
            .keepalive
            .hello_interval()
            .map(|interval| self.last_rx + interval)
    }

    /// Earliest instant `on_timer` should run.
    pub fn next_deadline(&self) -> Option<SimTime> {
        if self.cc_state == CcState::Dead {
            return None;
        }
        [self.channel.next_deadline(), self.hello_deadline()]
            .into_iter()
            .flatten()
            .min()
    }

    fn zlb_action(&mut self) -> Action {
        self.stats.ctrl_tx += 1;
        Action::SendControl(ControlMessage::zlb(
            self.remote_tunnel_id,
            self.channel.ns(),
            self.channel.nr(),
        ))
    }

    fn sends_to_actions(&mut self, sends: Vec<ControlMessage>) -> Vec<Action> {
        self.stats.ctrl_tx += sends.len() as u64;
        sends.into_iter().map(Action::SendControl).collect()
    }

    // ---- data plane -------------------------------------------------

    /// Wrap an IP packet of the payload family into PPP-in-L2TP. The
    /// caller supplies the UDP framing.
    pub fn encapsulate(
        &mut self,
        packet: &[u8],
        af: Af,
        _now: SimTime,
    ) -> Result<Vec<u8>, TunnelError> {
        if self.session_state != SessionState::Established {
            return Err(TunnelError::SessionNotUp);
        }
        if af != self.config.payload_af {
            self.stats.wrong_af_drops += 1;
            return Err(TunnelError::WrongAddressFamily {
                expected: self.config.payload_af,
                got: af,
            });
        }
        if packet.len() as u32 > self.ppp_mtu {
            self.stats.too_big_drops += 1;
            return Err(TunnelError::PacketTooBig {
                len: packet.len(),
                mtu: self.ppp_mtu,
            });
        }
        let protocol = match af {
            Af::V4 => PppProtocol::Ipv4,
            Af::V6 => PppProtocol::Ipv6,
        };
        let frame = PppFrame::new(protocol, packet.to_vec());
        let counters = self.stats.af_mut(af);
        counters.tx_packets += 1;
        counters.tx_octets += packet.len() as u64;
        Ok(DataMessage::new(
            self.remote_tunnel_id,
            self.remote_session_id,
            frame.encode(),
        )
        .encode()?)
    }

    /// Wrap a PPP control frame (LCP/CHAP/NCP) for the session. Control
    /// frames are not counted in the payload statistics.
    pub fn wrap_ppp(&self, frame: &PppFrame) -> Result<Vec<u8>, TunnelError> {
        if self.session_state != SessionState::Established {
            return Err(TunnelError::SessionNotUp);
        }
        Ok(DataMessage::new(
            self.remote_tunnel_id,
            self.remote_session_id,
            frame.encode(),
        )
        .encode()?)
    }

    /// Unwrap an L2TP data packet into its PPP frame, updating per-family
    /// counters for data protocols.
    pub fn decapsulate(&mut self, bytes: &[u8], now: SimTime) -> Result<PppFrame, TunnelError> {
        let data = DataMessage::decode(bytes)?;
        if data.header.tunnel_id != self.local_tunnel_id
            || data.header.session_id != self.local_session_id
        {
            return Err(TunnelError::NotThisTunnel);
        }
        if self.session_state != SessionState::Established {
            return Err(TunnelError::SessionNotUp);
        }
        self.last_rx = now;
        self.hello_armed = true;
        let frame = PppFrame::decode(&data.payload)?;
        if frame.protocol.is_data() {
            let af = match frame.protocol {
                PppProtocol::Ipv4 => Af::V4,
                PppProtocol::Ipv6 => Af::V6,
                _ => unreachable!(),
            };
            if af != self.config.payload_af {
                self.stats.wrong_af_drops += 1;
                return Err(TunnelError::WrongAddressFamily {
                    expected: self.config.payload_af,
                    got: af,
                });
            }
            let counters = self.stats.af_mut(af);
            counters.rx_packets += 1;
            counters.rx_octets += frame.payload.len() as u64;
        }
        Ok(frame)
    }

    /// Expected overhead of this endpoint's data encapsulation, for MTU
    /// arithmetic checks.
    pub fn data_overhead() -> usize {
        DATA_HEADER_LEN
    }
}

/// Presence check for the Required AVP set of a message type. Receive-side
/// hygiene is otherwise lenient: irrelevant AVPs are ignored, not fatal.
fn validate_required(msg: &ControlMessage) -> Result<(), &'static str> {
    for required in required_avps(msg.message_type) {
        if msg.find_avp(*required).is_none() {
            return Err("missing required AVP");
        }
    }
    Ok(())
}

/// Nonzero id distinct from `avoid`, from the endpoint's seeded stream.
fn alloc_id(rng: &mut ChaCha8Rng, avoid: u16) -> u16 {
    loop {
        let id: u16 = rng.gen();
        if id != 0 && id != avoid {
            return id;
        }
    }
}

#[cfg(test)]
mod tests;
