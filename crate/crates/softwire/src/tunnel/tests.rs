use super::*;
use crate::wire::relevance::optional_avps;

fn si_config() -> TunnelConfig {
    TunnelConfig::new(Role::Si, Af::V6, "si.example", 42)
}

fn sc_config() -> TunnelConfig {
    TunnelConfig::new(Role::Sc, Af::V6, "sc.example", 43)
}

/// Two engines wired back to back, exchanging encoded control messages.
struct Pair {
    si: TunnelEndpoint,
    sc: TunnelEndpoint,
    now: SimTime,
    /// (sender, message type) for every control message on the "wire".
    log: Vec<(Role, MessageType)>,
    session_up: Vec<Role>,
    down: Vec<(Role, DownReason)>,
}

impl Pair {
    fn new(si: TunnelConfig, sc: TunnelConfig) -> Pair {
        Pair {
            si: TunnelEndpoint::new(si),
            sc: TunnelEndpoint::new(sc),
            now: SimTime::ZERO,
            log: Vec::new(),
            session_up: Vec::new(),
            down: Vec::new(),
        }
    }

    /// Deliver actions from `from`, bouncing replies until quiet. FIFO:
    /// messages stay in emission order, like a loss-free wire.
    fn pump(&mut self, actions: Vec<Action>, from: Role) {
        let mut work: std::collections::VecDeque<(Role, Action)> =
            actions.into_iter().map(|a| (from, a)).collect();
        while let Some((sender, action)) = work.pop_front() {
            match action {
                Action::SendControl(msg) => {
                    check_avp_hygiene(&msg);
                    self.log.push((sender, msg.message_type));
                    let bytes = msg.encode().expect("encodes");
                    let decoded = ControlMessage::decode(&bytes).expect("decodes");
                    let (receiver, engine) = match sender {
                        Role::Si => (Role::Sc, &mut self.sc),
                        Role::Sc => (Role::Si, &mut self.si),
                    };
                    let replies = engine.handle_control(&decoded, self.now);
                    work.extend(replies.into_iter().map(|a| (receiver, a)));
                }
                Action::SessionUp => self.session_up.push(sender),
                Action::TunnelDown(reason) => self.down.push((sender, reason)),
            }
        }
    }

    fn establish(&mut self) {
        let start = self.si.start(self.now);
        self.pump(start, Role::Si);
    }

    fn non_zlb_log(&self) -> Vec<(Role, MessageType)> {
        self.log
            .iter()
            .filter(|(_, mt)| *mt != MessageType::Zlb)
            .cloned()
            .collect()
    }
}

/// Every emitted message must carry its Required AVPs and nothing the
/// softwire profile calls NotRelevant.
fn check_avp_hygiene(msg: &ControlMessage) {
    for required in required_avps(msg.message_type) {
        assert!(
            msg.find_avp(*required).is_some(),
            "{} missing required {}",
            msg.message_type,
            required
        );
    }
    for avp in &msg.avps {
        let t = avp.avp_type().expect("only registry AVPs are emitted");
        assert_ne!(
            crate::wire::classify_avp(msg.message_type, t),
            crate::wire::Relevance::NotRelevant,
            "{} carries NotRelevant AVP {}",
            msg.message_type,
            t
        );
    }
    // Optional AVPs must actually be classified Optional.
    for avp in &msg.avps {
        let t = avp.avp_type().unwrap();
        let relevance = crate::wire::classify_avp(msg.message_type, t);
        assert!(
            relevance == crate::wire::Relevance::Required
                || optional_avps(msg.message_type).contains(&t),
            "unexpected AVP {} on {}",
            t,
            msg.message_type
        );
    }
}

#[test]
fn sccrq_carries_the_five_required_avps() {
    let mut si = TunnelEndpoint::new(si_config());
    let actions = si.start(SimTime::ZERO);
    assert_eq!(actions.len(), 1);
    let msg = match &actions[0] {
        Action::SendControl(m) => m,
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(msg.message_type, MessageType::Sccrq);
    assert_eq!(msg.avps.len(), 5);
    check_avp_hygiene(msg);
    // Both framing bits advertised.
    let framing = msg.find_avp(AvpType::FramingCapabilities).unwrap();
    assert_eq!(framing.value_as_u32().unwrap(), 0x3);
    assert_eq!(si.cc_state(), CcState::WaitCtlReply);
}

#[test]
fn sccrq_with_secret_carries_challenge() {
    let mut config = si_config();
    config.secret = Some("hunter2".into());
    let mut si = TunnelEndpoint::new(config);
    let actions = si.start(SimTime::ZERO);
    let msg = match &actions[0] {
        Action::SendControl(m) => m,
        other => panic!("unexpected {other:?}"),
    };
    let challenge = msg.find_avp(AvpType::Challenge).expect("challenge AVP");
    assert_eq!(challenge.value.len(), 16);
}

#[test]
fn sccrq_with_receive_window_carries_rws() {
    let mut config = si_config();
    config.receive_window = Some(4);
    let mut si = TunnelEndpoint::new(config);
    let actions = si.start(SimTime::ZERO);
    let msg = match &actions[0] {
        Action::SendControl(m) => m,
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(
        msg.find_avp(AvpType::ReceiveWindowSize)
            .unwrap()
            .value_as_u16()
            .unwrap(),
        4
    );
}

#[test]
fn establishment_exchanges_the_six_messages_in_order() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    assert_eq!(
        pair.non_zlb_log(),
        vec![
            (Role::Si, MessageType::Sccrq),
            (Role::Sc, MessageType::Sccrp),
            (Role::Si, MessageType::Scccn),
            (Role::Si, MessageType::Icrq),
            (Role::Sc, MessageType::Icrp),
            (Role::Si, MessageType::Iccn),
        ]
    );
    assert_eq!(pair.si.cc_state(), CcState::Established);
    assert_eq!(pair.sc.cc_state(), CcState::Established);
    assert_eq!(pair.si.session_state(), SessionState::Established);
    assert_eq!(pair.sc.session_state(), SessionState::Established);
    // Both sides observed session-up, neither went down.
    assert_eq!(pair.session_up.len(), 2);
    assert!(pair.down.is_empty());
    // Ids learned crosswise.
    assert_eq!(pair.si.remote_tunnel_id(), pair.sc.local_tunnel_id());
    assert_eq!(pair.sc.remote_tunnel_id(), pair.si.local_tunnel_id());
}

#[test]
fn establishment_with_matching_secrets() {
    let mut si = si_config();
    si.secret = Some("s3cret".into());
    let mut sc = sc_config();
    sc.secret = Some("s3cret".into());
    let mut pair = Pair::new(si, sc);
    pair.establish();
    assert_eq!(pair.si.session_state(), SessionState::Established);
    assert!(pair.down.is_empty());
    // SCCRP answered the SI challenge and challenged back; SCCCN answered.
    let log = pair.non_zlb_log();
    assert_eq!(log[1], (Role::Sc, MessageType::Sccrp));
}

#[test]
fn mismatched_secret_tears_down_with_auth_failure() {
    let mut si = si_config();
    si.secret = Some("right".into());
    let mut sc = sc_config();
    sc.secret = Some("wrong".into());
    let mut pair = Pair::new(si, sc);
    pair.establish();
    assert!(pair
        .down
        .iter()
        .any(|(_, r)| matches!(r, DownReason::AuthFailure)));
    assert!(pair.session_up.is_empty());
    // An auth-failure StopCCN crossed the wire.
    assert!(pair.log.iter().any(|(_, mt)| *mt == MessageType::StopCcn));
}

#[test]
fn challenged_peer_without_secret_fails_auth() {
    let mut si = si_config();
    si.secret = Some("s3cret".into());
    let mut pair = Pair::new(si, sc_config());
    pair.establish();
    assert!(pair
        .down
        .iter()
        .any(|(_, r)| matches!(r, DownReason::AuthFailure)));
}

#[test]
fn iccn_connect_speed_value_is_ignored() {
    // Hand-build an ICCN with a nonzero connect speed: the SC must accept
    // it and ignore the value.
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    let mut sc = TunnelEndpoint::new(sc_config());
    // Replay establishment up to WaitConnect on a fresh SC.
    let mut si = TunnelEndpoint::new(si_config());
    let start = si.start(SimTime::ZERO);
    let sccrq = match &start[0] {
        Action::SendControl(m) => m.clone(),
        _ => panic!(),
    };
    let sccrp_actions = sc.handle_control(&sccrq, SimTime::ZERO);
    let sccrp = sccrp_actions
        .iter()
        .find_map(|a| match a {
            Action::SendControl(m) => Some(m.clone()),
            _ => None,
        })
        .unwrap();
    let si_replies = si.handle_control(&sccrp, SimTime::ZERO);
    // si_replies: SCCCN then ICRQ.
    for action in &si_replies {
        if let Action::SendControl(m) = action {
            let _ = sc.handle_control(m, SimTime::ZERO);
        }
    }
    assert_eq!(sc.session_state(), SessionState::WaitConnect);
    let iccn = ControlMessage::new(
        sc.local_tunnel_id(),
        3,
        2,
        MessageType::Iccn,
        vec![Avp::connect_speed(12_345), Avp::framing_type_sync()],
    );
    let actions = sc.handle_control(&iccn, SimTime::ZERO);
    assert!(actions.iter().any(|a| matches!(a, Action::SessionUp)));
    assert_eq!(sc.session_state(), SessionState::Established);
}

#[test]
fn ocrq_is_a_protocol_violation() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    // OCRQ is message type 7, decoded as Other(7).
    let ocrq = ControlMessage::new(
        pair.si.local_tunnel_id(),
        // SC has sent SCCRP (1 message) before this.
        pair.si_next_expected_ns(),
        0,
        MessageType::Other(7),
        vec![],
    );
    let actions = pair.si.handle_control(&ocrq, pair.now);
    assert!(actions
        .iter()
        .any(|a| matches!(a, Action::TunnelDown(DownReason::ProtocolViolation(_)))));
    let stop = actions
        .iter()
        .find_map(|a| match a {
            Action::SendControl(m) if m.message_type == MessageType::StopCcn => Some(m),
            _ => None,
        })
        .expect("StopCCN sent");
    // Result code 7: fsm error.
    let rc = stop.find_avp(AvpType::ResultCode).unwrap();
    assert_eq!(u16::from_be_bytes([rc.value[0], rc.value[1]]), 7);
}

impl Pair {
    /// Ns the SI expects next from the SC (for hand-built injections).
    fn si_next_expected_ns(&self) -> u16 {
        // ReliableChannel.nr is private to the engine; recover it from the
        // session: after establishment the SC has sent SCCRP + ICRP.
        2
    }
}

#[test]
fn icrq_before_scccn_is_rejected() {
    let mut sc = TunnelEndpoint::new(sc_config());
    let mut si = TunnelEndpoint::new(si_config());
    let start = si.start(SimTime::ZERO);
    let sccrq = match &start[0] {
        Action::SendControl(m) => m.clone(),
        _ => panic!(),
    };
    let _ = sc.handle_control(&sccrq, SimTime::ZERO);
    assert_eq!(sc.cc_state(), CcState::WaitCtlConn);
    // ICRQ arrives before SCCCN.
    let icrq = ControlMessage::new(
        sc.local_tunnel_id(),
        1,
        1,
        MessageType::Icrq,
        vec![Avp::assigned_session_id(9), Avp::call_serial_number(1)],
    );
    let actions = sc.handle_control(&icrq, SimTime::ZERO);
    assert!(actions
        .iter()
        .any(|a| matches!(a, Action::TunnelDown(DownReason::ProtocolViolation(_)))));
}

#[test]
fn hello_and_dead_peer_arithmetic() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    let si = &mut pair.si;
    // Pretend the last peer traffic was at t=0.
    assert_eq!(si.next_deadline(), Some(SimTime::from_secs(60)));

    let mut hello_sent_at = None;
    let mut retransmits = Vec::new();
    let mut death_at = None;
    while let Some(deadline) = si.next_deadline() {
        let actions = si.on_timer(deadline);
        for action in actions {
            match action {
                Action::SendControl(msg) => {
                    assert_eq!(msg.message_type, MessageType::Hello);
                    if hello_sent_at.is_none() {
                        hello_sent_at = Some(deadline);
                    } else {
                        retransmits.push(deadline.as_millis() / 1000);
                    }
                }
                Action::TunnelDown(DownReason::DeadPeer) => {
                    death_at = Some(deadline);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        if death_at.is_some() {
            break;
        }
    }
    assert_eq!(hello_sent_at, Some(SimTime::from_secs(60)));
    assert_eq!(retransmits, vec![61, 63, 67, 75]);
    // Dead-end detection lands exactly 83s after the last peer traffic.
    assert_eq!(death_at, Some(SimTime::from_secs(83)));
    assert_eq!(si.cc_state(), CcState::Dead);
}

#[test]
fn sccrq_retransmits_after_one_second() {
    let mut si = TunnelEndpoint::new(si_config());
    let _ = si.start(SimTime::ZERO);
    assert_eq!(si.next_deadline(), Some(SimTime::from_secs(1)));
    let actions = si.on_timer(SimTime::from_secs(1));
    let retransmit = actions
        .iter()
        .find_map(|a| match a {
            Action::SendControl(m) => Some(m),
            _ => None,
        })
        .expect("retransmission");
    assert_eq!(retransmit.message_type, MessageType::Sccrq);
    assert_eq!(
        retransmit.header.seq.unwrap().ns,
        0,
        "same Ns as the original"
    );
}

#[test]
fn traffic_pushes_hello_deadline() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    // Deliver a HELLO from the SC at t=59: deadline moves to 119.
    let hello = ControlMessage::new(pair.si.local_tunnel_id(), 2, 4, MessageType::Hello, vec![]);
    let actions = pair.si.handle_control(&hello, SimTime::from_secs(59));
    // The HELLO is acknowledged within the step.
    assert!(actions
        .iter()
        .any(|a| matches!(a, Action::SendControl(m) if m.is_zlb())));
    assert_eq!(pair.si.next_deadline(), Some(SimTime::from_secs(119)));
}

#[test]
fn admin_teardown_sends_stopccn_and_is_idempotent() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    let actions = pair
        .si
        .teardown(DownReason::AdminStop, SimTime::from_secs(5));
    let stop = actions
        .iter()
        .find_map(|a| match a {
            Action::SendControl(m) => Some(m.clone()),
            _ => None,
        })
        .expect("StopCCN");
    assert_eq!(stop.message_type, MessageType::StopCcn);
    check_avp_hygiene(&stop);
    assert_eq!(pair.si.cc_state(), CcState::Stopping);
    assert_eq!(pair.si.session_state(), SessionState::None);

    // Peer acknowledges with ZLB: Stopping -> Dead.
    let zlb = ControlMessage::zlb(pair.si.local_tunnel_id(), 2, 5);
    let _ = pair.si.handle_control(&zlb, SimTime::from_secs(6));
    assert_eq!(pair.si.cc_state(), CcState::Dead);

    // Idempotent once dead.
    assert!(pair
        .si
        .teardown(DownReason::AdminStop, SimTime::from_secs(7))
        .is_empty());
}

#[test]
fn peer_stopccn_brings_both_session_and_tunnel_down() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    let actions = pair
        .sc
        .teardown(DownReason::AdminStop, SimTime::from_secs(9));
    pair.pump(actions, Role::Sc);
    assert_eq!(pair.si.cc_state(), CcState::Dead);
    assert_eq!(pair.si.session_state(), SessionState::None);
    assert!(pair
        .down
        .iter()
        .any(|(role, r)| *role == Role::Si && matches!(r, DownReason::PeerStop(6))));
    // SC saw its StopCCN acknowledged.
    assert_eq!(pair.sc.cc_state(), CcState::Dead);
}

#[test]
fn dead_peer_teardown_is_local_only() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    let actions = pair
        .si
        .teardown(DownReason::DeadPeer, SimTime::from_secs(90));
    assert_eq!(actions.len(), 1);
    assert!(matches!(
        actions[0],
        Action::TunnelDown(DownReason::DeadPeer)
    ));
    assert_eq!(pair.si.cc_state(), CcState::Dead);
}

#[test]
fn encapsulate_respects_mtu_and_family() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    pair.si.set_ppp_mtu(1460);
    pair.sc.set_ppp_mtu(1460);

    let now = SimTime::from_secs(1);
    let packet = vec![0x60; 1460];
    let datagram = pair.si.encapsulate(&packet, Af::V6, now).unwrap();
    assert_eq!(datagram.len(), 1460 + 2 + DATA_HEADER_LEN);

    // Boundary + 1 is refused.
    let too_big = vec![0x60; 1461];
    assert_eq!(
        pair.si.encapsulate(&too_big, Af::V6, now),
        Err(TunnelError::PacketTooBig {
            len: 1461,
            mtu: 1460
        })
    );

    // Transport-family packet must not traverse the softwire.
    assert_eq!(
        pair.si.encapsulate(&[0x45; 20], Af::V4, now),
        Err(TunnelError::WrongAddressFamily {
            expected: Af::V6,
            got: Af::V4
        })
    );
    assert_eq!(pair.si.stats().wrong_af_drops, 1);
    assert_eq!(pair.si.stats().too_big_drops, 1);

    // Round trip through the peer.
    let frame = pair.sc.decapsulate(&datagram, now).unwrap();
    assert_eq!(frame.protocol, PppProtocol::Ipv6);
    assert_eq!(frame.payload, packet);

    // Counters tally on both ends.
    assert_eq!(pair.si.stats().v6.tx_packets, 1);
    assert_eq!(pair.si.stats().v6.tx_octets, 1460);
    assert_eq!(pair.sc.stats().v6.rx_packets, 1);
    assert_eq!(pair.sc.stats().v6.rx_octets, 1460);
}

#[test]
fn encapsulate_before_session_up_fails() {
    let mut si = TunnelEndpoint::new(si_config());
    assert_eq!(
        si.encapsulate(&[0u8; 10], Af::V6, SimTime::ZERO),
        Err(TunnelError::SessionNotUp)
    );
}

#[test]
fn single_session_invariant() {
    let mut pair = Pair::new(si_config(), sc_config());
    pair.establish();
    // A second ICRQ on the same tunnel violates the single-session rule.
    // The SC has consumed SCCRQ, SCCCN, ICRQ and ICCN, so it expects Ns=4.
    let icrq = ControlMessage::new(
        pair.sc.local_tunnel_id(),
        4,
        3,
        MessageType::Icrq,
        vec![Avp::assigned_session_id(77), Avp::call_serial_number(2)],
    );
    let actions = pair.sc.handle_control(&icrq, SimTime::from_secs(1));
    assert!(actions
        .iter()
        .any(|a| matches!(a, Action::TunnelDown(DownReason::ProtocolViolation(_)))));
}
