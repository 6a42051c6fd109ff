use super::*;
use crate::tunnel::auth::md5_response;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    B,
}

/// Two links joined by a loss-free FIFO wire. The closure answers the
/// authenticator's verdict requests.
struct LinkPair {
    a: PppLink,
    b: PppLink,
    now: SimTime,
    phases_a: Vec<Phase>,
    up: Vec<Side>,
    dead: Vec<(Side, &'static str)>,
    auth_failed: Vec<Side>,
}

impl LinkPair {
    fn new(a: PppConfig, b: PppConfig) -> LinkPair {
        LinkPair {
            a: PppLink::new(a),
            b: PppLink::new(b),
            now: SimTime::ZERO,
            phases_a: Vec::new(),
            up: Vec::new(),
            dead: Vec::new(),
            auth_failed: Vec::new(),
        }
    }

    fn open(&mut self, verify: impl Fn(&str, u8, &[u8], &[u8]) -> bool) {
        let mut work: std::collections::VecDeque<(Side, PppEvent)> = Default::default();
        let now = self.now;
        work.extend(self.a.open(now).into_iter().map(|e| (Side::A, e)));
        work.extend(self.b.open(now).into_iter().map(|e| (Side::B, e)));
        while let Some((from, event)) = work.pop_front() {
            match event {
                PppEvent::Frame(frame) => {
                    let bytes = frame.encode();
                    let decoded = PppFrame::decode(&bytes).unwrap();
                    let (to, link) = match from {
                        Side::A => (Side::B, &mut self.b),
                        Side::B => (Side::A, &mut self.a),
                    };
                    let replies = link.handle_frame(&decoded, now);
                    work.extend(replies.into_iter().map(|e| (to, e)));
                }
                PppEvent::AuthNeeded {
                    user,
                    id,
                    challenge,
                    response,
                } => {
                    let verdict = verify(&user, id, &challenge, &response);
                    let link = match from {
                        Side::A => &mut self.a,
                        Side::B => &mut self.b,
                    };
                    let replies = link.resolve_auth(verdict, now);
                    work.extend(replies.into_iter().map(|e| (from, e)));
                }
                PppEvent::LinkUp => self.up.push(from),
                PppEvent::LinkDead(reason) => self.dead.push((from, reason)),
                PppEvent::AuthFailed => self.auth_failed.push(from),
            }
            self.phases_a.push(self.a.phase());
        }
    }
}

fn si_config() -> PppConfig {
    PppConfig::new(Role::Si, Af::V6, Af::V4, 1500, 11)
}

fn sc_config() -> PppConfig {
    PppConfig::new(Role::Sc, Af::V6, Af::V4, 1500, 12)
}

fn no_auth(_: &str, _: u8, _: &[u8], _: &[u8]) -> bool {
    panic!("no authentication expected")
}

#[test]
fn default_configs_converge_and_come_up() {
    let mut pair = LinkPair::new(si_config(), sc_config());
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);
    assert_eq!(pair.b.phase(), Phase::Up);
    assert_eq!(pair.up.len(), 2);
    assert!(pair.dead.is_empty());
    // v4 transport on a 1500 link without ACFC.
    assert_eq!(pair.a.mtu(), 1460);
    assert_eq!(pair.b.mtu(), 1460);
    assert!(!pair.a.acfc_accepted());
}

#[test]
fn phase_walk_is_monotonic_without_auth() {
    let mut pair = LinkPair::new(si_config(), sc_config());
    pair.open(no_auth);
    let mut last = Phase::Dead;
    for phase in &pair.phases_a {
        assert!(
            *phase >= last,
            "phase regressed from {last} to {phase} during establishment"
        );
        assert_ne!(*phase, Phase::Authenticating, "auth phase must be skipped");
        last = *phase;
    }
    assert_eq!(last, Phase::Up);
}

#[test]
fn acfc_proposal_is_config_rejected_and_link_still_converges() {
    let mut si = si_config();
    si.propose_acfc = true;
    let sc = sc_config(); // accept_acfc = false
    let mut pair = LinkPair::new(si, sc);
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);
    assert!(!pair.a.acfc_accepted(), "rejected ACFC must not count");
    assert_eq!(pair.a.mtu(), 1460);
}

#[test]
fn acfc_accepted_when_policy_allows() {
    let mut si = si_config();
    si.propose_acfc = true;
    let mut sc = sc_config();
    sc.accept_acfc = true;
    let mut pair = LinkPair::new(si, sc);
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);
    assert!(pair.a.acfc_accepted());
    // Two bytes back on our side of the ledger, but the send MTU stays
    // capped by the peer's advertised MRU.
    assert_eq!(pair.a.mtu(), 1460);
}

#[test]
fn chap_success_with_matching_secrets() {
    let mut si = si_config();
    si.auth = Some(AuthConfig::Credentials {
        user: "user1".into(),
        secret: "pw1".into(),
    });
    let mut sc = sc_config();
    sc.auth = Some(AuthConfig::Authenticator {
        name: "sc.example".into(),
    });
    let mut pair = LinkPair::new(si, sc);
    pair.open(|user, id, challenge, response| {
        assert_eq!(user, "user1");
        response == md5_response(id, b"pw1", challenge)
    });
    assert_eq!(pair.a.phase(), Phase::Up);
    assert_eq!(pair.b.phase(), Phase::Up);
    assert!(pair.auth_failed.is_empty());
}

#[test]
fn chap_failure_kills_the_link() {
    let mut si = si_config();
    si.auth = Some(AuthConfig::Credentials {
        user: "user1".into(),
        secret: "wrong".into(),
    });
    let mut sc = sc_config();
    sc.auth = Some(AuthConfig::Authenticator {
        name: "sc.example".into(),
    });
    let mut pair = LinkPair::new(si, sc);
    pair.open(|_, id, challenge, response| response == md5_response(id, b"pw1", challenge));
    assert_eq!(pair.b.phase(), Phase::Dead);
    assert!(!pair.auth_failed.is_empty());
    assert!(pair.up.is_empty());
}

#[test]
fn challenge_without_credentials_fails() {
    let si = si_config(); // no credentials
    let mut sc = sc_config();
    sc.auth = Some(AuthConfig::Authenticator {
        name: "sc.example".into(),
    });
    let mut pair = LinkPair::new(si, sc);
    pair.open(|_, _, _, _| true);
    assert!(pair.auth_failed.contains(&Side::A));
    assert_eq!(pair.a.phase(), Phase::Dead);
}

#[test]
fn ipv6cp_distinct_identifiers_ack_immediately() {
    let mut si = si_config();
    si.iid = Some(0xA);
    let mut sc = sc_config();
    sc.iid = Some(0xB);
    let mut pair = LinkPair::new(si, sc);
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);
    assert_eq!(pair.a.local_iid(), 0xA);
    assert_eq!(pair.a.remote_iid(), Some(0xB));
    assert_eq!(pair.b.remote_iid(), Some(0xA));
}

#[test]
fn ipv6cp_collision_is_naked_to_uniqueness() {
    let mut si = si_config();
    si.iid = Some(0x7);
    let mut sc = sc_config();
    sc.iid = Some(0x7);
    let mut pair = LinkPair::new(si, sc);
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);
    assert_eq!(pair.b.phase(), Phase::Up);
    let a_local = pair.a.local_iid();
    let b_local = pair.b.local_iid();
    assert_ne!(a_local, b_local, "identifiers must end up distinct");
    assert_eq!(pair.a.remote_iid(), Some(b_local));
    assert_eq!(pair.b.remote_iid(), Some(a_local));
}

#[test]
fn aaa_interface_id_override_lands_in_the_request() {
    let si = si_config();
    let mut sc = sc_config();
    sc.iid = Some(0xDEAD_BEEF_0000_0001);
    let mut pair = LinkPair::new(si, sc);
    pair.open(no_auth);
    assert_eq!(pair.a.remote_iid(), Some(0xDEAD_BEEF_0000_0001));
}

fn ipcp_si() -> PppConfig {
    let mut c = PppConfig::new(Role::Si, Af::V4, Af::V6, 1500, 21);
    c.request_dns = true;
    c
}

fn ipcp_sc(assigned: &str) -> PppConfig {
    let mut c = PppConfig::new(Role::Sc, Af::V4, Af::V6, 1500, 22);
    c.local_ipv4 = Some("198.51.100.254".parse().unwrap());
    c.peer_ipv4 = Some(assigned.parse().unwrap());
    c.dns_servers = vec!["192.0.2.53".parse().unwrap()];
    c
}

#[test]
fn ipcp_assigns_the_configured_address() {
    let mut pair = LinkPair::new(ipcp_si(), ipcp_sc("192.0.2.10"));
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);
    assert_eq!(pair.a.local_ipv4(), Some("192.0.2.10".parse().unwrap()));
    assert_eq!(pair.b.remote_ipv4(), Some("192.0.2.10".parse().unwrap()));
    assert_eq!(
        pair.a.remote_ipv4(),
        Some("198.51.100.254".parse().unwrap())
    );
    // v6 transport: 1500 - 40 - 8 - 8 - 4.
    assert_eq!(pair.a.mtu(), 1440);
}

#[test]
fn ipcp_serves_dns_when_requested() {
    let mut pair = LinkPair::new(ipcp_si(), ipcp_sc("192.0.2.10"));
    pair.open(no_auth);
    assert_eq!(pair.a.dns(), &["192.0.2.53".parse::<Ipv4Addr>().unwrap()]);
}

#[test]
fn ipcp_without_assignable_address_dies() {
    let mut sc = ipcp_sc("192.0.2.10");
    sc.peer_ipv4 = None;
    let mut pair = LinkPair::new(ipcp_si(), sc);
    pair.open(no_auth);
    assert!(pair
        .dead
        .iter()
        .any(|(_, reason)| *reason == "ipv4 pool exhausted"));
}

#[test]
fn echo_exchange_and_death() {
    let interval = Duration::from_secs(30);
    let mut si = si_config();
    si.echo = Some(EchoConfig {
        interval,
        max_missed: 3,
    });
    let sc = sc_config();
    let mut pair = LinkPair::new(si, sc);
    pair.open(no_auth);
    assert_eq!(pair.a.phase(), Phase::Up);

    // Healthy exchange: request at each interval, reply resets the count.
    let t1 = pair.a.next_deadline().unwrap();
    assert_eq!(t1, SimTime::from_secs(30));
    let events = pair.a.on_timer(t1);
    let request = match &events[..] {
        [PppEvent::Frame(f)] => f.clone(),
        other => panic!("unexpected {other:?}"),
    };
    let replies = pair.b.handle_frame(&request, t1);
    let reply = match &replies[..] {
        [PppEvent::Frame(f)] => f.clone(),
        other => panic!("unexpected {other:?}"),
    };
    assert!(pair.a.handle_frame(&reply, t1).is_empty());

    // Silence: three unanswered requests, then the link dies.
    let mut deaths = Vec::new();
    for _ in 0..4 {
        let at = match pair.a.next_deadline() {
            Some(at) => at,
            None => break,
        };
        for event in pair.a.on_timer(at) {
            if let PppEvent::LinkDead(reason) = event {
                deaths.push((at, reason));
            }
        }
    }
    assert_eq!(deaths.len(), 1);
    assert_eq!(deaths[0].1, "lcp echo timeout");
    // Death on the 4th tick: 3 missed + the tick that notices.
    assert_eq!(deaths[0].0, SimTime::from_secs(30 + 4 * 30));
    assert_eq!(pair.a.phase(), Phase::Dead);
}

#[test]
fn echo_interval_clamping() {
    use crate::tunnel::KeepaliveConfig;
    // Below the 10s floor.
    let mut ka = KeepaliveConfig {
        lcp_echo_interval_secs: 5,
        ..KeepaliveConfig::default()
    };
    assert_eq!(ka.effective_echo_interval(), Duration::from_secs(10));
    // Default 30 under a 60s HELLO is valid as-is.
    ka.lcp_echo_interval_secs = 30;
    assert_eq!(ka.effective_echo_interval(), Duration::from_secs(30));
    // Ceiling is min(hello, 60).
    ka.hello_interval_secs = Some(45);
    ka.lcp_echo_interval_secs = 50;
    assert_eq!(ka.effective_echo_interval(), Duration::from_secs(45));
    ka.hello_interval_secs = Some(120);
    ka.lcp_echo_interval_secs = 90;
    assert_eq!(ka.effective_echo_interval(), Duration::from_secs(60));
}

#[test]
fn exactly_one_ncp_is_negotiated() {
    // A v6 link silently ignores IPCP frames.
    let mut pair = LinkPair::new(si_config(), sc_config());
    pair.open(no_auth);
    let stray = PppFrame::new(
        PppProtocol::Ipcp,
        CpPacket::config(CpCode::ConfigureRequest, 9, &[]).encode(),
    );
    assert!(pair
        .a
        .handle_frame(&stray, SimTime::from_secs(1))
        .is_empty());
}
