//! Drives one softwire through its life: establishment, PPP, provisioning,
//! traffic, verification and teardown, over the simulated network.

use crate::netsim::{LinkConfig, NatConfig, SimNetwork};
use crate::provisioning::{RoutePrefix, StableStore};
use crate::time::{Duration, SimTime};
use crate::trace::{ev, Trace, TraceEvent};
use crate::tunnel::{CcState, SessionState, TunnelError};
use crate::Af;

use super::endpoint::SoftwireEndpoint;
use super::{RunReport, ScenarioConfig, SiRole};

/// Per-step budget in simulated time; generous next to the sub-second
/// happy path so only real stalls trip it.
const STEP_LIMIT: Duration = Duration::from_secs(120);

pub struct Runner {
    config: ScenarioConfig,
    net: SimNetwork,
    trace: Trace,
    si: SoftwireEndpoint,
    sc: SoftwireEndpoint,
    steps: Vec<String>,
    failed_step: Option<String>,
}

impl Runner {
    pub fn new(config: ScenarioConfig) -> Runner {
        Runner::with_stable_store(config, StableStore::default())
    }

    /// Build a runner whose concentrator remembers earlier sessions.
    pub fn with_stable_store(config: ScenarioConfig, stable: StableStore) -> Runner {
        let link = LinkConfig {
            delay_ms: config.network.delay_ms,
            loss_rate: config.network.loss_rate,
            jitter_ms: config.network.jitter_ms,
        };
        let mut net = SimNetwork::new(config.seed, link);
        net.add_host("si", config.si_ip());
        net.add_host("sc", config.sc_ip());
        if let Some(nat) = &config.network.nat {
            net.add_nat(NatConfig {
                filtering: nat.filtering,
                external_ip: config.nat_external_ip(),
                inside: vec![config.si_ip()],
                binding_ttl: Duration::from_secs(nat.binding_ttl_secs),
            });
        }
        let si = SoftwireEndpoint::new_si(&config);
        let sc = SoftwireEndpoint::new_sc(&config, stable);
        Runner {
            config,
            net,
            trace: Trace::new(),
            si,
            sc,
            steps: Vec::new(),
            failed_step: None,
        }
    }

    pub fn now(&self) -> SimTime {
        self.net.now()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn si(&self) -> &SoftwireEndpoint {
        &self.si
    }

    pub fn sc(&self) -> &SoftwireEndpoint {
        &self.sc
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Silence one host: its future transmissions never leave it.
    pub fn silence(&mut self, host: &str) {
        self.net.set_silenced(host, true);
    }

    /// No datagrams in flight.
    pub fn idle(&self) -> bool {
        self.net.next_event_at().is_none()
    }

    fn mark_step(&mut self, name: &str) {
        self.trace.push(TraceEvent::new(
            self.net.now(),
            ev::STEP,
            "runner",
            "*",
            name.to_string(),
        ));
        self.steps.push(name.to_string());
    }

    fn fail(&mut self, step: &str, what: String) {
        if self.failed_step.is_none() {
            self.failed_step = Some(format!("{step}: {what}"));
        }
        self.trace.push(TraceEvent::new(
            self.net.now(),
            ev::STEP,
            "runner",
            "*",
            format!("FAILED {step}: {what}"),
        ));
    }

    fn send_all(&mut self, from: &str, datagrams: Vec<crate::netsim::Datagram>) {
        for datagram in datagrams {
            self.net.send(&mut self.trace, from, datagram);
        }
    }

    /// Advance simulated time until `pred` holds or the limit passes,
    /// delivering datagrams and firing endpoint timers in deterministic
    /// order (network events first, then SI timers, then SC timers).
    pub fn drive_until(&mut self, limit: SimTime, mut pred: impl FnMut(&Runner) -> bool) -> bool {
        loop {
            if pred(self) {
                return true;
            }
            let mut candidates = vec![
                self.net.next_event_at(),
                self.si.next_deadline(),
                self.sc.next_deadline(),
            ];
            candidates.retain(|c| c.is_some());
            let next = match candidates.into_iter().flatten().min() {
                Some(t) => t,
                None => {
                    // Nothing scheduled at all: let the clock reach the
                    // limit so timed predicates and idle waits observe it.
                    self.net.advance(limit);
                    return pred(self);
                }
            };
            if next > limit {
                // Let the clock reach the limit so timed predicates see it.
                self.net.advance(limit);
                return pred(self);
            }
            let deliveries = self.net.advance(next);
            for delivery in deliveries {
                let now = self.net.now();
                let (endpoint, name) = if delivery.host == "si" {
                    (&mut self.si, "si")
                } else {
                    (&mut self.sc, "sc")
                };
                let out = endpoint.on_datagram(delivery.datagram, now, &mut self.trace);
                self.send_all(name, out);
            }
            let now = self.net.now();
            if self.si.next_deadline().map(|d| d <= now).unwrap_or(false) {
                let out = self.si.on_timer(now, &mut self.trace);
                self.send_all("si", out);
            }
            if self.sc.next_deadline().map(|d| d <= now).unwrap_or(false) {
                let out = self.sc.on_timer(now, &mut self.trace);
                self.send_all("sc", out);
            }
        }
    }

    fn endpoints_failed(&self) -> Option<String> {
        self.si
            .failure()
            .or(self.sc.failure())
            .map(|s| s.to_string())
    }

    /// Step 1 and 2: bring the tunnel, session and PPP link up.
    pub fn establish(&mut self) -> bool {
        self.mark_step("l2tp");
        let start = self.si.start(self.net.now(), &mut self.trace);
        self.send_all("si", start);
        let limit = self.net.now() + STEP_LIMIT;
        let ok = self.drive_until(limit, |r| {
            (r.si.tunnel().session_state() == SessionState::Established
                && r.sc.tunnel().session_state() == SessionState::Established)
                || r.endpoints_failed().is_some()
        });
        if let Some(failure) = self.endpoints_failed() {
            self.fail("l2tp", failure);
            return false;
        }
        if !ok {
            self.fail("l2tp", "establishment timed out".to_string());
            return false;
        }

        self.mark_step("ppp");
        let limit = self.net.now() + STEP_LIMIT;
        let ok = self.drive_until(limit, |r| {
            (r.si.softwire_up() && r.sc.softwire_up()) || r.endpoints_failed().is_some()
        });
        if let Some(failure) = self.endpoints_failed() {
            self.fail("ppp", failure);
            return false;
        }
        if !ok {
            self.fail("ppp", "negotiation timed out".to_string());
            return false;
        }

        self.mark_step("provision");
        let limit = self.net.now() + STEP_LIMIT;
        let ok = self.drive_until(limit, |r| {
            r.si.provisioning_done() || r.endpoints_failed().is_some()
        });
        if let Some(failure) = self.endpoints_failed() {
            self.fail("provision", failure);
            return false;
        }
        if !ok {
            self.fail("provision", "provisioning timed out".to_string());
            return false;
        }
        true
    }

    /// Inject one payload packet; `true` when it was accepted into the
    /// softwire.
    pub fn inject_payload(&mut self, from_si: bool, af: Af, size: usize) -> Option<TunnelError> {
        let now = self.net.now();
        let mut out = Vec::new();
        let (endpoint, name) = if from_si {
            (&mut self.si, "si")
        } else {
            (&mut self.sc, "sc")
        };
        let err = endpoint.send_payload(af, size, now, &mut self.trace, &mut out);
        self.send_all(name, out);
        err
    }

    /// Packets of the transport family must not traverse the softwire;
    /// packets of the payload family must. Returns true when both halves
    /// behave.
    pub fn wrong_af_check(&mut self) -> bool {
        self.mark_step("wrong-af-check");
        let wrong = self.config.transport_af;
        let right = self.config.payload_af;
        let rejected = matches!(
            self.inject_payload(true, wrong, 100),
            Some(TunnelError::WrongAddressFamily { .. })
        );
        let accepted = self.inject_payload(true, right, 100).is_none();
        let limit = self.net.now() + Duration::from_secs(5);
        self.drive_until(limit, |r| r.net.next_event_at().is_none());
        if !rejected {
            self.fail(
                "wrong-af-check",
                format!("{wrong} payload was not rejected"),
            );
        }
        if !accepted {
            self.fail(
                "wrong-af-check",
                format!("{right} payload was not forwarded"),
            );
        }
        rejected && accepted
    }

    /// Exchange the configured payload traffic.
    pub fn traffic(&mut self) {
        self.mark_step("traffic");
        let spec = self.config.traffic;
        let af = self.config.payload_af;
        for _ in 0..spec.packets_si_to_sc {
            self.inject_payload(true, af, spec.packet_bytes as usize);
        }
        for _ in 0..spec.packets_sc_to_si {
            self.inject_payload(false, af, spec.packet_bytes as usize);
        }
        let limit = self.net.now() + Duration::from_secs(30);
        self.drive_until(limit, |r| r.net.next_event_at().is_none());
    }

    /// Scenario postconditions: addresses, delegations and routes match
    /// the deployment shape.
    pub fn verify(&mut self) -> bool {
        self.mark_step("verify");
        let mut problems: Vec<String> = Vec::new();
        let config = &self.config;

        if !self.si.rib().has_default(config.payload_af) {
            problems.push("initiator default route missing".into());
        }
        match config.payload_af {
            Af::V6 => {
                if self.si.record().endpoint_v6.is_none() {
                    problems.push("no IPv6 endpoint address".into());
                }
                if self.si.record().dns_v6.is_empty() {
                    problems.push("no IPv6 DNS configuration".into());
                }
                match config.si_role {
                    SiRole::Router => {
                        let delegated = self.si.record().delegated_v6;
                        match delegated {
                            None => problems.push("router got no delegated prefix".into()),
                            Some(prefix) => {
                                if !(48..=64).contains(&prefix.len()) {
                                    problems
                                        .push(format!("delegated prefix {prefix} out of bounds"));
                                }
                                if self
                                    .sc
                                    .rib()
                                    .lookup_exact(RoutePrefix::V6(prefix))
                                    .is_none()
                                {
                                    problems.push(format!("no route for {prefix} on sc"));
                                }
                            }
                        }
                    }
                    SiRole::Host => {
                        if self.si.record().delegated_v6.is_some() {
                            problems.push("host was delegated a prefix".into());
                        }
                    }
                }
            }
            Af::V4 => {
                if self.si.record().endpoint_v4.is_none() {
                    problems.push("no IPv4 endpoint address".into());
                }
                if self.si.record().dns_v4.is_empty() {
                    problems.push("no IPv4 DNS configuration".into());
                }
                match config.si_role {
                    SiRole::Router => {
                        let delegated = self.si.record().delegated_v4;
                        match delegated {
                            None => problems.push("router got no delegated prefix".into()),
                            Some(prefix) => {
                                if !(8..=30).contains(&prefix.len()) {
                                    problems
                                        .push(format!("delegated prefix {prefix} out of bounds"));
                                }
                                if self
                                    .sc
                                    .rib()
                                    .lookup_exact(RoutePrefix::V4(prefix))
                                    .is_none()
                                {
                                    problems.push(format!("no route for {prefix} on sc"));
                                }
                            }
                        }
                    }
                    SiRole::Host => {
                        if self.si.record().delegated_v4.is_some() {
                            problems.push("host was delegated a prefix".into());
                        }
                    }
                }
            }
        }
        if let Some(problem) = problems.first() {
            self.fail("verify", problem.clone());
            return false;
        }
        true
    }

    /// Administrative teardown from the initiator, driven until both ends
    /// are dead.
    pub fn teardown(&mut self) -> bool {
        self.mark_step("teardown");
        let now = self.net.now();
        let out = self.si.admin_stop(now, &mut self.trace);
        self.send_all("si", out);
        let limit = self.net.now() + STEP_LIMIT;
        let done = self.drive_until(limit, |r| {
            r.si.tunnel().cc_state() == CcState::Dead && r.sc.tunnel().cc_state() == CcState::Dead
        });
        if !done {
            self.fail("teardown", "teardown timed out".to_string());
        }
        done
    }

    /// The whole pipeline; consumes the runner and yields the report.
    pub fn run(mut self) -> RunReport {
        let ok = self.establish();
        if ok {
            if self.config.check_wrong_af {
                self.wrong_af_check();
            }
            self.traffic();
            self.verify();
            self.teardown();
        }
        self.into_report()
    }

    /// Finish up without driving further (for partial, test-driven runs).
    pub fn into_report(mut self) -> RunReport {
        let exit_code = if self.failed_step.is_some() { 1 } else { 0 };
        RunReport {
            exit_code,
            failed_step: self.failed_step,
            steps: self.steps,
            si_stats: *self.si.tunnel().stats(),
            sc_stats: *self.sc.tunnel().stats(),
            si_record: self.si.record().clone(),
            sc_record: self.sc.record().clone(),
            si_rib: self.si.rib().entries().to_vec(),
            sc_rib: self.sc.rib().entries().to_vec(),
            accounting: self.sc.accounting(),
            stable_store: self.sc.take_stable_store(),
            trace: self.trace,
        }
    }
}
