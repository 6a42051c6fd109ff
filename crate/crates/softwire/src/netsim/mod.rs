//! Deterministic discrete-event fabric carrying UDP-like datagrams between
//! simulated hosts, through an ordered list of NAT middleboxes.
//!
//! Events are processed in strict `(time, insertion sequence)` order and
//! every random choice (loss, jitter) comes from one seeded generator, so
//! equal seeds and configuration give byte-identical traces. Drops are
//! never errors: a lost, silenced or NAT-filtered datagram becomes a trace
//! event and life goes on, exactly like the real thing.

pub mod nat;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::net::IpAddr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::time::{Duration, SimTime};
use crate::trace::{ev, Trace, TraceEvent};

pub use nat::{FilterReason, Filtering, NatBox, NatConfig};

/// A transport endpoint on the fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: IpAddr,
    pub port: u16,
}

impl Endpoint {
    pub fn new(ip: IpAddr, port: u16) -> Endpoint {
        Endpoint { ip, port }
    }

    fn tuple(self) -> (IpAddr, u16) {
        (self.ip, self.port)
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.ip {
            IpAddr::V4(ip) => write!(f, "{}:{}", ip, self.port),
            IpAddr::V6(ip) => write!(f, "[{}]:{}", ip, self.port),
        }
    }
}

/// One UDP-like datagram in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub payload: Vec<u8>,
}

/// A datagram handed to a host by [`SimNetwork::advance`].
#[derive(Debug, Clone)]
pub struct Delivery {
    pub at: SimTime,
    pub host: String,
    pub datagram: Datagram,
}

/// Link parameters applied to every datagram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkConfig {
    /// One-way delay in milliseconds.
    pub delay_ms: u64,
    /// Independent per-datagram loss probability.
    pub loss_rate: f64,
    /// Extra random delay in 0..=jitter_ms; nonzero values allow
    /// reordering, which the reliable control channel must absorb.
    pub jitter_ms: u64,
}

impl Default for LinkConfig {
    fn default() -> LinkConfig {
        LinkConfig {
            delay_ms: 10,
            loss_rate: 0.0,
            jitter_ms: 0,
        }
    }
}

#[derive(Debug)]
struct Host {
    name: String,
    ip: IpAddr,
    /// A silenced host's outbound datagrams vanish at the source; used to
    /// model a dead peer without touching its state machine.
    silenced: bool,
}

#[derive(Debug)]
struct Scheduled {
    at: SimTime,
    seq: u64,
    datagram: Datagram,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// The message-passing fabric: virtual clock, registered hosts, NAT list
/// and the time-ordered event queue.
#[derive(Debug)]
pub struct SimNetwork {
    clock: SimTime,
    seq: u64,
    link: LinkConfig,
    hosts: BTreeMap<String, Host>,
    nats: Vec<NatBox>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    rng: ChaCha8Rng,
}

impl SimNetwork {
    pub fn new(seed: u64, link: LinkConfig) -> SimNetwork {
        SimNetwork {
            clock: SimTime::ZERO,
            seq: 0,
            link,
            hosts: BTreeMap::new(),
            nats: Vec::new(),
            queue: BinaryHeap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6e65_7473_696d), // "netsim"
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn add_host(&mut self, name: &str, ip: IpAddr) {
        self.hosts.insert(
            name.to_string(),
            Host {
                name: name.to_string(),
                ip,
                silenced: false,
            },
        );
    }

    pub fn add_nat(&mut self, config: NatConfig) {
        self.nats.push(NatBox::new(config));
    }

    /// Mute a host: everything it sends from now on is discarded at the
    /// source while it keeps receiving. Models a peer that went dark.
    pub fn set_silenced(&mut self, name: &str, silenced: bool) {
        if let Some(host) = self.hosts.get_mut(name) {
            host.silenced = silenced;
        }
    }

    fn host_name_for(&self, ip: IpAddr) -> Option<&str> {
        self.hosts
            .values()
            .find(|h| h.ip == ip)
            .map(|h| h.name.as_str())
    }

    /// Submit a datagram at the current clock. It traverses the NAT list
    /// (translation and filtering), may be lost, and is otherwise scheduled
    /// for delivery after the link delay. Every outcome is traced.
    pub fn send(&mut self, trace: &mut Trace, from: &str, mut datagram: Datagram) {
        let now = self.clock;
        if self.hosts.get(from).map(|h| h.silenced).unwrap_or(false) {
            trace.push(TraceEvent::new(
                now,
                ev::NET_SILENCED,
                from,
                "*",
                format!(
                    "{} bytes discarded at silenced source",
                    datagram.payload.len()
                ),
            ));
            return;
        }

        // Outbound leg: sources behind a NAT get translated, in list order.
        for nat in &mut self.nats {
            if nat.is_inside(datagram.src.ip) {
                let (ext, created) = nat.outbound(datagram.src.tuple(), datagram.dst.tuple(), now);
                if created {
                    trace.push(TraceEvent::new(
                        now,
                        ev::NAT_BIND,
                        "nat",
                        from,
                        format!("{} -> {}", datagram.src, Endpoint::new(ext.0, ext.1)),
                    ));
                }
                datagram.src = Endpoint::new(ext.0, ext.1);
            }
        }
        // Inbound leg: destinations matching a NAT's external address are
        // filtered and rewritten, nearest NAT last.
        for nat in self.nats.iter_mut().rev() {
            if datagram.dst.ip == nat.external_ip() {
                match nat.inbound(datagram.dst.tuple(), datagram.src.tuple(), now) {
                    Ok(internal) => {
                        datagram.dst = Endpoint::new(internal.0, internal.1);
                    }
                    Err(reason) => {
                        trace.push(TraceEvent::new(
                            now,
                            ev::NAT_FILTERED,
                            from,
                            "nat",
                            format!(
                                "{} -> {} dropped ({}, {})",
                                datagram.src,
                                datagram.dst,
                                nat.config().filtering,
                                reason
                            ),
                        ));
                        return;
                    }
                }
            }
        }

        if self.link.loss_rate > 0.0 && self.rng.gen::<f64>() < self.link.loss_rate {
            trace.push(TraceEvent::new(
                now,
                ev::NET_LOSS,
                from,
                "*",
                format!("{} bytes lost", datagram.payload.len()),
            ));
            return;
        }

        let mut delay = Duration::from_millis(self.link.delay_ms);
        if self.link.jitter_ms > 0 {
            delay = delay + Duration::from_millis(self.rng.gen_range(0..=self.link.jitter_ms));
        }
        let to = self
            .host_name_for(datagram.dst.ip)
            .unwrap_or("?")
            .to_string();
        trace.push(TraceEvent::new(
            now,
            ev::NET_SEND,
            from,
            to,
            format!(
                "{} -> {} udp {} bytes",
                datagram.src,
                datagram.dst,
                datagram.payload.len()
            ),
        ));
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            at: now + delay,
            seq: self.seq,
            datagram,
        }));
    }

    /// Earliest pending delivery, if any.
    pub fn next_event_at(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(s)| s.at)
    }

    /// Advance the clock to `until`, collecting every delivery due on the
    /// way in deterministic order. Datagrams addressed to an unknown host
    /// fall off the edge of the world silently (cannot happen from within
    /// a configured scenario).
    pub fn advance(&mut self, until: SimTime) -> Vec<Delivery> {
        debug_assert!(until >= self.clock);
        let mut out = Vec::new();
        while let Some(Reverse(head)) = self.queue.peek() {
            if head.at > until {
                break;
            }
            let Reverse(event) = self.queue.pop().expect("peeked");
            self.clock = event.at;
            if let Some(host) = self.host_name_for(event.datagram.dst.ip) {
                out.push(Delivery {
                    at: event.at,
                    host: host.to_string(),
                    datagram: event.datagram,
                });
            }
        }
        self.clock = until;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(s: &str) -> IpAddr {
        s.parse().unwrap()
    }

    fn two_hosts(link: LinkConfig) -> (SimNetwork, Trace) {
        let mut net = SimNetwork::new(7, link);
        net.add_host("si", ip("192.0.2.1"));
        net.add_host("sc", ip("192.0.2.10"));
        (net, Trace::new())
    }

    fn dgram(payload: &[u8]) -> Datagram {
        Datagram {
            src: Endpoint::new(ip("192.0.2.1"), 1701),
            dst: Endpoint::new(ip("192.0.2.10"), 1701),
            payload: payload.to_vec(),
        }
    }

    #[test]
    fn plain_delivery_after_delay() {
        let (mut net, mut trace) = two_hosts(LinkConfig::default());
        net.send(&mut trace, "si", dgram(b"hello"));
        assert_eq!(net.next_event_at(), Some(SimTime::from_millis(10)));
        let deliveries = net.advance(SimTime::from_millis(10));
        assert_eq!(deliveries.len(), 1);
        assert_eq!(deliveries[0].host, "sc");
        assert_eq!(deliveries[0].at, SimTime::from_millis(10));
        assert_eq!(net.now(), SimTime::from_millis(10));
    }

    #[test]
    fn certain_loss_is_traced_not_delivered() {
        let (mut net, mut trace) = two_hosts(LinkConfig {
            loss_rate: 1.0,
            ..LinkConfig::default()
        });
        net.send(&mut trace, "si", dgram(b"hello"));
        assert!(net.advance(SimTime::from_secs(1)).is_empty());
        assert_eq!(trace.events().len(), 1);
        assert_eq!(trace.events()[0].event, ev::NET_LOSS);
    }

    #[test]
    fn silenced_host_sends_nothing() {
        let (mut net, mut trace) = two_hosts(LinkConfig::default());
        net.set_silenced("si", true);
        net.send(&mut trace, "si", dgram(b"hello"));
        assert!(net.advance(SimTime::from_secs(1)).is_empty());
        assert_eq!(trace.events()[0].event, ev::NET_SILENCED);
    }

    #[test]
    fn unsolicited_inbound_through_nat_is_filtered() {
        let mut net = SimNetwork::new(7, LinkConfig::default());
        net.add_host("si", ip("10.0.0.2"));
        net.add_host("sc", ip("192.0.2.10"));
        net.add_nat(NatConfig {
            filtering: Filtering::EndpointIndependent,
            external_ip: ip("203.0.113.1"),
            inside: vec![ip("10.0.0.2")],
            binding_ttl: Duration::from_secs(120),
        });
        let mut trace = Trace::new();
        net.send(
            &mut trace,
            "sc",
            Datagram {
                src: Endpoint::new(ip("192.0.2.10"), 1701),
                dst: Endpoint::new(ip("203.0.113.1"), 40_000),
                payload: b"knock".to_vec(),
            },
        );
        assert!(net.advance(SimTime::from_secs(1)).is_empty());
        assert_eq!(trace.events()[0].event, ev::NAT_FILTERED);
    }

    #[test]
    fn nat_translates_both_directions() {
        let mut net = SimNetwork::new(7, LinkConfig::default());
        net.add_host("si", ip("10.0.0.2"));
        net.add_host("sc", ip("192.0.2.10"));
        net.add_nat(NatConfig {
            filtering: Filtering::AddressAndPortDependent,
            external_ip: ip("203.0.113.1"),
            inside: vec![ip("10.0.0.2")],
            binding_ttl: Duration::from_secs(120),
        });
        let mut trace = Trace::new();
        net.send(
            &mut trace,
            "si",
            Datagram {
                src: Endpoint::new(ip("10.0.0.2"), 1701),
                dst: Endpoint::new(ip("192.0.2.10"), 1701),
                payload: b"syn".to_vec(),
            },
        );
        let out = net.advance(SimTime::from_millis(10));
        assert_eq!(out.len(), 1);
        let seen_src = out[0].datagram.src;
        assert_eq!(seen_src, Endpoint::new(ip("203.0.113.1"), 40_000));

        // Reply to the tuple the SC observed.
        net.send(
            &mut trace,
            "sc",
            Datagram {
                src: Endpoint::new(ip("192.0.2.10"), 1701),
                dst: seen_src,
                payload: b"ack".to_vec(),
            },
        );
        let back = net.advance(SimTime::from_millis(20));
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].host, "si");
        assert_eq!(back[0].datagram.dst, Endpoint::new(ip("10.0.0.2"), 1701));
    }

    #[test]
    fn equal_times_deliver_in_insertion_order() {
        let (mut net, mut trace) = two_hosts(LinkConfig::default());
        net.send(&mut trace, "si", dgram(b"first"));
        net.send(&mut trace, "si", dgram(b"second"));
        let out = net.advance(SimTime::from_millis(10));
        assert_eq!(out[0].datagram.payload, b"first");
        assert_eq!(out[1].datagram.payload, b"second");
    }

    #[test]
    fn advance_to_now_is_noop() {
        let (mut net, mut trace) = two_hosts(LinkConfig::default());
        net.send(&mut trace, "si", dgram(b"x"));
        assert!(net.advance(SimTime::ZERO).is_empty());
        assert_eq!(net.next_event_at(), Some(SimTime::from_millis(10)));
    }
}
