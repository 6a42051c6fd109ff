//! Structured trace of a simulation run, one JSON object per line.
//!
//! Every observable step of a run lands here in a single totally ordered
//! stream: datagram fate on the wire, control messages with their AVP
//! lists, PPP phase changes, route churn and accounting. Tests and the
//! `stats`/`routes` commands replay the file instead of poking at live
//! state, and two runs with the same seed must produce byte-identical
//! files.
//!
//! Line schema (see `docs/trace-schema.json`):
//!
//! ```text
//! {"time":<ms>,"event":"<kind>","from":"<actor>","to":"<actor>","summary":"<text>", ...}
//! ```
//!
//! `time`/`event`/`from`/`to`/`summary` are always present; `af`, `len`,
//! `avps`, `prefix` and `next_hop` appear only where they mean something
//! (data packets, control messages, route updates).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::Af;

/// One trace line. Field order is fixed so serialization is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Simulated time in milliseconds.
    pub time: u64,
    /// Event kind, one of the `ev::*` constants.
    pub event: String,
    /// Originating actor ("si", "sc", "net", "nat").
    pub from: String,
    /// Receiving actor, or "*" when not directed.
    pub to: String,
    /// Human-readable one-liner.
    pub summary: String,
    /// Payload address family, on data-plane events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub af: Option<Af>,
    /// Payload length in bytes, on data-plane events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub len: Option<u64>,
    /// Comma-separated AVP names, on control-message events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avps: Option<String>,
    /// CIDR prefix, on route events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    /// Route next hop, on route events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next_hop: Option<String>,
}

impl TraceEvent {
    pub fn new(
        time: SimTime,
        event: &str,
        from: impl Into<String>,
        to: impl Into<String>,
        summary: impl Into<String>,
    ) -> TraceEvent {
        TraceEvent {
            time: time.as_millis(),
            event: event.to_string(),
            from: from.into(),
            to: to.into(),
            summary: summary.into(),
            af: None,
            len: None,
            avps: None,
            prefix: None,
            next_hop: None,
        }
    }

    pub fn with_payload(mut self, af: Af, len: u64) -> TraceEvent {
        self.af = Some(af);
        self.len = Some(len);
        self
    }

    pub fn with_avps(mut self, avps: String) -> TraceEvent {
        self.avps = Some(avps);
        self
    }

    pub fn with_route(mut self, prefix: String, next_hop: String) -> TraceEvent {
        self.prefix = Some(prefix);
        self.next_hop = Some(next_hop);
        self
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>10} {:<12} {}->{} {}",
            SimTime::from_millis(self.time).to_string(),
            self.event,
            self.from,
            self.to,
            self.summary
        )
    }
}

/// Event kind names used in trace lines.
pub mod ev {
    /// Control message handed to the wire.
    pub const CTRL_TX: &str = "ctrl-tx";
    /// Control message accepted by the receiving endpoint.
    pub const CTRL_RX: &str = "ctrl-rx";
    /// Data-plane packet entering the softwire.
    pub const DATA_TX: &str = "data-tx";
    /// Data-plane packet leaving the softwire.
    pub const DATA_RX: &str = "data-rx";
    /// Data-plane packet refused at the ingress (wrong family, too big).
    pub const DATA_DROP: &str = "data-drop";
    /// Datagram queued on the fabric.
    pub const NET_SEND: &str = "net-send";
    /// Datagram lost to the configured loss process.
    pub const NET_LOSS: &str = "net-loss";
    /// Datagram from a silenced host discarded.
    pub const NET_SILENCED: &str = "net-silenced";
    /// Inbound datagram discarded by a NAT's filtering behavior.
    pub const NAT_FILTERED: &str = "nat-filtered";
    /// New NAT binding allocated.
    pub const NAT_BIND: &str = "nat-bind";
    /// PPP phase or L2TP state transition.
    pub const STATE: &str = "state";
    /// L2TPv2 session fully established.
    pub const SESSION_UP: &str = "session-up";
    /// Tunnel torn down, with reason.
    pub const TUNNEL_DOWN: &str = "tunnel-down";
    /// Route installed in a simulated RIB.
    pub const ROUTE_ADD: &str = "route-add";
    /// Route removed from a simulated RIB.
    pub const ROUTE_DEL: &str = "route-del";
    /// Provisioning milestone (address assigned, prefix delegated...).
    pub const PROVISION: &str = "provision";
    /// Accounting record emitted.
    pub const ACCT: &str = "acct";
    /// Scenario-step marker emitted by the runner.
    pub const STEP: &str = "step";
}

/// In-memory trace sink. Appended to by the fabric and both endpoints;
/// rendered to JSON lines at the end of a run.
#[derive(Debug, Default)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Trace {
        Trace::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Serialize as JSON lines. Output is a pure function of the event
    /// sequence, which is what makes equal-seed runs byte-identical.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("trace event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(input: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
        input
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let mut trace = Trace::new();
        trace.push(TraceEvent::new(
            SimTime::from_millis(10),
            ev::NET_SEND,
            "si",
            "sc",
            "udp 62 bytes",
        ));
        trace.push(
            TraceEvent::new(SimTime::from_millis(20), ev::DATA_TX, "si", "sc", "payload")
                .with_payload(Af::V6, 100),
        );
        let text = trace.to_jsonl();
        let parsed = Trace::parse_jsonl(&text).unwrap();
        assert_eq!(parsed, trace.events());
    }

    #[test]
    fn optional_fields_omitted() {
        let line = serde_json::to_string(&TraceEvent::new(
            SimTime::ZERO,
            ev::STATE,
            "si",
            "*",
            "idle",
        ))
        .unwrap();
        assert!(!line.contains("\"af\""));
        assert!(!line.contains("\"len\""));
        assert!(line.starts_with("{\"time\":0,\"event\":\"state\""));
    }
}
