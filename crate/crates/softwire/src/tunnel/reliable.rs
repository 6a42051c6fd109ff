//! Reliable delivery for the L2TPv2 control channel: Ns/Nr sequence
//! numbers, a sliding transmit window, and exponential retransmit backoff.
//!
//! The default schedule retransmits after 1, 2, 4 and 8 seconds and
//! declares the peer dead when the fifth timeout (another 8 seconds)
//! expires, 23 seconds after the original transmission. Combined with the
//! 60-second keepalive interval that yields dead-end detection 83 seconds
//! after the last traffic from the peer.

use std::collections::VecDeque;

use crate::time::{Duration, SimTime};
use crate::wire::{ControlMessage, MessageType};

/// Retransmission parameters, all configurable.
#[derive(Debug, Clone)]
pub struct RetransmitConfig {
    /// First timeout after a transmission.
    pub base: Duration,
    /// Backoff ceiling.
    pub max: Duration,
    /// Number of timeouts before the peer is declared dead. The last
    /// timeout kills the tunnel instead of retransmitting, so `n` allows
    /// `n - 1` retransmissions.
    pub max_retransmits: u32,
}

impl Default for RetransmitConfig {
    fn default() -> RetransmitConfig {
        RetransmitConfig {
            base: Duration::from_secs(1),
            max: Duration::from_secs(8),
            max_retransmits: 5,
        }
    }
}

impl RetransmitConfig {
    /// Timeout to arm after the `n`-th transmission of a message (the
    /// original is n=0): base doubled per retransmission, capped.
    fn backoff(&self, n: u32) -> Duration {
        let mut d = self.base;
        for _ in 0..n {
            d = d.doubled();
            if d >= self.max {
                return self.max;
            }
        }
        d.min(self.max)
    }
}

#[derive(Debug)]
struct Pending {
    message: ControlMessage,
    /// Times this message has been retransmitted so far.
    retransmits: u32,
    /// Next retransmit deadline; `None` until first transmission (held
    /// back by the window).
    deadline: Option<SimTime>,
}

/// What the channel wants done after a step.
#[derive(Debug, PartialEq, Eq)]
pub enum ChannelEvent {
    /// (Re)transmit this message.
    Transmit(ControlMessage),
    /// Retransmissions exhausted; the peer is gone.
    PeerDead,
}

/// Sequence and retransmission state for one control connection.
#[derive(Debug)]
pub struct ReliableChannel {
    /// Next sequence number to assign to an outgoing message.
    ns: u16,
    /// Next sequence number expected from the peer.
    nr: u16,
    config: RetransmitConfig,
    /// Peer's advertised receive window; how many unacknowledged messages
    /// may be in flight.
    window: u16,
    queue: VecDeque<Pending>,
}

/// True if sequence number `a` is before `b` in wrapping order.
fn seq_before(a: u16, b: u16) -> bool {
    a != b && b.wrapping_sub(a) < 0x8000
}

impl ReliableChannel {
    pub fn new(config: RetransmitConfig, window: u16) -> ReliableChannel {
        ReliableChannel {
            ns: 0,
            nr: 0,
            config,
            window: window.max(1),
            queue: VecDeque::new(),
        }
    }

    pub fn ns(&self) -> u16 {
        self.ns
    }

    pub fn nr(&self) -> u16 {
        self.nr
    }

    pub fn set_window(&mut self, window: u16) {
        self.window = window.max(1);
    }

    pub fn has_pending(&self) -> bool {
        !self.queue.is_empty()
    }

    /// Queue a message for reliable delivery, assigning its Ns. Returns
    /// the transmissions allowed by the window right now.
    pub fn send(
        &mut self,
        tunnel_id: u16,
        mt: MessageType,
        avps: Vec<crate::wire::Avp>,
        now: SimTime,
    ) -> Vec<ControlMessage> {
        let message = ControlMessage::new(tunnel_id, self.ns, self.nr, mt, avps);
        self.ns = self.ns.wrapping_add(1);
        self.queue.push_back(Pending {
            message,
            retransmits: 0,
            deadline: None,
        });
        self.pump(now)
    }

    /// Transmit queued messages that fit the window.
    fn pump(&mut self, now: SimTime) -> Vec<ControlMessage> {
        let mut out = Vec::new();
        let window = self.window as usize;
        let nr = self.nr;
        let base = self.config.base;
        for pending in self.queue.iter_mut().take(window) {
            if pending.deadline.is_none() {
                pending.deadline = Some(now + base);
                let mut msg = pending.message.clone();
                if let Some(seq) = msg.header.seq.as_mut() {
                    seq.nr = nr;
                }
                out.push(msg);
            }
        }
        out
    }

    /// Apply a received Nr, dropping acknowledged messages, and release
    /// any queued messages the window now admits.
    pub fn acknowledge(&mut self, nr: u16, now: SimTime) -> Vec<ControlMessage> {
        while let Some(head) = self.queue.front() {
            let head_ns = head.message.header.seq.expect("control header").ns;
            if seq_before(head_ns, nr) {
                self.queue.pop_front();
            } else {
                break;
            }
        }
        self.pump(now)
    }

    /// Check an arriving non-ZLB message's Ns against the expected value.
    /// In order: consume it. Duplicate: re-acknowledge. Future: drop and
    /// let the peer retransmit.
    pub fn receive_seq(&mut self, ns: u16) -> SeqDisposition {
        if ns == self.nr {
            self.nr = self.nr.wrapping_add(1);
            SeqDisposition::InOrder
        } else if seq_before(ns, self.nr) {
            SeqDisposition::Duplicate
        } else {
            SeqDisposition::Future
        }
    }

    /// Earliest retransmit deadline among transmitted messages.
    pub fn next_deadline(&self) -> Option<SimTime> {
        self.queue.iter().filter_map(|p| p.deadline).min()
    }

    /// Fire due retransmit timers.
    pub fn on_timer(&mut self, now: SimTime) -> Vec<ChannelEvent> {
        let mut events = Vec::new();
        let nr = self.nr;
        for pending in self.queue.iter_mut() {
            let due = match pending.deadline {
                Some(d) => d <= now,
                None => false,
            };
            if !due {
                continue;
            }
            if pending.retransmits + 1 >= self.config.max_retransmits {
                events.push(ChannelEvent::PeerDead);
                return events;
            }
            pending.retransmits += 1;
            pending.deadline = Some(now + self.config.backoff(pending.retransmits));
            let mut msg = pending.message.clone();
            if let Some(seq) = msg.header.seq.as_mut() {
                seq.nr = nr;
            }
            events.push(ChannelEvent::Transmit(msg));
        }
        events
    }
}

/// Where an arriving sequence number falls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqDisposition {
    InOrder,
    Duplicate,
    Future,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Avp;

    fn channel() -> ReliableChannel {
        ReliableChannel::new(RetransmitConfig::default(), 4)
    }

    #[test]
    fn backoff_schedule_is_1_2_4_8_8() {
        let config = RetransmitConfig::default();
        let waits: Vec<u64> = (0..5).map(|n| config.backoff(n).as_secs()).collect();
        assert_eq!(waits, [1, 2, 4, 8, 8]);
        assert_eq!(waits.iter().sum::<u64>(), 23);
    }

    #[test]
    fn retransmit_then_dead() {
        let mut ch = channel();
        let t0 = SimTime::from_secs(60);
        let sent = ch.send(1, MessageType::Hello, vec![], t0);
        assert_eq!(sent.len(), 1);

        // Timeouts at +1, +3, +7, +15 retransmit; +23 reports death.
        let mut times = Vec::new();
        loop {
            let deadline = ch.next_deadline().unwrap();
            let events = ch.on_timer(deadline);
            assert_eq!(events.len(), 1);
            match &events[0] {
                ChannelEvent::Transmit(_) => times.push(deadline.as_millis() / 1000),
                ChannelEvent::PeerDead => {
                    times.push(deadline.as_millis() / 1000);
                    break;
                }
            }
        }
        assert_eq!(times, [61, 63, 67, 75, 83]);
    }

    #[test]
    fn ack_clears_pending() {
        let mut ch = channel();
        ch.send(
            1,
            MessageType::Sccrq,
            vec![Avp::host_name("x")],
            SimTime::ZERO,
        );
        assert!(ch.has_pending());
        ch.acknowledge(1, SimTime::from_millis(20));
        assert!(!ch.has_pending());
        assert_eq!(ch.next_deadline(), None);
    }

    #[test]
    fn window_holds_back_excess_messages() {
        let mut ch = ReliableChannel::new(RetransmitConfig::default(), 1);
        let first = ch.send(1, MessageType::Scccn, vec![], SimTime::ZERO);
        assert_eq!(first.len(), 1);
        let second = ch.send(1, MessageType::Icrq, vec![], SimTime::ZERO);
        assert!(second.is_empty(), "window of 1 holds the second message");
        // Ack of the first releases the second.
        let released = ch.acknowledge(1, SimTime::from_millis(30));
        assert_eq!(released.len(), 1);
        assert_eq!(released[0].message_type, MessageType::Icrq);
        assert_eq!(released[0].header.seq.unwrap().ns, 1);
    }

    #[test]
    fn receive_sequencing() {
        let mut ch = channel();
        assert_eq!(ch.receive_seq(0), SeqDisposition::InOrder);
        assert_eq!(ch.receive_seq(0), SeqDisposition::Duplicate);
        assert_eq!(ch.receive_seq(2), SeqDisposition::Future);
        assert_eq!(ch.receive_seq(1), SeqDisposition::InOrder);
        assert_eq!(ch.nr(), 2);
    }

    #[test]
    fn ns_increments_per_message() {
        let mut ch = channel();
        ch.send(1, MessageType::Sccrq, vec![], SimTime::ZERO);
        ch.send(1, MessageType::Scccn, vec![], SimTime::ZERO);
        assert_eq!(ch.ns(), 2);
    }

    #[test]
    fn wrapping_compare() {
        assert!(seq_before(0xFFFF, 0));
        assert!(seq_before(0, 1));
        assert!(!seq_before(1, 0));
        assert!(!seq_before(5, 5));
    }

    #[test]
    fn retransmission_carries_updated_nr() {
        let mut ch = channel();
        ch.send(1, MessageType::Hello, vec![], SimTime::ZERO);
        // Peer message arrives before our retransmit fires.
        ch.receive_seq(0);
        let events = ch.on_timer(SimTime::from_secs(1));
        match &events[0] {
            ChannelEvent::Transmit(msg) => {
                assert_eq!(msg.header.seq.unwrap().nr, 1);
                assert_eq!(msg.header.seq.unwrap().ns, 0, "Ns unchanged on retransmit");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
