use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::packet::TrafficClass;
use crate::engine::SimTime;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TContId(pub u32);

/// A packet waiting in a T-CONT.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueuedPacket {
    pub id: u64,
    pub size_bytes: u32,
    /// Payload plus encapsulation overhead.
    pub wire_bytes: u64,
    pub arrived_at: SimTime,
    pub foreground: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued { occupancy: u64 },
    Dropped,
}

/// Transmission container: a FIFO byte queue with Buffer Occupancy
/// accounting and byte conservation counters.
#[derive(Clone, Debug)]
pub struct TCont {
    pub id: TContId,
    pub owner_onu: u32,
    pub priority_class: TrafficClass,
    /// Served from DU+CU reports rather than ONU status reports.
    pub cooperative: bool,
    queue: VecDeque<QueuedPacket>,
    occupancy: u64,
    cap_bytes: u64,
    pub offered_bytes: u64,
    pub delivered_bytes: u64,
    pub dropped_bytes: u64,
    pub drops: u64,
}

impl TCont {
    pub fn new(id: TContId, owner_onu: u32, class: TrafficClass, cap_bytes: u64) -> Self {
        TCont {
            id,
            owner_onu,
            priority_class: class,
            cooperative: false,
            queue: VecDeque::new(),
            occupancy: 0,
            cap_bytes,
            offered_bytes: 0,
            delivered_bytes: 0,
            dropped_bytes: 0,
            drops: 0,
        }
    }

    pub fn buffer_occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueuedPacket> {
        self.queue.iter()
    }

    pub fn head(&self) -> Option<&QueuedPacket> {
        self.queue.front()
    }

    /// Appends a packet unless that would push occupancy past the cap.
    pub fn enqueue(&mut self, pkt: QueuedPacket) -> EnqueueOutcome {
        self.offered_bytes += pkt.wire_bytes;
        if self.occupancy + pkt.wire_bytes > self.cap_bytes {
            self.drops += 1;
            self.dropped_bytes += pkt.wire_bytes;
            return EnqueueOutcome::Dropped;
        }
        self.occupancy += pkt.wire_bytes;
        self.queue.push_back(pkt);
        EnqueueOutcome::Queued {
            occupancy: self.occupancy,
        }
    }

    /// Removes head-of-line packets while they fit in `grant_bytes`.
    /// Packets are never fragmented, so a head packet larger than the
    /// remaining grant stops the burst.
    pub fn dequeue_fitting(&mut self, grant_bytes: u64) -> Vec<QueuedPacket> {
        let mut left = grant_bytes;
        let mut out = Vec::new();
        while let Some(head) = self.queue.front() {
            if head.wire_bytes > left {
                break;
            }
            left -= head.wire_bytes;
            let p = self.queue.pop_front().expect("peeked");
            self.occupancy -= p.wire_bytes;
            self.delivered_bytes += p.wire_bytes;
            out.push(p);
        }
        out
    }

    /// `offered = delivered + resident + dropped`.
    pub fn conserves_bytes(&self) -> bool {
        self.offered_bytes == self.delivered_bytes + self.occupancy + self.dropped_bytes
            && self.occupancy == self.queue.iter().map(|p| p.wire_bytes).sum::<u64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(id: u64, size: u32) -> QueuedPacket {
        QueuedPacket {
            id,
            size_bytes: size,
            wire_bytes: size as u64 + 8,
            arrived_at: SimTime(0),
            foreground: false,
        }
    }

    #[test]
    fn occupancy_includes_overhead() {
        let mut t = TCont::new(TContId(0), 0, TrafficClass::Tc4, 10_000_000);
        assert_eq!(t.enqueue(pkt(1, 141)), EnqueueOutcome::Queued { occupancy: 149 });

        let mut t = TCont::new(TContId(0), 0, TrafficClass::Tc4, 10_000_000);
        t.enqueue(pkt(1, 105));
        assert_eq!(t.enqueue(pkt(2, 585)), EnqueueOutcome::Queued { occupancy: 706 });
        assert!(t.conserves_bytes());
    }

    #[test]
    fn full_queue_drops() {
        let mut t = TCont::new(TContId(0), 0, TrafficClass::Tc1, 300);
        t.enqueue(pkt(1, 141));
        t.enqueue(pkt(2, 141));
        assert_eq!(t.enqueue(pkt(3, 141)), EnqueueOutcome::Dropped);
        assert_eq!(t.drops, 1);
        assert_eq!(t.buffer_occupancy(), 298);
        assert!(t.conserves_bytes());
    }

    #[test]
    fn exact_grant_empties_queue() {
        let mut t = TCont::new(TContId(0), 0, TrafficClass::Tc4, 10_000_000);
        t.enqueue(pkt(1, 141));
        let sent = t.dequeue_fitting(149);
        assert_eq!(sent.len(), 1);
        assert_eq!(t.buffer_occupancy(), 0);
        assert!(t.conserves_bytes());
    }

    #[test]
    fn short_grant_sends_nothing() {
        let mut t = TCont::new(TContId(0), 0, TrafficClass::Tc4, 10_000_000);
        t.enqueue(pkt(1, 141));
        assert!(t.dequeue_fitting(148).is_empty());
        assert_eq!(t.buffer_occupancy(), 149);
    }

    #[test]
    fn head_of_line_blocks_smaller_followers() {
        let mut t = TCont::new(TContId(0), 0, TrafficClass::Tc2, 10_000_000);
        t.enqueue(pkt(1, 100));
        t.enqueue(pkt(2, 1000));
        t.enqueue(pkt(3, 10));
        let sent = t.dequeue_fitting(500);
        assert_eq!(sent.iter().map(|p| p.id).collect::<Vec<_>>(), vec![1]);
        assert_eq!(t.len(), 2);
    }
}
