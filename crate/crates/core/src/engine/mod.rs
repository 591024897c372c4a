//! Deterministic discrete-event core.
//!
//! The [`Engine`] owns the virtual clock and a future-event set ordered by
//! `(fire_at, seq)`. Events that share a timestamp are dispatched in the
//! order they were scheduled. The engine is generic over the event payload,
//! so the simulation layer keeps its own state outside the queue and
//! receives `&mut Engine` in each handler to schedule follow-up events.

mod rng;
mod time;

pub use rng::RngStream;
pub use time::{round_half_up, SimDuration, SimTime, TICK_NS};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
    #[error("run_until({t_end}) is before the current clock {now}")]
    RunIntoPast { t_end: SimTime, now: SimTime },
}

/// Opaque reference to a scheduled event, usable for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A dispatched event: its firing time, tie-break sequence and payload.
#[derive(Debug)]
pub struct Event<E> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: E,
}

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.fire_at, self.seq) == (other.fire_at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.fire_at, self.seq).cmp(&(other.fire_at, other.seq))
    }
}

pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Entry<E>>>,
    cancelled: HashSet<u64>,
    dispatched: u64,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Total number of events dispatched since construction.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> Result<EventHandle, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::ScheduledInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Entry {
            fire_at,
            seq,
            payload,
        }));
        Ok(EventHandle(seq))
    }

    pub fn schedule_in(&mut self, delay: SimDuration, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload)
            .expect("relative scheduling is never in the past")
    }

    /// Cancels a pending event. Returns false if it was already dispatched
    /// or cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        let pending = self.queue.iter().any(|Reverse(e)| e.seq == handle.0);
        pending && self.cancelled.insert(handle.0)
    }

    /// Removes and returns the next live event with `fire_at <= t_end`,
    /// advancing the clock to its time.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<E>> {
        loop {
            let head = self.queue.peek()?;
            if head.0.fire_at > t_end {
                return None;
            }
            let Reverse(entry) = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now, "clock went backwards");
            self.now = entry.fire_at;
            self.dispatched += 1;
            return Some(Event {
                fire_at: entry.fire_at,
                seq: entry.seq,
                payload: entry.payload,
            });
        }
    }

    /// Dispatches every event with `fire_at <= t_end` in `(fire_at, seq)`
    /// order, including events scheduled by handlers during the call, then
    /// leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, EngineError>
    where
        F: FnMut(&mut Engine<E>, Event<E>),
    {
        if t_end < self.now {
            return Err(EngineError::RunIntoPast {
                t_end,
                now: self.now,
            });
        }
        let mut count = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            count += 1;
        }
        self.now = t_end;
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_starts_at_zero_and_advances_to_horizon() {
        let mut eng: Engine<()> = Engine::new();
        assert_eq!(eng.now(), SimTime(0));
        let n = eng.run_until(SimTime(1_000_000), |_, _| {}).unwrap();
        assert_eq!(n, 0);
        assert_eq!(eng.now(), SimTime(1_000_000));
        eng.run_until(SimTime(1_000_500), |_, _| {}).unwrap();
        assert_eq!(eng.now(), SimTime(1_000_500));
    }

    #[test]
    fn zero_delay_event_runs_before_later_ones() {
        let mut eng = Engine::new();
        eng.schedule(SimTime(10), "late").unwrap();
        eng.schedule(SimTime(0), "now").unwrap();
        let mut seen = vec![];
        eng.run_until(SimTime(20), |_, e| seen.push(e.payload)).unwrap();
        assert_eq!(seen, vec!["now", "late"]);
    }

    #[test]
    fn equal_times_dispatch_in_insertion_order() {
        let mut eng = Engine::new();
        eng.schedule(SimTime(100), "e1").unwrap();
        eng.schedule(SimTime(100), "e2").unwrap();
        let mut seen = vec![];
        eng.run_until(SimTime(100), |_, e| seen.push(e.payload)).unwrap();
        assert_eq!(seen, vec!["e1", "e2"]);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut eng: Engine<u8> = Engine::new();
        eng.run_until(SimTime(100), |_, _| {}).unwrap();
        assert_eq!(
            eng.schedule(SimTime(50), 0),
            Err(EngineError::ScheduledInPast {
                at: SimTime(50),
                now: SimTime(100)
            })
        );
        assert!(eng.run_until(SimTime(99), |_, _| {}).is_err());
    }

    #[test]
    fn run_until_stops_at_horizon() {
        let mut eng = Engine::new();
        for t in 1..=3 {
            eng.schedule(SimTime(t), t).unwrap();
        }
        assert_eq!(eng.run_until(SimTime(2), |_, _| {}).unwrap(), 2);
        assert_eq!(eng.now(), SimTime(2));
        assert_eq!(eng.pending(), 1);
    }

    #[test]
    fn handler_sees_event_time() {
        let mut eng = Engine::new();
        eng.schedule(SimTime(42), ()).unwrap();
        let mut at = None;
        eng.run_until(SimTime(100), |eng, _| at = Some(eng.now())).unwrap();
        assert_eq!(at, Some(SimTime(42)));
    }

    // Cascade worked by hand: root at t=5 schedules a and b at t=5;
    // a schedules c at t=5. Queue order by (time, seq):
    // root(seq0), then a(seq1), b(seq2), c(seq3).
    #[test]
    fn same_tick_cascade_dispatch_order() {
        #[derive(Debug, Clone, Copy, PartialEq)]
        enum Ev {
            Root,
            A,
            B,
            C,
        }
        let mut eng = Engine::new();
        eng.schedule(SimTime(5), Ev::Root).unwrap();
        let mut seen = vec![];
        let n = eng
            .run_until(SimTime(5), |eng, e| {
                seen.push((eng.now(), e.payload));
                match e.payload {
                    Ev::Root => {
                        eng.schedule_in(SimDuration::ZERO, Ev::A);
                        eng.schedule_in(SimDuration::ZERO, Ev::B);
                    }
                    Ev::A => {
                        eng.schedule_in(SimDuration::ZERO, Ev::C);
                    }
                    _ => {}
                }
            })
            .unwrap();
        assert_eq!(n, 4);
        let order: Vec<_> = seen.iter().map(|(_, e)| *e).collect();
        assert_eq!(order, vec![Ev::Root, Ev::A, Ev::B, Ev::C]);
        assert!(seen.iter().all(|(t, _)| *t == SimTime(5)));
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut eng = Engine::new();
        let h = eng.schedule(SimTime(3), "x").unwrap();
        eng.schedule(SimTime(4), "y").unwrap();
        assert!(eng.cancel(h));
        assert!(!eng.cancel(h));
        let mut seen = vec![];
        eng.run_until(SimTime(10), |_, e| seen.push(e.payload)).unwrap();
        assert_eq!(seen, vec!["y"]);
    }
}
