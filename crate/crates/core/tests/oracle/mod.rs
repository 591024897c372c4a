//! Brute-force reference for small PON scenarios.
//!
//! Walks the upstream frames one by one with plain vectors and linear
//! scans, from the allocation rules alone: one polling burst per ONU per
//! frame in ONU order, then TC4-first strict priority, FIFO by report time
//! inside a class, and truncation to whatever fits before the frame end.
//! Demand for a status-reported T-CONT is the reported occupancy minus
//! grants whose bursts start after the report was taken.

use vpon_core::pon::{serialization_time, TrafficClass};

#[derive(Clone, Copy, Debug)]
pub struct Timing {
    pub frame_ns: u64,
    pub compute_ns: u64,
    pub prop_ns: u64,
    pub response_ns: u64,
    pub guard_ns: u64,
    pub rate_bps: u64,
    pub overhead: u64,
    pub dbru_bytes: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct Arrival {
    pub at_ns: u64,
    pub onu: usize,
    /// 0..=3 for TC1..TC4 background queues; 4 for the fronthaul queue.
    pub queue: usize,
    pub size: u64,
    /// For fronthaul packets: the DU+CU request time and RU departure.
    pub coop: Option<(u64, u64)>,
}

fn ser(t: &Timing, bytes: u64) -> u64 {
    serialization_time(bytes, t.rate_bps).ns()
}

fn bytes_fitting(t: &Timing, window: u64) -> u64 {
    let mut b = 0;
    while ser(t, b + 1) <= window {
        b += 1;
    }
    b
}

struct Queue {
    onu: usize,
    class: usize,
    packets: Vec<(usize, u64)>, // (arrival index, wire bytes)
    reported: bool,
    demand: i64,
    reported_at: u64,
    grants: Vec<(u64, u64)>,
}

struct Burst {
    at: u64,
    onu: usize,
    queue: Option<usize>,
    bytes: u64,
}

/// Returns the ONU transmission start of every arrival, indexed like `arrivals`.
pub fn departures(t: &Timing, onus: usize, arrivals: &[Arrival], cooperative: bool, frames: u64) -> Vec<Option<u64>> {
    // Queue ids: onu * 4 + class for background, then the fronthaul queue last.
    let mut queues: Vec<Queue> = Vec::new();
    for onu in 0..onus {
        for class in 0..4 {
            queues.push(Queue { onu, class, packets: vec![], reported: true, demand: 0, reported_at: 0, grants: vec![] });
        }
    }
    let fh = queues.len();
    queues.push(Queue { onu: 0, class: 3, packets: vec![], reported: !cooperative, demand: 0, reported_at: 0, grants: vec![] });
    let fields = |onu: usize| queues.iter().filter(|q| q.onu == onu).count() as u64;
    let poll_bytes: Vec<u64> = (0..onus).map(|o| fields(o) * t.dbru_bytes).collect();

    let mut enqueued = vec![false; arrivals.len()];
    let mut out = vec![None; arrivals.len()];
    // (arrives_at, issued_at, queue, occupancy)
    let mut reports: Vec<(u64, u64, usize, u64)> = vec![];
    // cooperative requests: (report_at, earliest_frame, bytes_left, seq)
    let mut coop: Vec<(u64, u64, u64, usize)> = vec![];
    let mut bursts: Vec<Burst> = vec![];

    let queue_of = |a: &Arrival| if a.queue == 4 { fh } else { a.onu * 4 + a.queue };

    let execute = |b: &Burst, queues: &mut Vec<Queue>, enqueued: &mut Vec<bool>, out: &mut Vec<Option<u64>>, reports: &mut Vec<(u64, u64, usize, u64)>| {
        for (i, a) in arrivals.iter().enumerate() {
            if !enqueued[i] && a.onu == b.onu && a.at_ns <= b.at {
                enqueued[i] = true;
                queues[queue_of(a)].packets.push((i, a.size + t.overhead));
            }
        }
        // Keep queues FIFO by arrival time.
        for q in queues.iter_mut() {
            q.packets.sort_by_key(|(i, _)| (arrivals[*i].at_ns, *i));
        }
        match b.queue {
            None => {
                let arrive = b.at + ser(t, b.bytes) + t.prop_ns;
                for (qi, q) in queues.iter().enumerate() {
                    let occ: u64 = q.packets.iter().map(|p| p.1).sum();
                    if q.onu == b.onu && q.reported && occ > 0 {
                        reports.push((arrive, b.at, qi, occ));
                    }
                }
            }
            Some(qi) => {
                let mut left = b.bytes;
                let mut sent = 0;
                while let Some(&(i, w)) = queues[qi].packets.first() {
                    if w > left {
                        break;
                    }
                    out[i] = Some(b.at + ser(t, sent));
                    sent += w;
                    left -= w;
                    queues[qi].packets.remove(0);
                }
            }
        }
    };

    for (seq, a) in arrivals.iter().enumerate() {
        if let (true, Some((report_at, depart))) = (cooperative, a.coop) {
            let lead = t.prop_ns + t.response_ns;
            let k_depart = depart.div_ceil(t.frame_ns);
            let k_arrive = a.at_ns.saturating_sub(lead).div_ceil(t.frame_ns);
            let k_known = (report_at + t.compute_ns).div_ceil(t.frame_ns);
            coop.push((report_at, k_depart.max(k_arrive).max(k_known), a.size + t.overhead, seq));
        }
    }

    let first = t.compute_ns.div_ceil(t.frame_ns);
    for k in first..first + frames {
        let invoke = k * t.frame_ns - t.compute_ns;
        // Everything that happens up to the invocation.
        bursts.sort_by_key(|b| b.at);
        while bursts.first().is_some_and(|b| b.at <= invoke) {
            let b = bursts.remove(0);
            execute(&b, &mut queues, &mut enqueued, &mut out, &mut reports);
        }
        reports.sort_by_key(|r| r.0);
        while reports.first().is_some_and(|r| r.0 <= invoke) {
            let (_, issued, qi, occ) = reports.remove(0);
            let q = &mut queues[qi];
            let in_flight: u64 = q.grants.iter().filter(|g| g.0 > issued).map(|g| g.1).sum();
            q.demand = occ as i64 - in_flight as i64;
            q.reported_at = issued;
        }

        let window = k * t.frame_ns + t.prop_ns + t.response_ns;
        let mut cursor = 0u64;
        for (onu, &bytes) in poll_bytes.iter().enumerate() {
            bursts.push(Burst { at: window + cursor, onu, queue: None, bytes });
            cursor += ser(t, bytes) + t.guard_ns;
        }
        // Candidates: (class desc, time, queue id, coop seq or none)
        let mut cand: Vec<(i64, u64, usize, Option<usize>)> = vec![];
        for (qi, q) in queues.iter().enumerate() {
            if q.reported && q.demand > 0 {
                cand.push((-(q.class as i64), q.reported_at, qi, None));
            }
        }
        for c in &coop {
            if c.2 > 0 && c.1 <= k {
                cand.push((-3, c.0, fh, Some(c.3)));
            }
        }
        cand.sort();
        for (_, _, qi, cs) in cand {
            if cursor + ser(t, 1) + t.guard_ns > t.frame_ns {
                break;
            }
            let room = bytes_fitting(t, t.frame_ns - cursor - t.guard_ns);
            let need = match cs {
                None => queues[qi].demand as u64,
                Some(s) => coop.iter().find(|c| c.3 == s).unwrap().2,
            };
            let grant = need.min(room);
            if grant == 0 {
                continue;
            }
            let at = window + cursor;
            match cs {
                None => {
                    queues[qi].demand -= grant as i64;
                    queues[qi].grants.push((at, grant));
                }
                Some(s) => coop.iter_mut().find(|c| c.3 == s).unwrap().2 -= grant,
            }
            bursts.push(Burst { at, onu: queues[qi].onu, queue: Some(qi), bytes: grant });
            cursor += ser(t, grant) + t.guard_ns;
        }
    }
    bursts.sort_by_key(|b| b.at);
    for b in bursts {
        execute(&b, &mut queues, &mut enqueued, &mut out, &mut reports);
    }
    out
}

pub fn class_index(c: TrafficClass) -> usize {
    c.index()
}
