//! OLT-side DBA master.
//!
//! Frame `k` has a fixed timeline. The DBA is invoked at
//! `k*F - dba_compute_time`, the BMap leaves the OLT at `k*F`, and the
//! upstream window it describes opens at the ONU at
//! `k*F + propagation + onu_response_time`. Allocation offsets are relative
//! to that window start.
//!
//! Layout order inside a frame: pinned near-ideal grants, then one DBRu
//! polling burst per ONU (ascending ONU id), then data grants in strict
//! priority by traffic class with FIFO by report time inside a class.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::config::PonConfig;
use super::packet::TrafficClass;
use super::tcont::TContId;
use crate::engine::{SimDuration, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportOrigin {
    OnuStatusReport,
    DuCuCooperative,
}

/// A queue-size request for one T-CONT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbruReport {
    pub tcont_id: TContId,
    pub requested_bytes: u64,
    pub origin: ReportOrigin,
    pub issued_at: SimTime,
}

/// Timing the DU+CU attaches to a cooperative report: when the uplink
/// data leaves the RU and reaches the ONU, and, for near-ideal
/// pre-allocation, the exact burst start it wants at the ONU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoopHint {
    pub departs_ru: SimTime,
    pub reaches_onu: SimTime,
    pub pinned_start: Option<SimTime>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationKind {
    Poll,
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub onu: u32,
    /// `None` for polling bursts that carry only DBRu fields.
    pub tcont_id: Option<TContId>,
    pub start_offset: SimDuration,
    pub grant_bytes: u64,
    pub kind: AllocationKind,
    /// Set when this grant realizes a near-ideal pre-allocation.
    pub pinned: bool,
}

/// Bandwidth map for one upstream frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BMap {
    pub frame_index: u64,
    pub allocations: Vec<Allocation>,
}

impl BMap {
    /// Burst windows `[start, end)` relative to the frame window start.
    pub fn windows(&self, cfg: &PonConfig) -> Vec<(SimDuration, SimDuration)> {
        self.allocations
            .iter()
            .map(|a| (a.start_offset, a.start_offset + cfg.serialize(a.grant_bytes)))
            .collect()
    }

    /// Total burst-plus-guard time, and whether bursts are disjoint with
    /// at least one guard time between them.
    pub fn check_feasible(&self, cfg: &PonConfig) -> Result<(), String> {
        let mut w = self.windows(cfg);
        w.sort();
        let used: u64 = w
            .iter()
            .map(|(s, e)| e.ns() - s.ns() + cfg.guard_time.ns())
            .sum();
        if used > cfg.frame_period.ns() {
            return Err(format!(
                "frame {} uses {} ns of a {} ns frame",
                self.frame_index,
                used,
                cfg.frame_period.ns()
            ));
        }
        for pair in w.windows(2) {
            if pair[1].0 < pair[0].1 + cfg.guard_time {
                return Err(format!(
                    "frame {}: burst at {} overlaps previous ending {}",
                    self.frame_index, pair[1].0, pair[0].1
                ));
            }
        }
        if let Some(last) = w.last() {
            if last.1 + cfg.guard_time > cfg.frame_period {
                return Err(format!("frame {}: burst runs past frame end", self.frame_index));
            }
        }
        Ok(())
    }

    pub fn wire_bytes(&self, cfg: &PonConfig) -> u64 {
        self.allocations.len() as u64 * cfg.bmap_allocation_bytes as u64
    }
}

/// Frame timeline arithmetic shared by the DBA and the ONUs.
#[derive(Clone, Copy, Debug)]
pub struct FrameClock {
    pub frame: SimDuration,
    pub compute: SimDuration,
    pub onu_lead: SimDuration,
}

impl FrameClock {
    pub fn new(cfg: &PonConfig) -> Self {
        FrameClock {
            frame: cfg.frame_period,
            compute: cfg.dba_compute_time,
            onu_lead: cfg.propagation() + cfg.onu_response_time,
        }
    }

    pub fn emission(&self, k: u64) -> SimTime {
        SimTime(k * self.frame.ns())
    }

    /// `None` for frames whose invocation would precede time zero.
    pub fn invocation(&self, k: u64) -> Option<SimTime> {
        (k * self.frame.ns()).checked_sub(self.compute.ns()).map(SimTime)
    }

    pub fn first_frame(&self) -> u64 {
        self.compute.ns().div_ceil(self.frame.ns())
    }

    /// Start of frame `k`'s upstream window at the ONU.
    pub fn window_start(&self, k: u64) -> SimTime {
        self.emission(k) + self.onu_lead
    }

    fn frame_at_or_after(&self, t: u64) -> u64 {
        t.div_ceil(self.frame.ns())
    }
}

#[derive(Clone, Debug)]
struct StatusState {
    onu: u32,
    class: TrafficClass,
    demand: i64,
    reported_at: SimTime,
    /// Grants whose bursts may not yet be reflected in the last report.
    grants: VecDeque<(SimTime, u64)>,
}

#[derive(Clone, Debug)]
struct CoopRequest {
    seq: u64,
    tcont: TContId,
    onu: u32,
    bytes: u64,
    issued_at: SimTime,
    earliest_frame: u64,
    pinned: Option<(u64, SimDuration)>,
}

#[derive(Clone, Debug)]
struct Inbound {
    arrives_at: SimTime,
    report: DbruReport,
    hint: Option<CoopHint>,
}

/// Free space in a frame as sorted, disjoint `[start, end)` gaps.
struct FrameLayout {
    gaps: Vec<(u64, u64)>,
}

impl FrameLayout {
    fn new(frame: SimDuration) -> Self {
        FrameLayout {
            gaps: vec![(0, frame.ns())],
        }
    }

    fn reserve(&mut self, start: u64, len: u64) -> bool {
        let end = start + len;
        let Some(i) = self.gaps.iter().position(|&(s, e)| s <= start && end <= e) else {
            return false;
        };
        let (s, e) = self.gaps.remove(i);
        if end < e {
            self.gaps.insert(i, (end, e));
        }
        if s < start {
            self.gaps.insert(i, (s, start));
        }
        true
    }

    /// First gap able to hold at least `min_len`; returns its start and length.
    fn first_fit(&self, min_len: u64) -> Option<(u64, u64)> {
        self.gaps
            .iter()
            .find(|(s, e)| e - s >= min_len)
            .map(|&(s, e)| (s, e - s))
    }
}

/// Statistics about DBA decisions, for the run report.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DbaStats {
    pub frames: u64,
    pub pinned_grants: u64,
    pub pin_fallbacks: u64,
    pub skipped_polls: u64,
}

pub struct DbaMaster {
    cfg: PonConfig,
    clock: FrameClock,
    onu_poll_bytes: Vec<u64>,
    status: BTreeMap<TContId, StatusState>,
    coop_tconts: BTreeMap<TContId, u32>,
    coop: Vec<CoopRequest>,
    inbox: VecDeque<Inbound>,
    next_seq: u64,
    pub stats: DbaStats,
}

impl DbaMaster {
    pub fn new(cfg: &PonConfig) -> Self {
        DbaMaster {
            cfg: cfg.clone(),
            clock: FrameClock::new(cfg),
            onu_poll_bytes: vec![0; cfg.onu_count as usize],
            status: BTreeMap::new(),
            coop_tconts: BTreeMap::new(),
            coop: Vec::new(),
            inbox: VecDeque::new(),
            next_seq: 0,
            stats: DbaStats::default(),
        }
    }

    pub fn clock(&self) -> FrameClock {
        self.clock
    }

    /// Registers a T-CONT. Every T-CONT adds one DBRu field to its ONU's
    /// polling burst; the DBA ignores the field for cooperative T-CONTs,
    /// whose demand comes from the DU+CU instead.
    pub fn register_tcont(&mut self, id: TContId, onu: u32, class: TrafficClass, cooperative: bool) {
        self.onu_poll_bytes[onu as usize] += self.cfg.dbru_bytes as u64;
        if cooperative {
            self.coop_tconts.insert(id, onu);
            return;
        }
        self.status.insert(
            id,
            StatusState {
                onu,
                class,
                demand: 0,
                reported_at: SimTime::ZERO,
                grants: VecDeque::new(),
            },
        );
    }

    pub fn poll_bytes(&self, onu: u32) -> u64 {
        self.onu_poll_bytes[onu as usize]
    }

    /// Hands a report to the DBA master; it takes effect at the first
    /// invocation at or after `arrives_at`.
    pub fn deliver(&mut self, report: DbruReport, arrives_at: SimTime, hint: Option<CoopHint>) {
        debug_assert!(report.requested_bytes > 0);
        let pos = self
            .inbox
            .iter()
            .rposition(|r| r.arrives_at <= arrives_at)
            .map_or(0, |p| p + 1);
        self.inbox.insert(
            pos,
            Inbound {
                arrives_at,
                report,
                hint,
            },
        );
    }

    /// Outstanding cooperative requests, for diagnostics.
    pub fn pending_cooperative(&self) -> usize {
        self.coop.len()
    }

    fn absorb(&mut self, now: SimTime) {
        while self.inbox.front().is_some_and(|r| r.arrives_at <= now) {
            let Inbound {
                arrives_at,
                report,
                hint,
            } = self.inbox.pop_front().expect("peeked");
            match report.origin {
                ReportOrigin::OnuStatusReport => self.absorb_status(report),
                ReportOrigin::DuCuCooperative => self.absorb_coop(report, arrives_at, hint),
            }
        }
    }

    fn absorb_status(&mut self, report: DbruReport) {
        let Some(st) = self.status.get_mut(&report.tcont_id) else {
            return;
        };
        while st.grants.front().is_some_and(|(t, _)| *t <= report.issued_at) {
            st.grants.pop_front();
        }
        let covered: u64 = st.grants.iter().map(|(_, b)| b).sum();
        st.demand = report.requested_bytes as i64 - covered as i64;
        st.reported_at = report.issued_at;
    }

    fn absorb_coop(&mut self, report: DbruReport, arrives_at: SimTime, hint: Option<CoopHint>) {
        let onu = *self
            .coop_tconts
            .get(&report.tcont_id)
            .expect("cooperative report for a T-CONT that is not cooperative");
        let clock = self.clock;
        let earliest_invocable = clock.frame_at_or_after(arrives_at.ns() + clock.compute.ns());
        let (earliest_frame, pinned) = match hint {
            Some(h) => {
                let by_departure = clock.frame_at_or_after(h.departs_ru.ns());
                let by_arrival =
                    clock.frame_at_or_after(h.reaches_onu.ns().saturating_sub(clock.onu_lead.ns()));
                let earliest = by_departure.max(by_arrival).max(earliest_invocable);
                (earliest, h.pinned_start.and_then(|s| self.pin_slot(s, earliest_invocable, report.requested_bytes)))
            }
            None => (earliest_invocable, None),
        };
        if hint.is_some_and(|h| h.pinned_start.is_some()) && pinned.is_none() {
            self.stats.pin_fallbacks += 1;
        }
        self.coop.push(CoopRequest {
            seq: self.next_seq,
            tcont: report.tcont_id,
            onu,
            bytes: report.requested_bytes,
            issued_at: report.issued_at,
            earliest_frame,
            pinned,
        });
        self.next_seq += 1;
    }

    /// Frame and offset holding a burst that starts exactly at `start`.
    fn pin_slot(&self, start: SimTime, earliest_invocable: u64, bytes: u64) -> Option<(u64, SimDuration)> {
        let rel = start.ns().checked_sub(self.clock.onu_lead.ns())?;
        let k = rel / self.clock.frame.ns();
        if k < earliest_invocable || k < self.clock.first_frame() {
            return None;
        }
        let offset = SimDuration(rel - k * self.clock.frame.ns());
        let len = self.cfg.serialize(bytes) + self.cfg.guard_time;
        (offset + len <= self.clock.frame).then_some((k, offset))
    }

    /// Runs the allocation for frame `k` at its invocation time `now`.
    pub fn compute(&mut self, k: u64, now: SimTime) -> BMap {
        self.absorb(now);
        self.stats.frames += 1;
        let cfg = &self.cfg;
        let guard = cfg.guard_time.ns();
        let window = self.clock.window_start(k);
        let mut layout = FrameLayout::new(cfg.frame_period);
        let mut allocations = Vec::new();

        // Near-ideal pre-allocations.
        for req in self.coop.iter_mut() {
            let Some((pk, off)) = req.pinned else { continue };
            if pk != k {
                continue;
            }
            let len = cfg.serialize(req.bytes).ns() + guard;
            if layout.reserve(off.ns(), len) {
                allocations.push(Allocation {
                    onu: req.onu,
                    tcont_id: Some(req.tcont),
                    start_offset: off,
                    grant_bytes: req.bytes,
                    kind: AllocationKind::Data,
                    pinned: true,
                });
                self.stats.pinned_grants += 1;
                req.bytes = 0;
            } else {
                req.pinned = None;
                req.earliest_frame = k;
                self.stats.pin_fallbacks += 1;
            }
        }

        for onu in 0..cfg.onu_count {
            let bytes = self.onu_poll_bytes[onu as usize];
            let len = cfg.serialize(bytes).ns() + guard;
            match layout.first_fit(len) {
                Some((start, _)) => {
                    layout.reserve(start, len);
                    allocations.push(Allocation {
                        onu,
                        tcont_id: None,
                        start_offset: SimDuration(start),
                        grant_bytes: bytes,
                        kind: AllocationKind::Poll,
                        pinned: false,
                    });
                }
                None => self.stats.skipped_polls += 1,
            }
        }

        // (class desc, report time, tcont, seq); seq=None marks status demand.
        let mut candidates: Vec<(std::cmp::Reverse<TrafficClass>, SimTime, TContId, Option<u64>)> =
            Vec::new();
        for (id, st) in &self.status {
            if st.demand > 0 {
                candidates.push((std::cmp::Reverse(st.class), st.reported_at, *id, None));
            }
        }
        for req in &self.coop {
            if req.bytes > 0 && req.pinned.is_none() && req.earliest_frame <= k {
                candidates.push((
                    std::cmp::Reverse(TrafficClass::Tc4),
                    req.issued_at,
                    req.tcont,
                    Some(req.seq),
                ));
            }
        }
        candidates.sort();

        let min_len = cfg.serialize(1).ns() + guard;
        for (_, _, id, seq) in candidates {
            let Some((start, gap)) = layout.first_fit(min_len) else { break };
            let fit = cfg.bytes_fitting(SimDuration(gap - guard));
            let (onu, need) = match seq {
                None => {
                    let st = &self.status[&id];
                    (st.onu, st.demand as u64)
                }
                Some(s) => {
                    let r = self.coop.iter().find(|r| r.seq == s).expect("candidate");
                    (r.onu, r.bytes)
                }
            };
            let grant = need.min(fit);
            if grant == 0 {
                continue;
            }
            layout.reserve(start, cfg.serialize(grant).ns() + guard);
            let burst_at = window + SimDuration(start);
            match seq {
                None => {
                    let st = self.status.get_mut(&id).expect("candidate");
                    st.demand -= grant as i64;
                    st.grants.push_back((burst_at, grant));
                }
                Some(s) => {
                    let r = self.coop.iter_mut().find(|r| r.seq == s).expect("candidate");
                    r.bytes -= grant;
                }
            }
            allocations.push(Allocation {
                onu,
                tcont_id: Some(id),
                start_offset: SimDuration(start),
                grant_bytes: grant,
                kind: AllocationKind::Data,
                pinned: false,
            });
        }
        self.coop.retain(|r| r.bytes > 0);

        allocations.sort_by_key(|a| a.start_offset);
        BMap {
            frame_index: k,
            allocations,
        }
    }
}
