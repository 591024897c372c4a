//! Event wiring for one run: LTE grants, the DBA frame cycle, ONU bursts
//! and the ACK return path, with runtime invariant checks and an optional
//! event log.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{Engine, EngineError, RngStream, SimDuration, SimTime};
use crate::lte::{issue_grant, uplink_data_emit, GrantPredictor};
use crate::metrics::{
    jitter, ngmn_margin, record_rtt, summarize, BudgetMeans, Histogram, ProcessingMode, RttSample,
    RunReport,
};
use crate::pon::{
    compose_cooperative_latency, compose_unsynchronised_latency, Allocation, AllocationKind, BMap,
    BudgetLedger, CoopHint, DbaMaster, DbaStats, DbruReport, EnqueueOutcome, FrameClock, Interval,
    PonConfig, QueuedPacket, ReportOrigin, TCont, TContId, TrafficClass,
};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::traffic::{background_sources, BackgroundSource, ScriptedArrival};

/// Slack after the configured duration for in-flight packets to finish.
const DRAIN: SimDuration = SimDuration::from_ms(20);
/// Tolerance, in ticks, of the budget and RTT identities.
const IDENTITY_TOLERANCE: u64 = 2;
const BACKGROUND_ID_BASE: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{} invariant violation(s); first: {}", .0.len(), .0[0])]
    Invariant(Vec<String>),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    pub event_log: bool,
    /// Keep the ONU transmission start of every packet.
    pub record_departures: bool,
}

/// Per-packet timestamps of one foreground transport block.
#[derive(Clone, Debug, PartialEq)]
pub struct ForegroundRecord {
    pub id: u64,
    pub size_bytes: u32,
    pub report_at: SimTime,
    pub ru_depart: SimTime,
    pub onu_arrive: SimTime,
    pub poll_at: Option<SimTime>,
    pub dbru_at_olt: Option<SimTime>,
    pub bmap_emit: Option<SimTime>,
    pub bmap_arrive: Option<SimTime>,
    pub tx_start: Option<SimTime>,
    pub olt_arrive: Option<SimTime>,
    pub du_arrive: Option<SimTime>,
    pub ack_at_ru: Option<SimTime>,
    pub pinned: bool,
    pub dropped: bool,
    pub ledger: BudgetLedger,
    pub composed: Option<SimDuration>,
}

impl ForegroundRecord {
    /// RU departure to DU+CU arrival, as measured.
    pub fn one_way(&self) -> Option<SimDuration> {
        Some(self.du_arrive? - self.ru_depart)
    }

    pub fn rtt(&self) -> Option<SimDuration> {
        Some(self.ack_at_ru? - self.ru_depart)
    }
}

/// When and where any packet left its ONU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DepartureRecord {
    pub packet_id: u64,
    pub onu: u32,
    pub tcont: TContId,
    pub size_bytes: u32,
    pub arrived_at: SimTime,
    pub departed_at: SimTime,
}

pub struct RunOutput {
    pub report: RunReport,
    pub rtt_histogram: Histogram,
    pub jitter_histogram: Histogram,
    pub event_log: Option<String>,
    pub foreground: Vec<ForegroundRecord>,
    pub departures: Vec<DepartureRecord>,
    pub dba: DbaStats,
}

#[derive(Debug)]
enum Ev {
    LteReport { subframe: u64, report_id: u64 },
    RuDepart { fg: usize },
    DbaInvoke { frame: u64 },
    BmapArrive { frame: u64 },
    Burst { alloc: Allocation, emit: SimTime, arrive: SimTime },
    DuArrive { fg: usize },
    AckAtRu { fg: usize },
}

struct Onu {
    /// T-CONT index per traffic class.
    by_class: [usize; 4],
    sources: Vec<BackgroundSource>,
    scripted: VecDeque<ScriptedArrival>,
    pending_fg: VecDeque<(SimTime, usize)>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    pon: PonConfig,
    opts: SimOptions,
    clock: FrameClock,
    dba: DbaMaster,
    tconts: Vec<TCont>,
    onus: Vec<Onu>,
    fronthaul: usize,
    fg: Vec<ForegroundRecord>,
    predictor: GrantPredictor,
    bmaps: BTreeMap<u64, BMap>,
    processing_rng: RngStream,
    next_bg_id: u64,
    last_burst_end: Option<SimTime>,
    violations: Vec<String>,
    log: Option<String>,
    departures: Vec<DepartureRecord>,
    end: SimTime,
    horizon: SimTime,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, opts: SimOptions) -> Self {
        let pon = cfg.pon.clone();
        let mut dba = DbaMaster::new(&pon);
        let sources = background_sources(
            &cfg.load,
            pon.onu_count,
            pon.line_rate_bps,
            cfg.lte.foreground_bps(),
            cfg.seed,
        );
        let mut tconts = Vec::new();
        let mut onus = Vec::new();
        for onu in 0..pon.onu_count {
            let mut by_class = [0; 4];
            for class in TrafficClass::ALL {
                let id = TContId(tconts.len() as u32);
                by_class[class.index()] = tconts.len();
                tconts.push(TCont::new(id, onu, class, pon.tcont_queue_cap_bytes));
                dba.register_tcont(id, onu, class, false);
            }
            let mut scripted: Vec<_> = cfg.load.scripted.iter().filter(|s| s.onu == onu).copied().collect();
            scripted.sort_by_key(|s| s.at);
            onus.push(Onu {
                by_class,
                sources: sources.iter().filter(|s| s.onu == onu).cloned().collect(),
                scripted: scripted.into(),
                pending_fg: VecDeque::new(),
            });
        }
        let fronthaul = tconts.len();
        let mut fh = TCont::new(TContId(fronthaul as u32), 0, TrafficClass::Tc4, pon.tcont_queue_cap_bytes);
        fh.cooperative = cfg.scenario.is_cooperative();
        dba.register_tcont(fh.id, 0, TrafficClass::Tc4, fh.cooperative);
        tconts.push(fh);

        let end = SimTime::ZERO + cfg.duration();
        Simulation {
            clock: dba.clock(),
            dba,
            pon,
            opts,
            tconts,
            onus,
            fronthaul,
            fg: Vec::new(),
            predictor: GrantPredictor::new(),
            bmaps: BTreeMap::new(),
            processing_rng: RngStream::new(cfg.seed, 0),
            next_bg_id: BACKGROUND_ID_BASE,
            last_burst_end: None,
            violations: Vec::new(),
            log: opts.event_log.then(String::new),
            departures: Vec::new(),
            end,
            horizon: end + DRAIN,
            cfg: cfg.clone(),
        }
    }

    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let mut engine: Engine<Ev> = Engine::new();
        let first = self.clock.first_frame();
        engine.schedule(self.clock.invocation(first).expect("first frame"), Ev::DbaInvoke { frame: first })?;
        if self.cfg.lte.grant_limit != Some(0) && self.cfg.lte.subframe_start(0) < self.end {
            engine.schedule(
                self.cfg.lte.subframe_start(0),
                Ev::LteReport {
                    subframe: 0,
                    report_id: 0,
                },
            )?;
        }
        let mut failure = None;
        engine.run_until(self.horizon, |eng, ev| {
            if failure.is_none() {
                if let Err(e) = self.dispatch(eng, ev.fire_at, ev.payload) {
                    failure = Some(e);
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        self.final_checks();
        if !self.violations.is_empty() {
            return Err(SimError::Invariant(self.violations));
        }
        Ok(self.finish())
    }

    fn log(&mut self, t: SimTime, entity: &str, event: &str, packet: Option<u64>, detail: &str) {
        if let Some(log) = self.log.as_mut() {
            let pid = packet.map_or(String::new(), |p| p.to_string());
            let _ = writeln!(log, "{},{entity},{event},{pid},{detail}", t.ns());
        }
    }

    fn violation(&mut self, msg: String) {
        if self.violations.len() < 100 {
            self.violations.push(msg);
        }
    }

    fn dispatch(&mut self, eng: &mut Engine<Ev>, now: SimTime, ev: Ev) -> Result<(), EngineError> {
        match ev {
            Ev::LteReport { subframe, report_id } => self.on_lte_report(eng, now, subframe, report_id),
            Ev::RuDepart { fg } => {
                let r = &self.fg[fg];
                let (id, t1) = (r.id, r.onu_arrive);
                self.onus[0].pending_fg.push_back((t1, fg));
                self.log(now, "ru", "depart", Some(id), "");
                Ok(())
            }
            Ev::DbaInvoke { frame } => self.on_dba_invoke(eng, now, frame),
            Ev::BmapArrive { frame } => self.on_bmap_arrive(eng, now, frame),
            Ev::Burst { alloc, emit, arrive } => self.on_burst(eng, now, alloc, emit, arrive),
            Ev::DuArrive { fg } => self.on_du_arrive(eng, now, fg),
            Ev::AckAtRu { fg } => {
                self.fg[fg].ack_at_ru = Some(now);
                let id = self.fg[fg].id;
                self.log(now, "ru", "ack", Some(id), "");
                Ok(())
            }
        }
    }

    fn on_lte_report(
        &mut self,
        eng: &mut Engine<Ev>,
        now: SimTime,
        subframe: u64,
        report_id: u64,
    ) -> Result<(), EngineError> {
        let lte = self.cfg.lte.clone();
        let report = issue_grant(&lte, report_id, subframe);
        self.log(now, "lte", "report", Some(report_id), &format!("tb={}", report.allocated_tb_bytes));

        if let Some((t0, pkt)) = uplink_data_emit(&lte, &report) {
            if t0 - now != lte.trigger_delay() {
                self.violation(format!("packet {} emitted {} after its report", pkt.id, t0 - now));
            }
            let t1 = t0 + self.pon.ru_to_onu(pkt.size_bytes);
            let idx = self.fg.len();
            self.fg.push(ForegroundRecord {
                id: pkt.id,
                size_bytes: pkt.size_bytes,
                report_at: now,
                ru_depart: t0,
                onu_arrive: t1,
                poll_at: None,
                dbru_at_olt: None,
                bmap_emit: None,
                bmap_arrive: None,
                tx_start: None,
                olt_arrive: None,
                du_arrive: None,
                ack_at_ru: None,
                pinned: false,
                dropped: false,
                ledger: BudgetLedger::new(),
                composed: None,
            });
            if self.cfg.scenario.is_cooperative() {
                let locked = self.cfg.scenario == Scenario::NearIdeal && self.predictor.observe(now);
                let dbru = DbruReport {
                    tcont_id: self.tconts[self.fronthaul].id,
                    requested_bytes: self.pon.wire_bytes(pkt.size_bytes),
                    origin: ReportOrigin::DuCuCooperative,
                    issued_at: now,
                };
                let hint = CoopHint {
                    departs_ru: t0,
                    reaches_onu: t1,
                    pinned_start: locked.then(|| t1 + self.pon.prediction_margin),
                };
                // Co-located DU+CU and OLT: the report arrives as it is issued.
                self.dba.deliver(dbru, now, Some(hint));
                self.log(now, "du", "coop_dbru", Some(pkt.id), &format!("bytes={} pinned={locked}", dbru.requested_bytes));
            }
            eng.schedule(t0, Ev::RuDepart { fg: idx })?;
        }

        let next_id = report_id + 1;
        let next_sf = subframe + lte.grant_period_subframes as u64;
        if lte.grant_limit.is_none_or(|l| next_id < l) && lte.subframe_start(next_sf) < self.end {
            eng.schedule(
                lte.subframe_start(next_sf),
                Ev::LteReport {
                    subframe: next_sf,
                    report_id: next_id,
                },
            )?;
        }
        Ok(())
    }

    fn on_dba_invoke(&mut self, eng: &mut Engine<Ev>, now: SimTime, frame: u64) -> Result<(), EngineError> {
        let bmap = self.dba.compute(frame, now);
        if let Err(e) = bmap.check_feasible(&self.pon) {
            self.violation(e);
        }
        let emit = self.clock.emission(frame);
        let arrive = emit + self.pon.serialize(bmap.wire_bytes(&self.pon)) + self.pon.propagation();
        self.log(emit, "olt", "bmap", None, &format!("frame={frame} allocs={}", bmap.allocations.len()));
        self.bmaps.insert(frame, bmap);
        eng.schedule(arrive, Ev::BmapArrive { frame })?;
        if let Some(next) = self.clock.invocation(frame + 1).filter(|t| *t <= self.horizon) {
            eng.schedule(next, Ev::DbaInvoke { frame: frame + 1 })?;
        }
        Ok(())
    }

    fn on_bmap_arrive(&mut self, eng: &mut Engine<Ev>, now: SimTime, frame: u64) -> Result<(), EngineError> {
        let bmap = self.bmaps.remove(&frame).expect("BMap in flight");
        let emit = self.clock.emission(frame);
        if now < emit + self.pon.propagation() {
            self.violation(format!("BMap {frame} arrived before its propagation delay elapsed"));
        }
        let window = self.clock.window_start(frame);
        for alloc in bmap.allocations {
            let at = window + alloc.start_offset;
            if at < now {
                self.violation(format!("frame {frame}: burst at {at} precedes BMap arrival {now}"));
                continue;
            }
            eng.schedule(
                at,
                Ev::Burst {
                    alloc,
                    emit,
                    arrive: now,
                },
            )?;
        }
        Ok(())
    }

    /// Brings an ONU's queues up to date with every arrival at or before `t`.
    fn materialize(&mut self, onu: u32, t: SimTime) {
        let bg_until = t.min(self.end);
        let o = &mut self.onus[onu as usize];
        for src in o.sources.iter_mut() {
            let q = &mut self.tconts[o.by_class[src.class.index()]];
            while let Some((at, size)) = src.next_until(bg_until) {
                q.enqueue(QueuedPacket {
                    id: self.next_bg_id,
                    size_bytes: size,
                    wire_bytes: self.pon.wire_bytes(size),
                    arrived_at: at,
                    foreground: false,
                });
                self.next_bg_id += 1;
            }
        }
        while o.scripted.front().is_some_and(|s| SimTime::ZERO + s.at <= t) {
            let s = o.scripted.pop_front().expect("peeked");
            self.tconts[o.by_class[s.class.index()]].enqueue(QueuedPacket {
                id: self.next_bg_id,
                size_bytes: s.size_bytes,
                wire_bytes: self.pon.wire_bytes(s.size_bytes),
                arrived_at: SimTime::ZERO + s.at,
                foreground: false,
            });
            self.next_bg_id += 1;
        }
        while o.pending_fg.front().is_some_and(|(at, _)| *at <= t) {
            let (at, idx) = o.pending_fg.pop_front().expect("peeked");
            let r = &mut self.fg[idx];
            let out = self.tconts[self.fronthaul].enqueue(QueuedPacket {
                id: r.id,
                size_bytes: r.size_bytes,
                wire_bytes: self.pon.wire_bytes(r.size_bytes),
                arrived_at: at,
                foreground: true,
            });
            r.dropped = out == EnqueueOutcome::Dropped;
        }
    }

    fn on_burst(
        &mut self,
        eng: &mut Engine<Ev>,
        s: SimTime,
        alloc: Allocation,
        emit: SimTime,
        arrive: SimTime,
    ) -> Result<(), EngineError> {
        let end = s + self.pon.serialize(alloc.grant_bytes);
        if let Some(prev) = self.last_burst_end {
            if s < prev + self.pon.guard_time {
                self.violation(format!("burst at {s} starts within guard of burst ending {prev}"));
            }
        }
        self.last_burst_end = Some(self.last_burst_end.map_or(end, |p| p.max(end)));
        self.materialize(alloc.onu, s);
        let prop = self.pon.propagation();

        match alloc.kind {
            AllocationKind::Poll => {
                let at_olt = s + self.pon.serialize(alloc.grant_bytes) + prop;
                let o = &self.onus[alloc.onu as usize];
                let mut reported = Vec::new();
                for &i in o.by_class.iter() {
                    reported.push(i);
                }
                if alloc.onu == 0 {
                    reported.push(self.fronthaul);
                }
                for i in reported {
                    let t = &self.tconts[i];
                    if t.cooperative || t.buffer_occupancy() == 0 {
                        continue;
                    }
                    let rep = DbruReport {
                        tcont_id: t.id,
                        requested_bytes: t.buffer_occupancy(),
                        origin: ReportOrigin::OnuStatusReport,
                        issued_at: s,
                    };
                    self.dba.deliver(rep, at_olt, None);
                }
                if alloc.onu == 0 && !self.cfg.scenario.is_cooperative() {
                    let ids: Vec<u64> = self.tconts[self.fronthaul].iter().map(|p| p.id).collect();
                    for id in ids {
                        let r = &mut self.fg[id as usize];
                        if r.poll_at.is_none() {
                            r.poll_at = Some(s);
                            r.dbru_at_olt = Some(at_olt);
                        }
                    }
                }
                self.log(s, &format!("onu{}", alloc.onu), "poll", None, &format!("bytes={}", alloc.grant_bytes));
            }
            AllocationKind::Data => {
                let tid = alloc.tcont_id.expect("data grants name a T-CONT").0 as usize;
                let sent = self.tconts[tid].dequeue_fitting(alloc.grant_bytes);
                if !self.tconts[tid].conserves_bytes() {
                    self.violation(format!("T-CONT {tid} lost bytes at {s}"));
                }
                // Offsets come from cumulative bytes so per-packet rounding
                // never stretches the burst past its grant.
                let mut cursor = s;
                let mut sent_bytes = 0;
                let mut fg_ids = Vec::new();
                for p in &sent {
                    let tx = cursor;
                    sent_bytes += p.wire_bytes;
                    cursor = s + self.pon.serialize(sent_bytes);
                    if self.opts.record_departures {
                        self.departures.push(DepartureRecord {
                            packet_id: p.id,
                            onu: alloc.onu,
                            tcont: TContId(tid as u32),
                            size_bytes: p.size_bytes,
                            arrived_at: p.arrived_at,
                            departed_at: tx,
                        });
                    }
                    if p.foreground {
                        let idx = p.id as usize;
                        let r = &mut self.fg[idx];
                        r.bmap_emit = Some(emit);
                        r.bmap_arrive = Some(arrive);
                        r.tx_start = Some(tx);
                        r.olt_arrive = Some(cursor + prop);
                        r.pinned = alloc.pinned;
                        let du = cursor + prop + self.pon.olt_to_du(p.size_bytes);
                        eng.schedule(du, Ev::DuArrive { fg: idx })?;
                        fg_ids.push(p.id);
                    }
                }
                if cursor > end {
                    self.violation(format!("burst at {s} overran its grant"));
                }
                let detail = format!(
                    "tcont={tid} grant={} sent={} pinned={}",
                    alloc.grant_bytes,
                    sent.len(),
                    alloc.pinned
                );
                self.log(s, &format!("onu{}", alloc.onu), "burst", None, &detail);
                for id in fg_ids {
                    let olt = self.fg[id as usize].olt_arrive.expect("just set");
                    self.log(olt, "olt", "arrive", Some(id), "");
                }
            }
        }
        Ok(())
    }

    fn build_ledger(&self, r: &ForegroundRecord, du: SimTime) -> BudgetLedger {
        let olt = r.olt_arrive.expect("delivered packet");
        let bmap_arrive = r.bmap_arrive.expect("delivered packet");
        let mut ledger = BudgetLedger::new();
        let res = if self.cfg.scenario.is_cooperative() {
            let e_end = r.onu_arrive.max(bmap_arrive).max(r.ru_depart);
            let bounds = [r.ru_depart, e_end, olt.max(e_end), du.max(olt).max(e_end)];
            ledger.record_chain(&[Interval::E, Interval::F, Interval::G], &bounds)
        } else {
            let raw = [
                r.ru_depart,
                r.onu_arrive,
                r.poll_at.unwrap_or(r.onu_arrive),
                r.dbru_at_olt.unwrap_or(r.onu_arrive),
                r.bmap_emit.expect("delivered packet"),
                bmap_arrive,
                olt,
                du,
            ];
            let mut bounds = raw;
            for i in 1..bounds.len() {
                bounds[i] = bounds[i].max(bounds[i - 1]);
            }
            ledger.record_chain(&Interval::ALL, &bounds)
        };
        res.expect("bounds are monotone");
        ledger
    }

    fn on_du_arrive(&mut self, eng: &mut Engine<Ev>, now: SimTime, fg: usize) -> Result<(), EngineError> {
        let ledger = self.build_ledger(&self.fg[fg], now);
        let composed = if self.cfg.scenario.is_cooperative() {
            compose_cooperative_latency(&ledger)
        } else {
            compose_unsynchronised_latency(&ledger)
        };
        let r = &mut self.fg[fg];
        r.du_arrive = Some(now);
        r.ledger = ledger;
        let measured = now - r.ru_depart;
        let id = r.id;
        let size = r.size_bytes;
        match composed {
            Ok(c) => {
                r.composed = Some(c);
                if c.ns().abs_diff(measured.ns()) > IDENTITY_TOLERANCE {
                    self.violation(format!("packet {id}: ledger {c} != measured {measured}"));
                }
            }
            Err(e) => self.violation(format!("packet {id}: {e}")),
        }
        self.log(now, "du", "arrive", Some(id), &format!("one_way_ns={}", measured.ns()));

        let m = &self.cfg.metrics;
        let processing = match m.processing {
            ProcessingMode::TransportOnly => SimDuration::ZERO,
            ProcessingMode::Calibrated => {
                let base = self.processing_rng.range_u64(m.processing_min.ns(), m.processing_max.ns());
                SimDuration(base) + SimDuration::from_us_f64(m.load_coupling_us * self.cfg.load.total_load)
            }
        };
        let ack = m.ack_size_bytes.unwrap_or(size);
        let back = self.pon.olt_to_du(ack) + self.downstream_send(ack) + self.pon.ru_to_onu(ack);
        let at_ru = now + processing + back;
        eng.schedule(at_ru, Ev::AckAtRu { fg })?;
        Ok(())
    }

    /// OLT to ONU delivery of a broadcast downstream packet.
    fn downstream_send(&self, size_bytes: u32) -> SimDuration {
        self.pon.serialize(size_bytes as u64) + self.pon.propagation()
    }

    fn final_checks(&mut self) {
        for i in 0..self.tconts.len() {
            if !self.tconts[i].conserves_bytes() {
                self.violation(format!("T-CONT {i} violates byte conservation"));
            }
        }
        let prop2 = self.pon.propagation() * 2;
        let mut problems = Vec::new();
        for r in &self.fg {
            if let (Some(rtt), Some(one_way)) = (r.rtt(), r.one_way()) {
                if rtt < prop2 {
                    problems.push(format!("packet {}: RTT {rtt} below twice the fibre delay", r.id));
                }
                if r.report_at >= r.onu_arrive && self.cfg.scenario.is_cooperative() {
                    problems.push(format!("packet {}: cooperative DBRu did not precede data", r.id));
                }
                if r.tx_start.is_some_and(|tx| tx < r.bmap_arrive.unwrap_or(SimTime::ZERO)) {
                    problems.push(format!("packet {}: sent before its BMap arrived", r.id));
                }
                if rtt < one_way {
                    problems.push(format!("packet {}: RTT shorter than one-way latency", r.id));
                }
            }
        }
        for p in problems {
            self.violation(p);
        }
    }

    fn finish(self) -> RunOutput {
        let warmup = SimTime::ZERO + self.cfg.metrics.warmup;
        let mut samples: Vec<RttSample> = Vec::new();
        let mut one_way_sum = 0.0;
        let mut sums = [(0.0, 0u64); 7];
        for r in self.fg.iter().filter(|r| r.ru_depart >= warmup) {
            let (Some(ack), Some(one_way)) = (r.ack_at_ru, r.one_way()) else {
                continue;
            };
            let s = record_rtt(
                r.id,
                r.ru_depart,
                ack,
                self.cfg.scenario,
                self.pon.fiber_km,
                r.size_bytes,
            )
            .expect("ACK follows departure");
            samples.push(s);
            one_way_sum += one_way.as_us();
            for iv in Interval::ALL {
                if let Some(d) = r.ledger.duration(iv) {
                    sums[iv.index()].0 += d.as_us();
                    sums[iv.index()].1 += 1;
                }
            }
        }
        let rtts: Vec<SimDuration> = samples.iter().map(|s| s.rtt).collect();
        let mut rtt_histogram = Histogram::new(self.cfg.metrics.histogram_bin);
        rtts.iter().for_each(|d| rtt_histogram.add(*d));
        let j = jitter(&rtts);
        let mut jitter_histogram = Histogram::new(self.cfg.metrics.histogram_bin);
        j.samples.iter().for_each(|d| jitter_histogram.add(*d));
        let (mean, min, max, sd) = summarize(&rtts).unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
        let (margin, compliant) = ngmn_margin(mean);

        let mut drops_per_class = BTreeMap::new();
        for class in TrafficClass::ALL {
            drops_per_class.insert(class.to_string(), 0);
        }
        for t in &self.tconts {
            *drops_per_class.entry(t.priority_class.to_string()).or_default() += t.drops;
        }
        let mut annotations = Vec::new();
        if samples.is_empty() {
            annotations.push("no foreground samples after warm-up".to_string());
        }
        let stats = self.dba.stats.clone();
        let report = RunReport {
            scenario: self.cfg.scenario,
            distance_km: self.pon.fiber_km,
            packet_size: self.cfg.lte.tb_size_bytes,
            total_load: self.cfg.load.total_load,
            onu_count: self.pon.onu_count,
            seed: self.cfg.seed,
            sample_count: samples.len() as u64,
            rtt_mean_us: mean,
            rtt_min_us: min,
            rtt_max_us: max,
            rtt_stddev_us: sd,
            one_way_mean_us: one_way_sum / samples.len().max(1) as f64,
            rtt_histogram: rtt_histogram.rows(),
            jitter_mean_us: j.mean_us,
            jitter_histogram: jitter_histogram.rows(),
            drops_per_class,
            budget_means: BudgetMeans::from_sums(&sums),
            ngmn_margin_us: margin,
            compliant: compliant && !samples.is_empty(),
            pinned_grants: stats.pinned_grants,
            prediction_fallbacks: if self.cfg.scenario == Scenario::NearIdeal {
                self.fg.iter().filter(|r| r.tx_start.is_some() && !r.pinned).count() as u64
            } else {
                0
            },
            annotations,
        };
        RunOutput {
            report,
            rtt_histogram,
            jitter_histogram,
            event_log: self.log,
            foreground: self.fg,
            departures: self.departures,
            dba: stats,
        }
    }
}
