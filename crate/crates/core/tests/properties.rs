use proptest::prelude::*;
use vpon_core::metrics::{max_compliant_distance, ngmn_margin, Histogram};
use vpon_core::pon::{
    compose_cooperative_latency, compose_unsynchronised_latency, serialization_time, AllocationKind,
    BudgetLedger, CoopHint, DbaMaster, DbruReport, Interval, PonConfig, QueuedPacket, ReportOrigin,
    TCont, TContId, TrafficClass,
};
use vpon_core::{Engine, SimDuration, SimTime};

/// Ceiling-free reference: bits * 1e9 / rate, rounded half up, in u128.
fn ser_reference(bytes: u64, rate: u64) -> u64 {
    let num = bytes as u128 * 8 * 1_000_000_000;
    ((2 * num + rate as u128) / (2 * rate as u128)) as u64
}

proptest! {
    #[test]
    fn engine_dispatches_in_time_then_insertion_order(times in prop::collection::vec(0u64..1_000, 1..200)) {
        let mut e: Engine<usize> = Engine::new();
        for (i, t) in times.iter().enumerate() {
            e.schedule(SimTime(*t), i).unwrap();
        }
        let mut last: Option<(u64, usize)> = None;
        while let Some(ev) = e.pop_until(SimTime(u64::MAX)) {
            let key = (ev.fire_at.0, ev.payload);
            prop_assert_eq!(ev.fire_at.0, times[ev.payload]);
            if let Some(prev) = last {
                prop_assert!(prev < key);
            }
            last = Some(key);
        }
        prop_assert_eq!(e.dispatched(), times.len() as u64);
    }

    #[test]
    fn serialization_matches_reference(bytes in 0u64..10_000_000, rate in 1_000_000u64..100_000_000_000) {
        prop_assert_eq!(serialization_time(bytes, rate).ns(), ser_reference(bytes, rate));
    }

    #[test]
    fn serialization_is_monotone(a in 0u64..1_000_000, b in 0u64..1_000_000) {
        let rate = 10_000_000_000;
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(serialization_time(lo, rate) <= serialization_time(hi, rate));
    }

    #[test]
    fn histogram_conserves_mass(samples in prop::collection::vec(0u64..2_000_000, 0..500), width in 1u64..50) {
        let mut h = Histogram::new(SimDuration::from_us(width));
        for s in &samples {
            h.add(SimDuration(*s));
        }
        prop_assert_eq!(h.total(), samples.len() as u64);
        prop_assert_eq!(h.rows().iter().map(|r| r.count).sum::<u64>(), samples.len() as u64);
    }

    #[test]
    fn margin_is_antisymmetric_about_threshold(x in 0.0f64..1_000.0) {
        let (above, ok_above) = ngmn_margin(500.0 + x);
        let (below, ok_below) = ngmn_margin(500.0 - x);
        prop_assert!((above + below).abs() < 1e-9);
        prop_assert!(ok_below);
        prop_assert_eq!(ok_above, x == 0.0);
    }

    #[test]
    fn crossing_ignores_point_order(mut pts in prop::collection::vec((0.0f64..50.0, 0.0f64..1_000.0), 2..12), seed in any::<u64>()) {
        let before = max_compliant_distance(&pts);
        let n = pts.len();
        pts.rotate_left((seed as usize) % n);
        pts.reverse();
        prop_assert_eq!(before, max_compliant_distance(&pts));
    }

    #[test]
    fn ledger_composes_to_elapsed_time(mut gaps in prop::collection::vec(0u64..1_000_000, 7)) {
        gaps.insert(0, 12_345);
        let bounds: Vec<SimTime> = gaps
            .iter()
            .scan(0u64, |acc, g| { *acc += g; Some(SimTime(*acc)) })
            .collect();
        let mut l = BudgetLedger::new();
        l.record_chain(&Interval::ALL, &bounds).unwrap();
        prop_assert_eq!(compose_unsynchronised_latency(&l).unwrap(), bounds[7] - bounds[0]);
        prop_assert_eq!(compose_cooperative_latency(&l).unwrap(), bounds[7] - bounds[4]);
    }

    #[test]
    fn ledger_rejects_overlap(a in 1u64..1_000, b in 1u64..1_000) {
        let mut l = BudgetLedger::new();
        l.record(Interval::B, SimTime(1_000), SimTime(1_000 + a)).unwrap();
        prop_assert!(l.record(Interval::C, SimTime(1_000 + a - a.min(b)), SimTime(5_000)).is_err());
    }

    #[test]
    fn tcont_conserves_bytes(ops in prop::collection::vec((any::<bool>(), 1u64..2_000), 1..300), cap in 1_000u64..20_000) {
        let mut q = TCont::new(TContId(0), 0, TrafficClass::Tc2, cap);
        for (i, (enqueue, n)) in ops.into_iter().enumerate() {
            if enqueue {
                q.enqueue(QueuedPacket { id: i as u64, size_bytes: n as u32, wire_bytes: n + 8, arrived_at: SimTime(i as u64), foreground: false });
            } else {
                let out = q.dequeue_fitting(n);
                prop_assert!(out.iter().map(|p| p.wire_bytes).sum::<u64>() <= n);
            }
            prop_assert!(q.conserves_bytes());
            prop_assert!(q.buffer_occupancy() <= cap);
        }
    }

    #[test]
    fn dba_bmaps_are_feasible(
        onus in 1u32..9,
        km in 0.0f64..30.0,
        reports in prop::collection::vec((0u32..32, 0u64..400_000, 0u64..1_000_000), 0..40),
        coop in prop::collection::vec((0u64..1_000_000, 1u64..2_000, any::<bool>()), 0..6),
    ) {
        let cfg = PonConfig { onu_count: onus, fiber_km: km, ..PonConfig::default() };
        let mut dba = DbaMaster::new(&cfg);
        for onu in 0..onus {
            for class in TrafficClass::ALL {
                dba.register_tcont(TContId(onu * 4 + class.index() as u32), onu, class, false);
            }
        }
        let fh = TContId(onus * 4);
        dba.register_tcont(fh, 0, TrafficClass::Tc4, true);
        for (tc, bytes, at) in reports {
            let r = DbruReport { tcont_id: TContId(tc % (onus * 4)), requested_bytes: bytes, origin: ReportOrigin::OnuStatusReport, issued_at: SimTime(at) };
            dba.deliver(r, SimTime(at), None);
        }
        for (at, bytes, pin) in coop {
            let r = DbruReport { tcont_id: fh, requested_bytes: bytes, origin: ReportOrigin::DuCuCooperative, issued_at: SimTime(at) };
            let depart = SimTime(at + 200_000);
            let hint = CoopHint { departs_ru: depart, reaches_onu: depart + SimDuration::from_us(2), pinned_start: pin.then_some(depart + SimDuration::from_us(12)) };
            dba.deliver(r, SimTime(at), Some(hint));
        }
        let clock = dba.clock();
        for k in clock.first_frame()..clock.first_frame() + 20 {
            let now = clock.invocation(k).unwrap();
            let b = dba.compute(k, now);
            prop_assert!(b.check_feasible(&cfg).is_ok(), "{:?}", b.check_feasible(&cfg));
            let polls = b.allocations.iter().filter(|a| a.kind == AllocationKind::Poll).count();
            prop_assert_eq!(polls, onus as usize);
        }
    }
}
