use vpon_core::metrics::ProcessingMode;
use vpon_core::{run, sweep, ConfigError, RunError, Scenario, ScenarioConfig, SimDuration, SweepAxis};

fn quick(scenario: Scenario) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        scenario,
        duration_s: 0.05,
        ..ScenarioConfig::default()
    };
    c.metrics.warmup = SimDuration::from_ms(10);
    c
}

#[test]
fn repeated_runs_are_identical() {
    let mut c = quick(Scenario::Cooperative);
    c.load.total_load = 0.5;
    c.pon.onu_count = 4;
    c.event_log = true;
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.event_log, b.event_log);
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
}

#[test]
fn duration_shorter_than_warmup_is_rejected() {
    let mut c = quick(Scenario::Unsynchronised);
    c.duration_s = 0.005;
    match run(&c) {
        Err(RunError::Config(ConfigError::Invalid(p))) => {
            assert!(p.iter().any(|f| f.field.contains("duration")), "{p:?}");
        }
        Err(e) => panic!("expected a configuration error, got {e}"),
        Ok(_) => panic!("run accepted a duration shorter than warm-up"),
    }
}

#[test]
fn identical_sweep_points_give_identical_rows() {
    let c = quick(Scenario::Cooperative);
    let res = sweep(&c, SweepAxis::DistanceKm, &[5.0, 5.0], &[Scenario::Cooperative]).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.rows[0], res.rows[1]);
}

#[test]
fn larger_transport_blocks_never_shorten_rtt() {
    let mut c = quick(Scenario::Cooperative);
    c.metrics.processing = ProcessingMode::Calibrated;
    let sizes = [105.0, 141.0, 285.0, 429.0, 585.0];
    let res = sweep(&c, SweepAxis::PacketSize, &sizes, &[Scenario::Cooperative]).unwrap();
    assert!(res.failures.is_empty());
    for w in res.rows.windows(2) {
        assert!(w[1].mean_rtt_us >= w[0].mean_rtt_us, "{w:?}");
    }
}

#[test]
fn zero_background_load_matches_idle_latency() {
    // With no background traffic the foreground latency is pure transport
    // and every steady-state packet sees the same value.
    for s in Scenario::ALL {
        let out = run(&quick(s)).unwrap();
        let lat: Vec<u64> = out
            .foreground
            .iter()
            .skip(2)
            .filter_map(|r| r.one_way())
            .map(|d| d.ns())
            .collect();
        assert!(lat.len() > 30);
        assert!(lat.iter().all(|l| *l == lat[0]), "{s}: {lat:?}");
        assert!(out.report.drops_per_class.values().all(|d| *d == 0));
    }
}

#[test]
fn sweep_needs_two_points() {
    let c = quick(Scenario::Cooperative);
    assert!(sweep(&c, SweepAxis::DistanceKm, &[5.0], &Scenario::ALL).is_err());
}

#[test]
fn scenario_ordering_holds_at_zero_load() {
    let mean = |s| run(&quick(s)).unwrap().report.rtt_mean_us;
    let (u, c, n) = (
        mean(Scenario::Unsynchronised),
        mean(Scenario::Cooperative),
        mean(Scenario::NearIdeal),
    );
    assert!(n < c && c < u, "{n} {c} {u}");
}
