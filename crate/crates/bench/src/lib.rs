//! Fixed workloads shared by the criterion benches.

use vpon_core::{Scenario, ScenarioConfig, SimDuration};

/// A loaded PON like the distance sweep uses: 8 ONUs, calibrated processing.
pub fn loaded(scenario: Scenario, km: f64, duration_s: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        scenario,
        duration_s,
        ..ScenarioConfig::default()
    };
    c.pon.onu_count = 8;
    c.pon.fiber_km = km;
    c.load.total_load = 0.8;
    c.metrics.warmup = SimDuration::from_ms(10);
    c
}
