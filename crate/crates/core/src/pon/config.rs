use serde::{Deserialize, Serialize};

use crate::engine::{round_half_up, SimDuration};
use crate::units;

/// Physical and scheduling parameters of the virtual XGS-PON.
///
/// Defaults: 10 Gb/s line rate and 5 us/km fibre latency; a 15 us
/// scheduler delay; 125 us framing; 35 us ONU response time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PonConfig {
    pub line_rate_bps: u64,
    pub fiber_km: f64,
    #[serde(rename = "prop_delay_per_km_us", with = "units::us")]
    pub prop_delay_per_km: SimDuration,
    #[serde(rename = "frame_period_us", with = "units::us")]
    pub frame_period: SimDuration,
    /// Time between a DBA invocation and the emission of its BMap.
    #[serde(rename = "dba_compute_time_us", with = "units::us")]
    pub dba_compute_time: SimDuration,
    #[serde(rename = "guard_time_us", with = "units::us")]
    pub guard_time: SimDuration,
    /// Delay from the start of a received downstream frame to the start of
    /// the upstream frame its BMap describes.
    #[serde(rename = "onu_response_time_us", with = "units::us")]
    pub onu_response_time: SimDuration,
    pub encapsulation_overhead_bytes: u32,
    /// Size of one DBRu status field, per reported T-CONT.
    pub dbru_bytes: u32,
    /// Size of one BMap allocation structure.
    pub bmap_allocation_bytes: u32,
    pub tcont_queue_cap_bytes: u64,
    pub onu_count: u32,
    /// Near-ideal pre-allocations start this long after the predicted
    /// arrival of the uplink data at the ONU.
    #[serde(rename = "prediction_margin_us", with = "units::us")]
    pub prediction_margin: SimDuration,
    /// RU<->ONU and OLT<->DU+CU Ethernet links.
    pub access_link_rate_bps: u64,
    #[serde(rename = "ru_onu_link_delay_us", with = "units::us")]
    pub ru_onu_link_delay: SimDuration,
    #[serde(rename = "olt_du_link_delay_us", with = "units::us")]
    pub olt_du_link_delay: SimDuration,
}

impl Default for PonConfig {
    fn default() -> Self {
        PonConfig {
            line_rate_bps: 10_000_000_000,
            fiber_km: 1.0,
            prop_delay_per_km: SimDuration::from_us(5),
            frame_period: SimDuration::from_us(125),
            dba_compute_time: SimDuration::from_us(15),
            guard_time: SimDuration::from_us(1),
            onu_response_time: SimDuration::from_us(35),
            encapsulation_overhead_bytes: 8,
            dbru_bytes: 4,
            bmap_allocation_bytes: 8,
            tcont_queue_cap_bytes: 10_000_000,
            onu_count: 1,
            prediction_margin: SimDuration::from_us(10),
            access_link_rate_bps: 10_000_000_000,
            ru_onu_link_delay: SimDuration::from_us(1),
            olt_du_link_delay: SimDuration::from_us(1),
        }
    }
}

impl PonConfig {
    pub fn propagation(&self) -> SimDuration {
        propagation_delay(self.fiber_km, self.prop_delay_per_km)
    }

    pub fn serialize(&self, bytes: u64) -> SimDuration {
        serialization_time(bytes, self.line_rate_bps)
    }

    /// RU -> ONU transfer of a packet (interval A).
    pub fn ru_to_onu(&self, size_bytes: u32) -> SimDuration {
        self.ru_onu_link_delay + serialization_time(size_bytes as u64, self.access_link_rate_bps)
    }

    /// OLT -> DU+CU transfer of a packet (interval G).
    pub fn olt_to_du(&self, size_bytes: u32) -> SimDuration {
        self.olt_du_link_delay + serialization_time(size_bytes as u64, self.access_link_rate_bps)
    }

    pub fn wire_bytes(&self, size_bytes: u32) -> u64 {
        size_bytes as u64 + self.encapsulation_overhead_bytes as u64
    }

    /// Largest byte count whose serialization fits in `window`.
    pub fn bytes_fitting(&self, window: SimDuration) -> u64 {
        let mut b = (window.ns() as u128 * self.line_rate_bps as u128 / 8_000_000_000) as u64;
        while b > 0 && self.serialize(b) > window {
            b -= 1;
        }
        while self.serialize(b + 1) <= window {
            b += 1;
        }
        b
    }
}

/// Fibre latency for `fiber_km`, rounded half-up to the nearest tick.
pub fn propagation_delay(fiber_km: f64, per_km: SimDuration) -> SimDuration {
    assert!(fiber_km >= 0.0 && fiber_km.is_finite(), "fiber length must be >= 0");
    SimDuration(round_half_up(fiber_km * per_km.ns() as f64))
}

/// `8 * size_bytes / line_rate_bps` seconds, rounded half-up to the tick.
pub fn serialization_time(size_bytes: u64, line_rate_bps: u64) -> SimDuration {
    assert!(line_rate_bps > 0, "line rate must be positive");
    let num = size_bytes as u128 * 8 * 1_000_000_000;
    let rate = line_rate_bps as u128;
    SimDuration(((2 * num + rate) / (2 * rate)) as u64)
}
