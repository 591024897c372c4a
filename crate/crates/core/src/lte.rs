//! Timing model of the LTE MAC scheduler and RU: periodic uplink grants,
//! transport-block emission a fixed number of subframes later, and the
//! last-gap predictor behind near-ideal pre-allocation.

use serde::{Deserialize, Serialize};

use crate::engine::{SimDuration, SimTime};
use crate::pon::FronthaulPacket;
use crate::units;

/// Smallest and largest transport blocks seen on the measured testbed.
pub const MEASURED_TB_RANGE: (u32, u32) = (105, 585);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LteConfig {
    #[serde(rename = "subframe_duration_us", with = "units::us")]
    pub subframe_duration: SimDuration,
    pub uplink_trigger_offset_subframes: u32,
    pub grant_period_subframes: u32,
    pub tb_size_bytes: u32,
    /// Time of subframe 0.
    #[serde(rename = "subframe_phase_us", with = "units::us")]
    pub subframe_phase: SimDuration,
    /// Stop issuing grants after this many; `None` runs for the whole
    /// simulation.
    pub grant_limit: Option<u64>,
    /// Permits a zero trigger offset and transport blocks outside the
    /// measured 105..=585 B range.
    pub allow_out_of_range: bool,
}

impl Default for LteConfig {
    fn default() -> Self {
        LteConfig {
            subframe_duration: SimDuration::from_ms(1),
            uplink_trigger_offset_subframes: 4,
            grant_period_subframes: 1,
            tb_size_bytes: 141,
            subframe_phase: SimDuration::ZERO,
            grant_limit: None,
            allow_out_of_range: false,
        }
    }
}

impl LteConfig {
    /// Field-level problems, as `(field, message)` pairs.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.subframe_duration == SimDuration::ZERO {
            out.push(("subframe_duration_us", "must be positive".to_string()));
        }
        if self.grant_period_subframes == 0 {
            out.push(("grant_period_subframes", "must be at least 1".to_string()));
        }
        if !self.allow_out_of_range {
            if self.uplink_trigger_offset_subframes == 0 {
                out.push((
                    "uplink_trigger_offset_subframes",
                    "must be at least 1 (set allow_out_of_range to override)".to_string(),
                ));
            }
            let (lo, hi) = MEASURED_TB_RANGE;
            if self.tb_size_bytes != 0 && !(lo..=hi).contains(&self.tb_size_bytes) {
                out.push((
                    "tb_size_bytes",
                    format!("{} is outside {lo}..={hi} (set allow_out_of_range to override)", self.tb_size_bytes),
                ));
            }
        }
        out
    }

    pub fn subframe_start(&self, index: u64) -> SimTime {
        SimTime::ZERO + self.subframe_phase + self.subframe_duration * index
    }

    pub fn trigger_delay(&self) -> SimDuration {
        self.subframe_duration * self.uplink_trigger_offset_subframes as u64
    }

    pub fn grant_period(&self) -> SimDuration {
        self.subframe_duration * self.grant_period_subframes as u64
    }

    /// Foreground bit rate implied by the grant pattern.
    pub fn foreground_bps(&self) -> f64 {
        self.tb_size_bytes as f64 * 8.0 / self.grant_period().as_secs_f64()
    }
}

/// Uplink grant announced by the MAC scheduler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationReport {
    pub report_id: u64,
    pub subframe_index: u64,
    pub allocated_tb_bytes: u32,
    pub target_ue: u32,
}

pub fn issue_grant(cfg: &LteConfig, report_id: u64, subframe_index: u64) -> InformationReport {
    InformationReport {
        report_id,
        subframe_index,
        allocated_tb_bytes: cfg.tb_size_bytes,
        target_ue: 0,
    }
}

/// The foreground packet a report triggers and the time it leaves the RU.
/// Zero-byte grants trigger nothing.
pub fn uplink_data_emit(
    cfg: &LteConfig,
    report: &InformationReport,
) -> Option<(SimTime, FronthaulPacket)> {
    if report.allocated_tb_bytes == 0 {
        return None;
    }
    let at = cfg.subframe_start(report.subframe_index) + cfg.trigger_delay();
    Some((at, FronthaulPacket::uplink_tb(report.report_id, report.allocated_tb_bytes)))
}

/// Single-period lock-step estimator over report times. The report at
/// `T_n` is predicted as `T_{n-1} + (T_{n-1} - T_{n-2})`; a prediction
/// that matches exactly means the grant pattern is locked.
#[derive(Clone, Debug, Default)]
pub struct GrantPredictor {
    last: Option<SimTime>,
    gap: Option<SimDuration>,
}

impl GrantPredictor {
    pub fn new() -> Self {
        Self::default()
    }

    /// The time the next report is expected, if the history allows a guess.
    pub fn expected_next(&self) -> Option<SimTime> {
        Some(self.last? + self.gap?)
    }

    /// Feeds the report observed at `at`; returns whether it was predicted.
    pub fn observe(&mut self, at: SimTime) -> bool {
        let locked = self.expected_next() == Some(at);
        if let Some(prev) = self.last {
            self.gap = Some(at - prev);
        }
        self.last = Some(at);
        locked
    }
}
