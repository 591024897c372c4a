//! Statistics over completed foreground traversals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{SimDuration, SimTime};
use crate::pon::Interval;
use crate::scenario::Scenario;
use crate::units;

/// Recommended RTT ceiling for a MAC/PHY split.
pub const NGMN_RTT_THRESHOLD: SimDuration = SimDuration::from_us(500);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessingMode {
    /// The DU+CU answers instantly; RTT is pure transport.
    TransportOnly,
    /// Uniform stack delay plus a term growing with offered load.
    Calibrated,
}

/// DU+CU turnaround and measurement settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub processing: ProcessingMode,
    /// Calibrated stack delay is drawn from `[min, max)`.
    #[serde(rename = "processing_min_us", with = "units::us")]
    pub processing_min: SimDuration,
    #[serde(rename = "processing_max_us", with = "units::us")]
    pub processing_max: SimDuration,
    /// Extra calibrated delay per unit of total offered load, in microseconds.
    pub load_coupling_us: f64,
    /// ACK payload size; defaults to the request size.
    pub ack_size_bytes: Option<u32>,
    #[serde(rename = "warmup_us", with = "units::us")]
    pub warmup: SimDuration,
    #[serde(rename = "histogram_bin_us", with = "units::us")]
    pub histogram_bin: SimDuration,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            processing: ProcessingMode::TransportOnly,
            processing_min: SimDuration::from_us(60),
            processing_max: SimDuration::from_us(80),
            load_coupling_us: 295.0,
            ack_size_bytes: None,
            warmup: SimDuration::from_ms(100),
            histogram_bin: SimDuration::from_us(10),
        }
    }
}

impl MetricsConfig {
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.processing_min > self.processing_max {
            out.push(("processing_min_us", "must not exceed processing_max_us".to_string()));
        }
        if !(self.load_coupling_us >= 0.0 && self.load_coupling_us.is_finite()) {
            out.push(("load_coupling_us", "must be a non-negative number".to_string()));
        }
        if self.histogram_bin == SimDuration::ZERO {
            out.push(("histogram_bin_us", "must be positive".to_string()));
        }
        if self.ack_size_bytes == Some(0) {
            out.push(("ack_size_bytes", "must be at least 1".to_string()));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("ACK for packet {packet_id} at {ack} does not follow its departure at {departure}")]
    AckBeforeDeparture {
        packet_id: u64,
        departure: SimTime,
        ack: SimTime,
    },
    #[error("ACK for unknown packet {0}")]
    UnmatchedAck(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RttSample {
    pub packet_id: u64,
    pub rtt: SimDuration,
    pub departure: SimTime,
    pub scenario: Scenario,
    pub distance_km: f64,
    pub packet_size_bytes: u32,
}

impl RttSample {
    /// True when the RTT is shorter than two fibre traversals.
    pub fn violates_physical_bound(&self, propagation: SimDuration) -> bool {
        self.rtt < propagation * 2
    }
}

pub fn record_rtt(
    packet_id: u64,
    departure: SimTime,
    ack: SimTime,
    scenario: Scenario,
    distance_km: f64,
    packet_size_bytes: u32,
) -> Result<RttSample, MetricsError> {
    if ack <= departure {
        return Err(MetricsError::AckBeforeDeparture {
            packet_id,
            departure,
            ack,
        });
    }
    Ok(RttSample {
        packet_id,
        rtt: ack - departure,
        departure,
        scenario,
        distance_km,
        packet_size_bytes,
    })
}

/// Fixed-width histogram with half-open bins `[k*w, (k+1)*w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    width: SimDuration,
    bins: BTreeMap<u64, u64>,
    total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_low_us: f64,
    pub bin_high_us: f64,
    pub count: u64,
    pub probability: f64,
}

impl Histogram {
    pub fn new(width: SimDuration) -> Self {
        assert!(width > SimDuration::ZERO, "bin width must be positive");
        Histogram {
            width,
            bins: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn add(&mut self, d: SimDuration) {
        *self.bins.entry(d.ns() / self.width.ns()).or_default() += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Lower and upper edge of the fullest bin; ties go to the lower bin.
    pub fn modal_bin(&self) -> Option<(SimDuration, SimDuration)> {
        let (&k, _) = self
            .bins
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
        Some((self.width * k, self.width * (k + 1)))
    }

    /// Non-empty bins in ascending order.
    pub fn rows(&self) -> Vec<HistogramRow> {
        self.bins
            .iter()
            .map(|(&k, &count)| HistogramRow {
                bin_low_us: (self.width * k).as_us(),
                bin_high_us: (self.width * (k + 1)).as_us(),
                count,
                probability: count as f64 / self.total as f64,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low_us,bin_high_us,count,probability\n");
        for r in self.rows() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.bin_low_us, r.bin_high_us, r.count, r.probability
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JitterStats {
    pub samples: Vec<SimDuration>,
    pub mean_us: Option<f64>,
}

/// Absolute consecutive RTT differences. Fewer than two RTTs give no samples.
pub fn jitter(rtts: &[SimDuration]) -> JitterStats {
    let samples: Vec<SimDuration> = rtts
        .windows(2)
        .map(|w| SimDuration(w[0].ns().abs_diff(w[1].ns())))
        .collect();
    let mean_us = (!samples.is_empty())
        .then(|| samples.iter().map(|s| s.as_us()).sum::<f64>() / samples.len() as f64);
    JitterStats { samples, mean_us }
}

/// `500 us - mean_rtt` in microseconds, and whether that is non-negative.
pub fn ngmn_margin(mean_rtt_us: f64) -> (f64, bool) {
    let margin = NGMN_RTT_THRESHOLD.as_us() - mean_rtt_us;
    (margin, margin >= 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Crossing {
    /// No sweep point meets the threshold.
    None,
    /// Every sweep point meets the threshold.
    Throughout { up_to_km: f64 },
    /// Interpolated distance where the margin reaches zero. `non_monotone`
    /// warns that mean RTT did not rise steadily with distance.
    At { km: f64, non_monotone: bool },
}

/// Locates the zero-margin crossing of a sweep given `(distance_km,
/// mean_rtt_us)` points in any order.
pub fn max_compliant_distance(points: &[(f64, f64)]) -> Crossing {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let margins: Vec<f64> = pts.iter().map(|p| ngmn_margin(p.1).0).collect();
    if margins.iter().all(|m| *m < 0.0) {
        return Crossing::None;
    }
    let Some(i) = margins.iter().position(|m| *m < 0.0) else {
        return Crossing::Throughout {
            up_to_km: pts.last().map_or(0.0, |p| p.0),
        };
    };
    let non_monotone = pts.windows(2).any(|w| w[1].1 < w[0].1);
    if i == 0 {
        return Crossing::At {
            km: pts[0].0,
            non_monotone: true,
        };
    }
    let (d0, m0) = (pts[i - 1].0, margins[i - 1]);
    let (d1, m1) = (pts[i].0, margins[i]);
    Crossing::At {
        km: d0 + (d1 - d0) * m0 / (m0 - m1),
        non_monotone,
    }
}

/// Means of each delay-budget interval over the foreground packets that
/// recorded it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetMeans {
    pub a_us: Option<f64>,
    pub b_us: Option<f64>,
    pub c_us: Option<f64>,
    pub d_us: Option<f64>,
    pub e_us: Option<f64>,
    pub f_us: Option<f64>,
    pub g_us: Option<f64>,
}

impl BudgetMeans {
    pub fn from_sums(sums: &[(f64, u64); 7]) -> Self {
        let m = |iv: Interval| {
            let (s, n) = sums[iv.index()];
            (n > 0).then(|| s / n as f64)
        };
        BudgetMeans {
            a_us: m(Interval::A),
            b_us: m(Interval::B),
            c_us: m(Interval::C),
            d_us: m(Interval::D),
            e_us: m(Interval::E),
            f_us: m(Interval::F),
            g_us: m(Interval::G),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub distance_km: f64,
    pub packet_size: u32,
    pub total_load: f64,
    pub onu_count: u32,
    pub seed: u64,
    pub sample_count: u64,
    pub rtt_mean_us: f64,
    pub rtt_min_us: f64,
    pub rtt_max_us: f64,
    pub rtt_stddev_us: f64,
    pub one_way_mean_us: f64,
    pub rtt_histogram: Vec<HistogramRow>,
    pub jitter_mean_us: Option<f64>,
    pub jitter_histogram: Vec<HistogramRow>,
    pub drops_per_class: BTreeMap<String, u64>,
    pub budget_means: BudgetMeans,
    pub ngmn_margin_us: f64,
    pub compliant: bool,
    pub pinned_grants: u64,
    pub prediction_fallbacks: u64,
    pub annotations: Vec<String>,
}

/// Mean, min, max and population standard deviation in microseconds.
pub fn summarize(rtts: &[SimDuration]) -> Option<(f64, f64, f64, f64)> {
    if rtts.is_empty() {
        return None;
    }
    let us: Vec<f64> = rtts.iter().map(|d| d.as_us()).collect();
    let n = us.len() as f64;
    // Summing integer ticks keeps constant series exact.
    let total: u128 = rtts.iter().map(|d| d.ns() as u128).sum();
    let mean = total as f64 / n / 1_000.0;
    let var = us.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let min = us.iter().copied().fold(f64::INFINITY, f64::min);
    let max = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((mean, min, max, var.sqrt()))
}
