//! Experiment configuration, validation with field and line diagnostics,
//! single runs and parameter sweeps.

use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimDuration;
use crate::lte::LteConfig;
use crate::metrics::{max_compliant_distance, Crossing, MetricsConfig, RunReport, NGMN_RTT_THRESHOLD};
use crate::pon::PonConfig;
use crate::sim::{RunOutput, SimError, SimOptions, Simulation};
use crate::traffic::{LoadProfile, SizeDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// The ONU reports its queue and waits for a grant.
    Unsynchronised,
    /// The DU+CU turns each uplink grant into a DBRu for the OLT.
    Cooperative,
    /// Cooperative, plus grants pinned to the predicted data arrival.
    NearIdeal,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::Unsynchronised,
        Scenario::Cooperative,
        Scenario::NearIdeal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Unsynchronised => "unsynchronised",
            Scenario::Cooperative => "cooperative",
            Scenario::NearIdeal => "near_ideal",
        }
    }

    pub fn is_cooperative(self) -> bool {
        self != Scenario::Unsynchronised
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s || sc.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected unsynchronised, cooperative or near_ideal)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Simulated seconds during which grants and background arrivals occur.
    pub duration_s: f64,
    pub event_log: bool,
    pub out_dir: Option<PathBuf>,
    pub pon: PonConfig,
    pub lte: LteConfig,
    pub load: LoadProfile,
    pub metrics: MetricsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::Cooperative,
            seed: 1,
            duration_s: 1.0,
            event_log: false,
            out_dir: None,
            pon: PonConfig::default(),
            lte: LteConfig::default(),
            load: LoadProfile::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

/// One configuration problem, located by dotted field path and, when the
/// configuration came from a file, by line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldProblem {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}", .0.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldProblem>),
}

impl ConfigError {
    pub fn problems(&self) -> &[FieldProblem] {
        match self {
            ConfigError::Invalid(p) => p,
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| src[..s.start].lines().count().max(1));
            ConfigError::Invalid(vec![FieldProblem {
                field: "<document>".to_string(),
                line,
                message: e.message().to_string(),
            }])
        })?;
        cfg.validate_located(Some(src))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn duration(&self) -> SimDuration {
        SimDuration::from_secs_f64(self.duration_s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_located(None)
    }

    fn validate_located(&self, src: Option<&str>) -> Result<(), ConfigError> {
        fn push(raw: &mut Vec<(String, String)>, section: &str, field: &str, msg: String) {
            let path = if section.is_empty() {
                field.to_string()
            } else {
                format!("{section}.{field}")
            };
            raw.push((path, msg));
        }
        let mut raw: Vec<(String, String)> = Vec::new();

        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            push(&mut raw, "", "duration_s", "must be a positive number of seconds".to_string());
        } else if self.duration() <= self.metrics.warmup {
            push(&mut raw, 
                "",
                "duration_s",
                format!(
                    "{} s does not exceed the {} us warm-up",
                    self.duration_s,
                    self.metrics.warmup.as_us()
                ),
            );
        }

        let p = &self.pon;
        if p.line_rate_bps == 0 {
            push(&mut raw, "pon", "line_rate_bps", "must be positive".to_string());
        }
        if p.access_link_rate_bps == 0 {
            push(&mut raw, "pon", "access_link_rate_bps", "must be positive".to_string());
        }
        if !(p.fiber_km.is_finite() && p.fiber_km >= 0.0) {
            push(&mut raw, "pon", "fiber_km", "must be a non-negative number".to_string());
        }
        if p.frame_period == SimDuration::ZERO {
            push(&mut raw, "pon", "frame_period_us", "must be positive".to_string());
        }
        if !(1..=64).contains(&p.onu_count) {
            push(&mut raw, "pon", "onu_count", format!("{} is outside 1..=64", p.onu_count));
        }
        if p.tcont_queue_cap_bytes == 0 {
            push(&mut raw, "pon", "tcont_queue_cap_bytes", "must be positive".to_string());
        }
        for (f, m) in self.lte.problems() {
            push(&mut raw, "lte", f, m);
        }
        for (f, m) in self.load.problems(p.onu_count) {
            push(&mut raw, "load", f, m);
        }
        for (f, m) in self.metrics.problems() {
            push(&mut raw, "metrics", f, m);
        }

        // Every frame must hold the polls plus the largest unfragmentable burst.
        if raw.is_empty() {
            let polls = (0..p.onu_count)
                .map(|onu| {
                    let fields = if onu == 0 { 5 } else { 4 };
                    p.serialize(fields * p.dbru_bytes as u64) + p.guard_time
                })
                .sum::<SimDuration>();
            let largest = match self.load.packet_size {
                SizeDistribution::Fixed { bytes } => bytes,
                SizeDistribution::Uniform { max, .. } => max,
            }
            .max(self.lte.tb_size_bytes)
            .max(self.load.scripted.iter().map(|s| s.size_bytes).max().unwrap_or(0));
            let need = polls + p.serialize(p.wire_bytes(largest)) + p.guard_time;
            if need > p.frame_period {
                push(&mut raw, 
                    "pon",
                    "frame_period_us",
                    format!(
                        "a {} us frame cannot hold the polls plus one {largest} B packet ({} us)",
                        p.frame_period.as_us(),
                        need.as_us()
                    ),
                );
            }
        }

        if raw.is_empty() {
            return Ok(());
        }
        let problems = raw
            .into_iter()
            .map(|(field, message)| FieldProblem {
                line: src.and_then(|s| locate(s, &field)),
                field,
                message,
            })
            .collect();
        Err(ConfigError::Invalid(problems))
    }
}

/// Finds the line holding `section.key = ...` in a TOML document.
fn locate(src: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let is_key = t
            .split_once('=')
            .is_some_and(|(k, _)| k.trim() == key);
        if is_key && current == section {
            return Some(i + 1);
        }
    }
    None
}

/// Validates and runs one configuration.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let opts = SimOptions {
        event_log: cfg.event_log,
        record_departures: false,
    };
    Ok(Simulation::new(cfg, opts).run()?)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DistanceKm,
    PacketSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DistanceKm => "distance_km",
            SweepAxis::PacketSize => "packet_size",
        }
    }

    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepAxis::DistanceKm => cfg.pon.fiber_km = value,
            SweepAxis::PacketSize => cfg.lte.tb_size_bytes = value.round() as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: Scenario,
    pub axis_value: f64,
    pub mean_rtt_us: f64,
    pub min_rtt_us: f64,
    pub max_rtt_us: f64,
    pub mean_jitter_us: Option<f64>,
    pub ngmn_margin_us: f64,
    pub compliant: bool,
    /// Alternative presentation: the 500 us limit minus the round-trip
    /// fibre latency, to be read against `rtt_excl_fiber_us`. The margin
    /// is the same either way.
    pub threshold_line_us: f64,
    pub rtt_excl_fiber_us: f64,
}

impl SweepRow {
    fn from_report(axis_value: f64, r: &RunReport, fiber_rtt: SimDuration) -> Self {
        SweepRow {
            scenario: r.scenario,
            axis_value,
            mean_rtt_us: r.rtt_mean_us,
            min_rtt_us: r.rtt_min_us,
            max_rtt_us: r.rtt_max_us,
            mean_jitter_us: r.jitter_mean_us,
            ngmn_margin_us: r.ngmn_margin_us,
            compliant: r.compliant,
            threshold_line_us: NGMN_RTT_THRESHOLD.as_us() - fiber_rtt.as_us(),
            rtt_excl_fiber_us: r.rtt_mean_us - fiber_rtt.as_us(),
        }
    }
}

#[derive(Debug)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Rows ordered by scenario, then axis value.
    pub rows: Vec<SweepRow>,
    /// Points that failed, with the reason.
    pub failures: Vec<(Scenario, f64, String)>,
    /// Zero-margin crossing per scenario, for distance sweeps.
    pub crossings: Vec<(Scenario, Crossing)>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "scenario,{},mean_rtt_us,min_rtt_us,max_rtt_us,mean_jitter_us,ngmn_margin_us,compliant,threshold_line_us,rtt_excl_fiber_us\n",
            self.axis.name()
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario,
                r.axis_value,
                r.mean_rtt_us,
                r.min_rtt_us,
                r.max_rtt_us,
                r.mean_jitter_us.map_or(String::new(), |j| j.to_string()),
                r.ngmn_margin_us,
                r.compliant,
                r.threshold_line_us,
                r.rtt_excl_fiber_us
            ));
        }
        s
    }
}

/// Runs every `(scenario, value)` point in parallel. Failed points are
/// recorded and the sweep continues.
pub fn sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    scenarios: &[Scenario],
) -> Result<SweepResult, ConfigError> {
    if values.len() < 2 {
        return Err(ConfigError::Invalid(vec![FieldProblem {
            field: "values".to_string(),
            line: None,
            message: "a sweep needs at least two axis points".to_string(),
        }]));
    }
    let mut points: Vec<(Scenario, f64)> = scenarios
        .iter()
        .flat_map(|s| values.iter().map(move |v| (*s, *v)))
        .collect();
    points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let results: Vec<_> = points
        .par_iter()
        .map(|&(scenario, value)| {
            let mut cfg = base.clone();
            cfg.scenario = scenario;
            cfg.event_log = false;
            axis.apply(&mut cfg, value);
            let fiber_rtt = cfg.pon.propagation() * 2;
            (scenario, value, fiber_rtt, run(&cfg).map(|o| o.report))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (scenario, value, fiber_rtt, res) in results {
        match res {
            Ok(report) => rows.push(SweepRow::from_report(value, &report, fiber_rtt)),
            Err(e) => failures.push((scenario, value, e.to_string())),
        }
    }
    let crossings = if axis == SweepAxis::DistanceKm {
        scenarios
            .iter()
            .map(|s| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.scenario == *s)
                    .map(|r| (r.axis_value, r.mean_rtt_us))
                    .collect();
                (*s, max_compliant_distance(&pts))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SweepResult {
        axis,
        rows,
        failures,
        crossings,
    })
}
