//! Background load: Poisson packet arrivals per ONU and traffic class.
//!
//! Sources are pulled lazily. The simulator asks each source for every
//! arrival up to the instant an ONU next needs its queue state, so
//! background packets never occupy the event queue.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::engine::{RngStream, SimDuration, SimTime};
use crate::pon::TrafficClass;
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SizeDistribution {
    Fixed { bytes: u32 },
    /// Inclusive on both ends.
    Uniform { min: u32, max: u32 },
}

impl SizeDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            SizeDistribution::Fixed { bytes } => bytes as f64,
            SizeDistribution::Uniform { min, max } => (min as f64 + max as f64) / 2.0,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> u32 {
        match *self {
            SizeDistribution::Fixed { bytes } => bytes,
            SizeDistribution::Uniform { min, max } => {
                rng.range_u64(min as u64, max as u64 + 1) as u32
            }
        }
    }
}

/// Share of the background load per class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassMix {
    pub tc1: f64,
    pub tc2: f64,
    pub tc3: f64,
    pub tc4: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        ClassMix {
            tc1: 0.4 / 3.0,
            tc2: 0.4 / 3.0,
            tc3: 0.4 / 3.0,
            tc4: 0.6,
        }
    }
}

impl ClassMix {
    pub fn fraction(&self, class: TrafficClass) -> f64 {
        match class {
            TrafficClass::Tc1 => self.tc1,
            TrafficClass::Tc2 => self.tc2,
            TrafficClass::Tc3 => self.tc3,
            TrafficClass::Tc4 => self.tc4,
        }
    }
}

/// A background packet injected at a fixed time, bypassing the Poisson
/// sources. Used for small hand-checkable scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedArrival {
    #[serde(rename = "at_us", with = "units::us")]
    pub at: SimDuration,
    pub onu: u32,
    pub class: TrafficClass,
    pub size_bytes: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadProfile {
    /// Offered upstream load across all ONUs, as a fraction of line rate.
    /// The foreground flow counts toward it.
    pub total_load: f64,
    pub class_mix: ClassMix,
    pub packet_size: SizeDistribution,
    pub scripted: Vec<ScriptedArrival>,
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile {
            total_load: 0.0,
            class_mix: ClassMix::default(),
            packet_size: SizeDistribution::Uniform { min: 64, max: 1500 },
            scripted: Vec::new(),
        }
    }
}

impl LoadProfile {
    pub fn problems(&self, onu_count: u32) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.total_load) {
            out.push(("total_load", format!("{} is outside [0, 1]", self.total_load)));
        }
        let m = self.class_mix;
        if [m.tc1, m.tc2, m.tc3, m.tc4].iter().any(|f| f.is_nan() || *f < 0.0) {
            out.push(("class_mix", "fractions must be non-negative".to_string()));
        }
        let sum = m.tc1 + m.tc2 + m.tc3 + m.tc4;
        if (sum - 1.0).abs() > 1e-9 {
            out.push(("class_mix", format!("fractions sum to {sum}, expected 1")));
        }
        match self.packet_size {
            SizeDistribution::Fixed { bytes: 0 } => {
                out.push(("packet_size", "bytes must be at least 1".to_string()))
            }
            SizeDistribution::Uniform { min, max } if min == 0 || min > max => {
                out.push(("packet_size", format!("need 1 <= min <= max, got {min}..={max}")))
            }
            _ => {}
        }
        if let Some(s) = self.scripted.iter().find(|s| s.onu >= onu_count || s.size_bytes == 0) {
            out.push(("scripted", format!("arrival at {} us is not valid for {onu_count} ONUs", s.at.as_us())));
        }
        out
    }

    /// Mean background byte rate of one class across the whole PON.
    /// The foreground rate is taken out of the TC4 share.
    pub fn class_rate_bps(&self, class: TrafficClass, line_rate_bps: u64, foreground_bps: f64) -> f64 {
        let r = line_rate_bps as f64 * self.total_load * self.class_mix.fraction(class);
        if class == TrafficClass::Tc4 {
            (r - foreground_bps).max(0.0)
        } else {
            r
        }
    }
}

/// Poisson packet arrivals for one ONU and class.
#[derive(Clone, Debug)]
pub struct BackgroundSource {
    pub onu: u32,
    pub class: TrafficClass,
    sizes: SizeDistribution,
    gap: Option<Exp<f64>>,
    rng: RngStream,
    next_at: Option<SimTime>,
}

impl BackgroundSource {
    /// `rate_bps` is this source's own mean rate; zero yields a silent source.
    pub fn new(
        onu: u32,
        class: TrafficClass,
        rate_bps: f64,
        sizes: SizeDistribution,
        seed: u64,
    ) -> Self {
        let pkts_per_sec = rate_bps / (8.0 * sizes.mean());
        let gap = (pkts_per_sec > 0.0).then(|| Exp::new(pkts_per_sec).expect("positive rate"));
        let stream = 1 + onu as u64 * 4 + class.index() as u64;
        let mut src = BackgroundSource {
            onu,
            class,
            sizes,
            gap,
            rng: RngStream::new(seed, stream),
            next_at: None,
        };
        src.next_at = src.draw_gap().map(|g| SimTime::ZERO + g);
        src
    }

    fn draw_gap(&mut self) -> Option<SimDuration> {
        let secs = self.gap?.sample(&mut self.rng);
        Some(SimDuration::from_secs_f64(secs))
    }

    pub fn peek(&self) -> Option<SimTime> {
        self.next_at
    }

    /// Pops the next arrival if it happens at or before `t`.
    pub fn next_until(&mut self, t: SimTime) -> Option<(SimTime, u32)> {
        let at = self.next_at.filter(|a| *a <= t)?;
        let size = self.sizes.sample(&mut self.rng);
        self.next_at = self.draw_gap().map(|g| at + g);
        Some((at, size))
    }
}

/// Sources for every (ONU, class) pair, with the load split evenly over ONUs.
pub fn background_sources(
    profile: &LoadProfile,
    onu_count: u32,
    line_rate_bps: u64,
    foreground_bps: f64,
    seed: u64,
) -> Vec<BackgroundSource> {
    let mut out = Vec::new();
    for onu in 0..onu_count {
        for class in TrafficClass::ALL {
            let rate = profile.class_rate_bps(class, line_rate_bps, foreground_bps) / onu_count as f64;
            out.push(BackgroundSource::new(onu, class, rate, profile.packet_size, seed));
        }
    }
    out
}

/// All background arrivals for one ONU over `[0, duration]`, in time order.
pub fn generate_background(
    profile: &LoadProfile,
    onu: u32,
    onu_count: u32,
    line_rate_bps: u64,
    foreground_bps: f64,
    seed: u64,
    duration: SimDuration,
) -> Vec<(SimTime, TrafficClass, u32)> {
    let end = SimTime::ZERO + duration;
    let mut out: Vec<_> = background_sources(profile, onu_count, line_rate_bps, foreground_bps, seed)
        .into_iter()
        .filter(|s| s.onu == onu)
        .flat_map(|mut s| {
            std::iter::from_fn(move || s.next_until(end).map(|(t, b)| (t, s.class, b)))
        })
        .collect();
    out.sort_by_key(|(t, c, _)| (*t, std::cmp::Reverse(*c)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: u64 = 10_000_000_000;

    fn loaded(load: f64) -> LoadProfile {
        LoadProfile {
            total_load: load,
            ..LoadProfile::default()
        }
    }

    #[test]
    fn zero_load_is_silent() {
        let g = generate_background(&loaded(0.0), 0, 1, LINE, 0.0, 1, SimDuration::from_ms(100));
        assert!(g.is_empty());
    }

    #[test]
    fn tc4_rate_excludes_foreground() {
        let fg = 141.0 * 8.0 / 1e-3;
        let r = loaded(0.5).class_rate_bps(TrafficClass::Tc4, LINE, fg);
        assert!((r - (3e9 - 1.128e6)).abs() < 1e-3);
        let r1 = loaded(0.5).class_rate_bps(TrafficClass::Tc1, LINE, fg);
        assert!((r1 - 5e9 * 0.4 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn same_seed_same_arrivals() {
        let p = loaded(0.3);
        let a = generate_background(&p, 1, 2, LINE, 0.0, 42, SimDuration::from_ms(2));
        let b = generate_background(&p, 1, 2, LINE, 0.0, 42, SimDuration::from_ms(2));
        assert!(!a.is_empty());
        assert_eq!(a, b);
        let c = generate_background(&p, 1, 2, LINE, 0.0, 43, SimDuration::from_ms(2));
        assert_ne!(a, c);
    }

    #[test]
    fn long_run_rate_converges() {
        // 10 s at a modest rate keeps the test fast while giving ~10^5 packets.
        let p = LoadProfile {
            total_load: 0.01,
            packet_size: SizeDistribution::Fixed { bytes: 1000 },
            ..LoadProfile::default()
        };
        let dur = SimDuration::from_ms(10_000);
        let arrivals = generate_background(&p, 0, 1, LINE, 0.0, 7, dur);
        for class in TrafficClass::ALL {
            let bytes: u64 = arrivals.iter().filter(|a| a.1 == class).map(|a| a.2 as u64).sum();
            let measured = bytes as f64 * 8.0 / dur.as_secs_f64();
            let want = p.class_rate_bps(class, LINE, 0.0);
            assert!((measured / want - 1.0).abs() < 0.02, "{class}: {measured} vs {want}");
        }
    }

    #[test]
    fn validation() {
        let mut p = loaded(1.2);
        p.class_mix.tc4 = 0.5;
        p.packet_size = SizeDistribution::Uniform { min: 10, max: 5 };
        let fields: Vec<_> = p.problems(1).into_iter().map(|(f, _)| f).collect();
        assert_eq!(fields, vec!["total_load", "class_mix", "packet_size"]);
        assert!(LoadProfile::default().problems(1).is_empty());
    }
}
