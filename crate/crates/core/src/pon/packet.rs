use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{SimDuration, SimTime};

/// Upstream traffic class; `Tc4` is the highest priority.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Tc1,
    Tc2,
    Tc3,
    Tc4,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 4] = [
        TrafficClass::Tc1,
        TrafficClass::Tc2,
        TrafficClass::Tc3,
        TrafficClass::Tc4,
    ];

    /// Dense index 0..4 in ascending priority.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TC{}", self.index() + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upstream,
    Downstream,
}

/// The seven upstream delay-budget intervals, in traversal order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Interval {
    /// RU -> ONU transfer.
    A,
    /// Wait for the next DBRu opportunity.
    B,
    /// DBRu ONU -> OLT.
    C,
    /// DBA calculation and scheduling.
    D,
    /// BMap OLT -> ONU.
    E,
    /// Wait for the allocated slot, then the burst to the OLT.
    F,
    /// OLT -> DU+CU transfer.
    G,
}

impl Interval {
    pub const ALL: [Interval; 7] = [
        Interval::A,
        Interval::B,
        Interval::C,
        Interval::D,
        Interval::E,
        Interval::F,
        Interval::G,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("interval {0:?} was not recorded")]
    Missing(Interval),
    #[error("interval {interval:?} would end before it starts or before the previous interval")]
    OutOfOrder { interval: Interval },
}

/// Entry and exit timestamps for each delay-budget interval a packet
/// traversed. Recorded intervals never overlap and appear in A..G order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    spans: [Option<(SimTime, SimTime)>; 7],
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        interval: Interval,
        entry: SimTime,
        exit: SimTime,
    ) -> Result<(), LedgerError> {
        if exit < entry {
            return Err(LedgerError::OutOfOrder { interval });
        }
        let prev_exit = self.spans[..interval.index()]
            .iter()
            .rev()
            .find_map(|s| s.map(|(_, x)| x));
        let next_entry = self.spans[interval.index() + 1..]
            .iter()
            .find_map(|s| s.map(|(e, _)| e));
        if prev_exit.is_some_and(|p| entry < p) || next_entry.is_some_and(|n| exit > n) {
            return Err(LedgerError::OutOfOrder { interval });
        }
        self.spans[interval.index()] = Some((entry, exit));
        Ok(())
    }

    /// Records consecutive intervals from boundary timestamps:
    /// `bounds[i]..bounds[i+1]` becomes `intervals[i]`.
    pub fn record_chain(
        &mut self,
        intervals: &[Interval],
        bounds: &[SimTime],
    ) -> Result<(), LedgerError> {
        assert_eq!(bounds.len(), intervals.len() + 1);
        for (i, iv) in intervals.iter().enumerate() {
            self.record(*iv, bounds[i], bounds[i + 1])?;
        }
        Ok(())
    }

    pub fn span(&self, interval: Interval) -> Option<(SimTime, SimTime)> {
        self.spans[interval.index()]
    }

    pub fn duration(&self, interval: Interval) -> Option<SimDuration> {
        self.span(interval).map(|(e, x)| x - e)
    }

    pub fn first_entry(&self) -> Option<SimTime> {
        self.spans.iter().find_map(|s| s.map(|(e, _)| e))
    }

    pub fn last_exit(&self) -> Option<SimTime> {
        self.spans.iter().rev().find_map(|s| s.map(|(_, x)| x))
    }

    fn sum_of(&self, intervals: &[Interval]) -> Result<SimDuration, LedgerError> {
        intervals
            .iter()
            .map(|iv| self.duration(*iv).ok_or(LedgerError::Missing(*iv)))
            .sum()
    }
}

/// Latency of an un-synchronised traversal: the sum of intervals A..G.
pub fn compose_unsynchronised_latency(ledger: &BudgetLedger) -> Result<SimDuration, LedgerError> {
    ledger.sum_of(&Interval::ALL)
}

/// Latency of a cooperative traversal: E + F + G only.
pub fn compose_cooperative_latency(ledger: &BudgetLedger) -> Result<SimDuration, LedgerError> {
    ledger.sum_of(&[Interval::E, Interval::F, Interval::G])
}

/// A fronthaul data unit and its budget instrumentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FronthaulPacket {
    pub id: u64,
    pub size_bytes: u32,
    pub priority_class: TrafficClass,
    pub direction: Direction,
    pub ledger: BudgetLedger,
    pub is_foreground: bool,
}

impl FronthaulPacket {
    /// A foreground LTE uplink transport block; always TC4.
    pub fn uplink_tb(id: u64, size_bytes: u32) -> Self {
        assert!(size_bytes >= 1, "packets carry at least one byte");
        FronthaulPacket {
            id,
            size_bytes,
            priority_class: TrafficClass::Tc4,
            direction: Direction::Upstream,
            ledger: BudgetLedger::new(),
            is_foreground: true,
        }
    }
}
