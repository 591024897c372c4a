//! Virtual XGS-PON: configuration, packets and budget ledgers, T-CONT
//! queues and the OLT's DBA master.

mod config;
mod dba;
mod packet;
mod tcont;

pub use config::{propagation_delay, serialization_time, PonConfig};
pub use dba::{
    Allocation, AllocationKind, BMap, CoopHint, DbaMaster, DbaStats, DbruReport, FrameClock,
    ReportOrigin,
};
pub use packet::{
    compose_cooperative_latency, compose_unsynchronised_latency, BudgetLedger, Direction,
    FronthaulPacket, Interval, LedgerError, TrafficClass,
};
pub use tcont::{EnqueueOutcome, QueuedPacket, TCont, TContId};
