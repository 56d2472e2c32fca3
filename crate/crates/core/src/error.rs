use thiserror::Error;

use crate::memory::{PageId, ProcessId, Tier};
use crate::sim::Nanos;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("event scheduled at {at} ns but clock is already at {now} ns")]
    ScheduleInPast { at: Nanos, now: Nanos },

    #[error("out of memory: process {process} requested {requested} page(s), both tiers are full")]
    OutOfMemory { process: ProcessId, requested: usize },

    #[error("process {process} accessed page index {index} which it never allocated")]
    UnallocatedAccess { process: ProcessId, index: u64 },

    #[error("page {page} is already resident in {tier}")]
    SameTier { page: PageId, tier: Tier },

    #[error("unknown process {0}")]
    UnknownProcess(ProcessId),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("line {line}: timestamp {t} is earlier than previous timestamp {prev}")]
    Decreasing { line: usize, t: u64, prev: u64 },
}
