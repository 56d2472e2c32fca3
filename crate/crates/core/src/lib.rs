//! Deterministic simulator for page placement across a DRAM tier and a
//! CXL-attached memory tier, with hint-fault driven promotion and a
//! per-process switch that turns migration off once pages stop moving
//! usefully and on again when the access pattern shifts.

pub mod config;
pub mod control;
pub mod engine;
pub mod error;
pub mod lru;
pub mod memory;
pub mod profiler;
pub mod report;
pub mod sim;
pub mod workload;

pub use config::{Policy, ScenarioConfig};
pub use control::{AdaptiveConfig, DeltaTracker, RestartAction, RestartState, SlopeState, StopAction, ToggleState, VariationState};
pub use engine::{run_scenario, RunError, Simulation};
pub use error::{ConfigError, SimError, TraceError};
pub use lru::{Lru, LruMode, RefaultDecision};
pub use memory::{AccessKind, MemoryConfig, MemorySystem, PageFlags, PageId, ProcessId, Tier, TierConfig};
pub use profiler::{FaultPolicy, HintAction, PoisonScheduler, ProfilerConfig, ScanResult};
pub use report::{compare, ComparisonTable, IntervalRow, RunReport};
pub use sim::{CostCategory, CostLedger, EventQueue, Nanos};
pub use workload::{TenantSpec, WorkloadKind, WorkloadSpec};
