//! Simulation primitives: virtual clock, event queue, cost ledger and seeded
//! random streams.
//!
//! Everything here is deterministic. Time is virtual nanoseconds and never
//! derived from the wall clock.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::SimError;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;
pub const NS_PER_SEC: u64 = 1_000_000_000;

/// Virtual time in nanoseconds.
pub type Nanos = u64;

/// Convert a latency in CPU cycles to nanoseconds at `clock_ghz`, rounding to
/// the nearest nanosecond.
pub fn cycles_to_ns(cycles: u64, clock_ghz: f64) -> Nanos {
    (cycles as f64 / clock_ghz).round() as Nanos
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    now: Nanos,
}

impl SimClock {
    pub fn now(&self) -> Nanos {
        self.now
    }

    fn advance_to(&mut self, t: Nanos) {
        debug_assert!(t >= self.now, "clock moved backwards");
        self.now = t;
    }
}

struct Scheduled<E> {
    at: Nanos,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap; invert so the earliest (then first inserted)
    // event is on top.
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Time-ordered event queue with FIFO tie-break, owning the simulation clock.
pub struct EventQueue<E> {
    clock: SimClock,
    heap: BinaryHeap<Scheduled<E>>,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self { clock: SimClock::default(), heap: BinaryHeap::new(), next_seq: 0 }
    }

    pub fn now(&self) -> Nanos {
        self.clock.now()
    }

    pub fn schedule(&mut self, event: E, at: Nanos) -> Result<(), SimError> {
        if at < self.clock.now() {
            return Err(SimError::ScheduleInPast { at, now: self.clock.now() });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, event });
        Ok(())
    }

    /// Time of the next pending event, if any.
    pub fn peek_time(&self) -> Option<Nanos> {
        self.heap.peek().map(|s| s.at)
    }

    /// Advance the clock to `t` without dispatching anything. Used by the
    /// access stream, which runs between timer events.
    pub fn advance_to(&mut self, t: Nanos) {
        if let Some(next) = self.peek_time() {
            debug_assert!(t <= next, "advanced past a pending event");
        }
        self.clock.advance_to(t);
    }

    /// Pop the next event and move the clock to its time.
    pub fn pop(&mut self) -> Option<(Nanos, E)> {
        let s = self.heap.pop()?;
        self.clock.advance_to(s.at);
        Some((s.at, s.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostCategory {
    Access,
    FaultHandling,
    MigrationAlloc,
    MigrationUnmap,
    MigrationCopy,
    MigrationRemap,
    Demotion,
    Scan,
}

impl CostCategory {
    pub const ALL: [CostCategory; 8] = [
        CostCategory::Access,
        CostCategory::FaultHandling,
        CostCategory::MigrationAlloc,
        CostCategory::MigrationUnmap,
        CostCategory::MigrationCopy,
        CostCategory::MigrationRemap,
        CostCategory::Demotion,
        CostCategory::Scan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostCategory::Access => "access_ns",
            CostCategory::FaultHandling => "fault_handling_ns",
            CostCategory::MigrationAlloc => "migration_alloc_ns",
            CostCategory::MigrationUnmap => "migration_unmap_ns",
            CostCategory::MigrationCopy => "migration_copy_ns",
            CostCategory::MigrationRemap => "migration_remap_ns",
            CostCategory::Demotion => "demotion_ns",
            CostCategory::Scan => "scan_ns",
        }
    }
}

/// Accumulated virtual cost for one process, plus its event counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub access_ns: u64,
    pub fault_handling_ns: u64,
    pub migration_alloc_ns: u64,
    pub migration_unmap_ns: u64,
    pub migration_copy_ns: u64,
    pub migration_remap_ns: u64,
    pub demotion_ns: u64,
    pub scan_ns: u64,

    pub accesses: u64,
    pub promotions: u64,
    pub demotions: u64,
    pub demote_promoted: u64,
    pub hint_faults: u64,
    pub failed_migrations: u64,
    pub restarts: u64,
    pub stops: u64,
}

impl CostLedger {
    pub fn charge(&mut self, category: CostCategory, ns: u64) {
        *self.field_mut(category) += ns;
    }

    pub fn get(&self, category: CostCategory) -> u64 {
        match category {
            CostCategory::Access => self.access_ns,
            CostCategory::FaultHandling => self.fault_handling_ns,
            CostCategory::MigrationAlloc => self.migration_alloc_ns,
            CostCategory::MigrationUnmap => self.migration_unmap_ns,
            CostCategory::MigrationCopy => self.migration_copy_ns,
            CostCategory::MigrationRemap => self.migration_remap_ns,
            CostCategory::Demotion => self.demotion_ns,
            CostCategory::Scan => self.scan_ns,
        }
    }

    fn field_mut(&mut self, category: CostCategory) -> &mut u64 {
        match category {
            CostCategory::Access => &mut self.access_ns,
            CostCategory::FaultHandling => &mut self.fault_handling_ns,
            CostCategory::MigrationAlloc => &mut self.migration_alloc_ns,
            CostCategory::MigrationUnmap => &mut self.migration_unmap_ns,
            CostCategory::MigrationCopy => &mut self.migration_copy_ns,
            CostCategory::MigrationRemap => &mut self.migration_remap_ns,
            CostCategory::Demotion => &mut self.demotion_ns,
            CostCategory::Scan => &mut self.scan_ns,
        }
    }

    pub fn total(&self) -> u64 {
        CostCategory::ALL.iter().map(|&c| self.get(c)).sum()
    }

    /// Blocked migration time (all four promotion steps).
    pub fn migration_ns(&self) -> u64 {
        self.migration_alloc_ns + self.migration_unmap_ns + self.migration_copy_ns + self.migration_remap_ns
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for c in CostCategory::ALL {
            self.charge(c, other.get(c));
        }
        self.accesses += other.accesses;
        self.promotions += other.promotions;
        self.demotions += other.demotions;
        self.demote_promoted += other.demote_promoted;
        self.hint_faults += other.hint_faults;
        self.failed_migrations += other.failed_migrations;
        self.restarts += other.restarts;
        self.stops += other.stops;
    }
}

/// Identifies an independent random stream within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub process: u32,
    pub generator: u32,
}

impl RngStream {
    pub fn new(seed: u64, process: u32, generator: u32) -> Self {
        Self { seed, process, generator }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let stream = ((self.process as u64) << 32) | self.generator as u64;
        ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(stream)))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
