//! Hint-fault profiling: periodic PTE poisoning, hint-fault dispatch and the
//! strided access-bit scan used while migration is switched off.

use crate::lru::{ListSlot, LruMode, MarkOutcome, RefaultDecision};
use crate::memory::{MemorySystem, MigrateMode, PageFlags, PageId, ProcessId, Tier};
use crate::sim::{CostCategory, Nanos, NS_PER_MS};

/// Pages per stride-scan step: 2 MiB of 4 KiB pages.
pub const DEFAULT_SCAN_STRIDE: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilerConfig {
    pub poison_batch: usize,
    pub poison_period_ns: Nanos,
    pub scan_stride_pages: usize,
    pub scan_visit_ns: u64,
    pub scan_clear_ns: u64,
    /// Also poison DRAM-resident pages. Off by default: in tiering mode only
    /// lower-tier pages are candidates, so top-tier pages are skipped.
    pub poison_fast_tier: bool,
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        Self {
            poison_batch: 256,
            poison_period_ns: 100 * NS_PER_MS,
            scan_stride_pages: DEFAULT_SCAN_STRIDE,
            scan_visit_ns: 50,
            scan_clear_ns: 1_000,
            poison_fast_tier: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanResult {
    pub accessed_count: usize,
    pub sampled: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintAction {
    PromoteSync,
    Mark,
    Skip,
}

/// How hint faults are turned into promotion decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultPolicy {
    pub lru_mode: LruMode,
    pub refault_distance: bool,
}

/// Round-robin poisoning state, one cursor per process.
#[derive(Debug, Clone, Default)]
pub struct PoisonScheduler {
    cursors: Vec<usize>,
}

impl PoisonScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cursor(&self, proc: ProcessId) -> usize {
        self.cursors.get(proc.index()).copied().unwrap_or(0)
    }

    /// Poison the next `config.poison_batch` eligible pages of `proc`,
    /// wrapping around its address space. Does nothing while the process has
    /// migration switched off.
    pub fn poison_tick(&mut self, mem: &mut MemorySystem, config: &ProfilerConfig, proc: ProcessId, migration_on: bool) -> usize {
        if !migration_on {
            return 0;
        }
        if self.cursors.len() <= proc.index() {
            self.cursors.resize(proc.index() + 1, 0);
        }
        let n = mem.process_pages(proc).len();
        if n == 0 {
            return 0;
        }
        let mut cursor = self.cursors[proc.index()] % n;
        let mut poisoned = 0;
        let mut visited = 0;
        while poisoned < config.poison_batch && visited < n {
            let id = mem.process_pages(proc)[cursor];
            let page = mem.page_mut(id);
            if config.poison_fast_tier || page.tier == Tier::Cxl {
                page.flags.insert(PageFlags::POISONED);
                poisoned += 1;
            }
            cursor = (cursor + 1) % n;
            visited += 1;
        }
        self.cursors[proc.index()] = cursor;
        poisoned
    }
}

/// Handle a hint fault on a poisoned page of `proc`.
///
/// Base handling cost is always charged. With migration off the migration
/// path is skipped outright. Otherwise a promotion candidate (active, or
/// `PAGE_HINTED` in modified mode) is promoted synchronously, subject to the
/// refault-distance check when enabled; anything else is marked accessed.
pub fn on_hint_fault(mem: &mut MemorySystem, proc: ProcessId, id: PageId, migration_on: bool, policy: FaultPolicy) -> HintAction {
    let fault_ns = mem.config().fault_ns;
    mem.page_mut(id).flags.remove(PageFlags::POISONED);
    let l = mem.ledger_mut(proc);
    l.charge(CostCategory::FaultHandling, fault_ns);
    l.hint_faults += 1;
    if !migration_on {
        return HintAction::Skip;
    }

    let page = *mem.page(id);
    if page.tier == Tier::Dram {
        let (lru, pages) = mem.split_lru();
        lru.activate(pages, id);
        return HintAction::Mark;
    }

    let promote = match policy.lru_mode {
        LruMode::Baseline => {
            let (lru, pages) = mem.split_lru();
            matches!(lru.mark_accessed_baseline(pages, id), MarkOutcome::AlreadyActive)
        }
        LruMode::Modified => {
            let candidate = page.lru == ListSlot::Active || page.flags.contains(PageFlags::HINTED);
            let (lru, pages) = mem.split_lru();
            lru.mark_accessed_modified(pages, id);
            let decision = if policy.refault_distance {
                lru.update_refault_distance(pages, id)
            } else {
                RefaultDecision::Promote
            };
            candidate && decision == RefaultDecision::Promote
        }
    };
    if !promote {
        return HintAction::Mark;
    }
    // dst-full is counted as a failed migration inside migrate_page
    mem.migrate_page(id, Tier::Dram, MigrateMode::Sync).expect("CXL page promoted to DRAM");
    HintAction::PromoteSync
}

/// Visit every `stride`-th page of `proc`, count and clear access bits on
/// the visited pages only.
pub fn stride_scan(mem: &mut MemorySystem, config: &ProfilerConfig, proc: ProcessId) -> ScanResult {
    let stride = config.scan_stride_pages.max(1);
    let n = mem.process_pages(proc).len();
    let mut result = ScanResult::default();
    for idx in (0..n).step_by(stride) {
        let id = mem.process_pages(proc)[idx];
        let page = mem.page_mut(id);
        result.sampled += 1;
        if page.flags.contains(PageFlags::ACCESSED) {
            page.flags.remove(PageFlags::ACCESSED);
            result.accessed_count += 1;
        }
    }
    let cost = result.sampled as u64 * config.scan_visit_ns + result.accessed_count as u64 * config.scan_clear_ns;
    mem.ledger_mut(proc).charge(CostCategory::Scan, cost);
    result
}
