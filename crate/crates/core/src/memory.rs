//! Two memory tiers, page placement, watermark-driven demotion and the
//! four-step page migration with its cost model.

use std::fmt;

use bitflags::bitflags;

use crate::error::SimError;
use crate::lru::{ListSlot, Lru, LruMode};
use crate::sim::{cycles_to_ns, CostCategory, CostLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Page frame number. Assigned once at allocation and kept across
/// migrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageId(pub u32);

impl PageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pfn {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Dram,
    Cxl,
}

impl Tier {
    pub const ALL: [Tier; 2] = [Tier::Dram, Tier::Cxl];

    pub fn index(self) -> usize {
        match self {
            Tier::Dram => 0,
            Tier::Cxl => 1,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Dram => "DRAM",
            Tier::Cxl => "CXL",
        })
    }
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct PageFlags: u8 {
        /// Promoted since the flag was last cleared by a demotion.
        const PROMOTED = 1 << 0;
        /// A hint fault was seen while on the inactive list.
        const HINTED   = 1 << 1;
        /// PTE is poisoned; the next access raises a hint fault.
        const POISONED = 1 << 2;
        const ACCESSED = 1 << 3;
        const DIRTY    = 1 << 4;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Page {
    pub owner: ProcessId,
    /// Index within the owner's address space.
    pub index: u32,
    pub tier: Tier,
    pub flags: PageFlags,
    pub lru: ListSlot,
}

impl Page {
    pub fn new(owner: ProcessId, index: u32, tier: Tier) -> Self {
        Self { owner, index, tier, flags: PageFlags::empty(), lru: ListSlot::Detached }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierConfig {
    pub capacity_pages: usize,
    pub high_watermark: f64,
    pub low_watermark: f64,
    pub promo_watermark: f64,
    pub read_latency_cycles: u64,
    pub write_latency_cycles: u64,
    pub read_bw_gbps: f64,
    pub write_bw_gbps: f64,
}

impl TierConfig {
    pub fn dram(capacity_pages: usize) -> Self {
        Self {
            capacity_pages,
            high_watermark: 0.95,
            low_watermark: 0.90,
            promo_watermark: 0.88,
            read_latency_cycles: 269,
            write_latency_cycles: 269,
            read_bw_gbps: 256.0,
            write_bw_gbps: 248.3,
        }
    }

    pub fn cxl(capacity_pages: usize) -> Self {
        Self {
            capacity_pages,
            high_watermark: 1.0,
            low_watermark: 0.99,
            promo_watermark: 1.0,
            read_latency_cycles: 615,
            write_latency_cycles: 615,
            read_bw_gbps: 17.8,
            write_bw_gbps: 15.8,
        }
    }

    pub fn validate(&self, name: &str, errors: &mut Vec<String>) {
        if self.capacity_pages == 0 {
            errors.push(format!("{name}.capacity_pages must be > 0"));
        }
        if !(self.low_watermark < self.high_watermark && self.high_watermark <= 1.0) {
            errors.push(format!("{name}: need low_watermark < high_watermark <= 1"));
        }
        if self.promo_watermark > self.high_watermark {
            errors.push(format!("{name}: promo_watermark must be <= high_watermark"));
        }
        if self.low_watermark < 0.0 || self.promo_watermark < 0.0 {
            errors.push(format!("{name}: watermarks must be non-negative"));
        }
    }

    fn pages_at(&self, fraction: f64) -> usize {
        (self.capacity_pages as f64 * fraction).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierState {
    pub config: TierConfig,
    pub used_pages: usize,
}

impl TierState {
    pub fn free_pages(&self) -> usize {
        self.config.capacity_pages - self.used_pages
    }

    pub fn is_full(&self) -> bool {
        self.used_pages >= self.config.capacity_pages
    }
}

/// Per-step migration costs in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MigrationCosts {
    pub alloc_ns: u64,
    pub unmap_ns: u64,
    pub copy_ns: u64,
    pub remap_ns: u64,
}

impl Default for MigrationCosts {
    fn default() -> Self {
        Self { alloc_ns: 1_500, unmap_ns: 3_000, copy_ns: 6_000, remap_ns: 2_500 }
    }
}

impl MigrationCosts {
    pub fn total(&self) -> u64 {
        self.alloc_ns + self.unmap_ns + self.copy_ns + self.remap_ns
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryConfig {
    pub dram: TierConfig,
    pub cxl: TierConfig,
    pub clock_ghz: f64,
    pub migration: MigrationCosts,
    /// Hint-fault handling cost without migration.
    pub fault_ns: u64,
    pub lru_mode: LruMode,
    /// DRAM inactive list is kept at >= 1/inactive_divisor of its LRU.
    pub inactive_divisor: usize,
    /// When false the demotion daemon never runs.
    pub demotion_enabled: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            dram: TierConfig::dram(16_000),
            cxl: TierConfig::cxl(128_000),
            clock_ghz: 2.6,
            migration: MigrationCosts::default(),
            fault_ns: 4_500,
            lru_mode: LruMode::Modified,
            inactive_divisor: 4,
            demotion_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrateMode {
    /// Promotion on the fault path; blocks the faulting process.
    Sync,
    /// Background demotion.
    Demote,
}

/// Placement-changing events, recorded when logging is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemEvent {
    Allocate { page: PageId, owner: ProcessId, tier: Tier },
    Promote { page: PageId, owner: ProcessId },
    Demote { page: PageId, owner: ProcessId, was_promoted: bool },
}

pub struct MemorySystem {
    config: MemoryConfig,
    pages: Vec<Page>,
    tiers: [TierState; 2],
    lru: Lru,
    procs: Vec<Vec<PageId>>,
    ledgers: Vec<CostLedger>,
    /// `[tier][read, write]` access latency in ns.
    latency_ns: [[u64; 2]; 2],
    log: Option<Vec<MemEvent>>,
    cxl_pressure: u64,
}

impl MemorySystem {
    pub fn new(config: MemoryConfig) -> Self {
        let lat = |t: &TierConfig| {
            [cycles_to_ns(t.read_latency_cycles, config.clock_ghz), cycles_to_ns(t.write_latency_cycles, config.clock_ghz)]
        };
        let latency_ns = [lat(&config.dram), lat(&config.cxl)];
        Self {
            tiers: [
                TierState { config: config.dram.clone(), used_pages: 0 },
                TierState { config: config.cxl.clone(), used_pages: 0 },
            ],
            config,
            pages: Vec::new(),
            lru: Lru::new(),
            procs: Vec::new(),
            ledgers: Vec::new(),
            latency_ns,
            log: None,
            cxl_pressure: 0,
        }
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> &[MemEvent] {
        self.log.as_deref().unwrap_or(&[])
    }

    fn record(&mut self, ev: MemEvent) {
        if let Some(log) = self.log.as_mut() {
            log.push(ev);
        }
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn add_process(&mut self) -> ProcessId {
        self.procs.push(Vec::new());
        self.ledgers.push(CostLedger::default());
        ProcessId(self.procs.len() as u32 - 1)
    }

    pub fn process_count(&self) -> usize {
        self.procs.len()
    }

    pub fn tier(&self, tier: Tier) -> &TierState {
        &self.tiers[tier.index()]
    }

    pub fn lru(&self) -> &Lru {
        &self.lru
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn page(&self, id: PageId) -> &Page {
        &self.pages[id.index()]
    }

    pub fn process_pages(&self, proc: ProcessId) -> &[PageId] {
        &self.procs[proc.index()]
    }

    pub fn ledger(&self, proc: ProcessId) -> &CostLedger {
        &self.ledgers[proc.index()]
    }

    pub fn ledger_mut(&mut self, proc: ProcessId) -> &mut CostLedger {
        &mut self.ledgers[proc.index()]
    }

    pub fn ledgers(&self) -> &[CostLedger] {
        &self.ledgers
    }

    /// Number of failed demotion attempts because the CXL tier was full.
    pub fn cxl_pressure(&self) -> u64 {
        self.cxl_pressure
    }

    pub fn access_latency_ns(&self, tier: Tier, kind: AccessKind) -> u64 {
        self.latency_ns[tier.index()][matches!(kind, AccessKind::Write) as usize]
    }

    pub fn page_of(&self, proc: ProcessId, index: u64) -> Result<PageId, SimError> {
        self.procs
            .get(proc.index())
            .ok_or(SimError::UnknownProcess(proc))?
            .get(index as usize)
            .copied()
            .ok_or(SimError::UnallocatedAccess { process: proc, index })
    }

    /// Allocate `n` pages for `proc`. Pages go to DRAM while DRAM is below its
    /// high watermark and to CXL otherwise. The demotion daemon is not run
    /// here; callers schedule it.
    pub fn allocate(&mut self, proc: ProcessId, n: usize) -> Result<Vec<PageId>, SimError> {
        if proc.index() >= self.procs.len() {
            return Err(SimError::UnknownProcess(proc));
        }
        let dram_limit = self.tiers[0].config.high_watermark * self.tiers[0].config.capacity_pages as f64;
        let dram_free = (dram_limit.ceil() as usize)
            .min(self.tiers[0].config.capacity_pages)
            .saturating_sub(self.tiers[0].used_pages);
        let cxl_free = self.tiers[1].free_pages();
        if dram_free + cxl_free < n {
            return Err(SimError::OutOfMemory { process: proc, requested: n });
        }
        self.lru.reserve_pages(self.pages.len() + n);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let tier = if k < dram_free { Tier::Dram } else { Tier::Cxl };
            let id = PageId(self.pages.len() as u32);
            let index = self.procs[proc.index()].len() as u32;
            self.pages.push(Page::new(proc, index, tier));
            self.procs[proc.index()].push(id);
            self.tiers[tier.index()].used_pages += 1;
            match tier {
                Tier::Dram => self.lru.push_inactive(&mut self.pages, Tier::Dram, id),
                Tier::Cxl => self.lru.on_cxl_arrival(&mut self.pages, id),
            }
            self.record(MemEvent::Allocate { page: id, owner: proc, tier });
            out.push(id);
        }
        Ok(out)
    }

    /// kswapd analogue for DRAM. Runs only once DRAM usage exceeds the promo
    /// watermark, then demotes inactive-tail pages until usage is at or below
    /// the low watermark or CXL is full. Returns the number demoted.
    pub fn demote_daemon(&mut self) -> usize {
        if !self.config.demotion_enabled {
            return 0;
        }
        let dram = &self.tiers[0];
        if dram.used_pages <= dram.config.pages_at(dram.config.promo_watermark) {
            return 0;
        }
        let target = dram.config.pages_at(dram.config.low_watermark);
        let mut demoted = 0;
        while self.tiers[0].used_pages > target {
            if self.tiers[1].is_full() {
                self.cxl_pressure += 1;
                break;
            }
            let Some(victim) = self.lru.take_victim(&mut self.pages, Tier::Dram, self.config.inactive_divisor) else {
                break;
            };
            self.move_page(victim, Tier::Cxl);
            self.finish_demotion(victim);
            demoted += 1;
        }
        demoted
    }

    /// Migrate a page to `dst`. Returns `Ok(false)` (and counts a failed
    /// migration) when `dst` has no free frame.
    pub fn migrate_page(&mut self, id: PageId, dst: Tier, mode: MigrateMode) -> Result<bool, SimError> {
        let page = self.pages[id.index()];
        if page.tier == dst {
            return Err(SimError::SameTier { page: id, tier: dst });
        }
        if self.tiers[dst.index()].is_full() {
            self.ledgers[page.owner.index()].failed_migrations += 1;
            return Ok(false);
        }
        self.lru.detach(&mut self.pages, id);
        self.move_page(id, dst);
        match (dst, mode) {
            (Tier::Dram, _) => {
                let costs = self.config.migration;
                let l = &mut self.ledgers[page.owner.index()];
                match mode {
                    MigrateMode::Sync => {
                        l.charge(CostCategory::MigrationAlloc, costs.alloc_ns);
                        l.charge(CostCategory::MigrationUnmap, costs.unmap_ns);
                        l.charge(CostCategory::MigrationCopy, costs.copy_ns);
                        l.charge(CostCategory::MigrationRemap, costs.remap_ns);
                    }
                    MigrateMode::Demote => l.charge(CostCategory::Demotion, costs.total()),
                }
                l.promotions += 1;
                let p = &mut self.pages[id.index()];
                p.flags.insert(PageFlags::PROMOTED);
                p.flags.remove(PageFlags::HINTED);
                self.lru.on_promotion(&mut self.pages, id);
                self.record(MemEvent::Promote { page: id, owner: page.owner });
            }
            (Tier::Cxl, _) => self.finish_demotion(id),
        }
        Ok(true)
    }

    fn move_page(&mut self, id: PageId, dst: Tier) {
        let p = &mut self.pages[id.index()];
        self.tiers[p.tier.index()].used_pages -= 1;
        self.tiers[dst.index()].used_pages += 1;
        p.tier = dst;
        p.flags.remove(PageFlags::POISONED | PageFlags::ACCESSED);
    }

    fn finish_demotion(&mut self, id: PageId) {
        let p = &mut self.pages[id.index()];
        let owner = p.owner;
        let was_promoted = p.flags.contains(PageFlags::PROMOTED);
        p.flags.remove(PageFlags::PROMOTED | PageFlags::HINTED);
        let l = &mut self.ledgers[owner.index()];
        l.charge(CostCategory::Demotion, self.config.migration.total());
        l.demotions += 1;
        if was_promoted {
            l.demote_promoted += 1;
        }
        self.lru.on_cxl_arrival(&mut self.pages, id);
        self.record(MemEvent::Demote { page: id, owner, was_promoted });
    }

    /// Perform one access. If the page is poisoned, `on_hint_fault` runs
    /// first (it may migrate the page); the access then completes on
    /// whatever tier the page occupies.
    pub fn access<F>(&mut self, proc: ProcessId, index: u64, kind: AccessKind, on_hint_fault: F) -> Result<PageId, SimError>
    where
        F: FnOnce(&mut MemorySystem, PageId),
    {
        let id = self.page_of(proc, index)?;
        if self.pages[id.index()].flags.contains(PageFlags::POISONED) {
            on_hint_fault(self, id);
        }
        self.complete_access(id, kind);
        Ok(id)
    }

    fn complete_access(&mut self, id: PageId, kind: AccessKind) {
        let p = &mut self.pages[id.index()];
        let ns = self.latency_ns[p.tier.index()][matches!(kind, AccessKind::Write) as usize];
        p.flags.insert(PageFlags::ACCESSED);
        if kind == AccessKind::Write {
            p.flags.insert(PageFlags::DIRTY);
        }
        let l = &mut self.ledgers[p.owner.index()];
        l.access_ns += ns;
        l.accesses += 1;
    }

    pub(crate) fn page_mut(&mut self, id: PageId) -> &mut Page {
        &mut self.pages[id.index()]
    }

    pub(crate) fn split_lru(&mut self) -> (&mut Lru, &mut [Page]) {
        (&mut self.lru, &mut self.pages)
    }

    pub fn set_lru_mode(&mut self, mode: LruMode) {
        self.config.lru_mode = mode;
    }

    pub fn set_demotion_enabled(&mut self, enabled: bool) {
        self.config.demotion_enabled = enabled;
    }

    /// Cheap conservation checks: tier occupancy matches allocations.
    pub fn check_conservation(&self) -> Result<(), SimError> {
        let used: usize = self.tiers.iter().map(|t| t.used_pages).sum();
        let allocated: usize = self.procs.iter().map(Vec::len).sum();
        if used != allocated || allocated != self.pages.len() {
            return Err(SimError::Invariant(format!(
                "conservation: tiers hold {used} pages, processes own {allocated}, {} frames exist",
                self.pages.len()
            )));
        }
        for t in &self.tiers {
            if t.used_pages > t.config.capacity_pages {
                return Err(SimError::Invariant("tier over capacity".into()));
            }
        }
        Ok(())
    }

    /// Full scan: per-tier counts match page residency and every page sits
    /// in exactly one list or buffer of its own node.
    pub fn check_full(&self) -> Result<(), SimError> {
        self.check_conservation()?;
        for tier in Tier::ALL {
            let resident = self.pages.iter().filter(|p| p.tier == tier).count();
            if resident != self.tiers[tier.index()].used_pages {
                return Err(SimError::Invariant(format!("{tier}: {resident} resident pages, counter says {}", self.tiers[tier.index()].used_pages)));
            }
            let node = self.lru.node(tier);
            let listed = node.active_len() + node.inactive_len() + node.pagevec().len();
            if listed != resident {
                return Err(SimError::Invariant(format!("{tier}: {listed} pages on LRU, {resident} resident")));
            }
            for id in self.lru.active_pages(tier) {
                let p = &self.pages[id.index()];
                if p.tier != tier || p.lru != ListSlot::Active {
                    return Err(SimError::Invariant(format!("{id} on {tier} active list is out of sync")));
                }
            }
            for id in self.lru.inactive_pages(tier) {
                let p = &self.pages[id.index()];
                if p.tier != tier || p.lru != ListSlot::Inactive {
                    return Err(SimError::Invariant(format!("{id} on {tier} inactive list is out of sync")));
                }
            }
            for &id in node.pagevec() {
                if self.pages[id.index()].lru != ListSlot::Pagevec {
                    return Err(SimError::Invariant(format!("{id} in pagevec is out of sync")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dram: usize, cxl: usize) -> MemorySystem {
        MemorySystem::new(MemoryConfig {
            dram: TierConfig::dram(dram),
            cxl: TierConfig::cxl(cxl),
            ..MemoryConfig::default()
        })
    }

    #[test]
    fn empty_dram_takes_allocation() {
        let mut m = small(1000, 1000);
        let p = m.add_process();
        let pages = m.allocate(p, 10).unwrap();
        assert!(pages.iter().all(|&id| m.page(id).tier == Tier::Dram));
        assert_eq!(m.tier(Tier::Dram).used_pages, 10);
    }

    #[test]
    fn allocation_at_high_watermark_spills_to_cxl() {
        let mut m = small(1000, 1000);
        let p = m.add_process();
        m.allocate(p, 950).unwrap();
        assert_eq!(m.tier(Tier::Dram).used_pages, 950);
        let id = m.allocate(p, 1).unwrap()[0];
        assert_eq!(m.page(id).tier, Tier::Cxl);
        assert_eq!(m.lru().node(Tier::Cxl).inactive_len(), 1);
        assert_eq!(m.lru().node(Tier::Cxl).lru_age(), 1);
    }

    #[test]
    fn both_tiers_full_is_oom() {
        let mut m = small(100, 50);
        let p = m.add_process();
        m.allocate(p, 95 + 50).unwrap();
        assert_eq!(m.allocate(p, 1), Err(SimError::OutOfMemory { process: p, requested: 1 }));
    }

    #[test]
    fn daemon_demotes_down_to_low_watermark() {
        let mut m = small(1000, 1000);
        let p = m.add_process();
        m.allocate(p, 950).unwrap();
        assert_eq!(m.demote_daemon(), 50);
        assert_eq!(m.tier(Tier::Dram).used_pages, 900);
        assert_eq!(m.ledger(p).demotions, 50);
        assert_eq!(m.ledger(p).demotion_ns, 50 * 13_000);
        m.check_full().unwrap();
    }

    #[test]
    fn daemon_is_idle_below_promo_watermark() {
        let mut m = small(1000, 1000);
        let p = m.add_process();
        m.allocate(p, 800).unwrap();
        assert_eq!(m.demote_daemon(), 0);
    }

    #[test]
    fn demoting_a_promoted_page_counts_ping_pong() {
        let mut m = small(10, 100);
        let p = m.add_process();
        m.allocate(p, 20).unwrap();
        let cxl_page = m.process_pages(p).iter().copied().find(|&id| m.page(id).tier == Tier::Cxl).unwrap();
        m.demote_daemon();
        assert!(m.migrate_page(cxl_page, Tier::Dram, MigrateMode::Sync).unwrap());
        assert!(m.page(cxl_page).flags.contains(PageFlags::PROMOTED));
        m.migrate_page(cxl_page, Tier::Cxl, MigrateMode::Demote).unwrap();
        assert_eq!(m.ledger(p).demote_promoted, 1);
        assert!(!m.page(cxl_page).flags.contains(PageFlags::PROMOTED));
    }

    #[test]
    fn sync_promotion_costs_thirteen_microseconds() {
        let mut m = small(100, 100);
        let p = m.add_process();
        m.allocate(p, 96).unwrap();
        let id = m.process_pages(p)[95];
        assert_eq!(m.page(id).tier, Tier::Cxl);
        m.page_mut(id).flags.insert(PageFlags::POISONED | PageFlags::ACCESSED);
        let before = m.ledger(p).total();
        assert!(m.migrate_page(id, Tier::Dram, MigrateMode::Sync).unwrap());
        assert_eq!(m.ledger(p).total() - before, 13_000);
        assert_eq!(m.ledger(p).migration_ns(), 13_000);
        assert!(!m.page(id).flags.intersects(PageFlags::POISONED | PageFlags::ACCESSED));
        assert_eq!(m.page(id).lru, ListSlot::Active);
    }

    #[test]
    fn migrating_to_the_same_tier_is_rejected() {
        let mut m = small(100, 100);
        let p = m.add_process();
        let id = m.allocate(p, 1).unwrap()[0];
        assert_eq!(m.migrate_page(id, Tier::Dram, MigrateMode::Sync), Err(SimError::SameTier { page: id, tier: Tier::Dram }));
    }

    #[test]
    fn promotion_into_full_dram_fails_softly() {
        let mut m = MemorySystem::new(MemoryConfig {
            dram: TierConfig { high_watermark: 1.0, ..TierConfig::dram(10) },
            cxl: TierConfig::cxl(10),
            ..MemoryConfig::default()
        });
        let p = m.add_process();
        m.allocate(p, 11).unwrap();
        let id = m.process_pages(p)[10];
        assert_eq!(m.migrate_page(id, Tier::Dram, MigrateMode::Sync), Ok(false));
        assert_eq!(m.ledger(p).failed_migrations, 1);
    }

    #[test]
    fn access_charges_tier_latency() {
        let mut m = small(100, 100);
        let p = m.add_process();
        m.allocate(p, 96).unwrap();
        m.access(p, 0, AccessKind::Read, |_, _| panic!("not poisoned")).unwrap();
        assert_eq!(m.ledger(p).access_ns, 103);
        m.access(p, 95, AccessKind::Write, |_, _| {}).unwrap();
        assert_eq!(m.ledger(p).access_ns, 103 + 237);
        let id = m.process_pages(p)[95];
        assert!(m.page(id).flags.contains(PageFlags::ACCESSED | PageFlags::DIRTY));
    }

    #[test]
    fn poisoned_access_faults_before_completing() {
        let mut m = small(100, 100);
        let p = m.add_process();
        m.allocate(p, 1).unwrap();
        let id = m.process_pages(p)[0];
        m.page_mut(id).flags.insert(PageFlags::POISONED);
        let mut faulted = false;
        m.access(p, 0, AccessKind::Read, |mem, pid| {
            assert_eq!(mem.ledger(p).accesses, 0);
            mem.page_mut(pid).flags.remove(PageFlags::POISONED);
            faulted = true;
        })
        .unwrap();
        assert!(faulted);
        assert_eq!(m.ledger(p).accesses, 1);
    }

    #[test]
    fn unallocated_access_is_an_error() {
        let mut m = small(100, 100);
        let p = m.add_process();
        assert_eq!(m.access(p, 3, AccessKind::Read, |_, _| {}), Err(SimError::UnallocatedAccess { process: p, index: 3 }));
    }
}
