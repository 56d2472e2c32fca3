//! Per-node active/inactive LRU lists.
//!
//! Two marking modes are supported. `Baseline` reproduces the stock
//! `mark_page_accessed` path, where a hint-faulted inactive page waits in a
//! 15-entry pagevec and only reaches the active list when the pagevec is
//! flushed. `Modified` sets `PAGE_HINTED` on the spot, which makes the page a
//! promotion candidate without moving it.
//!
//! The CXL node also keeps an LRU age, bumped on (1) arrival on the node,
//! (2) a hint fault that sets or re-confirms `PAGE_HINTED`, and (3) promotion
//! off the node. The age drives the refault-distance promotion decision.
//!
//! Lists are intrusive doubly linked lists threaded through a shared link
//! table indexed by page id, so every move is O(1).

use crate::memory::{Page, PageFlags, PageId, Tier};

/// Pages a pagevec holds before it is drained to the active list.
pub const PAGEVEC_CAPACITY: usize = 15;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LruMode {
    Baseline,
    #[default]
    Modified,
}

/// Where a page currently sits within its node's LRU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ListSlot {
    #[default]
    Detached,
    Active,
    Inactive,
    Pagevec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefaultEntry {
    pub recorded_age: u64,
    pub first_distance: Option<u64>,
    pub second_distance: Option<u64>,
}

impl RefaultEntry {
    fn fresh(age: u64) -> Self {
        Self { recorded_age: age, first_distance: None, second_distance: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefaultDecision {
    Promote,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkOutcome {
    /// Page parked in the pagevec, still not on the active list.
    Buffered,
    /// The pagevec filled up and this many pages moved to the active list.
    Flushed(usize),
    /// Page was already active; caller should take the promotion path.
    AlreadyActive,
    /// `PAGE_HINTED` set (modified mode).
    Hinted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LruStats {
    pub pagevec_flushes: u64,
    pub refault_promotes: u64,
    pub refault_holds: u64,
    /// Aging events by cause: arrival, hint, promotion.
    pub age_arrivals: u64,
    pub age_hints: u64,
    pub age_promotions: u64,
}

#[derive(Debug, Clone, Copy)]
struct ListHead {
    head: u32,
    tail: u32,
    len: usize,
}

impl ListHead {
    const EMPTY: ListHead = ListHead { head: NIL, tail: NIL, len: 0 };
}

#[derive(Debug, Default, Clone)]
struct Links {
    prev: Vec<u32>,
    next: Vec<u32>,
}

impl Links {
    fn push_front(&mut self, list: &mut ListHead, id: u32) {
        let i = id as usize;
        self.prev[i] = NIL;
        self.next[i] = list.head;
        if list.head != NIL {
            self.prev[list.head as usize] = id;
        } else {
            list.tail = id;
        }
        list.head = id;
        list.len += 1;
    }

    fn unlink(&mut self, list: &mut ListHead, id: u32) {
        let i = id as usize;
        let (p, n) = (self.prev[i], self.next[i]);
        if p != NIL {
            self.next[p as usize] = n;
        } else {
            list.head = n;
        }
        if n != NIL {
            self.prev[n as usize] = p;
        } else {
            list.tail = p;
        }
        self.prev[i] = NIL;
        self.next[i] = NIL;
        list.len -= 1;
    }

    fn iter<'a>(&'a self, list: &ListHead) -> impl Iterator<Item = PageId> + 'a {
        let mut cur = list.head;
        std::iter::from_fn(move || {
            if cur == NIL {
                return None;
            }
            let id = cur;
            cur = self.next[id as usize];
            Some(PageId(id))
        })
    }
}

#[derive(Debug, Clone)]
pub struct LruNodeState {
    active: ListHead,
    inactive: ListHead,
    pagevec: Vec<PageId>,
    lru_age: u64,
    refault: Vec<Option<RefaultEntry>>,
    refault_len: usize,
    pub stats: LruStats,
}

impl Default for LruNodeState {
    fn default() -> Self {
        Self {
            active: ListHead::EMPTY,
            inactive: ListHead::EMPTY,
            pagevec: Vec::with_capacity(PAGEVEC_CAPACITY),
            lru_age: 0,
            refault: Vec::new(),
            refault_len: 0,
            stats: LruStats::default(),
        }
    }
}

impl LruNodeState {
    pub fn lru_age(&self) -> u64 {
        self.lru_age
    }

    pub fn active_len(&self) -> usize {
        self.active.len
    }

    pub fn inactive_len(&self) -> usize {
        self.inactive.len
    }

    pub fn pagevec(&self) -> &[PageId] {
        &self.pagevec
    }

    pub fn refault_entry(&self, id: PageId) -> Option<&RefaultEntry> {
        self.refault.get(id.index()).and_then(Option::as_ref)
    }

    pub fn refault_entries(&self) -> usize {
        self.refault_len
    }

    fn set_entry(&mut self, id: PageId, entry: RefaultEntry) {
        let i = id.index();
        if i >= self.refault.len() {
            self.refault.resize(i + 1, None);
        }
        if self.refault[i].replace(entry).is_none() {
            self.refault_len += 1;
        }
    }

    fn take_entry(&mut self, id: PageId) -> Option<RefaultEntry> {
        let e = self.refault.get_mut(id.index()).and_then(Option::take);
        if e.is_some() {
            self.refault_len -= 1;
        }
        e
    }
}

/// LRU state for both nodes plus the shared link table.
#[derive(Debug, Clone, Default)]
pub struct Lru {
    links: Links,
    nodes: [LruNodeState; 2],
}

impl Lru {
    pub fn new() -> Self {
        Self::default()
    }

    /// Grow the link table to cover page ids `0..n`.
    pub fn reserve_pages(&mut self, n: usize) {
        if self.links.prev.len() < n {
            self.links.prev.resize(n, NIL);
            self.links.next.resize(n, NIL);
        }
    }

    pub fn node(&self, tier: Tier) -> &LruNodeState {
        &self.nodes[tier.index()]
    }

    pub fn active_pages(&self, tier: Tier) -> Vec<PageId> {
        self.links.iter(&self.nodes[tier.index()].active).collect()
    }

    pub fn inactive_pages(&self, tier: Tier) -> Vec<PageId> {
        self.links.iter(&self.nodes[tier.index()].inactive).collect()
    }

    pub fn push_active(&mut self, pages: &mut [Page], tier: Tier, id: PageId) {
        debug_assert_eq!(pages[id.index()].lru, ListSlot::Detached);
        let node = &mut self.nodes[tier.index()];
        self.links.push_front(&mut node.active, id.0);
        pages[id.index()].lru = ListSlot::Active;
    }

    pub fn push_inactive(&mut self, pages: &mut [Page], tier: Tier, id: PageId) {
        debug_assert_eq!(pages[id.index()].lru, ListSlot::Detached);
        let node = &mut self.nodes[tier.index()];
        self.links.push_front(&mut node.inactive, id.0);
        pages[id.index()].lru = ListSlot::Inactive;
    }

    /// Remove a page from whichever list or buffer holds it on its node.
    pub fn detach(&mut self, pages: &mut [Page], id: PageId) {
        let page = &mut pages[id.index()];
        let node = &mut self.nodes[page.tier.index()];
        match page.lru {
            ListSlot::Detached => {}
            ListSlot::Active => self.links.unlink(&mut node.active, id.0),
            ListSlot::Inactive => self.links.unlink(&mut node.inactive, id.0),
            ListSlot::Pagevec => {
                let pos = node.pagevec.iter().position(|&p| p == id).expect("pagevec slot out of sync");
                node.pagevec.remove(pos);
            }
        }
        page.lru = ListSlot::Detached;
    }

    /// A page just landed on the CXL node by allocation or demotion.
    pub fn on_cxl_arrival(&mut self, pages: &mut [Page], id: PageId) {
        self.push_inactive(pages, Tier::Cxl, id);
        let node = &mut self.nodes[Tier::Cxl.index()];
        node.lru_age += 1;
        node.stats.age_arrivals += 1;
        let age = node.lru_age;
        node.set_entry(id, RefaultEntry::fresh(age));
    }

    /// Stock `mark_page_accessed`: park the page in the pagevec and drain the
    /// pagevec to the active list once it is full.
    pub fn mark_accessed_baseline(&mut self, pages: &mut [Page], id: PageId) -> MarkOutcome {
        let tier = pages[id.index()].tier;
        match pages[id.index()].lru {
            ListSlot::Active => return MarkOutcome::AlreadyActive,
            ListSlot::Pagevec => return MarkOutcome::Buffered,
            ListSlot::Detached | ListSlot::Inactive => {}
        }
        self.detach(pages, id);
        let node = &mut self.nodes[tier.index()];
        node.pagevec.push(id);
        pages[id.index()].lru = ListSlot::Pagevec;
        if node.pagevec.len() < PAGEVEC_CAPACITY {
            return MarkOutcome::Buffered;
        }
        let drained = std::mem::take(&mut node.pagevec);
        node.stats.pagevec_flushes += 1;
        let n = drained.len();
        for p in drained {
            pages[p.index()].lru = ListSlot::Detached;
            self.push_active(pages, tier, p);
        }
        self.nodes[tier.index()].pagevec = Vec::with_capacity(PAGEVEC_CAPACITY);
        MarkOutcome::Flushed(n)
    }

    /// Modified second chance: record the hint fault with `PAGE_HINTED` and
    /// leave the page where it is. On the CXL node this ages the LRU.
    pub fn mark_accessed_modified(&mut self, pages: &mut [Page], id: PageId) -> MarkOutcome {
        let page = &mut pages[id.index()];
        page.flags.insert(PageFlags::HINTED);
        if page.tier == Tier::Cxl {
            let node = &mut self.nodes[Tier::Cxl.index()];
            node.lru_age += 1;
            node.stats.age_hints += 1;
        }
        MarkOutcome::Hinted
    }

    /// Refault-distance check for a hint fault on a CXL page. Call after the
    /// fault has been recorded with [`Lru::mark_accessed_modified`].
    pub fn update_refault_distance(&mut self, pages: &mut [Page], id: PageId) -> RefaultDecision {
        debug_assert_eq!(pages[id.index()].tier, Tier::Cxl);
        let node = &mut self.nodes[Tier::Cxl.index()];
        let age = node.lru_age;
        let Some(mut entry) = node.refault_entry(id).copied() else {
            node.lru_age += 1;
            node.stats.age_arrivals += 1;
            let age = node.lru_age;
            node.set_entry(id, RefaultEntry::fresh(age));
            node.stats.refault_holds += 1;
            return RefaultDecision::Hold;
        };
        let d = age - entry.recorded_age;
        entry.recorded_age = age;
        let decision = match entry.first_distance {
            None => {
                entry.first_distance = Some(d);
                RefaultDecision::Hold
            }
            Some(first) => {
                entry.second_distance = Some(d);
                if d < first {
                    RefaultDecision::Promote
                } else {
                    RefaultDecision::Hold
                }
            }
        };
        if decision == RefaultDecision::Hold && entry.second_distance.is_some() {
            entry.first_distance = entry.second_distance.take();
        }
        match decision {
            RefaultDecision::Promote => node.stats.refault_promotes += 1,
            RefaultDecision::Hold => node.stats.refault_holds += 1,
        }
        node.set_entry(id, entry);
        decision
    }

    /// Bookkeeping for a page leaving the CXL node by promotion. The caller
    /// has already moved the page to the DRAM tier.
    pub fn on_promotion(&mut self, pages: &mut [Page], id: PageId) {
        debug_assert_eq!(pages[id.index()].lru, ListSlot::Detached);
        let node = &mut self.nodes[Tier::Cxl.index()];
        node.lru_age += 1;
        node.stats.age_promotions += 1;
        node.take_entry(id);
        self.push_active(pages, Tier::Dram, id);
    }

    /// Drop the refault entry of a page that left the CXL node.
    pub fn forget_refault(&mut self, id: PageId) {
        self.nodes[Tier::Cxl.index()].take_entry(id);
    }

    /// Move the active-list tail to the inactive head. Clears `PAGE_HINTED`
    /// and tests-and-clears the access bit, like `shrink_active_list` does
    /// for anonymous pages.
    pub fn deactivate_tail(&mut self, pages: &mut [Page], tier: Tier) -> Option<PageId> {
        let node = &mut self.nodes[tier.index()];
        if node.active.tail == NIL {
            return None;
        }
        let id = PageId(node.active.tail);
        self.links.unlink(&mut node.active, id.0);
        self.links.push_front(&mut node.inactive, id.0);
        let page = &mut pages[id.index()];
        page.lru = ListSlot::Inactive;
        page.flags.remove(PageFlags::HINTED | PageFlags::ACCESSED);
        Some(id)
    }

    /// Move an inactive page to the active head (second chance).
    pub fn activate(&mut self, pages: &mut [Page], id: PageId) {
        let tier = pages[id.index()].tier;
        if pages[id.index()].lru == ListSlot::Active {
            return;
        }
        self.detach(pages, id);
        self.push_active(pages, tier, id);
    }

    /// kswapd-style victim selection on `tier`: keep the inactive list at
    /// least `1/inactive_divisor` of the node's LRU by deactivating from the
    /// active tail, then scan the inactive tail, rotating referenced pages to
    /// the active list (clearing their access bit) until an unreferenced page
    /// is found. The victim is detached and returned.
    pub fn take_victim(&mut self, pages: &mut [Page], tier: Tier, inactive_divisor: usize) -> Option<PageId> {
        loop {
            let node = &self.nodes[tier.index()];
            let total = node.active.len + node.inactive.len;
            if total == 0 {
                return None;
            }
            let target = (total / inactive_divisor.max(1)).max(1);
            if node.inactive.len < target || node.inactive.len == 0 {
                self.deactivate_tail(pages, tier);
                continue;
            }
            let id = PageId(node.inactive.tail);
            let page = &mut pages[id.index()];
            if page.flags.contains(PageFlags::ACCESSED) {
                page.flags.remove(PageFlags::ACCESSED);
                let node = &mut self.nodes[tier.index()];
                self.links.unlink(&mut node.inactive, id.0);
                self.links.push_front(&mut node.active, id.0);
                pages[id.index()].lru = ListSlot::Active;
                continue;
            }
            self.detach(pages, id);
            return Some(id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::ProcessId;

    fn cxl_pages(n: usize) -> (Lru, Vec<Page>) {
        let mut lru = Lru::new();
        lru.reserve_pages(n);
        let mut pages: Vec<Page> = (0..n).map(|i| Page::new(ProcessId(0), i as u32, Tier::Cxl)).collect();
        for i in 0..n {
            lru.on_cxl_arrival(&mut pages, PageId(i as u32));
        }
        (lru, pages)
    }

    #[test]
    fn arrival_ages_then_records() {
        let (lru, _) = cxl_pages(1);
        assert_eq!(lru.node(Tier::Cxl).lru_age(), 1);
        assert_eq!(lru.node(Tier::Cxl).refault_entry(PageId(0)).unwrap().recorded_age, 1);
    }

    #[test]
    fn consecutive_arrivals_differ_by_one() {
        let (lru, _) = cxl_pages(2);
        let n = lru.node(Tier::Cxl);
        assert_eq!(n.refault_entry(PageId(1)).unwrap().recorded_age - n.refault_entry(PageId(0)).unwrap().recorded_age, 1);
    }

    #[test]
    fn rearrival_overwrites_stale_entry() {
        let (mut lru, mut pages) = cxl_pages(1);
        let id = PageId(0);
        lru.mark_accessed_modified(&mut pages, id);
        lru.update_refault_distance(&mut pages, id);
        assert!(lru.node(Tier::Cxl).refault_entry(id).unwrap().first_distance.is_some());
        lru.detach(&mut pages, id);
        lru.on_cxl_arrival(&mut pages, id);
        let e = lru.node(Tier::Cxl).refault_entry(id).unwrap();
        assert_eq!(e.first_distance, None);
        assert_eq!(e.recorded_age, lru.node(Tier::Cxl).lru_age());
        assert_eq!(lru.node(Tier::Cxl).refault_entries(), 1);
    }

    #[test]
    fn pagevec_holds_fourteen_and_flushes_on_fifteenth() {
        let (mut lru, mut pages) = cxl_pages(20);
        for i in 0..14 {
            assert_eq!(lru.mark_accessed_baseline(&mut pages, PageId(i)), MarkOutcome::Buffered);
        }
        assert_eq!(lru.node(Tier::Cxl).active_len(), 0);
        assert_eq!(lru.node(Tier::Cxl).pagevec().len(), 14);
        assert_eq!(lru.mark_accessed_baseline(&mut pages, PageId(14)), MarkOutcome::Flushed(15));
        assert_eq!(lru.node(Tier::Cxl).active_len(), 15);
        assert!(lru.node(Tier::Cxl).pagevec().is_empty());
        // buffer order: the last marked page ends up at the head
        assert_eq!(lru.active_pages(Tier::Cxl)[0], PageId(14));
        assert_eq!(lru.mark_accessed_baseline(&mut pages, PageId(3)), MarkOutcome::AlreadyActive);
    }

    #[test]
    fn remarking_a_buffered_page_is_a_noop() {
        let (mut lru, mut pages) = cxl_pages(3);
        lru.mark_accessed_baseline(&mut pages, PageId(0));
        assert_eq!(lru.mark_accessed_baseline(&mut pages, PageId(0)), MarkOutcome::Buffered);
        assert_eq!(lru.node(Tier::Cxl).pagevec().len(), 1);
    }

    #[test]
    fn modified_mark_sets_hinted_without_moving() {
        let (mut lru, mut pages) = cxl_pages(2);
        let age = lru.node(Tier::Cxl).lru_age();
        lru.mark_accessed_modified(&mut pages, PageId(1));
        assert!(pages[1].flags.contains(PageFlags::HINTED));
        assert_eq!(pages[1].lru, ListSlot::Inactive);
        assert_eq!(lru.node(Tier::Cxl).lru_age(), age + 1);
    }

    fn fault(lru: &mut Lru, pages: &mut [Page], id: PageId) -> RefaultDecision {
        lru.mark_accessed_modified(pages, id);
        lru.update_refault_distance(pages, id)
    }

    /// Burn `n` aging events on other pages via arrivals of fresh pages.
    fn age_by(lru: &mut Lru, pages: &mut Vec<Page>, n: usize) {
        for _ in 0..n {
            let id = PageId(pages.len() as u32);
            pages.push(Page::new(ProcessId(0), id.0, Tier::Cxl));
            lru.reserve_pages(pages.len());
            lru.on_cxl_arrival(pages, id);
        }
    }

    #[test]
    fn shrinking_distance_promotes() {
        let (mut lru, mut pages) = cxl_pages(1);
        let id = PageId(0);
        age_by(&mut lru, &mut pages, 9);
        assert_eq!(fault(&mut lru, &mut pages, id), RefaultDecision::Hold);
        assert_eq!(lru.node(Tier::Cxl).refault_entry(id).unwrap().first_distance, Some(10));
        age_by(&mut lru, &mut pages, 4);
        assert_eq!(fault(&mut lru, &mut pages, id), RefaultDecision::Promote);
        assert_eq!(lru.node(Tier::Cxl).refault_entry(id).unwrap().second_distance, Some(5));
    }

    #[test]
    fn growing_distance_holds_and_shifts() {
        let (mut lru, mut pages) = cxl_pages(1);
        let id = PageId(0);
        age_by(&mut lru, &mut pages, 4);
        assert_eq!(fault(&mut lru, &mut pages, id), RefaultDecision::Hold);
        age_by(&mut lru, &mut pages, 9);
        assert_eq!(fault(&mut lru, &mut pages, id), RefaultDecision::Hold);
        let e = lru.node(Tier::Cxl).refault_entry(id).unwrap();
        assert_eq!(e.first_distance, Some(10));
        assert_eq!(e.second_distance, None);
        assert_eq!(e.recorded_age, lru.node(Tier::Cxl).lru_age());
    }

    #[test]
    fn equal_distances_hold() {
        let (mut lru, mut pages) = cxl_pages(1);
        let id = PageId(0);
        age_by(&mut lru, &mut pages, 6);
        fault(&mut lru, &mut pages, id);
        age_by(&mut lru, &mut pages, 6);
        assert_eq!(fault(&mut lru, &mut pages, id), RefaultDecision::Hold);
    }

    #[test]
    fn missing_entry_is_recreated_and_held() {
        let (mut lru, mut pages) = cxl_pages(1);
        lru.forget_refault(PageId(0));
        assert_eq!(lru.update_refault_distance(&mut pages, PageId(0)), RefaultDecision::Hold);
        assert!(lru.node(Tier::Cxl).refault_entry(PageId(0)).is_some());
    }

    #[test]
    fn promotion_ages_and_drops_entry() {
        let (mut lru, mut pages) = cxl_pages(2);
        let age = lru.node(Tier::Cxl).lru_age();
        for id in [PageId(0), PageId(1)] {
            lru.detach(&mut pages, id);
            pages[id.index()].tier = Tier::Dram;
            lru.on_promotion(&mut pages, id);
        }
        assert_eq!(lru.node(Tier::Cxl).lru_age(), age + 2);
        assert_eq!(lru.node(Tier::Cxl).refault_entries(), 0);
        assert_eq!(lru.node(Tier::Dram).active_len(), 2);
        // no entry: removal is a no-op
        lru.forget_refault(PageId(0));
    }

    #[test]
    fn deactivation_clears_hinted() {
        let mut lru = Lru::new();
        lru.reserve_pages(1);
        let mut pages = vec![Page::new(ProcessId(0), 0, Tier::Dram)];
        lru.push_active(&mut pages, Tier::Dram, PageId(0));
        pages[0].flags.insert(PageFlags::HINTED | PageFlags::ACCESSED);
        assert_eq!(lru.deactivate_tail(&mut pages, Tier::Dram), Some(PageId(0)));
        assert_eq!(pages[0].lru, ListSlot::Inactive);
        assert!(!pages[0].flags.intersects(PageFlags::HINTED | PageFlags::ACCESSED));
    }

    #[test]
    fn victim_scan_gives_referenced_pages_a_second_chance() {
        let mut lru = Lru::new();
        lru.reserve_pages(4);
        let mut pages: Vec<Page> = (0..4).map(|i| Page::new(ProcessId(0), i, Tier::Dram)).collect();
        for i in 0..4 {
            lru.push_inactive(&mut pages, Tier::Dram, PageId(i));
        }
        // tail is page 0; mark it referenced
        pages[0].flags.insert(PageFlags::ACCESSED);
        let v = lru.take_victim(&mut pages, Tier::Dram, 2).unwrap();
        assert_eq!(v, PageId(1));
        assert_eq!(pages[0].lru, ListSlot::Active);
        assert!(!pages[0].flags.contains(PageFlags::ACCESSED));
    }
}
