use proptest::prelude::*;

use tiersim::lru::{ListSlot, PAGEVEC_CAPACITY};
use tiersim::memory::{MemEvent, Page, PageFlags};
use tiersim::sim::NS_PER_SEC;
use tiersim::workload::{TenantSpec, WorkloadKind, WorkloadSpec};
use tiersim::{Lru, PageId, Policy, ProcessId, ScenarioConfig, Simulation, Tier, TierConfig};

#[derive(Debug, Clone, Copy)]
enum Op {
    Hint(u32),
    Promote(u32),
    Demote(u32),
}

fn op(n: u32) -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..n).prop_map(Op::Hint),
        1 => (0..n).prop_map(Op::Promote),
        1 => (0..n).prop_map(Op::Demote),
    ]
}

fn setup(n: usize) -> (Lru, Vec<Page>) {
    let mut lru = Lru::new();
    lru.reserve_pages(n);
    let mut pages: Vec<Page> = (0..n).map(|i| Page::new(ProcessId(0), i as u32, Tier::Cxl)).collect();
    for i in 0..n {
        lru.on_cxl_arrival(&mut pages, PageId(i as u32));
    }
    (lru, pages)
}

proptest! {
    // every arrival, CXL hint and promotion ages the node exactly once
    #[test]
    fn cxl_age_counts_every_event(n in 1usize..40, ops in prop::collection::vec(op(40), 0..200)) {
        let (mut lru, mut pages) = setup(n);
        let mut events = n as u64;
        for o in ops {
            match o {
                Op::Hint(i) if (i as usize) < n && pages[i as usize].tier == Tier::Cxl => {
                    lru.mark_accessed_modified(&mut pages, PageId(i));
                    events += 1;
                }
                Op::Promote(i) if (i as usize) < n && pages[i as usize].tier == Tier::Cxl => {
                    let id = PageId(i);
                    lru.detach(&mut pages, id);
                    pages[id.index()].tier = Tier::Dram;
                    lru.on_promotion(&mut pages, id);
                    events += 1;
                }
                Op::Demote(i) if (i as usize) < n && pages[i as usize].tier == Tier::Dram => {
                    let id = PageId(i);
                    lru.detach(&mut pages, id);
                    pages[id.index()].tier = Tier::Cxl;
                    lru.on_cxl_arrival(&mut pages, id);
                    events += 1;
                }
                _ => {}
            }
            let node = lru.node(Tier::Cxl);
            let s = &node.stats;
            prop_assert_eq!(node.lru_age(), events);
            prop_assert_eq!(s.age_arrivals + s.age_hints + s.age_promotions, events);
            prop_assert_eq!(node.refault_entries(), pages.iter().filter(|p| p.tier == Tier::Cxl).count());
        }
    }

    // baseline marking: a page reaches the active list only with a full pagevec
    #[test]
    fn baseline_pagevec_replay(n in 1usize..60, marks in prop::collection::vec(0u32..60, 0..300)) {
        let (mut lru, mut pages) = setup(n);
        let mut buffered: Vec<u32> = Vec::new();
        let mut active: Vec<u32> = Vec::new();
        for m in marks {
            if m as usize >= n {
                continue;
            }
            lru.mark_accessed_baseline(&mut pages, PageId(m));
            if !active.contains(&m) && !buffered.contains(&m) {
                buffered.push(m);
                if buffered.len() == PAGEVEC_CAPACITY {
                    active.append(&mut buffered);
                }
            }
            let node = lru.node(Tier::Cxl);
            prop_assert_eq!(node.pagevec().len(), buffered.len());
            prop_assert_eq!(node.active_len(), active.len());
            for (i, p) in pages.iter().enumerate() {
                let i = i as u32;
                let want = if active.contains(&i) {
                    ListSlot::Active
                } else if buffered.contains(&i) {
                    ListSlot::Pagevec
                } else {
                    ListSlot::Inactive
                };
                prop_assert_eq!(p.lru, want);
            }
        }
    }

    // each victim is distinct and leaves its list
    #[test]
    fn victims_leave_the_lists(n in 1usize..50, touch in prop::collection::vec(0u32..50, 0..100), takes in 1usize..50) {
        let mut lru = Lru::new();
        lru.reserve_pages(n);
        let mut pages: Vec<Page> = (0..n).map(|i| Page::new(ProcessId(0), i as u32, Tier::Dram)).collect();
        for i in 0..n {
            lru.push_inactive(&mut pages, Tier::Dram, PageId(i as u32));
        }
        for t in touch {
            if (t as usize) < n {
                pages[t as usize].flags.insert(PageFlags::ACCESSED);
            }
        }
        let mut taken = std::collections::HashSet::new();
        for _ in 0..takes.min(n) {
            let v = lru.take_victim(&mut pages, Tier::Dram, 4).expect("pages remain");
            prop_assert!(taken.insert(v));
            prop_assert_eq!(pages[v.index()].lru, ListSlot::Detached);
            let node = lru.node(Tier::Dram);
            prop_assert_eq!(node.active_len() + node.inactive_len(), n - taken.len());
        }
    }
}

fn scenario(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig { seed, policy: Policy::TppMod, duration_ns: 12 * NS_PER_SEC, ..ScenarioConfig::default() };
    cfg.memory.dram = TierConfig::dram(300);
    cfg.memory.cxl = TierConfig::cxl(10_000);
    for (i, kind) in [WorkloadKind::UniformRandom, WorkloadKind::ZipfHotset].into_iter().enumerate() {
        cfg.tenants.push(TenantSpec {
            label: format!("t{i}"),
            workload: WorkloadSpec { kind, rss_pages: 600, ops_rate: 40_000.0, hot_fraction: 0.2, ..WorkloadSpec::default() },
            start_offset_ns: i as u64 * NS_PER_SEC,
        });
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    // the ping-pong counter equals the number of demotions of pages promoted
    // since they last left DRAM, replayed from the placement log
    #[test]
    fn ping_pong_counter_matches_log(seed in 0u64..1000) {
        let cfg = scenario(seed);
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        sim.enable_memory_log();
        sim.run_until(cfg.duration_ns).unwrap();
        let mem = sim.memory();
        let mut promoted = std::collections::HashSet::new();
        let mut per_proc = vec![(0u64, 0u64, 0u64); mem.process_count()];
        for ev in mem.log() {
            match *ev {
                MemEvent::Allocate { .. } => {}
                MemEvent::Promote { page, owner } => {
                    promoted.insert(page);
                    per_proc[owner.index()].0 += 1;
                }
                MemEvent::Demote { page, owner, was_promoted } => {
                    let replayed = promoted.remove(&page);
                    prop_assert_eq!(replayed, was_promoted);
                    per_proc[owner.index()].1 += 1;
                    per_proc[owner.index()].2 += u64::from(replayed);
                }
            }
        }
        for (i, (p, d, dp)) in per_proc.into_iter().enumerate() {
            let l = mem.ledger(ProcessId(i as u32));
            prop_assert_eq!(l.promotions, p);
            prop_assert_eq!(l.demotions, d);
            prop_assert_eq!(l.demote_promoted, dp);
        }
        for &id in &promoted {
            prop_assert!(mem.page(id).flags.contains(PageFlags::PROMOTED));
        }
    }
}
