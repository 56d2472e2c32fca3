//! The run loop. Timer events (tenant start, poisoning, stop evaluation and
//! restart scans) are dispatched from the event queue; tenant accesses are
//! replayed in time order between them.

use std::fmt;

use crate::config::{Policy, ScenarioConfig};
use crate::control::{DeltaTracker, RestartAction, RestartState, SlopeState, StopAction, ToggleState};
use crate::error::SimError;
use crate::memory::{MemorySystem, ProcessId, Tier};
use crate::profiler::{on_hint_fault, stride_scan, FaultPolicy, HintAction, PoisonScheduler};
use crate::report::{IntervalRow, ProcessReport, RunReport, ToggleEvent};
use crate::sim::{EventQueue, Nanos};
use crate::workload::{compose_tenants, AccessSource, TimedAccess};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    TenantStart(usize),
    PoisonTick,
    Eval,
    RestartScan,
}

/// Adaptive-control state of one tenant.
#[derive(Debug, Clone)]
pub struct ProcessState {
    pub id: ProcessId,
    pub label: String,
    pub started: bool,
    pub start_ns: Nanos,
    pub toggle: ToggleState,
    pub restart: RestartState,
    pub delta: DeltaTracker,
    pub last_scan: Option<usize>,
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug)]
pub struct RunError {
    pub error: SimError,
    pub partial: Box<RunReport>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "simulation aborted at {} ns: {}", self.partial.end_ns, self.error)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    mem: MemorySystem,
    queue: EventQueue<Event>,
    poison: PoisonScheduler,
    procs: Vec<ProcessState>,
    sources: Vec<Box<dyn AccessSource>>,
    pending: Vec<Option<TimedAccess>>,
    fault_policy: FaultPolicy,
    rows: Vec<IntervalRow>,
    toggles: Vec<ToggleEvent>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let sources = compose_tenants(&cfg.tenants, cfg.seed)?;
        let mut mem = MemorySystem::new(cfg.effective_memory());
        let mut queue = EventQueue::new();
        let mut procs = Vec::with_capacity(cfg.tenants.len());
        for (i, t) in cfg.tenants.iter().enumerate() {
            let id = mem.add_process();
            procs.push(ProcessState {
                id,
                label: t.label.clone(),
                started: false,
                start_ns: t.start_offset_ns,
                toggle: ToggleState::new(),
                restart: RestartState::new(cfg.adaptive.window_capacity),
                delta: DeltaTracker::new(),
                last_scan: None,
            });
            queue.schedule(Event::TenantStart(i), t.start_offset_ns)?;
        }
        if cfg.policy.migrates() {
            queue.schedule(Event::PoisonTick, cfg.profiler.poison_period_ns)?;
        }
        queue.schedule(Event::Eval, cfg.adaptive.eval_period_ns)?;
        if cfg.policy == Policy::Adaptive {
            queue.schedule(Event::RestartScan, cfg.adaptive.restart_period_ns)?;
        }
        let pending = vec![None; sources.len()];
        Ok(Self {
            fault_policy: cfg.policy.fault_policy(&cfg.adaptive),
            cfg,
            mem,
            queue,
            poison: PoisonScheduler::new(),
            procs,
            sources,
            pending,
            rows: Vec::new(),
            toggles: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &MemorySystem {
        &self.mem
    }

    pub fn processes(&self) -> &[ProcessState] {
        &self.procs
    }

    pub fn now(&self) -> Nanos {
        self.queue.now()
    }

    /// Enable the placement event log on the memory system.
    pub fn enable_memory_log(&mut self) {
        self.mem.enable_log();
    }

    /// Run to the configured duration.
    pub fn run(mut self) -> Result<RunReport, RunError> {
        let end = self.cfg.duration_ns;
        match self.run_until(end) {
            Ok(()) => Ok(self.into_report()),
            Err(error) => Err(RunError { error, partial: Box::new(self.into_report()) }),
        }
    }

    /// Advance the simulation: dispatch events at times `<= t` and accesses
    /// at times `< t`.
    pub fn run_until(&mut self, t: Nanos) -> Result<(), SimError> {
        loop {
            let next = self.queue.peek_time().filter(|&e| e <= t);
            self.drain_accesses(next.unwrap_or(t))?;
            let Some(_) = next else {
                return Ok(());
            };
            let (at, ev) = self.queue.pop().expect("peeked event");
            self.dispatch(at, ev)?;
        }
    }

    fn drain_accesses(&mut self, bound: Nanos) -> Result<(), SimError> {
        loop {
            let mut pick: Option<(usize, Nanos)> = None;
            for (i, p) in self.pending.iter().enumerate() {
                if let Some(a) = p {
                    if a.t < bound && pick.is_none_or(|(_, t)| a.t < t) {
                        pick = Some((i, a.t));
                    }
                }
            }
            let Some((i, t)) = pick else {
                return Ok(());
            };
            let a = self.pending[i].take().expect("picked access");
            self.queue.advance_to(t);
            self.pending[i] = self.sources[i].next_access();
            self.access(i, a)?;
        }
    }

    fn access(&mut self, i: usize, a: TimedAccess) -> Result<(), SimError> {
        let pid = self.procs[i].id;
        let migration_on = self.cfg.policy.migrates() && self.procs[i].toggle.migration_on;
        let policy = self.fault_policy;
        self.mem.access(pid, a.index as u64, a.kind, |mem, id| {
            if on_hint_fault(mem, pid, id, migration_on, policy) == HintAction::PromoteSync {
                mem.demote_daemon();
            }
        })?;
        Ok(())
    }

    fn dispatch(&mut self, at: Nanos, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::TenantStart(i) => self.start_tenant(i)?,
            Event::PoisonTick => {
                for p in self.procs.iter().filter(|p| p.started) {
                    self.poison.poison_tick(&mut self.mem, &self.cfg.profiler, p.id, p.toggle.migration_on);
                }
                self.queue.schedule(Event::PoisonTick, at + self.cfg.profiler.poison_period_ns)?;
            }
            Event::Eval => {
                self.evaluate(at)?;
                self.queue.schedule(Event::Eval, at + self.cfg.adaptive.eval_period_ns)?;
            }
            Event::RestartScan => {
                self.restart_scan(at);
                self.queue.schedule(Event::RestartScan, at + self.cfg.adaptive.restart_period_ns)?;
            }
        }
        Ok(())
    }

    fn start_tenant(&mut self, i: usize) -> Result<(), SimError> {
        let pid = self.procs[i].id;
        let rss = self.sources[i].rss_pages();
        self.mem.allocate(pid, rss)?;
        self.mem.demote_daemon();
        let p = &mut self.procs[i];
        p.started = true;
        p.delta.prime(self.mem.ledger(pid).demote_promoted);
        self.pending[i] = self.sources[i].next_access();
        Ok(())
    }

    fn evaluate(&mut self, at: Nanos) -> Result<(), SimError> {
        let adaptive = self.cfg.policy == Policy::Adaptive;
        let (k, m) = (self.cfg.adaptive.stop_streak, self.cfg.adaptive.varying_min);
        for i in 0..self.procs.len() {
            if !self.procs[i].started {
                continue;
            }
            let pid = self.procs[i].id;
            let counter = self.mem.ledger(pid).demote_promoted;
            let p = &mut self.procs[i];
            let delta = p.delta.compute_delta(counter);
            let slope = p.delta.compute_slope();
            if adaptive && p.delta.has_slope() && p.toggle.evaluate_stop(slope, k, m) == StopAction::DisableMigration {
                p.restart.reset();
                p.last_scan = None;
                self.mem.ledger_mut(pid).stops += 1;
                self.toggles.push(ToggleEvent { time_ns: at, process: pid, on: false });
                // start sampling from clean access bits
                stride_scan(&mut self.mem, &self.cfg.profiler, pid);
            }
            let row = self.row(i, at, delta, slope);
            self.rows.push(row);
        }
        self.mem.check_conservation()?;
        if self.cfg.check_invariants {
            self.mem.check_full()?;
        }
        Ok(())
    }

    fn restart_scan(&mut self, at: Nanos) {
        let thr = self.cfg.adaptive.restart_threshold;
        for i in 0..self.procs.len() {
            let p = &self.procs[i];
            if !p.started || p.toggle.migration_on {
                continue;
            }
            let pid = p.id;
            let scan = stride_scan(&mut self.mem, &self.cfg.profiler, pid);
            let counter = self.mem.ledger(pid).demote_promoted;
            let p = &mut self.procs[i];
            p.last_scan = Some(scan.accessed_count);
            if p.restart.evaluate_restart(scan.accessed_count as u64, thr) == RestartAction::Restart {
                p.toggle = ToggleState::new();
                p.restart.reset();
                p.delta.prime(counter);
                self.mem.ledger_mut(pid).restarts += 1;
                self.toggles.push(ToggleEvent { time_ns: at, process: pid, on: true });
            }
        }
    }

    fn row(&self, i: usize, at: Nanos, delta: u64, slope: u64) -> IntervalRow {
        let p = &self.procs[i];
        let l = self.mem.ledger(p.id);
        let hot_in_dram = self.sources[i].hot_set_at(at).filter(|h| !h.is_empty()).map(|hot| {
            let pages = self.mem.process_pages(p.id);
            let resident = hot.iter().filter(|&&idx| self.mem.page(pages[idx as usize]).tier == Tier::Dram).count();
            resident as f64 / hot.len() as f64
        });
        let dram_pages = self.mem.process_pages(p.id).iter().filter(|&&id| self.mem.page(id).tier == Tier::Dram).count();
        IntervalRow {
            time_ns: at,
            process: p.id,
            delta,
            slope,
            slope_state: p.toggle.slope_state,
            stop_threshold: p.toggle.stop_threshold,
            toggle: p.toggle.migration_on,
            accessed_count: if p.toggle.migration_on { None } else { p.last_scan },
            promotions: l.promotions,
            demotions: l.demotions,
            demote_promoted: l.demote_promoted,
            total_cost_ns: l.total(),
            access_ns: l.access_ns,
            accesses: l.accesses,
            hint_faults: l.hint_faults,
            dram_pages,
            hot_in_dram,
        }
    }

    fn into_report(self) -> RunReport {
        let processes = self
            .procs
            .iter()
            .enumerate()
            .map(|(i, p)| ProcessReport {
                id: p.id,
                label: p.label.clone(),
                start_ns: p.start_ns,
                rss_pages: self.sources[i].rss_pages(),
                ledger: self.mem.ledger(p.id).clone(),
                final_state: if p.toggle.migration_on { p.toggle.slope_state } else { SlopeState::Stabilized },
                migration_on: p.toggle.migration_on,
            })
            .collect();
        RunReport {
            policy: self.cfg.policy,
            seed: self.cfg.seed,
            duration_ns: self.cfg.duration_ns,
            end_ns: self.queue.now(),
            processes,
            rows: self.rows,
            toggles: self.toggles,
            cxl_pressure: self.mem.cxl_pressure(),
            lru_stats: self.mem.lru().node(Tier::Cxl).stats,
        }
    }
}

/// Run a scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> anyhow::Result<RunReport> {
    Ok(Simulation::new(cfg.clone())?.run()?)
}
