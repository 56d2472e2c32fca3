//! Run results, CSV output and cross-policy comparison.

use std::io::{self, Write};

use anyhow::{bail, Context};

use crate::config::{Policy, ScenarioConfig};
use crate::control::SlopeState;
use crate::engine::run_scenario;
use crate::lru::LruStats;
use crate::memory::ProcessId;
use crate::sim::{CostCategory, CostLedger, Nanos, NS_PER_MS, NS_PER_SEC};

pub const SERIES_HEADER: [&str; 11] = [
    "time_s",
    "process",
    "delta",
    "slope",
    "slope_state",
    "toggle",
    "accessed_count",
    "promotions",
    "demotions",
    "demote_promoted",
    "total_cost_ns",
];

/// One evaluation-period sample for one process. Counters are cumulative.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub time_ns: Nanos,
    pub process: ProcessId,
    pub delta: u64,
    pub slope: u64,
    pub slope_state: SlopeState,
    pub stop_threshold: u64,
    pub toggle: bool,
    /// Last sampled access count, present while migration is off.
    pub accessed_count: Option<usize>,
    pub promotions: u64,
    pub demotions: u64,
    pub demote_promoted: u64,
    pub total_cost_ns: u64,
    pub access_ns: u64,
    pub accesses: u64,
    pub hint_faults: u64,
    pub dram_pages: usize,
    /// Fraction of the current hot region resident in DRAM.
    pub hot_in_dram: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToggleEvent {
    pub time_ns: Nanos,
    pub process: ProcessId,
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessReport {
    pub id: ProcessId,
    pub label: String,
    pub start_ns: Nanos,
    pub rss_pages: usize,
    pub ledger: CostLedger,
    pub final_state: SlopeState,
    pub migration_on: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub policy: Policy,
    pub seed: u64,
    pub duration_ns: Nanos,
    pub end_ns: Nanos,
    pub processes: Vec<ProcessReport>,
    pub rows: Vec<IntervalRow>,
    pub toggles: Vec<ToggleEvent>,
    pub cxl_pressure: u64,
    pub lru_stats: LruStats,
}

pub fn format_time_s(t: Nanos) -> String {
    format!("{}.{:03}", t / NS_PER_SEC, (t % NS_PER_SEC) / NS_PER_MS)
}

impl RunReport {
    /// Sum of every process' cost.
    pub fn total_cost_ns(&self) -> u64 {
        self.processes.iter().map(|p| p.ledger.total()).sum()
    }

    pub fn rows_for(&self, proc: ProcessId) -> impl Iterator<Item = &IntervalRow> + '_ {
        self.rows.iter().filter(move |r| r.process == proc)
    }

    pub fn toggles_for(&self, proc: ProcessId) -> impl Iterator<Item = &ToggleEvent> + '_ {
        self.toggles.iter().filter(move |t| t.process == proc)
    }

    /// Time migration was first switched off for `proc`.
    pub fn first_stop(&self, proc: ProcessId) -> Option<Nanos> {
        self.toggles_for(proc).find(|t| !t.on).map(|t| t.time_ns)
    }

    pub fn write_series_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", SERIES_HEADER.join(","))?;
        for r in &self.rows {
            let accessed = r.accessed_count.map(|c| c.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                format_time_s(r.time_ns),
                r.process,
                r.delta,
                r.slope,
                r.slope_state,
                if r.toggle { "on" } else { "off" },
                accessed,
                r.promotions,
                r.demotions,
                r.demote_promoted,
                r.total_cost_ns
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["process", "label", "policy", "total_cost_ns"];
        header.extend(CostCategory::ALL.iter().map(|c| c.name()));
        header.extend(["accesses", "promotions", "demotions", "demote_promoted", "hint_faults", "failed_migrations", "stops", "restarts"]);
        writeln!(w, "{}", header.join(","))?;
        for p in &self.processes {
            let l = &p.ledger;
            let mut fields = vec![p.id.to_string(), csv_field(&p.label), self.policy.to_string(), l.total().to_string()];
            fields.extend(CostCategory::ALL.iter().map(|&c| l.get(c).to_string()));
            fields.extend(
                [l.accesses, l.promotions, l.demotions, l.demote_promoted, l.hint_faults, l.failed_migrations, l.stops, l.restarts]
                    .iter()
                    .map(u64::to_string),
            );
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn series_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_series_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn summary_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_summary_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub policy: Policy,
    pub total_cost_ns: u64,
    /// Total cost relative to the baseline run.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub baseline: ComparisonRow,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "name,policy,total_cost_ns,ratio")?;
        for r in std::iter::once(&self.baseline).chain(&self.rows) {
            writeln!(w, "{},{},{},{:.4}", csv_field(&r.name), r.policy, r.total_cost_ns, r.ratio)?;
        }
        Ok(())
    }
}

/// Run `baseline` and each of `others` (in parallel) and tabulate total
/// cost relative to the baseline. All configurations must describe the same
/// workload.
pub fn compare(baseline: (&str, &ScenarioConfig), others: &[(&str, &ScenarioConfig)]) -> anyhow::Result<ComparisonTable> {
    for (name, cfg) in others {
        if !cfg.same_workload(baseline.1) {
            bail!("{name} describes a different workload than baseline {}", baseline.0);
        }
    }
    let results: Vec<anyhow::Result<RunReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = std::iter::once(baseline)
            .chain(others.iter().copied())
            .map(|(name, cfg)| s.spawn(move || run_scenario(cfg).with_context(|| format!("running {name}"))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut results = results.into_iter();
    let base = results.next().expect("baseline result")?;
    let base_total = base.total_cost_ns().max(1);
    let row = |name: &str, r: &RunReport| ComparisonRow {
        name: name.to_string(),
        policy: r.policy,
        total_cost_ns: r.total_cost_ns(),
        ratio: r.total_cost_ns() as f64 / base_total as f64,
    };
    let baseline_row = row(baseline.0, &base);
    let mut rows = Vec::new();
    for ((name, _), r) in others.iter().zip(results) {
        rows.push(row(name, &r?));
    }
    Ok(ComparisonTable { baseline: baseline_row, rows })
}
