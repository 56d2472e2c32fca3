//! Access-stream generators and trace replay.
//!
//! Every tenant gets a seeded permutation of its page indices. Hot regions
//! are prefixes of that permutation, so a region covering a fraction `f` of
//! the RSS is always the same `ceil(f * rss)` pages, and regions of
//! different phases nest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::TraceError;
use crate::memory::AccessKind;
use crate::sim::{Nanos, RngStream, NS_PER_SEC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    UniformRandom,
    ZipfHotset,
    Streaming,
    PhasedMicro,
    Trace,
}

impl WorkloadKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::UniformRandom => "uniform_random",
            WorkloadKind::ZipfHotset => "zipf_hotset",
            WorkloadKind::Streaming => "streaming",
            WorkloadKind::PhasedMicro => "phased_micro",
            WorkloadKind::Trace => "trace",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "uniform_random" => WorkloadKind::UniformRandom,
            "zipf_hotset" => WorkloadKind::ZipfHotset,
            "streaming" => WorkloadKind::Streaming,
            "phased_micro" => WorkloadKind::PhasedMicro,
            "trace" => WorkloadKind::Trace,
            _ => return Err(format!("unknown workload kind `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub duration_ns: Nanos,
    pub hot_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub rss_pages: usize,
    pub hot_fraction: f64,
    /// Probability that an access targets the hot region.
    pub hot_access_ratio: f64,
    /// Skew of the cold-page distribution; 0 means uniform.
    pub zipf_s: f64,
    pub phases: Vec<Phase>,
    /// Accesses per second per thread.
    pub ops_rate: f64,
    pub threads: u32,
    pub write_ratio: f64,
    pub trace: Option<PathBuf>,
    /// Process id selected from the trace file.
    pub trace_pid: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            kind: WorkloadKind::UniformRandom,
            rss_pages: 0,
            hot_fraction: 0.1,
            hot_access_ratio: 0.9,
            zipf_s: 0.0,
            phases: Vec::new(),
            ops_rate: 100_000.0,
            threads: 1,
            write_ratio: 0.2,
            trace: None,
            trace_pid: 0,
        }
    }
}

fn region_len(rss: usize, fraction: f64) -> usize {
    ((rss as f64 * fraction).ceil() as usize).min(rss)
}

impl WorkloadSpec {
    pub fn validate(&self, prefix: &str, errors: &mut Vec<String>) {
        let frac = |name: &str, v: f64, errors: &mut Vec<String>| {
            if !(0.0..=1.0).contains(&v) {
                errors.push(format!("{prefix}.{name} must be within [0, 1], got {v}"));
            }
        };
        if self.rss_pages == 0 && self.kind != WorkloadKind::Trace {
            errors.push(format!("{prefix}.rss_pages must be > 0"));
        }
        frac("hot_fraction", self.hot_fraction, errors);
        frac("hot_access_ratio", self.hot_access_ratio, errors);
        frac("write_ratio", self.write_ratio, errors);
        if self.zipf_s < 0.0 || !self.zipf_s.is_finite() {
            errors.push(format!("{prefix}.zipf_s must be >= 0"));
        }
        if self.kind != WorkloadKind::Trace && !(self.ops_rate > 0.0 && self.ops_rate.is_finite()) {
            errors.push(format!("{prefix}.ops_rate must be > 0"));
        }
        if self.threads == 0 {
            errors.push(format!("{prefix}.threads must be >= 1"));
        }
        if self.kind == WorkloadKind::PhasedMicro {
            if self.phases.is_empty() {
                errors.push(format!("{prefix}.phases must list at least one phase"));
            }
            for p in &self.phases {
                frac("phases", p.hot_fraction, errors);
                if p.duration_ns == 0 {
                    errors.push(format!("{prefix}.phases: phase durations must be > 0"));
                }
            }
        }
        if self.kind == WorkloadKind::Trace && self.trace.is_none() {
            errors.push(format!("{prefix}.trace must name a trace file"));
        }
    }

    /// Combined access rate over all threads.
    pub fn effective_rate(&self) -> f64 {
        self.ops_rate * self.threads as f64
    }

    /// Index of the phase active `elapsed` ns after start; the last phase
    /// persists past the end of the schedule.
    pub fn phase_at(&self, elapsed: Nanos) -> usize {
        let mut acc = 0;
        for (i, p) in self.phases.iter().enumerate() {
            acc += p.duration_ns;
            if elapsed < acc {
                return i;
            }
        }
        self.phases.len().saturating_sub(1)
    }

    /// Start offsets (relative to tenant start) of every phase after the
    /// first.
    pub fn phase_boundaries(&self) -> Vec<Nanos> {
        let mut acc = 0;
        let mut out = Vec::new();
        for p in self.phases.iter().take(self.phases.len().saturating_sub(1)) {
            acc += p.duration_ns;
            out.push(acc);
        }
        out
    }

    /// Size of the hot region at `elapsed`, if the workload has one.
    pub fn hot_len_at(&self, elapsed: Nanos) -> Option<usize> {
        match self.kind {
            WorkloadKind::ZipfHotset => Some(region_len(self.rss_pages, self.hot_fraction)),
            WorkloadKind::PhasedMicro => Some(region_len(self.rss_pages, self.phases[self.phase_at(elapsed)].hot_fraction)),
            _ => None,
        }
    }

    /// Probability of each page index being picked by one draw at `elapsed`.
    /// Trace workloads have no model and return `None`.
    pub fn access_distribution(&self, layout: &[u32], elapsed: Nanos) -> Option<Vec<f64>> {
        let n = self.rss_pages;
        let mut p = vec![0.0; n];
        match self.kind {
            WorkloadKind::UniformRandom | WorkloadKind::Streaming => p.iter_mut().for_each(|x| *x = 1.0 / n as f64),
            WorkloadKind::ZipfHotset | WorkloadKind::PhasedMicro => {
                let hot = self.hot_len_at(elapsed)?;
                let cold = n - hot;
                let (hot_mass, cold_mass) = if cold == 0 {
                    (1.0, 0.0)
                } else if hot == 0 {
                    (0.0, 1.0)
                } else {
                    (self.hot_access_ratio, 1.0 - self.hot_access_ratio)
                };
                for &page in &layout[..hot] {
                    p[page as usize] = hot_mass / hot as f64;
                }
                let skew = if self.kind == WorkloadKind::ZipfHotset { self.zipf_s } else { 0.0 };
                let weights: Vec<f64> = (1..=cold).map(|r| (r as f64).powf(-skew)).collect();
                let norm: f64 = weights.iter().sum();
                for (r, &page) in layout[hot..].iter().enumerate() {
                    p[page as usize] = cold_mass * weights[r] / norm;
                }
            }
            WorkloadKind::Trace => return None,
        }
        Some(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TenantSpec {
    pub label: String,
    pub workload: WorkloadSpec,
    pub start_offset_ns: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedAccess {
    pub t: Nanos,
    pub index: u32,
    pub kind: AccessKind,
}

/// A per-tenant stream of accesses in non-decreasing time order.
pub trait AccessSource: Send {
    fn next_access(&mut self) -> Option<TimedAccess>;

    /// Pages the tenant must have allocated before its first access.
    fn rss_pages(&self) -> usize;

    /// Hot-region page indices at absolute time `t`, where the generator
    /// knows them.
    fn hot_set_at(&self, _t: Nanos) -> Option<&[u32]> {
        None
    }
}

/// Seeded synthetic generator with deterministic inter-arrival spacing.
pub struct SyntheticSource {
    spec: WorkloadSpec,
    start: Nanos,
    k: u64,
    layout: Vec<u32>,
    rng: ChaCha8Rng,
    zipf: Option<Zipf<f64>>,
    stream_pos: usize,
}

impl SyntheticSource {
    pub fn new(spec: WorkloadSpec, start: Nanos, seed: u64, tenant: u32) -> Self {
        let layout = page_layout(spec.rss_pages, seed, tenant);
        let cold = spec.rss_pages - region_len(spec.rss_pages, spec.hot_fraction);
        let zipf = (spec.kind == WorkloadKind::ZipfHotset && spec.zipf_s > 0.0 && cold > 0)
            .then(|| Zipf::new(cold as f64, spec.zipf_s).expect("validated zipf parameters"));
        Self { rng: RngStream::new(seed, tenant, 1).rng(), spec, start, k: 0, layout, zipf, stream_pos: 0 }
    }

    pub fn layout(&self) -> &[u32] {
        &self.layout
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    fn time_of(&self, k: u64) -> Nanos {
        self.start + (k as f64 * NS_PER_SEC as f64 / self.spec.effective_rate()) as Nanos
    }

    fn draw_region(&mut self, hot: usize, skewed: bool) -> u32 {
        let n = self.spec.rss_pages;
        let cold = n - hot;
        let take_hot = cold == 0 || (hot > 0 && self.rng.random::<f64>() < self.spec.hot_access_ratio);
        if take_hot {
            return self.layout[self.rng.random_range(0..hot)];
        }
        let rank = match &self.zipf {
            Some(z) if skewed => (z.sample(&mut self.rng) as usize - 1).min(cold - 1),
            _ => self.rng.random_range(0..cold),
        };
        self.layout[hot + rank]
    }
}

/// Seeded permutation of `0..rss` shared by generators and oracles.
pub fn page_layout(rss: usize, seed: u64, tenant: u32) -> Vec<u32> {
    let mut layout: Vec<u32> = (0..rss as u32).collect();
    layout.shuffle(&mut RngStream::new(seed, tenant, 0).rng());
    layout
}

impl AccessSource for SyntheticSource {
    fn next_access(&mut self) -> Option<TimedAccess> {
        let t = self.time_of(self.k);
        self.k += 1;
        let n = self.spec.rss_pages;
        let index = match self.spec.kind {
            WorkloadKind::UniformRandom => self.rng.random_range(0..n) as u32,
            WorkloadKind::Streaming => {
                let i = self.stream_pos;
                self.stream_pos = (i + 1) % n;
                i as u32
            }
            WorkloadKind::ZipfHotset => {
                let hot = region_len(n, self.spec.hot_fraction);
                self.draw_region(hot, true)
            }
            WorkloadKind::PhasedMicro => {
                let hot = self.spec.hot_len_at(t - self.start).unwrap_or(0);
                self.draw_region(hot, false)
            }
            WorkloadKind::Trace => unreachable!("trace workloads use TraceSource"),
        };
        let kind = if self.rng.random::<f64>() < self.spec.write_ratio { AccessKind::Write } else { AccessKind::Read };
        Some(TimedAccess { t, index, kind })
    }

    fn rss_pages(&self) -> usize {
        self.spec.rss_pages
    }

    fn hot_set_at(&self, t: Nanos) -> Option<&[u32]> {
        let hot = self.spec.hot_len_at(t.saturating_sub(self.start))?;
        Some(&self.layout[..hot])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub t_ns: Nanos,
    pub pid: u32,
    pub page: u64,
    pub kind: AccessKind,
}

/// Parse `<t_ns> <pid> <page> <r|w>` lines. Blank lines and lines starting
/// with `#` are skipped; timestamps may not decrease.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    let mut prev = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let malformed = |msg: String| TraceError::Malformed { line, msg };
        let fields: Vec<&str> = s.split_whitespace().collect();
        let [t, pid, page, kind] = fields[..] else {
            return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
        };
        let t_ns: u64 = t.parse().map_err(|_| malformed(format!("bad timestamp `{t}`")))?;
        let pid: u32 = pid.parse().map_err(|_| malformed(format!("bad process id `{pid}`")))?;
        let page: u64 = page.parse().map_err(|_| malformed(format!("bad page index `{page}`")))?;
        let kind = match kind {
            "r" | "R" => AccessKind::Read,
            "w" | "W" => AccessKind::Write,
            _ => return Err(malformed(format!("access kind must be r or w, got `{kind}`"))),
        };
        if t_ns < prev {
            return Err(TraceError::Decreasing { line, t: t_ns, prev });
        }
        prev = t_ns;
        out.push(TraceRecord { t_ns, pid, page, kind });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    parse_trace(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Replays the records of one process id from a parsed trace.
pub struct TraceSource {
    records: Vec<TimedAccess>,
    pos: usize,
    rss: usize,
}

impl TraceSource {
    /// Records are shifted by `start`. `rss` of 0 sizes the tenant to the
    /// highest page index referenced.
    pub fn new(records: &[TraceRecord], pid: u32, start: Nanos, rss: usize) -> Result<Self, TraceError> {
        let mut out = Vec::new();
        for r in records.iter().filter(|r| r.pid == pid) {
            let index = u32::try_from(r.page).map_err(|_| TraceError::Malformed { line: 0, msg: format!("page index {} too large", r.page) })?;
            out.push(TimedAccess { t: start + r.t_ns, index, kind: r.kind });
        }
        let rss = if rss == 0 { out.iter().map(|a| a.index as usize + 1).max().unwrap_or(0) } else { rss };
        Ok(Self { records: out, pos: 0, rss })
    }
}

impl AccessSource for TraceSource {
    fn next_access(&mut self) -> Option<TimedAccess> {
        let a = self.records.get(self.pos).copied();
        self.pos += 1;
        a
    }

    fn rss_pages(&self) -> usize {
        self.rss
    }
}

/// Build one access source per tenant.
pub fn compose_tenants(tenants: &[TenantSpec], seed: u64) -> anyhow::Result<Vec<Box<dyn AccessSource>>> {
    let mut out: Vec<Box<dyn AccessSource>> = Vec::with_capacity(tenants.len());
    for (i, t) in tenants.iter().enumerate() {
        let w = &t.workload;
        if w.kind == WorkloadKind::Trace {
            let path = w.trace.as_ref().ok_or_else(|| anyhow::anyhow!("tenant {} has no trace file", t.label))?;
            let records = read_trace(path)?;
            out.push(Box::new(TraceSource::new(&records, w.trace_pid, t.start_offset_ns, w.rss_pages)?));
        } else {
            out.push(Box::new(SyntheticSource::new(w.clone(), t.start_offset_ns, seed, i as u32)));
        }
    }
    Ok(out)
}

/// The three-phase microbenchmark: the hot region spans 3/8, then 6/8, then
/// 3/8 of the RSS, each phase lasting `phase_s` seconds.
pub fn phased_micro_default(phase_s: u64) -> TenantSpec {
    let phase = |f| Phase { duration_ns: phase_s * NS_PER_SEC, hot_fraction: f };
    TenantSpec {
        label: "phased".into(),
        workload: WorkloadSpec {
            kind: WorkloadKind::PhasedMicro,
            rss_pages: 80_000,
            hot_fraction: 3.0 / 8.0,
            hot_access_ratio: 1.0,
            phases: vec![phase(3.0 / 8.0), phase(6.0 / 8.0), phase(3.0 / 8.0)],
            ..WorkloadSpec::default()
        },
        start_offset_ns: 0,
    }
}
