//! Scenario configuration: a line-oriented `key = value` file with dotted
//! keys. `#` starts a comment. Unknown keys and out-of-range values are
//! collected and reported together.
//!
//! ```text
//! seed = 7
//! duration_s = 120
//! policy = adaptive
//! dram.capacity_pages = 8000
//! tenant.0.kind = zipf_hotset
//! tenant.0.rss_pages = 32000
//! tenant.1.kind = phased_micro
//! tenant.1.phases = 0.375:60, 0.75:60, 0.375:60
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::control::AdaptiveConfig;
use crate::error::ConfigError;
use crate::lru::LruMode;
use crate::memory::{MemoryConfig, TierConfig};
use crate::profiler::{FaultPolicy, ProfilerConfig};
use crate::sim::{Nanos, NS_PER_MS, NS_PER_SEC};
use crate::workload::{Phase, TenantSpec, WorkloadSpec};

/// Environment variable consulted for the seed when the file sets none.
pub const SEED_ENV: &str = "TIERSIM_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    NoMigration,
    TppBaseline,
    TppMod,
    #[default]
    Adaptive,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::NoMigration, Policy::TppBaseline, Policy::TppMod, Policy::Adaptive];

    pub fn name(self) -> &'static str {
        match self {
            Policy::NoMigration => "no_migration",
            Policy::TppBaseline => "tpp_baseline",
            Policy::TppMod => "tpp_mod",
            Policy::Adaptive => "adaptive",
        }
    }

    pub fn migrates(self) -> bool {
        self != Policy::NoMigration
    }

    pub fn lru_mode(self) -> LruMode {
        match self {
            Policy::TppBaseline => LruMode::Baseline,
            _ => LruMode::Modified,
        }
    }

    pub fn fault_policy(self, adaptive: &AdaptiveConfig) -> FaultPolicy {
        FaultPolicy { lru_mode: self.lru_mode(), refault_distance: self == Policy::Adaptive && adaptive.refault_distance }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_ns: Nanos,
    pub policy: Policy,
    pub memory: MemoryConfig,
    pub profiler: ProfilerConfig,
    pub adaptive: AdaptiveConfig,
    pub tenants: Vec<TenantSpec>,
    /// Run the full LRU/residency check at every evaluation tick.
    pub check_invariants: bool,
    pub series_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            duration_ns: 60 * NS_PER_SEC,
            policy: Policy::default(),
            memory: MemoryConfig::default(),
            profiler: ProfilerConfig::default(),
            adaptive: AdaptiveConfig::default(),
            tenants: Vec::new(),
            check_invariants: false,
            series_path: None,
            summary_path: None,
        }
    }
}

fn secs(v: f64) -> Nanos {
    (v * NS_PER_SEC as f64).round() as Nanos
}

fn parse_phases(v: &str) -> Result<Vec<Phase>, String> {
    v.split(',')
        .map(|item| {
            let (frac, dur) = item.trim().split_once(':').ok_or_else(|| format!("phase `{}` is not fraction:seconds", item.trim()))?;
            let hot_fraction = parse_fraction(frac.trim())?;
            let d: f64 = dur.trim().parse().map_err(|_| format!("bad phase duration `{}`", dur.trim()))?;
            Ok(Phase { duration_ns: secs(d), hot_fraction })
        })
        .collect()
}

/// Accepts `0.375` or `3/8`.
fn parse_fraction(s: &str) -> Result<f64, String> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad fraction `{s}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad fraction `{s}`"))?;
        if b == 0.0 {
            return Err(format!("bad fraction `{s}`"));
        }
        return Ok(a / b);
    }
    s.parse().map_err(|_| format!("bad fraction `{s}`"))
}

struct Parser<'a> {
    errors: Vec<String>,
    base_dir: &'a Path,
}

impl Parser<'_> {
    fn num<T: FromStr>(&mut self, key: &str, v: &str, slot: &mut T) {
        match v.parse() {
            Ok(x) => *slot = x,
            Err(_) => self.errors.push(format!("{key}: cannot parse `{v}`")),
        }
    }

    fn bool(&mut self, key: &str, v: &str, slot: &mut bool) {
        match v {
            "true" | "on" | "yes" | "1" => *slot = true,
            "false" | "off" | "no" | "0" => *slot = false,
            _ => self.errors.push(format!("{key}: expected a boolean, got `{v}`")),
        }
    }

    fn seconds(&mut self, key: &str, v: &str, slot: &mut Nanos) {
        let mut f = 0.0f64;
        self.num(key, v, &mut f);
        if f < 0.0 {
            self.errors.push(format!("{key} must be >= 0"));
        }
        *slot = secs(f);
    }

    fn tier(&mut self, key: &str, field: &str, v: &str, t: &mut TierConfig) -> bool {
        match field {
            "capacity_pages" => self.num(key, v, &mut t.capacity_pages),
            "high_watermark" => self.num(key, v, &mut t.high_watermark),
            "low_watermark" => self.num(key, v, &mut t.low_watermark),
            "promo_watermark" => self.num(key, v, &mut t.promo_watermark),
            "read_latency_cycles" => self.num(key, v, &mut t.read_latency_cycles),
            "write_latency_cycles" => self.num(key, v, &mut t.write_latency_cycles),
            "read_bw_gbps" => self.num(key, v, &mut t.read_bw_gbps),
            "write_bw_gbps" => self.num(key, v, &mut t.write_bw_gbps),
            _ => return false,
        }
        true
    }

    fn tenant(&mut self, key: &str, field: &str, v: &str, t: &mut TenantSpec) -> bool {
        let w = &mut t.workload;
        match field {
            "label" => t.label = v.to_string(),
            "kind" => match v.parse() {
                Ok(k) => w.kind = k,
                Err(e) => self.errors.push(format!("{key}: {e}")),
            },
            "rss_pages" => self.num(key, v, &mut w.rss_pages),
            "hot_fraction" => match parse_fraction(v) {
                Ok(f) => w.hot_fraction = f,
                Err(e) => self.errors.push(format!("{key}: {e}")),
            },
            "hot_access_ratio" => self.num(key, v, &mut w.hot_access_ratio),
            "zipf_s" => self.num(key, v, &mut w.zipf_s),
            "ops_rate" => self.num(key, v, &mut w.ops_rate),
            "threads" => self.num(key, v, &mut w.threads),
            "write_ratio" => self.num(key, v, &mut w.write_ratio),
            "start_offset_s" => self.seconds(key, v, &mut t.start_offset_ns),
            "phases" => match parse_phases(v) {
                Ok(p) => w.phases = p,
                Err(e) => self.errors.push(format!("{key}: {e}")),
            },
            "trace" => w.trace = Some(self.base_dir.join(v)),
            "trace_pid" => self.num(key, v, &mut w.trace_pid),
            _ => return false,
        }
        true
    }
}

impl ScenarioConfig {
    /// Parse a configuration. Relative trace paths resolve against
    /// `base_dir`. When `seed` is absent the value of `TIERSIM_SEED` is
    /// used, falling back to [`DEFAULT_SEED`].
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut p = Parser { errors: Vec::new(), base_dir };
        let mut tenants: BTreeMap<u32, TenantSpec> = BTreeMap::new();
        let mut seed_set = false;

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, v)) = line.split_once('=') else {
                p.errors.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            let (key, v) = (key.trim(), v.trim());
            let parts: Vec<&str> = key.split('.').collect();
            let known = match parts[..] {
                ["seed"] => {
                    seed_set = true;
                    p.num(key, v, &mut cfg.seed);
                    true
                }
                ["duration_s"] => {
                    p.seconds(key, v, &mut cfg.duration_ns);
                    true
                }
                ["policy"] => {
                    match v.parse() {
                        Ok(x) => cfg.policy = x,
                        Err(e) => p.errors.push(format!("{key}: {e}")),
                    }
                    true
                }
                ["clock_ghz"] => {
                    p.num(key, v, &mut cfg.memory.clock_ghz);
                    true
                }
                ["check_invariants"] => {
                    p.bool(key, v, &mut cfg.check_invariants);
                    true
                }
                ["dram", field] => p.tier(key, field, v, &mut cfg.memory.dram),
                ["cxl", field] => p.tier(key, field, v, &mut cfg.memory.cxl),
                ["cost", field] => {
                    let m = &mut cfg.memory.migration;
                    match field {
                        "fault_ns" => p.num(key, v, &mut cfg.memory.fault_ns),
                        "migration_alloc_ns" => p.num(key, v, &mut m.alloc_ns),
                        "migration_unmap_ns" => p.num(key, v, &mut m.unmap_ns),
                        "migration_copy_ns" => p.num(key, v, &mut m.copy_ns),
                        "migration_remap_ns" => p.num(key, v, &mut m.remap_ns),
                        _ => {}
                    }
                    matches!(field, "fault_ns" | "migration_alloc_ns" | "migration_unmap_ns" | "migration_copy_ns" | "migration_remap_ns")
                }
                ["lru", "inactive_divisor"] => {
                    p.num(key, v, &mut cfg.memory.inactive_divisor);
                    true
                }
                ["profiler", field] => {
                    let pr = &mut cfg.profiler;
                    match field {
                        "poison_batch" => p.num(key, v, &mut pr.poison_batch),
                        "poison_period_ms" => {
                            let mut ms = 0u64;
                            p.num(key, v, &mut ms);
                            pr.poison_period_ns = ms * NS_PER_MS;
                        }
                        "scan_stride_pages" => p.num(key, v, &mut pr.scan_stride_pages),
                        "scan_visit_ns" => p.num(key, v, &mut pr.scan_visit_ns),
                        "scan_clear_ns" => p.num(key, v, &mut pr.scan_clear_ns),
                        "poison_fast_tier" => p.bool(key, v, &mut pr.poison_fast_tier),
                        "scan_period_s" => p.seconds(key, v, &mut cfg.adaptive.restart_period_ns),
                        _ => {}
                    }
                    matches!(
                        field,
                        "poison_batch" | "poison_period_ms" | "scan_stride_pages" | "scan_visit_ns" | "scan_clear_ns" | "poison_fast_tier" | "scan_period_s"
                    )
                }
                ["adaptive", field] => {
                    let a = &mut cfg.adaptive;
                    match field {
                        "eval_period_s" => p.seconds(key, v, &mut a.eval_period_ns),
                        "restart_period_s" => p.seconds(key, v, &mut a.restart_period_ns),
                        "stop_streak" => p.num(key, v, &mut a.stop_streak),
                        "varying_min" => p.num(key, v, &mut a.varying_min),
                        "restart_threshold" => p.num(key, v, &mut a.restart_threshold),
                        "window" => p.num(key, v, &mut a.window_capacity),
                        "refault_distance" => p.bool(key, v, &mut a.refault_distance),
                        _ => {}
                    }
                    matches!(field, "eval_period_s" | "restart_period_s" | "stop_streak" | "varying_min" | "restart_threshold" | "window" | "refault_distance")
                }
                ["tenant", n, field] => match n.parse::<u32>() {
                    Ok(n) => {
                        let t = tenants.entry(n).or_insert_with(|| TenantSpec {
                            label: format!("tenant{n}"),
                            workload: WorkloadSpec::default(),
                            start_offset_ns: 0,
                        });
                        p.tenant(key, field, v, t)
                    }
                    Err(_) => false,
                },
                ["output", "series"] => {
                    cfg.series_path = Some(base_dir.join(v));
                    true
                }
                ["output", "summary"] => {
                    cfg.summary_path = Some(base_dir.join(v));
                    true
                }
                _ => false,
            };
            if !known {
                p.errors.push(format!("{key}: unknown key"));
            }
        }

        if !seed_set {
            if let Ok(s) = std::env::var(SEED_ENV) {
                match s.trim().parse() {
                    Ok(seed) => cfg.seed = seed,
                    Err(_) => p.errors.push(format!("{SEED_ENV}: cannot parse `{s}`")),
                }
            }
        }
        cfg.tenants = tenants.into_values().collect();
        cfg.validate_into(&mut p.errors);
        if p.errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(p.errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        self.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    fn validate_into(&self, errors: &mut Vec<String>) {
        if self.duration_ns == 0 {
            errors.push("duration_s must be > 0".into());
        }
        if !(self.memory.clock_ghz > 0.0) {
            errors.push("clock_ghz must be > 0".into());
        }
        self.memory.dram.validate("dram", errors);
        self.memory.cxl.validate("cxl", errors);
        if self.memory.inactive_divisor == 0 {
            errors.push("lru.inactive_divisor must be >= 1".into());
        }
        if self.profiler.poison_period_ns == 0 {
            errors.push("profiler.poison_period_ms must be > 0".into());
        }
        if self.profiler.scan_stride_pages == 0 {
            errors.push("profiler.scan_stride_pages must be >= 1".into());
        }
        if self.adaptive.eval_period_ns == 0 {
            errors.push("adaptive.eval_period_s must be > 0".into());
        }
        if self.adaptive.restart_period_ns == 0 {
            errors.push("adaptive.restart_period_s must be > 0".into());
        }
        if self.adaptive.window_capacity == 0 {
            errors.push("adaptive.window must be >= 1".into());
        }
        if self.tenants.is_empty() {
            errors.push("at least one tenant.N.* section is required".into());
        }
        for (i, t) in self.tenants.iter().enumerate() {
            t.workload.validate(&format!("tenant.{i}"), errors);
        }
    }

    /// Two configurations describe the same workload when everything except
    /// the policy and its tuning knobs matches.
    pub fn same_workload(&self, other: &ScenarioConfig) -> bool {
        self.seed == other.seed
            && self.duration_ns == other.duration_ns
            && self.tenants == other.tenants
            && self.memory.dram.capacity_pages == other.memory.dram.capacity_pages
            && self.memory.cxl.capacity_pages == other.memory.cxl.capacity_pages
    }

    /// Memory configuration with the policy's LRU mode and demotion setting
    /// applied.
    pub fn effective_memory(&self) -> MemoryConfig {
        MemoryConfig { lru_mode: self.policy.lru_mode(), demotion_enabled: self.policy.migrates(), ..self.memory.clone() }
    }

    /// The phased microbenchmark scenario: an 80k-page tenant over 16k pages
    /// of DRAM and 128k pages of CXL.
    pub fn phased_micro_default(phase_s: u64) -> Self {
        let tenant = crate::workload::phased_micro_default(phase_s);
        let total: Nanos = tenant.workload.phases.iter().map(|p| p.duration_ns).sum();
        Self { duration_ns: total, tenants: vec![tenant], ..Self::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
        seed = 9
        duration_s = 30   # half a minute
        policy = tpp_mod
        dram.capacity_pages = 2000
        tenant.0.kind = zipf_hotset
        tenant.0.rss_pages = 5000
        tenant.0.hot_fraction = 1/10
        tenant.1.kind = phased_micro
        tenant.1.rss_pages = 800
        tenant.1.phases = 3/8:10, 0.75:10
        tenant.1.start_offset_s = 2.5
    ";

    #[test]
    fn parses_basic_scenario() {
        let c = ScenarioConfig::parse(BASIC, Path::new(".")).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.duration_ns, 30 * NS_PER_SEC);
        assert_eq!(c.policy, Policy::TppMod);
        assert_eq!(c.memory.dram.capacity_pages, 2000);
        assert_eq!(c.tenants.len(), 2);
        assert!((c.tenants[0].workload.hot_fraction - 0.1).abs() < 1e-12);
        assert_eq!(c.tenants[1].workload.phases.len(), 2);
        assert_eq!(c.tenants[1].workload.phases[0].hot_fraction, 0.375);
        assert_eq!(c.tenants[1].start_offset_ns, 2_500_000_000);
    }

    #[test]
    fn reports_all_offending_keys() {
        let text = format!("{BASIC}\nbogus = 1\ndram.high_watermark = 2\ntenant.0.hot_access_ratio = abc\n");
        let Err(ConfigError::Invalid(errs)) = ScenarioConfig::parse(&text, Path::new(".")) else {
            panic!("expected error");
        };
        assert!(errs.iter().any(|e| e.contains("bogus")));
        assert!(errs.iter().any(|e| e.contains("dram")));
        assert!(errs.iter().any(|e| e.contains("tenant.0.hot_access_ratio")));
    }

    #[test]
    fn missing_tenants_is_an_error() {
        assert!(ScenarioConfig::parse("seed = 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn scan_period_is_restart_period() {
        let c = ScenarioConfig::parse(&format!("{BASIC}\nprofiler.scan_period_s = 7\n"), Path::new(".")).unwrap();
        assert_eq!(c.adaptive.restart_period_ns, 7 * NS_PER_SEC);
    }

    #[test]
    fn policy_round_trips() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
    }

    #[test]
    fn workload_identity_ignores_policy() {
        let a = ScenarioConfig::parse(BASIC, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.policy = Policy::Adaptive;
        b.adaptive.stop_streak = 5;
        assert!(a.same_workload(&b));
        b.seed = 10;
        assert!(!a.same_workload(&b));
    }
}
