use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tiersim::profiler::stride_scan;
use tiersim::sim::NS_PER_SEC;
use tiersim::workload::{page_layout, parse_trace, AccessSource, Phase, SyntheticSource, TraceSource};
use tiersim::{AccessKind, MemoryConfig, MemorySystem, ProfilerConfig, TierConfig, TraceError, WorkloadKind, WorkloadSpec};

fn empirical(spec: &WorkloadSpec, draws: usize, seed: u64) -> Vec<f64> {
    let mut s = SyntheticSource::new(spec.clone(), 0, seed, 0);
    let mut counts = vec![0u64; spec.rss_pages];
    for _ in 0..draws {
        counts[s.next_access().unwrap().index as usize] += 1;
    }
    counts.into_iter().map(|c| c as f64 / draws as f64).collect()
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

fn check_against_model(spec: WorkloadSpec, tol: f64) {
    let layout = page_layout(spec.rss_pages, 9, 0);
    let model = spec.access_distribution(&layout, 0).unwrap();
    assert!((model.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let got = empirical(&spec, 400_000, 9);
    let tv = total_variation(&got, &model);
    assert!(tv < tol, "{} total variation {tv}", spec.kind);
}

#[test]
fn uniform_matches_model() {
    check_against_model(WorkloadSpec { kind: WorkloadKind::UniformRandom, rss_pages: 500, ..WorkloadSpec::default() }, 0.03);
}

#[test]
fn zipf_hotset_matches_model() {
    for zipf_s in [0.0, 0.8, 1.3] {
        let spec = WorkloadSpec { kind: WorkloadKind::ZipfHotset, rss_pages: 800, hot_fraction: 0.1, zipf_s, ..WorkloadSpec::default() };
        check_against_model(spec, 0.03);
    }
}

#[test]
fn hot_mass_matches_ratio() {
    let spec = WorkloadSpec { kind: WorkloadKind::ZipfHotset, rss_pages: 1000, hot_fraction: 0.2, hot_access_ratio: 0.75, ..WorkloadSpec::default() };
    let s = SyntheticSource::new(spec.clone(), 0, 3, 0);
    let hot: std::collections::HashSet<u32> = s.hot_set_at(0).unwrap().iter().copied().collect();
    assert_eq!(hot.len(), 200);
    let got = empirical(&spec, 200_000, 3);
    let mass: f64 = hot.iter().map(|&p| got[p as usize]).sum();
    assert!((mass - 0.75).abs() < 0.01, "hot mass {mass}");
}

#[test]
fn phased_hot_set_follows_schedule() {
    let spec = WorkloadSpec {
        kind: WorkloadKind::PhasedMicro,
        rss_pages: 800,
        hot_access_ratio: 1.0,
        phases: vec![
            Phase { duration_ns: 10 * NS_PER_SEC, hot_fraction: 0.25 },
            Phase { duration_ns: 10 * NS_PER_SEC, hot_fraction: 0.5 },
        ],
        ops_rate: 1000.0,
        ..WorkloadSpec::default()
    };
    let mut s = SyntheticSource::new(spec.clone(), 5 * NS_PER_SEC, 1, 0);
    let layout = s.layout().to_vec();
    assert_eq!(s.hot_set_at(5 * NS_PER_SEC).unwrap().len(), 200);
    assert_eq!(s.hot_set_at(16 * NS_PER_SEC).unwrap().len(), 400);
    assert_eq!(spec.phase_boundaries(), vec![10 * NS_PER_SEC]);
    for _ in 0..20_000 {
        let a = s.next_access().unwrap();
        let hot = if a.t < 15 * NS_PER_SEC { 200 } else { 400 };
        assert!(layout[..hot].contains(&a.index), "access at {} outside hot region", a.t);
    }
}

#[test]
fn arrivals_are_evenly_spaced() {
    let spec = WorkloadSpec { rss_pages: 64, ops_rate: 2000.0, threads: 2, ..WorkloadSpec::default() };
    let mut s = SyntheticSource::new(spec, 7, 1, 0);
    let times: Vec<u64> = (0..1000).map(|_| s.next_access().unwrap().t).collect();
    assert_eq!(times[0], 7);
    assert!(times.windows(2).all(|w| w[1] - w[0] == 250_000));
}

#[test]
fn write_ratio_respected() {
    let spec = WorkloadSpec { rss_pages: 64, write_ratio: 0.3, ..WorkloadSpec::default() };
    let mut s = SyntheticSource::new(spec, 0, 1, 0);
    let writes = (0..100_000).filter(|_| s.next_access().unwrap().kind == AccessKind::Write).count();
    assert!((writes as f64 / 1e5 - 0.3).abs() < 0.01);
}

#[test]
fn layout_is_a_seeded_permutation() {
    let a = page_layout(1000, 5, 0);
    let mut sorted = a.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..1000).collect::<Vec<u32>>());
    assert_eq!(a, page_layout(1000, 5, 0));
    assert_ne!(a, page_layout(1000, 5, 1));
    assert_ne!(a, page_layout(1000, 6, 0));
}

#[test]
fn trace_source_filters_by_pid() {
    let recs = parse_trace("0 1 4 r\n5 2 9 w\n8 1 2 w\n").unwrap();
    let mut t = TraceSource::new(&recs, 1, 100, 0).unwrap();
    assert_eq!(t.rss_pages(), 5);
    let got: Vec<(u64, u32)> = std::iter::from_fn(|| t.next_access()).map(|a| (a.t, a.index)).collect();
    assert_eq!(got, vec![(100, 4), (108, 2)]);
}

#[test]
fn trace_errors_name_the_line() {
    let e = parse_trace("0 0 1 r\n\n1 0 x r\n").unwrap_err();
    assert!(matches!(e, TraceError::Malformed { line: 3, .. }), "{e}");
    let e = parse_trace("5 0 1 r\n# note\n4 0 1 r\n").unwrap_err();
    assert!(matches!(e, TraceError::Decreasing { line: 3, t: 4, prev: 5 }), "{e}");
    assert!(parse_trace("1 0 1 q\n").is_err());
}

// Scaling a strided sample by the stride estimates the number of touched
// pages without bias when touches are independent of position.
#[test]
fn stride_scan_estimate_is_unbiased() {
    let n = 4096;
    let stride = 16;
    let cfg = ProfilerConfig { scan_stride_pages: stride, ..ProfilerConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 300;
    let mut rel_err_sum = 0.0;
    for _ in 0..trials {
        let mut mem = MemorySystem::new(MemoryConfig { dram: TierConfig::dram(n), cxl: TierConfig::cxl(n), ..MemoryConfig::default() });
        let p = mem.add_process();
        mem.allocate(p, n).unwrap();
        let frac: f64 = rng.random_range(0.05..0.9);
        let mut touched = 0;
        for i in 0..n {
            if rng.random::<f64>() < frac {
                mem.access(p, i as u64, AccessKind::Read, |_, _| {}).unwrap();
                touched += 1;
            }
        }
        let r = stride_scan(&mut mem, &cfg, p);
        assert_eq!(r.sampled, n / stride);
        let est = (r.accessed_count * stride) as f64;
        rel_err_sum += (est - touched as f64) / touched as f64;
        // visited bits are cleared, others are left alone
        let again = stride_scan(&mut mem, &cfg, p);
        assert_eq!(again.accessed_count, 0);
    }
    let bias = rel_err_sum / trials as f64;
    assert!(bias.abs() < 0.02, "mean relative error {bias}");
}
