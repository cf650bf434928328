//! Experiment drivers behind the CLI: the benchmark scaling study, the
//! annealer-versus-oracle comparison and the synthetic corpus generator.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{Frame, Report, SimpleSupport, Subset};
use crate::pipeline::AnnealDefaults;
use crate::potts::{
    anneal, brute_force_partition, generate_benchmark, interactions, median, performance_report, OracleLimits,
    Partition, RunRecord, SupportMode, MAX_BENCHMARK_K,
};
use crate::seed::derive_seed;

const STREAM_INSTANCE: u64 = 1;
const STREAM_ANNEAL: u64 = 2;

/// Benchmark size from which runs are slow and noisy enough to need opting in.
pub const LARGE_K: usize = 10;

/// Runs one annealing pass over `reports` into `k` clusters and records it.
pub fn timed_anneal(
    reports: &[Report],
    k: usize,
    defaults: &AnnealDefaults,
    seed: u64,
) -> Result<(Partition, RunRecord)> {
    let start = Instant::now();
    let j = interactions(reports)?;
    let out = anneal(&j, &defaults.params(k, seed))?;
    let partition = Partition::evaluate(reports, out.assignment, k)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let record = RunRecord::from_partition(&partition, ms, out.spins.inner_steps, out.converged);
    Ok((partition, record))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub runs: usize,
    pub mean_metaconflict: f64,
    pub median_metaconflict: f64,
    pub mean_per_cluster: f64,
    pub median_per_cluster: f64,
    pub mean_per_evidence: f64,
    pub median_per_evidence: f64,
    pub zero_fraction: f64,
    pub converged_fraction: f64,
    pub mean_runtime_ms: f64,
    pub median_runtime_ms: f64,
    pub max_runtime_ms: f64,
    pub mean_sweeps: f64,
}

/// Measured against predicted runtime growth from one K to the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRatio {
    pub k_from: usize,
    pub k_to: usize,
    pub measured: f64,
    /// Ratio of N² log² N between the two sizes.
    pub predicted: f64,
    /// measured / predicted.
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
    pub ratios: Vec<ScalingRatio>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub runs: usize,
    pub seed: u64,
    pub anneal: AnnealDefaults,
    /// Support distribution; a `Range` mode is reseeded for every run.
    pub support: SupportMode,
}

impl BenchConfig {
    pub fn new(k_min: usize, k_max: usize, runs: usize, seed: u64) -> Self {
        Self {
            k_min,
            k_max,
            runs,
            seed,
            anneal: AnnealDefaults::default(),
            support: SupportMode::default(),
        }
    }
}

/// N² log² N with the natural logarithm.
pub fn predicted_cost(n: usize) -> f64 {
    let n = n as f64;
    let l = n.ln();
    n * n * l * l
}

/// Benchmark runs of one size: a fresh instance and annealing seed per run.
pub fn bench_runs(
    k: usize,
    runs: usize,
    seed: u64,
    defaults: &AnnealDefaults,
    support: SupportMode,
) -> Result<Vec<RunRecord>> {
    (0..runs as u64)
        .map(|r| {
            let reports = generate_benchmark(
                k,
                support.reseeded(derive_seed(seed, STREAM_INSTANCE + 16 * k as u64, r)),
            )?;
            let (_, record) = timed_anneal(
                &reports,
                k,
                defaults,
                derive_seed(seed, STREAM_ANNEAL + 16 * k as u64, r),
            )?;
            Ok(record)
        })
        .collect()
}

pub fn cmd_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.k_min < 2 || cfg.k_min > cfg.k_max || cfg.k_max > MAX_BENCHMARK_K {
        return Err(Error::InvalidParameter(format!(
            "K range {}..={} must lie within 2..={MAX_BENCHMARK_K}",
            cfg.k_min, cfg.k_max
        )));
    }
    if cfg.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        let records = bench_runs(k, cfg.runs, cfg.seed, &cfg.anneal, cfg.support)?;
        let p = performance_report(&records).expect("runs > 0");
        rows.push(ScalingRow {
            k,
            n: (1usize << k) - 1,
            runs: p.runs,
            mean_metaconflict: p.mean_metaconflict,
            median_metaconflict: p.median_metaconflict,
            mean_per_cluster: p.mean_per_cluster,
            median_per_cluster: p.median_per_cluster,
            mean_per_evidence: p.mean_per_evidence,
            median_per_evidence: p.median_per_evidence,
            zero_fraction: p.zero_fraction,
            converged_fraction: p.converged_fraction,
            mean_runtime_ms: p.mean_runtime_ms,
            median_runtime_ms: p.median_runtime_ms,
            max_runtime_ms: p.max_runtime_ms,
            mean_sweeps: p.mean_sweeps,
        });
    }
    let ratios = rows
        .windows(2)
        .map(|w| {
            let measured = w[1].mean_runtime_ms / w[0].mean_runtime_ms;
            let predicted = predicted_cost(w[1].n) / predicted_cost(w[0].n);
            ScalingRatio {
                k_from: w[0].k,
                k_to: w[1].k,
                measured,
                predicted,
                agreement: measured / predicted,
            }
        })
        .collect();
    Ok(BenchReport {
        seed: cfg.seed,
        rows,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub index: usize,
    pub seed: u64,
    pub anneal_metaconflict: f64,
    pub oracle_metaconflict: f64,
    /// anneal − oracle; never negative.
    pub gap: f64,
    pub matched: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub q: usize,
    pub seed: u64,
    pub instances: Vec<OracleInstance>,
    pub match_rate: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub median_gap: f64,
}

/// Gap at or below which the annealer counts as having found the optimum.
pub const MATCH_TOLERANCE: f64 = 1e-9;

/// `n` simple supports on a frame of `q + 1` labels: each focus is a uniform
/// nonempty proper subset, each support uniform on [0.1, 0.9].
pub fn random_instance(n: usize, q: usize, seed: u64) -> Result<Vec<Report>> {
    if q == 0 || q + 1 > crate::evidence::MAX_FRAME_SIZE {
        return Err(Error::InvalidParameter(format!("q = {q} out of range")));
    }
    let frame = Frame::shared((0..=q).map(|i| format!("h{i}")))?;
    let full = frame.full().bits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let focus = Subset::from_bits(rng.random_range(1..full));
            let s = rng.random_range(0.1..=0.9);
            let m = SimpleSupport::new(frame.clone(), focus, s)?.to_mass();
            Report::new(format!("r{i}"), i as f64, m, "random")
        })
        .collect()
}

pub fn cmd_oracle_compare(
    n: usize,
    q: usize,
    instances: usize,
    seed: u64,
    defaults: &AnnealDefaults,
) -> Result<OracleReport> {
    let limits = OracleLimits::default();
    if n > limits.max_reports || q > limits.max_blocks {
        return Err(Error::InstanceTooLarge(format!(
            "n = {n}, q = {q} exceeds the exhaustive search limits ({}, {})",
            limits.max_reports, limits.max_blocks
        )));
    }
    if n < 2 || q == 0 || instances == 0 {
        return Err(Error::InvalidParameter(
            "need n ≥ 2, q ≥ 1 and at least one instance".into(),
        ));
    }
    let mut out = Vec::with_capacity(instances);
    for i in 0..instances {
        let inst_seed = derive_seed(seed, STREAM_INSTANCE, i as u64);
        let reports = random_instance(n, q, inst_seed)?;
        let oracle = brute_force_partition(&reports, q, &limits)?;
        let (annealed, record) = timed_anneal(&reports, q, defaults, derive_seed(seed, STREAM_ANNEAL, i as u64))?;
        let gap = annealed.metaconflict - oracle.metaconflict;
        out.push(OracleInstance {
            index: i,
            seed: inst_seed,
            anneal_metaconflict: annealed.metaconflict,
            oracle_metaconflict: oracle.metaconflict,
            gap,
            matched: gap <= MATCH_TOLERANCE,
            converged: record.converged,
        });
    }
    let gaps: Vec<f64> = out.iter().map(|o| o.gap).collect();
    Ok(OracleReport {
        n,
        q,
        seed,
        match_rate: out.iter().filter(|o| o.matched).count() as f64 / out.len() as f64,
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        median_gap: median(&gaps),
        instances: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub frame_size: usize,
    pub count: usize,
    pub events: usize,
    /// Probability that a report ignores its event and gets a random focus.
    pub noise: f64,
    pub seed: u64,
    pub support_lo: f64,
    pub support_hi: f64,
}

impl CorpusConfig {
    pub fn new(frame_size: usize, count: usize, events: usize, seed: u64) -> Self {
        Self {
            frame_size,
            count,
            events,
            noise: 0.0,
            seed,
            support_lo: 0.3,
            support_hi: 0.9,
        }
    }
}

/// Source tag prefix carrying the ground-truth event of corpus reports.
pub const EVENT_SOURCE_PREFIX: &str = "synthetic/event-";

/// Ground-truth event encoded in a corpus report's source tag.
pub fn ground_truth_event(r: &Report) -> Option<usize> {
    r.source.strip_prefix(EVENT_SOURCE_PREFIX)?.parse().ok()
}

/// Splits the frame into `events` disjoint label blocks (leftover labels
/// join the last block). Report `i` belongs to event `i mod events`; its
/// focus is the block's first label plus a random part of the rest of the
/// block, so reports of one event never conflict and reports of different
/// events always do. Noisy reports get a uniform nonempty proper subset.
pub fn cmd_gen_corpus(cfg: &CorpusConfig) -> Result<Vec<Report>> {
    if cfg.events == 0 || cfg.events > cfg.frame_size {
        return Err(Error::InvalidParameter(format!(
            "events = {} must lie in 1..={}",
            cfg.events, cfg.frame_size
        )));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidParameter(format!("noise = {} outside [0, 1]", cfg.noise)));
    }
    if !(cfg.support_lo > 0.0 && cfg.support_lo <= cfg.support_hi && cfg.support_hi < 1.0) {
        return Err(Error::InvalidParameter(
            "support range must satisfy 0 < lo ≤ hi < 1".into(),
        ));
    }
    let frame = Frame::shared((0..cfg.frame_size).map(|i| format!("t{i}")))?;
    let full = frame.full().bits();
    if full == 1 && cfg.count > 0 {
        return Err(Error::InvalidParameter("frame of size 1 admits no proper focus".into()));
    }
    let width = cfg.frame_size / cfg.events;
    let block = |e: usize| -> (usize, usize) {
        let start = e * width;
        let end = if e + 1 == cfg.events {
            cfg.frame_size
        } else {
            start + width
        };
        (start, end)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let digits = cfg.count.saturating_sub(1).to_string().len().max(5);
    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let event = i % cfg.events;
        let noisy = cfg.noise > 0.0 && rng.random_bool(cfg.noise);
        let mut focus = if noisy {
            rng.random_range(1..full)
        } else {
            let (start, end) = block(event);
            let mut bits = 1u64 << start;
            for l in start + 1..end {
                if rng.random_bool(0.5) {
                    bits |= 1u64 << l;
                }
            }
            bits
        };
        if focus == full {
            // Only possible with a single event covering the whole frame.
            focus &= !(1u64 << (cfg.frame_size - 1));
        }
        let s = rng.random_range(cfg.support_lo..=cfg.support_hi);
        let m = SimpleSupport::new(frame.clone(), Subset::from_bits(focus), s)?.to_mass();
        out.push(Report::new(
            format!("c{i:0digits$}"),
            i as f64,
            m,
            format!("{EVENT_SOURCE_PREFIX}{event}"),
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::pairwise_conflict;

    #[test]
    fn corpus_structure() {
        let c = cmd_gen_corpus(&CorpusConfig::new(6, 12, 2, 7)).unwrap();
        assert_eq!(c.len(), 12);
        for a in &c {
            for b in &c {
                let k = pairwise_conflict(&a.mass, &b.mass).unwrap();
                let same = ground_truth_event(a) == ground_truth_event(b);
                assert_eq!(k == 0.0, same, "{} {}", a.id, b.id);
            }
        }
        assert_eq!(c[0].id, "c00000");
        assert_eq!(ground_truth_event(&c[3]), Some(1));
        assert!(cmd_gen_corpus(&CorpusConfig::new(6, 0, 2, 7)).unwrap().is_empty());
        assert!(cmd_gen_corpus(&CorpusConfig::new(2, 3, 3, 7)).is_err());
        assert_eq!(c, cmd_gen_corpus(&CorpusConfig::new(6, 12, 2, 7)).unwrap());
    }

    #[test]
    fn random_instance_shape() {
        let r = random_instance(8, 3, 1).unwrap();
        assert_eq!(r.len(), 8);
        for x in &r {
            let ss = x.mass.as_simple_support().unwrap();
            assert!(!ss.focus().is_empty() && ss.focus() != x.frame().full());
            assert!((0.1..=0.9).contains(&ss.support()));
        }
    }

    #[test]
    fn small_bench() {
        let rep = cmd_bench(&BenchConfig::new(2, 2, 1, 0)).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].n, 3);
        assert_eq!(rep.rows[0].mean_metaconflict, 0.0);
        let rep = cmd_bench(&BenchConfig::new(3, 5, 1, 0)).unwrap();
        assert_eq!(rep.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![7, 15, 31]);
        assert_eq!(rep.ratios.len(), 2);
        assert!(cmd_bench(&BenchConfig::new(1, 3, 1, 0)).is_err());
    }

    #[test]
    fn oracle_limits_enforced() {
        let d = AnnealDefaults::default();
        assert!(matches!(
            cmd_oracle_compare(11, 3, 1, 0, &d),
            Err(Error::InstanceTooLarge(_))
        ));
        let r = cmd_oracle_compare(2, 2, 3, 0, &d).unwrap();
        assert!(r.instances.iter().all(|i| i.gap >= 0.0));
    }
}
