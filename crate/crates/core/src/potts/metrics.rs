use serde::{Deserialize, Serialize};

use super::Partition;

/// One clustering run, as fed to [`performance_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub metaconflict: f64,
    pub clusters: usize,
    pub evidence: usize,
    pub runtime_ms: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl RunRecord {
    pub fn from_partition(p: &Partition, runtime_ms: f64, sweeps: usize, converged: bool) -> Self {
        Self {
            metaconflict: p.metaconflict,
            clusters: p.cluster_count(),
            evidence: p.len(),
            runtime_ms,
            sweeps,
            converged,
        }
    }

    /// Mcf / q.
    pub fn per_cluster(&self) -> f64 {
        self.metaconflict / self.clusters as f64
    }

    /// (Mcf / q) / (n / q) = Mcf / n.
    pub fn per_evidence(&self) -> f64 {
        self.metaconflict / self.evidence as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub runs: usize,
    pub mean_metaconflict: f64,
    pub median_metaconflict: f64,
    pub mean_per_cluster: f64,
    pub median_per_cluster: f64,
    pub mean_per_evidence: f64,
    pub median_per_evidence: f64,
    /// Fraction of runs with metaconflict exactly 0.
    pub zero_fraction: f64,
    pub converged_fraction: f64,
    pub mean_runtime_ms: f64,
    pub median_runtime_ms: f64,
    pub max_runtime_ms: f64,
    pub mean_sweeps: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregates runs; returns `None` for an empty slice.
pub fn performance_report(runs: &[RunRecord]) -> Option<PerformanceReport> {
    if runs.is_empty() {
        return None;
    }
    let collect = |f: fn(&RunRecord) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let mcf = collect(|r| r.metaconflict);
    let per_cluster = collect(RunRecord::per_cluster);
    let per_evidence = collect(RunRecord::per_evidence);
    let runtime = collect(|r| r.runtime_ms);
    let sweeps = collect(|r| r.sweeps as f64);
    let count = runs.len() as f64;
    Some(PerformanceReport {
        runs: runs.len(),
        mean_metaconflict: mean(&mcf),
        median_metaconflict: median(&mcf),
        mean_per_cluster: mean(&per_cluster),
        median_per_cluster: median(&per_cluster),
        mean_per_evidence: mean(&per_evidence),
        median_per_evidence: median(&per_evidence),
        zero_fraction: mcf.iter().filter(|&&m| m == 0.0).count() as f64 / count,
        converged_fraction: runs.iter().filter(|r| r.converged).count() as f64 / count,
        mean_runtime_ms: mean(&runtime),
        median_runtime_ms: median(&runtime),
        max_runtime_ms: runtime.iter().copied().fold(0.0, f64::max),
        mean_sweeps: mean(&sweeps),
    })
}
