//! Conflict-driven clustering: partition reports into subsets minimizing the
//! metaconflict 1 − Π(1 − c_i) with Potts mean-field annealing.

mod anneal;
mod benchmark;
pub mod eigen;
mod interactions;
mod metrics;
mod oracle;

use serde::{Deserialize, Serialize};

pub use anneal::{anneal, critical_temperature, default_alpha, potts_energy, AnnealParams, Annealed, SpinState};
pub use benchmark::{benchmark_witness, generate_benchmark, SupportMode, MAX_BENCHMARK_K};
pub use interactions::{interactions, InteractionMatrix, MAX_INTERACTION};
pub use metrics::{median, performance_report, PerformanceReport, RunRecord};
pub use oracle::{brute_force_partition, OracleLimits};

use crate::error::{Error, Result};
use crate::evidence::{combine_all, Report};

/// Ceiling applied to a cluster conflict so its weight −ln(1 − c) stays finite.
pub const CONFLICT_CLAMP: f64 = 1.0 - 1e-12;

/// Cumulative combination conflict of one subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetConflict {
    pub conflict: f64,
    /// The subset reached total conflict and `conflict` was clamped.
    pub saturated: bool,
}

/// Conflict c when all reports are combined by Dempster's rule; 0 for empty
/// and singleton sets.
pub fn cluster_conflict<'a, I>(reports: I) -> Result<SubsetConflict>
where
    I: IntoIterator<Item = &'a Report>,
{
    let masses: Vec<_> = reports.into_iter().map(|r| &r.mass).collect();
    if masses.len() < 2 {
        return Ok(SubsetConflict {
            conflict: 0.0,
            saturated: false,
        });
    }
    match combine_all(masses) {
        Ok((_, c)) if c < CONFLICT_CLAMP => Ok(SubsetConflict {
            conflict: c,
            saturated: false,
        }),
        Ok(_) | Err(Error::TotalConflict) => Ok(SubsetConflict {
            conflict: CONFLICT_CLAMP,
            saturated: true,
        }),
        Err(e) => Err(e),
    }
}

/// Mcf = 1 − Π(1 − c_i).
///
/// The product is taken over the conflicts in sorted order, so the value is
/// bit-for-bit independent of cluster labelling.
pub fn metaconflict(cluster_conflicts: &[f64]) -> f64 {
    let mut sorted = cluster_conflicts.to_vec();
    sorted.sort_by(f64::total_cmp);
    1.0 - sorted.iter().map(|c| 1.0 - c).product::<f64>()
}

/// Σ −ln(1 − c_i), the additive form of the metaconflict.
pub fn metaconflict_weight_sum(cluster_conflicts: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &c in cluster_conflicts {
        if c >= 1.0 {
            return Err(Error::InfiniteWeight);
        }
        sum -= (-c).ln_1p();
    }
    Ok(sum)
}

/// Assignment of reports to clusters together with the per-cluster
/// conflicts it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Cluster index of each report, in input order.
    pub assignment: Vec<usize>,
    pub cluster_conflicts: Vec<f64>,
    pub metaconflict: f64,
    /// At least one cluster hit total conflict and was clamped.
    pub saturated: bool,
}

impl Partition {
    /// Evaluates an assignment of `reports` into `cluster_count` clusters.
    pub fn evaluate(reports: &[Report], assignment: Vec<usize>, cluster_count: usize) -> Result<Self> {
        if assignment.len() != reports.len() {
            return Err(Error::InvalidParameter(format!(
                "assignment covers {} reports, expected {}",
                assignment.len(),
                reports.len()
            )));
        }
        if let Some(&bad) = assignment.iter().find(|&&a| a >= cluster_count) {
            return Err(Error::InvalidParameter(format!(
                "cluster index {bad} out of range for {cluster_count} clusters"
            )));
        }
        let mut cluster_conflicts = Vec::with_capacity(cluster_count);
        let mut saturated = false;
        for cluster in 0..cluster_count {
            let members = reports
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == cluster)
                .map(|(r, _)| r);
            let c = cluster_conflict(members)?;
            saturated |= c.saturated;
            cluster_conflicts.push(c.conflict);
        }
        let metaconflict = metaconflict(&cluster_conflicts);
        Ok(Self {
            assignment,
            cluster_conflicts,
            metaconflict,
            saturated,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_conflicts.len()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Report indices of one cluster, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest per-subset conflict; 0 for a partition without clusters.
    pub fn max_conflict(&self) -> f64 {
        self.cluster_conflicts.iter().copied().fold(0.0, f64::max)
    }

    pub fn weight_sum(&self) -> Result<f64> {
        metaconflict_weight_sum(&self.cluster_conflicts)
    }
}
