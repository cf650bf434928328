//! Prototype extraction and constant-time classification.
//!
//! After clustering, the evidence that a report does not belong to cluster j
//! is read off the change in that cluster's conflict when the report is added
//! or removed. Every report nominates itself as a prototype of the cluster it
//! fits best; each cluster keeps its most credible nominees and pre-combines
//! them into a single mass function. Classifying a new report then takes one
//! combination per cluster, whatever the size of the history.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{combine_dempster, pairwise_conflict, same_frame, Frame, MassFunction, Report};
use crate::potts::{cluster_conflict, Partition, CONFLICT_CLAMP};

/// Per-cluster evidence m(e ∉ χ_j) against membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipEvidence {
    pub against: Vec<f64>,
}

impl MembershipEvidence {
    /// Cluster with the least evidence against membership (lowest index on ties).
    pub fn best(&self) -> Option<usize> {
        argmin(&self.against)
    }
}

/// Credibility α_j of a report for each cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Credibility {
    pub alpha: Vec<f64>,
}

impl Credibility {
    /// Most credible cluster (lowest index on ties).
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (j, &a) in self.alpha.iter().enumerate() {
            if best.is_none_or(|b| a > self.alpha[b]) {
                best = Some(j);
            }
        }
        best
    }
}

fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v < values[b]) {
            best = Some(j);
        }
    }
    best
}

/// (c_with − c_without) / (1 − c_without), clipped to [0, 1].
///
/// Both membership evidence for clustered reports and the classification
/// rule use this orientation: the numerator is the growth in conflict caused
/// by the report, normalized by the report-free state.
pub fn conflict_increase(with: f64, without: f64) -> f64 {
    let without = without.min(CONFLICT_CLAMP);
    ((with - without) / (1.0 - without)).clamp(0.0, 1.0)
}

/// Cached combination of one cluster's members.
struct ClusterSummary {
    members: Vec<usize>,
    combined: Option<MassFunction>,
    conflict: f64,
}

impl ClusterSummary {
    fn new(members: Vec<usize>, reports: &[Report]) -> Result<Self> {
        let c = cluster_conflict(members.iter().map(|&i| &reports[i]))?;
        let combined = if members.is_empty() || c.saturated {
            None
        } else {
            let mut acc = reports[members[0]].mass.clone();
            for &i in &members[1..] {
                acc = combine_dempster(&acc, &reports[i].mass)?.0;
            }
            Some(acc)
        };
        Ok(Self {
            members,
            combined,
            conflict: c.conflict,
        })
    }

    /// Conflict of this cluster with report `e` added (e is not a member).
    fn conflict_with(&self, e: &MassFunction) -> Result<f64> {
        match &self.combined {
            None if self.members.is_empty() => Ok(0.0),
            None => Ok(CONFLICT_CLAMP),
            Some(m) => {
                let k = pairwise_conflict(m, e)?;
                Ok((1.0 - (1.0 - self.conflict) * (1.0 - k)).min(CONFLICT_CLAMP))
            }
        }
    }

    /// Conflict after removing report `index` (a member).
    fn conflict_without(&self, index: usize, reports: &[Report]) -> Result<f64> {
        let rest = self.members.iter().filter(|&&i| i != index).map(|&i| &reports[i]);
        Ok(cluster_conflict(rest)?.conflict)
    }
}

fn summaries(partition: &Partition, reports: &[Report], clusters: &[usize]) -> Result<Vec<ClusterSummary>> {
    clusters
        .iter()
        .map(|&c| ClusterSummary::new(partition.members(c), reports))
        .collect()
}

fn evidence_for(
    index: usize,
    partition: &Partition,
    reports: &[Report],
    clusters: &[usize],
    summaries: &[ClusterSummary],
) -> Result<MembershipEvidence> {
    let e = &reports[index];
    let own = partition.assignment[index];
    let mut against = Vec::with_capacity(clusters.len());
    for (&cluster, summary) in clusters.iter().zip(summaries) {
        let value = if cluster == own {
            let without = summary.conflict_without(index, reports)?;
            conflict_increase(summary.conflict, without)
        } else {
            conflict_increase(summary.conflict_with(&e.mass)?, summary.conflict)
        };
        against.push(value);
    }
    Ok(MembershipEvidence { against })
}

fn check_partition(partition: &Partition, reports: &[Report]) -> Result<()> {
    if partition.len() != reports.len() {
        return Err(Error::InvalidParameter(format!(
            "partition covers {} reports, store has {}",
            partition.len(),
            reports.len()
        )));
    }
    if let Some(first) = reports.first() {
        if reports.iter().any(|r| !same_frame(first.frame(), r.frame())) {
            return Err(Error::FrameMismatch);
        }
    }
    Ok(())
}

/// m(e ∉ χ_j) for report `index` of `reports` against every cluster of
/// `partition`. For its own cluster the report is taken out; for every other
/// cluster it is added.
pub fn membership_evidence(index: usize, partition: &Partition, reports: &[Report]) -> Result<MembershipEvidence> {
    check_partition(partition, reports)?;
    if index >= reports.len() {
        return Err(Error::InvalidParameter(format!("report index {index} out of range")));
    }
    let clusters: Vec<usize> = (0..partition.cluster_count()).collect();
    let summaries = summaries(partition, reports, &clusters)?;
    evidence_for(index, partition, reports, &clusters, &summaries)
}

/// α_j = Pls_j² / Σ_k Pls_k with Pls_j = 1 − m(e ∉ χ_j).
pub fn credibility(ev: &MembershipEvidence) -> Result<Credibility> {
    let pls: Vec<f64> = ev.against.iter().map(|a| 1.0 - a).collect();
    let total: f64 = pls.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllImplausible);
    }
    Ok(Credibility {
        alpha: pls.iter().map(|p| p * p / total).collect(),
    })
}

/// One cluster of a [`PrototypeTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeCluster {
    /// Cluster label in the partition the table was extracted from.
    pub source_cluster: usize,
    /// Prototype report ids, most credible first.
    pub prototypes: Vec<String>,
    pub combined: MassFunction,
    /// Cumulative conflict c_j of combining the prototypes.
    pub baseline_conflict: f64,
}

/// Everything the classifier needs. Only clusters that received at least
/// one prototype are present; classification indices refer to positions in
/// `clusters`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct PrototypeTable {
    pub frame: Arc<Frame>,
    pub threshold: f64,
    pub proto_count: usize,
    pub clusters: Vec<PrototypeCluster>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    frame: Frame,
    threshold: f64,
    proto_count: usize,
    clusters: Vec<PrototypeCluster>,
}

impl From<PrototypeTable> for TableRepr {
    fn from(t: PrototypeTable) -> Self {
        Self {
            frame: (*t.frame).clone(),
            threshold: t.threshold,
            proto_count: t.proto_count,
            clusters: t.clusters,
        }
    }
}

impl TryFrom<TableRepr> for PrototypeTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        let frame = Arc::new(r.frame);
        if r.clusters.iter().any(|c| !same_frame(&frame, c.combined.frame())) {
            return Err(Error::FrameMismatch);
        }
        if !(r.threshold > 0.0 && r.threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} outside (0, 1]",
                r.threshold
            )));
        }
        if r.clusters.iter().any(|c| !(0.0..1.0).contains(&c.baseline_conflict)) {
            return Err(Error::InvalidParameter("baseline conflict outside [0, 1)".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for id in r.clusters.iter().flat_map(|c| &c.prototypes) {
            if !seen.insert(id) {
                return Err(Error::DuplicateReportId(id.clone()));
            }
        }
        Ok(Self {
            frame,
            threshold: r.threshold,
            proto_count: r.proto_count,
            clusters: r.clusters,
        })
    }
}

impl PrototypeTable {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Table position holding the given partition cluster, if it survived.
    pub fn position_of(&self, source_cluster: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.source_cluster == source_cluster)
    }
}

/// Builds the prototype table of `partition` over `reports`.
///
/// Rule 1: each report is a potential prototype of the cluster with the
/// least evidence against it, which need not be its assigned cluster.
/// Rule 2: each cluster keeps its `proto_count` most credible potential
/// prototypes (ties by id). Only non-empty clusters of the partition are
/// candidates. A prototype whose combination with the earlier ones would be
/// totally conflicting is dropped.
pub fn extract_prototypes(
    partition: &Partition,
    reports: &[Report],
    proto_count: usize,
    threshold: f64,
) -> Result<PrototypeTable> {
    check_partition(partition, reports)?;
    if proto_count == 0 {
        return Err(Error::InvalidParameter("proto_count must be at least 1".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} outside (0, 1]")));
    }
    let clusters: Vec<usize> = (0..partition.cluster_count())
        .filter(|&c| partition.assignment.contains(&c))
        .collect();
    if clusters.is_empty() {
        return Err(Error::DegeneratePartition);
    }
    let frame = reports[0].frame().clone();
    let summaries = summaries(partition, reports, &clusters)?;

    let mut nominees: Vec<Vec<(f64, usize)>> = vec![Vec::new(); clusters.len()];
    for index in 0..reports.len() {
        let ev = evidence_for(index, partition, reports, &clusters, &summaries)?;
        let Some(target) = ev.best() else { continue };
        match credibility(&ev) {
            Ok(cred) => nominees[target].push((cred.alpha[target], index)),
            Err(Error::AllImplausible) => continue,
            Err(e) => return Err(e),
        }
    }

    let mut table_clusters = Vec::new();
    for (slot, mut candidates) in nominees.into_iter().enumerate() {
        candidates.sort_by(|(a, i), (b, j)| b.total_cmp(a).then_with(|| reports[*i].id.cmp(&reports[*j].id)));
        candidates.truncate(proto_count);
        let mut combined: Option<MassFunction> = None;
        let mut kept = 1.0;
        let mut prototypes = Vec::new();
        for (_, index) in candidates {
            let mass = &reports[index].mass;
            match &combined {
                None => combined = Some(mass.clone()),
                Some(acc) => match combine_dempster(acc, mass) {
                    Ok((next, k)) => {
                        kept *= 1.0 - k;
                        combined = Some(next);
                    }
                    Err(Error::TotalConflict) => continue,
                    Err(e) => return Err(e),
                },
            }
            prototypes.push(reports[index].id.clone());
        }
        if let Some(combined) = combined {
            table_clusters.push(PrototypeCluster {
                source_cluster: clusters[slot],
                prototypes,
                combined,
                baseline_conflict: (1.0 - kept).min(CONFLICT_CLAMP),
            });
        }
    }
    Ok(PrototypeTable {
        frame,
        threshold,
        proto_count,
        clusters: table_clusters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Assigned(usize),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub verdict: Verdict,
    pub evidence: MembershipEvidence,
    /// Dempster combinations performed; always the table's cluster count.
    pub combinations_used: usize,
}

/// Classifies `e` against the prototype table using the table's threshold.
pub fn classify(e: &Report, table: &PrototypeTable) -> Result<ClassificationResult> {
    classify_with_threshold(e, table, table.threshold)
}

/// Classification with an explicit rejection threshold.
///
/// For each cluster one combination of `e` with the pre-combined prototypes
/// gives the step conflict k_j; with c_j* = 1 − (1 − c_j)(1 − k_j) the
/// evidence against is (c_j* − c_j)/(1 − c_j). The report is rejected when
/// even the best cluster exceeds `threshold`.
pub fn classify_with_threshold(e: &Report, table: &PrototypeTable, threshold: f64) -> Result<ClassificationResult> {
    if !same_frame(e.frame(), &table.frame) {
        return Err(Error::FrameMismatch);
    }
    if table.clusters.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut against = Vec::with_capacity(table.clusters.len());
    let mut combinations_used = 0;
    for cluster in &table.clusters {
        // The conflict of e ⊕ combined is all the rule needs from the combination.
        let k = pairwise_conflict(&e.mass, &cluster.combined)?;
        combinations_used += 1;
        let with = 1.0 - (1.0 - cluster.baseline_conflict) * (1.0 - k);
        against.push(conflict_increase(with, cluster.baseline_conflict));
    }
    let evidence = MembershipEvidence { against };
    let best = evidence.best().expect("table has clusters");
    let verdict = if evidence.against[best] > threshold {
        Verdict::Rejected
    } else {
        Verdict::Assigned(best)
    };
    Ok(ClassificationResult {
        verdict,
        evidence,
        combinations_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::SimpleSupport;
    use approx::assert_abs_diff_eq;

    fn frame() -> Arc<Frame> {
        Frame::shared(["a", "b", "c", "d"]).unwrap()
    }

    fn simple(f: &Arc<Frame>, id: &str, focus: &[&str], s: f64) -> Report {
        let ss = SimpleSupport::new(f.clone(), f.subset(focus).unwrap(), s).unwrap();
        Report::new(id, 0.0, ss.to_mass(), "").unwrap()
    }

    fn two_cluster_table(f: &Arc<Frame>) -> PrototypeTable {
        let cluster = |label: usize, focus: &str| PrototypeCluster {
            source_cluster: label,
            prototypes: vec![format!("p{label}")],
            combined: simple(f, "x", &[focus], 0.9).mass,
            baseline_conflict: 0.0,
        };
        PrototypeTable {
            frame: f.clone(),
            threshold: 0.5,
            proto_count: 3,
            clusters: vec![cluster(0, "a"), cluster(1, "b")],
        }
    }

    #[test]
    fn conflict_increase_example() {
        assert_abs_diff_eq!(conflict_increase(0.4, 0.2), 0.25, epsilon = 1e-15);
        assert_eq!(conflict_increase(0.2, 0.2), 0.0);
        assert_eq!(conflict_increase(0.1, 0.2), 0.0);
    }

    #[test]
    fn membership_examples() {
        let f = frame();
        let reports = vec![
            simple(&f, "1", &["a"], 0.8),
            simple(&f, "2", &["a", "b"], 0.6),
            simple(&f, "3", &["c"], 0.7),
        ];
        let p = Partition::evaluate(&reports, vec![0, 0, 1], 2).unwrap();
        // singleton cluster: removing the only member changes nothing
        let ev = membership_evidence(2, &p, &reports).unwrap();
        assert_eq!(ev.against[1], 0.0);
        // wholly compatible with its own cluster
        let ev0 = membership_evidence(0, &p, &reports).unwrap();
        assert_eq!(ev0.against[0], 0.0);
        // against cluster 1: adding {a}@0.8 to {c}@0.7 creates conflict 0.56
        assert_abs_diff_eq!(ev0.against[1], 0.56, epsilon = 1e-12);
        for i in 0..3 {
            let ev = membership_evidence(i, &p, &reports).unwrap();
            assert!(ev.against.iter().all(|a| (0.0..=1.0).contains(a)));
        }
    }

    #[test]
    fn membership_of_report_removed_from_conflicting_cluster() {
        let f = frame();
        let reports = vec![simple(&f, "1", &["a"], 0.5), simple(&f, "2", &["b"], 0.5)];
        let p = Partition::evaluate(&reports, vec![0, 0], 1).unwrap();
        let ev = membership_evidence(0, &p, &reports).unwrap();
        // c_j = 0.25, c_j* = 0
        assert_abs_diff_eq!(ev.against[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn credibility_examples() {
        let c = credibility(&MembershipEvidence {
            against: vec![0.0, 0.72],
        })
        .unwrap();
        assert_abs_diff_eq!(c.alpha[0], 0.78125, epsilon = 1e-12);
        assert_abs_diff_eq!(c.alpha[1], 0.06125, epsilon = 1e-12);
        let c = credibility(&MembershipEvidence {
            against: vec![0.4, 0.4],
        })
        .unwrap();
        assert_abs_diff_eq!(c.alpha[0], 0.3, epsilon = 1e-15);
        assert_eq!(c.alpha[0], c.alpha[1]);
        let c = credibility(&MembershipEvidence {
            against: vec![1.0, 0.5],
        })
        .unwrap();
        assert_eq!(c.alpha, vec![0.0, 0.5]);
        assert!(matches!(
            credibility(&MembershipEvidence {
                against: vec![1.0, 1.0]
            }),
            Err(Error::AllImplausible)
        ));
    }

    #[test]
    fn classify_examples() {
        let f = frame();
        let table = two_cluster_table(&f);
        let e = simple(&f, "e", &["a"], 0.8);
        let r = classify(&e, &table).unwrap();
        assert_eq!(r.verdict, Verdict::Assigned(0));
        assert_eq!(r.evidence.against[0], 0.0);
        assert_abs_diff_eq!(r.evidence.against[1], 0.72, epsilon = 1e-12);
        let (_, k) = combine_dempster(&e.mass, &table.clusters[1].combined).unwrap();
        assert_abs_diff_eq!(r.evidence.against[1], k, epsilon = 1e-15);
        assert_eq!(r.combinations_used, 2);

        let far = simple(&f, "far", &["c"], 0.9);
        let r = classify(&far, &table).unwrap();
        assert_eq!(r.verdict, Verdict::Rejected);
        assert_abs_diff_eq!(r.evidence.against[0], 0.81, epsilon = 1e-12);
        assert_abs_diff_eq!(r.evidence.against[1], 0.81, epsilon = 1e-12);
        // threshold 1 can never be strictly exceeded
        assert!(matches!(
            classify_with_threshold(&far, &table, 1.0).unwrap().verdict,
            Verdict::Assigned(_)
        ));

        let vac = Report::new("v", 0.0, MassFunction::vacuous(f.clone()), "").unwrap();
        let r = classify(&vac, &table).unwrap();
        assert_eq!(r.evidence.against, vec![0.0, 0.0]);
        assert_eq!(r.verdict, Verdict::Assigned(0));
    }

    #[test]
    fn classify_errors() {
        let f = frame();
        let mut table = two_cluster_table(&f);
        let other = Frame::shared(["x"]).unwrap();
        let e = Report::new("e", 0.0, MassFunction::vacuous(other), "").unwrap();
        assert!(matches!(classify(&e, &table), Err(Error::FrameMismatch)));
        table.clusters.clear();
        let e = Report::new("e", 0.0, MassFunction::vacuous(f), "").unwrap();
        assert!(matches!(classify(&e, &table), Err(Error::EmptyTable)));
    }

    #[test]
    fn extraction_identity_when_clusters_are_small() {
        let f = frame();
        let reports = vec![
            simple(&f, "1", &["a"], 0.8),
            simple(&f, "2", &["a", "b"], 0.6),
            simple(&f, "3", &["c"], 0.7),
            simple(&f, "4", &["c", "d"], 0.5),
        ];
        let p = Partition::evaluate(&reports, vec![0, 0, 1, 1], 2).unwrap();
        let t = extract_prototypes(&p, &reports, 3, 0.5).unwrap();
        assert_eq!(t.len(), 2);
        for (slot, c) in t.clusters.iter().enumerate() {
            assert_eq!(c.source_cluster, slot);
            let mut ids = c.prototypes.clone();
            ids.sort();
            let members: Vec<String> = p.members(slot).iter().map(|&i| reports[i].id.clone()).collect();
            assert_eq!(ids, members);
            assert_abs_diff_eq!(c.baseline_conflict, p.cluster_conflicts[slot], epsilon = 1e-12);
        }

        let top1 = extract_prototypes(&p, &reports, 1, 0.5).unwrap();
        assert!(top1.clusters.iter().all(|c| c.prototypes.len() == 1));
        // report 1 ({a}@0.8) conflicts harder with cluster 1 than report 2 does
        assert_eq!(top1.clusters[0].prototypes, vec!["1".to_string()]);
    }

    #[test]
    fn misplaced_report_nominates_for_other_cluster() {
        let f = frame();
        let reports = vec![
            simple(&f, "1", &["a"], 0.9),
            simple(&f, "2", &["a"], 0.9),
            simple(&f, "3", &["b"], 0.8),
            // clustered with the {a} reports although it only fits {b}
            simple(&f, "4", &["b"], 0.7),
        ];
        let p = Partition::evaluate(&reports, vec![0, 0, 1, 0], 2).unwrap();
        let t = extract_prototypes(&p, &reports, 3, 0.5).unwrap();
        let b = t.position_of(1).unwrap();
        assert!(t.clusters[b].prototypes.contains(&"4".to_string()));
        let a = t.position_of(0).unwrap();
        assert!(!t.clusters[a].prototypes.contains(&"4".to_string()));
    }

    #[test]
    fn extraction_errors_and_empty_clusters() {
        let f = frame();
        let reports = vec![simple(&f, "1", &["a"], 0.8), simple(&f, "2", &["a", "b"], 0.6)];
        let p = Partition::evaluate(&reports, vec![0, 0], 3).unwrap();
        let t = extract_prototypes(&p, &reports, 2, 0.5).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.clusters[0].source_cluster, 0);
        let empty = Partition::evaluate(&[], vec![], 2).unwrap();
        assert!(matches!(
            extract_prototypes(&empty, &[], 2, 0.5),
            Err(Error::DegeneratePartition)
        ));
    }

    #[test]
    fn table_json_roundtrip_is_byte_identical() {
        let f = frame();
        let table = two_cluster_table(&f);
        let text = serde_json::to_string(&table).unwrap();
        let back: PrototypeTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
