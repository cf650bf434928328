//! Streaming orchestration: filter, store, classify and route incoming
//! reports while clustering epochs periodically refresh the prototype table.

mod config;
mod fusion;
mod snapshot;

use std::collections::HashMap;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{same_frame, Report};
use crate::potts::{anneal, interactions, AnnealParams, Annealed, InteractionMatrix, Partition};
use crate::prototype::{classify, extract_prototypes, ClassificationResult, PrototypeTable, Verdict};
use crate::seed::derive_seed;
use crate::triage::{rank_select, summarize};

pub use config::{AnnealDefaults, FlatConfig, PipelineConfig};
pub use fusion::{fuse_subset, FusionStub};
pub use snapshot::{restore, snapshot, SNAPSHOT_SCHEMA, SNAPSHOT_VERSION};

/// Where a stored report currently goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    /// No prototype table exists yet.
    Deferred,
    /// Position in the current prototype table (and fusion stub list).
    Subset(usize),
    /// Too conflicting with every subset.
    Rejected,
}

impl From<Verdict> for Routing {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Assigned(j) => Routing::Subset(j),
            Verdict::Rejected => Routing::Rejected,
        }
    }
}

/// Which of the two epoch clusterings was adopted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adopted {
    /// The run at the current cluster count q.
    Current,
    /// The run at q − 1.
    Reduced,
}

/// Threshold rule choosing between the clusterings at q and q − 1 and the
/// cluster count for the next epoch. `max_reduced` is `None` when no run at
/// q − 1 took place.
///
/// * every subset at q − 1 strictly below threshold: adopt it, next q is q − 1;
/// * otherwise some subset at q above threshold: adopt q now, grow to q + 1;
/// * otherwise adopt q and keep it.
pub fn adapt_cluster_count(max_current: f64, max_reduced: Option<f64>, threshold: f64, q: usize) -> (Adopted, usize) {
    match max_reduced {
        Some(c2) if c2 < threshold => (Adopted::Reduced, q - 1),
        _ if max_current > threshold => (Adopted::Current, q + 1),
        _ => (Adopted::Current, q),
    }
}

/// Something that can cluster an interaction matrix. The mean-field
/// annealer is the default; tests inject slower or scripted ones.
pub trait Clusterer: Send + Sync {
    fn cluster(&self, j: &InteractionMatrix, params: &AnnealParams) -> Result<Annealed>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MeanField;

impl Clusterer for MeanField {
    fn cluster(&self, j: &InteractionMatrix, params: &AnnealParams) -> Result<Annealed> {
        anneal(j, params)
    }
}

/// Result of one clustering run inside an epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRun {
    pub partition: Partition,
    pub converged: bool,
    pub outer_steps: usize,
    pub inner_steps: usize,
}

/// Frozen inputs of an epoch; running it needs no access to the state, so
/// ingestion can continue meanwhile.
#[derive(Debug, Clone)]
pub struct EpochJob {
    pub epoch: u64,
    pub q: usize,
    pub db2: Vec<Report>,
    pub current: AnnealParams,
    pub reduced: Option<AnnealParams>,
    pub threshold: f64,
    pub proto_count: usize,
}

/// Output of [`EpochJob::run`], applied with [`PipelineState::apply_epoch`].
#[derive(Debug, Clone)]
pub struct EpochResult {
    pub epoch: u64,
    pub q: usize,
    pub db2_ids: Vec<String>,
    pub current: ClusteringRun,
    pub reduced: Option<ClusteringRun>,
    pub adopted: Adopted,
    pub q_next: usize,
    /// `None` when the adopted run did not converge.
    pub table: Option<PrototypeTable>,
}

impl EpochResult {
    pub fn adopted_run(&self) -> &ClusteringRun {
        match self.adopted {
            Adopted::Current => &self.current,
            Adopted::Reduced => self.reduced.as_ref().expect("reduced run present"),
        }
    }
}

impl EpochJob {
    pub fn run(&self) -> Result<EpochResult> {
        self.run_with(&MeanField)
    }

    /// Runs both clusterings concurrently, adapts q and extracts prototypes.
    pub fn run_with<C: Clusterer + ?Sized>(&self, clusterer: &C) -> Result<EpochResult> {
        let j = interactions(&self.db2)?;
        let (current, reduced) = thread::scope(|s| {
            let reduced = self.reduced.as_ref().map(|p| s.spawn(|| clusterer.cluster(&j, p)));
            let current = clusterer.cluster(&j, &self.current);
            let reduced = reduced.map(|h| h.join().expect("clustering thread panicked"));
            (current, reduced)
        });
        let current = self.evaluate(current?, self.q)?;
        let reduced = match reduced {
            Some(r) => Some(self.evaluate(r?, self.q - 1)?),
            None => None,
        };
        let (adopted, q_next) = adapt_cluster_count(
            current.partition.max_conflict(),
            reduced.as_ref().map(|r| r.partition.max_conflict()),
            self.threshold,
            self.q,
        );
        let mut result = EpochResult {
            epoch: self.epoch,
            q: self.q,
            db2_ids: self.db2.iter().map(|r| r.id.clone()).collect(),
            current,
            reduced,
            adopted,
            q_next,
            table: None,
        };
        let run = result.adopted_run();
        if run.converged {
            result.table = Some(extract_prototypes(
                &run.partition,
                &self.db2,
                self.proto_count,
                self.threshold,
            )?);
        } else {
            result.q_next = self.q;
        }
        Ok(result)
    }

    fn evaluate(&self, a: Annealed, k: usize) -> Result<ClusteringRun> {
        Ok(ClusteringRun {
            converged: a.converged,
            outer_steps: a.spins.outer_steps,
            inner_steps: a.spins.inner_steps,
            partition: Partition::evaluate(&self.db2, a.assignment, k)?,
        })
    }
}

/// An epoch running on its own thread.
pub struct BackgroundEpoch {
    handle: JoinHandle<Result<EpochResult>>,
}

impl BackgroundEpoch {
    pub fn is_finished(&self) -> bool {
        self.handle.is_finished()
    }

    pub fn join(self) -> Result<EpochResult> {
        self.handle.join().expect("epoch thread panicked")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub id: String,
    pub routing: Routing,
    /// `None` while no table exists.
    pub classification: Option<ClassificationResult>,
    /// Enough reports arrived since the last epoch to run another.
    pub epoch_due: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochOutcome {
    pub epoch: u64,
    pub q: usize,
    pub q_next: usize,
    pub adopted: Adopted,
    pub db2_size: usize,
    /// Largest subset conflict at q and, when run, at q − 1.
    pub max_conflicts: (f64, Option<f64>),
    /// Metaconflict of the adopted partition.
    pub metaconflict: f64,
    /// False when the adopted clustering did not converge; the previous
    /// table and routing were kept.
    pub converged: bool,
    pub table_clusters: usize,
    /// Stored reports outside DB2 that were re-run through the classifier.
    pub reclassified: usize,
}

/// Adopted clustering of the last successful epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastClustering {
    pub report_ids: Vec<String>,
    pub partition: Partition,
}

/// Complete pipeline state. Everything is serializable; see [`snapshot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub config: PipelineConfig,
    /// DB1: every accepted report after filtering, in arrival order.
    pub db1: Vec<Report>,
    /// Routing of each DB1 entry, aligned with `db1`.
    pub routing: Vec<Routing>,
    /// DB2: ids of the reports selected for the last epoch.
    pub db2: Vec<String>,
    pub q: usize,
    pub table: Option<Arc<PrototypeTable>>,
    /// One stub per table cluster.
    pub fusion: Vec<FusionStub>,
    /// Number of epochs applied so far.
    pub epoch: u64,
    pub last_clustering: Option<LastClustering>,
    pub since_epoch: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PipelineState {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            q: config.initial_q,
            config,
            db1: Vec::new(),
            routing: Vec::new(),
            db2: Vec::new(),
            table: None,
            fusion: Vec::new(),
            epoch: 0,
            last_clustering: None,
            since_epoch: 0,
            index: HashMap::new(),
        })
    }

    pub(crate) fn rebuild_index(&mut self) -> Result<()> {
        if self.routing.len() != self.db1.len() {
            return Err(Error::InvalidParameter("routing does not match DB1".into()));
        }
        self.index.clear();
        for (i, r) in self.db1.iter().enumerate() {
            if self.index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateReportId(r.id.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.db1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.db1.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<(&Report, Routing)> {
        self.index.get(id).map(|&i| (&self.db1[i], self.routing[i]))
    }

    pub fn epoch_due(&self) -> bool {
        self.since_epoch >= self.config.epoch_every
    }

    /// Filters, stores and routes one report. On error the state is unchanged.
    pub fn ingest(&mut self, report: Report) -> Result<IngestOutcome> {
        if self.index.contains_key(&report.id) {
            return Err(Error::DuplicateReportId(report.id));
        }
        if let Some(first) = self.db1.first() {
            if !same_frame(first.frame(), report.frame()) {
                return Err(Error::FrameMismatch);
            }
        }
        let filtered = report.with_mass(summarize(&report.mass, &self.config.filter));
        let classification = match &self.table {
            Some(t) => Some(classify(&filtered, t)?),
            None => None,
        };
        let routing = classification.as_ref().map_or(Routing::Deferred, |c| c.verdict.into());
        if let Routing::Subset(j) = routing {
            self.fusion[j].absorb(&filtered)?;
        }
        self.index.insert(filtered.id.clone(), self.db1.len());
        let id = filtered.id.clone();
        self.db1.push(filtered);
        self.routing.push(routing);
        self.since_epoch += 1;
        Ok(IngestOutcome {
            id,
            routing,
            classification,
            epoch_due: self.epoch_due(),
        })
    }

    /// Derived seed for clustering run `run` of the upcoming epoch.
    fn run_seed(&self, run: u64) -> u64 {
        derive_seed(self.config.anneal.seed, self.epoch, run)
    }

    /// Selects DB2 and freezes the inputs of the next epoch.
    pub fn prepare_epoch(&self) -> Result<EpochJob> {
        if self.db1.len() < 2 {
            return Err(Error::TooFewReports(self.db1.len()));
        }
        let now = self.db1.iter().map(|r| r.timestamp).fold(f64::NEG_INFINITY, f64::max);
        let db2 = rank_select(&self.db1, now, &self.config.ranking);
        if db2.len() < 2 {
            return Err(Error::TooFewReports(db2.len()));
        }
        let anneal = &self.config.anneal;
        Ok(EpochJob {
            epoch: self.epoch,
            q: self.q,
            db2,
            current: anneal.params(self.q, self.run_seed(0)),
            reduced: (self.q >= 2).then(|| anneal.params(self.q - 1, self.run_seed(1))),
            threshold: self.config.conflict_threshold,
            proto_count: self.config.proto_count,
        })
    }

    /// Starts an epoch on a background thread.
    pub fn spawn_epoch<C: Clusterer + 'static>(&self, clusterer: C) -> Result<BackgroundEpoch> {
        let job = self.prepare_epoch()?;
        Ok(BackgroundEpoch {
            handle: thread::spawn(move || job.run_with(&clusterer)),
        })
    }

    /// Installs an epoch result: new table, DB2, rerouting of DB1 and fresh
    /// fusion stubs. Reports ingested while the epoch ran are included.
    pub fn apply_epoch(&mut self, result: EpochResult) -> Result<EpochOutcome> {
        if result.epoch != self.epoch {
            return Err(Error::InvalidParameter(format!(
                "epoch result {} does not follow epoch {}",
                result.epoch, self.epoch
            )));
        }
        let run = result.adopted_run();
        let mut outcome = EpochOutcome {
            epoch: result.epoch,
            q: result.q,
            q_next: result.q_next,
            adopted: result.adopted,
            db2_size: result.db2_ids.len(),
            max_conflicts: (
                result.current.partition.max_conflict(),
                result.reduced.as_ref().map(|r| r.partition.max_conflict()),
            ),
            metaconflict: run.partition.metaconflict,
            converged: run.converged,
            table_clusters: self.table.as_ref().map_or(0, |t| t.len()),
            reclassified: 0,
        };
        let Some(table) = result.table.clone() else {
            self.epoch += 1;
            self.since_epoch = 0;
            return Ok(outcome);
        };

        let mut routing = Vec::with_capacity(self.db1.len());
        let db2_pos: HashMap<&str, usize> = result
            .db2_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let assignment = &run.partition.assignment;
        let mut reclassified = 0;
        for r in &self.db1 {
            let by_partition = db2_pos
                .get(r.id.as_str())
                .and_then(|&p| table.position_of(assignment[p]));
            routing.push(match by_partition {
                Some(j) => Routing::Subset(j),
                None => {
                    if !db2_pos.contains_key(r.id.as_str()) {
                        reclassified += 1;
                    }
                    classify(r, &table)?.verdict.into()
                }
            });
        }
        let mut fusion = vec![FusionStub::default(); table.len()];
        for (r, route) in self.db1.iter().zip(&routing) {
            if let Routing::Subset(j) = route {
                fusion[*j].absorb(r)?;
            }
        }

        outcome.table_clusters = table.len();
        outcome.reclassified = reclassified;
        self.last_clustering = Some(LastClustering {
            report_ids: result.db2_ids.clone(),
            partition: run.partition.clone(),
        });
        self.db2 = result.db2_ids;
        self.q = result.q_next;
        self.table = Some(Arc::new(table));
        self.routing = routing;
        self.fusion = fusion;
        self.epoch += 1;
        self.since_epoch = 0;
        Ok(outcome)
    }

    /// Synchronous epoch with the default clusterer.
    pub fn run_epoch(&mut self) -> Result<EpochOutcome> {
        let result = self.prepare_epoch()?.run()?;
        self.apply_epoch(result)
    }

    /// Ingests a report and runs an epoch when one is due.
    pub fn step(&mut self, report: Report) -> Result<(IngestOutcome, Option<EpochOutcome>)> {
        let ingested = self.ingest(report)?;
        let epoch = if ingested.epoch_due && self.db1.len() >= 2 {
            Some(self.run_epoch()?)
        } else {
            None
        };
        Ok((ingested, epoch))
    }
}
