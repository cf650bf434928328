use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potts::{default_alpha, AnnealParams};
use crate::triage::{FilterConfig, RankingConfig};

/// Annealing parameters shared by every clustering run; the cluster count
/// and per-run seed are filled in per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealDefaults {
    pub gamma: f64,
    /// `None` selects the per-K default.
    pub alpha: Option<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub inner_tol: f64,
    pub saturation: f64,
    pub seed: u64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for AnnealDefaults {
    fn default() -> Self {
        let p = AnnealParams::new(1, 0);
        Self {
            gamma: p.gamma,
            alpha: None,
            epsilon: p.epsilon,
            tau: p.tau,
            inner_tol: p.inner_tol,
            saturation: p.saturation,
            seed: p.seed,
            max_outer: p.max_outer,
            max_inner: p.max_inner,
        }
    }
}

impl AnnealDefaults {
    pub fn params(&self, cluster_count: usize, seed: u64) -> AnnealParams {
        AnnealParams {
            cluster_count,
            gamma: self.gamma,
            alpha: self.alpha.unwrap_or_else(|| default_alpha(cluster_count)),
            epsilon: self.epsilon,
            tau: self.tau,
            inner_tol: self.inner_tol,
            saturation: self.saturation,
            seed,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub ranking: RankingConfig,
    pub anneal: AnnealDefaults,
    /// Per-subset conflict threshold for adoption, adaptation and rejection.
    pub conflict_threshold: f64,
    pub proto_count: usize,
    pub initial_q: usize,
    /// Ingested reports between automatic epochs.
    pub epoch_every: usize,
}

impl PipelineConfig {
    pub fn new(conflict_threshold: f64) -> Self {
        Self {
            filter: FilterConfig::default(),
            ranking: RankingConfig::default(),
            anneal: AnnealDefaults::default(),
            conflict_threshold,
            proto_count: 3,
            initial_q: 2,
            epoch_every: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.ranking.validate()?;
        self.anneal.params(self.initial_q.max(1), 0).validate()?;
        if !(self.conflict_threshold > 0.0 && self.conflict_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "conflict_threshold = {} must lie in (0, 1)",
                self.conflict_threshold
            )));
        }
        if self.proto_count == 0 {
            return Err(Error::InvalidParameter("proto_count must be at least 1".into()));
        }
        if self.initial_q < 2 {
            return Err(Error::InvalidParameter("initial_q must be at least 2".into()));
        }
        if self.epoch_every == 0 {
            return Err(Error::InvalidParameter("epoch_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Flat key/value form of [`PipelineConfig`], as read from a config file.
/// Absent keys keep their defaults; `conflict_threshold` is required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub p0: Option<f64>,
    pub db2_capacity: Option<usize>,
    pub aging_rate: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub inner_tol: Option<f64>,
    pub saturation: Option<f64>,
    pub seed: Option<u64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub conflict_threshold: Option<f64>,
    pub proto_count: Option<usize>,
    pub initial_q: Option<usize>,
    pub epoch_every: Option<usize>,
}

impl FlatConfig {
    /// Entries present in `other` override those in `self`.
    pub fn merge(self, other: FlatConfig) -> FlatConfig {
        macro_rules! pick {
            ($($f:ident),*) => { FlatConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            p0,
            db2_capacity,
            aging_rate,
            gamma,
            alpha,
            epsilon,
            tau,
            inner_tol,
            saturation,
            seed,
            max_outer,
            max_inner,
            conflict_threshold,
            proto_count,
            initial_q,
            epoch_every
        )
    }

    pub fn resolve(&self) -> Result<PipelineConfig> {
        let threshold = self
            .conflict_threshold
            .ok_or_else(|| Error::InvalidParameter("conflict_threshold is required".into()))?;
        let mut cfg = PipelineConfig::new(threshold);
        let a = &mut cfg.anneal;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(cfg.filter.p0, self.p0);
        set!(cfg.ranking.capacity, self.db2_capacity);
        set!(cfg.ranking.aging_rate, self.aging_rate);
        set!(a.gamma, self.gamma);
        a.alpha = self.alpha.or(a.alpha);
        set!(a.epsilon, self.epsilon);
        set!(a.tau, self.tau);
        set!(a.inner_tol, self.inner_tol);
        set!(a.saturation, self.saturation);
        set!(a.seed, self.seed);
        set!(a.max_outer, self.max_outer);
        set!(a.max_inner, self.max_inner);
        set!(cfg.proto_count, self.proto_count);
        set!(cfg.initial_q, self.initial_q);
        set!(cfg.epoch_every, self.epoch_every);
        cfg.validate()?;
        Ok(cfg)
    }
}
