//! Front gates of the pipeline: the summarization filter applied on ingestion
//! and the uncertainty ranking that selects the reports admitted to clustering.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{MassFunction, Report};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub p0: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { p0: 0.01 }
    }
}

impl FilterConfig {
    pub fn new(p0: f64) -> Result<Self> {
        let cfg = Self { p0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p0 > 0.0 && self.p0 < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("p0 = {} must lie in (0, 1)", self.p0)))
        }
    }

    /// Upper bound on the focal count of any summarized mass function:
    /// floor(1/p0) elements at or above p0, plus Θ.
    pub fn focal_bound(&self) -> usize {
        (1.0 / self.p0).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub capacity: usize,
    /// Per-second inflation of |A| in the nonspecificity term; 0 disables aging.
    pub aging_rate: f64,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            capacity: 256,
            aging_rate: 0.0,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidParameter("ranking capacity must be at least 1".into()));
        }
        if !(self.aging_rate.is_finite() && self.aging_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "aging rate {} must be non-negative",
                self.aging_rate
            )));
        }
        Ok(())
    }
}

/// Moves the mass of every focal element other than Θ that falls below p0
/// onto Θ.
pub fn summarize(m: &MassFunction, cfg: &FilterConfig) -> MassFunction {
    let full = m.frame().full();
    let mut moved = 0.0;
    let mut kept = Vec::with_capacity(m.len());
    for &(set, mass) in m.focal() {
        if set != full && mass < cfg.p0 {
            moved += mass;
        } else {
            kept.push((set, mass));
        }
    }
    if moved == 0.0 {
        return m.clone();
    }
    match kept.last_mut() {
        // Θ has the largest bit pattern, so it is last when present
        Some((set, mass)) if *set == full => *mass += moved,
        _ => kept.push((full, moved)),
    }
    MassFunction::from_sorted_unchecked(m.frame().clone(), kept)
}

/// Total uncertainty: Shannon entropy plus Hartley nonspecificity,
/// −Σ m(A) ln m(A) + Σ m(A) ln|A|.
pub fn total_uncertainty(m: &MassFunction) -> f64 {
    uncertainty_with_inflation(m, 1.0)
}

fn uncertainty_with_inflation(m: &MassFunction, inflation: f64) -> f64 {
    m.focal()
        .iter()
        .map(|&(set, mass)| {
            let cardinality = f64::from(set.cardinality()) * inflation;
            -mass * mass.ln() + mass * cardinality.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Total uncertainty with |A| inflated by (1 + aging_rate · age) in the
/// nonspecificity term, so older reports rank as less informative.
pub fn aged_uncertainty(r: &Report, now: f64, cfg: &RankingConfig) -> Result<f64> {
    let age = now - r.timestamp;
    if age < 0.0 {
        return Err(Error::NegativeAge);
    }
    Ok(uncertainty_with_inflation(&r.mass, 1.0 + cfg.aging_rate * age))
}

/// Keeps the `capacity` reports with the smallest aged uncertainty, sorted
/// ascending by score; ties prefer newer reports, then smaller ids.
///
/// Reports stamped after `now` are scored at age zero.
pub fn rank_select(reports: &[Report], now: f64, cfg: &RankingConfig) -> Vec<Report> {
    let mut scored: Vec<(f64, &Report)> = reports
        .iter()
        .map(|r| {
            let at = now.max(r.timestamp);
            let score = aged_uncertainty(r, at, cfg).unwrap_or(f64::INFINITY);
            (score, r)
        })
        .collect();
    scored.sort_by(|(sa, ra), (sb, rb)| {
        sa.total_cmp(sb)
            .then_with(|| rb.timestamp.total_cmp(&ra.timestamp))
            .then_with(|| ra.id.cmp(&rb.id))
            .then(Ordering::Equal)
    });
    scored.into_iter().take(cfg.capacity).map(|(_, r)| r.clone()).collect()
}
