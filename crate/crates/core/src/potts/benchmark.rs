//! The all-subsets benchmark: one simple-support report per nonempty subset
//! of Θ = {1..K}, N = 2^K − 1 reports to be split into K clusters. Assigning
//! each report to the cluster of any element of its focus gives metaconflict
//! zero, so the optimum is known.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{Frame, MassFunction, Report, Subset};

pub const MAX_BENCHMARK_K: usize = 16;

/// How support values of the benchmark reports are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SupportMode {
    Fixed(f64),
    /// Uniform on [lo, hi], drawn from ChaCha8 seeded with `seed`.
    Range {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl Default for SupportMode {
    fn default() -> Self {
        SupportMode::Range {
            lo: 0.1,
            hi: 0.9,
            seed: 0,
        }
    }
}

impl SupportMode {
    fn validate(&self) -> Result<()> {
        let ok = |s: f64| s > 0.0 && s < 1.0;
        match *self {
            SupportMode::Fixed(s) if ok(s) => Ok(()),
            SupportMode::Range { lo, hi, .. } if ok(lo) && ok(hi) && lo <= hi => Ok(()),
            other => Err(Error::InvalidParameter(format!("invalid support mode {other:?}"))),
        }
    }

    /// Same mode with the range seed replaced.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            SupportMode::Range { lo, hi, .. } => SupportMode::Range { lo, hi, seed },
            fixed => fixed,
        }
    }
}

/// Reports are ordered by the bit pattern of their focus; the report focused
/// on Θ itself is vacuous.
pub fn generate_benchmark(k: usize, support: SupportMode) -> Result<Vec<Report>> {
    if !(1..=MAX_BENCHMARK_K).contains(&k) {
        return Err(Error::KOutOfRange(k));
    }
    support.validate()?;
    let frame = Frame::shared((1..=k).map(|i| i.to_string()))?;
    let full = frame.full();
    let mut rng = match support {
        SupportMode::Range { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SupportMode::Fixed(_) => None,
    };
    let width = ((1u64 << k) - 1).to_string().len();
    let mut reports = Vec::with_capacity((1 << k) - 1);
    for bits in 1..(1u64 << k) {
        let focus = Subset::from_bits(bits);
        let s = match (support, rng.as_mut()) {
            (SupportMode::Range { lo, hi, .. }, Some(rng)) => lo + (hi - lo) * rng.random::<f64>(),
            (SupportMode::Fixed(s), _) => s,
            _ => unreachable!(),
        };
        let mass = if focus == full {
            MassFunction::vacuous(frame.clone())
        } else {
            MassFunction::new(frame.clone(), [(focus, s), (full, 1.0 - s)])?
        };
        reports.push(Report::new(format!("s{bits:0width$}"), 0.0, mass, "benchmark")?);
    }
    Ok(reports)
}

/// Zero-metaconflict assignment for `generate_benchmark(k, _)`: each report
/// goes to the cluster of the lowest element of its focus.
pub fn benchmark_witness(k: usize) -> Vec<usize> {
    (1..(1u64 << k)).map(|bits| bits.trailing_zeros() as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potts::{brute_force_partition, OracleLimits, Partition};

    #[test]
    fn sizes_and_foci() {
        let two = generate_benchmark(2, SupportMode::Fixed(0.5)).unwrap();
        assert_eq!(two.len(), 3);
        let f = two[0].frame().clone();
        assert_eq!(two[0].mass.focal()[0].0, f.subset(&["1"]).unwrap());
        assert_eq!(two[1].mass.focal()[0].0, f.subset(&["2"]).unwrap());
        assert!(two[2].mass.is_vacuous());

        let one = generate_benchmark(1, SupportMode::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].mass.is_vacuous());

        assert!(matches!(
            generate_benchmark(0, SupportMode::default()),
            Err(Error::KOutOfRange(0))
        ));
        assert!(matches!(
            generate_benchmark(17, SupportMode::default()),
            Err(Error::KOutOfRange(17))
        ));
        assert!(generate_benchmark(3, SupportMode::Fixed(1.0)).is_err());
    }

    #[test]
    fn range_supports_are_seeded() {
        let a = generate_benchmark(3, SupportMode::default().reseeded(5)).unwrap();
        let b = generate_benchmark(3, SupportMode::default().reseeded(5)).unwrap();
        let c = generate_benchmark(3, SupportMode::default().reseeded(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for r in &a[..6] {
            let s = r.mass.as_simple_support().unwrap().support();
            assert!((0.1..=0.9).contains(&s));
        }
    }

    #[test]
    fn witness_has_zero_metaconflict() {
        for k in 1..=6 {
            let reports = generate_benchmark(k, SupportMode::default().reseeded(k as u64)).unwrap();
            let p = Partition::evaluate(&reports, benchmark_witness(k), k).unwrap();
            assert_eq!(p.metaconflict, 0.0, "K={k}");
        }
    }

    #[test]
    fn oracle_confirms_zero_minimum_for_k3() {
        // K=4 has 15 reports, beyond the oracle cap; K=3 (7 reports) is exhaustive.
        let reports = generate_benchmark(3, SupportMode::default()).unwrap();
        let p = brute_force_partition(&reports, 3, &OracleLimits::default()).unwrap();
        assert_eq!(p.metaconflict, 0.0);
    }
}
