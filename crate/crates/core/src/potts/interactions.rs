use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{pairwise_conflict, same_frame, Report};

/// Largest interaction: the weight of a pairwise conflict of 1 − 1e-12.
pub const MAX_INTERACTION: f64 = 27.631021115928547; // −ln(1e-12)

/// Symmetric, non-negative penalty matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl InteractionMatrix {
    /// Builds from a dense row-major matrix, checking the invariants.
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter("diagonal must be zero".into()));
            }
            for j in 0..i {
                let v = entries[i * n + j];
                if !(v.is_finite() && v >= 0.0) || v != entries[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) must be finite, non-negative and symmetric"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// Same matrix multiplied by a non-negative factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }
}

/// J_ij = −ln(1 − conflict(m_i, m_j)), which is −ln(1 − s_i s_j) for simple
/// supports with disjoint foci and 0 when the foci intersect.
pub fn interactions(reports: &[Report]) -> Result<InteractionMatrix> {
    let n = reports.len();
    if n < 2 {
        return Err(Error::TooFewReports(n));
    }
    let frame = reports[0].frame();
    if reports.iter().any(|r| !same_frame(frame, r.frame())) {
        return Err(Error::FrameMismatch);
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let k = pairwise_conflict(&reports[i].mass, &reports[j].mass)?;
            let w = if k >= 1.0 {
                MAX_INTERACTION
            } else {
                (-(-k).ln_1p()).min(MAX_INTERACTION)
            };
            entries[i * n + j] = w;
            entries[j * n + i] = w;
        }
    }
    Ok(InteractionMatrix { n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{weight_of_conflict, Frame, MassFunction, SimpleSupport};
    use approx::assert_abs_diff_eq;

    #[test]
    fn simple_support_entries_follow_weight_of_conflict() {
        let f = Frame::shared(["a", "b", "c"]).unwrap();
        let supports = [
            SimpleSupport::new(f.clone(), f.subset(&["a"]).unwrap(), 0.5).unwrap(),
            SimpleSupport::new(f.clone(), f.subset(&["b"]).unwrap(), 0.5).unwrap(),
            SimpleSupport::new(f.clone(), f.subset(&["a", "c"]).unwrap(), 0.8).unwrap(),
        ];
        let reports: Vec<Report> = supports
            .iter()
            .enumerate()
            .map(|(i, s)| Report::new(i.to_string(), 0.0, s.to_mass(), "").unwrap())
            .collect();
        let j = interactions(&reports).unwrap();
        assert_abs_diff_eq!(j.get(0, 1), 0.287682072451781, epsilon = 1e-12);
        assert_eq!(j.get(0, 2), 0.0);
        for a in 0..3 {
            assert_eq!(j.get(a, a), 0.0);
            for b in 0..3 {
                assert_eq!(j.get(a, b), j.get(b, a));
                assert_abs_diff_eq!(
                    j.get(a, b),
                    if a == b {
                        0.0
                    } else {
                        weight_of_conflict(&supports[a], &supports[b]).unwrap()
                    },
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn total_conflict_is_clamped() {
        let f = Frame::shared(["a", "b"]).unwrap();
        let ca = MassFunction::categorical(f.clone(), f.subset(&["a"]).unwrap()).unwrap();
        let cb = MassFunction::categorical(f.clone(), f.subset(&["b"]).unwrap()).unwrap();
        let reports = vec![
            Report::new("a", 0.0, ca, "").unwrap(),
            Report::new("b", 0.0, cb, "").unwrap(),
        ];
        let j = interactions(&reports).unwrap();
        assert_eq!(j.get(0, 1), MAX_INTERACTION);
        assert_abs_diff_eq!(MAX_INTERACTION, -(1e-12f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn input_validation() {
        let f = Frame::shared(["a", "b"]).unwrap();
        let g = Frame::shared(["x", "y"]).unwrap();
        let one = vec![Report::new("a", 0.0, MassFunction::vacuous(f.clone()), "").unwrap()];
        assert!(matches!(interactions(&one), Err(Error::TooFewReports(1))));
        let mixed = vec![
            Report::new("a", 0.0, MassFunction::vacuous(f), "").unwrap(),
            Report::new("b", 0.0, MassFunction::vacuous(g), "").unwrap(),
        ];
        assert!(matches!(interactions(&mixed), Err(Error::FrameMismatch)));
        assert!(InteractionMatrix::from_dense(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(InteractionMatrix::from_dense(2, vec![1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(InteractionMatrix::from_dense(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
    }
}
