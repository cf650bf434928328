use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{combine_dempster, MassFunction, Report};
use crate::potts::CONFLICT_CLAMP;

/// Stand-in for a per-subset fusion process: the Dempster combination of
/// everything routed to the subset, with the conflict built up so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionStub {
    pub members: Vec<String>,
    pub fused: Option<MassFunction>,
    /// Running cumulative conflict.
    pub conflict: f64,
    /// A member was totally conflicting with the fused state and left out of
    /// the combination; `conflict` is clamped.
    pub saturated: bool,
}

impl FusionStub {
    pub fn absorb(&mut self, report: &Report) -> Result<()> {
        self.members.push(report.id.clone());
        match &self.fused {
            None => self.fused = Some(report.mass.clone()),
            Some(acc) => match combine_dempster(acc, &report.mass) {
                Ok((next, k)) => {
                    self.conflict = (1.0 - (1.0 - self.conflict) * (1.0 - k)).min(CONFLICT_CLAMP);
                    self.fused = Some(next);
                }
                Err(Error::TotalConflict) => {
                    self.conflict = CONFLICT_CLAMP;
                    self.saturated = true;
                }
                Err(e) => return Err(e),
            },
        }
        Ok(())
    }
}

/// Fuses a subset from scratch.
pub fn fuse_subset<'a, I>(reports: I) -> Result<FusionStub>
where
    I: IntoIterator<Item = &'a Report>,
{
    let mut stub = FusionStub::default();
    for r in reports {
        stub.absorb(r)?;
    }
    if stub.members.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(stub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{Frame, SimpleSupport};
    use approx::assert_abs_diff_eq;

    #[test]
    fn examples() {
        let f = Frame::shared(["a", "b", "c", "d"]).unwrap();
        let mk = |id: &str, focus: &[&str], s: f64| {
            let ss = SimpleSupport::new(f.clone(), f.subset(focus).unwrap(), s).unwrap();
            Report::new(id, 0.0, ss.to_mass(), "").unwrap()
        };
        let a = mk("1", &["a"], 0.6);
        let b = mk("2", &["b"], 0.5);
        let ab = mk("3", &["a", "b"], 0.5);

        let single = fuse_subset([&a]).unwrap();
        assert_eq!(single.fused.as_ref().unwrap(), &a.mass);
        assert_eq!(single.conflict, 0.0);

        let compatible = fuse_subset([&a, &ab]).unwrap();
        assert_eq!(compatible.conflict, 0.0);
        assert_eq!(
            compatible.fused.unwrap(),
            combine_dempster(&a.mass, &ab.mass).unwrap().0
        );

        let pair = fuse_subset([&a, &b]).unwrap();
        assert_abs_diff_eq!(pair.conflict, 0.3, epsilon = 1e-15);
        let m = pair.fused.unwrap();
        assert_abs_diff_eq!(m.mass(f.subset(&["a"]).unwrap()), 3.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mass(f.subset(&["b"]).unwrap()), 2.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mass(f.full()), 2.0 / 7.0, epsilon = 1e-15);

        assert!(matches!(fuse_subset(std::iter::empty()), Err(Error::EmptyInput)));
    }

    #[test]
    fn total_conflict_is_clamped() {
        let f = Frame::shared(["a", "b"]).unwrap();
        let ca = Report::new(
            "a",
            0.0,
            MassFunction::categorical(f.clone(), f.subset(&["a"]).unwrap()).unwrap(),
            "",
        )
        .unwrap();
        let cb = Report::new(
            "b",
            0.0,
            MassFunction::categorical(f.clone(), f.subset(&["b"]).unwrap()).unwrap(),
            "",
        )
        .unwrap();
        let stub = fuse_subset([&ca, &cb]).unwrap();
        assert!(stub.saturated);
        assert_eq!(stub.conflict, CONFLICT_CLAMP);
        assert_eq!(stub.members.len(), 2);
        assert_eq!(stub.fused.unwrap(), ca.mass);
    }
}
