use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::frame::{same_frame, Frame, Subset};
use crate::error::{Error, Result};

/// Allowed deviation of the total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Basic probability assignment over a frame (closed world: no mass on ∅).
///
/// Focal elements are stored sorted by bit pattern, so iteration,
/// serialization and comparison are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    frame: Arc<Frame>,
    focal: Vec<(Subset, f64)>,
}

impl MassFunction {
    /// Validating constructor. Mass on the empty set is an error, never
    /// silently renormalized away.
    pub fn new<I>(frame: Arc<Frame>, assignments: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Subset, f64)>,
    {
        let mut focal: Vec<(Subset, f64)> = Vec::new();
        for (set, mass) in assignments {
            if !frame.contains(set) {
                return Err(Error::FrameMismatch);
            }
            if set.is_empty() {
                return Err(Error::EmptyFocalElement);
            }
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::InvalidMass(mass));
            }
            focal.push((set, mass));
        }
        if focal.is_empty() {
            return Err(Error::EmptyInput);
        }
        focal.sort_by_key(|(s, _)| *s);
        if focal.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateFocalElement);
        }
        let sum: f64 = focal.iter().map(|(_, m)| m).sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassSumOutOfTolerance { sum });
        }
        Ok(Self { frame, focal })
    }

    /// m(Θ) = 1.
    pub fn vacuous(frame: Arc<Frame>) -> Self {
        let full = frame.full();
        Self {
            frame,
            focal: vec![(full, 1.0)],
        }
    }

    /// m(set) = 1 for a nonempty `set`.
    pub fn categorical(frame: Arc<Frame>, set: Subset) -> Result<Self> {
        Self::new(frame, [(set, 1.0)])
    }

    /// Builds from an already-normalized accumulator, dropping underflowed zeros.
    pub(crate) fn from_sorted_unchecked(frame: Arc<Frame>, focal: Vec<(Subset, f64)>) -> Self {
        debug_assert!(focal.windows(2).all(|w| w[0].0 < w[1].0));
        let focal = focal.into_iter().filter(|(_, m)| *m > 0.0).collect();
        Self { frame, focal }
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    /// Focal elements in canonical order.
    pub fn focal(&self) -> &[(Subset, f64)] {
        &self.focal
    }

    pub fn len(&self) -> usize {
        self.focal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.focal.is_empty()
    }

    pub fn mass(&self, set: Subset) -> f64 {
        self.focal
            .binary_search_by_key(&set, |(s, _)| *s)
            .map(|i| self.focal[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.focal.iter().map(|(_, m)| m).sum()
    }

    pub fn is_vacuous(&self) -> bool {
        self.focal.len() == 1 && self.focal[0].0 == self.frame.full()
    }

    /// Some when this is m(A)=s, m(Θ)=1−s with A ≠ Θ.
    pub fn as_simple_support(&self) -> Option<SimpleSupport> {
        let full = self.frame.full();
        match self.focal.as_slice() {
            [(a, s), (t, _)] if *t == full => Some(SimpleSupport {
                frame: self.frame.clone(),
                focus: *a,
                support: *s,
            }),
            _ => None,
        }
    }

    fn check_frame(&self, other: &MassFunction) -> Result<()> {
        if same_frame(&self.frame, &other.frame) {
            Ok(())
        } else {
            Err(Error::FrameMismatch)
        }
    }
}

/// Simple support function: m(focus) = s, m(Θ) = 1 − s.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSupport {
    frame: Arc<Frame>,
    focus: Subset,
    support: f64,
}

impl SimpleSupport {
    pub fn new(frame: Arc<Frame>, focus: Subset, support: f64) -> Result<Self> {
        if !frame.contains(focus) {
            return Err(Error::FrameMismatch);
        }
        if focus.is_empty() || focus == frame.full() {
            return Err(Error::InvalidFocus);
        }
        if !(support > 0.0 && support < 1.0) {
            return Err(Error::InvalidSupport(support));
        }
        Ok(Self { frame, focus, support })
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn focus(&self) -> Subset {
        self.focus
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn to_mass(&self) -> MassFunction {
        let full = self.frame.full();
        // focus < full in bit order, since focus is a proper subset
        MassFunction {
            frame: self.frame.clone(),
            focal: vec![(self.focus, self.support), (full, 1.0 - self.support)],
        }
    }
}

impl From<&SimpleSupport> for MassFunction {
    fn from(s: &SimpleSupport) -> Self {
        s.to_mass()
    }
}

/// Σ m1(A)·m2(B) over pairs with A ∩ B = ∅.
pub fn pairwise_conflict(m1: &MassFunction, m2: &MassFunction) -> Result<f64> {
    m1.check_frame(m2)?;
    let mut k = 0.0;
    for &(a, ma) in &m1.focal {
        for &(b, mb) in &m2.focal {
            if a.is_disjoint(b) {
                k += ma * mb;
            }
        }
    }
    Ok(k)
}

/// Dempster's rule. Returns the normalized combination and the conflict k.
pub fn combine_dempster(m1: &MassFunction, m2: &MassFunction) -> Result<(MassFunction, f64)> {
    m1.check_frame(m2)?;
    let mut acc: BTreeMap<Subset, f64> = BTreeMap::new();
    let mut conflict = 0.0;
    for &(a, ma) in &m1.focal {
        for &(b, mb) in &m2.focal {
            let c = a.intersect(b);
            let p = ma * mb;
            if c.is_empty() {
                conflict += p;
            } else {
                *acc.entry(c).or_insert(0.0) += p;
            }
        }
    }
    // Normalizing by the surviving mass directly is more accurate than 1 − k.
    // Without conflict the normalizer is exactly one, so products are kept
    // as they are (this keeps the vacuous function an exact identity).
    let kept: f64 = if conflict == 0.0 { 1.0 } else { acc.values().sum() };
    if acc.is_empty() || kept <= 0.0 {
        return Err(Error::TotalConflict);
    }
    let focal = acc.into_iter().map(|(s, m)| (s, m / kept)).collect();
    Ok((MassFunction::from_sorted_unchecked(m1.frame.clone(), focal), conflict))
}

/// Left fold of Dempster's rule with cumulative conflict c, 1 − c = Π(1 − k).
pub fn combine_all<'a, I>(items: I) -> Result<(MassFunction, f64)>
where
    I: IntoIterator<Item = &'a MassFunction>,
{
    let mut iter = items.into_iter();
    let mut combined = iter.next().ok_or(Error::EmptyInput)?.clone();
    let mut kept = 1.0;
    for m in iter {
        let (next, k) = combine_dempster(&combined, m)?;
        kept *= 1.0 - k;
        combined = next;
    }
    Ok((combined, 1.0 - kept))
}

/// Pls(A) = Σ m(B) over focal B with B ∩ A ≠ ∅.
pub fn plausibility(m: &MassFunction, set: Subset) -> Result<f64> {
    if !m.frame.contains(set) {
        return Err(Error::FrameMismatch);
    }
    Ok(m.focal
        .iter()
        .filter(|(b, _)| !b.is_disjoint(set))
        .map(|(_, mass)| mass)
        .sum())
}

/// Weight of conflict between two simple supports: −ln(1 − s1·s2) when the
/// foci are disjoint, 0 otherwise.
pub fn weight_of_conflict(s1: &SimpleSupport, s2: &SimpleSupport) -> Result<f64> {
    if !same_frame(&s1.frame, &s2.frame) {
        return Err(Error::FrameMismatch);
    }
    if s1.focus.is_disjoint(s2.focus) {
        Ok(-(-(s1.support * s2.support)).ln_1p())
    } else {
        Ok(0.0)
    }
}

// JSON form: {"frame": [...], "focal": [{"set": [...], "mass": x}, ...]}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct FocalJson {
    pub set: Vec<String>,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct MassFunctionJson {
    pub frame: Vec<String>,
    pub focal: Vec<FocalJson>,
}

impl MassFunction {
    pub(crate) fn to_json_parts(&self) -> MassFunctionJson {
        MassFunctionJson {
            frame: self.frame.labels().to_vec(),
            focal: self
                .focal
                .iter()
                .map(|&(s, m)| FocalJson {
                    set: self.frame.labels_of(s).into_iter().map(str::to_owned).collect(),
                    mass: m,
                })
                .collect(),
        }
    }

    pub(crate) fn from_json_parts(frame: Arc<Frame>, focal: &[FocalJson]) -> Result<Self> {
        let mut assignments = Vec::with_capacity(focal.len());
        for f in focal {
            assignments.push((frame.subset(&f.set)?, f.mass));
        }
        Self::new(frame, assignments)
    }
}

impl Serialize for MassFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_parts().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MassFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let parts = MassFunctionJson::deserialize(deserializer)?;
        let frame = Frame::shared(parts.frame).map_err(serde::de::Error::custom)?;
        Self::from_json_parts(frame, &parts.focal).map_err(serde::de::Error::custom)
    }
}
