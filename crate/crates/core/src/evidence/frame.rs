use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest frame the bit encoding supports.
pub const MAX_FRAME_SIZE: usize = 64;

/// Frame of discernment: an ordered list of mutually exclusive hypotheses.
///
/// Label order is fixed at construction; label `i` is bit `i` of every
/// [`Subset`] bound to this frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    labels: Vec<String>,
}

impl Frame {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyFrame);
        }
        if labels.len() > MAX_FRAME_SIZE {
            return Err(Error::FrameTooLarge(labels.len()));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// Convenience for the common case of a frame shared by many mass functions.
    pub fn shared<I, S>(labels: I) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(labels).map(Arc::new)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The whole frame, Θ.
    pub fn full(&self) -> Subset {
        if self.labels.len() == MAX_FRAME_SIZE {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << self.labels.len()) - 1)
        }
    }

    pub fn singleton(&self, index: usize) -> Result<Subset> {
        if index >= self.labels.len() {
            return Err(Error::InvalidParameter(format!(
                "label index {index} out of range for frame of size {}",
                self.labels.len()
            )));
        }
        Ok(Subset(1u64 << index))
    }

    /// Subset made of the named labels.
    pub fn subset<S: AsRef<str>>(&self, labels: &[S]) -> Result<Subset> {
        let mut bits = 0u64;
        for label in labels {
            let label = label.as_ref();
            let i = self
                .index_of(label)
                .ok_or_else(|| Error::UnknownLabel(label.to_owned()))?;
            bits |= 1u64 << i;
        }
        Ok(Subset(bits))
    }

    /// Whether `subset` only uses labels of this frame.
    pub fn contains(&self, subset: Subset) -> bool {
        subset.0 & !self.full().0 == 0
    }

    pub fn labels_of(&self, subset: Subset) -> Vec<&str> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(i, _)| subset.0 & (1u64 << i) != 0)
            .map(|(_, l)| l.as_str())
            .collect()
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels.join(","))
    }
}

impl serde::Serialize for Frame {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels.serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for Frame {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<String>::deserialize(deserializer)?;
        Frame::new(labels).map_err(serde::de::Error::custom)
    }
}

/// True when both handles denote the same frame (pointer or label equality).
pub fn same_frame(a: &Arc<Frame>, b: &Arc<Frame>) -> bool {
    Arc::ptr_eq(a, b) || a.labels == b.labels
}

/// Subset of a frame encoded as a characteristic bit pattern.
///
/// The ordering derived here (by bit pattern) is the canonical focal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub const fn from_bits(bits: u64) -> Self {
        Subset(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn intersect(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub const fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub const fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    pub const fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn contains_index(self, index: usize) -> bool {
        index < 64 && self.0 & (1u64 << index) != 0
    }

    pub const fn cardinality(self) -> u32 {
        self.0.count_ones()
    }

    /// Label indices in ascending order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits & (1u64 << i) != 0)
    }
}
