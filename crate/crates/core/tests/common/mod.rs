#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use prefusion::evidence::{Frame, MassFunction, Subset};
use rand::Rng;

pub fn frame_of(n: usize) -> Arc<Frame> {
    Frame::shared((0..n).map(|i| format!("x{i}"))).unwrap()
}

/// Random mass function with up to `max_focal` distinct focal elements;
/// Θ carries mass with probability one half.
pub fn random_mass<R: Rng>(rng: &mut R, frame: &Arc<Frame>, max_focal: usize) -> MassFunction {
    let full = frame.full().bits();
    let cap = max_focal.min(full as usize).max(1);
    let count = rng.random_range(1..=cap);
    let mut sets = BTreeSet::new();
    if rng.random_bool(0.5) {
        sets.insert(full);
    }
    while sets.len() < count {
        sets.insert(rng.random_range(1..=full));
    }
    let weights: Vec<f64> = sets.iter().map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    MassFunction::new(
        frame.clone(),
        sets.iter()
            .zip(&weights)
            .map(|(&s, &w)| (Subset::from_bits(s), w / total)),
    )
    .unwrap()
}

/// Largest absolute difference between two mass functions over the union of
/// their focal elements.
pub fn max_diff(a: &MassFunction, b: &MassFunction) -> f64 {
    a.focal()
        .iter()
        .chain(b.focal())
        .map(|&(s, _)| (a.mass(s) - b.mass(s)).abs())
        .fold(0.0, f64::max)
}
