//! Exhaustive metaconflict minimization, used as a test oracle.

use std::collections::HashMap;

use super::{cluster_conflict, metaconflict, Partition};
use crate::error::{Error, Result};
use crate::evidence::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_reports: usize,
    pub max_blocks: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_reports: 10,
            max_blocks: 4,
        }
    }
}

/// Globally minimal-metaconflict partition of `reports` into at most `q`
/// blocks.
///
/// Assignments are enumerated as restricted growth strings in lexicographic
/// order (each set partition exactly once); the first minimum wins.
pub fn brute_force_partition(reports: &[Report], q: usize, limits: &OracleLimits) -> Result<Partition> {
    let n = reports.len();
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    if n > limits.max_reports || q > limits.max_blocks || n > 64 {
        return Err(Error::InstanceTooLarge(format!(
            "n={n}, q={q} exceeds n<={}, q<={}",
            limits.max_reports, limits.max_blocks
        )));
    }
    if n == 0 {
        return Partition::evaluate(reports, Vec::new(), q);
    }

    let mut memo: HashMap<u64, f64> = HashMap::new();
    let mut block_conflict = |mask: u64| -> Result<f64> {
        if let Some(&c) = memo.get(&mask) {
            return Ok(c);
        }
        let members = (0..n).filter(|i| mask & (1u64 << i) != 0).map(|i| &reports[i]);
        let c = cluster_conflict(members)?.conflict;
        memo.insert(mask, c);
        Ok(c)
    };

    let mut rgs = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut masks = vec![0u64; q];
    let mut conflicts = vec![0.0; q];
    loop {
        masks.iter_mut().for_each(|m| *m = 0);
        for (i, &b) in rgs.iter().enumerate() {
            masks[b] |= 1u64 << i;
        }
        for b in 0..q {
            conflicts[b] = block_conflict(masks[b])?;
        }
        let mcf = metaconflict(&conflicts);
        if best.as_ref().is_none_or(|(m, _)| mcf < *m) {
            best = Some((mcf, rgs.clone()));
        }
        if !next_rgs(&mut rgs, q) {
            break;
        }
    }
    let (_, assignment) = best.expect("at least one partition enumerated");
    Partition::evaluate(reports, assignment, q)
}

/// Advances a restricted growth string (a_0 = 0, a_i ≤ 1 + max(a_0..a_{i-1}))
/// with all values below `q`. Returns false after the last one.
fn next_rgs(a: &mut [usize], q: usize) -> bool {
    let n = a.len();
    for i in (1..n).rev() {
        let prefix_max = a[..i].iter().copied().max().unwrap_or(0);
        if a[i] <= prefix_max && a[i] + 1 < q {
            a[i] += 1;
            a[i + 1..].iter_mut().for_each(|x| *x = 0);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{Frame, SimpleSupport};

    fn count_rgs(n: usize, q: usize) -> usize {
        let mut a = vec![0; n];
        let mut count = 1;
        while next_rgs(&mut a, q) {
            count += 1;
        }
        count
    }

    #[test]
    fn enumerates_each_set_partition_once() {
        // Σ_{k≤q} S(n,k): Bell(4)=15, S(5,1)+S(5,2)+S(5,3)=1+15+25
        assert_eq!(count_rgs(4, 4), 15);
        assert_eq!(count_rgs(5, 3), 41);
        assert_eq!(count_rgs(8, 3), 1 + 127 + 966);
        assert_eq!(count_rgs(3, 1), 1);
    }

    fn simple(f: &std::sync::Arc<Frame>, id: &str, focus: &[&str], s: f64) -> Report {
        let ss = SimpleSupport::new(f.clone(), f.subset(focus).unwrap(), s).unwrap();
        Report::new(id, 0.0, ss.to_mass(), "").unwrap()
    }

    #[test]
    fn examples() {
        let f = Frame::shared(["a", "b"]).unwrap();
        let reports = vec![simple(&f, "1", &["a"], 0.6), simple(&f, "2", &["b"], 0.7)];
        let p = brute_force_partition(&reports, 2, &OracleLimits::default()).unwrap();
        assert_eq!(p.metaconflict, 0.0);
        assert_ne!(p.assignment[0], p.assignment[1]);

        let one = brute_force_partition(&reports, 1, &OracleLimits::default()).unwrap();
        let all = cluster_conflict(reports.iter()).unwrap().conflict;
        assert_eq!(one.metaconflict, all);

        let big: Vec<Report> = (0..11).map(|i| simple(&f, &i.to_string(), &["a"], 0.5)).collect();
        assert!(matches!(
            brute_force_partition(&big, 2, &OracleLimits::default()),
            Err(Error::InstanceTooLarge(_))
        ));
        assert!(matches!(
            brute_force_partition(&reports, 5, &OracleLimits::default()),
            Err(Error::InstanceTooLarge(_))
        ));
    }
}
