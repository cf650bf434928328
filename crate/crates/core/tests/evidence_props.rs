mod common;

use prefusion::evidence::{
    combine_all, combine_dempster, pairwise_conflict, plausibility, weight_of_conflict, MassFunction, SimpleSupport,
    Subset,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{frame_of, max_diff, random_mass};

fn masses(seed: u64, frame_size: usize, count: usize) -> Vec<MassFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = frame_of(frame_size);
    (0..count).map(|_| random_mass(&mut rng, &f, 8)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn combination_is_commutative_and_conserves_mass(seed: u64, n in 1usize..=6) {
        let m = masses(seed, n, 2);
        match (combine_dempster(&m[0], &m[1]), combine_dempster(&m[1], &m[0])) {
            (Ok((ab, k1)), Ok((ba, k2))) => {
                prop_assert!(max_diff(&ab, &ba) <= 1e-12);
                prop_assert!((k1 - k2).abs() <= 1e-12);
                prop_assert!((ab.total() - 1.0).abs() <= 1e-9);
                prop_assert!((0.0..1.0).contains(&k1));
                prop_assert!(ab.focal().iter().all(|&(s, v)| !s.is_empty() && v > 0.0));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one order failed"),
        }
    }

    #[test]
    fn combination_is_associative(seed: u64, n in 1usize..=6) {
        let m = masses(seed, n, 3);
        let left = combine_dempster(&m[0], &m[1]).and_then(|(ab, _)| combine_dempster(&ab, &m[2]));
        let right = combine_dempster(&m[1], &m[2]).and_then(|(bc, _)| combine_dempster(&m[0], &bc));
        match (left, right) {
            (Ok((l, _)), Ok((r, _))) => prop_assert!(max_diff(&l, &r) <= 1e-9),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one grouping failed"),
        }
    }

    #[test]
    fn vacuous_is_a_two_sided_identity(seed: u64, n in 1usize..=6) {
        let m = masses(seed, n, 1).pop().unwrap();
        let v = MassFunction::vacuous(m.frame().clone());
        let (l, kl) = combine_dempster(&v, &m).unwrap();
        let (r, kr) = combine_dempster(&m, &v).unwrap();
        prop_assert_eq!(&l, &m);
        prop_assert_eq!(&r, &m);
        prop_assert_eq!(kl, 0.0);
        prop_assert_eq!(kr, 0.0);
    }

    #[test]
    fn cumulative_conflict_permutation_invariant_and_monotone(seed: u64, n in 1usize..=5, count in 1usize..=6, rot in 0usize..6) {
        let m = masses(seed, n, count);
        let Ok((_, c)) = combine_all(&m) else { return Ok(()) };
        let mut shuffled = m.clone();
        shuffled.rotate_left(rot % count);
        shuffled.reverse();
        let (_, c2) = combine_all(&shuffled).unwrap();
        prop_assert!((c - c2).abs() <= 1e-9);
        let mut prev = 0.0;
        for len in 1..=count {
            let (_, ci) = combine_all(&m[..len]).unwrap();
            prop_assert!(ci >= prev - 1e-15);
            prev = ci;
        }
    }

    #[test]
    fn conflict_matches_weight_of_conflict(n in 2usize..=6, a in 1u64..63, b in 1u64..63, s1 in 0.01f64..0.99, s2 in 0.01f64..0.99) {
        let f = frame_of(n);
        let full = f.full().bits();
        let (a, b) = (Subset::from_bits(a % full).union(Subset::from_bits(1)), Subset::from_bits(b % full));
        prop_assume!(!b.is_empty() && a != f.full());
        let x = SimpleSupport::new(f.clone(), a, s1).unwrap();
        let y = SimpleSupport::new(f.clone(), b, s2).unwrap();
        let k = pairwise_conflict(&x.to_mass(), &y.to_mass()).unwrap();
        let w = weight_of_conflict(&x, &y).unwrap();
        prop_assert!((k - (1.0 - (-w).exp())).abs() <= 1e-12);
        prop_assert_eq!(k == 0.0, !a.is_disjoint(b));
    }

    #[test]
    fn plausibility_bounds(seed: u64, n in 1usize..=6, set in 1u64..64) {
        let m = masses(seed, n, 1).pop().unwrap();
        let f = m.frame().clone();
        prop_assert!((plausibility(&m, f.full()).unwrap() - 1.0).abs() <= 1e-9);
        let a = Subset::from_bits(set & f.full().bits());
        prop_assume!(!a.is_empty());
        let belief: f64 = m.focal().iter().filter(|(b, _)| b.is_subset_of(a)).map(|(_, v)| v).sum();
        prop_assert!(plausibility(&m, a).unwrap() >= belief - 1e-15);
    }

    #[test]
    fn json_round_trip_is_exact(seed: u64, n in 1usize..=6) {
        let m = masses(seed, n, 1).pop().unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: MassFunction = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }
}
