//! The test generators themselves, checked against independent counts.

mod common;

use std::collections::HashSet;

use common::{contract, count_orchestrators, each_orchestrator, orchestrator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn enumeration_matches_the_count() {
    let expected = [1u128, 7, 55, 427, 3289, 25151];
    for n in 1..=6 {
        assert_eq!(count_orchestrators(n, 1), expected[n - 1]);
        let mut seen = HashSet::new();
        each_orchestrator(n, 1, &mut |f| {
            assert_eq!(f.size(), n, "{f}");
            assert!(f.well_formed().is_empty(), "{f}");
            assert!(seen.insert(f));
        });
        assert_eq!(seen.len() as u128, count_orchestrators(n, 1), "size {n}");
    }
    let mut two = 0u128;
    each_orchestrator(4, 2, &mut |_| two += 1);
    assert_eq!(two, count_orchestrators(4, 2));
}

#[test]
fn random_terms_are_well_formed_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let c = contract(&mut rng, 8);
        assert!(c.size() <= 8, "{c}");
        assert!(c.well_formed().is_empty(), "{c}");
        let f = orchestrator(&mut rng, 20, 3);
        assert!(f.size() <= 20, "{f}");
        assert!(f.well_formed().is_empty(), "{f}");
    }
}
