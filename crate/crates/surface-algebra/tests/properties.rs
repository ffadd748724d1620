//! Randomized algebraic laws, driven by proptest seeds.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surface_algebra::algebra::{q, random_element, Alg, SurfaceAlgebra, Twist};
use surface_algebra::bracket::BracketEngine;
use surface_algebra::surface::fixtures;

fn algebra(which: usize, twisted: bool) -> Alg {
    let s = fixtures::all().swap_remove(which % 4);
    SurfaceAlgebra::new(s, if twisted { Twist::Twisted } else { Twist::Untwisted }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn printed_elements_parse_back(which in 0usize..4, twisted: bool, seed: u64) {
        let a = algebra(which, twisted);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_element(&a, &mut rng, 5, 4);
        prop_assert_eq!(a.parse_element(&x.to_string()).unwrap(), x);
    }

    #[test]
    fn printed_tensors_parse_back(which in 0usize..4, seed: u64) {
        let a = algebra(which, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (random_element(&a, &mut rng, 3, 2), random_element(&a, &mut rng, 3, 2));
        let t = BracketEngine::new(&a).bracket(&x, &y);
        prop_assert_eq!(a.parse_tensor2(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn multiplication_is_associative_and_unital(which in 0usize..4, twisted: bool, seed: u64) {
        let a = algebra(which, twisted);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [x, y, z] = [0; 3].map(|_| random_element(&a, &mut rng, 4, 3));
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &a.one(), x.clone());
        prop_assert_eq!(&a.one() * &x, x);
    }

    #[test]
    fn bracket_is_bilinear(which in 0usize..4, seed: u64, c in -5i64..5) {
        let a = algebra(which, true);
        let e = BracketEngine::new(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [x, y, z] = [0; 3].map(|_| random_element(&a, &mut rng, 3, 2));
        let k = q(c, 3);
        let left = e.bracket(&(&x.scale(&k) + &y), &z);
        prop_assert_eq!(left, &e.bracket(&x, &z).scale(&k) + &e.bracket(&y, &z));
        let right = e.bracket(&z, &(&x + &y.scale(&k)));
        prop_assert_eq!(right, &e.bracket(&z, &x) + &e.bracket(&z, &y).scale(&k));
    }
}
