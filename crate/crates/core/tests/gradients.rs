use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use themefit_core::attention::{ThemeExample, ThemeObjective};
use themefit_core::gradcheck::{check_theme_objective, check_triplet};
use themefit_core::subspace::{masked_distance, MaskTable, Triplet};
use themefit_core::{CategoryId, CategoryPair, Item, Projection};

const TOL: f64 = 1e-4;

fn item(rng: &mut ChaCha8Rng, key: &str, cat: u32, d: usize) -> Item {
    Item {
        key: key.into(),
        category: CategoryId(cat),
        features: (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    }
}

/// A random triplet setting whose hinge is at least 0.25 away from its kink.
fn triplet_case(seed: u64, n: usize, d: usize, active: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = Projection::new(
        n,
        d,
        (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        (0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect(),
    )
    .unwrap();
    let pair = CategoryPair::new(CategoryId(0), CategoryId(1)).unwrap();
    let mut masks = MaskTable::new(n);
    masks
        .insert(pair, (0..n).map(|_| rng.random_range(0.2f32..1.5)).collect())
        .unwrap();
    let a = item(&mut rng, "a", 0, d);
    let p = item(&mut rng, "p", 1, d);
    let q = item(&mut rng, "q", 1, d);
    let t = Triplet::new(&a, &p, &q).unwrap();
    let gap = masked_distance(&proj, &masks, &a, &q).unwrap() - masked_distance(&proj, &masks, &a, &p).unwrap();
    let slack = rng.random_range(0.25..2.0);
    let margin = if active { gap + slack } else { gap - slack };
    check_triplet(&proj, &masks, &t, margin, 1e-4).unwrap().rel_error()
}

fn theme_case(seed: u64, pairs: usize, examples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<CategoryPair> = (0..pairs as u32)
        .map(|k| CategoryPair::new(CategoryId(k), CategoryId(k + 1)).unwrap())
        .collect();
    // one pair outside the trainable set exercises the default weight
    let index: BTreeMap<CategoryPair, usize> = all[..pairs - 1].iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let exs: Vec<ThemeExample> = (0..examples)
        .map(|_| ThemeExample {
            distances: all.iter().map(|&p| (p, rng.random_range(0.0..3.0))).collect(),
            positive: rng.random_bool(0.5),
        })
        .collect();
    let objective = ThemeObjective::new(&index, 0.3, &exs);
    let weights: Vec<f64> = (0..index.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bias = rng.random_range(-2.0..2.0);
    check_theme_objective(&objective, &weights, bias, 1e-5).rel_error()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn triplet_gradient_matches_central_differences(seed in any::<u64>(), n in 1usize..8, d in 1usize..8) {
        let err = triplet_case(seed, n, d, true);
        prop_assert!(err < TOL, "relative error {err}");
    }

    #[test]
    fn inactive_hinge_has_zero_gradient_numerically(seed in any::<u64>(), n in 1usize..6, d in 1usize..6) {
        prop_assert_eq!(triplet_case(seed, n, d, false), 0.0);
    }

    #[test]
    fn attention_gradient_matches_central_differences(seed in any::<u64>(), pairs in 2usize..10, examples in 1usize..20) {
        let err = theme_case(seed, pairs, examples);
        prop_assert!(err < TOL, "relative error {err}");
    }
}
