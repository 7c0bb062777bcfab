mod common;

use std::collections::HashMap;

use bicond::bridge::BridgePath;
use bicond::genfun::{Family, WeightSequence};
use bicond::lukas::{
    compose_bridge, decode_tree, luka_stats, sample_subset_path, vervaat, LukasError, LukasPath,
    PlaneTree, TreeSampler,
};
use bicond::stats::chi2_gof_p;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lp(v: &[i64]) -> LukasPath {
    LukasPath {
        increments: v.to_vec(),
    }
}

fn binary() -> WeightSequence {
    WeightSequence::new_lattice(Family::Tabulated {
        tabulated: vec![1.0, 0.0, 1.0],
    })
    .unwrap()
}

#[test]
fn enumerator_counts() {
    // Catalan numbers and Narayana numbers.
    let catalan = [1, 1, 2, 5, 14, 42, 132];
    for n in 1..=7 {
        let total: usize = (1..=n).map(|k| common::trees(n, k).len()).sum();
        assert_eq!(total, catalan[n - 1]);
    }
    assert_eq!(common::trees(5, 3).len(), 6);
    assert_eq!(common::trees(5, 3).len(), (common::binom(4, 2) * common::binom(4, 3) / 4.0) as usize);
}

#[test]
fn subset_path_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(sample_subset_path(5, 5, &mut rng), vec![1; 5]);
    assert_eq!(sample_subset_path(5, 0, &mut rng), vec![0; 5]);
    let mut counts = HashMap::new();
    for _ in 0..20_000 {
        *counts.entry(sample_subset_path(5, 2, &mut rng)).or_insert(0u64) += 1;
    }
    assert_eq!(counts.len(), 10);
    let obs: Vec<u64> = counts.values().copied().collect();
    assert!(chi2_gof_p(&obs, &[0.1; 10]) > 0.001);
}

#[test]
fn compose_examples() {
    let s = BridgePath {
        increments: vec![1],
        x_n: 1,
    };
    let w = compose_bridge(&s, &[0, 1, 1]).unwrap();
    assert_eq!(w.increments, vec![1, -1, -1]);
    assert_eq!(w.lambda(), vec![0, 0, 1, 2]);

    let empty = BridgePath {
        increments: vec![],
        x_n: 2,
    };
    assert!(matches!(
        compose_bridge(&empty, &[1, 1, 1]),
        Err(LukasError::LengthMismatch { .. })
    ));
    let single = BridgePath {
        increments: vec![],
        x_n: 0,
    };
    assert_eq!(compose_bridge(&single, &[1]).unwrap().increments, vec![-1]);
}

#[test]
fn vervaat_examples() {
    assert!(matches!(vervaat::<()>(&lp(&[-1, 1]), &[]), Err(LukasError::NotBridge(0))));
    let exc = lp(&[1, -1, -1]);
    assert_eq!(vervaat::<()>(&exc, &[]).unwrap().0, exc);
    let (r, pay) = vervaat(&lp(&[-1, 1, -1]), &['a', 'b', 'c']).unwrap();
    assert_eq!(r.increments, vec![1, -1, -1]);
    assert_eq!(pay, vec!['b', 'c', 'a']);
}

#[test]
fn decode_examples() {
    let t = decode_tree(&lp(&[1, -1, -1])).unwrap();
    assert_eq!(t.children_counts(), &[2, 0, 0]);
    assert_eq!(t.parents(), &[None, Some(0), Some(0)]);
    assert_eq!(t.leaves(), 2);
    let single = decode_tree(&lp(&[-1])).unwrap();
    assert_eq!(single.n(), 1);
    assert!(decode_tree(&lp(&[-1, 1, -1])).is_err());
    assert!(decode_tree(&lp(&[0, -1, 0])).is_err());

    let json = serde_json::to_string(&t).unwrap();
    assert_eq!(json, "[2,0,0]");
    let back: PlaneTree = serde_json::from_str(&json).unwrap();
    assert_eq!(back, t);
    assert!(serde_json::from_str::<PlaneTree>("[0,1]").is_err());
}

#[test]
fn luka_stats_cherry() {
    let s = luka_stats(&lp(&[1, -1, -1]));
    assert_eq!(s.sum_sq, 3.0);
    assert_eq!(s.max_inc, 1);
    assert_eq!(s.leaves, 2);
}

#[test]
fn binary_trees_five_vertices() {
    let s = TreeSampler::new(&binary(), 5, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..20_000 {
        let t = s.sample(&mut rng).unwrap();
        assert_eq!(t.leaves(), 3);
        *counts.entry(t.children_counts().to_vec()).or_insert(0) += 1;
    }
    let law = common::tree_law(|c| [1.0, 0.0, 1.0].get(c).copied().unwrap_or(0.0), 5, 3);
    assert_eq!(law.len(), 2);
    let (obs, probs) = common::align_counts(&law, &counts);
    assert!(chi2_gof_p(&obs, &probs) > 0.001);
}

#[test]
fn tree_sampler_matches_enumeration_small() {
    let thetas: Vec<(WeightSequence, Box<dyn Fn(usize) -> f64>)> = vec![
        (
            WeightSequence::new(Family::Geometric { ratio: 1.0, scale: Some(1.0) }).unwrap(),
            Box::new(|_| 1.0),
        ),
        (
            WeightSequence::new(Family::MapInduced { q: None }).unwrap(),
            Box::new(|c| if c == 0 { 1.0 } else { common::binom(2 * c as u64 - 1, c as u64 - 1) }),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (theta, f) in &thetas {
        for n in 2..=6 {
            for k in 1..n {
                let s = TreeSampler::new(theta, n, k).unwrap();
                let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
                for _ in 0..10_000 {
                    *counts
                        .entry(s.sample(&mut rng).unwrap().children_counts().to_vec())
                        .or_insert(0) += 1;
                }
                let law = common::tree_law(f, n, k);
                let (obs, probs) = common::align_counts(&law, &counts);
                let p = chi2_gof_p(&obs, &probs);
                assert!(p > 1e-4, "n={n} k={k} p={p}");
            }
        }
    }
}

#[test]
fn degenerate_leaf_counts() {
    let u = WeightSequence::new(Family::Geometric { ratio: 1.0, scale: Some(1.0) }).unwrap();
    assert!(matches!(TreeSampler::new(&u, 5, 0), Err(LukasError::Degenerate { .. })));
    assert!(matches!(TreeSampler::new(&u, 5, 5), Err(LukasError::Degenerate { .. })));
    let one = TreeSampler::new(&u, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(one.sample(&mut rng).unwrap().children_counts(), &[0]);
    assert!(TreeSampler::new(&binary(), 6, 3).is_err());
}

proptest! {
    #[test]
    fn vervaat_properties(steps in prop::collection::vec(0i64..4, 1..30), seed in any::<u64>()) {
        // Build a bridge ending at -1 from nonnegative steps plus enough -1 steps.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ups: i64 = steps.iter().sum();
        let k = (ups + 1) as usize;
        let n = steps.len() + k;
        let l = sample_subset_path(n, k, &mut rng);
        let s = BridgePath { increments: steps.iter().map(|&x| x as usize).collect(), x_n: k - 1 };
        let w = compose_bridge(&s, &l).unwrap();
        prop_assert_eq!(w.total(), -1);
        prop_assert_eq!(w.lambda()[n], k);
        // Removing the -1 steps recovers the bridge.
        let back: Vec<usize> = w.increments.iter().filter(|&&x| x >= 0).map(|&x| x as usize).collect();
        prop_assert_eq!(&back, &s.increments);

        let payload: Vec<usize> = (0..n).collect();
        let (e, pay) = vervaat(&w, &payload).unwrap();
        prop_assert!(e.is_excursion());
        let mut a: Vec<(i64, usize)> = w.increments.iter().copied().zip(payload.iter().copied()).collect();
        let mut b: Vec<(i64, usize)> = e.increments.iter().copied().zip(pay.iter().copied()).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        let (e2, _) = vervaat::<()>(&e, &[]).unwrap();
        prop_assert_eq!(&e2, &e);
        let t = decode_tree(&e).unwrap();
        prop_assert_eq!(t.encode(), e);
        prop_assert_eq!(t.leaves(), k);
    }
}
