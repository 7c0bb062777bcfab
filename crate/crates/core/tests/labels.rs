mod common;

use std::collections::HashMap;

use bicond::labels::{label_tree, sample_label_bridge, LabelBridge, LabelError, LabelledTree};
use bicond::lukas::PlaneTree;
use bicond::stats::chi2_gof_p;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bridge_counts(k: usize, draws: usize, seed: u64) -> HashMap<Vec<i64>, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = HashMap::new();
    for _ in 0..draws {
        let b = sample_label_bridge(k, &mut rng).unwrap();
        assert!(b.is_valid());
        *h.entry(b.values).or_insert(0) += 1;
    }
    h
}

#[test]
fn bridge_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(sample_label_bridge(1, &mut rng).unwrap().values, vec![0, 0]);
    assert_eq!(sample_label_bridge(0, &mut rng), Err(LabelError::EmptyBridge));
    assert_eq!(bridge_counts(2, 3000, 1).len(), 3);
    assert_eq!(bridge_counts(3, 6000, 2).len(), 10);
}

#[test]
fn bridges_are_uniform_against_enumeration() {
    for k in 1..=5 {
        let all = common::label_bridges(k);
        assert_eq!(all.len() as f64, common::binom(2 * k as u64 - 1, k as u64 - 1));
        let law: Vec<(Vec<i64>, f64)> = all.iter().map(|b| (b.clone(), 1.0 / all.len() as f64)).collect();
        let counts = bridge_counts(k, 40_000, 10 + k as u64);
        let (obs, probs) = common::align_counts(&law, &counts);
        let p = chi2_gof_p(&obs, &probs);
        assert!(p > 0.001, "k = {k}: p = {p}");
    }
}

#[test]
fn cherry_labels() {
    let cherry = PlaneTree::from_children(vec![2, 0, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 30_000;
    let mut c = HashMap::new();
    for _ in 0..draws {
        *c.entry(label_tree(cherry.clone(), &mut rng).labels).or_insert(0u64) += 1;
    }
    assert_eq!(c.len(), 3);
    let freq = c[&vec![0, -1, 0]] as f64 / draws as f64;
    assert!((freq - 1.0 / 3.0).abs() < 0.015, "{freq}");
}

#[test]
fn labelled_tree_validation() {
    let t = PlaneTree::from_children(vec![2, 0, 0]).unwrap();
    assert!(LabelledTree::new(t.clone(), vec![0, 1, 0]).is_ok());
    assert_eq!(
        LabelledTree::new(t.clone(), vec![0, 1]),
        Err(LabelError::LengthMismatch { got: 2, want: 3 })
    );
    assert_eq!(LabelledTree::new(t.clone(), vec![1, 2, 1]), Err(LabelError::RootLabel(1)));
    // The last child must carry the parent's label.
    assert_eq!(LabelledTree::new(t.clone(), vec![0, 0, 1]), Err(LabelError::BadChildren(0)));
    assert_eq!(LabelledTree::new(t, vec![0, -2, 0]), Err(LabelError::BadChildren(0)));
    assert!(!LabelBridge { values: vec![0] }.is_valid());
}

proptest! {
    #[test]
    fn sibling_labels_form_bridges(seed in 0u64..10_000, n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // A random tree from a random excursion: children counts by cycle lemma.
        let mut steps: Vec<i64> = (0..n - 1).map(|i| if (seed >> (i % 60)) & 1 == 1 { 1 } else { -1 }).collect();
        let total: i64 = steps.iter().sum();
        steps.push(-1 - total);
        if steps.iter().any(|&x| x < -1) {
            return Ok(());
        }
        let path = bicond::lukas::LukasPath { increments: steps };
        let (exc, _) = bicond::lukas::vervaat::<()>(&path, &[]).unwrap();
        let tree = bicond::lukas::decode_tree(&exc).unwrap();
        let lt = label_tree(tree.clone(), &mut rng);
        prop_assert!(LabelledTree::new(tree.clone(), lt.labels.clone()).is_ok());
        // Each sibling sequence, read relative to its parent, is an enumerated bridge.
        for (u, kids) in tree.child_lists().iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let mut seq = vec![0];
            seq.extend(kids.iter().map(|&c| lt.labels[c] - lt.labels[u]));
            prop_assert!(common::label_bridges(kids.len()).contains(&seq));
        }
        prop_assert_eq!(lt.labels[0], 0);
        prop_assert!(lt.min_label() <= 0);
    }
}
