mod common;

use std::collections::{HashMap, HashSet};

use approx::assert_relative_eq;
use bicond::genfun::{Family, WeightSequence};
use bicond::labels::LabelledTree;
use bicond::lukas::PlaneTree;
use bicond::mapbij::{
    bfs_distances, build_map, map_report, sample_map, scaling_s, scaling_s_general,
    verify_correspondence, write_profile_csv, MapError, MapSampler,
};
use bicond::stats::chi2_gof_p;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every well-labelled tree with `n` vertices and `k` leaves.
fn labelled_trees(n: usize, k: usize) -> Vec<LabelledTree> {
    let mut out = Vec::new();
    for ch in common::trees(n, k) {
        let tree = PlaneTree::from_children(ch).unwrap();
        let kids = tree.child_lists();
        let internal: Vec<usize> = (0..n).filter(|&u| !kids[u].is_empty()).collect();
        let choices: Vec<Vec<Vec<i64>>> = internal.iter().map(|&u| common::label_bridges(kids[u].len())).collect();
        let mut idx = vec![0; internal.len()];
        loop {
            let mut labels = vec![0i64; n];
            for (j, &u) in internal.iter().enumerate() {
                for (c, b) in kids[u].iter().zip(&choices[j][idx[j]][1..]) {
                    labels[*c] = labels[u] + b;
                }
            }
            out.push(LabelledTree::new(tree.clone(), labels).unwrap());
            let mut j = 0;
            while j < idx.len() {
                idx[j] += 1;
                if idx[j] < choices[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == idx.len() {
                break;
            }
        }
    }
    out
}

fn lt(children: Vec<usize>, labels: Vec<i64>) -> LabelledTree {
    LabelledTree::new(PlaneTree::from_children(children).unwrap(), labels).unwrap()
}

#[test]
fn construction_examples() {
    let m = build_map(&lt(vec![1, 0], vec![0, 0]), false).unwrap();
    assert_eq!((m.n_edges(), m.n_vertices, m.n_faces()), (1, 2, 1));
    assert_eq!(m.face_degree, vec![2]);
    assert_eq!(m.euler(), 2);

    for labels in [vec![0, -1, 0], vec![0, 0, 0], vec![0, 1, 0]] {
        let t = lt(vec![2, 0, 0], labels);
        let m = build_map(&t, true).unwrap();
        assert_eq!((m.n_edges(), m.n_vertices, m.n_faces()), (2, 3, 1));
        assert_eq!(m.face_degree, vec![4]);
        assert!(verify_correspondence(&t, &m).passed());
    }

    // Labels (0,-1,0,-1,0) on a root with two children, the second a cherry: a 4-cycle.
    let t = lt(vec![2, 0, 2, 0, 0], vec![0, -1, 0, -1, 0]);
    let m = build_map(&t, false).unwrap();
    assert_eq!(m.face_degree, vec![4, 4]);
    let d = bfs_distances(&m, m.distinguished);
    assert_eq!(d.iter().max(), Some(&2));

    let single = LabelledTree::new(PlaneTree::from_children(vec![0]).unwrap(), vec![0]).unwrap();
    assert!(matches!(build_map(&single, false), Err(MapError::MalformedLabelling(_))));
}

#[test]
fn all_small_labelled_trees_satisfy_the_correspondence() {
    for n in 2..=7 {
        for k in 1..n {
            for t in labelled_trees(n, k) {
                for flip in [false, true] {
                    let m = build_map(&t, flip).unwrap();
                    let c = verify_correspondence(&t, &m);
                    assert!(c.passed(), "{t:?}: {c:?}");
                }
            }
        }
    }
}

#[test]
fn construction_is_injective() {
    for n in 2..=6 {
        for k in 1..n {
            let trees = labelled_trees(n, k);
            let mut codes = HashSet::new();
            for t in &trees {
                for flip in [false, true] {
                    assert!(codes.insert(build_map(t, flip).unwrap().canonical_code()));
                }
            }
            assert_eq!(codes.len(), 2 * trees.len());
        }
    }
}

#[test]
fn corrupted_opposite_breaks_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let theta = WeightSequence::new(Family::MapInduced { q: None }).unwrap();
    let mut caught = 0;
    for _ in 0..50 {
        let s = sample_map(&theta, 40, 20, &mut rng).unwrap();
        assert!(verify_correspondence(&s.tree, &s.map).passed());
        // Re-pair a half-edge at the farthest vertex with one at the distinguished vertex.
        let mut bad = s.map.clone();
        let d = bfs_distances(&bad, bad.distinguished);
        let far = (0..bad.n_vertices).max_by_key(|&v| d[v]).unwrap();
        assert!(d[far] >= 2);
        let hx = bad.vertex_of.iter().position(|&v| v == far).unwrap();
        let st = bad.vertex_of.iter().position(|&v| v == bad.distinguished).unwrap();
        let (hy, p) = (bad.opposite[hx], bad.opposite[st]);
        bad.opposite[hx] = st;
        bad.opposite[st] = hx;
        bad.opposite[hy] = p;
        bad.opposite[p] = hy;
        let c = verify_correspondence(&s.tree, &bad);
        if !c.distances {
            caught += 1;
        }
    }
    assert_eq!(caught, 50, "caught {caught}");
}

#[test]
fn sampler_is_uniform_on_small_maps() {
    let theta = WeightSequence::new(Family::MapInduced { q: None }).unwrap();
    let (n, k) = (5, 3);
    let trees = labelled_trees(n, k);
    let mut law = Vec::new();
    for t in &trees {
        for flip in [false, true] {
            law.push((build_map(t, flip).unwrap().canonical_code(), 1.0 / (2 * trees.len()) as f64));
        }
    }
    let sampler = MapSampler::new(&theta, n, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = HashMap::new();
    for _ in 0..40_000 {
        *counts.entry(sampler.sample(&mut rng).unwrap().map.canonical_code()).or_insert(0u64) += 1;
    }
    let (obs, probs) = common::align_counts(&law, &counts);
    let p = chi2_gof_p(&obs, &probs);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn scaling_function_values() {
    assert_relative_eq!(scaling_s(2.0 / 3.0).unwrap(), 2.0 / 9.0, epsilon = 1e-12);
    assert!(matches!(scaling_s(0.0), Err(MapError::DomainError(_))));
    assert!(matches!(scaling_s(1.0), Err(MapError::DomainError(_))));
    let theta = WeightSequence::new(Family::MapInduced { q: None }).unwrap();
    for x in [0.1, 0.3, 0.5, 2.0 / 3.0, 0.9] {
        assert_relative_eq!(scaling_s_general(&theta, x).unwrap(), scaling_s(x).unwrap(), max_relative = 1e-6);
    }
}

#[test]
fn report_and_csv() {
    let t = lt(vec![2, 0, 2, 0, 0], vec![0, -1, 0, -1, 0]);
    let m = build_map(&t, false).unwrap();
    let r = map_report(&m);
    assert_eq!(r.profile, vec![1, 2, 1]);
    assert_relative_eq!(r.mean_distance, 4.0 / 3.0);
    assert_eq!(r.sigma2, 4.0);
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &r).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "distance,count\n0,1\n1,2\n2,1\n");
    let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    assert_eq!(v["face_degree"], serde_json::json!([4, 4]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn sampled_maps_are_valid(seed in 0u64..1_000_000, n in 2usize..120, frac in 0.05f64..0.95) {
        let k = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let theta = WeightSequence::new(Family::MapInduced { q: None }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_map(&theta, n, k, &mut rng).unwrap();
        let c = verify_correspondence(&s.tree, &s.map);
        prop_assert!(c.passed(), "{:?}", c);
        prop_assert_eq!(s.map.n_faces(), n - k);
        prop_assert!(s.map.face_degree.iter().all(|d| d % 2 == 0));
        prop_assert_eq!(s.report.sigma2, s.luka_sum_sq - 1.0);
    }
}
