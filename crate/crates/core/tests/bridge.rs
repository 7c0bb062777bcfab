use std::collections::HashMap;

use approx::assert_relative_eq;
use bicond::bridge::{
    bridge_stats, check_brownian_marginals, condensation_report, path_log_probability,
    step_distribution, BridgePath, BridgeSampler, BridgeStats, SamplerKind,
};
use bicond::exactdist::bridge_marginal;
use bicond::genfun::{classify_regime, ClassifyOptions, WeightSequence};
use bicond::stats::{chi2_gof_p, chi2_two_sample_p};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every bridge path with steps in the support, with its unnormalised weight.
fn enumerate(p: &[f64], n: usize, x: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(p: &[f64], left: usize, rem: usize, cur: &mut Vec<usize>, w: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if left == 0 {
            if rem == 0 {
                out.push((cur.clone(), w));
            }
            return;
        }
        for d in 0..=rem.min(p.len() - 1) {
            if p[d] > 0.0 {
                cur.push(d);
                rec(p, left - 1, rem - d, cur, w * p[d], out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(p, n, x, &mut Vec::new(), 1.0, &mut out);
    out
}

fn frequencies(s: &BridgeSampler, draws: usize, seed: u64) -> HashMap<Vec<usize>, u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = HashMap::new();
    for _ in 0..draws {
        *h.entry(s.sample(&mut rng).unwrap().increments).or_insert(0) += 1;
    }
    h
}

fn gof_against_enumeration(p: &[f64], n: usize, x: usize, kind: SamplerKind, draws: usize) -> f64 {
    let w = WeightSequence::tabulated(p).unwrap();
    let s = BridgeSampler::new(&w, n, x, kind).unwrap();
    let paths = enumerate(p, n, x);
    let total: f64 = paths.iter().map(|(_, w)| w).sum();
    let freq = frequencies(&s, draws, 7);
    let observed: Vec<u64> = paths.iter().map(|(q, _)| *freq.get(q).unwrap_or(&0)).collect();
    assert_eq!(observed.iter().sum::<u64>(), draws as u64, "sampled a path outside the support");
    let probs: Vec<f64> = paths.iter().map(|(_, w)| w / total).collect();
    chi2_gof_p(&observed, &probs)
}

#[test]
fn sampler_examples() {
    for kind in [SamplerKind::Exact, SamplerKind::Rejection, SamplerKind::Split] {
        assert!(gof_against_enumeration(&[1.0, 1.0], 3, 1, kind, 30_000) > 0.001);
        assert!(gof_against_enumeration(&[0.5, 0.5], 4, 2, kind, 30_000) > 0.001);
        let w = WeightSequence::geometric(0.5, 0.5).unwrap();
        let s = BridgeSampler::new(&w, 1, 9, kind).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.sample(&mut rng).unwrap().increments, vec![9]);
    }
}

#[test]
fn split_and_rejection_match_enumeration() {
    let p = [0.3, 0.0, 1.1, 0.6, 0.2];
    for kind in [SamplerKind::Split, SamplerKind::Rejection] {
        let pv = gof_against_enumeration(&p, 5, 7, kind, 60_000);
        assert!(pv > 0.001, "{kind:?}: p = {pv}");
    }
}

#[test]
fn step_products_equal_enumerated_law() {
    let cases: [&[f64]; 3] = [&[0.5, 0.5], &[0.2, 1.0, 0.0, 3.0], &[1.0, 0.3, 0.7]];
    for p in cases {
        let w = WeightSequence::tabulated(p).unwrap();
        for n in 1..=10 {
            for x in 0..=6.min(n * (p.len() - 1)) {
                let paths = enumerate(p, n, x);
                if paths.is_empty() {
                    assert!(BridgeSampler::new(&w, n, x, SamplerKind::Exact).is_err());
                    continue;
                }
                let s = BridgeSampler::new(&w, n, x, SamplerKind::Exact).unwrap();
                let t = s.table().unwrap();
                let total: f64 = paths.iter().map(|(_, w)| w).sum();
                for (path, weight) in &paths {
                    let mut rem = x;
                    let mut prob = 1.0;
                    for (i, &d) in path.iter().enumerate() {
                        prob *= step_distribution(t, n - i, rem)[d];
                        rem -= d;
                    }
                    assert!((prob - weight / total).abs() < 1e-12);
                    let lp = path_log_probability(
                        &w,
                        &BridgePath {
                            increments: path.clone(),
                            x_n: x,
                        },
                    )
                    .unwrap();
                    assert!((lp.exp() - weight / total).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn rejection_matches_exact_on_midpoint_law() {
    let w = WeightSequence::geometric(0.5, 0.5).unwrap();
    let (n, x) = (20, 10);
    let draws = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = |kind| {
        let s = BridgeSampler::new(&w, n, x, kind).unwrap();
        let mut c = vec![0u64; x + 1];
        for _ in 0..draws {
            c[s.sample(&mut rng).unwrap().partial_sums()[n / 2]] += 1;
        }
        c
    };
    let a = counts(SamplerKind::Exact);
    let b = counts(SamplerKind::Rejection);
    assert!(chi2_two_sample_p(&a, &b) > 0.001);
    let m = bridge_marginal(&w, n, x, n / 2).unwrap();
    assert!(chi2_gof_p(&a, &m) > 0.001);
}

#[test]
fn split_matches_marginal_on_larger_instance() {
    let w = WeightSequence::uniform_map_step();
    let (n, x) = (301, 900);
    let s = BridgeSampler::new(&w, n, x, SamplerKind::Split).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = 100;
    let mut c = vec![0u64; x + 1];
    for _ in 0..20_000 {
        let path = s.sample(&mut rng).unwrap();
        assert_eq!(path.increments.iter().sum::<usize>(), x);
        c[path.partial_sums()[k]] += 1;
    }
    let m = bridge_marginal(&w, n, x, k).unwrap();
    assert!(chi2_gof_p(&c, &m) > 0.001);
}

#[test]
fn deterministic_paths() {
    let w = WeightSequence::tabulated(&[0.0, 0.0, 1.0, 1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in [SamplerKind::Exact, SamplerKind::Rejection, SamplerKind::Split] {
        let s = BridgeSampler::new(&w, 6, 12, kind).unwrap();
        let (p, tries) = s.sample_counting(&mut rng).unwrap();
        assert_eq!(p.increments, vec![2; 6]);
        assert_eq!(tries, 1);
    }
    assert!(BridgeSampler::new(&w, 6, 11, SamplerKind::Exact).is_err());
    assert!(BridgeSampler::new(&w, 6, 19, SamplerKind::Split).is_err());
}

#[test]
fn rejection_acceptance_rate_matches_peak() {
    let w = WeightSequence::geometric(0.5, 0.5).unwrap();
    let (n, x) = (400, 200);
    let r = classify_regime(&w, n, x, &ClassifyOptions::default()).unwrap();
    let s = BridgeSampler::new(&w, n, x, SamplerKind::Rejection).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reps = 400;
    let tries: u64 = (0..reps).map(|_| s.sample_counting(&mut rng).unwrap().1).sum();
    let rate = reps as f64 / tries as f64;
    let peak = 1.0 / (r.v_n * (2.0 * std::f64::consts::PI).sqrt());
    assert!(rate / peak < 1.5 && peak / rate < 1.5, "rate {rate} peak {peak}");
}

#[test]
fn stats_examples() {
    let grid = [0.0, 0.25, 0.5, 1.0];
    let flat = BridgePath {
        increments: vec![3; 8],
        x_n: 24,
    };
    let s = bridge_stats(&flat, &grid);
    assert_eq!(s.sum_sq, 24.0 * 24.0 / 8.0);
    assert_eq!(s.max_inc, 3);
    assert_eq!(s.argmax, 0);
    assert!(s.marginal_devs.iter().all(|&d| d.abs() < 1e-12));

    let spike = BridgePath {
        increments: vec![0, 0, 0, 0, 9],
        x_n: 9,
    };
    let s = bridge_stats(&spike, &grid);
    assert_eq!(s.sum_sq, 81.0);
    assert_eq!(s.max_inc, 9);
    assert_eq!(s.argmax, 4);
    assert_eq!(s.marginal_devs[3], 0.0);
    assert!(s.sum_sq >= (s.x_n * s.x_n) as f64 / 5.0);

    let tie = BridgePath {
        increments: vec![1, 4, 0, 4],
        x_n: 9,
    };
    assert_eq!(bridge_stats(&tie, &grid).argmax, 1);
    let rep = condensation_report(&[bridge_stats(&tie, &grid), bridge_stats(&spike, &grid)]);
    assert!(rep.mean_ratio <= 1.0);
    assert_eq!(rep.argmax_hist.iter().sum::<u64>(), 2);
}

#[test]
fn brownian_marginals_small_bulk() {
    let w = WeightSequence::geometric(0.5, 0.5).unwrap();
    let (n, x) = (400, 200);
    let r = classify_regime(&w, n, x, &ClassifyOptions::default()).unwrap();
    let s = BridgeSampler::new(&w, n, x, SamplerKind::Auto).unwrap();
    assert_eq!(s.kind(), SamplerKind::Exact);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let samples: Vec<BridgeStats> = (0..4000)
        .map(|_| bridge_stats(&s.sample(&mut rng).unwrap(), &grid))
        .collect();
    let rep = check_brownian_marginals(&samples, r.variance_scale());
    assert_eq!(rep.checks[0].var_ratio, 0.0);
    assert_eq!(rep.checks[10].var_ratio, 0.0);
    assert_relative_eq!(rep.checks[5].target, 0.25);
    assert!(rep.max_rel_err() < 0.15, "{rep:?}");
    assert!((rep.kurtosis_mid - 3.0).abs() < 0.5);
}
