//! Brute-force enumeration oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

/// All depth-first children-count sequences of plane trees with `n` vertices
/// and `k` leaves, listed by recursion on the remaining open slots.
pub fn trees(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, open: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let placed = cur.len();
        let leaves = cur.iter().filter(|&&c| c == 0).count();
        if placed == n {
            if open == 0 && leaves == k {
                out.push(cur.clone());
            }
            return;
        }
        if open == 0 || leaves > k {
            return;
        }
        for c in 0..n {
            let next_open = open - 1 + c;
            if next_open > n - placed - 1 {
                break;
            }
            cur.push(c);
            rec(n, k, next_open, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 1, &mut Vec::new(), &mut out);
    out
}

/// `prod theta(k_u)` for a children-count sequence.
pub fn tree_weight(theta: impl Fn(usize) -> f64, children: &[usize]) -> f64 {
    children.iter().map(|&c| theta(c)).product()
}

/// Enumerated law over trees: `(children, probability)`, zero-weight trees dropped.
pub fn tree_law(theta: impl Fn(usize) -> f64, n: usize, k: usize) -> Vec<(Vec<usize>, f64)> {
    let ts: Vec<(Vec<usize>, f64)> = trees(n, k)
        .into_iter()
        .map(|t| {
            let w = tree_weight(&theta, &t);
            (t, w)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = ts.iter().map(|(_, w)| w).sum();
    ts.into_iter().map(|(t, w)| (t, w / total)).collect()
}

/// Counts sampled keys against an enumerated law; panics on unknown keys.
pub fn align_counts<K: std::hash::Hash + Eq + std::fmt::Debug>(
    law: &[(K, f64)],
    counts: &HashMap<K, u64>,
) -> (Vec<u64>, Vec<f64>) {
    let known: u64 = law.iter().map(|(t, _)| *counts.get(t).unwrap_or(&0)).sum();
    let all: u64 = counts.values().sum();
    assert_eq!(known, all, "sampled outside the enumerated support");
    (
        law.iter().map(|(t, _)| *counts.get(t).unwrap_or(&0)).collect(),
        law.iter().map(|(_, p)| *p).collect(),
    )
}

pub fn binom(n: u64, k: u64) -> f64 {
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// All integer sequences `b_0 = 0, ..., b_k = 0` with steps `>= -1`.
pub fn label_bridges(k: usize) -> Vec<Vec<i64>> {
    fn rec(k: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        let last = *cur.last().unwrap();
        let left = (k + 1 - cur.len()) as i64;
        if left == 0 {
            if last == 0 {
                out.push(cur.clone());
            }
            return;
        }
        // Reaching 0 needs last - left <= 0.
        for next in (last - 1)..=(left - 1).max(last - 1) {
            if next - (left - 1) > 0 {
                break;
            }
            cur.push(next);
            rec(k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, &mut vec![0], &mut out);
    out
}
