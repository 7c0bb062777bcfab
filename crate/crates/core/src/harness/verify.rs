//! Exhaustive small-instance checks runnable from the command line.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::bridge::{step_distribution, BridgePath};
use crate::exactdist::BridgeTable;
use crate::genfun::WeightSequence;
use crate::labels::LabelledTree;
use crate::lukas::{compose_bridge, vervaat, LukasPath, PlaneTree};
use crate::mapbij::{build_map, verify_correspondence};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, worst: f64, tol: f64, cases: usize) -> Check {
    Check {
        name: name.to_string(),
        passed: worst <= tol,
        detail: format!("{cases} cases, max error {worst:.3e} (tolerance {tol:.0e})"),
    }
}

/// Nonnegative compositions of `x` into `n` parts with positive weight, and their weights.
fn bridge_paths(p: &[f64], n: usize, x: usize) -> Vec<(Vec<usize>, f64)> {
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
    rec(p, n, x, &mut Vec::with_capacity(n), 1.0, &mut out);
    out
}

/// Children sequences of plane trees with `n` vertices and `k` leaves.
fn plane_trees(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, open: usize, leaves: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if open == 0 && leaves == k {
                out.push(cur.clone());
            }
            return;
        }
        if open == 0 || leaves > k {
            return;
        }
        for c in 0..n {
            let next = open - 1 + c;
            if next > n - cur.len() - 1 {
                break;
            }
            cur.push(c);
            rec(n, k, next, leaves + usize::from(c == 0), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 1, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

fn label_bridges(k: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64];
    fn rec(k: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        let last = *cur.last().expect("nonempty");
        let left = (k + 1 - cur.len()) as i64;
        if left == 0 {
            if last == 0 {
                out.push(cur.clone());
            }
            return;
        }
        // The remaining steps must be able to come back to 0.
        for next in (last - 1)..=(left - 1) {
            cur.push(next);
            rec(k, cur, out);
            cur.pop();
        }
    }
    rec(k, &mut cur, &mut out);
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<u8>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).map(|i| ((m >> i) & 1) as u8).collect())
        .collect()
}

/// All well-labelled trees with `n` vertices.
pub fn labelled_trees(n: usize) -> Vec<LabelledTree> {
    let mut out = Vec::new();
    for k in 1..=n {
        for ch in plane_trees(n, k) {
            let tree = PlaneTree::from_children(ch).expect("enumerated excursion");
            let kids = tree.child_lists();
            let internal: Vec<usize> = (0..n).filter(|&u| !kids[u].is_empty()).collect();
            let choices: Vec<Vec<Vec<i64>>> = internal.iter().map(|&u| label_bridges(kids[u].len())).collect();
            let mut idx = vec![0usize; internal.len()];
            loop {
                let mut labels = vec![0i64; n];
                for (j, &u) in internal.iter().enumerate() {
                    for (c, b) in kids[u].iter().zip(&choices[j][idx[j]][1..]) {
                        labels[*c] = labels[u] + b;
                    }
                }
                out.push(LabelledTree::new(tree.clone(), labels).expect("enumerated labels"));
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
    }
    out
}

/// Bridge marginals, tilt invariance and step products against enumeration, for
/// `n <= max_n` and `x <= 6`.
fn bridge_checks(w: &WeightSequence, max_n: usize) -> Vec<Check> {
    let (mut marg, mut tilt, mut steps) = (0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    for n in 1..=max_n {
        for x in 0..=6 {
            let p = w.weights_upto(x);
            let paths = bridge_paths(&p, n, x);
            if paths.is_empty() {
                continue;
            }
            cases += 1;
            let total: f64 = paths.iter().map(|(_, q)| q).sum();
            let Ok(t) = BridgeTable::new(w, n, x) else {
                marg = f64::INFINITY;
                continue;
            };
            let tilted = BridgeTable::with_tilt(w, n, x, 0.37).ok();
            for k in 0..=n {
                let mut exact = vec![0.0; x + 1];
                for (path, q) in &paths {
                    exact[path[..k].iter().sum::<usize>()] += q / total;
                }
                let m = t.marginal(k);
                for (a, b) in exact.iter().zip(&m) {
                    marg = marg.max((a - b).abs());
                }
                if let Some(tt) = &tilted {
                    for (a, b) in m.iter().zip(tt.marginal(k)) {
                        tilt = tilt.max((a - b).abs());
                    }
                } else {
                    tilt = f64::INFINITY;
                }
            }
            for (path, q) in &paths {
                let mut rem = x;
                let mut prob = 1.0;
                for (i, &d) in path.iter().enumerate() {
                    prob *= step_distribution(&t, n - i, rem)[d];
                    rem -= d;
                }
                steps = steps.max((prob - q / total).abs());
            }
        }
    }
    vec![
        check("bridge marginals vs enumeration", marg, 1e-10, cases),
        check("bridge marginals under tilting", tilt, 1e-10, cases),
        check("exact sampler step products", steps, 1e-12, cases),
    ]
}

/// Exact image of (bridge, uniform subset) under composition and Vervaat,
/// compared with the `theta`-weighted tree law.
fn tree_check(theta: &WeightSequence, max_n: usize) -> Check {
    let max_n = max_n.min(9);
    let shifted = theta.shifted().ok();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=max_n {
        let th = theta.weights_upto(n);
        for k in 1..=n {
            if k == n && n != 1 {
                continue;
            }
            let trees: Vec<(Vec<usize>, f64)> = plane_trees(n, k)
                .into_iter()
                .map(|t| {
                    let w: f64 = t.iter().map(|&c| th[c]).product();
                    (t, w)
                })
                .filter(|(_, w)| *w > 0.0)
                .collect();
            let z: f64 = trees.iter().map(|(_, w)| w).sum();
            if z == 0.0 {
                continue;
            }
            cases += 1;
            let p: Vec<f64> = match &shifted {
                Some(s) => s.weights_upto(k - 1),
                None => vec![0.0],
            };
            let paths = bridge_paths(&p, n - k, k - 1);
            let zb: f64 = paths.iter().map(|(_, q)| q).sum();
            let subs = subsets(n, k);
            let mut law: HashMap<Vec<usize>, f64> = HashMap::new();
            for (path, q) in &paths {
                let s = BridgePath {
                    increments: path.clone(),
                    x_n: k - 1,
                };
                for l in &subs {
                    let Ok(wpath) = compose_bridge(&s, l) else {
                        worst = f64::INFINITY;
                        continue;
                    };
                    let exc: LukasPath = match vervaat::<()>(&wpath, &[]) {
                        Ok((e, _)) => e,
                        Err(_) => {
                            worst = f64::INFINITY;
                            continue;
                        }
                    };
                    let ch: Vec<usize> = exc.increments.iter().map(|&x| (x + 1) as usize).collect();
                    *law.entry(ch).or_insert(0.0) += q / zb / subs.len() as f64;
                }
            }
            for (t, w) in &trees {
                worst = worst.max((law.get(t).copied().unwrap_or(0.0) - w / z).abs());
            }
            let known: HashSet<&Vec<usize>> = trees.iter().map(|(t, _)| t).collect();
            for (t, q) in &law {
                if !known.contains(t) {
                    worst = worst.max(*q);
                }
            }
        }
    }
    check("tree law of bridge + subset + Vervaat", worst, 1e-12, cases)
}

/// Correspondence properties and injectivity of the map construction.
fn map_checks(max_n: usize) -> Vec<Check> {
    let max_n = max_n.min(7);
    let mut failures = 0;
    let mut cases = 0;
    let mut collisions = 0;
    for n in 2..=max_n {
        let mut codes = HashSet::new();
        for t in labelled_trees(n) {
            for flip in [false, true] {
                cases += 1;
                match build_map(&t, flip) {
                    Ok(m) => {
                        if !verify_correspondence(&t, &m).passed() {
                            failures += 1;
                        }
                        if !codes.insert(m.canonical_code()) {
                            collisions += 1;
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
        }
    }
    vec![
        check("map properties (i)-(iv), Euler, parity", failures as f64, 0.0, cases),
        check("map construction injective", collisions as f64, 0.0, cases),
    ]
}

/// Every oracle for weights `w` up to size `max_n`. `w` doubles as offspring
/// weights for the tree check when `w(0) > 0`.
pub fn verify_all(w: &WeightSequence, max_n: usize) -> Vec<Check> {
    let mut out = bridge_checks(w, max_n);
    if w.weight(0) > 0.0 {
        out.push(tree_check(w, max_n));
    }
    out.extend(map_checks(max_n));
    out
}
