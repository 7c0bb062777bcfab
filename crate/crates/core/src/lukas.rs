//! Łukasiewicz paths of trees with a prescribed number of vertices and leaves.
//!
//! A tree with `n` vertices and `K` leaves is sampled in three steps: a bridge
//! `S` of `n - K` steps with weights `p(k) = theta(k + 1)` ending at `K - 1`,
//! interleaved with `K` steps of `-1` at uniformly chosen positions, then
//! rotated at its first minimum to obtain an excursion.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{BridgeError, BridgePath, BridgeSampler, SamplerKind};
use crate::genfun::{
    classify_regime, leaf_fraction_a_inverse, ClassifyOptions, RegimeKind, WeightSequence,
};

#[derive(Debug, Error)]
pub enum LukasError {
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("need 0 < K < n (or n = K = 1), got n = {n}, K = {k}")]
    Degenerate { n: usize, k: usize },
    #[error("bridge has {got} steps and ends at {end}; expected {want} steps ending at {want_end}")]
    LengthMismatch {
        got: usize,
        end: usize,
        want: usize,
        want_end: usize,
    },
    #[error("not an excursion: {0}")]
    InvalidExcursion(String),
    #[error("total increment must be -1, got {0}")]
    NotBridge(i64),
    #[error("no sum-of-squares scale in the {0} regime")]
    UnsupportedRegime(&'static str),
}

/// Increments in `{-1, 0, 1, ...}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LukasPath {
    pub increments: Vec<i64>,
}

impl LukasPath {
    pub fn n(&self) -> usize {
        self.increments.len()
    }

    pub fn total(&self) -> i64 {
        self.increments.iter().sum()
    }

    /// Leaf counter `Lambda_k`: the number of `-1` steps among the first `k`.
    pub fn lambda(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n() + 1);
        out.push(0);
        let mut c = 0;
        for &x in &self.increments {
            if x == -1 {
                c += 1;
            }
            out.push(c);
        }
        out
    }

    pub fn leaves(&self) -> usize {
        self.increments.iter().filter(|&&x| x == -1).count()
    }

    /// Nonnegative before time `n`, `-1` at `n`.
    pub fn is_excursion(&self) -> bool {
        let mut s = 0i64;
        let last = self.n().wrapping_sub(1);
        for (i, &x) in self.increments.iter().enumerate() {
            s += x;
            if (i < last && s < 0) || x < -1 {
                return false;
            }
        }
        !self.increments.is_empty() && s == -1
    }
}

/// Uniform 0/1 path with exactly `k` unit steps among `n`.
pub fn sample_subset_path<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<u8> {
    let mut out = vec![0u8; n];
    if k >= n {
        out.fill(1);
        return out;
    }
    for i in index::sample(rng, n, k) {
        out[i] = 1;
    }
    out
}

/// Interleaves the bridge with `-1` steps at the unit steps of `l`:
/// `W_k = S_{k - L_k} - L_k`.
pub fn compose_bridge(s: &BridgePath, l: &[u8]) -> Result<LukasPath, LukasError> {
    let k = l.iter().filter(|&&b| b == 1).count();
    let want = l.len() - k;
    let want_end = k.saturating_sub(1);
    let sum: usize = s.increments.iter().sum();
    if s.n() != want || s.x_n != want_end || sum != s.x_n || k == 0 {
        return Err(LukasError::LengthMismatch {
            got: s.n(),
            end: s.x_n,
            want,
            want_end,
        });
    }
    let mut steps = s.increments.iter();
    let increments = l
        .iter()
        .map(|&b| {
            if b == 1 {
                -1
            } else {
                *steps.next().expect("counted above") as i64
            }
        })
        .collect();
    Ok(LukasPath { increments })
}

/// Index `j` (1-based) of the first minimum of the partial sums `W_1..W_n`.
pub fn first_argmin(increments: &[i64]) -> usize {
    let mut s = 0i64;
    let mut best = i64::MAX;
    let mut at = 0;
    for (i, &x) in increments.iter().enumerate() {
        s += x;
        if s < best {
            best = s;
            at = i + 1;
        }
    }
    at
}

/// Cyclic shift at the first minimum, carrying a per-step payload along.
pub fn vervaat<T: Clone>(
    path: &LukasPath,
    payload: &[T],
) -> Result<(LukasPath, Vec<T>), LukasError> {
    let total = path.total();
    if total != -1 {
        return Err(LukasError::NotBridge(total));
    }
    let j = first_argmin(&path.increments);
    let rot = |v: &[i64]| [&v[j..], &v[..j]].concat();
    let pay = if payload.is_empty() {
        Vec::new()
    } else {
        [&payload[j..], &payload[..j]].concat()
    };
    Ok((
        LukasPath {
            increments: rot(&path.increments),
        },
        pay,
    ))
}

/// A plane tree in depth-first order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PlaneTree {
    children: Vec<usize>,
    parent: Vec<Option<usize>>,
}

impl TryFrom<Vec<usize>> for PlaneTree {
    type Error = LukasError;
    fn try_from(children: Vec<usize>) -> Result<Self, Self::Error> {
        PlaneTree::from_children(children)
    }
}

impl From<PlaneTree> for Vec<usize> {
    fn from(t: PlaneTree) -> Self {
        t.children
    }
}

impl PlaneTree {
    /// Builds the tree from depth-first children counts.
    pub fn from_children(children: Vec<usize>) -> Result<Self, LukasError> {
        let path = LukasPath {
            increments: children.iter().map(|&c| c as i64 - 1).collect(),
        };
        if !path.is_excursion() {
            return Err(LukasError::InvalidExcursion(format!("{children:?}")));
        }
        let mut parent = vec![None; children.len()];
        // Stack of (vertex, children still to attach).
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for (v, &c) in children.iter().enumerate() {
            if let Some(top) = stack.last_mut() {
                parent[v] = Some(top.0);
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
            }
            if c > 0 {
                stack.push((v, c));
            }
        }
        Ok(PlaneTree { children, parent })
    }

    pub fn n(&self) -> usize {
        self.children.len()
    }
    pub fn children_counts(&self) -> &[usize] {
        &self.children
    }
    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }
    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }
    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v] == 0
    }
    pub fn leaves(&self) -> usize {
        self.children.iter().filter(|&&c| c == 0).count()
    }

    /// Children of every vertex, in order.
    pub fn child_lists(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.children.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                out[*p].push(v);
            }
        }
        out
    }

    pub fn encode(&self) -> LukasPath {
        LukasPath {
            increments: self.children.iter().map(|&c| c as i64 - 1).collect(),
        }
    }
}

pub fn decode_tree(path: &LukasPath) -> Result<PlaneTree, LukasError> {
    if path.increments.iter().any(|&x| x < -1) {
        return Err(LukasError::InvalidExcursion("increment below -1".into()));
    }
    PlaneTree::from_children(path.increments.iter().map(|&x| (x + 1) as usize).collect())
}

/// Sampler of trees with `n` vertices and `k` leaves, weighted by `prod theta(k_u)`.
pub struct TreeSampler {
    n: usize,
    k: usize,
    bridge: Option<BridgeSampler>,
}

impl TreeSampler {
    pub fn new(theta: &WeightSequence, n: usize, k: usize) -> Result<Self, LukasError> {
        Self::with_kind(theta, n, k, SamplerKind::Auto)
    }

    pub fn with_kind(
        theta: &WeightSequence,
        n: usize,
        k: usize,
        kind: SamplerKind,
    ) -> Result<Self, LukasError> {
        if k == 0 || k > n || (k == n && n != 1) {
            return Err(LukasError::Degenerate { n, k });
        }
        if theta.weight(0) <= 0.0 {
            return Err(LukasError::Bridge(BridgeError::IncompatibleEndpoint {
                n,
                x: k,
            }));
        }
        let bridge = if n == k {
            None
        } else {
            Some(BridgeSampler::new(&theta.shifted().map_err(BridgeError::from)?, n - k, k - 1, kind)?)
        };
        Ok(TreeSampler { n, k, bridge })
    }

    pub fn bridge(&self) -> Option<&BridgeSampler> {
        self.bridge.as_ref()
    }

    /// Excursion-form path of a sampled tree.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LukasPath, LukasError> {
        let s = match &self.bridge {
            Some(b) => b.sample(rng)?,
            None => BridgePath {
                increments: Vec::new(),
                x_n: 0,
            },
        };
        let l = sample_subset_path(self.n, self.k, rng);
        let w = compose_bridge(&s, &l)?;
        Ok(vervaat::<()>(&w, &[])?.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PlaneTree, LukasError> {
        decode_tree(&self.sample_path(rng)?)
    }
}

pub fn sample_tree<R: Rng + ?Sized>(
    theta: &WeightSequence,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<PlaneTree, LukasError> {
    TreeSampler::new(theta, n, k)?.sample(rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LukaStats {
    pub n: usize,
    pub leaves: usize,
    pub max_inc: i64,
    pub argmax: usize,
    pub sum_sq: f64,
    /// `max_k |Lambda_k - k K / n|`.
    pub lambda_sup_dev: f64,
}

pub fn luka_stats(path: &LukasPath) -> LukaStats {
    let n = path.n();
    let k = path.leaves();
    let mut max_inc = i64::MIN;
    let mut argmax = 0;
    for (i, &x) in path.increments.iter().enumerate() {
        if x > max_inc {
            max_inc = x;
            argmax = i;
        }
    }
    let lambda_sup_dev = path
        .lambda()
        .iter()
        .enumerate()
        .map(|(i, &l)| (l as f64 - i as f64 * k as f64 / n as f64).abs())
        .fold(0.0, f64::max);
    LukaStats {
        n,
        leaves: k,
        max_inc,
        argmax,
        sum_sq: path.increments.iter().map(|&x| (x * x) as f64).sum(),
        lambda_sup_dev,
    }
}

/// Normalisation of `sum X_k^2` for Łukasiewicz paths with `n` steps and `K` leaves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LukaScale {
    /// Regime of the bridge `S` behind the path.
    pub kind: RegimeKind,
    pub v_n: f64,
    /// `A^(-1)(K/n)` in the bulk.
    pub b: Option<f64>,
}

/// `v_n` with `sum X_k^2 / v_n -> 1`: `n b F''(b) / F'(b)` with `b = A^(-1)(K/n)` in
/// the bulk, `(1 + alpha) K^2 / (alpha (n - K))` at the large endpoint.
pub fn luka_scale(
    theta: &WeightSequence,
    n: usize,
    k: usize,
    opts: &ClassifyOptions,
) -> Result<LukaScale, LukasError> {
    if k == 0 || k >= n {
        return Err(LukasError::Degenerate { n, k });
    }
    let shifted = theta.shifted().map_err(BridgeError::from)?;
    let regime = classify_regime(&shifted, n - k, k - 1, opts).map_err(BridgeError::from)?;
    let (nf, kf) = (n as f64, k as f64);
    match regime.kind {
        RegimeKind::Bulk => {
            let b = leaf_fraction_a_inverse(theta, kf / nf).map_err(BridgeError::from)?;
            let d = theta.eval_derivatives(b, 2).map_err(BridgeError::from)?;
            Ok(LukaScale {
                kind: regime.kind,
                v_n: nf * b * d[2] / d[1],
                b: Some(b),
            })
        }
        RegimeKind::LargeEndpoint => {
            let alpha = theta
                .analytic()
                .map(|a| a.alpha)
                .ok_or(LukasError::UnsupportedRegime(regime.kind.name()))?;
            Ok(LukaScale {
                kind: regime.kind,
                v_n: (1.0 + alpha) * kf * kf / (alpha * (nf - kf)),
                b: None,
            })
        }
        other => Err(LukasError::UnsupportedRegime(other.name())),
    }
}
