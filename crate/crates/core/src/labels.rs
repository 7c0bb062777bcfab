//! Label bridges with steps `>= -1` and well-labelled trees.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lukas::PlaneTree;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("label bridges need k >= 1")]
    EmptyBridge,
    #[error("labels have length {got}, tree has {want} vertices")]
    LengthMismatch { got: usize, want: usize },
    #[error("root label is {0}, expected 0")]
    RootLabel(i64),
    #[error("children of vertex {0} violate the bridge condition")]
    BadChildren(usize),
}

/// `b_0 = 0, ..., b_k = 0` with `b_i - b_(i-1) >= -1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelBridge {
    pub values: Vec<i64>,
}

impl LabelBridge {
    pub fn k(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_valid(&self) -> bool {
        self.values.len() >= 2
            && self.values[0] == 0
            && *self.values.last().expect("nonempty") == 0
            && self.values.windows(2).all(|w| w[1] - w[0] >= -1)
    }
}

/// Uniform over the `C(2k-1, k-1)` bridges of length `k`.
///
/// The shifted steps `b_i - b_(i-1) + 1` form a composition of `k` into `k`
/// nonnegative parts, read off from `k - 1` bars among `2k - 1` slots.
pub fn sample_label_bridge<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<LabelBridge, LabelError> {
    if k == 0 {
        return Err(LabelError::EmptyBridge);
    }
    let mut bars = index::sample(rng, 2 * k - 1, k - 1).into_vec();
    bars.sort_unstable();
    let mut values = Vec::with_capacity(k + 1);
    values.push(0i64);
    let mut prev = -1i64;
    let mut b = 0i64;
    for &bar in bars.iter().chain(std::iter::once(&(2 * k - 1))) {
        let y = bar as i64 - prev - 1;
        b += y - 1;
        values.push(b);
        prev = bar as i64;
    }
    Ok(LabelBridge { values })
}

/// A plane tree with integer labels; the root is labelled 0 and the labels
/// `(l(u), l(c_1), ..., l(c_k))` along each internal vertex form a label bridge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledTree {
    pub tree: PlaneTree,
    pub labels: Vec<i64>,
}

impl LabelledTree {
    pub fn new(tree: PlaneTree, labels: Vec<i64>) -> Result<Self, LabelError> {
        if labels.len() != tree.n() {
            return Err(LabelError::LengthMismatch {
                got: labels.len(),
                want: tree.n(),
            });
        }
        if labels[0] != 0 {
            return Err(LabelError::RootLabel(labels[0]));
        }
        for (u, kids) in tree.child_lists().iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let mut seq = Vec::with_capacity(kids.len() + 1);
            seq.push(0);
            seq.extend(kids.iter().map(|&c| labels[c] - labels[u]));
            if !(LabelBridge { values: seq }).is_valid() {
                return Err(LabelError::BadChildren(u));
            }
        }
        Ok(LabelledTree { tree, labels })
    }

    pub fn min_label(&self) -> i64 {
        self.labels.iter().copied().min().unwrap_or(0)
    }
}

/// Labels every internal vertex's children by an independent uniform bridge.
pub fn label_tree<R: Rng + ?Sized>(tree: PlaneTree, rng: &mut R) -> LabelledTree {
    let mut labels = vec![0i64; tree.n()];
    // Depth-first order lists parents before children.
    for (u, kids) in tree.child_lists().iter().enumerate() {
        if kids.is_empty() {
            continue;
        }
        let b = sample_label_bridge(kids.len(), rng).expect("k >= 1");
        for (c, v) in kids.iter().zip(&b.values[1..]) {
            labels[*c] = labels[u] + v;
        }
    }
    LabelledTree { tree, labels }
}
