//! From well-labelled trees to pointed bipartite maps.
//!
//! The non-root vertices of the tree, in depth-first order, are the corners
//! `0..N` (`N = n - 1`). Corner `i` belongs to the map vertex `r(i + 1)`, the
//! leaf reached from vertex `i + 1` by following last children. Each corner is
//! joined to the next corner, cyclically, whose label is one less; corners of
//! minimal label are joined to an extra vertex `v*`. Edge `i` has half-edges
//! `2i` (at its corner) and `2i + 1` (at the other end).
//!
//! Map vertices are numbered by the depth-first rank of their leaf, and `v*`
//! comes last.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::genfun::{leaf_fraction_a_inverse, GenfunError, WeightSequence};
use crate::labels::{label_tree, LabelledTree};
use crate::lukas::{luka_stats, LukasError, TreeSampler};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("malformed labelling: {0}")]
    MalformedLabelling(String),
    #[error("scaling function needs 0 < x < 1, got {0}")]
    DomainError(f64),
    #[error(transparent)]
    Lukas(#[from] LukasError),
    #[error(transparent)]
    Genfun(#[from] GenfunError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Half-edge rotation system of a pointed rooted map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BipartiteMap {
    pub n_vertices: usize,
    /// Vertex carrying each half-edge.
    pub vertex_of: Vec<usize>,
    /// Next half-edge counterclockwise around the same vertex.
    pub next: Vec<usize>,
    /// Other half of the same edge.
    pub opposite: Vec<usize>,
    pub face_of: Vec<usize>,
    pub face_degree: Vec<usize>,
    pub root: usize,
    pub distinguished: usize,
    /// Map vertex of each tree leaf, indexed by tree vertex (`usize::MAX` for internal ones).
    pub vertex_of_leaf: Vec<usize>,
    /// First half-edge, in rotation order, of each corner's wedge.
    pub corner_start: Vec<usize>,
}

impl BipartiteMap {
    pub fn n_edges(&self) -> usize {
        self.vertex_of.len() / 2
    }
    pub fn n_faces(&self) -> usize {
        self.face_degree.len()
    }

    /// Euler characteristic `V - E + F`.
    pub fn euler(&self) -> i64 {
        self.n_vertices as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    /// Neighbour lists (with multiplicity).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for h in 0..self.vertex_of.len() {
            adj[self.vertex_of[h]].push(self.vertex_of[self.opposite[h]]);
        }
        adj
    }

    /// Recomputes faces as the orbits of `h -> next(opposite(h))`.
    pub fn recompute_faces(&mut self) {
        let (face_of, face_degree) = faces(&self.next, &self.opposite);
        self.face_of = face_of;
        self.face_degree = face_degree;
    }

    /// Isomorphism-invariant code of the rooted pointed map: half-edges are
    /// renumbered in order of discovery from the root.
    pub fn canonical_code(&self) -> Vec<usize> {
        let m = self.vertex_of.len();
        let mut idx = vec![usize::MAX; m];
        let mut order = Vec::with_capacity(m);
        let mut queue = VecDeque::from([self.root]);
        idx[self.root] = 0;
        order.push(self.root);
        while let Some(h) = queue.pop_front() {
            for g in [self.next[h], self.opposite[h]] {
                if idx[g] == usize::MAX {
                    idx[g] = order.len();
                    order.push(g);
                    queue.push_back(g);
                }
            }
        }
        let mut code = Vec::with_capacity(3 * m);
        for &h in &order {
            code.push(idx[self.next[h]]);
            code.push(idx[self.opposite[h]]);
            code.push(usize::from(self.vertex_of[h] == self.distinguished));
        }
        code
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }
}

fn faces(next: &[usize], opposite: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let m = next.len();
    let mut face_of = vec![usize::MAX; m];
    let mut degree = Vec::new();
    for start in 0..m {
        if face_of[start] != usize::MAX {
            continue;
        }
        let f = degree.len();
        let mut h = start;
        let mut d = 0;
        while face_of[h] == usize::MAX {
            face_of[h] = f;
            d += 1;
            h = next[opposite[h]];
        }
        degree.push(d);
    }
    (face_of, degree)
}

/// `r(v)`: the leaf reached from `v` by following last children.
fn rightmost_leaf(lt: &LabelledTree) -> Vec<usize> {
    let kids = lt.tree.child_lists();
    let mut r = vec![0; lt.tree.n()];
    for v in (0..lt.tree.n()).rev() {
        r[v] = match kids[v].last() {
            Some(&c) => r[c],
            None => v,
        };
    }
    r
}

/// Builds the map, with root half-edge on edge 0 oriented by `flip_root`.
pub fn build_map(lt: &LabelledTree, flip_root: bool) -> Result<BipartiteMap, MapError> {
    let n = lt.tree.n();
    if n < 2 {
        return Err(MapError::MalformedLabelling(
            "the tree needs at least one edge".into(),
        ));
    }
    LabelledTree::new(lt.tree.clone(), lt.labels.clone())
        .map_err(|e| MapError::MalformedLabelling(e.to_string()))?;
    let nc = n - 1;
    let r = rightmost_leaf(lt);
    let mut vertex_of_leaf = vec![usize::MAX; n];
    let mut k = 0;
    for v in 0..n {
        if lt.tree.is_leaf(v) {
            vertex_of_leaf[v] = k;
            k += 1;
        }
    }
    let vstar = k;
    let label = |i: usize| lt.labels[i + 1];
    let corner_vertex = |i: usize| vertex_of_leaf[r[i + 1]];

    // succ[i]: next cyclic corner with label one less, by a reverse scan over two laps.
    let mut succ: Vec<Option<usize>> = vec![None; nc];
    let mut next_pos: HashMap<i64, usize> = HashMap::new();
    for p in (0..2 * nc).rev() {
        let i = p % nc;
        if p < nc {
            succ[i] = next_pos.get(&(label(i) - 1)).map(|&q| q % nc);
        }
        next_pos.insert(label(i), p);
    }

    let m = 2 * nc;
    let mut vertex_of = vec![0; m];
    let opposite: Vec<usize> = (0..m).map(|h| h ^ 1).collect();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); nc];
    let mut to_star = Vec::new();
    for i in 0..nc {
        vertex_of[2 * i] = corner_vertex(i);
        match succ[i] {
            Some(c) => {
                vertex_of[2 * i + 1] = corner_vertex(c);
                incoming[c].push(i);
            }
            None => {
                vertex_of[2 * i + 1] = vstar;
                to_star.push(i);
            }
        }
    }

    // Rotation at each leaf vertex: its corners in increasing position, each
    // preceded by the edges arriving at it, nearest source first. Around `v*`
    // the edges come in decreasing order of their corner.
    let mut corners_of: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..nc {
        corners_of[corner_vertex(i)].push(i);
    }
    let mut next = vec![0; m];
    let mut corner_start = vec![0; nc];
    let mut link = |cycle: &[usize]| {
        for (j, &h) in cycle.iter().enumerate() {
            next[h] = cycle[(j + 1) % cycle.len()];
        }
    };
    for cs in &corners_of {
        let mut cycle = Vec::new();
        for &c in cs {
            let mut inc = incoming[c].clone();
            inc.sort_by_key(|&i| (c + nc - i) % nc);
            corner_start[c] = inc.first().map_or(2 * c, |&i| 2 * i + 1);
            cycle.extend(inc.iter().map(|&i| 2 * i + 1));
            cycle.push(2 * c);
        }
        link(&cycle);
    }
    let star: Vec<usize> = to_star.iter().rev().map(|&i| 2 * i + 1).collect();
    link(&star);

    let (face_of, face_degree) = faces(&next, &opposite);
    Ok(BipartiteMap {
        n_vertices: k + 1,
        vertex_of,
        next,
        opposite,
        face_of,
        face_degree,
        root: usize::from(flip_root),
        distinguished: vstar,
        vertex_of_leaf,
        corner_start,
    })
}

/// Graph distances from `source`.
pub fn bfs_distances(map: &BipartiteMap, source: usize) -> Vec<usize> {
    let adj = map.adjacency();
    let mut dist = vec![usize::MAX; map.n_vertices];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Face attached to each internal tree vertex, read in the angle just before
/// the wedge of its first child's corner. `None` for leaves.
pub fn face_of_internal(lt: &LabelledTree, map: &BipartiteMap) -> Vec<Option<usize>> {
    let mut prev = vec![0; map.next.len()];
    for (h, &g) in map.next.iter().enumerate() {
        prev[g] = h;
    }
    let before = |c: usize| map.face_of[map.opposite[prev[map.corner_start[c - 1]]]];
    lt.tree
        .child_lists()
        .iter()
        .map(|kids| {
            let f = before(*kids.first()?);
            kids.iter().all(|&c| before(c) == f).then_some(f)
        })
        .collect()
}

/// Outcome of the structural checks; `first_failure` names the first failed one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Correspondence {
    pub euler: bool,
    pub even_faces: bool,
    pub connected: bool,
    /// (i) `n - 1` edges, `K + 1` vertices.
    pub counts: bool,
    /// (ii) the face of each internal vertex has degree twice its arity, faces distinct.
    pub face_degrees: bool,
    /// (iii) leaves are in bijection with the non-distinguished vertices.
    pub leaves: bool,
    /// (iv) `label - min + 1` is the distance to the distinguished vertex.
    pub distances: bool,
    pub first_failure: Option<String>,
}

impl Correspondence {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Checks the map against the tree it was built from, recomputing faces and
/// distances from the raw rotation system.
pub fn verify_correspondence(lt: &LabelledTree, map: &BipartiteMap) -> Correspondence {
    let n = lt.tree.n();
    let k = lt.tree.leaves();
    let mut m = map.clone();
    m.recompute_faces();
    let involution = (0..m.opposite.len()).all(|h| m.opposite[m.opposite[h]] == h && m.opposite[h] != h);
    let euler = involution && m.euler() == 2;
    let even_faces = m.face_degree.iter().all(|d| d % 2 == 0);
    let dist = bfs_distances(&m, m.distinguished);
    let connected = dist.iter().all(|&d| d != usize::MAX);
    let counts = m.n_edges() == n - 1 && m.n_vertices == k + 1;

    let arity = lt.tree.children_counts();
    let mut seen = vec![false; m.n_faces()];
    let mut face_degrees = m.n_faces() == n - k;
    for (u, f) in face_of_internal(lt, &m).into_iter().enumerate() {
        if arity[u] == 0 {
            continue;
        }
        match f {
            Some(f) if m.face_degree[f] == 2 * arity[u] && !seen[f] => seen[f] = true,
            _ => {
                face_degrees = false;
                break;
            }
        }
    }

    let mut hit = vec![false; m.n_vertices];
    let mut leaves = true;
    for v in 0..n {
        if lt.tree.is_leaf(v) {
            let w = m.vertex_of_leaf[v];
            if w >= m.n_vertices || w == m.distinguished || hit[w] {
                leaves = false;
                break;
            }
            hit[w] = true;
        }
    }
    leaves &= hit.iter().filter(|&&h| h).count() == k;

    let min = lt.min_label();
    let distances = leaves
        && (0..n).filter(|&v| lt.tree.is_leaf(v)).all(|v| {
            let d = dist[m.vertex_of_leaf[v]];
            d != usize::MAX && d as i64 == lt.labels[v] - min + 1
        });

    let checks = [
        ("euler", euler),
        ("even faces", even_faces),
        ("connected", connected),
        ("(i) counts", counts),
        ("(ii) face degrees", face_degrees),
        ("(iii) leaves", leaves),
        ("(iv) distances", distances),
    ];
    let first_failure = checks
        .iter()
        .find(|(_, ok)| !ok)
        .map(|(name, _)| name.to_string());
    Correspondence {
        euler,
        even_faces,
        connected,
        counts,
        face_degrees,
        leaves,
        distances,
        first_failure,
    }
}

/// Distance and degree statistics of a pointed map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapReport {
    pub n_edges: usize,
    pub n_vertices: usize,
    pub n_faces: usize,
    /// `profile[d]`: number of vertices at distance `d` from the distinguished one.
    pub profile: Vec<usize>,
    /// Mean distance from the distinguished vertex to the other vertices.
    pub mean_distance: f64,
    pub max_distance: usize,
    /// `sum d (d - 1)` over half face degrees `d`.
    pub sigma2: f64,
    pub max_face_degree: usize,
}

pub fn map_report(map: &BipartiteMap) -> MapReport {
    let dist = bfs_distances(map, map.distinguished);
    let max_distance = dist.iter().copied().filter(|&d| d != usize::MAX).max().unwrap_or(0);
    let mut profile = vec![0; max_distance + 1];
    for &d in &dist {
        if d != usize::MAX {
            profile[d] += 1;
        }
    }
    let others = map.n_vertices - 1;
    let total: usize = dist
        .iter()
        .enumerate()
        .filter(|&(v, &d)| v != map.distinguished && d != usize::MAX)
        .map(|(_, &d)| d)
        .sum();
    MapReport {
        n_edges: map.n_edges(),
        n_vertices: map.n_vertices,
        n_faces: map.n_faces(),
        profile,
        mean_distance: if others > 0 { total as f64 / others as f64 } else { 0.0 },
        max_distance,
        sigma2: map
            .face_degree
            .iter()
            .map(|&d| {
                let h = (d / 2) as f64;
                h * (h - 1.0)
            })
            .sum(),
        max_face_degree: map.face_degree.iter().copied().max().unwrap_or(0),
    }
}

pub fn write_profile_csv<W: Write>(out: W, report: &MapReport) -> Result<(), MapError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["distance", "count"])?;
    for (d, c) in report.profile.iter().enumerate() {
        w.write_record([d.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `S(x) = (1 - x)(3 + x + sqrt((1 - x)(9 - x))) / (12 x)` for uniform bipartite maps.
pub fn scaling_s(x: f64) -> Result<f64, MapError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(MapError::DomainError(x));
    }
    Ok((1.0 - x) * (3.0 + x + ((1.0 - x) * (9.0 - x)).sqrt()) / (12.0 * x))
}

/// `F'(b) / (b F''(b))` with `b = A^(-1)(x)`, for general map weights `theta`.
pub fn scaling_s_general(theta: &WeightSequence, x: f64) -> Result<f64, MapError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(MapError::DomainError(x));
    }
    let b = leaf_fraction_a_inverse(theta, x)?;
    let d = theta.eval_derivatives(b, 2)?;
    Ok(d[1] / (b * d[2]))
}

/// One sampled map with its tree data.
pub struct MapSample {
    pub tree: LabelledTree,
    pub map: BipartiteMap,
    pub report: MapReport,
    /// `sum X_k^2` of the tree's Łukasiewicz path.
    pub luka_sum_sq: f64,
}

/// Sampler of maps with `n - 1` edges and `K + 1` vertices for weights `theta`.
pub struct MapSampler {
    trees: TreeSampler,
}

impl MapSampler {
    pub fn new(theta: &WeightSequence, n: usize, k: usize) -> Result<Self, MapError> {
        if n < 2 {
            return Err(MapError::MalformedLabelling("need at least one edge".into()));
        }
        Ok(MapSampler {
            trees: TreeSampler::new(theta, n, k)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MapSample, MapError> {
        let path = self.trees.sample_path(rng)?;
        let luka_sum_sq = luka_stats(&path).sum_sq;
        let tree = crate::lukas::decode_tree(&path)?;
        let lt = label_tree(tree, rng);
        let map = build_map(&lt, rng.random::<bool>())?;
        let report = map_report(&map);
        Ok(MapSample {
            tree: lt,
            map,
            report,
            luka_sum_sq,
        })
    }
}

pub fn sample_map<R: Rng + ?Sized>(
    theta: &WeightSequence,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<MapSample, MapError> {
    MapSampler::new(theta, n, k)?.sample(rng)
}
