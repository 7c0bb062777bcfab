//! Samplers for nondecreasing bridges and the statistics of their paths.
//!
//! Three exact samplers share one interface through [`BridgeSampler`]:
//!
//! * `Exact` draws steps backwards from a full table of `Z_k(x)`.
//! * `Rejection` draws i.i.d. tilted steps until the sum hits `x_n`.
//! * `Split` halves the time interval recursively, drawing the sum of the left
//!   half from tables of `Z_len` for the few lengths that occur. Its memory is
//!   `O(x_n log n)`, which makes instances with `n x_n` far beyond any full
//!   table reachable.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conv;
use crate::exactdist::{bridge_tilt, log_tilted_masses, BridgeTable, ExactError};
use crate::genfun::{GenfunError, WeightSequence};
use crate::stats;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Genfun(#[from] GenfunError),
    #[error("endpoint {x} is unreachable in {n} steps")]
    IncompatibleEndpoint { n: usize, x: usize },
    #[error("no acceptance after {tries} tries")]
    MaxTriesExceeded { tries: u64 },
    #[error("unknown sampler {0:?}")]
    UnknownSampler(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Increments of a bridge from 0 to `x_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgePath {
    pub increments: Vec<usize>,
    pub x_n: usize,
}

impl BridgePath {
    pub fn n(&self) -> usize {
        self.increments.len()
    }

    /// Partial sums `S_0, ..., S_n`.
    pub fn partial_sums(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.increments.len() + 1);
        s.push(0);
        let mut acc = 0;
        for &d in &self.increments {
            acc += d;
            s.push(acc);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Auto,
    Exact,
    Rejection,
    Split,
}

impl std::str::FromStr for SamplerKind {
    type Err = BridgeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "auto" => SamplerKind::Auto,
            "exact" | "dp" => SamplerKind::Exact,
            "rejection" => SamplerKind::Rejection,
            "split" => SamplerKind::Split,
            _ => return Err(BridgeError::UnknownSampler(s.to_string())),
        })
    }
}

/// Full tables are used up to this many cells.
pub const EXACT_CELL_LIMIT: f64 = 2.5e7;
pub const DEFAULT_MAX_TRIES: u64 = 10_000_000;

enum Imp {
    Exact(BridgeTable),
    Rejection {
        alias: WeightedAliasIndex<f64>,
        max_tries: u64,
    },
    Split(SplitTables),
}

/// A prepared sampler for bridges of `w` from 0 to `x` in `n` steps.
pub struct BridgeSampler {
    n: usize,
    x: usize,
    kind: SamplerKind,
    b: f64,
    imp: Imp,
}

impl BridgeSampler {
    pub fn new(
        w: &WeightSequence,
        n: usize,
        x: usize,
        kind: SamplerKind,
    ) -> Result<Self, BridgeError> {
        Self::with_max_tries(w, n, x, kind, DEFAULT_MAX_TRIES)
    }

    pub fn with_max_tries(
        w: &WeightSequence,
        n: usize,
        x: usize,
        kind: SamplerKind,
        max_tries: u64,
    ) -> Result<Self, BridgeError> {
        let lo = w.support_min() * n;
        let hi = w.support_max().map_or(usize::MAX, |m| m.saturating_mul(n));
        if x < lo || x > hi || (n == 0 && x != 0) {
            return Err(BridgeError::IncompatibleEndpoint { n, x });
        }
        let kind = match kind {
            SamplerKind::Auto => {
                if n as f64 * (x as f64 + 1.0) <= EXACT_CELL_LIMIT {
                    SamplerKind::Exact
                } else {
                    SamplerKind::Split
                }
            }
            k => k,
        };
        let b = bridge_tilt(w, n, x);
        let imp = match kind {
            SamplerKind::Exact => Imp::Exact(BridgeTable::with_tilt(w, n, x, b)?),
            SamplerKind::Rejection => {
                let masses: Vec<f64> = if x == lo || x == hi {
                    // Degenerate tilt: the limit law is a point mass at x/n.
                    let mut m = vec![0.0; x + 1];
                    m[x.checked_div(n).unwrap_or(0)] = 1.0;
                    m
                } else {
                    log_tilted_masses(w, b, x)?
                        .into_iter()
                        .map(f64::exp)
                        .collect()
                };
                let alias = WeightedAliasIndex::new(masses)
                    .map_err(|_| BridgeError::IncompatibleEndpoint { n, x })?;
                Imp::Rejection { alias, max_tries }
            }
            SamplerKind::Split => Imp::Split(SplitTables::new(w, n, x, b)?),
            SamplerKind::Auto => unreachable!("resolved above"),
        };
        Ok(BridgeSampler { n, x, kind, b, imp })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }
    pub fn tilt(&self) -> f64 {
        self.b
    }
    pub fn table(&self) -> Option<&BridgeTable> {
        match &self.imp {
            Imp::Exact(t) => Some(t),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BridgePath, BridgeError> {
        Ok(self.sample_counting(rng)?.0)
    }

    /// Samples and reports the number of tries (1 for non-rejection samplers).
    pub fn sample_counting<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(BridgePath, u64), BridgeError> {
        let (n, x) = (self.n, self.x);
        match &self.imp {
            Imp::Exact(t) => Ok((sample_from_table(t, rng), 1)),
            Imp::Rejection { alias, max_tries } => {
                let mut inc = vec![0usize; n];
                for tries in 1..=*max_tries {
                    let mut sum = 0usize;
                    let mut ok = true;
                    for slot in inc.iter_mut() {
                        *slot = alias.sample(rng);
                        sum += *slot;
                        if sum > x {
                            ok = false;
                            break;
                        }
                    }
                    if ok && sum == x {
                        return Ok((
                            BridgePath {
                                increments: inc,
                                x_n: x,
                            },
                            tries,
                        ));
                    }
                }
                Err(BridgeError::MaxTriesExceeded { tries: *max_tries })
            }
            Imp::Split(s) => Ok((s.sample(rng)?, 1)),
        }
    }
}

/// Law of the next step given `r` steps and `rem` remaining: entry `d` is
/// `p(d) Z_{r-1}(rem - d) / Z_r(rem)`.
pub fn step_distribution(t: &BridgeTable, r: usize, rem: usize) -> Vec<f64> {
    let prev = t.table.row(r - 1).expect("rows kept");
    let mut out: Vec<f64> = (0..=rem)
        .map(|d| t.weights[d] * prev.vals.get(rem - d).copied().unwrap_or(0.0))
        .collect();
    let s: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= s;
    }
    out
}

fn sample_from_table<R: Rng + ?Sized>(t: &BridgeTable, rng: &mut R) -> BridgePath {
    let (n, x) = (t.n, t.x);
    let mut inc = Vec::with_capacity(n);
    let mut rem = x;
    for r in (1..=n).rev() {
        let row = t.table.row(r).expect("rows kept");
        let prev = t.table.row(r - 1).expect("rows kept");
        // Z_r(rem) = sum_d p(d) Z_{r-1}(rem - d), in the units of row r-1.
        let total = row.vals[rem] * (row.log_scale - prev.log_scale).exp();
        let thr = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        let mut last_pos = 0;
        for d in 0..=rem {
            let term = t.weights[d] * prev.vals.get(rem - d).copied().unwrap_or(0.0);
            if term > 0.0 {
                last_pos = d;
                acc += term;
                if acc >= thr {
                    pick = Some(d);
                    break;
                }
            }
        }
        let d = pick.unwrap_or(last_pos);
        inc.push(d);
        rem -= d;
    }
    BridgePath {
        increments: inc,
        x_n: x,
    }
}

pub fn sample_exact<R: Rng + ?Sized>(
    w: &WeightSequence,
    n: usize,
    x_n: usize,
    rng: &mut R,
) -> Result<BridgePath, BridgeError> {
    BridgeSampler::new(w, n, x_n, SamplerKind::Exact)?.sample(rng)
}

pub fn sample_rejection<R: Rng + ?Sized>(
    w: &WeightSequence,
    n: usize,
    x_n: usize,
    rng: &mut R,
    max_tries: u64,
) -> Result<BridgePath, BridgeError> {
    BridgeSampler::with_max_tries(w, n, x_n, SamplerKind::Rejection, max_tries)?.sample(rng)
}

/// `log P(path)` under the bridge law: `sum log p(X_i) - log Z_n(x_n)`.
pub fn path_log_probability(w: &WeightSequence, path: &BridgePath) -> Result<f64, BridgeError> {
    let t = BridgeTable::with_tilt(w, path.n(), path.x_n, 1.0)?;
    let lmax = (0..=path.x_n)
        .map(|d| w.log_weight(d))
        .fold(f64::NEG_INFINITY, f64::max);
    let lw: f64 = path
        .increments
        .iter()
        .map(|&d| w.log_weight(d) - lmax)
        .sum();
    Ok(lw - t.table.log_z(path.n(), path.x_n)?)
}

/// Proposals tried at a split node before an exact scan.
const SPLIT_PROPOSALS: usize = 16;

struct SumTable {
    vals: Vec<f64>,
    cdf: Vec<f64>,
    prefix_max: Vec<f64>,
}

impl SumTable {
    fn new(mut vals: Vec<f64>, cap: usize) -> Self {
        vals.resize(cap + 1, 0.0);
        let max = vals.iter().cloned().fold(0.0, f64::max);
        // Zero out convolution noise.
        for v in vals.iter_mut() {
            if *v < max * 1e-14 {
                *v = 0.0;
            }
        }
        let mut cdf = Vec::with_capacity(vals.len());
        let mut prefix_max = Vec::with_capacity(vals.len());
        let (mut acc, mut m) = (0.0, 0.0f64);
        for &v in &vals {
            acc += v;
            m = m.max(v);
            cdf.push(acc);
            prefix_max.push(m);
        }
        SumTable {
            vals,
            cdf,
            prefix_max,
        }
    }
}

/// Tables of `Z_len` on `0..=x` for every length met when halving `n`.
struct SplitTables {
    n: usize,
    x: usize,
    tables: BTreeMap<usize, SumTable>,
}

impl SplitTables {
    fn new(w: &WeightSequence, n: usize, x: usize, b: f64) -> Result<Self, BridgeError> {
        let masses: Vec<f64> = log_tilted_masses(w, b, x)?
            .into_iter()
            .map(f64::exp)
            .collect();
        let mut lens = Vec::new();
        collect_lengths(n, &mut lens);
        lens.sort_unstable();
        lens.dedup();
        let mut raw: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &len in &lens {
            let v = if len == 1 {
                masses.clone()
            } else {
                let (l, r) = (len / 2, len - len / 2);
                let mut v = conv::convolve(&raw[&l], &raw[&r], x);
                conv::rescale(&mut v);
                v
            };
            raw.insert(len, v);
        }
        let tables = raw
            .into_iter()
            .map(|(len, v)| (len, SumTable::new(v, x)))
            .collect();
        Ok(SplitTables { n, x, tables })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BridgePath, BridgeError> {
        let mut inc = vec![0usize; self.n];
        // (start, len, sum)
        let mut stack = vec![(0usize, self.n, self.x)];
        while let Some((start, len, sum)) = stack.pop() {
            if len == 0 {
                continue;
            }
            if len == 1 {
                if self.tables[&1].vals[sum] == 0.0 {
                    return Err(BridgeError::IncompatibleEndpoint { n: self.n, x: self.x });
                }
                inc[start] = sum;
                continue;
            }
            let (l, r) = (len / 2, len - len / 2);
            let j = self.split(l, r, sum, rng)?;
            stack.push((start + l, r, sum - j));
            stack.push((start, l, j));
        }
        Ok(BridgePath {
            increments: inc,
            x_n: self.x,
        })
    }

    /// Draws `j` with probability proportional to `Z_l(j) Z_r(sum - j)`.
    fn split<R: Rng + ?Sized>(
        &self,
        l: usize,
        r: usize,
        sum: usize,
        rng: &mut R,
    ) -> Result<usize, BridgeError> {
        let (tl, tr) = (&self.tables[&l], &self.tables[&r]);
        let mass = tl.cdf[sum];
        let bound = tr.prefix_max[sum];
        if mass > 0.0 && bound > 0.0 {
            for _ in 0..SPLIT_PROPOSALS {
                let u = rng.random::<f64>() * mass;
                let j = tl.cdf[..=sum].partition_point(|&c| c <= u).min(sum);
                if rng.random::<f64>() * bound < tr.vals[sum - j] {
                    return Ok(j);
                }
            }
        }
        let terms: Vec<f64> = (0..=sum).map(|j| tl.vals[j] * tr.vals[sum - j]).collect();
        let total: f64 = terms.iter().sum();
        if !(total > 0.0) {
            return Err(BridgeError::IncompatibleEndpoint { n: self.n, x: self.x });
        }
        let thr = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (j, &t) in terms.iter().enumerate() {
            if t > 0.0 {
                last = j;
                acc += t;
                if acc >= thr {
                    return Ok(j);
                }
            }
        }
        Ok(last)
    }
}

fn collect_lengths(len: usize, out: &mut Vec<usize>) {
    if len == 0 || out.contains(&len) {
        return;
    }
    out.push(len);
    if len > 1 {
        collect_lengths(len / 2, out);
        collect_lengths(len - len / 2, out);
    }
}

/// Path statistics used by the bridge scaling checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeStats {
    pub n: usize,
    pub x_n: usize,
    pub sum_sq: f64,
    pub max_inc: usize,
    /// First index (0-based) where the maximum is attained.
    pub argmax: usize,
    pub t_grid: Vec<f64>,
    /// `S_floor(nt) - x_n t` on `t_grid`.
    pub marginal_devs: Vec<f64>,
}

pub fn bridge_stats(path: &BridgePath, t_grid: &[f64]) -> BridgeStats {
    let n = path.n();
    let sums = path.partial_sums();
    let mut max_inc = 0;
    let mut argmax = 0;
    for (i, &d) in path.increments.iter().enumerate() {
        if d > max_inc {
            max_inc = d;
            argmax = i;
        }
    }
    let marginal_devs = t_grid
        .iter()
        .map(|&t| {
            let k = ((n as f64 * t).floor() as usize).min(n);
            sums[k] as f64 - path.x_n as f64 * t
        })
        .collect();
    BridgeStats {
        n,
        x_n: path.x_n,
        sum_sq: path.increments.iter().map(|&d| (d as f64).powi(2)).sum(),
        max_inc,
        argmax,
        t_grid: t_grid.to_vec(),
        marginal_devs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalCheck {
    pub t: f64,
    pub var_ratio: f64,
    pub target: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalReport {
    pub checks: Vec<MarginalCheck>,
    /// Standardised fourth moment at the grid point closest to 1/2 (3 for a Gaussian).
    pub kurtosis_mid: f64,
}

impl MarginalReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.target > 0.0)
            .map(|c| c.rel_err)
            .fold(0.0, f64::max)
    }
}

/// Compares `Var(S_floor(nt) - x_n t) / v_n` with `t(1 - t)`.
pub fn check_brownian_marginals(samples: &[BridgeStats], v_n: f64) -> MarginalReport {
    let grid = samples.first().map(|s| s.t_grid.clone()).unwrap_or_default();
    let mut checks = Vec::with_capacity(grid.len());
    let mut kurtosis_mid = f64::NAN;
    let mid = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map(|(i, _)| i);
    for (i, &t) in grid.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s.marginal_devs[i]).collect();
        let var = stats::variance(&xs);
        let target = t * (1.0 - t);
        let ratio = var / v_n;
        checks.push(MarginalCheck {
            t,
            var_ratio: ratio,
            target,
            rel_err: if target > 0.0 {
                (ratio - target).abs() / target
            } else {
                ratio.abs()
            },
        });
        if Some(i) == mid && var > 0.0 {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64;
            kurtosis_mid = m4 / (var * var);
        }
    }
    MarginalReport {
        checks,
        kurtosis_mid,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CondensationReport {
    pub mean_ratio: f64,
    /// Counts of `argmax / n` in ten equal bins.
    pub argmax_hist: [u64; 10],
    pub uniformity_p: f64,
}

pub fn condensation_report(samples: &[BridgeStats]) -> CondensationReport {
    let mut hist = [0u64; 10];
    let mut ratio_sum = 0.0;
    for s in samples {
        let m = s.max_inc as f64;
        ratio_sum += if s.sum_sq > 0.0 { m * m / s.sum_sq } else { 0.0 };
        let bin = ((s.argmax as f64 / s.n as f64) * 10.0).floor() as usize;
        hist[bin.min(9)] += 1;
    }
    CondensationReport {
        mean_ratio: ratio_sum / samples.len() as f64,
        argmax_hist: hist,
        uniformity_p: stats::chi2_gof_p(&hist, &[0.1; 10]),
    }
}

/// One line of a sample dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub replica: u64,
    pub n: usize,
    pub x_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increments: Option<Vec<usize>>,
    pub stats: BridgeStats,
}

pub fn write_ndjson<W: Write>(out: &mut W, records: &[SampleRecord]) -> Result<(), BridgeError> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
