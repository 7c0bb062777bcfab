//! Seeded Monte Carlo sweeps over `n`-grids with CSV and JSON output.
//!
//! Replica `r` at size `n` draws from `ChaCha8Rng` seeded by `(seed, n)` on
//! stream `r`, so results do not depend on the number of worker threads
//! (capped by `BICOND_THREADS`).

mod rule;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use rule::{Rule, RuleError};

use crate::bridge::{bridge_stats, BridgeError, BridgeSampler, SamplerKind};
use crate::genfun::{
    classify_regime, ClassifyOptions, Descriptor, GenfunError, RegimeKind, WeightSequence,
};
use crate::lukas::{luka_scale, luka_stats, LukasError, LukasPath, TreeSampler};
use crate::mapbij::{scaling_s, MapError, MapSampler};
use crate::stats::mc_mean_ci;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("fit needs at least 3 points with positive coordinates and distinct n, got {0}")]
    DegenerateFit(usize),
    #[error(transparent)]
    Genfun(#[from] GenfunError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Lukas(#[from] LukasError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// What a replica samples: a bridge ending at the rule value, or a tree / map
/// with the rule value as leaf count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Bridge,
    Tree,
    Map,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// `sum X_k^2`.
    SumSq,
    /// `sum X_k^2 / v_n`, with `v_n` the variance scale of the regime.
    SumSqScaled,
    /// `max X_k^2 / sum X_k^2`.
    MaxSqRatio,
    MaxInc,
    /// Position of the first maximal increment divided by `n`.
    ArgmaxFrac,
    /// `(S_(n/2) - x_n / 2)^2 / v_n`.
    MidDevSq,
    /// `Lambda_(n/2)`, leaves among the first half of the path.
    LeavesMid,
    LambdaSupDev,
    MeanDistance,
    MaxDistance,
    Sigma2,
    /// Mean distance times `(S(K/n) 9 / (4 n))^(1/4)`.
    RescaledDistance,
    MaxFaceDegree,
}

impl Statistic {
    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    pub fn applies_to(self, t: Target) -> bool {
        use Statistic::*;
        match self {
            SumSq | SumSqScaled | MaxSqRatio | MaxInc => true,
            ArgmaxFrac | MidDevSq => t == Target::Bridge,
            LeavesMid | LambdaSupDev => t != Target::Bridge,
            MeanDistance | MaxDistance | Sigma2 | RescaledDistance | MaxFaceDegree => t == Target::Map,
        }
    }
}

fn default_sampler() -> SamplerKind {
    SamplerKind::Auto
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub family: Descriptor,
    /// Builds the weights without the aperiodicity check (e.g. binary trees).
    #[serde(default)]
    pub lattice: bool,
    pub target: Target,
    /// `x_n` for bridges, `K_n` for trees and maps.
    pub rule: Rule,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerKind,
    /// Forces the regime used for `v_n` (a regime name such as `large-endpoint`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text)?,
            Some("json") => Self::from_json(&text)?,
            _ => {
                return Err(HarnessError::Config(format!(
                    "{} is neither .toml nor .json",
                    path.display()
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.statistics.is_empty() {
            return bad("statistics list is empty".into());
        }
        if let Some(s) = self.statistics.iter().find(|s| !s.applies_to(self.target)) {
            return bad(format!("statistic {} does not apply to {:?}", s.name(), self.target));
        }
        if let Some(r) = &self.regime {
            if RegimeKind::parse(r).is_none() {
                return bad(format!("unknown regime {r:?}"));
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<WeightSequence, HarnessError> {
        Ok(weights_from(self.family.clone(), self.lattice)?)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("plain data");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            force: self.regime.as_deref().and_then(RegimeKind::parse),
            ..ClassifyOptions::default()
        }
    }
}

/// Weights from a descriptor; `lattice` skips the aperiodicity check.
pub fn weights_from(d: Descriptor, lattice: bool) -> Result<WeightSequence, GenfunError> {
    if !lattice {
        return WeightSequence::from_descriptor(d);
    }
    let mut w = WeightSequence::new_lattice(d.family)?;
    if let Some(a) = d.analytic {
        w = w.with_analytic(a);
    }
    if let Some(s) = d.stable {
        w = w.with_stable(s);
    }
    Ok(w)
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub family: String,
    pub n: usize,
    pub param_json: String,
    pub stat: String,
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub code_version: String,
    pub rows: Vec<ResultRow>,
    /// `(n, message)` for grid points that failed; their rows carry NaN estimates.
    pub failures: Vec<(usize, String)>,
}

impl ExperimentResult {
    pub fn get(&self, n: usize, stat: Statistic) -> Option<&ResultRow> {
        let name = stat.name();
        self.rows.iter().find(|r| r.n == n && r.stat == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "experiment", "family", "n", "param_json", "stat", "estimate", "stderr", "replicas",
                "seed", "config_hash",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    /// Writes CSV, or JSON when the path ends in `.json`.
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path)?;
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let mut f = std::io::BufWriter::new(file);
            f.write_all(self.to_json().as_bytes())?;
            f.flush()?;
            Ok(())
        } else {
            self.write_csv(file)
        }
    }
}

/// Seed of the substream family for size `n`.
pub fn substream_seed(seed: u64, n: usize) -> u64 {
    // splitmix64 finaliser over the pair.
    let mut z = seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replica `replica` at size `n`.
pub fn replica_rng(seed: u64, n: usize, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, n));
    rng.set_stream(replica as u64);
    rng
}

/// Runs `f` on a pool sized by `BICOND_THREADS` when set.
pub fn with_threads<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match std::env::var("BICOND_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        Some(t) if t > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| HarnessError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

enum Sampler {
    Bridge(BridgeSampler),
    Tree(TreeSampler),
    Map(MapSampler),
}

struct Point {
    sampler: Sampler,
    param: usize,
    v_n: f64,
    meta: serde_json::Value,
}

fn prepare(cfg: &ExperimentConfig, w: &WeightSequence, n: usize) -> Result<Point, HarnessError> {
    let param = cfg.rule.value(n)?;
    let opts = cfg.classify_options();
    let needs_scale = cfg
        .statistics
        .iter()
        .any(|s| matches!(s, Statistic::SumSqScaled | Statistic::MidDevSq));
    match cfg.target {
        Target::Bridge => {
            let sampler = BridgeSampler::new(w, n, param, cfg.sampler)?;
            let (v_n, meta) = if needs_scale {
                let r = classify_regime(w, n, param, &opts)?;
                (r.variance_scale(), serde_json::json!({"x_n": param, "regime": r.kind.name(), "v_n": r.variance_scale()}))
            } else {
                (f64::NAN, serde_json::json!({"x_n": param}))
            };
            Ok(Point {
                sampler: Sampler::Bridge(sampler),
                param,
                v_n,
                meta,
            })
        }
        Target::Tree | Target::Map => {
            let (v_n, meta) = if needs_scale {
                let s = luka_scale(w, n, param, &opts)?;
                (s.v_n, serde_json::json!({"k_n": param, "regime": s.kind.name(), "v_n": s.v_n}))
            } else {
                (f64::NAN, serde_json::json!({"k_n": param}))
            };
            let sampler = if cfg.target == Target::Tree {
                Sampler::Tree(TreeSampler::with_kind(w, n, param, cfg.sampler)?)
            } else {
                Sampler::Map(MapSampler::new(w, n, param)?)
            };
            Ok(Point {
                sampler,
                param,
                v_n,
                meta,
            })
        }
    }
}

fn path_values(path: &LukasPath, stats: &[Statistic], v_n: f64, out: &mut [f64]) {
    let s = luka_stats(path);
    let half = path.lambda()[path.n() / 2] as f64;
    for (o, st) in out.iter_mut().zip(stats) {
        *o = match st {
            Statistic::SumSq => s.sum_sq,
            Statistic::SumSqScaled => s.sum_sq / v_n,
            Statistic::MaxSqRatio => (s.max_inc * s.max_inc) as f64 / s.sum_sq,
            Statistic::MaxInc => s.max_inc as f64,
            Statistic::LeavesMid => half,
            Statistic::LambdaSupDev => s.lambda_sup_dev,
            _ => *o,
        };
    }
}

fn replica(
    cfg: &ExperimentConfig,
    p: &Point,
    n: usize,
    r: usize,
) -> Result<Vec<f64>, HarnessError> {
    let mut rng = replica_rng(cfg.seed, n, r);
    let stats = &cfg.statistics;
    let mut out = vec![f64::NAN; stats.len()];
    match &p.sampler {
        Sampler::Bridge(b) => {
            let path = b.sample(&mut rng)?;
            let s = bridge_stats(&path, &[0.5]);
            for (o, st) in out.iter_mut().zip(stats) {
                *o = match st {
                    Statistic::SumSq => s.sum_sq,
                    Statistic::SumSqScaled => s.sum_sq / p.v_n,
                    Statistic::MaxSqRatio => {
                        let m = s.max_inc as f64;
                        if s.sum_sq > 0.0 { m * m / s.sum_sq } else { 0.0 }
                    }
                    Statistic::MaxInc => s.max_inc as f64,
                    Statistic::ArgmaxFrac => s.argmax as f64 / n as f64,
                    Statistic::MidDevSq => s.marginal_devs[0].powi(2) / p.v_n,
                    _ => f64::NAN,
                };
            }
        }
        Sampler::Tree(t) => path_values(&t.sample_path(&mut rng)?, stats, p.v_n, &mut out),
        Sampler::Map(m) => {
            let s = m.sample(&mut rng)?;
            path_values(&s.tree.tree.encode(), stats, p.v_n, &mut out);
            let rescale = if stats.contains(&Statistic::RescaledDistance) {
                (scaling_s(p.param as f64 / n as f64)? * 9.0 / (4.0 * n as f64)).powf(0.25)
            } else {
                f64::NAN
            };
            for (o, st) in out.iter_mut().zip(stats) {
                match st {
                    Statistic::MeanDistance => *o = s.report.mean_distance,
                    Statistic::MaxDistance => *o = s.report.max_distance as f64,
                    Statistic::Sigma2 => *o = s.report.sigma2,
                    Statistic::RescaledDistance => *o = s.report.mean_distance * rescale,
                    Statistic::MaxFaceDegree => *o = s.report.max_face_degree as f64,
                    _ => {}
                }
            }
        }
    }
    Ok(out)
}

/// Runs every grid point. A failing point is recorded in `failures` with NaN
/// rows and the sweep continues; the result is written to `output` if set.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let w = cfg.weights()?;
    let hash = cfg.hash();
    let family = w.family().name().to_string();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &cfg.n_grid {
        let outcome = prepare(cfg, &w, n).and_then(|p| {
            let values = with_threads(|| {
                (0..cfg.replicas)
                    .into_par_iter()
                    .map(|r| replica(cfg, &p, n, r))
                    .collect::<Result<Vec<_>, _>>()
            })??;
            Ok((p, values))
        });
        let row = |stat: &Statistic, meta: &serde_json::Value, est: f64, se: f64, reps: usize| ResultRow {
            experiment: cfg.name.clone(),
            family: family.clone(),
            n,
            param_json: meta.to_string(),
            stat: stat.name(),
            estimate: est,
            stderr: se,
            replicas: reps,
            seed: cfg.seed,
            config_hash: hash.clone(),
        };
        match outcome {
            Ok((p, values)) => {
                for (j, st) in cfg.statistics.iter().enumerate() {
                    let xs: Vec<f64> = values.iter().map(|v| v[j]).collect();
                    let ci = mc_mean_ci(&xs, 1.96);
                    rows.push(row(st, &p.meta, ci.mean, ci.stderr, xs.len()));
                }
            }
            Err(e) => {
                let meta = serde_json::json!({"error": e.to_string()});
                for st in &cfg.statistics {
                    rows.push(row(st, &meta, f64::NAN, f64::NAN, 0));
                }
                failures.push((n, e.to_string()));
            }
        }
    }
    let result = ExperimentResult {
        config_hash: hash,
        code_version: CODE_VERSION.to_string(),
        rows,
        failures,
    };
    if let Some(path) = &cfg.output {
        result.save(path)?;
    }
    Ok(result)
}

/// Least squares of `log y` on `log x`: `(slope, r^2)`.
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<(f64, f64), HarnessError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let distinct = xs.iter().any(|&x| x != xs[0]);
    if pairs.len() < 3 || !distinct || pairs.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(HarnessError::DegenerateFit(pairs.len()));
    }
    let (slope, intercept) = crate::stats::fit_exponent(&xs, &ys);
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x.ln()).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((slope, r2))
}
