//! Weight sequences, generating functions, exponential tilting and regime
//! classification.
//!
//! A [`WeightSequence`] wraps a [`Family`] together with the analytic
//! metadata needed to pick a scaling regime. Generating-function derivatives
//! come from closed forms when the family has one and from adaptively
//! truncated power series otherwise.

mod family;
mod regime;
mod tilt;

pub use family::Family;
pub use regime::{classify_regime, ClassifyOptions, Regime, RegimeKind};
pub use tilt::{leaf_fraction_a, leaf_fraction_a_inverse, TiltedLaw};


use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenfunError {
    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),
    #[error("support lies in the sublattice {offset} + {period}Z")]
    Periodic { offset: usize, period: usize },
    #[error("series diverges or cannot be truncated at b = {b} (radius {radius})")]
    DivergentSeries { b: f64, radius: f64 },
    #[error("psi is infinite at the radius of convergence")]
    Infinite,
    #[error("target mean {target} outside ({lo}, {hi})")]
    OutOfRange { target: f64, lo: f64, hi: f64 },
    #[error("tilt solver stopped with residual {residual:e}")]
    SolveFailed { residual: f64 },
    #[error("x_n/n = {ratio} falls in no declared regime window")]
    AmbiguousRegime { ratio: f64 },
    #[error("missing analytic data: {0}")]
    MissingAnalyticData(String),
}

/// Declared behaviour `G(rho - z) ~ c z^(-alpha)` near the radius of convergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticData {
    pub alpha: f64,
    pub c: f64,
}

/// Declared stable-domain data: `G(rho s)/G(rho) = 1 - m + m s + (1-s)^alpha L(1/(1-s))`
/// with `L` tending to `slowly_varying`, and tail index `beta` of `p(k) rho^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableData {
    pub alpha: f64,
    pub m: f64,
    pub slowly_varying: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// JSON descriptor of a weight sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<StableData>,
}

/// Nonnegative weights `p(k)` with generating function `G(z) = sum p(k) z^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSequence {
    family: Family,
    analytic: Option<AnalyticData>,
    stable: Option<StableData>,
    support_min: usize,
    support_max: Option<usize>,
    radius: f64,
}

const SERIES_TOL: f64 = 1e-16;
const SERIES_MAX_CAP: usize = 1 << 25;
const SUPPORT_PROBE: usize = 64;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl WeightSequence {
    /// Builds a sequence usable for walks: at least two support points, aperiodic.
    pub fn new(family: Family) -> Result<Self, GenfunError> {
        let w = Self::new_lattice(family)?;
        let pts = w.support_probe();
        if pts.len() < 2 {
            return Err(GenfunError::InvalidWeights(
                "need at least two support points".into(),
            ));
        }
        let period = pts.iter().fold(0, |g, &k| gcd(g, k - pts[0]));
        if period > 1 {
            return Err(GenfunError::Periodic {
                offset: pts[0],
                period,
            });
        }
        Ok(w)
    }

    /// Builds a sequence allowing lattice or single-point support, as needed for
    /// tree offspring weights such as binary trees.
    pub fn new_lattice(family: Family) -> Result<Self, GenfunError> {
        family.validate_params().map_err(GenfunError::InvalidWeights)?;
        let radius = family.radius();
        let support_max = family.support_max();
        let probe = support_max.map_or(SUPPORT_PROBE, |m| m + 1);
        let support_min = (0..probe)
            .find(|&k| family.log_weight(k) > f64::NEG_INFINITY)
            .ok_or_else(|| GenfunError::InvalidWeights("all weights are zero".into()))?;
        let (analytic, stable) = default_metadata(&family);
        Ok(WeightSequence {
            family,
            analytic,
            stable,
            support_min,
            support_max,
            radius,
        })
    }

    pub fn from_descriptor(d: Descriptor) -> Result<Self, GenfunError> {
        let mut w = Self::new(d.family)?;
        if d.analytic.is_some() {
            w.analytic = d.analytic;
        }
        if d.stable.is_some() {
            w.stable = d.stable;
        }
        Ok(w)
    }

    pub fn descriptor(&self) -> Descriptor {
        Descriptor {
            family: self.family.clone(),
            analytic: self.analytic,
            stable: self.stable,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, GenfunError> {
        let d: Descriptor =
            serde_json::from_str(s).map_err(|e| GenfunError::InvalidWeights(e.to_string()))?;
        Self::from_descriptor(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.descriptor()).expect("descriptor serializes")
    }

    pub fn tabulated(weights: &[f64]) -> Result<Self, GenfunError> {
        Self::new(Family::Tabulated {
            tabulated: weights.to_vec(),
        })
    }

    pub fn geometric(ratio: f64, scale: f64) -> Result<Self, GenfunError> {
        Self::new(Family::Geometric {
            ratio,
            scale: Some(scale),
        })
    }

    pub fn uniform_map_step() -> Self {
        Self::new(Family::UniformMapStep).expect("valid family")
    }

    pub fn with_analytic(mut self, a: AnalyticData) -> Self {
        self.analytic = Some(a);
        self
    }

    pub fn with_stable(mut self, s: StableData) -> Self {
        self.stable = Some(s);
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }
    pub fn analytic(&self) -> Option<AnalyticData> {
        self.analytic
    }
    pub fn stable(&self) -> Option<StableData> {
        self.stable
    }
    /// Smallest `k` with `p(k) > 0`, written `i_p`.
    pub fn support_min(&self) -> usize {
        self.support_min
    }
    pub fn support_max(&self) -> Option<usize> {
        self.support_max
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn is_finite_support(&self) -> bool {
        self.support_max.is_some()
    }

    pub fn log_weight(&self, k: usize) -> f64 {
        if self.support_max.is_some_and(|m| k > m) {
            return f64::NEG_INFINITY;
        }
        self.family.log_weight(k)
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.log_weight(k).exp()
    }

    /// `p(0..=cap)`.
    pub fn weights_upto(&self, cap: usize) -> Vec<f64> {
        (0..=cap).map(|k| self.weight(k)).collect()
    }

    /// `p(k+1)`: the bridge steps attached to offspring weights `theta`.
    /// Declared singular behaviour carries over with `c` divided by `rho`.
    pub fn shifted(&self) -> Result<WeightSequence, GenfunError> {
        let s = WeightSequence::new_lattice(Family::Shifted {
            base: Box::new(self.family.clone()),
        })?;
        Ok(match self.analytic() {
            Some(a) if self.radius().is_finite() => s.with_analytic(AnalyticData {
                alpha: a.alpha,
                c: a.c / self.radius(),
            }),
            _ => s,
        })
    }

    /// Normalised tilted weights `b^d p(d)` on `0..=cap`, computed in log space.
    pub fn tilted_weights_upto(&self, b: f64, cap: usize) -> Vec<f64> {
        let lb = b.ln();
        let logs: Vec<f64> = (0..=cap)
            .map(|k| self.log_weight(k) + k as f64 * lb)
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        for v in &mut w {
            *v /= s;
        }
        w
    }

    fn support_probe(&self) -> Vec<usize> {
        let probe = self.support_max.map_or(SUPPORT_PROBE, |m| m + 1);
        (0..probe)
            .filter(|&k| self.log_weight(k) > f64::NEG_INFINITY)
            .collect()
    }

    /// `[G(b), G'(b), ..., G^(order)(b)]`.
    pub fn eval_derivatives(&self, b: f64, order: usize) -> Result<Vec<f64>, GenfunError> {
        if !(b > 0.0) || b > self.radius {
            return Err(GenfunError::DivergentSeries {
                b,
                radius: self.radius,
            });
        }
        if let Some(m) = self.support_max {
            return Ok(poly_derivs(self, m, b, order));
        }
        if let Some(d) = self.family.closed_derivs(b, order) {
            if d.iter().all(|v| !v.is_nan()) {
                return Ok(d);
            }
        }
        self.series_derivs(b, order)
    }

    fn series_derivs(&self, b: f64, order: usize) -> Result<Vec<f64>, GenfunError> {
        let lb = b.ln();
        let mut sums = vec![0.0; order + 1];
        let add_block = |lo: usize, hi: usize, acc: &mut [f64]| {
            let mut block = vec![0.0; order + 1];
            for k in lo..hi {
                let lw = self.log_weight(k);
                if lw == f64::NEG_INFINITY {
                    continue;
                }
                let t = (lw + k as f64 * lb).exp();
                let mut ff = 1.0;
                for (j, bj) in block.iter_mut().enumerate() {
                    if j > 0 {
                        ff *= k as f64 - (j - 1) as f64;
                    }
                    *bj += t * ff;
                }
            }
            for (a, bl) in acc.iter_mut().zip(&block) {
                *a += bl;
            }
            block
        };
        add_block(0, 64, &mut sums);
        let mut cap = 64;
        loop {
            let block = add_block(cap, 2 * cap, &mut sums);
            cap *= 2;
            let small = block
                .iter()
                .zip(&sums)
                .all(|(bl, s)| *bl <= SERIES_TOL * s.abs());
            if small && sums.iter().all(|s| s.is_finite()) {
                break;
            }
            if cap >= SERIES_MAX_CAP || sums.iter().any(|s| !s.is_finite()) {
                return Err(GenfunError::DivergentSeries {
                    b,
                    radius: self.radius,
                });
            }
        }
        Ok(sums
            .iter()
            .enumerate()
            .map(|(j, s)| s / b.powi(j as i32))
            .collect())
    }

    /// `Psi(b) = b G'(b) / G(b)`, the mean of the `b`-tilted law.
    pub fn psi(&self, b: f64) -> Result<f64, GenfunError> {
        if let Some(m) = self.support_max {
            if !(b > 0.0) {
                return Err(GenfunError::DivergentSeries {
                    b,
                    radius: self.radius,
                });
            }
            let w = self.tilted_weights_upto(b, m);
            return Ok(w.iter().enumerate().map(|(k, p)| k as f64 * p).sum());
        }
        let d = self.eval_derivatives(b, 1)?;
        if d[1].is_infinite() {
            return Err(GenfunError::Infinite);
        }
        Ok(b * d[1] / d[0])
    }

    /// `Psi(rho)`: the supremum of attainable tilted means.
    pub fn psi_at_radius(&self) -> f64 {
        if let Some(m) = self.support_max {
            return m as f64;
        }
        self.psi(self.radius).unwrap_or(f64::INFINITY)
    }

    /// Solves `Psi(b) = target` by monotone bisection.
    pub fn solve_tilt(&self, target: f64) -> Result<f64, GenfunError> {
        let lo_mean = self.support_min as f64;
        let hi_mean = self.psi_at_radius();
        if !(target > lo_mean && target < hi_mean) {
            return Err(GenfunError::OutOfRange {
                target,
                lo: lo_mean,
                hi: hi_mean,
            });
        }
        // b = map(t) is increasing in t; the logistic form keeps precision near 0 and rho.
        let rho = self.radius;
        let map = |t: f64| -> f64 {
            if rho.is_finite() {
                rho / (1.0 + (-t).exp())
            } else {
                t.exp()
            }
        };
        let psi_of = |b: f64| -> f64 {
            if b <= 0.0 {
                return lo_mean;
            }
            self.psi(b).unwrap_or(f64::INFINITY)
        };
        let below = |t: f64| -> Result<bool, GenfunError> { Ok(psi_of(map(t)) < target) };
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while below(hi)? {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(GenfunError::SolveFailed { residual: f64::NAN });
            }
        }
        while !below(lo)? {
            lo *= 2.0;
            if lo < -1e6 {
                return Err(GenfunError::SolveFailed { residual: f64::NAN });
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tol = 1e-12 * target.max(1.0);
        let cands = [map(lo), map(hi)];
        let best = cands
            .iter()
            .map(|&b| (b, (psi_of(b) - target).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("two candidates");
        if best.1 <= tol {
            Ok(best.0)
        } else {
            Err(GenfunError::SolveFailed { residual: best.1 })
        }
    }

    /// Variance of the `b`-tilted law.
    pub fn tilted_variance(&self, b: f64) -> Result<f64, GenfunError> {
        let f = self.factorial_moments(b, 2)?;
        Ok(f[2] + f[1] - f[1] * f[1])
    }

    /// `f_j = b^j G^(j)(b) / G(b)` for `j = 0..=order`.
    pub fn factorial_moments(&self, b: f64, order: usize) -> Result<Vec<f64>, GenfunError> {
        if let Some(m) = self.support_max {
            let w = self.tilted_weights_upto(b, m);
            return Ok((0..=order)
                .map(|j| {
                    w.iter()
                        .enumerate()
                        .map(|(k, p)| p * falling(k, j))
                        .sum()
                })
                .collect());
        }
        let d = self.eval_derivatives(b, order)?;
        Ok(d.iter()
            .enumerate()
            .map(|(j, g)| b.powi(j as i32) * g / d[0])
            .collect())
    }
}

fn falling(k: usize, j: usize) -> f64 {
    (0..j).map(|i| k as f64 - i as f64).product()
}

fn poly_derivs(w: &WeightSequence, m: usize, b: f64, order: usize) -> Vec<f64> {
    (0..=order)
        .map(|j| {
            (j..=m)
                .map(|k| w.weight(k) * falling(k, j) * b.powi((k - j) as i32))
                .sum()
        })
        .collect()
}

fn default_metadata(family: &Family) -> (Option<AnalyticData>, Option<StableData>) {
    match family {
        Family::Geometric { ratio, scale } if *ratio > 0.0 => {
            let c = Family::geometric_scale(*ratio, *scale);
            (
                Some(AnalyticData {
                    alpha: 1.0,
                    c: c / ratio,
                }),
                None,
            )
        }
        Family::UniformMapStep => (
            Some(AnalyticData {
                alpha: 0.5,
                c: 3f64.sqrt() / 2.0,
            }),
            None,
        ),
        Family::MapInduced { q: None } => (Some(AnalyticData { alpha: 0.5, c: 0.25 }), None),
        Family::StableExample { alpha } => (
            None,
            Some(StableData {
                alpha: *alpha,
                m: 1.0,
                slowly_varying: 1.0 / alpha,
                beta: Some(alpha + 1.0),
            }),
        ),
        _ => (None, None),
    }
}
