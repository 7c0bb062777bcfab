//! Exact distributions of nondecreasing walks by convolution.
//!
//! [`ExactTable`] holds `Z_k(x)`, the total weight of paths from 0 to `x` in
//! `k` steps. Rows are stored as a log scale times a vector with maximum 1,
//! which keeps rows with very different magnitudes representable.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::conv;
use crate::genfun::{classify_regime, ClassifyOptions, GenfunError, Regime, WeightSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error(transparent)]
    Genfun(#[from] GenfunError),
    #[error("cap {cap} too small: only {covered} of the mass is inside the window")]
    CapTooSmall { cap: usize, covered: f64 },
    #[error("endpoint {x} is unreachable in {n} steps")]
    IncompatibleEndpoint { n: usize, x: usize },
    #[error("step weights vanish on 0..={cap}")]
    EmptyLaw { cap: usize },
    #[error("row {k} was not retained")]
    RowDropped { k: usize },
}

/// One row `Z_k(.)`, equal to `exp(log_scale) * vals`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub log_scale: f64,
    pub vals: Vec<f64>,
}

impl Row {
    pub fn log_z(&self, x: usize) -> f64 {
        match self.vals.get(x) {
            Some(&v) if v > 0.0 => v.ln() + self.log_scale,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Sum of the row in linear scale.
    pub fn total(&self) -> f64 {
        self.vals.iter().sum::<f64>() * self.log_scale.exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactTable {
    n: usize,
    cap: usize,
    normalized: bool,
    /// All rows `0..=n`, or only row `n`.
    rows: Vec<Row>,
}

impl ExactTable {
    /// Convolves the step weights `p(0..=cap)` `n` times.
    ///
    /// `normalized` records that `p` is a probability law; it does not rescale.
    pub fn build(
        weights: &[f64],
        n: usize,
        cap: usize,
        normalized: bool,
        keep_rows: bool,
    ) -> Result<Self, ExactError> {
        let mut p: Vec<f64> = weights[..weights.len().min(cap + 1)].to_vec();
        let p_scale = conv::rescale(&mut p);
        if p.iter().all(|&v| v == 0.0) {
            return Err(ExactError::EmptyLaw { cap });
        }
        let mut rows = Vec::with_capacity(if keep_rows { n + 1 } else { 1 });
        let mut cur = Row {
            log_scale: 0.0,
            vals: vec![1.0],
        };
        for _ in 0..n {
            let mut vals = conv::convolve(&cur.vals, &p, cap);
            let s = conv::rescale(&mut vals);
            let next = Row {
                log_scale: cur.log_scale + p_scale + s,
                vals,
            };
            if keep_rows {
                rows.push(std::mem::replace(&mut cur, next));
            } else {
                cur = next;
            }
        }
        rows.push(cur);
        Ok(ExactTable {
            n,
            cap,
            normalized,
            rows,
        })
    }

    /// Table of a weight sequence on `0..=cap`.
    pub fn from_weights(
        w: &WeightSequence,
        n: usize,
        cap: usize,
        keep_rows: bool,
    ) -> Result<Self, ExactError> {
        let normalized = w
            .eval_derivatives(1.0, 0)
            .map(|g| (g[0] - 1.0).abs() < 1e-12)
            .unwrap_or(false);
        Self::build(&w.weights_upto(cap), n, cap, normalized, keep_rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn cap(&self) -> usize {
        self.cap
    }
    pub fn normalized(&self) -> bool {
        self.normalized
    }
    pub fn keeps_rows(&self) -> bool {
        self.rows.len() == self.n + 1
    }

    pub fn row(&self, k: usize) -> Result<&Row, ExactError> {
        if k == self.n {
            return Ok(self.rows.last().expect("row n is always kept"));
        }
        if self.keeps_rows() {
            Ok(&self.rows[k])
        } else {
            Err(ExactError::RowDropped { k })
        }
    }

    /// `log Z_k(x)`; `-inf` for unreachable or out-of-range `x`.
    pub fn log_z(&self, k: usize, x: usize) -> Result<f64, ExactError> {
        Ok(self.row(k)?.log_z(x))
    }

    pub fn z(&self, k: usize, x: usize) -> Result<f64, ExactError> {
        Ok(self.log_z(k, x)?.exp())
    }
}

/// `log(b^d p(d) / G(b))` for `d = 0..=cap`.
pub fn log_tilted_masses(
    w: &WeightSequence,
    b: f64,
    cap: usize,
) -> Result<Vec<f64>, ExactError> {
    let lg = w.eval_derivatives(b, 0)?[0].ln();
    let lb = b.ln();
    Ok((0..=cap)
        .map(|d| w.log_weight(d) + d as f64 * lb - lg)
        .collect())
}

/// Tilt used for bridges to `x` in `n` steps: `b_n` when `x/n < Psi(rho)`,
/// `rho` beyond, and 1 when no tilt is solvable.
pub fn bridge_tilt(w: &WeightSequence, n: usize, x: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let r = x as f64 / n as f64;
    if r < w.psi_at_radius() {
        w.solve_tilt(r).unwrap_or(1.0)
    } else if w.radius().is_finite() {
        w.radius()
    } else {
        1.0
    }
}

/// One row of the CSV discrepancy report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LltReport {
    pub family: String,
    pub n: usize,
    pub x_n: usize,
    pub regime: String,
    pub v_n: f64,
    pub sup_error: f64,
    pub window_lo: i64,
    pub window_hi: i64,
    #[serde(skip)]
    pub detail: Regime,
}

const LLT_COVERAGE: f64 = 1.0 - 1e-9;

/// `sup_k |v_n P(S^(b_n)_n = x_n + k) - phi(k / v_n)|` over `k` in `[-x_n, 12 v_n]`.
pub fn llt_discrepancy(
    w: &WeightSequence,
    n: usize,
    x_n: usize,
    opts: &ClassifyOptions,
) -> Result<LltReport, ExactError> {
    let regime = classify_regime(w, n, x_n, opts)?;
    let v = regime.v_n;
    let mut extra = (12.0 * v).ceil() as usize;
    let (dist, cap) = loop {
        let cap = x_n + extra;
        let masses: Vec<f64> = log_tilted_masses(w, regime.b_n, cap)?
            .into_iter()
            .map(f64::exp)
            .collect();
        let (vals, s) = conv::power(&masses, n, cap);
        let dist: Vec<f64> = vals.iter().map(|v| v * s.exp()).collect();
        let covered: f64 = dist.iter().sum();
        if covered >= LLT_COVERAGE {
            break (dist, cap);
        }
        if extra > 8 * (12.0 * v).ceil() as usize + 8 {
            return Err(ExactError::CapTooSmall { cap, covered });
        }
        extra *= 2;
    };
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let sup_error = dist
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let k = j as f64 - x_n as f64;
            (v * p - norm * (-k * k / (2.0 * v * v)).exp()).abs()
        })
        .fold(0.0, f64::max);
    // Points outside the window only see the Gaussian term.
    let lo_tail = norm * (-(x_n as f64 + 1.0).powi(2) / (2.0 * v * v)).exp();
    Ok(LltReport {
        family: w.family().name().to_string(),
        n,
        x_n,
        regime: regime.kind.name().to_string(),
        v_n: v,
        sup_error: sup_error.max(lo_tail),
        window_lo: -(x_n as i64),
        window_hi: (cap - x_n) as i64,
        detail: regime,
    })
}

/// Gaussian mass inside the LLT window, for reporting.
pub fn gaussian_window_mass(report: &LltReport) -> f64 {
    let g = Normal::new(0.0, report.v_n).expect("positive scale");
    g.cdf(report.window_hi as f64 + 0.5) - g.cdf(report.window_lo as f64 - 0.5)
}

/// Exact table for bridges from 0 to `x` in `n` steps, built from tilted
/// weights on `0..=x` with every row kept.
#[derive(Clone, Debug)]
pub struct BridgeTable {
    pub n: usize,
    pub x: usize,
    pub b: f64,
    /// Step weights on `0..=x`, scaled to maximum 1.
    pub weights: Vec<f64>,
    pub table: ExactTable,
}

impl BridgeTable {
    pub fn new(w: &WeightSequence, n: usize, x: usize) -> Result<Self, ExactError> {
        Self::with_tilt(w, n, x, bridge_tilt(w, n, x))
    }

    pub fn with_tilt(w: &WeightSequence, n: usize, x: usize, b: f64) -> Result<Self, ExactError> {
        let lb = b.ln();
        let mut weights: Vec<f64> = (0..=x)
            .map(|d| w.log_weight(d) + d as f64 * lb)
            .collect();
        let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in weights.iter_mut() {
            *v = (*v - max).exp();
        }
        let table = ExactTable::build(&weights, n, x, false, true)?;
        if table.log_z(n, x)? == f64::NEG_INFINITY {
            return Err(ExactError::IncompatibleEndpoint { n, x });
        }
        Ok(BridgeTable {
            n,
            x,
            b,
            weights,
            table,
        })
    }

    /// `P(S_k = j | S_n = x)` for `j = 0..=x`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let (n, x) = (self.n, self.x);
        let rk = self.table.row(k).expect("rows kept");
        let rr = self.table.row(n - k).expect("rows kept");
        let lz = self.table.log_z(n, x).expect("rows kept");
        let mut pmf: Vec<f64> = (0..=x)
            .map(|j| {
                let a = rk.log_z(j);
                let c = rr.log_z(x - j);
                if a == f64::NEG_INFINITY || c == f64::NEG_INFINITY {
                    0.0
                } else {
                    (a + c - lz).exp()
                }
            })
            .collect();
        let s: f64 = pmf.iter().sum();
        for p in pmf.iter_mut() {
            *p /= s;
        }
        pmf
    }
}

/// Law of `S_k` for the bridge of `w` from 0 to `x_n` in `n` steps.
pub fn bridge_marginal(
    w: &WeightSequence,
    n: usize,
    x_n: usize,
    k: usize,
) -> Result<Vec<f64>, ExactError> {
    Ok(BridgeTable::new(w, n, x_n)?.marginal(k.min(n)))
}
