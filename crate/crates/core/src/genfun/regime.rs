use serde::{Deserialize, Serialize};

use super::{GenfunError, WeightSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegimeKind {
    Bulk,
    SmallEndpoint,
    LargeEndpoint,
    /// `lambda` is the limit value of `lambda_n / r_n`.
    StableDrift { lambda: f64 },
    StableGaussian,
    Condensation,
}

impl RegimeKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::Bulk => "bulk",
            RegimeKind::SmallEndpoint => "small-endpoint",
            RegimeKind::LargeEndpoint => "large-endpoint",
            RegimeKind::StableDrift { .. } => "stable-drift",
            RegimeKind::StableGaussian => "stable-gaussian",
            RegimeKind::Condensation => "condensation",
        }
    }

    /// Parses a regime name for forced classification.
    pub fn parse(s: &str) -> Option<RegimeKind> {
        Some(match s {
            "bulk" => RegimeKind::Bulk,
            "small" | "small-endpoint" => RegimeKind::SmallEndpoint,
            "large" | "large-endpoint" => RegimeKind::LargeEndpoint,
            "stable-drift" => RegimeKind::StableDrift { lambda: 0.0 },
            "stable-gaussian" => RegimeKind::StableGaussian,
            "condensation" => RegimeKind::Condensation,
            _ => return None,
        })
    }
}

/// Thresholds turning asymptotic regimes into finite-n decisions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub small_ratio_threshold: f64,
    pub large_ratio_threshold: f64,
    /// Stable regimes are considered once `x_n/n >= (1 - stable_band) Psi(rho)`.
    pub stable_band: f64,
    /// `|lambda_n / r_n| <= stable_window` counts as the drift regime.
    pub stable_window: f64,
    /// Skips threshold logic and applies the formulas of the given kind.
    pub force: Option<RegimeKind>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            small_ratio_threshold: 0.05,
            large_ratio_threshold: 20.0,
            stable_band: 0.5,
            stable_window: 3.0,
            force: None,
        }
    }
}

/// Scaling regime of `P(S_n = x_n)` with its scale `v_n` (standard-deviation scale).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub v_n: f64,
    pub b_n: f64,
    pub alpha: Option<f64>,
    pub m: Option<f64>,
    pub rho: f64,
    pub eps_n: Option<f64>,
    pub lambda_n: Option<f64>,
    pub r_n: Option<f64>,
    /// Bulk scale `sqrt(n Var xi^(b_n))`, reported alongside the stable Gaussian one.
    pub bulk_v_n: Option<f64>,
}

impl Regime {
    /// `v_n^2`, the variance scale used by path statistics.
    pub fn variance_scale(&self) -> f64 {
        self.v_n * self.v_n
    }
}

/// Picks the regime of `(n, x_n)` and computes `v_n`.
pub fn classify_regime(
    w: &WeightSequence,
    n: usize,
    x_n: usize,
    opts: &ClassifyOptions,
) -> Result<Regime, GenfunError> {
    let nf = n as f64;
    let xf = x_n as f64;
    let ratio = xf / nf;
    if n == 0 || x_n < w.support_min() * n {
        return Err(GenfunError::OutOfRange {
            target: ratio,
            lo: w.support_min() as f64,
            hi: w.psi_at_radius(),
        });
    }
    let kind = match opts.force {
        Some(k) => k,
        None => pick_kind(w, ratio, n, xf, opts)?,
    };
    let base = Regime {
        kind,
        v_n: f64::NAN,
        b_n: f64::NAN,
        alpha: None,
        m: None,
        rho: w.radius(),
        eps_n: None,
        lambda_n: None,
        r_n: None,
        bulk_v_n: None,
    };
    let regime = match kind {
        RegimeKind::Bulk => {
            let b = w.solve_tilt(ratio)?;
            Regime {
                v_n: (nf * w.tilted_variance(b)?).sqrt(),
                b_n: b,
                ..base
            }
        }
        RegimeKind::SmallEndpoint => {
            if !(w.weight(0) > 0.0 && w.weight(1) > 0.0) {
                return Err(GenfunError::MissingAnalyticData(
                    "small endpoint regime needs p(0) > 0 and p(1) > 0".into(),
                ));
            }
            Regime {
                v_n: xf.sqrt(),
                b_n: w.solve_tilt(ratio)?,
                ..base
            }
        }
        RegimeKind::LargeEndpoint => {
            let a = w.analytic().ok_or_else(|| {
                GenfunError::MissingAnalyticData("large endpoint regime needs (alpha, c)".into())
            })?;
            Regime {
                v_n: xf / (a.alpha * nf).sqrt(),
                b_n: w.solve_tilt(ratio)?,
                alpha: Some(a.alpha),
                ..base
            }
        }
        RegimeKind::StableDrift { .. } | RegimeKind::StableGaussian | RegimeKind::Condensation => {
            stable_regime(w, n, xf, base)?
        }
    };
    Ok(regime)
}

fn pick_kind(
    w: &WeightSequence,
    ratio: f64,
    n: usize,
    xf: f64,
    opts: &ClassifyOptions,
) -> Result<RegimeKind, GenfunError> {
    let psi_rho = w.psi_at_radius();
    if let Some(s) = w.stable() {
        if psi_rho.is_finite() && ratio >= (1.0 - opts.stable_band) * psi_rho {
            let lambda = xf - s.m * n as f64;
            let r_n = stable_r_n(s.alpha, s.slowly_varying, n);
            let t = lambda / r_n;
            return Ok(if t > opts.stable_window {
                RegimeKind::Condensation
            } else if t < -opts.stable_window {
                RegimeKind::StableGaussian
            } else {
                RegimeKind::StableDrift { lambda: t }
            });
        }
    }
    if ratio < opts.small_ratio_threshold {
        if w.weight(0) > 0.0 && w.weight(1) > 0.0 {
            return Ok(RegimeKind::SmallEndpoint);
        }
        return Err(GenfunError::AmbiguousRegime { ratio });
    }
    if ratio > opts.large_ratio_threshold {
        if w.analytic().is_some() {
            return Ok(RegimeKind::LargeEndpoint);
        }
        if ratio < psi_rho {
            return Err(GenfunError::MissingAnalyticData(
                "large endpoint regime needs (alpha, c)".into(),
            ));
        }
    }
    if ratio < psi_rho {
        return Ok(RegimeKind::Bulk);
    }
    if w.stable().is_none() {
        return Err(GenfunError::MissingAnalyticData(
            "x_n/n beyond Psi(rho) needs stable data".into(),
        ));
    }
    Err(GenfunError::AmbiguousRegime { ratio })
}

fn stable_r_n(alpha: f64, l: f64, n: usize) -> f64 {
    (n as f64 * l).powf(1.0 / alpha)
}

fn stable_regime(
    w: &WeightSequence,
    n: usize,
    xf: f64,
    base: Regime,
) -> Result<Regime, GenfunError> {
    let s = w
        .stable()
        .ok_or_else(|| GenfunError::MissingAnalyticData("stable regimes need (alpha, m, L)".into()))?;
    let nf = n as f64;
    let rho = w.radius();
    let lambda = xf - s.m * nf;
    let r_n = stable_r_n(s.alpha, s.slowly_varying, n);
    let ratio = xf / nf;
    let solve = |ratio: f64| -> Result<f64, GenfunError> {
        if ratio < w.psi_at_radius() {
            w.solve_tilt(ratio)
        } else {
            Ok(rho)
        }
    };
    let common = Regime {
        alpha: Some(s.alpha),
        m: Some(s.m),
        lambda_n: Some(lambda),
        r_n: Some(r_n),
        ..base
    };
    let out = match base.kind {
        RegimeKind::StableDrift { .. } => {
            let gauss = if s.alpha >= 2.0 { 2f64.sqrt() } else { 1.0 };
            Regime {
                kind: RegimeKind::StableDrift {
                    lambda: lambda / r_n,
                },
                v_n: gauss * r_n,
                b_n: solve(ratio)?,
                ..common
            }
        }
        RegimeKind::StableGaussian => {
            if lambda >= 0.0 {
                return Err(GenfunError::AmbiguousRegime { ratio });
            }
            let b = w.solve_tilt(ratio)?;
            let eps = 1.0 - b / rho;
            Regime {
                v_n: ((s.alpha - 1.0) * lambda.abs() / eps).sqrt(),
                b_n: b,
                eps_n: Some(eps),
                bulk_v_n: Some((nf * w.tilted_variance(b)?).sqrt()),
                ..common
            }
        }
        RegimeKind::Condensation => {
            if lambda <= 0.0 {
                return Err(GenfunError::AmbiguousRegime { ratio });
            }
            let d2 = w.eval_derivatives(rho, 2)?;
            if d2[2].is_finite() {
                // Finite variance at rho: the jump must also beat sqrt(c ln n), c > (beta-3)/sigma^2.
                let beta = s.beta.ok_or_else(|| {
                    GenfunError::MissingAnalyticData(
                        "condensation with G''(rho) finite needs a declared beta".into(),
                    )
                })?;
                let var = w.tilted_variance(rho)?;
                let c = (beta - 3.0).max(0.0) / var;
                if lambda * lambda <= c * nf.ln() {
                    return Err(GenfunError::AmbiguousRegime { ratio });
                }
            }
            Regime {
                v_n: lambda,
                b_n: rho,
                ..common
            }
        }
        _ => unreachable!("non-stable kinds handled by caller"),
    };
    Ok(out)
}
