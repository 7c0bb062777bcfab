use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Closed-form or tabulated description of a weight sequence.
///
/// The JSON form is internally tagged, e.g.
/// `{"family": "geometric", "ratio": 0.5, "scale": 0.5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Finite list `p(0), p(1), ...`.
    Tabulated { tabulated: Vec<f64> },
    /// `p(k) = scale * ratio^k`; `scale` defaults to `1 - ratio` (or 1 when `ratio >= 1`).
    Geometric {
        ratio: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// `p(0) = p(1) = 1`.
    BernoulliStep,
    /// `p(k) = 2 (3/16)^(k+1) C(2k+1, k)`, the step law behind uniform bipartite maps.
    #[serde(alias = "uniform-map")]
    UniformMapStep,
    /// `theta(0) = 1`, `theta(i) = C(2i-1, i-1) q_i`. `q` lists `q_1, q_2, ...`;
    /// when absent every `q_i` equals 1.
    MapInduced {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<f64>>,
    },
    /// Offspring weights with generating function `z + (1 - z/alpha)^alpha`, `1 < alpha < 2`.
    StableExample { alpha: f64 },
    /// `p(k) = base(k + 1)`: the bridge steps attached to tree offspring weights.
    Shifted { base: Box<Family> },
}

pub(crate) fn ln_binom(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

impl Family {
    /// Kebab-case family tag, as used in the JSON descriptor.
    pub fn name(&self) -> &'static str {
        match self {
            Family::Tabulated { .. } => "tabulated",
            Family::Geometric { .. } => "geometric",
            Family::BernoulliStep => "bernoulli-step",
            Family::UniformMapStep => "uniform-map-step",
            Family::MapInduced { .. } => "map-induced",
            Family::StableExample { .. } => "stable-example",
            Family::Shifted { .. } => "shifted",
        }
    }

    pub(crate) fn geometric_scale(ratio: f64, scale: Option<f64>) -> f64 {
        scale.unwrap_or(if ratio < 1.0 { 1.0 - ratio } else { 1.0 })
    }

    /// Natural log of `p(k)`; `-inf` outside the support.
    pub fn log_weight(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            Family::Tabulated { tabulated } => match tabulated.get(k) {
                Some(&v) if v > 0.0 => v.ln(),
                _ => f64::NEG_INFINITY,
            },
            Family::Geometric { ratio, scale } => {
                let c = Self::geometric_scale(*ratio, *scale);
                if k == 0 {
                    c.ln()
                } else {
                    c.ln() + kf * ratio.ln()
                }
            }
            Family::BernoulliStep => {
                if k <= 1 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::UniformMapStep => {
                2f64.ln() + (kf + 1.0) * (3.0f64 / 16.0).ln() + ln_binom(2.0 * kf + 1.0, kf)
            }
            Family::MapInduced { q } => {
                if k == 0 {
                    return 0.0;
                }
                let qk = match q {
                    None => 1.0,
                    Some(list) => list.get(k - 1).copied().unwrap_or(0.0),
                };
                if qk <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    ln_binom(2.0 * kf - 1.0, kf - 1.0) + qk.ln()
                }
            }
            Family::StableExample { alpha } => match k {
                0 => 0.0,
                1 => f64::NEG_INFINITY,
                _ => {
                    // C(a,k)(-1)^k = Gamma(k-a) / (Gamma(-a) k!), Gamma(-a) = Gamma(2-a)/(a(a-1)).
                    let a = *alpha;
                    let ln_gamma_neg = ln_gamma(2.0 - a) - (a * (a - 1.0)).ln();
                    ln_gamma(kf - a) - ln_gamma_neg - ln_gamma(kf + 1.0) - kf * a.ln()
                }
            },
            Family::Shifted { base } => base.log_weight(k + 1),
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.log_weight(k).exp()
    }

    /// Largest support point for finitely supported families.
    pub fn support_max(&self) -> Option<usize> {
        match self {
            Family::Tabulated { tabulated } => tabulated.iter().rposition(|&v| v > 0.0),
            Family::BernoulliStep => Some(1),
            Family::MapInduced { q: Some(list) } => {
                Some(list.iter().rposition(|&v| v > 0.0).map_or(0, |i| i + 1))
            }
            Family::Geometric { ratio, .. } if *ratio == 0.0 => Some(0),
            Family::Shifted { base } => base.support_max().map(|m| m.saturating_sub(1)),
            _ => None,
        }
    }

    /// Radius of convergence of the generating function.
    pub fn radius(&self) -> f64 {
        match self {
            Family::Geometric { ratio, .. } => {
                if *ratio > 0.0 {
                    1.0 / ratio
                } else {
                    f64::INFINITY
                }
            }
            Family::UniformMapStep => 4.0 / 3.0,
            Family::MapInduced { q: None } => 0.25,
            Family::StableExample { alpha } => *alpha,
            Family::Shifted { base } => base.radius(),
            _ => f64::INFINITY,
        }
    }

    pub(crate) fn validate_params(&self) -> Result<(), String> {
        let finite_nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        match self {
            Family::Tabulated { tabulated } if !finite_nonneg(tabulated) => {
                Err("tabulated weights must be finite and nonnegative".into())
            }
            Family::Geometric { ratio, scale } => {
                let c = Self::geometric_scale(*ratio, *scale);
                if !(ratio.is_finite() && *ratio >= 0.0) {
                    Err(format!("geometric ratio must be >= 0, got {ratio}"))
                } else if !(c.is_finite() && c > 0.0) {
                    Err(format!("geometric scale must be > 0, got {c}"))
                } else {
                    Ok(())
                }
            }
            Family::MapInduced { q: Some(list) } if !finite_nonneg(list) => {
                Err("map weights q_i must be finite and nonnegative".into())
            }
            Family::StableExample { alpha } if !(*alpha > 1.0 && *alpha < 2.0) => {
                Err(format!("stable example needs 1 < alpha < 2, got {alpha}"))
            }
            Family::Shifted { base } => base.validate_params(),
            _ => Ok(()),
        }
    }

    /// Derivatives `H^(j)(z)` for `j = 0..=order` when an analytic expression exists.
    pub(crate) fn closed_derivs(&self, z: f64, order: usize) -> Option<Vec<f64>> {
        let mut out = vec![0.0; order + 1];
        match self {
            Family::Geometric { ratio, scale } => {
                let c = Self::geometric_scale(*ratio, *scale);
                let u = 1.0 - ratio * z;
                let mut fact = 1.0;
                for (j, o) in out.iter_mut().enumerate() {
                    if j > 0 {
                        fact *= j as f64;
                    }
                    *o = if u <= 0.0 {
                        f64::INFINITY
                    } else {
                        c * fact * ratio.powi(j as i32) / u.powi(j as i32 + 1)
                    };
                }
                Some(out)
            }
            Family::UniformMapStep => {
                let rho = 4.0 / 3.0;
                if z < rho / 4.0 {
                    return None;
                }
                let h = rising_power_derivs(0.75, 0.5, z, order + 1);
                Some(quotient_derivs(&h, 1.0, z, order))
            }
            Family::MapInduced { q: None } => {
                let d = rising_power_derivs(4.0, 0.5, z, order);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = 0.5 * d[j];
                }
                out[0] += 0.5;
                Some(out)
            }
            Family::StableExample { alpha } => {
                let a = *alpha;
                let u = (1.0 - z / a).max(0.0);
                for (j, o) in out.iter_mut().enumerate() {
                    // d^j/dz^j (1 - z/a)^a = (-1/a)^j a(a-1)...(a-j+1) u^(a-j)
                    let mut coef = 1.0;
                    for i in 0..j {
                        coef *= (a - i as f64) * (-1.0 / a);
                    }
                    let pow = if u == 0.0 && a - (j as f64) < 0.0 {
                        f64::INFINITY
                    } else {
                        u.powf(a - j as f64)
                    };
                    *o = coef * pow;
                }
                out[0] += z;
                if order >= 1 {
                    out[1] += 1.0;
                }
                Some(out)
            }
            Family::Shifted { base } => {
                if base.support_max().is_some() || z < base.radius() / 4.0 {
                    return None;
                }
                let h = base.closed_derivs(z, order + 1)?;
                let h0 = base.weight(0);
                Some(quotient_derivs(&h, h0, z, order))
            }
            _ => None,
        }
    }
}

/// Derivatives of `(1 - s z)^(-e)` for `j = 0..=order`.
fn rising_power_derivs(s: f64, e: f64, z: f64, order: usize) -> Vec<f64> {
    let u = 1.0 - s * z;
    let mut out = Vec::with_capacity(order + 1);
    let mut coef = 1.0;
    for j in 0..=order {
        if j > 0 {
            coef *= s * (e + (j - 1) as f64);
        }
        out.push(if u <= 0.0 {
            f64::INFINITY
        } else {
            coef * u.powf(-e - j as f64)
        });
    }
    out
}

/// Derivatives of `(H(z) - h0) / z` from those of `H` (Leibniz rule).
fn quotient_derivs(h: &[f64], h0: f64, z: f64, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (j, o) in out.iter_mut().enumerate() {
        if h[..=j].iter().any(|v| v.is_infinite()) {
            *o = f64::INFINITY;
            continue;
        }
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=j {
            if i > 0 {
                binom = binom * (j - i + 1) as f64 / i as f64;
            }
            let hi = if i == 0 { h[0] - h0 } else { h[i] };
            let m = j - i;
            let mut fact = 1.0;
            for t in 1..=m {
                fact *= t as f64;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += binom * hi * sign * fact / z.powi(m as i32 + 1);
        }
        *o = acc;
    }
    out
}
