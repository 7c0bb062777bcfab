use super::{GenfunError, WeightSequence};

const MAX_CAP: usize = 1 << 25;

/// Law of the tilted step `xi^(b)`: masses `b^k p(k) / G(b)`, truncated at a cap.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltedLaw {
    pub b: f64,
    pub masses: Vec<f64>,
    pub tail_mass: f64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl TiltedLaw {
    /// Tilts `w` at `b`, doubling the cap until the discarded mass is below `tail_tol`.
    pub fn new(w: &WeightSequence, b: f64, tail_tol: f64) -> Result<Self, GenfunError> {
        if !(tail_tol > 0.0) {
            return Err(GenfunError::InvalidWeights("tail_tol must be positive".into()));
        }
        let f = w.factorial_moments(b, 4)?;
        let (mean, m2, m3, m4) = raw_moments(&f);
        let g = w.eval_derivatives(b, 0)?[0];
        let lg = g.ln();
        let lb = b.ln();
        let mass = |k: usize| (w.log_weight(k) + k as f64 * lb - lg).exp();
        let (masses, tail_mass) = match w.support_max() {
            Some(m) => {
                let masses = w.tilted_weights_upto(b, m);
                (masses, 0.0)
            }
            None => {
                let mut masses: Vec<f64> = (0..64).map(mass).collect();
                let mut total: f64 = masses.iter().sum();
                while 1.0 - total >= tail_tol {
                    let cap = masses.len();
                    if cap >= MAX_CAP {
                        return Err(GenfunError::DivergentSeries {
                            b,
                            radius: w.radius(),
                        });
                    }
                    masses.extend((cap..2 * cap).map(mass));
                    total = masses.iter().sum();
                }
                (masses, (1.0 - total).max(0.0))
            }
        };
        Ok(TiltedLaw {
            b,
            masses,
            tail_mass,
            mean,
            m2,
            m3,
            m4,
        })
    }

    pub fn variance(&self) -> f64 {
        self.m2 - self.mean * self.mean
    }

    /// First four raw moments recomputed from the truncated masses.
    pub fn mass_moments(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, p) in self.masses.iter().enumerate() {
            let x = k as f64;
            out[0] += p * x;
            out[1] += p * x * x;
            out[2] += p * x * x * x;
            out[3] += p * x * x * x * x;
        }
        out
    }
}

/// Raw moments from factorial moments `f_j = b^j G^(j)/G` via Stirling numbers
/// of the second kind.
pub(crate) fn raw_moments(f: &[f64]) -> (f64, f64, f64, f64) {
    let m1 = f[1];
    let m2 = f[2] + f[1];
    let m3 = f[3] + 3.0 * f[2] + f[1];
    let m4 = f[4] + 6.0 * f[3] + 7.0 * f[2] + f[1];
    (m1, m2, m3, m4)
}

/// `A(b) = 1 - (F(b) - F(0)) / (b F'(b))` for offspring weights `theta`.
pub fn leaf_fraction_a(theta: &WeightSequence, b: f64) -> Result<f64, GenfunError> {
    let d = theta.eval_derivatives(b, 1)?;
    if d[1].is_infinite() {
        return Ok(1.0);
    }
    Ok(1.0 - (d[0] - theta.weight(0)) / (b * d[1]))
}

/// Solves `A(b) = tau`, using `A = Psi / (1 + Psi)` for the shifted steps.
pub fn leaf_fraction_a_inverse(theta: &WeightSequence, tau: f64) -> Result<f64, GenfunError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(GenfunError::OutOfRange {
            target: tau,
            lo: 0.0,
            hi: 1.0,
        });
    }
    theta.shifted()?.solve_tilt(tau / (1.0 - tau))
}
