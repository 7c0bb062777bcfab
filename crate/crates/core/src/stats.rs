//! Small statistical helpers for Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean with a normal-approximation confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub stderr: f64,
    pub half_width: f64,
    pub count: usize,
}

/// Sample mean and `z * stderr` half-width.
pub fn mc_mean_ci(xs: &[f64], z: f64) -> MeanCi {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let stderr = (var / n as f64).sqrt();
    MeanCi {
        mean,
        stderr,
        half_width: z * stderr,
        count: n,
    }
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi2_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - d.cdf(stat)
}

/// Pearson goodness-of-fit. Cells with tiny expectation are pooled into their
/// neighbour so every used cell expects at least `min_expected`.
/// Returns `(statistic, degrees of freedom)`.
pub fn chi2_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> (f64, usize) {
    let total: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * total as f64;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let stat = cells
        .iter()
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    (stat, cells.len().saturating_sub(1))
}

/// p-value of [`chi2_gof`].
pub fn chi2_gof_p(observed: &[u64], probs: &[f64]) -> f64 {
    let (stat, dof) = chi2_gof(observed, probs, 5.0);
    chi2_sf(stat, dof)
}

/// Two-sample chi-square homogeneity test on aligned category counts.
pub fn chi2_two_sample_p(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    chi2_sf(stat, cells.saturating_sub(1))
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.25)).collect();
        let (s, c) = fit_exponent(&xs, &ys);
        assert!((s - 0.25).abs() < 1e-12);
        assert!((c - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_has_p_one() {
        assert!((chi2_gof_p(&[25, 25, 50], &[0.25, 0.25, 0.5]) - 1.0).abs() < 1e-12);
        assert!(chi2_gof_p(&[90, 10], &[0.5, 0.5]) < 1e-10);
    }

    #[test]
    fn ci_of_constant() {
        let ci = mc_mean_ci(&[2.0; 10], 1.96);
        assert_eq!(ci.mean, 2.0);
        assert_eq!(ci.half_width, 0.0);
    }
}
