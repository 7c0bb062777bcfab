//! Truncated convolution of nonnegative sequences.

use rustfft::{num_complex::Complex, FftPlanner};

/// Below this many multiply-adds the direct sum is used.
const DIRECT_LIMIT: usize = 1 << 15;

/// `(a * b)[0..=cap]`, direct for small inputs and by FFT otherwise.
///
/// FFT output is clamped at zero, so entries far below the largest one carry
/// absolute rather than relative error.
pub fn convolve(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let a = &a[..a.len().min(cap + 1)];
    let b = &b[..b.len().min(cap + 1)];
    let len = (a.len() + b.len() - 1).min(cap + 1);
    if a.len().min(b.len()) <= 32 || a.len() * b.len() <= DIRECT_LIMIT {
        convolve_direct(a, b, len)
    } else {
        convolve_fft(a, b, len)
    }
}

pub fn convolve_direct(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == 0.0 {
            continue;
        }
        for (o, &bj) in out[i..].iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
    out
}

fn convolve_fft(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let size = (a.len() + b.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let load = |v: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (c, &x) in buf.iter_mut().zip(v) {
            c.re = x;
        }
        buf
    };
    let mut fa = load(a);
    let mut fb = load(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|c| (c.re * scale).max(0.0)).collect()
}

/// Scales `v` so its maximum is 1 and returns the log of the factor removed.
pub fn rescale(v: &mut [f64]) -> f64 {
    let max = v.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0.0;
    }
    for x in v.iter_mut() {
        *x /= max;
    }
    max.ln()
}

/// `n`-fold convolution power of `p`, truncated to `0..=cap`, by binary powering.
///
/// Returns `(values, log_scale)` with the true power equal to `exp(log_scale) * values`.
pub fn power(p: &[f64], n: usize, cap: usize) -> (Vec<f64>, f64) {
    let mut result = vec![1.0];
    let mut result_scale = 0.0;
    let mut base: Vec<f64> = p[..p.len().min(cap + 1)].to_vec();
    let mut base_scale = rescale(&mut base);
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = convolve(&result, &base, cap);
            result_scale += base_scale + rescale(&mut result);
        }
        e >>= 1;
        if e > 0 {
            base = convolve(&base, &base, cap);
            base_scale = 2.0 * base_scale + rescale(&mut base);
        }
    }
    (result, result_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let b: Vec<f64> = (0..250).map(|i| ((i * 104729) % 97) as f64 / 97.0).collect();
        let d = convolve_direct(&a, &b, 400);
        let f = convolve_fft(&a, &b, 400);
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn power_of_bernoulli_is_binomial() {
        let (v, s) = power(&[0.5, 0.5], 10, 20);
        let z: Vec<f64> = v.iter().map(|x| x * s.exp()).collect();
        assert!((z[5] - 252.0 / 1024.0).abs() < 1e-15);
        assert_eq!(z.len(), 11);
    }

    #[test]
    fn power_truncates() {
        let (v, s) = power(&[1.0, 1.0], 4, 2);
        let z: Vec<f64> = v.iter().map(|x| x * s.exp()).collect();
        assert_eq!(z.len(), 3);
        assert!((z[2] - 6.0).abs() < 1e-12);
    }
}
