//! Small numerical building blocks shared by the modules: special functions,
//! Gauss-Legendre rules, least-squares fits, FFT convolution and a
//! scheduling-independent parallel sum.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Euler gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Euler beta function `B(a, b)`.
pub fn beta(a: f64, b: f64) -> f64 {
    statrs::function::beta::beta(a, b)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, nodes increasing, weights
/// summing to one.
pub fn gauss_legendre_unit(order: usize) -> Vec<(f64, f64)> {
    let order = NonZeroUsize::new(order.max(1)).expect("order is positive");
    let rule = GaussLegendre::new(order);
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when the data are exactly linear or
    /// have no spread in `y`.
    pub r_squared: f64,
    /// Standard error of the slope (0 for two points or exact fits).
    pub slope_stderr: f64,
    /// Largest absolute residual.
    pub max_abs_residual: f64,
}

/// Fits a least-squares line. Returns `None` with fewer than two points or
/// when all `x` coincide.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let w = vec![1.0; x.len().min(y.len())];
    weighted_linear_fit(x, y, &w)
}

/// Weighted least-squares line minimizing `sum w_i (y_i - a - b x_i)^2`.
/// The slope standard error uses the weighted residual variance with
/// `n - 2` degrees of freedom.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len()).min(w.len());
    if n < 2 {
        return None;
    }
    let sw: f64 = w[..n].iter().sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = (0..n).map(|i| w[i] * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    let mut max_abs_residual: f64 = 0.0;
    for i in 0..n {
        let r = y[i] - intercept - slope * x[i];
        sse += w[i] * r * r;
        max_abs_residual = max_abs_residual.max(r.abs());
    }
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (sse / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        max_abs_residual,
    })
}

const DIRECT_CONVOLUTION_LIMIT: usize = 64;

/// Full linear convolution `c[k] = sum_i a[i] b[k - i]` of length
/// `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= DIRECT_CONVOLUTION_LIMIT {
        let mut out = vec![0.0; len];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        return out;
    }
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(a.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    let mut fb: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(b.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.iter().take(len).map(|c| c.re * scale).collect()
}

/// Causal convolution `out[c] = sum_{d=0}^{c} a[c - d] k[d]` for
/// `c < a.len()`.
pub fn causal_convolve(a: &[f64], k: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut full = convolve(a, &k[..k.len().min(n)]);
    full.truncate(n);
    full.resize(n, 0.0);
    full
}

/// Anti-causal correlation `out[c] = sum_{e=0}^{n-1-c} a[c + e] k[e]`.
pub fn anticausal_correlate(a: &[f64], k: &[f64]) -> Vec<f64> {
    let rev: Vec<f64> = a.iter().rev().copied().collect();
    let mut out = causal_convolve(&rev, k);
    out.reverse();
    out
}

const SUM_CHUNK: usize = 256;

/// Sum of `term(i)` over `0..n`, evaluated in parallel over fixed-size
/// chunks and reduced in index order, so the result does not depend on
/// thread scheduling.
pub fn deterministic_sum<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials: Vec<f64> = (0..n.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(n);
            (lo..hi).map(&term).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

/// Median of a slice (mean of the two central values for even length).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Euclidean norm of a slice.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Serde adapter writing infinite values as the strings `"inf"` and
/// `"-inf"` so that they survive JSON.
pub mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => t.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre_unit(5);
        let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((integral - 0.1).abs() < 1e-14);
        let mass: f64 = rule.iter().map(|p| p.1).sum();
        assert!((mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let b: Vec<f64> = (0..200).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let fast = convolve(&a, &b);
        let mut direct = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                direct[i + j] += x * y;
            }
        }
        for (u, v) in fast.iter().zip(&direct) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn anticausal_correlation_matches_definition() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let k: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).cos()).collect();
        let out = anticausal_correlate(&a, &k);
        for c in [0usize, 17, 99] {
            let expected: f64 = (0..100 - c).map(|e| a[c + e] * k[e]).sum();
            assert!((out[c] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }
}
