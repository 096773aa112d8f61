//! Fractional integrals and derivatives of grid functions and the weighted
//! fractional Sobolev norms used by the integral.
//!
//! The product-integration scheme treats data as the piecewise-linear
//! interpolant of the grid values and integrates it exactly against the
//! singular kernels, so every operator is exact for piecewise-linear input.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid_paths::GridFunction;
use crate::numerics::{anticausal_correlate, causal_convolve, deterministic_sum, gamma};
use crate::variability::gagliardo_sum;

/// Discretization of the singular integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact integration of the piecewise-linear interpolant.
    ProductIntegration,
    /// Trapezoid rule on grid pairs at least `diagonal_floor` steps apart.
    Trapezoid,
}

/// Order and scheme of the fractional operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    /// Order `theta` in `(0, 1)`.
    pub theta: f64,
    pub scheme: Scheme,
    /// Smallest pair separation, in steps, used by the trapezoid scheme.
    pub diagonal_floor: f64,
}

impl FracParams {
    /// Product integration at order `theta`.
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            scheme: Scheme::ProductIntegration,
            diagonal_floor: 1.0,
        }
    }

    /// Trapezoid scheme with the given diagonal floor.
    pub fn trapezoid(theta: f64, diagonal_floor: f64) -> Self {
        Self {
            theta,
            scheme: Scheme::Trapezoid,
            diagonal_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if !(self.diagonal_floor >= 1.0 && self.diagonal_floor.is_finite()) {
            return Err(invalid(format!(
                "diagonal floor must be at least 1, got {}",
                self.diagonal_floor
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("order must lie in (0,1), got {theta}")));
    }
    Ok(())
}

/// `m^a - (m-1)^a` for `m >= 1`.
#[inline]
pub(crate) fn power_step(m: usize, a: f64) -> f64 {
    let m = m as f64;
    m.powf(a) - (m - 1.0).powf(a)
}

/// Product-integration weights of `int_{m-1}^m u^(theta-1) (u - m + 1) du`
/// and `int_{m-1}^m u^(theta-1) (m - u) du`, indexed by `m >= 1`.
fn linear_moment_weights(theta: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; len + 1];
    let mut b = vec![0.0; len + 1];
    for m in 1..=len {
        let p0 = power_step(m, theta) / theta;
        let p1 = power_step(m, theta + 1.0) / (theta + 1.0);
        a[m] = p1 - (m as f64 - 1.0) * p0;
        b[m] = m as f64 * p0 - p1;
    }
    (a, b)
}

fn rl_left_values(values: &[f64], theta: f64, dt: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let (a, b) = linear_moment_weights(theta, n + 1);
    let w: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { b[1] } else { a[k] + b[k + 1] })
        .collect();
    let conv = causal_convolve(values, &w);
    let scale = dt.powf(theta) / gamma(theta);
    (0..=n)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                scale * (conv[i] - values[0] * b[i + 1])
            }
        })
        .collect()
}

/// Left Riemann-Liouville integral
/// `I^theta_{0+} f(t) = Gamma(theta)^-1 int_0^t (t-s)^(theta-1) f(s) ds`.
pub fn rl_integral_left(f: &GridFunction, theta: f64) -> Result<GridFunction> {
    check_theta(theta)?;
    GridFunction::new(*f.grid(), rl_left_values(f.values(), theta, f.grid().dt()))
}

/// Right Riemann-Liouville integral
/// `I^theta_{T-} f(t) = Gamma(theta)^-1 int_t^T (s-t)^(theta-1) f(s) ds`.
pub fn rl_integral_right(f: &GridFunction, theta: f64) -> Result<GridFunction> {
    check_theta(theta)?;
    let rev: Vec<f64> = f.values().iter().rev().copied().collect();
    let mut out = rl_left_values(&rev, theta, f.grid().dt());
    out.reverse();
    GridFunction::new(*f.grid(), out)
}

/// Left Weyl-Marchaud derivative with its behavior at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftDerivative {
    /// Values on the grid; the value at `t = 0` is set to `0`.
    pub values: GridFunction,
    /// True when `f(0) != 0`, so the derivative is singular at the origin.
    pub singular_at_origin: bool,
}

/// Increments `f_{j+1} - f_j`.
pub(crate) fn increments(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Left Weyl-Marchaud derivative
/// `D^theta_{0+} f(t) = Gamma(1-theta)^-1 (f(t) t^-theta
/// + theta int_0^t (f(t) - f(s)) (t-s)^(-theta-1) ds)`.
///
/// Product integration evaluates the equivalent form
/// `Gamma(1-theta)^-1 (f(0) t^-theta + int_0^t f'(s) (t-s)^-theta ds)` for
/// the interpolant exactly.
pub fn wm_derivative_left(f: &GridFunction, params: &FracParams) -> Result<LeftDerivative> {
    params.validate()?;
    let theta = params.theta;
    let vals = f.values();
    let n = vals.len() - 1;
    let dt = f.grid().dt();
    let g1 = gamma(1.0 - theta);
    let out: Vec<f64> = match params.scheme {
        Scheme::ProductIntegration => {
            let d = increments(vals);
            let k: Vec<f64> = (0..n).map(|m| power_step(m + 1, 1.0 - theta)).collect();
            let conv = causal_convolve(&d, &k);
            let c = dt.powf(-theta) / (1.0 - theta);
            (0..=n)
                .map(|i| {
                    if i == 0 {
                        0.0
                    } else {
                        let t = f.grid().time(i);
                        (vals[0] * t.powf(-theta) + c * conv[i - 1]) / g1
                    }
                })
                .collect()
        }
        Scheme::Trapezoid => {
            let floor = params.diagonal_floor.ceil() as usize;
            (0..=n)
                .map(|i| {
                    if i == 0 {
                        return 0.0;
                    }
                    let t = f.grid().time(i);
                    let mut acc = 0.0;
                    if i >= floor {
                        let last = i - floor;
                        for j in 0..=last {
                            let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                            let lag = (i - j) as f64 * dt;
                            acc += w * (vals[i] - vals[j]) * lag.powf(-theta - 1.0);
                        }
                        if last == 0 {
                            acc *= 2.0;
                        }
                    }
                    (vals[i] * t.powf(-theta) + theta * dt * acc) / g1
                })
                .collect()
        }
    };
    Ok(LeftDerivative {
        values: GridFunction::new(*f.grid(), out)?,
        singular_at_origin: vals[0] != 0.0,
    })
}

/// Right derivative of order `1 - theta` of `g - g(T)` carrying the real
/// sign under which the duality pairing with [`wm_derivative_left`]
/// reproduces `int f g' dt` for smooth data. Product integration returns
/// `I^theta_{T-} g'` of the interpolant exactly:
/// `Gamma(theta)^-1 int_t^T g'(s) (s-t)^(theta-1) ds`.
pub fn wm_derivative_right_adjusted(g: &GridFunction, params: &FracParams) -> Result<GridFunction> {
    params.validate()?;
    let theta = params.theta;
    let vals = g.values();
    let n = vals.len() - 1;
    let dt = g.grid().dt();
    let out: Vec<f64> = match params.scheme {
        Scheme::ProductIntegration => {
            let d = increments(vals);
            let k: Vec<f64> = (0..n).map(|m| power_step(m + 1, theta)).collect();
            let corr = anticausal_correlate(&d, &k);
            let c = dt.powf(theta - 1.0) / gamma(theta + 1.0);
            (0..=n)
                .map(|i| if i == n { 0.0 } else { c * corr[i] })
                .collect()
        }
        Scheme::Trapezoid => {
            let floor = params.diagonal_floor.ceil() as usize;
            let gt = vals[n];
            let gm = gamma(theta);
            (0..=n)
                .map(|i| {
                    if i == n {
                        return 0.0;
                    }
                    let h_i = vals[i] - gt;
                    let tail = g.grid().horizon() - g.grid().time(i);
                    let mut acc = 0.0;
                    if i + floor <= n {
                        let first = i + floor;
                        for j in first..=n {
                            let w = if j == first || j == n { 0.5 } else { 1.0 };
                            let lag = (j - i) as f64 * dt;
                            acc += w * (h_i - (vals[j] - gt)) * lag.powf(theta - 2.0);
                        }
                        if first == n {
                            acc *= 2.0;
                        }
                    }
                    -(h_i * tail.powf(theta - 1.0) + (1.0 - theta) * dt * acc) / gm
                })
                .collect()
        }
    };
    GridFunction::new(*g.grid(), out)
}

/// `int_0^T |f(t)|^p t^(-theta p) dt`, with `|f|^p` interpolated linearly
/// between grid points and integrated exactly against the weight.
pub fn weighted_lp_term(f: &GridFunction, theta: f64, p: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be finite and at least 1, got {p}")));
    }
    let a = 1.0 - theta * p;
    if !(a > 0.0) {
        return Err(invalid(format!(
            "the weighted term needs theta * p < 1, got {}",
            theta * p
        )));
    }
    let vals = f.values();
    let n = vals.len() - 1;
    let dt = f.grid().dt();
    let v: Vec<f64> = vals.iter().map(|x| x.abs().powf(p)).collect();
    let mut acc = 0.0;
    for j in 0..n {
        let lo = j as f64;
        let hi = lo + 1.0;
        let m0 = (hi.powf(a) - lo.powf(a)) / a;
        let m1 = (hi.powf(a + 1.0) - lo.powf(a + 1.0)) / (a + 1.0);
        let right = m1 - lo * m0;
        let left = m0 - right;
        acc += v[j] * left + v[j + 1] * right;
    }
    Ok(acc * dt.powf(a))
}

/// `||f||_{W^{theta,p}_0} = int |f|^p t^(-theta p) dt + [f]_{theta,p}^p`.
pub fn norm_w0(f: &GridFunction, theta: f64, p: f64) -> Result<f64> {
    Ok(weighted_lp_term(f, theta, p)? + gagliardo_sum(f, theta, p)?)
}

/// The right-endpoint norm
/// `sup_t |g(T) - g(t)| / (T-t)^theta + sup_t int_t^T |g(t) - g(u)| (u-t)^(-1-theta) du`.
///
/// The inner integral is evaluated by product integration of the
/// interpolated differences.
pub fn norm_wt(g: &GridFunction, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let vals = g.values();
    let n = vals.len() - 1;
    let dt = g.grid().dt();
    let horizon = g.grid().horizon();
    let first = (0..n)
        .map(|i| (vals[n] - vals[i]).abs() / (horizon - g.grid().time(i)).powf(theta))
        .fold(0.0, f64::max);
    let e = -theta;
    let mut head = vec![0.0; n + 1];
    let mut tail = vec![0.0; n + 1];
    for m in 1..=n {
        let lo = m as f64 - 1.0;
        let hi = m as f64;
        let m1 = (hi.powf(e + 1.0) - lo.powf(e + 1.0)) / (e + 1.0);
        tail[m] = m1 - lo * if m == 1 { 0.0 } else { (hi.powf(e) - lo.powf(e)) / e };
        head[m] = if m == 1 {
            0.0
        } else {
            hi * (hi.powf(e) - lo.powf(e)) / e - m1
        };
    }
    let scale = dt.powf(-theta);
    let second_parts: Vec<f64> = (0..n)
        .map(|i| {
            let gi = vals[i];
            let mut acc = 0.0;
            for m in 1..=(n - i) {
                let v0 = (gi - vals[i + m - 1]).abs();
                let v1 = (gi - vals[i + m]).abs();
                acc += v0 * head[m] + v1 * tail[m];
            }
            acc * scale
        })
        .collect();
    let second = second_parts.iter().copied().fold(0.0, f64::max);
    Ok(first + second)
}

/// Weighted term, seminorm and `L^p` norm entering the Dyda inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DydaTerms {
    /// `int |f|^p t^(-theta p) dt`.
    pub weighted: f64,
    /// `[f]_{theta,p}^p`.
    pub seminorm: f64,
    /// `int |f|^p dt`.
    pub lp: f64,
}

/// The three terms of the Dyda inequality for `f`.
pub fn dyda_terms(f: &GridFunction, theta: f64, p: f64) -> Result<DydaTerms> {
    let weighted = weighted_lp_term(f, theta, p)?;
    let seminorm = gagliardo_sum(f, theta, p)?;
    let vals = f.values();
    let dt = f.grid().dt();
    let n = vals.len() - 1;
    let lp = deterministic_sum(n, |j| 0.5 * dt * (vals[j].abs().powf(p) + vals[j + 1].abs().powf(p)));
    Ok(DydaTerms {
        weighted,
        seminorm,
        lp,
    })
}
