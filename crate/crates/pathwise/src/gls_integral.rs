//! The generalized Lebesgue-Stieltjes integral by the fractional duality
//! formula, Riemann-Stieltjes sums and convergence-rate studies.
//!
//! Both fractional derivatives are evaluated exactly for the
//! piecewise-linear interpolants of the data, at Gauss-Legendre nodes inside
//! every grid cell. The outer integral is the Gauss-Legendre sum; the
//! integrable singularities created by the restriction jumps are integrated
//! after the substitution `t = t_j + dt u^(1/(1-theta))`, which removes them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::frac_calc::{check_theta, increments, norm_w0, norm_wt};
use crate::grid_paths::{GridFunction, TimeGrid};
use crate::numerics::{
    anticausal_correlate, causal_convolve, gamma, gauss_legendre_unit, inf_f64, linear_fit,
};

/// Gauss-Legendre nodes per grid cell in the outer integral.
pub const CELL_NODES: usize = 8;

/// Norms entering the duality bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlsNorms {
    /// `||1_{[0,t_end]} f||_{W^{theta,1}_0}`.
    pub f_w0: f64,
    /// `||g||_{W^{1-theta,inf}_T}`.
    pub g_wt: f64,
}

/// One evaluation of the integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlsResult {
    pub theta: f64,
    pub t_end: f64,
    pub value: f64,
    pub norms: GlsNorms,
    /// `|value| Gamma(theta) Gamma(1-theta) / (f_w0 g_wt)`; the duality bound
    /// holds when this is at most one.
    pub bound_slack: f64,
}

struct Quadrature {
    theta: f64,
    dt: f64,
    nodes: Vec<(f64, f64)>,
    substituted: Vec<(f64, f64)>,
}

impl Quadrature {
    fn new(theta: f64, grid: &TimeGrid) -> Self {
        let nodes = gauss_legendre_unit(CELL_NODES);
        let substituted = nodes
            .iter()
            .map(|&(u, w)| (u.powf(1.0 / (1.0 - theta)), w))
            .collect();
        Self {
            theta,
            dt: grid.dt(),
            nodes,
            substituted,
        }
    }

    /// `I^theta_{T-} g'` of the interpolant at `t_c + x dt` for every cell
    /// `c`, one row per offset.
    fn right_factor(&self, dg: &[f64], offsets: &[(f64, f64)]) -> Vec<Vec<f64>> {
        let theta = self.theta;
        let n = dg.len();
        let scale = self.dt.powf(theta - 1.0) / gamma(theta + 1.0);
        offsets
            .iter()
            .map(|&(x, _)| {
                let kernel: Vec<f64> = (0..n)
                    .map(|e| {
                        let e = e as f64;
                        (e + 1.0 - x).powf(theta) - (e - x).max(0.0).powf(theta)
                    })
                    .collect();
                anticausal_correlate(dg, &kernel)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect()
            })
            .collect()
    }

    /// Kernel of the left derivative contributed by cell `c - lag` at the
    /// offset `x` of cell `c`.
    fn left_kernel(&self, x: f64, n: usize) -> Vec<f64> {
        let a = 1.0 - self.theta;
        (0..n)
            .map(|lag| {
                let lag = lag as f64;
                (lag + x).powf(a) - (lag + x - 1.0).max(0.0).powf(a)
            })
            .collect()
    }

    fn left_scale(&self) -> f64 {
        self.dt.powf(-self.theta) / ((1.0 - self.theta) * gamma(1.0 - self.theta))
    }

    /// `int_{t_j}^T (t - t_j)^-theta R(t) dt`.
    fn jump_weight(&self, j: usize, right: &[Vec<f64>], right_sub: &[Vec<f64>]) -> f64 {
        let theta = self.theta;
        let n = right[0].len();
        let mut far = 0.0;
        for (q, &(x, w)) in self.nodes.iter().enumerate() {
            let row = &right[q];
            let mut acc = 0.0;
            for (c, &r) in row.iter().enumerate().skip(j + 1) {
                acc += r * ((c - j) as f64 + x).powf(-theta);
            }
            far += w * acc;
        }
        let near: f64 = if j < n {
            self.substituted
                .iter()
                .enumerate()
                .map(|(q, &(_, w))| w * right_sub[q][j])
                .sum::<f64>()
                / (1.0 - theta)
        } else {
            0.0
        };
        self.dt.powf(1.0 - theta) * (far + near)
    }

    /// `int_{t_j}^T (t - t_j)^-theta R(t) dt` for every `j`.
    fn jump_weights(&self, right: &[Vec<f64>], right_sub: &[Vec<f64>]) -> Vec<f64> {
        let theta = self.theta;
        let n = right[0].len();
        let mut out = vec![0.0; n + 1];
        for (q, &(x, w)) in self.nodes.iter().enumerate() {
            let kernel: Vec<f64> = (0..n)
                .map(|e| if e == 0 { 0.0 } else { (e as f64 + x).powf(-theta) })
                .collect();
            for (o, v) in out.iter_mut().zip(anticausal_correlate(&right[q], &kernel)) {
                *o += w * v;
            }
        }
        for (q, &(_, w)) in self.substituted.iter().enumerate() {
            for (o, &r) in out.iter_mut().zip(right_sub[q].iter()) {
                *o += w * r / (1.0 - theta);
            }
        }
        let scale = self.dt.powf(1.0 - theta);
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

fn check_pair(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.grid() != g.grid() {
        return Err(invalid("integrand and integrator live on different grids"));
    }
    if f.values().iter().chain(g.values()).any(|v| !v.is_finite()) {
        return Err(invalid("integrand and integrator must be finite"));
    }
    Ok(())
}

fn grid_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    let i = grid.nearest_index(t);
    if (grid.time(i) - t).abs() > 1e-9 * grid.dt() {
        return Err(invalid(format!("time {t} is not a grid time")));
    }
    Ok(i)
}

/// Restriction `1_{[0,t_e]} f` on the grid.
fn restricted(f: &GridFunction, end: usize) -> Result<GridFunction> {
    let vals = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if i <= end { v } else { 0.0 })
        .collect();
    GridFunction::new(*f.grid(), vals)
}

fn check_norm(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NormOverflow { name, value })
    }
}

/// `int D^theta_{0+}(1_{(t_s,t_e]} f) R dt` for grid indices `s <= e`.
fn interval_value(
    quad: &Quadrature,
    f: &[f64],
    right: &[Vec<f64>],
    right_sub: &[Vec<f64>],
    start: usize,
    end: usize,
) -> f64 {
    let n = f.len() - 1;
    let mut d = vec![0.0; n];
    d[start..end].copy_from_slice(&increments(&f[start..=end]));
    let mut smooth = 0.0;
    for (q, &(x, w)) in quad.nodes.iter().enumerate() {
        let left = causal_convolve(&d, &quad.left_kernel(x, n));
        let row: f64 = left.iter().zip(&right[q]).map(|(a, r)| a * r).sum();
        smooth += w * row;
    }
    smooth *= quad.dt * quad.left_scale();
    let jumps = f[start] * quad.jump_weight(start, right, right_sub)
        - f[end] * quad.jump_weight(end, right, right_sub);
    smooth + jumps / gamma(1.0 - quad.theta)
}

/// `int_0^{t_end} f dg` by the fractional duality formula
/// `int_0^T D^theta_{0+}(1_{[0,t_end]} f) D^{1-theta}_{T-}(g - g(T)) dt`.
///
/// Refuses with [`Error::NormOverflow`] when a norm of the duality bound is
/// not finite at grid scale.
pub fn gls_integrate(f: &GridFunction, g: &GridFunction, theta: f64, t_end: f64) -> Result<GlsResult> {
    check_theta(theta)?;
    check_pair(f, g)?;
    let grid = *f.grid();
    let end = grid_index(&grid, t_end)?;
    let f_w0 = check_norm("f_w0", norm_w0(&restricted(f, end)?, theta, 1.0)?)?;
    let g_wt = check_norm("g_wt", norm_wt(g, 1.0 - theta)?)?;
    let value = integrate_interval_unchecked(f, g, theta, 0, end);
    let denom = f_w0 * g_wt;
    let bound_slack = if denom > 0.0 {
        value.abs() * gamma(theta) * gamma(1.0 - theta) / denom
    } else {
        0.0
    };
    Ok(GlsResult {
        theta,
        t_end: grid.time(end),
        value,
        norms: GlsNorms { f_w0, g_wt },
        bound_slack,
    })
}

fn integrate_interval_unchecked(
    f: &GridFunction,
    g: &GridFunction,
    theta: f64,
    start: usize,
    end: usize,
) -> f64 {
    if start == end {
        return 0.0;
    }
    let quad = Quadrature::new(theta, f.grid());
    let dg = increments(g.values());
    let right = quad.right_factor(&dg, &quad.nodes);
    let right_sub = quad.right_factor(&dg, &quad.substituted);
    interval_value(&quad, f.values(), &right, &right_sub, start, end)
}

/// `int_{t_start}^{t_end} f dg`, the duality formula applied to the
/// restriction `1_{(t_start, t_end]} f`.
pub fn gls_integrate_interval(
    f: &GridFunction,
    g: &GridFunction,
    theta: f64,
    t_start: f64,
    t_end: f64,
) -> Result<f64> {
    check_theta(theta)?;
    check_pair(f, g)?;
    let start = grid_index(f.grid(), t_start)?;
    let end = grid_index(f.grid(), t_end)?;
    if start > end {
        return Err(invalid(format!("interval [{t_start}, {t_end}] is reversed")));
    }
    Ok(integrate_interval_unchecked(f, g, theta, start, end))
}

/// `t -> int_0^t f dg` at every grid time.
///
/// The grid norms of finite data are finite, so the quadratic-cost norm
/// evaluation of [`gls_integrate`] is skipped here.
pub fn gls_integrate_series(f: &GridFunction, g: &GridFunction, theta: f64) -> Result<GridFunction> {
    check_theta(theta)?;
    check_pair(f, g)?;
    let grid = *f.grid();
    let quad = Quadrature::new(theta, &grid);
    let fv = f.values();
    let n = fv.len() - 1;
    let dg = increments(g.values());
    let df = increments(fv);
    let right = quad.right_factor(&dg, &quad.nodes);
    let right_sub = quad.right_factor(&dg, &quad.substituted);
    let mut cell_weight = vec![0.0; n];
    for (q, &(x, w)) in quad.nodes.iter().enumerate() {
        let corr = anticausal_correlate(&right[q], &quad.left_kernel(x, n));
        for (o, v) in cell_weight.iter_mut().zip(corr) {
            *o += w * v;
        }
    }
    let cell_scale = quad.dt * quad.left_scale();
    let jump = quad.jump_weights(&right, &right_sub);
    let g1 = gamma(1.0 - theta);
    let mut out = vec![0.0; n + 1];
    let mut running = 0.0;
    for e in 1..=n {
        running += df[e - 1] * cell_weight[e - 1] * cell_scale;
        out[e] = running + (fv[0] * jump[0] - fv[e] * jump[e]) / g1;
    }
    GridFunction::new(grid, out)
}

/// Choice of the evaluation point inside each partition interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiRule {
    Left,
    Right,
    Midpoint,
}

impl XiRule {
    pub const ALL: [XiRule; 3] = [XiRule::Left, XiRule::Right, XiRule::Midpoint];

    fn pick(self, lo: usize, hi: usize) -> usize {
        match self {
            XiRule::Left => lo,
            XiRule::Right => hi,
            XiRule::Midpoint => (lo + hi) / 2,
        }
    }
}

/// `sum_i f(xi_i) (g(t_i) - g(t_{i-1}))` over a partition made of grid times.
pub fn riemann_sum(f: &GridFunction, g: &GridFunction, partition: &[f64], rule: XiRule) -> Result<f64> {
    check_pair(f, g)?;
    if partition.len() < 2 {
        return Err(invalid("a partition needs at least two points"));
    }
    let idx = partition
        .iter()
        .map(|&t| grid_index(f.grid(), t))
        .collect::<Result<Vec<_>>>()?;
    if idx.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("partition must be strictly increasing"));
    }
    let fv = f.values();
    let gv = g.values();
    Ok(idx
        .windows(2)
        .map(|w| fv[rule.pick(w[0], w[1])] * (gv[w[1]] - gv[w[0]]))
        .sum())
}

/// Uniform partition of `[0, T]` into `intervals` pieces.
pub fn uniform_partition(grid: &TimeGrid, intervals: usize) -> Result<Vec<f64>> {
    if intervals == 0 || !grid.steps().is_multiple_of(intervals) {
        return Err(invalid(format!(
            "{intervals} intervals do not divide the {} grid steps",
            grid.steps()
        )));
    }
    let stride = grid.steps() / intervals;
    Ok((0..=intervals).map(|k| grid.time(k * stride)).collect())
}

/// Observed convergence of Riemann-Stieltjes sums towards the integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rule: XiRule,
    pub theta: f64,
    /// Integral on the full grid.
    pub reference: f64,
    pub intervals: Vec<usize>,
    pub meshes: Vec<f64>,
    pub errors: Vec<f64>,
    /// Slope of `log error` against `log mesh`; infinite when every error
    /// vanishes.
    #[serde(with = "inf_f64")]
    pub exponent: f64,
    /// Largest absolute residual of the log-log fit.
    pub residual: f64,
}

/// Fits the convergence order of uniform Riemann-Stieltjes sums with the
/// given interval counts (at least four, geometric) towards the integral on
/// the full grid.
pub fn rate_study(
    f: &GridFunction,
    g: &GridFunction,
    theta: f64,
    intervals: &[usize],
    rule: XiRule,
) -> Result<RateReport> {
    check_geometric(intervals)?;
    let grid = *f.grid();
    let reference = gls_integrate(f, g, theta, grid.horizon())?.value;
    rate_against(f, g, theta, reference, intervals, rule)
}

/// [`rate_study`] for every evaluation rule, sharing the reference value.
pub fn rate_study_all(
    f: &GridFunction,
    g: &GridFunction,
    theta: f64,
    intervals: &[usize],
) -> Result<Vec<RateReport>> {
    check_geometric(intervals)?;
    let reference = gls_integrate(f, g, theta, f.grid().horizon())?.value;
    XiRule::ALL
        .iter()
        .map(|&rule| rate_against(f, g, theta, reference, intervals, rule))
        .collect()
}

fn check_geometric(intervals: &[usize]) -> Result<()> {
    if intervals.len() < 4 {
        return Err(invalid("a rate study needs at least four meshes"));
    }
    let ratio = intervals[1] as f64 / intervals[0] as f64;
    let geometric = ratio > 1.0
        && intervals
            .windows(2)
            .all(|w| (w[1] as f64 / w[0] as f64 - ratio).abs() <= 1e-9 * ratio);
    if !geometric {
        return Err(invalid("mesh list must be increasing and geometric"));
    }
    Ok(())
}

fn rate_against(
    f: &GridFunction,
    g: &GridFunction,
    theta: f64,
    reference: f64,
    intervals: &[usize],
    rule: XiRule,
) -> Result<RateReport> {
    let grid = *f.grid();
    let mut meshes = Vec::with_capacity(intervals.len());
    let mut errors = Vec::with_capacity(intervals.len());
    for &m in intervals {
        let partition = uniform_partition(&grid, m)?;
        meshes.push(grid.horizon() / m as f64);
        errors.push((riemann_sum(f, g, &partition, rule)? - reference).abs());
    }
    let (x, y): (Vec<f64>, Vec<f64>) = meshes
        .iter()
        .zip(&errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .unzip();
    let (exponent, residual) = match linear_fit(&x, &y) {
        Some(fit) if x.len() >= 2 => (fit.slope, fit.max_abs_residual),
        _ => (f64::INFINITY, 0.0),
    };
    Ok(RateReport {
        rule,
        theta,
        reference,
        intervals: intervals.to_vec(),
        meshes,
        errors,
        exponent,
        residual,
    })
}
