//! The `(s, p)`-variability statistic of a path against a coefficient, its
//! classification across resolutions, compositions, Gagliardo seminorms and
//! numerical forms of the composition estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv_library::{GradientMeasure, MatrixBv, Region, ScalarBv};
use crate::error::{invalid, Error, Result};
use crate::grid_paths::{estimate_holder, make_fbm, GridFunction, SampledPath, TimeGrid};
use crate::measures::{
    dist2, fractional_maximal, mutual_energy, occupation_measure, KernelPolicy,
};
use crate::numerics::{deterministic_sum, inf_f64, linear_fit, median};

/// Default growth-exponent threshold separating finite from diverging
/// statistics.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Minimal coefficient of determination for a hard verdict.
pub const DEFAULT_R2_FLOOR: f64 = 0.9;

/// Parameters of the variability statistic and its classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityParams {
    /// Order `s` in `(0, 1)`.
    pub s: f64,
    /// Integrability exponent `p` in `[1, inf]`.
    #[serde(with = "inf_f64")]
    pub p: f64,
    /// Inflation of the path's bounding box defining the neighborhood.
    pub margin: f64,
    /// Gradient-measure levels, coarse to fine.
    pub levels: Vec<u32>,
    /// Growth exponent above which the statistic counts as diverging.
    pub threshold: f64,
    /// Minimal coefficient of determination for a diverging verdict.
    pub r2_floor: f64,
    /// Recompute the `L^1` norms as mutual energies.
    pub energy_crosscheck: bool,
}

impl VariabilityParams {
    /// Defaults: margin 0.05, levels 6, 8, 10 and the calibrated threshold.
    pub fn new(s: f64, p: f64) -> Self {
        Self {
            s,
            p,
            margin: 0.05,
            levels: vec![6, 8, 10],
            threshold: DEFAULT_THRESHOLD,
            r2_floor: DEFAULT_R2_FLOOR,
            energy_crosscheck: false,
        }
    }

    pub fn with_levels(mut self, levels: Vec<u32>) -> Self {
        self.levels = levels;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_energy_crosscheck(mut self, on: bool) -> Self {
        self.energy_crosscheck = on;
        self
    }

    /// Checks `0 < s < 1`, `p >= 1`, a nonnegative margin and at least two
    /// levels.
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid(format!("s must lie in (0,1), got {}", self.s)));
        }
        if !(self.p >= 1.0) {
            return Err(invalid(format!("p must be at least 1, got {}", self.p)));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(invalid(format!("margin must be nonnegative, got {}", self.margin)));
        }
        if self.levels.len() < 2 {
            return Err(invalid("at least two levels are required"));
        }
        Ok(())
    }
}

/// Classification of a statistic across resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Diverging,
    Inconclusive,
}

/// Result of [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    pub coefficient: String,
    pub s: f64,
    #[serde(with = "inf_f64")]
    pub p: f64,
    /// Neighborhood `U` used for the gradient measure.
    pub region: Region,
    pub margin: f64,
    pub levels: Vec<u32>,
    /// Kernel caps per level.
    pub scales: Vec<f64>,
    /// `L^p(0, T)` norm of the statistic per level.
    pub lp_norms: Vec<f64>,
    /// Slope of `log norm` against `log(1/h)`.
    pub growth_exponent: f64,
    pub r_squared: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Largest relative gap between `L^1` norms and mutual energies, when
    /// requested.
    pub energy_crosscheck: Option<f64>,
}

/// Slope, coefficient of determination and verdict for values observed at
/// kernel caps `scales`.
pub fn classify_growth(scales: &[f64], values: &[f64], threshold: f64, r2_floor: f64) -> (f64, f64, Verdict) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(values)
        .filter(|(h, v)| **h > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(h, v)| (-h.ln(), v.ln()))
        .unzip();
    if values.iter().any(|v| v.is_infinite()) {
        return (f64::INFINITY, 1.0, Verdict::Diverging);
    }
    if xs.is_empty() {
        return (0.0, 1.0, Verdict::Finite);
    }
    let Some(fit) = linear_fit(&xs, &ys) else {
        return (0.0, 0.0, Verdict::Inconclusive);
    };
    let verdict = if fit.slope > threshold {
        if fit.r_squared >= r2_floor {
            Verdict::Diverging
        } else {
            Verdict::Inconclusive
        }
    } else {
        Verdict::Finite
    };
    (fit.slope, fit.r_squared, verdict)
}

fn statistic_from_measure(path: &SampledPath, gm: &GradientMeasure, s: f64) -> Vec<f64> {
    let n = path.dim();
    let h2 = gm.scale * gm.scale;
    let half = -0.5 * (n as f64 - 1.0 + s);
    let mu = &gm.measure;
    (0..path.len())
        .into_par_iter()
        .map(|i| {
            let x = path.point(i);
            let mut acc = 0.0;
            for (y, w) in mu.atoms() {
                acc += w * crate::measures::capped_power(dist2(x, y), h2, half);
            }
            acc
        })
        .collect()
}

fn check_dims(path: &SampledPath, dim: usize) -> Result<()> {
    if path.dim() != dim {
        return Err(invalid(format!(
            "path has dimension {}, coefficient has {dim}",
            path.dim()
        )));
    }
    Ok(())
}

/// The statistic `V(t) = sum_j w_j max(|X_t - y_j|, h)^-(n-1+s)` over the
/// gradient measure of `phi` at `level`, restricted to the inflated
/// bounding box of the path.
pub fn variability_statistic(
    path: &SampledPath,
    phi: &dyn ScalarBv,
    params: &VariabilityParams,
    level: u32,
) -> Result<GridFunction> {
    check_dims(path, phi.dim())?;
    let region = Region::around_path(path, params.margin);
    let gm = phi.gradient_measure(&region, level)?;
    GridFunction::new(*path.grid(), statistic_from_measure(path, &gm, params.s))
}

/// Entrywise maximum of [`variability_statistic`] over a matrix field.
pub fn variability_statistic_matrix(
    path: &SampledPath,
    sigma: &MatrixBv,
    params: &VariabilityParams,
    level: u32,
) -> Result<GridFunction> {
    let mut out = vec![0.0f64; path.len()];
    for e in sigma.entries() {
        let v = variability_statistic(path, e.as_ref(), params, level)?;
        for (o, x) in out.iter_mut().zip(v.values()) {
            *o = o.max(*x);
        }
    }
    GridFunction::new(*path.grid(), out)
}

/// `L^p(0, T)` norm of a statistic: a left-endpoint sum for finite `p`,
/// the maximum over grid points for `p = inf`.
pub fn lp_norm(v: &GridFunction, p: f64) -> f64 {
    let vals = v.values();
    if p.is_infinite() {
        return vals.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    let dt = v.grid().dt();
    let n = vals.len() - 1;
    let s: f64 = vals[..n].iter().map(|x| x.abs().powf(p)).sum::<f64>() * dt;
    s.powf(1.0 / p)
}

fn classify_entries(
    path: &SampledPath,
    entries: &[&dyn ScalarBv],
    name: String,
    params: &VariabilityParams,
) -> Result<VariabilityReport> {
    params.validate()?;
    for e in entries {
        check_dims(path, e.dim())?;
    }
    let region = Region::around_path(path, params.margin);
    let occupation = if params.energy_crosscheck {
        Some(occupation_measure(path))
    } else {
        None
    };
    let mut scales = Vec::new();
    let mut lp_norms = Vec::new();
    let mut gap: f64 = 0.0;
    for &level in &params.levels {
        let mut stat = vec![0.0f64; path.len()];
        let mut scale: f64 = 0.0;
        for e in entries {
            let gm = e.gradient_measure(&region, level)?;
            scale = scale.max(gm.scale);
            let v = statistic_from_measure(path, &gm, params.s);
            if let Some(occ) = &occupation {
                let l1 = lp_norm(&GridFunction::new(*path.grid(), v.clone())?, 1.0);
                let policy = KernelPolicy::new(1.0 - params.s, gm.scale);
                let energy = if gm.measure.is_empty() {
                    0.0
                } else {
                    mutual_energy(&gm.measure, occ, &policy)?
                };
                let denom = l1.abs().max(energy.abs());
                if denom > 0.0 {
                    gap = gap.max((l1 - energy).abs() / denom);
                }
            }
            for (o, x) in stat.iter_mut().zip(&v) {
                *o = o.max(*x);
            }
        }
        scales.push(scale);
        lp_norms.push(lp_norm(&GridFunction::new(*path.grid(), stat)?, params.p));
    }
    let (growth_exponent, r_squared, verdict) =
        classify_growth(&scales, &lp_norms, params.threshold, params.r2_floor);
    Ok(VariabilityReport {
        coefficient: name,
        s: params.s,
        p: params.p,
        region,
        margin: params.margin,
        levels: params.levels.clone(),
        scales,
        lp_norms,
        growth_exponent,
        r_squared,
        threshold: params.threshold,
        verdict,
        energy_crosscheck: occupation.map(|_| gap),
    })
}

/// Classifies whether `path` is `(s, p)`-variable with respect to `phi` from
/// the growth of the statistic's norm as the kernel cap shrinks.
pub fn classify(
    path: &SampledPath,
    phi: &dyn ScalarBv,
    params: &VariabilityParams,
) -> Result<VariabilityReport> {
    classify_entries(path, &[phi], phi.describe(), params)
}

/// [`classify`] for a matrix field, with the entrywise maximal statistic.
pub fn classify_matrix(
    path: &SampledPath,
    sigma: &MatrixBv,
    params: &VariabilityParams,
) -> Result<VariabilityReport> {
    let entries: Vec<&dyn ScalarBv> = sigma.entries().iter().map(|e| e.as_ref()).collect();
    classify_entries(path, &entries, sigma.name().to_string(), params)
}

/// The composition `t -> phi(X_t)` of the fixed representative.
pub fn compose(phi: &dyn ScalarBv, path: &SampledPath) -> Result<GridFunction> {
    check_dims(path, phi.dim())?;
    let values = path.points().map(|x| phi.evaluate(x)).collect();
    GridFunction::new(*path.grid(), values)
}

/// Gagliardo seminorm
/// `(sum_{i != j} |f_i - f_j|^p / |t_i - t_j|^(1 + theta p) dt^2)^(1/p)`.
pub fn gagliardo_seminorm(f: &GridFunction, theta: f64, p: f64) -> Result<f64> {
    Ok(gagliardo_sum(f, theta, p)?.powf(1.0 / p))
}

/// The `p`-th power of [`gagliardo_seminorm`].
pub fn gagliardo_sum(f: &GridFunction, theta: f64, p: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0,1), got {theta}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be finite and at least 1, got {p}")));
    }
    let vals = f.values();
    let n = vals.len();
    let dt = f.grid().dt();
    let weight: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                dt * dt * (k as f64 * dt).powf(-(1.0 + theta * p))
            }
        })
        .collect();
    let unit = p == 1.0;
    let half = deterministic_sum(n, |i| {
        let fi = vals[i];
        let mut acc = 0.0;
        for (j, &fj) in vals.iter().enumerate().skip(i + 1) {
            let d = (fi - fj).abs();
            if d > 0.0 {
                acc += weight[j - i] * if unit { d } else { d.powf(p) };
            }
        }
        acc
    });
    Ok(2.0 * half)
}

/// Both sides of the composition estimate and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionBound {
    /// `[phi(X)]_{beta,p}^p`.
    pub lhs: f64,
    /// `[X]_{alpha,inf}^(s p) * int V(t)^p dt`.
    pub rhs: f64,
    pub ratio: f64,
    /// Estimated Hoelder exponent of the path.
    pub alpha: f64,
}

/// Evaluates the composition estimate at the finest configured level.
/// Refuses with [`Error::NotVariable`] unless the classifier returns a
/// finite verdict.
pub fn composition_bound_check(
    phi: &dyn ScalarBv,
    path: &SampledPath,
    params: &VariabilityParams,
    beta: f64,
) -> Result<CompositionBound> {
    if !params.p.is_finite() {
        return Err(invalid("the composition estimate needs a finite p"));
    }
    let holder = estimate_holder(path)?;
    let alpha = holder.exponent;
    if !(beta > 0.0 && beta < alpha * params.s) {
        return Err(Error::ExponentTooLow {
            exponent: alpha * params.s,
            required: beta,
        });
    }
    let report = classify(path, phi, params)?;
    if report.verdict != Verdict::Finite {
        return Err(Error::NotVariable {
            report: Box::new(report),
        });
    }
    let level = *params.levels.last().expect("validated levels");
    let v = variability_statistic(path, phi, params, level)?;
    let integral = lp_norm(&v, params.p).powf(params.p);
    let lhs = gagliardo_sum(&compose(phi, path)?, beta, params.p)?;
    let rhs = holder.seminorm.powf(params.s * params.p) * integral;
    Ok(CompositionBound {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY },
        alpha,
    })
}

/// Both sides of the mean-value inequality at a pair of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanValue {
    /// `|phi(x) - phi(y)|`.
    pub lhs: f64,
    /// `|x-y|^s (M phi(x) + M phi(y))` with the truncated fractional maximal
    /// function of order `1 - s` at radius `4|x-y|`.
    pub rhs: f64,
}

/// Evaluates the mean-value inequality with the gradient measure at
/// `level` on a box containing both balls of radius `4|x-y|`.
pub fn meanvalue_check(
    phi: &dyn ScalarBv,
    x: &[f64],
    y: &[f64],
    s: f64,
    level: u32,
) -> Result<MeanValue> {
    if x.len() != phi.dim() || y.len() != phi.dim() {
        return Err(invalid("points have the wrong dimension"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("s must lie in (0,1), got {s}")));
    }
    let r = dist2(x, y).sqrt();
    let lhs = (phi.evaluate(x) - phi.evaluate(y)).abs();
    if r == 0.0 {
        return Ok(MeanValue { lhs, rhs: 0.0 });
    }
    let reach = 4.0 * r;
    let lo: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.min(*b) - reach).collect();
    let hi: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.max(*b) + reach).collect();
    let gm = phi.gradient_measure(&Region::new(lo, hi)?, level)?;
    let mx = fractional_maximal(&gm.measure, 1.0 - s, reach, x)?;
    let my = fractional_maximal(&gm.measure, 1.0 - s, reach, y)?;
    Ok(MeanValue {
        lhs,
        rhs: r.powf(s) * (mx + my),
    })
}

/// Monte Carlo report of [`fbm_energy_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmEnergyReport {
    pub hurst: f64,
    pub dim: usize,
    pub s: f64,
    pub seeds: usize,
    /// Mean over seeds of the grid integral over `[t_min, T]` with the
    /// smallest window floor.
    pub mean: f64,
    pub stderr: f64,
    /// Lower ends of the dyadic time windows, decreasing.
    pub window_starts: Vec<f64>,
    /// Median over seeds of the integral over each window.
    pub window_medians: Vec<f64>,
    /// Mean over seeds of the integral over `[t_min, T]` as the floor
    /// `t_min` is swept down through the window starts.
    pub floor_means: Vec<f64>,
    /// Fitted slope of `log window median` against `log t`.
    pub window_slope: f64,
    /// True when the window integrals do not decay as the floor goes to 0.
    pub diverging: bool,
}

const MIN_WINDOW_POINTS: usize = 16;

/// Monte Carlo estimate of `E int_0^T |B_t - x|^-(n-1+s) dt` for fractional
/// Brownian motion `B`, with a divergence flag from dyadic time windows
/// `[T 2^-(k+1), T 2^-k]`: the integral over the windows behaves like a
/// power of the window time, and the total diverges when that power is not
/// positive.
pub fn fbm_energy_bound(
    hurst: f64,
    dim: usize,
    s: f64,
    x: &[f64],
    seeds: usize,
    grid: TimeGrid,
    base_seed: u64,
) -> Result<FbmEnergyReport> {
    if seeds < 20 {
        return Err(invalid(format!("at least 20 seeds are required, got {seeds}")));
    }
    if x.len() != dim {
        return Err(invalid("probe has the wrong dimension"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("s must lie in (0,1), got {s}")));
    }
    let q = dim as f64 - 1.0 + s;
    let n = grid.steps();
    let dt = grid.dt();
    let mut windows = Vec::new();
    let mut hi = n;
    while hi / 2 >= MIN_WINDOW_POINTS {
        windows.push((hi / 2, hi));
        hi /= 2;
    }
    if windows.len() < 3 {
        return Err(invalid("grid too coarse for three dyadic windows"));
    }
    let per_seed: Vec<Vec<f64>> = (0..seeds)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let path = make_fbm(hurst, dim, grid, base_seed.wrapping_add(k as u64))?;
            let f: Vec<f64> = path.points().map(|p| dist2(p, x).powf(-0.5 * q)).collect();
            Ok(windows
                .iter()
                .map(|&(a, b)| trapezoid(&f[a..=b], dt))
                .collect())
        })
        .collect::<Result<_>>()?;
    let window_starts: Vec<f64> = windows.iter().map(|w| grid.time(w.0)).collect();
    let window_medians: Vec<f64> = (0..windows.len())
        .map(|w| median(&per_seed.iter().map(|v| v[w]).collect::<Vec<_>>()))
        .collect();
    let cumulative: Vec<Vec<f64>> = per_seed
        .iter()
        .map(|v| {
            v.iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let floor_means: Vec<f64> = (0..windows.len())
        .map(|w| cumulative.iter().map(|c| c[w]).sum::<f64>() / seeds as f64)
        .collect();
    let totals: Vec<f64> = cumulative.iter().map(|c| *c.last().unwrap()).collect();
    let mean = totals.iter().sum::<f64>() / seeds as f64;
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (seeds as f64 - 1.0);
    let lx: Vec<f64> = window_starts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = window_medians.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
    let window_slope = linear_fit(&lx, &ly).map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(FbmEnergyReport {
        hurst,
        dim,
        s,
        seeds,
        mean,
        stderr: (var / seeds as f64).sqrt(),
        window_starts,
        window_medians,
        floor_means,
        window_slope,
        diverging: window_slope <= 0.0,
    })
}

fn trapezoid(f: &[f64], dt: f64) -> f64 {
    if f.len() < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..f.len() - 1].iter().sum();
    dt * (inner + 0.5 * (f[0] + f[f.len() - 1]))
}

/// Result of [`moment_condition_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub exponent: f64,
    pub levels: Vec<u32>,
    pub scales: Vec<f64>,
    /// Capped moment per level.
    pub values: Vec<f64>,
    /// Value at the finest level.
    pub value: f64,
    pub growth_exponent: f64,
    pub diverging: bool,
}

/// Capped moment `sum_j w_j max(|y_j - x0|, h)^exponent` of the gradient
/// measure on the cube of half-width `radius` around `x0`, with a
/// divergence flag from the level sweep.
pub fn moment_condition_check(
    phi: &dyn ScalarBv,
    x0: &[f64],
    exponent: f64,
    radius: f64,
    levels: &[u32],
) -> Result<MomentReport> {
    let n = phi.dim() as f64;
    if !(exponent > -n && exponent < 0.0) {
        return Err(invalid(format!("exponent must lie in (-{n}, 0), got {exponent}")));
    }
    if x0.len() != phi.dim() {
        return Err(invalid("base point has the wrong dimension"));
    }
    if levels.len() < 2 {
        return Err(invalid("at least two levels are required"));
    }
    let region = Region::new(
        x0.iter().map(|v| v - radius).collect(),
        x0.iter().map(|v| v + radius).collect(),
    )?;
    let mut scales = Vec::new();
    let mut values = Vec::new();
    for &level in levels {
        let gm = phi.gradient_measure(&region, level)?;
        let h2 = gm.scale * gm.scale;
        let v: f64 = gm
            .measure
            .atoms()
            .map(|(y, w)| w * crate::measures::capped_power(dist2(x0, y), h2, 0.5 * exponent))
            .sum();
        scales.push(gm.scale);
        values.push(v);
    }
    let (growth_exponent, _, verdict) =
        classify_growth(&scales, &values, DEFAULT_THRESHOLD, DEFAULT_R2_FLOOR);
    Ok(MomentReport {
        exponent,
        levels: levels.to_vec(),
        value: *values.last().unwrap(),
        scales,
        values,
        growth_exponent,
        diverging: verdict == Verdict::Diverging,
    })
}
