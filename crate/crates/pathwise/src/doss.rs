//! Doss-transform solutions of `dX = sigma(X) dY`: the maps `f` and
//! `g = f^-1` with `grad f = sigma(f)`, candidate solutions
//! `X_t = f(Y_t + g(x0))` and their verification.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv_library::{
    cantor_phi, cantor_phi_inverse, cayley_hamilton_inverse, curl_check, distortion_check,
    lattice_stencil, Constant, HalfSpace, MatrixBv, Region, ScalarBv, ScalarRef,
};
use crate::error::{invalid, Error, Result};
use crate::gls_integral::gls_integrate_series;
use crate::grid_paths::{estimate_holder, GridFunction, SampledPath};
use crate::variability::{classify, classify_matrix, compose, VariabilityParams, VariabilityReport, Verdict};

/// Numerical settings of the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Table spacing in 1D, lattice spacing in higher dimensions.
    pub spacing: f64,
    /// Residual `|g(x) - y|` accepted by the inversion.
    pub inversion_tolerance: f64,
    /// Mollification radius of the lattice potential, `2 * spacing` when
    /// unset.
    pub mollification_eps: Option<f64>,
    /// Lower bound required of `det sigma` on the lattice.
    pub det_floor: f64,
    /// Lattice spacing of the curl check.
    pub curl_spacing: f64,
    /// Mollification radius of the curl check in units of `curl_spacing`.
    pub curl_eps_factor: f64,
    /// Largest accepted `eps * max curl residual`.
    pub curl_threshold: f64,
    /// Largest accepted disagreement between the two line-integral orders.
    pub path_tolerance: f64,
    /// Iteration cap of the damped Newton inversion.
    pub newton_iterations: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            spacing: 0.02,
            inversion_tolerance: 1e-10,
            mollification_eps: None,
            det_floor: 1e-8,
            curl_spacing: 0.02,
            curl_eps_factor: 8.0,
            curl_threshold: 0.05,
            path_tolerance: 1e-5,
            newton_iterations: 80,
        }
    }
}

impl SolveConfig {
    /// Defaults suited to 1D tables.
    pub fn scalar() -> Self {
        Self {
            spacing: 1e-3,
            ..Self::default()
        }
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing", self.spacing),
            ("inversion_tolerance", self.inversion_tolerance),
            ("det_floor", self.det_floor),
            ("curl_spacing", self.curl_spacing),
            ("curl_threshold", self.curl_threshold),
            ("path_tolerance", self.path_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.curl_eps_factor >= 2.0) {
            return Err(invalid("curl_eps_factor must be at least 2"));
        }
        if let Some(eps) = self.mollification_eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(invalid("mollification_eps must be positive"));
            }
        }
        if self.newton_iterations == 0 {
            return Err(invalid("newton_iterations must be positive"));
        }
        Ok(())
    }

    fn eps(&self) -> f64 {
        self.mollification_eps.unwrap_or(2.0 * self.spacing)
    }
}

/// Origin of a pair of Doss maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Solved,
    ClosedForm(String),
}

trait MapPair: Send + Sync + fmt::Debug {
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn inverse(&self, y: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>>;
}

/// The maps `f` and `g = f^-1` solving `grad f = sigma(f)`.
#[derive(Debug, Clone)]
pub struct DossMaps {
    dim: usize,
    pair: Arc<dyn MapPair>,
    lip_f: f64,
    lip_g: f64,
    source: MapSource,
    inversion_tolerance: f64,
}

impl DossMaps {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Estimated Lipschitz constant of `f`.
    pub fn lip_f(&self) -> f64 {
        self.lip_f
    }

    /// Estimated Lipschitz constant of `g`.
    pub fn lip_g(&self) -> f64 {
        self.lip_g
    }

    pub fn source(&self) -> &MapSource {
        &self.source
    }

    pub fn inversion_tolerance(&self) -> f64 {
        self.inversion_tolerance
    }

    /// The forward map `g`.
    pub fn g(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.pair.forward(x)
    }

    /// The inverse map `f`.
    pub fn f(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        self.pair.inverse(y, None)
    }

    /// `f(y)`, starting the inversion from `guess` when it is iterative.
    pub fn f_near(&self, y: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        self.pair.inverse(y, Some(guess))
    }

    /// `max |f(g(x)) - x|` over `probes`.
    pub fn roundtrip_error(&self, probes: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in probes {
            let back = self.f_near(&self.g(x)?, x)?;
            worst = worst.max(dist(&back, x));
        }
        Ok(worst)
    }

    /// `max |grad f(y) - sigma(f(y))|` over `probes`, the Jacobian of `f`
    /// by central differences of width `step`.
    pub fn derivative_error(&self, sigma: &MatrixBv, probes: &[Vec<f64>], step: f64) -> Result<f64> {
        if sigma.dim() != self.dim {
            return Err(invalid("coefficient dimension does not match the maps"));
        }
        let mut worst: f64 = 0.0;
        for y in probes {
            let x = self.f(y)?;
            let s = sigma.evaluate(&x);
            for k in 0..self.dim {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[k] += step;
                ym[k] -= step;
                let fp = self.f_near(&yp, &x)?;
                let fm = self.f_near(&ym, &x)?;
                for i in 0..self.dim {
                    let d = (fp[i] - fm[i]) / (2.0 * step);
                    worst = worst.max((d - s[(i, k)]).abs());
                }
            }
        }
        Ok(worst)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "point has dimension {}, maps have dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

// ---------------------------------------------------------------------------
// One dimension

#[derive(Debug)]
struct ScalarTable {
    xs: Vec<f64>,
    gs: Vec<f64>,
}

impl ScalarTable {
    fn interpolate(from: &[f64], to: &[f64], v: f64) -> Option<f64> {
        let n = from.len();
        if !(v >= from[0] && v <= from[n - 1]) {
            return None;
        }
        let k = from.partition_point(|a| *a <= v).clamp(1, n - 1);
        let (a, b) = (from[k - 1], from[k]);
        let u = if b > a { (v - a) / (b - a) } else { 0.0 };
        Some(to[k - 1] + u * (to[k] - to[k - 1]))
    }
}

impl MapPair for ScalarTable {
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Self::interpolate(&self.xs, &self.gs, x[0])
            .map(|v| vec![v])
            .ok_or_else(|| Error::RangeViolation { point: x.to_vec() })
    }

    fn inverse(&self, y: &[f64], _guess: Option<&[f64]>) -> Result<Vec<f64>> {
        Self::interpolate(&self.gs, &self.xs, y[0])
            .map(|v| vec![v])
            .ok_or_else(|| Error::RangeViolation { point: y.to_vec() })
    }
}

const TAIL_RATIO: f64 = 0.97;

fn reciprocal_integral(sigma: &dyn ScalarBv, a: f64, b: f64) -> f64 {
    quadrature::double_exponential::integrate(|z| 1.0 / sigma.evaluate(&[z]), a, b, 1e-11).integral
}

/// True when `int 1/sigma` over shrinking intervals at `node` stops
/// shrinking, the signature of a non-integrable singularity.
fn tail_diverges(sigma: &dyn ScalarBv, node: f64, h: f64, towards: f64) -> bool {
    let mut prev: Option<f64> = None;
    let mut stalled = true;
    for k in 1..=5 {
        let delta = h * 4f64.powi(-k);
        let j = reciprocal_integral(sigma, node, node + towards * delta).abs();
        if !j.is_finite() {
            return true;
        }
        if let Some(p) = prev {
            if j < TAIL_RATIO * p {
                stalled = false;
            }
        }
        prev = Some(j);
    }
    stalled
}

/// `g(x) = int_0^x dz / sigma(z)` tabulated on `domain` with `f = g^-1`.
///
/// Refuses with [`Error::QuadratureDivergence`] naming the first cell where
/// `1/sigma` fails to be integrable at grid scale.
pub fn solve_scalar(sigma: &dyn ScalarBv, domain: (f64, f64), config: &SolveConfig) -> Result<DossMaps> {
    config.validate()?;
    if sigma.dim() != 1 {
        return Err(invalid("solve_scalar needs a coefficient on the line"));
    }
    let (lo, hi) = domain;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(invalid(format!("invalid domain [{lo}, {hi}]")));
    }
    let base = 0.0f64.clamp(lo, hi);
    let h = config.spacing;
    let below = ((base - lo) / h).ceil() as usize;
    let above = ((hi - base) / h).ceil() as usize;
    let xs: Vec<f64> = (0..=below + above)
        .map(|k| {
            if k < below {
                (base - (below - k) as f64 * h).max(lo)
            } else {
                (base + (k - below) as f64 * h).min(hi)
            }
        })
        .collect();
    let mut xs_dedup: Vec<f64> = Vec::with_capacity(xs.len());
    for x in xs {
        if xs_dedup.last().is_none_or(|l| x > *l) {
            xs_dedup.push(x);
        }
    }
    let xs = xs_dedup;
    let zero_at = |x: f64| sigma.evaluate(&[x]) <= 0.0;
    let cells: Vec<f64> = xs
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let m = 0.5 * (a + b);
            if sigma.evaluate(&[m]) < 0.0 {
                return Err(invalid(format!("coefficient is negative at {m}")));
            }
            let diverges = (zero_at(a) && tail_diverges(sigma, a, b - a, 1.0))
                || (zero_at(b) && tail_diverges(sigma, b, b - a, -1.0));
            let v = if diverges {
                f64::INFINITY
            } else {
                reciprocal_integral(sigma, a, b)
            };
            if !v.is_finite() {
                return Err(Error::QuadratureDivergence { lo: a, hi: b });
            }
            if v <= 0.0 {
                return Err(invalid(format!(
                    "g is not strictly increasing on [{a}, {b}]"
                )));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let base_idx = xs.iter().position(|x| *x == base).unwrap_or(0);
    let mut gs = vec![0.0; xs.len()];
    for k in base_idx + 1..xs.len() {
        gs[k] = gs[k - 1] + cells[k - 1];
    }
    for k in (0..base_idx).rev() {
        gs[k] = gs[k + 1] - cells[k];
    }
    let mut lip_f: f64 = 0.0;
    let mut lip_g: f64 = 0.0;
    for (k, c) in cells.iter().enumerate() {
        let dx = xs[k + 1] - xs[k];
        lip_f = lip_f.max(dx / c);
        lip_g = lip_g.max(c / dx);
    }
    Ok(DossMaps {
        dim: 1,
        pair: Arc::new(ScalarTable { xs, gs }),
        lip_f,
        lip_g,
        source: MapSource::Solved,
        inversion_tolerance: config.inversion_tolerance,
    })
}

// ---------------------------------------------------------------------------
// Several dimensions

struct LatticeMap {
    sigma: MatrixBv,
    origin: Vec<f64>,
    spacing: f64,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    /// `g` at every node, node-major.
    values: Vec<f64>,
    tolerance: f64,
    iterations: usize,
}

impl fmt::Debug for LatticeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeMap")
            .field("sigma", &self.sigma.name())
            .field("origin", &self.origin)
            .field("spacing", &self.spacing)
            .field("sizes", &self.sizes)
            .finish()
    }
}

fn strides_of(sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * sizes[k + 1];
    }
    s
}

fn multi_index(mut idx: usize, sizes: &[usize]) -> Vec<usize> {
    let mut m = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        m[k] = idx % sizes[k];
        idx /= sizes[k];
    }
    m
}

impl LatticeMap {
    fn dim(&self) -> usize {
        self.sizes.len()
    }

    fn node_point(&self, m: &[usize]) -> Vec<f64> {
        m.iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + i as f64 * self.spacing)
            .collect()
    }

    fn interpolate(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut base = 0usize;
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let u = (x[k] - self.origin[k]) / self.spacing;
            let last = (self.sizes[k] - 1) as f64;
            if !(u >= -1e-9 && u <= last + 1e-9) {
                return None;
            }
            let u = u.clamp(0.0, last);
            let i = (u.floor() as usize).min(self.sizes[k] - 2);
            frac[k] = u - i as f64;
            base += i * self.strides[k];
        }
        let mut out = vec![0.0; n];
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    idx += self.strides[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                for i in 0..n {
                    out[i] += w * self.values[idx * n + i];
                }
            }
        }
        Some(out)
    }

    fn misfit(&self, x: &[f64], y: &[f64]) -> Option<(Vec<f64>, f64)> {
        let gx = self.interpolate(x)?;
        let r: Vec<f64> = y.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let e = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Some((r, e))
    }

    fn newton(&self, y: &[f64], start: &[f64]) -> (Vec<f64>, f64) {
        let mut x = start.to_vec();
        let Some((mut r, mut e)) = self.misfit(&x, y) else {
            return (x, f64::INFINITY);
        };
        for _ in 0..self.iterations {
            if e <= self.tolerance {
                break;
            }
            let s = self.sigma.evaluate(&x);
            let step = &s * DVector::from_column_slice(&r);
            let mut lambda = 1.0;
            let mut moved = false;
            while lambda > 1e-8 {
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                if let Some((rc, ec)) = self.misfit(&cand, y) {
                    if ec < e {
                        x = cand;
                        r = rc;
                        e = ec;
                        moved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (x, e)
    }

    fn coarse_start(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let stride: Vec<usize> = self.sizes.iter().map(|s| (s / 48).max(1)).collect();
        let counts: Vec<usize> = self.sizes.iter().zip(&stride).map(|(s, d)| s.div_ceil(*d)).collect();
        let total: usize = counts.iter().product();
        let mut best = (f64::INFINITY, vec![0; n]);
        for k in 0..total {
            let m: Vec<usize> = multi_index(k, &counts)
                .iter()
                .zip(&stride)
                .map(|(a, d)| a * d)
                .collect();
            let idx: usize = m.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
            let e: f64 = (0..n)
                .map(|i| (self.values[idx * n + i] - y[i]).powi(2))
                .sum();
            if e < best.0 {
                best = (e, m);
            }
        }
        self.node_point(&best.1)
    }

    fn box_search(&self, y: &[f64], start: &[f64]) -> (Vec<f64>, f64) {
        let n = self.dim();
        let mut center = start.to_vec();
        let mut best = self.misfit(&center, y).map_or(f64::INFINITY, |m| m.1);
        let mut width = 4.0 * self.spacing;
        let offsets: Vec<Vec<i32>> = (0..3usize.pow(n as u32))
            .map(|mut k| {
                (0..n)
                    .map(|_| {
                        let o = (k % 3) as i32 - 1;
                        k /= 3;
                        o
                    })
                    .collect()
            })
            .collect();
        for _ in 0..400 {
            if width < 1e-15 || best <= self.tolerance {
                break;
            }
            let mut moved = false;
            for o in &offsets {
                let cand: Vec<f64> = center
                    .iter()
                    .zip(o)
                    .map(|(c, &d)| c + d as f64 * width)
                    .collect();
                if let Some((_, e)) = self.misfit(&cand, y) {
                    if e < best {
                        best = e;
                        center = cand;
                        moved = true;
                    }
                }
            }
            if !moved {
                width *= 0.5;
            }
        }
        (center, best)
    }
}

impl MapPair for LatticeMap {
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.interpolate(x)
            .ok_or_else(|| Error::RangeViolation { point: x.to_vec() })
    }

    fn inverse(&self, y: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut best: (Vec<f64>, f64) = (Vec::new(), f64::INFINITY);
        if let Some(g) = guess {
            best = self.newton(y, g);
            if best.1 <= self.tolerance {
                return Ok(best.0);
            }
        }
        let start = self.coarse_start(y);
        let attempt = self.newton(y, &start);
        if attempt.1 <= self.tolerance {
            return Ok(attempt.0);
        }
        if attempt.1 < best.1 {
            best = attempt;
        }
        let (x, _) = self.box_search(y, &best.0);
        let polished = self.newton(y, &x);
        if polished.1 <= self.tolerance {
            return Ok(polished.0);
        }
        let far = 4.0 * self.spacing;
        if polished.1 > far {
            return Err(Error::RangeViolation { point: y.to_vec() });
        }
        Err(Error::InversionFailure {
            target: y.to_vec(),
            residual: polished.1,
        })
    }
}

/// `int_0^1 F(t) dt` of a vector-valued function by adaptive Simpson.
fn adaptive_simpson<F>(f: &F, tolerance: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    fn simpson(a: &[f64], m: &[f64], b: &[f64], len: f64) -> Vec<f64> {
        a.iter()
            .zip(m)
            .zip(b)
            .map(|((x, y), z)| len / 6.0 * (x + 4.0 * y + z))
            .collect()
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F>(
        f: &F,
        lo: f64,
        hi: f64,
        fa: &[f64],
        fm: &[f64],
        fb: &[f64],
        whole: Vec<f64>,
        tol: f64,
        depth: u32,
    ) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Result<Vec<f64>>,
    {
        let mid = 0.5 * (lo + hi);
        let fl = f(0.5 * (lo + mid))?;
        let fr = f(0.5 * (mid + hi))?;
        let left = simpson(fa, &fl, fm, mid - lo);
        let right = simpson(fm, &fr, fb, hi - mid);
        let err = left
            .iter()
            .zip(&right)
            .zip(&whole)
            .map(|((l, r), w)| (l + r - w).abs())
            .fold(0.0, f64::max);
        if depth == 0 || err <= 15.0 * tol {
            return Ok(left
                .iter()
                .zip(&right)
                .zip(&whole)
                .map(|((l, r), w)| l + r + (l + r - w) / 15.0)
                .collect());
        }
        let a = recurse(f, lo, mid, fa, &fl, fm, left, 0.5 * tol, depth - 1)?;
        let b = recurse(f, mid, hi, fm, &fr, fb, right, 0.5 * tol, depth - 1)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }
    let fa = f(0.0)?;
    let fm = f(0.5)?;
    let fb = f(1.0)?;
    let whole = simpson(&fa, &fm, &fb, 1.0);
    recurse(f, 0.0, 1.0, &fa, &fm, &fb, whole, tolerance, 28)
}

const SEGMENT_TOLERANCE: f64 = 1e-9;

/// Raw potential `g` with `grad g = sigma^-1` on the lattice, integrated
/// from `base` along axis-parallel polylines visiting the axes in `order`.
fn line_integrals(
    sigma: &MatrixBv,
    det_floor: f64,
    origin: &[f64],
    h: f64,
    sizes: &[usize],
    base: &[usize],
    order: &[usize],
) -> Result<Vec<f64>> {
    let n = sizes.len();
    let strides = strides_of(sizes);
    let total: usize = sizes.iter().product();
    let mut g = vec![f64::NAN; total * n];
    let base_idx: usize = base.iter().zip(&strides).map(|(a, s)| a * s).sum();
    for i in 0..n {
        g[base_idx * n + i] = 0.0;
    }
    let segment = |m: &[usize], axis: usize| -> Result<Vec<f64>> {
        let p: Vec<f64> = m
            .iter()
            .zip(origin)
            .map(|(&i, &o)| o + i as f64 * h)
            .collect();
        let column = |t: f64| -> Result<Vec<f64>> {
            let mut x = p.clone();
            x[axis] += t * h;
            let inv = cayley_hamilton_inverse(&sigma.evaluate(&x), det_floor)?;
            Ok((0..n).map(|i| inv[(i, axis)] * h).collect())
        };
        adaptive_simpson(&column, SEGMENT_TOLERANCE * h)
    };
    for (stage, &axis) in order.iter().enumerate() {
        let fixed = &order[stage..];
        let seeds: Vec<usize> = (0..total)
            .filter(|&idx| {
                let m = multi_index(idx, sizes);
                fixed.iter().all(|&k| m[k] == base[k])
            })
            .collect();
        let lines: Vec<Vec<(usize, Vec<f64>)>> = seeds
            .par_iter()
            .map(|&seed| {
                let m0 = multi_index(seed, sizes);
                let mut out = Vec::with_capacity(sizes[axis]);
                let mut start = vec![0.0; n];
                start.copy_from_slice(&g[seed * n..seed * n + n]);
                let mut acc = start.clone();
                let mut m = m0.clone();
                for t in base[axis] + 1..sizes[axis] {
                    m[axis] = t - 1;
                    let d = segment(&m, axis)?;
                    for i in 0..n {
                        acc[i] += d[i];
                    }
                    out.push((seed + t * strides[axis] - base[axis] * strides[axis], acc.clone()));
                }
                let mut acc = start;
                for t in (0..base[axis]).rev() {
                    m[axis] = t;
                    let d = segment(&m, axis)?;
                    for i in 0..n {
                        acc[i] -= d[i];
                    }
                    out.push((seed - (base[axis] - t) * strides[axis], acc.clone()));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        for line in lines {
            for (idx, v) in line {
                g[idx * n..idx * n + n].copy_from_slice(&v);
            }
        }
    }
    Ok(g)
}

/// Doss maps of a matrix coefficient by line integration of
/// `sigma^-1` from `base` over `region` and Newton inversion.
///
/// Refuses with [`Error::CurlRefusal`] when the mollified inverse
/// coefficient is not curl-free, [`Error::Distortion`] when the angular
/// hypothesis fails, [`Error::Singular`] when the determinant floor is
/// violated and [`Error::PathDependence`] when the two polyline orders
/// disagree.
pub fn solve_nd(sigma: &MatrixBv, base: &[f64], region: &Region, config: &SolveConfig) -> Result<DossMaps> {
    config.validate()?;
    let n = sigma.dim();
    if n < 2 {
        return Err(invalid("solve_nd needs dimension at least 2; use solve_scalar"));
    }
    if base.len() != n || region.dim() != n {
        return Err(invalid("base point and region must match the coefficient dimension"));
    }
    if !region.contains(base) {
        return Err(invalid("base point must lie in the region"));
    }
    let curl_eps = config.curl_eps_factor * config.curl_spacing;
    let report = curl_check(&sigma.inverse_field(), region, curl_eps, config.curl_spacing)?;
    if report.max_residual * curl_eps > config.curl_threshold {
        return Err(Error::CurlRefusal {
            report: Box::new(report),
            threshold: config.curl_threshold / curl_eps,
        });
    }
    let h = config.spacing;
    let eps = config.eps();
    let pad = eps + h;
    let below: Vec<usize> = (0..n)
        .map(|k| ((base[k] - region.lo[k] + pad) / h).ceil() as usize)
        .collect();
    let above: Vec<usize> = (0..n)
        .map(|k| ((region.hi[k] - base[k] + pad) / h).ceil() as usize)
        .collect();
    let sizes: Vec<usize> = below.iter().zip(&above).map(|(a, b)| a + b + 1).collect();
    let origin: Vec<f64> = (0..n).map(|k| base[k] - below[k] as f64 * h).collect();
    let strides = strides_of(&sizes);
    let total: usize = sizes.iter().product();

    let probe_stride: Vec<usize> = sizes.iter().map(|s| (s / 16).max(1)).collect();
    let mut probes = Vec::new();
    let mut lip_f: f64 = 0.0;
    let mut lip_g: f64 = 0.0;
    for idx in 0..total {
        let m = multi_index(idx, &sizes);
        let x: Vec<f64> = (0..n).map(|k| origin[k] + m[k] as f64 * h).collect();
        let s = sigma.evaluate(&x);
        let inv = cayley_hamilton_inverse(&s, config.det_floor)?;
        lip_f = lip_f.max(operator_norm(&s));
        lip_g = lip_g.max(operator_norm(&inv));
        if m.iter().zip(&probe_stride).all(|(a, s)| a % s == 0) {
            probes.push(x);
        }
    }
    let distortion = distortion_check(sigma, &probes)?;
    if distortion.angular_violation {
        return Err(Error::Distortion(format!(
            "angular constant {} does not exceed -1",
            distortion.delta
        )));
    }

    let forward: Vec<usize> = (0..n).collect();
    let backward: Vec<usize> = (0..n).rev().collect();
    let g_a = line_integrals(sigma, config.det_floor, &origin, h, &sizes, &below, &forward)?;
    let g_b = line_integrals(sigma, config.det_floor, &origin, h, &sizes, &below, &backward)?;
    let discrepancy = g_a
        .iter()
        .zip(&g_b)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(discrepancy <= config.path_tolerance) {
        return Err(Error::PathDependence {
            discrepancy,
            tolerance: config.path_tolerance,
        });
    }

    let stencil = lattice_stencil(n, eps, h);
    let r = (eps / h).floor() as usize;
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .flat_map_iter(|idx| {
            let m = multi_index(idx, &sizes);
            let inside = m.iter().zip(&sizes).all(|(a, s)| *a >= r && *a + r < *s);
            let v: Vec<f64> = if inside {
                let mut acc = vec![0.0; n];
                for (o, w) in &stencil {
                    let j = o
                        .iter()
                        .zip(&strides)
                        .map(|(a, s)| a * *s as isize)
                        .sum::<isize>();
                    let k = (idx as isize + j) as usize;
                    for i in 0..n {
                        acc[i] += w * g_a[k * n + i];
                    }
                }
                acc
            } else {
                g_a[idx * n..idx * n + n].to_vec()
            };
            v.into_iter()
        })
        .collect();

    let map = LatticeMap {
        sigma: sigma.clone(),
        origin,
        spacing: h,
        sizes,
        strides,
        values,
        tolerance: config.inversion_tolerance,
        iterations: config.newton_iterations,
    };
    Ok(DossMaps {
        dim: n,
        pair: Arc::new(map),
        lip_f,
        lip_g,
        source: MapSource::Solved,
        inversion_tolerance: config.inversion_tolerance,
    })
}

// ---------------------------------------------------------------------------
// Closed forms

/// Families of explicitly solvable coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `f(y) = (c y1 + y2, y1 1_{y1 < 0} + c y2)`.
    JumpLine { c: f64 },
    /// `f(y) = (b y1 + a y2 1_Q, a y1 1_Q + b y2)` with `Q` the open
    /// positive quadrant.
    Cone { a: f64, b: f64 },
    /// `f(y) = (y1, y1 1_{y1 > 0} + Phi(y2))`.
    CantorShear,
}

#[derive(Debug)]
struct LinearPair {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl MapPair for LinearPair {
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((&self.inverse * DVector::from_column_slice(x)).iter().copied().collect())
    }

    fn inverse(&self, y: &[f64], _guess: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok((&self.matrix * DVector::from_column_slice(y)).iter().copied().collect())
    }
}

#[derive(Debug)]
struct ClosedPair(ClosedForm);

impl MapPair for ClosedPair {
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (x1, x2) = (x[0], x[1]);
        match self.0 {
            ClosedForm::JumpLine { c } => {
                if x2 <= c * x1 {
                    let y2 = x2 / c;
                    Ok(vec![(x1 - y2) / c, y2])
                } else {
                    let d = c * c - 1.0;
                    Ok(vec![(c * x1 - x2) / d, (c * x2 - x1) / d])
                }
            }
            ClosedForm::Cone { a, b } => {
                let d = b * b - a * a;
                let inside = [(b * x1 - a * x2) / d, (b * x2 - a * x1) / d];
                if inside[0] > 0.0 && inside[1] > 0.0 {
                    return Ok(inside.to_vec());
                }
                let outside = [x1 / b, x2 / b];
                if !(outside[0] > 0.0 && outside[1] > 0.0) {
                    return Ok(outside.to_vec());
                }
                Err(Error::RangeViolation { point: x.to_vec() })
            }
            ClosedForm::CantorShear => {
                let shift = if x1 > 0.0 { x1 } else { 0.0 };
                Ok(vec![x1, cantor_phi_inverse(x2 - shift)])
            }
        }
    }

    fn inverse(&self, y: &[f64], _guess: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(closed_form_f(self.0, y))
    }
}

/// The printed map `f` of a closed-form family at `y`.
pub fn closed_form_f(form: ClosedForm, y: &[f64]) -> Vec<f64> {
    let (y1, y2) = (y[0], y[1]);
    match form {
        ClosedForm::JumpLine { c } => {
            let below = if y1 < 0.0 { y1 } else { 0.0 };
            vec![c * y1 + y2, below + c * y2]
        }
        ClosedForm::Cone { a, b } => {
            let q = if y1 > 0.0 && y2 > 0.0 { 1.0 } else { 0.0 };
            vec![b * y1 + a * y2 * q, a * y1 * q + b * y2]
        }
        ClosedForm::CantorShear => {
            let shift = if y1 > 0.0 { y1 } else { 0.0 };
            vec![y1, shift + cantor_phi(y2)]
        }
    }
}

/// Doss maps of a closed-form family.
pub fn closed_form_maps(form: ClosedForm) -> Result<DossMaps> {
    let (lip_f, lip_g) = match form {
        ClosedForm::JumpLine { c } => {
            if !(c > 1.0 && c.is_finite()) {
                return Err(invalid(format!("jump-line constant must exceed 1, got {c}")));
            }
            (c + 1.0, 1.0 / (c - 1.0))
        }
        ClosedForm::Cone { a, b } => {
            if !(a > 0.0 && a < b && b.is_finite()) {
                return Err(invalid(format!("cone parameters need 0 < a < b, got {a}, {b}")));
            }
            (a + b, 1.0 / (b - a))
        }
        ClosedForm::CantorShear => {
            let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 2.0]);
            let inv = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
            (operator_norm(&m), operator_norm(&inv))
        }
    };
    let name = match form {
        ClosedForm::JumpLine { .. } => "jump_line",
        ClosedForm::Cone { .. } => "cone",
        ClosedForm::CantorShear => "cantor_shear",
    };
    Ok(DossMaps {
        dim: 2,
        pair: Arc::new(ClosedPair(form)),
        lip_f,
        lip_g,
        source: MapSource::ClosedForm(name.into()),
        inversion_tolerance: 1e-12,
    })
}

/// Doss maps `f(y) = A y`, `g(x) = A^-1 x` of a constant coefficient `A`.
pub fn linear_maps(matrix: &DMatrix<f64>) -> Result<DossMaps> {
    let n = matrix.nrows();
    if matrix.ncols() != n || n == 0 {
        return Err(invalid("matrix must be square"));
    }
    let inverse = matrix
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { det: matrix.determinant(), floor: 0.0 })?;
    Ok(DossMaps {
        dim: n,
        lip_f: operator_norm(matrix),
        lip_g: operator_norm(&inverse),
        pair: Arc::new(LinearPair {
            matrix: matrix.clone(),
            inverse,
        }),
        source: MapSource::ClosedForm("linear".into()),
        inversion_tolerance: 1e-12,
    })
}

// ---------------------------------------------------------------------------
// Solutions and their verification

/// The candidate `X_t = f(Y_t + g(x0))`.
pub fn build_solution(maps: &DossMaps, driver: &SampledPath, x0: &[f64]) -> Result<SampledPath> {
    if driver.dim() != maps.dim() || x0.len() != maps.dim() {
        return Err(invalid("driver, start point and maps must share the dimension"));
    }
    if driver.point(0).iter().any(|v| v.abs() > 1e-12) {
        return Err(invalid("the driver must start at the origin"));
    }
    let shift = maps.g(x0)?;
    let mut values = Vec::with_capacity(driver.values().len());
    let mut prev = x0.to_vec();
    for y in driver.points() {
        let target: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let x = maps.f_near(&target, &prev)?;
        values.extend_from_slice(&x);
        prev = x;
    }
    SampledPath::new(*driver.grid(), maps.dim(), values)
}

/// Outcome of [`residual`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `sup_t max_j |R_j(t)|`.
    pub sup: f64,
    /// `sup_t |R_j(t)|` per component.
    pub per_component: Vec<f64>,
    /// Estimated Hoelder exponent of the solution.
    pub alpha: f64,
    /// Estimated Hoelder exponent of the driver.
    pub gamma: f64,
    /// The order `s` at which the variability precondition was checked.
    pub s_witness: f64,
    pub classifier: Option<VariabilityReport>,
}

/// How [`residual`] establishes its variability precondition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    /// Run the classifier at the witness order.
    pub check: bool,
    pub levels: Vec<u32>,
    pub margin: f64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        Self {
            check: true,
            levels: vec![6, 8, 10],
            margin: 0.05,
        }
    }
}

/// Midpoint of `((1 - gamma) / alpha, 1)`, or `None` when the interval is
/// empty.
pub fn s_witness(alpha: f64, gamma: f64) -> Option<f64> {
    let lower = (1.0 - gamma) / alpha;
    (alpha > 0.0 && lower < 1.0).then(|| 0.5 * (lower.max(0.0) + 1.0))
}

/// `sup_t |X_t - x0 - sum_k int_0^t sigma_jk(X) dY^k|` over components `j`,
/// with the integrals from [`gls_integrate_series`].
///
/// Refuses with [`Error::NotVariable`] when the classifier does not find
/// the solution `(s, 1)`-variable with respect to `sigma` at the witness
/// order, and with [`Error::ExponentTooLow`] when no admissible order
/// exists.
pub fn residual(
    solution: &SampledPath,
    sigma: &MatrixBv,
    driver: &SampledPath,
    x0: &[f64],
    theta: f64,
    witness: &WitnessOptions,
) -> Result<ResidualReport> {
    let n = sigma.dim();
    if solution.dim() != n || driver.dim() != n || x0.len() != n {
        return Err(invalid("solution, driver, start point and coefficient must share the dimension"));
    }
    if solution.grid() != driver.grid() {
        return Err(invalid("solution and driver live on different grids"));
    }
    let alpha = estimate_holder(solution)?.exponent;
    let gamma = estimate_holder(driver)?.exponent;
    let s = s_witness(alpha, gamma).ok_or(Error::ExponentTooLow {
        exponent: alpha,
        required: 1.0 - gamma,
    })?;
    let classifier = if witness.check {
        let params = VariabilityParams::new(s, 1.0)
            .with_levels(witness.levels.clone())
            .with_margin(witness.margin);
        let report = classify_matrix(solution, sigma, &params)?;
        if report.verdict != Verdict::Finite {
            return Err(Error::NotVariable {
                report: Box::new(report),
            });
        }
        Some(report)
    } else {
        None
    };
    let drivers: Vec<GridFunction> = (0..n).map(|k| driver.coordinate(k)).collect();
    let per_component = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut total = solution.coordinate(j).map(|v| v - x0[j]);
            for (k, y) in drivers.iter().enumerate() {
                let integrand = compose(sigma.entry(j, k).as_ref(), solution)?;
                let series = gls_integrate_series(&integrand, y, theta)?;
                total = total.combine(1.0, &series, -1.0)?;
            }
            Ok(total.sup_norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ResidualReport {
        sup: per_component.iter().copied().fold(0.0, f64::max),
        per_component,
        alpha,
        gamma,
        s_witness: s,
        classifier,
    })
}

/// `sup_t |g(X_t) - g(x0) - Y_t|`.
pub fn uniqueness_check(
    solution: &SampledPath,
    maps: &DossMaps,
    driver: &SampledPath,
    x0: &[f64],
) -> Result<f64> {
    let n = maps.dim();
    if solution.dim() != n || driver.dim() != n || x0.len() != n {
        return Err(invalid("solution, driver, start point and maps must share the dimension"));
    }
    if solution.len() != driver.len() {
        return Err(invalid("solution and driver have different lengths"));
    }
    let g0 = maps.g(x0)?;
    let mut worst: f64 = 0.0;
    for (x, y) in solution.points().zip(driver.points()) {
        let gx = maps.g(x)?;
        for i in 0..n {
            worst = worst.max((gx[i] - g0[i] - y[i]).abs());
        }
    }
    Ok(worst)
}

/// A shared real-valued function on `R^n`.
pub type MapFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A function `F: R^n -> R` together with its BV partial derivatives.
#[derive(Clone)]
pub struct BvMap {
    pub value: MapFn,
    pub partials: Vec<ScalarRef>,
    pub name: String,
}

impl fmt::Debug for BvMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BvMap")
            .field("name", &self.name)
            .field("partials", &self.partials)
            .finish()
    }
}

impl BvMap {
    pub fn dim(&self) -> usize {
        self.partials.len()
    }

    /// `F(x) = <a, x> + b`.
    pub fn linear(a: Vec<f64>, b: f64) -> Self {
        let n = a.len();
        let partials = a
            .iter()
            .map(|&v| Arc::new(Constant::new(n, v)) as ScalarRef)
            .collect();
        Self {
            value: Arc::new(move |x: &[f64]| x.iter().zip(&a).map(|(u, v)| u * v).sum::<f64>() + b),
            partials,
            name: "linear".into(),
        }
    }

    /// `F(x) = |x|^2 / 2` with partials `x_k`.
    pub fn half_square(dim: usize) -> Result<Self> {
        let partials = (0..dim)
            .map(|k| {
                let f: crate::bv_library::ScalarFn = Arc::new(move |x: &[f64]| x[k]);
                crate::bv_library::lipschitz_wrap(dim, f, 1.0)
                    .map(|w| Arc::new(w.named(format!("x{}", k + 1))) as ScalarRef)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            value: Arc::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            partials,
            name: "half_square".into(),
        })
    }

    /// Component `j` of the jump-line map `f(y) = (c y1 + y2, y1 1_{y1<0} + c y2)`.
    pub fn jump_line_component(c: f64, j: usize) -> Result<Self> {
        if j > 1 {
            return Err(invalid("component index must be 0 or 1"));
        }
        let form = ClosedForm::JumpLine { c };
        let partials: Vec<ScalarRef> = if j == 0 {
            vec![Arc::new(Constant::new(2, c)), Arc::new(Constant::new(2, 1.0))]
        } else {
            vec![
                Arc::new(HalfSpace::new(vec![-1.0, 0.0], 0.0)?),
                Arc::new(Constant::new(2, c)),
            ]
        };
        Ok(Self {
            value: Arc::new(move |y: &[f64]| closed_form_f(form, y)[j]),
            partials,
            name: format!("jump_line({c})[{j}]"),
        })
    }
}

/// Outcome of [`change_of_variable_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariable {
    /// `sup_t |F(X_t) - F(X_0) - sum_k int_0^t d_k F(X) dX^k|`.
    pub sup: f64,
    pub alpha: f64,
    pub classifiers: Vec<VariabilityReport>,
}

/// Residual of the change-of-variable formula for `F` along `path`.
///
/// Refuses with [`Error::ExponentTooLow`] unless the estimated Hoelder
/// exponent of the path exceeds `1/2`, and with [`Error::NotVariable`] when
/// a partial derivative fails the classifier at the witness order
/// `s_witness(alpha, alpha)`.
pub fn change_of_variable_check(
    map: &BvMap,
    path: &SampledPath,
    theta: f64,
    witness: &WitnessOptions,
) -> Result<ChangeOfVariable> {
    let n = map.dim();
    if path.dim() != n {
        return Err(invalid("path and map must share the dimension"));
    }
    let alpha = estimate_holder(path)?.exponent;
    if !(alpha > 0.5) {
        return Err(Error::ExponentTooLow {
            exponent: alpha,
            required: 0.5,
        });
    }
    let mut classifiers = Vec::new();
    if witness.check {
        let s = s_witness(alpha, alpha).ok_or(Error::ExponentTooLow {
            exponent: alpha,
            required: 0.5,
        })?;
        let params = VariabilityParams::new(s, 1.0)
            .with_levels(witness.levels.clone())
            .with_margin(witness.margin);
        for p in &map.partials {
            let report = classify(path, p.as_ref(), &params)?;
            if report.verdict != Verdict::Finite {
                return Err(Error::NotVariable {
                    report: Box::new(report),
                });
            }
            classifiers.push(report);
        }
    }
    let f0 = (map.value)(path.point(0));
    let values: Vec<f64> = path.points().map(|x| (map.value)(x) - f0).collect();
    let mut total = GridFunction::new(*path.grid(), values)?;
    for (k, p) in map.partials.iter().enumerate() {
        let integrand = compose(p.as_ref(), path)?;
        let series = gls_integrate_series(&integrand, &path.coordinate(k), theta)?;
        total = total.combine(1.0, &series, -1.0)?;
    }
    Ok(ChangeOfVariable {
        sup: total.sup_norm(),
        alpha,
        classifiers,
    })
}

/// Verification record of one solution across grid sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `(N, residual)` pairs.
    pub residual_by_n: Vec<(usize, f64)>,
    pub s_witness: f64,
    pub classifier_report: Option<VariabilityReport>,
    pub uniqueness_sup: f64,
    /// Uniqueness can only be falsified: a small value does not certify
    /// that no other solution exists.
    pub note: String,
}

/// Standard wording of [`VerificationReport::note`].
pub const UNIQUENESS_NOTE: &str =
    "uniqueness_sup can only falsify a candidate; it does not certify uniqueness in the class";
