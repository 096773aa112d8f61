//! Uniform time grids, sampled paths in `R^n`, scalar grid functions,
//! fractional Brownian motion synthesis and Hoelder-regularity estimation.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{median, norm, weighted_linear_fit};

/// Uniform partition `t_i = i T / N`, `i = 0..=N`, of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    /// Creates a grid with horizon `T > 0` and `N >= 2` steps.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 2 {
            return Err(invalid(format!("grid needs at least 2 steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    /// Always false: a grid has at least three points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh `T / N`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of grid point `i`; exactly `T` for `i = N`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    /// All grid times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// Index of the grid time nearest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let x = (t / self.dt()).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.steps)
        }
    }
}

/// A path sampled on a [`TimeGrid`], stored row-major with one row of
/// `dim` coordinates per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    holder_hint: Option<f64>,
}

impl SampledPath {
    /// Wraps row-major values; requires `values.len() == dim * (N + 1)` and
    /// finite entries.
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("path dimension must be at least 1"));
        }
        if values.len() != dim * grid.len() {
            return Err(invalid(format!(
                "expected {} values for {} points in dimension {dim}, got {}",
                dim * grid.len(),
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite coordinate at time index {}",
                pos / dim
            )));
        }
        Ok(Self {
            grid,
            dim,
            values,
            holder_hint: None,
        })
    }

    /// Samples `f(t)` at every grid time.
    pub fn from_fn<F>(grid: TimeGrid, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let mut values = Vec::with_capacity(dim * grid.len());
        for i in 0..grid.len() {
            let p = f(grid.time(i));
            if p.len() != dim {
                return Err(invalid(format!(
                    "sample at time index {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            values.extend(p);
        }
        Self::new(grid, dim, values)
    }

    /// The constant path at `point`.
    pub fn constant(grid: TimeGrid, point: &[f64]) -> Result<Self> {
        Self::from_fn(grid, point.len(), |_| point.to_vec())
    }

    /// The affine path `start + t * velocity`.
    pub fn linear(grid: TimeGrid, start: &[f64], velocity: &[f64]) -> Result<Self> {
        if start.len() != velocity.len() {
            return Err(invalid("start and velocity dimensions differ"));
        }
        Self::from_fn(grid, start.len(), |t| {
            start.iter().zip(velocity).map(|(a, v)| a + t * v).collect()
        })
    }

    /// Attaches an a-priori Hoelder exponent.
    pub fn with_holder_hint(mut self, alpha: f64) -> Self {
        self.holder_hint = Some(alpha);
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn holder_hint(&self) -> Option<f64> {
        self.holder_hint
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    /// Always false: paths have at least three samples.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The point at time index `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterator over the sampled points.
    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Row-major raw values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coordinate `k` as a grid function.
    pub fn coordinate(&self, k: usize) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.points().map(|p| p[k]).collect(),
        }
    }

    /// Builds a path from one grid function per coordinate.
    pub fn from_coordinates(coords: &[GridFunction]) -> Result<Self> {
        let first = coords
            .first()
            .ok_or_else(|| invalid("at least one coordinate is required"))?;
        let grid = first.grid;
        if coords.iter().any(|c| c.grid != grid) {
            return Err(invalid("coordinates live on different grids"));
        }
        let dim = coords.len();
        let mut values = Vec::with_capacity(dim * grid.len());
        for i in 0..grid.len() {
            values.extend(coords.iter().map(|c| c.values[i]));
        }
        Self::new(grid, dim, values)
    }

    /// Keeps every `stride`-th sample, which must divide `N`.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.grid.steps.is_multiple_of(stride) || self.grid.steps / stride < 2 {
            return Err(invalid(format!(
                "stride {stride} does not divide {} steps into at least 2",
                self.grid.steps
            )));
        }
        let grid = TimeGrid::new(self.grid.horizon, self.grid.steps / stride)?;
        let values = (0..grid.len())
            .flat_map(|i| self.point(i * stride).iter().copied())
            .collect();
        let mut out = Self::new(grid, self.dim, values)?;
        out.holder_hint = self.holder_hint;
        Ok(out)
    }

    /// Writes `t,x1,...,xn` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for (i, p) in self.points().enumerate() {
            let mut row = vec![fmt_f64(self.grid.time(i))];
            row.extend(p.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a path written by [`SampledPath::write_csv`]. The grid is
    /// rebuilt from the first and last time stamps.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let dim = r.headers()?.len().saturating_sub(1);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parsed: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Io(format!("bad number: {e}")))?;
            if parsed.len() != dim + 1 {
                return Err(Error::Io("ragged csv row".into()));
            }
            times.push(parsed[0]);
            values.extend_from_slice(&parsed[1..]);
        }
        if times.len() < 3 {
            return Err(Error::Io("path csv needs at least 3 rows".into()));
        }
        let grid = TimeGrid::new(times[times.len() - 1], times.len() - 1)?;
        Self::new(grid, dim, values)
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A scalar time series on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps `N + 1` values.
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(t)` at every grid time.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: TimeGrid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.time(i))).collect();
        Self { grid, values }
    }

    /// The constant function `c`.
    pub fn constant(grid: TimeGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at time index `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise `f(value)`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(invalid("grid functions live on different grids"));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Pointwise product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(invalid("grid functions live on different grids"));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        })
    }

    /// Largest absolute value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Keeps every `stride`-th sample, which must divide `N`.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.grid.steps.is_multiple_of(stride) || self.grid.steps / stride < 2 {
            return Err(invalid(format!(
                "stride {stride} does not divide {} steps into at least 2",
                self.grid.steps
            )));
        }
        let grid = TimeGrid::new(self.grid.horizon, self.grid.steps / stride)?;
        Ok(Self {
            grid,
            values: (0..grid.len()).map(|i| self.values[i * stride]).collect(),
        })
    }

    /// The one-dimensional path with these values.
    pub fn to_path(&self) -> SampledPath {
        SampledPath {
            grid: self.grid,
            dim: 1,
            values: self.values.clone(),
            holder_hint: None,
        }
    }

    /// Writes `t,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt_f64(self.grid.time(i)), fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Algorithm used to synthesize fractional Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    /// Exact circulant embedding (Davies-Harte).
    CirculantEmbedding,
    /// Dense Cholesky factorization of the noise covariance.
    Cholesky,
}

/// Grids with fewer steps than this use the Cholesky method.
pub const CIRCULANT_MIN_STEPS: usize = 256;

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Covariance of fractional Brownian motion at times `s` and `t`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// Fractional Brownian motion with independent coordinates and `Y_0 = 0`.
/// See [`make_fbm_with_method`] for the synthesis method.
pub fn make_fbm(hurst: f64, dim: usize, grid: TimeGrid, seed: u64) -> Result<SampledPath> {
    make_fbm_with_method(hurst, dim, grid, seed).map(|(p, _)| p)
}

/// Fractional Brownian motion together with the synthesis method used.
///
/// Coordinate `k` draws from a ChaCha20 stream seeded by `seed` on stream
/// `k`, so outputs are bit-reproducible and coordinates are independent.
pub fn make_fbm_with_method(
    hurst: f64,
    dim: usize,
    grid: TimeGrid,
    seed: u64,
) -> Result<(SampledPath, FbmMethod)> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(invalid(format!("Hurst index must lie in (0,1), got {hurst}")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let n = grid.steps();
    let scale = grid.dt().powf(hurst);
    let eigen = if n >= CIRCULANT_MIN_STEPS {
        circulant_eigenvalues(hurst, n)
    } else {
        None
    };
    let method = if eigen.is_some() {
        FbmMethod::CirculantEmbedding
    } else {
        FbmMethod::Cholesky
    };
    let chol = if eigen.is_none() {
        Some(fgn_cholesky(hurst, n)?)
    } else {
        None
    };
    let mut coords = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let noise = match (&eigen, &chol) {
            (Some(lambda), _) => circulant_sample(lambda, n, &mut rng),
            (None, Some(l)) => {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                (l * z).iter().copied().collect()
            }
            (None, None) => unreachable!("one synthesis method is always prepared"),
        };
        let mut values = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in noise {
            acc += scale * x;
            values.push(acc);
        }
        coords.push(GridFunction { grid, values });
    }
    let path = SampledPath::from_coordinates(&coords)?.with_holder_hint(hurst);
    Ok((path, method))
}

fn circulant_eigenvalues(hurst: f64, n: usize) -> Option<Vec<f64>> {
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..=n {
        c.push(Complex::new(fgn_autocovariance(hurst, k), 0.0));
    }
    for k in (1..n).rev() {
        c.push(Complex::new(fgn_autocovariance(hurst, k), 0.0));
    }
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut c);
    let tol = 1e-10 * c[0].re.abs().max(1.0);
    let mut lambda = Vec::with_capacity(m);
    for z in &c {
        if z.re < -tol {
            return None;
        }
        lambda.push(z.re.max(0.0));
    }
    Some(lambda)
}

fn circulant_sample(lambda: &[f64], n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let m = lambda.len();
    let mut w: Vec<Complex<f64>> = lambda
        .iter()
        .map(|&l| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex::new(a, b) * (l / m as f64).sqrt()
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut w);
    w.iter().take(n).map(|z| z.re).collect()
}

fn fgn_cholesky(hurst: f64, n: usize) -> Result<DMatrix<f64>> {
    let cov = DMatrix::from_fn(n, n, |i, j| fgn_autocovariance(hurst, i.abs_diff(j)));
    cov.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| invalid("fractional noise covariance is not positive definite"))
}

/// The deterministic path `t -> t^(1/d)`.
pub fn make_power_path(d: f64, grid: TimeGrid) -> Result<SampledPath> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(invalid(format!("power-path exponent must lie in (0,1], got {d}")));
    }
    let path = SampledPath::from_fn(grid, 1, |t| vec![t.powf(1.0 / d)])?;
    Ok(path.with_holder_hint(d.min(1.0)))
}

/// Result of [`estimate_holder`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    /// Conservative exponent estimate in `[0, 1]`.
    pub exponent: f64,
    /// Maximal dyadic-lag difference quotient at `exponent`.
    pub seminorm: f64,
    /// Raw regression slope.
    pub slope: f64,
    /// Standard error of the regression slope.
    pub slope_stderr: f64,
    /// Number of dyadic lags in the regression.
    pub lags_used: usize,
    /// True for constant paths.
    pub degenerate: bool,
}

const HOLDER_GROUP: usize = 8;
const HOLDER_MIN_GROUPS: usize = 8;
const HOLDER_SAFETY_SE: f64 = 3.0;

/// Estimates the Hoelder exponent and seminorm of a path from dyadic lags.
///
/// For each lag `l = 2^j` the disjoint increments are split into groups of
/// eight and the median of the group maxima is regressed in log-log
/// coordinates against `l * dt`, weighting each lag by its number of
/// groups. The exponent is the slope lowered by three standard errors and
/// capped at 1, so it errs on the small side. The
/// seminorm is the largest `|X(t+l dt) - X(t)| / (l dt)^exponent` over all
/// overlapping pairs at dyadic lags.
pub fn estimate_holder(path: &SampledPath) -> Result<HolderEstimate> {
    let n = path.grid().steps();
    if n < 4 {
        return Err(invalid(format!("Hoelder estimation needs N >= 4, got {n}")));
    }
    let dt = path.grid().dt();
    let incr = |i: usize, l: usize| -> f64 {
        let a = path.point(i);
        let b = path.point(i + l);
        a.iter()
            .zip(b)
            .map(|(x, y)| (y - x) * (y - x))
            .sum::<f64>()
            .sqrt()
    };
    let constant = (1..=n).all(|i| path.point(i) == path.point(0));
    if constant {
        return Ok(HolderEstimate {
            exponent: 1.0,
            seminorm: 0.0,
            slope: 0.0,
            slope_stderr: 0.0,
            lags_used: 0,
            degenerate: true,
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut lag = 1usize;
    while lag <= n / 2 {
        let count = n / lag;
        let group = HOLDER_GROUP.min(count.max(1));
        let groups = count / group;
        if xs.len() >= 2 && groups < HOLDER_MIN_GROUPS {
            break;
        }
        let maxima: Vec<f64> = (0..groups)
            .map(|g| {
                (0..group)
                    .map(|k| incr((g * group + k) * lag, lag))
                    .fold(0.0, f64::max)
            })
            .collect();
        let med = median(&maxima);
        if med > 0.0 {
            xs.push((lag as f64 * dt).ln());
            ys.push(med.ln());
            ws.push(groups as f64);
        }
        lag *= 2;
    }
    let (exponent, slope, slope_stderr) = match weighted_linear_fit(&xs, &ys, &ws) {
        Some(fit) => (
            (fit.slope - HOLDER_SAFETY_SE * fit.slope_stderr).clamp(0.0, 1.0),
            fit.slope,
            fit.slope_stderr,
        ),
        None => (0.0, 0.0, 0.0),
    };
    let mut seminorm: f64 = 0.0;
    let mut lag = 1usize;
    while lag <= n {
        let denom = (lag as f64 * dt).powf(exponent);
        for i in 0..=n - lag {
            seminorm = seminorm.max(incr(i, lag) / denom);
        }
        lag *= 2;
    }
    Ok(HolderEstimate {
        exponent,
        seminorm,
        slope,
        slope_stderr,
        lags_used: xs.len(),
        degenerate: false,
    })
}

/// Applies a pointwise map to every sample. The map reports failures as a
/// message; the error names the offending time index.
pub fn apply_map<F>(path: &SampledPath, f: F) -> Result<SampledPath>
where
    F: Fn(&[f64]) -> std::result::Result<Vec<f64>, String>,
{
    let mut values = Vec::new();
    let mut out_dim = None;
    for (i, p) in path.points().enumerate() {
        let image = f(p).map_err(|reason| Error::MapUndefined { index: i, reason })?;
        match out_dim {
            None => out_dim = Some(image.len()),
            Some(m) if m != image.len() => {
                return Err(Error::MapUndefined {
                    index: i,
                    reason: format!("image dimension {} differs from {m}", image.len()),
                })
            }
            _ => {}
        }
        if let Some(k) = image.iter().position(|v| !v.is_finite()) {
            return Err(Error::MapUndefined {
                index: i,
                reason: format!("coordinate {k} of the image is not finite"),
            });
        }
        values.extend(image);
    }
    let dim = out_dim.unwrap_or(0);
    SampledPath::new(*path.grid(), dim, values)
}

/// Largest Euclidean norm of the sampled points.
pub fn sup_norm(path: &SampledPath) -> f64 {
    path.points().map(norm).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = TimeGrid::new(3.0, 7).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(7), 3.0);
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn cholesky_and_circulant_agree_on_autocovariance() {
        let lambda = circulant_eigenvalues(0.7, 512).unwrap();
        assert!(lambda.iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn small_grids_use_cholesky() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let (_, m) = make_fbm_with_method(0.3, 1, g, 1).unwrap();
        assert_eq!(m, FbmMethod::Cholesky);
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let (_, m) = make_fbm_with_method(0.3, 1, g, 1).unwrap();
        assert_eq!(m, FbmMethod::CirculantEmbedding);
    }
}
