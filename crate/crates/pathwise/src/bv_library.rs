//! Concrete coefficients of bounded variation: pointwise evaluation of a
//! fixed representative, discretized gradient measures, mollification,
//! Cayley-Hamilton inverses and structural checks on matrix fields.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid_paths::SampledPath;
use crate::measures::DiscreteMeasure;

/// Axis-aligned closed box `[lo, hi]` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    /// Creates a box; requires `lo <= hi` coordinatewise.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box corners must have the same positive dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid("box corners must be finite with lo <= hi"));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[-r, r]^n`.
    pub fn cube(dim: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    /// Bounding box of the samples of `path`, inflated by `margin` on every
    /// side.
    pub fn around_path(path: &SampledPath, margin: f64) -> Self {
        let d = path.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in path.points() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Self {
            lo: lo.iter().map(|v| v - margin).collect(),
            hi: hi.iter().map(|v| v + margin).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((v, a), b)| v >= a && v <= b)
    }

    /// Side lengths.
    pub fn extents(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }
}

/// Discretized total-variation measure `||D phi||` on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMeasure {
    pub measure: DiscreteMeasure,
    /// Resolution of the discretization; used as the kernel cap.
    pub scale: f64,
    /// Spacing of lateral grids, when the construction uses one.
    pub lateral_spacing: Option<f64>,
}

/// A scalar coefficient of locally bounded variation.
pub trait ScalarBv: Send + Sync + fmt::Debug {
    /// Ambient dimension.
    fn dim(&self) -> usize;

    /// Value of the fixed representative; on jump sets the average of the
    /// one-sided limits.
    fn evaluate(&self, x: &[f64]) -> f64;

    /// Discretization of `||D phi||` restricted to `region` at `level`.
    /// Higher levels are finer.
    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure>;

    /// Bound on `|phi|`, when finite.
    fn sup_bound(&self) -> Option<f64>;

    /// Distance from `x` to the jump set, when one is described.
    fn jump_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Human-readable description.
    fn describe(&self) -> String;
}

/// Shared handle to a scalar coefficient.
pub type ScalarRef = Arc<dyn ScalarBv>;

fn level_spacing(level: u32) -> f64 {
    0.5f64.powi(level as i32)
}

/// Midpoints of a uniform partition of `[a, b]` into cells no wider than
/// `target`, with the actual width.
fn cell_midpoints(a: f64, b: f64, target: f64) -> (Vec<f64>, f64) {
    if b <= a {
        return (Vec::new(), 0.0);
    }
    let k = ((b - a) / target).ceil().max(1.0) as usize;
    let w = (b - a) / k as f64;
    ((0..k).map(|i| a + (i as f64 + 0.5) * w).collect(), w)
}

/// Cartesian product of per-axis midpoint grids over the lateral axes
/// `1..n` of `region`, with the cell volume.
fn lateral_grid(region: &Region, target: f64) -> (Vec<Vec<f64>>, f64, f64) {
    let mut points = vec![Vec::new()];
    let mut vol = 1.0;
    let mut spacing: f64 = 0.0;
    for k in 1..region.dim() {
        let (mids, w) = cell_midpoints(region.lo[k], region.hi[k], target);
        vol *= w;
        spacing = spacing.max(w);
        let mut next = Vec::with_capacity(points.len() * mids.len());
        for p in &points {
            for m in &mids {
                let mut q = p.clone();
                q.push(*m);
                next.push(q);
            }
        }
        points = next;
    }
    (points, vol, spacing)
}

/// Cantor function `nu_C((0, x))`, clamped to `0` left of `0` and `1`
/// right of `1`.
///
/// A double `x = m 2^-e` in `(0, 1)` is a dyadic rational, so its ternary
/// digits follow exactly from integer arithmetic on `m` and `2^e`; sixty-four
/// digits are read. Inputs below `2^-71` fall back to the floating-point
/// recursion, where the value is below `1e-12`.
pub fn cantor_function(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if let Some((m, e)) = dyadic_parts(x).filter(|&(_, e)| e <= 124) {
        let d = 1u128 << e;
        let mut n = m as u128;
        let mut acc = 0.0;
        let mut p = 0.5;
        for _ in 0..64 {
            n *= 3;
            if n < d {
            } else if n < 2 * d {
                return acc + p;
            } else {
                acc += p;
                n -= 2 * d;
            }
            if n == 0 {
                break;
            }
            p *= 0.5;
        }
        return acc;
    }
    let mut z = x;
    let mut acc = 0.0;
    let mut p = 0.5;
    for _ in 0..64 {
        z *= 3.0;
        if z < 1.0 {
        } else if z < 2.0 {
            return acc + p;
        } else {
            acc += p;
            z -= 2.0;
        }
        p *= 0.5;
    }
    acc
}

/// Odd integer `m` and exponent `e` with `x = m 2^-e`, for positive finite
/// `x < 1`.
fn dyadic_parts(x: f64) -> Option<(u64, u32)> {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut exp) = if biased == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    if m == 0 {
        return None;
    }
    let tz = m.trailing_zeros();
    m >>= tz;
    exp += tz as i64;
    (exp < 0).then(|| (m, (-exp) as u32))
}

/// Integral of the Cantor function over `[0, z]` for `z` in `[0, 1]`, by
/// the self-similar recursion.
fn cantor_integral(z: f64) -> f64 {
    let mut z = z.clamp(0.0, 1.0);
    let mut acc = 0.0;
    let mut scale = 1.0;
    for _ in 0..80 {
        if z <= 1.0 / 3.0 {
            scale /= 6.0;
            z *= 3.0;
        } else if z < 2.0 / 3.0 {
            return acc + scale * (1.0 / 12.0 + 0.5 * (z - 1.0 / 3.0));
        } else {
            acc += scale * (0.25 + 0.5 * (z - 2.0 / 3.0));
            scale /= 6.0;
            z = 3.0 * z - 2.0;
        }
    }
    acc
}

/// `Phi(z) = int_0^z (1 + cantor_function)`.
pub fn cantor_phi(z: f64) -> f64 {
    if z <= 0.0 {
        z
    } else if z >= 1.0 {
        2.0 * z - 0.5
    } else {
        z + cantor_integral(z)
    }
}

/// Inverse of [`cantor_phi`] by monotone bisection.
pub fn cantor_phi_inverse(y: f64) -> f64 {
    if y <= 0.0 {
        return y;
    }
    if y >= 1.5 {
        return 0.5 * (y + 0.5);
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let m = 0.5 * (a + b);
        if cantor_phi(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Left endpoints of the `2^level` intervals of the level-`level` Cantor
/// construction, increasing.
pub fn cantor_left_endpoints(level: u32) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..level {
        len /= 3.0;
        let mut next = Vec::with_capacity(2 * pts.len());
        for &p in &pts {
            next.push(p);
            next.push(p + 2.0 * len);
        }
        pts = next;
    }
    pts
}

/// The Cantor coefficient in `R^n`, a function of the first coordinate.
#[derive(Debug, Clone)]
pub struct CantorCoefficient {
    dim: usize,
    lateral_factor: f64,
}

/// Builds the Cantor coefficient with lateral grid spacing equal to the
/// level spacing `2^-L`.
pub fn cantor_coefficient(dim: usize) -> Result<CantorCoefficient> {
    CantorCoefficient::new(dim, 1.0)
}

impl CantorCoefficient {
    /// `lateral_factor` multiplies the lateral grid spacing `2^-L`.
    pub fn new(dim: usize, lateral_factor: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(lateral_factor > 0.0 && lateral_factor.is_finite()) {
            return Err(invalid("lateral factor must be positive"));
        }
        Ok(Self {
            dim,
            lateral_factor,
        })
    }
}

impl ScalarBv for CantorCoefficient {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        cantor_function(x[0])
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, self.dim)?;
        let w = 0.5f64.powi(level as i32);
        let xs: Vec<f64> = cantor_left_endpoints(level)
            .into_iter()
            .filter(|x| *x >= region.lo[0] && *x <= region.hi[0])
            .collect();
        let mut m = DiscreteMeasure::empty(self.dim);
        if self.dim == 1 {
            for x in xs {
                m.push(&[x], w);
            }
            return Ok(GradientMeasure {
                measure: m,
                scale: 3f64.powi(-(level as i32)),
                lateral_spacing: None,
            });
        }
        let target = self.lateral_factor * level_spacing(level);
        let (lateral, vol, spacing) = lateral_grid(region, target);
        let mut p = vec![0.0; self.dim];
        for &x in &xs {
            p[0] = x;
            for q in &lateral {
                p[1..].copy_from_slice(q);
                m.push(&p, w * vol);
            }
        }
        Ok(GradientMeasure {
            measure: m,
            scale: spacing.max(3f64.powi(-(level as i32))),
            lateral_spacing: Some(spacing),
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn describe(&self) -> String {
        format!("cantor(n={})", self.dim)
    }
}

fn check_region(region: &Region, dim: usize) -> Result<()> {
    if region.dim() != dim {
        return Err(invalid(format!(
            "region has dimension {}, coefficient has {dim}",
            region.dim()
        )));
    }
    Ok(())
}

/// Shapes supported by [`indicator_domain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// Open disk in the plane.
    Disk { center: [f64; 2], radius: f64 },
    /// Open interval on the line; infinite ends are allowed.
    Interval { lo: f64, hi: f64 },
}

/// Indicator of a disk or interval, `1/2` on the boundary.
#[derive(Debug, Clone)]
pub struct IndicatorDomain {
    domain: Domain,
    boundary_atoms: Option<usize>,
}

/// Builds the indicator of `domain`.
pub fn indicator_domain(domain: Domain) -> Result<IndicatorDomain> {
    match &domain {
        Domain::Disk { radius, center } => {
            if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                return Err(invalid(format!("disk radius must be positive, got {radius}")));
            }
        }
        Domain::Interval { lo, hi } => {
            if !(lo < hi) || lo.is_nan() || hi.is_nan() {
                return Err(invalid(format!("interval ({lo}, {hi}) is empty")));
            }
        }
    }
    Ok(IndicatorDomain {
        domain,
        boundary_atoms: None,
    })
}

impl IndicatorDomain {
    /// Uses exactly `m` boundary atoms for disks, ignoring the level.
    pub fn with_boundary_atoms(mut self, m: usize) -> Self {
        self.boundary_atoms = Some(m.max(1));
        self
    }
}

impl ScalarBv for IndicatorDomain {
    fn dim(&self) -> usize {
        match self.domain {
            Domain::Disk { .. } => 2,
            Domain::Interval { .. } => 1,
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.domain {
            Domain::Disk { center, radius } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                let r2 = radius * radius;
                if d2 < r2 {
                    1.0
                } else if d2 > r2 {
                    0.0
                } else {
                    0.5
                }
            }
            Domain::Interval { lo, hi } => {
                let v = x[0];
                if v > *lo && v < *hi {
                    1.0
                } else if v == *lo || v == *hi {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, self.dim())?;
        let h = level_spacing(level);
        let mut m = DiscreteMeasure::empty(self.dim());
        match &self.domain {
            Domain::Disk { center, radius } => {
                let perimeter = 2.0 * std::f64::consts::PI * radius;
                let count = self
                    .boundary_atoms
                    .unwrap_or_else(|| (perimeter / h).ceil().max(8.0) as usize);
                let w = perimeter / count as f64;
                for k in 0..count {
                    let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                    let p = [center[0] + radius * a.cos(), center[1] + radius * a.sin()];
                    if region.contains(&p) {
                        m.push(&p, w);
                    }
                }
            }
            Domain::Interval { lo, hi } => {
                for e in [*lo, *hi] {
                    if e.is_finite() && region.contains(&[e]) {
                        m.push(&[e], 1.0);
                    }
                }
            }
        }
        Ok(GradientMeasure {
            measure: m,
            scale: h,
            lateral_spacing: None,
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        Some(match &self.domain {
            Domain::Disk { center, radius } => {
                ((x[0] - center[0]).hypot(x[1] - center[1]) - radius).abs()
            }
            Domain::Interval { lo, hi } => (x[0] - lo).abs().min((x[0] - hi).abs()),
        })
    }

    fn describe(&self) -> String {
        format!("indicator({:?})", self.domain)
    }
}

/// Indicator of the open half-space `{<normal, x> > offset}`, `1/2` on the
/// boundary hyperplane.
#[derive(Debug, Clone)]
pub struct HalfSpace {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfSpace {
    /// The normal is normalized. In dimension 3 and higher it must be a
    /// coordinate direction.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(len > 0.0 && len.is_finite()) {
            return Err(invalid("half-space normal must be nonzero"));
        }
        let normal: Vec<f64> = normal.iter().map(|v| v / len).collect();
        if normal.len() >= 3 && normal.iter().filter(|v| **v != 0.0).count() != 1 {
            return Err(invalid(
                "half-spaces in dimension 3 or more need a coordinate normal",
            ));
        }
        Ok(Self {
            normal,
            offset: offset / len,
        })
    }

    fn side(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }
}

impl ScalarBv for HalfSpace {
    fn dim(&self) -> usize {
        self.normal.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let s = self.side(x);
        if s > 0.0 {
            1.0
        } else if s < 0.0 {
            0.0
        } else {
            0.5
        }
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, self.dim())?;
        let h = level_spacing(level);
        let n = self.dim();
        let mut m = DiscreteMeasure::empty(n);
        let mut lateral_spacing = None;
        match n {
            1 => {
                let p = [self.offset / self.normal[0]];
                if region.contains(&p) {
                    m.push(&p, 1.0);
                }
            }
            2 => {
                let base = [self.offset * self.normal[0], self.offset * self.normal[1]];
                let dir = [-self.normal[1], self.normal[0]];
                push_segment_atoms(&mut m, region, base, dir, f64::NEG_INFINITY, h, 1.0);
                lateral_spacing = Some(h);
            }
            _ => {
                let axis = self.normal.iter().position(|v| *v != 0.0).unwrap_or(0);
                let x0 = self.offset / self.normal[axis];
                if x0 >= region.lo[axis] && x0 <= region.hi[axis] {
                    let mut rotated = region.clone();
                    rotated.lo.swap(0, axis);
                    rotated.hi.swap(0, axis);
                    let (lateral, vol, spacing) = lateral_grid(&rotated, h);
                    for q in lateral {
                        let mut p = vec![x0];
                        p.extend(q);
                        p.swap(0, axis);
                        m.push(&p, vol);
                    }
                    lateral_spacing = Some(spacing);
                }
            }
        }
        Ok(GradientMeasure {
            measure: m,
            scale: h,
            lateral_spacing,
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        Some(self.side(x).abs())
    }

    fn describe(&self) -> String {
        format!("half_space(normal={:?}, offset={})", self.normal, self.offset)
    }
}

/// Adds atoms of weight `density * length` along the part of the ray or
/// line `base + t dir`, `t >= t_min`, inside a planar box.
fn push_segment_atoms(
    m: &mut DiscreteMeasure,
    region: &Region,
    base: [f64; 2],
    dir: [f64; 2],
    t_min: f64,
    spacing: f64,
    density: f64,
) {
    let mut lo = t_min;
    let mut hi = f64::INFINITY;
    for k in 0..2 {
        if dir[k] == 0.0 {
            if base[k] < region.lo[k] || base[k] > region.hi[k] {
                return;
            }
        } else {
            let a = (region.lo[k] - base[k]) / dir[k];
            let b = (region.hi[k] - base[k]) / dir[k];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    if !(hi > lo) {
        return;
    }
    let (ts, w) = cell_midpoints(lo, hi, spacing);
    for t in ts {
        m.push(&[base[0] + t * dir[0], base[1] + t * dir[1]], density * w);
    }
}

/// `value` times the indicator of the planar wedge
/// `{x1 > 0, m_lo x1 < x2 < m_hi x1}`, half of `value` on its boundary rays.
#[derive(Debug, Clone)]
pub struct Wedge {
    m_lo: f64,
    m_hi: f64,
    value: f64,
}

impl Wedge {
    pub fn new(m_lo: f64, m_hi: f64, value: f64) -> Result<Self> {
        if !(m_lo < m_hi) || !m_lo.is_finite() || !m_hi.is_finite() {
            return Err(invalid("wedge slopes must satisfy m_lo < m_hi"));
        }
        Ok(Self { m_lo, m_hi, value })
    }

    /// Whether `x` lies in the open wedge.
    pub fn contains(&self, x: &[f64]) -> bool {
        x[0] > 0.0 && self.m_lo * x[0] < x[1] && x[1] < self.m_hi * x[0]
    }
}

impl ScalarBv for Wedge {
    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            self.value
        } else if x[0] >= 0.0 && (x[1] == self.m_lo * x[0] || x[1] == self.m_hi * x[0]) {
            if x[0] == 0.0 && x[1] == 0.0 {
                0.0
            } else {
                0.5 * self.value
            }
        } else {
            0.0
        }
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, 2)?;
        let h = level_spacing(level);
        let mut m = DiscreteMeasure::empty(2);
        for slope in [self.m_lo, self.m_hi] {
            let len = (1.0 + slope * slope).sqrt();
            let dir = [1.0 / len, slope / len];
            push_segment_atoms(&mut m, region, [0.0, 0.0], dir, 0.0, h, self.value.abs());
        }
        Ok(GradientMeasure {
            measure: m,
            scale: h,
            lateral_spacing: Some(h),
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.value.abs())
    }

    fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        let ray = |slope: f64| {
            let len = (1.0 + slope * slope).sqrt();
            let (ux, uy) = (1.0 / len, slope / len);
            let t = (x[0] * ux + x[1] * uy).max(0.0);
            (x[0] - t * ux).hypot(x[1] - t * uy)
        };
        Some(ray(self.m_lo).min(ray(self.m_hi)))
    }

    fn describe(&self) -> String {
        format!("wedge({}, {}, value={})", self.m_lo, self.m_hi, self.value)
    }
}

/// A constant coefficient; its gradient measure is zero.
#[derive(Debug, Clone)]
pub struct Constant {
    dim: usize,
    value: f64,
}

impl Constant {
    pub fn new(dim: usize, value: f64) -> Self {
        Self { dim, value }
    }
}

impl ScalarBv for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, _x: &[f64]) -> f64 {
        self.value
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, self.dim)?;
        Ok(GradientMeasure {
            measure: DiscreteMeasure::empty(self.dim),
            scale: level_spacing(level),
            lateral_spacing: None,
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(self.value.abs())
    }

    fn describe(&self) -> String {
        format!("constant({})", self.value)
    }
}

/// `scale * phi + shift`.
#[derive(Debug, Clone)]
pub struct Affine {
    inner: ScalarRef,
    scale: f64,
    shift: f64,
}

impl Affine {
    pub fn new(inner: ScalarRef, scale: f64, shift: f64) -> Self {
        Self {
            inner,
            scale,
            shift,
        }
    }
}

impl ScalarBv for Affine {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.scale * self.inner.evaluate(x) + self.shift
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        let mut g = self.inner.gradient_measure(region, level)?;
        let mut m = DiscreteMeasure::empty(g.measure.dim());
        if self.scale != 0.0 {
            for (x, w) in g.measure.atoms() {
                m.push(x, w * self.scale.abs());
            }
        }
        g.measure = m;
        Ok(g)
    }

    fn sup_bound(&self) -> Option<f64> {
        self.inner
            .sup_bound()
            .map(|b| self.scale.abs() * b + self.shift.abs())
    }

    fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        self.inner.jump_distance(x)
    }

    fn describe(&self) -> String {
        format!("{} * {} + {}", self.scale, self.inner.describe(), self.shift)
    }
}

/// Shared scalar map on `R^n`.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A Lipschitz function with gradient measure `|grad f| dx`.
#[derive(Clone)]
pub struct LipschitzWrap {
    dim: usize,
    f: ScalarFn,
    lip: f64,
    sup: Option<f64>,
    name: String,
}

impl fmt::Debug for LipschitzWrap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzWrap")
            .field("dim", &self.dim)
            .field("lip", &self.lip)
            .field("name", &self.name)
            .finish()
    }
}

/// Wraps a differentiable map with Lipschitz constant `lip`.
pub fn lipschitz_wrap(dim: usize, f: ScalarFn, lip: f64) -> Result<LipschitzWrap> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(lip >= 0.0 && lip.is_finite()) {
        return Err(invalid("Lipschitz constant must be finite and nonnegative"));
    }
    Ok(LipschitzWrap {
        dim,
        f,
        lip,
        sup: None,
        name: "lipschitz".into(),
    })
}

impl LipschitzWrap {
    /// Declares a bound on `|f|`.
    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        self.sup = Some(bound);
        self
    }

    /// Sets the description.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The declared Lipschitz constant.
    pub fn lipschitz_constant(&self) -> f64 {
        self.lip
    }
}

impl ScalarBv for LipschitzWrap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, self.dim)?;
        let h = level_spacing(level);
        let axes: Vec<(Vec<f64>, f64)> = (0..self.dim)
            .map(|k| cell_midpoints(region.lo[k], region.hi[k], h))
            .collect();
        let vol: f64 = axes.iter().map(|a| a.1).product();
        let mut m = DiscreteMeasure::empty(self.dim);
        let mut idx = vec![0usize; self.dim];
        if axes.iter().any(|a| a.0.is_empty()) {
            return Ok(GradientMeasure {
                measure: m,
                scale: h,
                lateral_spacing: None,
            });
        }
        let mut p = vec![0.0; self.dim];
        loop {
            for k in 0..self.dim {
                p[k] = axes[k].0[idx[k]];
            }
            let mut g2 = 0.0;
            let mut q = p.clone();
            for k in 0..self.dim {
                let d = 0.25 * axes[k].1;
                q[k] = p[k] + d;
                let fp = (self.f)(&q);
                q[k] = p[k] - d;
                let fm = (self.f)(&q);
                q[k] = p[k];
                let gk = (fp - fm) / (2.0 * d);
                g2 += gk * gk;
            }
            let w = vol * g2.sqrt();
            if w > 0.0 {
                m.push(&p, w);
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return Ok(GradientMeasure {
                        measure: m,
                        scale: h,
                        lateral_spacing: None,
                    });
                }
                idx[k] += 1;
                if idx[k] < axes[k].0.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn sup_bound(&self) -> Option<f64> {
        self.sup
    }

    fn describe(&self) -> String {
        format!("{}(L={})", self.name, self.lip)
    }
}

/// Shared scalar map on the real line.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function on the real line of locally bounded variation given by its
/// values; the gradient measure collects the variation of each cell.
#[derive(Clone)]
pub struct Profile1d {
    f: RealFn,
    jumps: Vec<f64>,
    sup: Option<f64>,
    name: String,
}

impl fmt::Debug for Profile1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile1d")
            .field("jumps", &self.jumps)
            .field("name", &self.name)
            .finish()
    }
}

const PROFILE_SUBCELLS: usize = 8;

impl Profile1d {
    /// `jumps` lists the discontinuity points of `f`.
    pub fn new(f: RealFn, jumps: Vec<f64>, sup: Option<f64>, name: impl Into<String>) -> Self {
        Self {
            f,
            jumps,
            sup,
            name: name.into(),
        }
    }

    /// `|x|^kappa` on `(-1, 1)` and `1` outside.
    pub fn power_well(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(invalid(format!("kappa must lie in (0,1), got {kappa}")));
        }
        Ok(Self::new(
            Arc::new(move |x: f64| if x.abs() < 1.0 { x.abs().powf(kappa) } else { 1.0 }),
            Vec::new(),
            Some(1.0),
            format!("power_well({kappa})"),
        ))
    }

    /// `cantor_function(|x| / 3)` on `[-3, 3]`, `4` outside, averaged at the
    /// jumps `x = +-3`.
    pub fn cantor_well() -> Self {
        Self::new(
            Arc::new(|x: f64| {
                let a = x.abs();
                if a < 3.0 {
                    cantor_function(a / 3.0)
                } else if a > 3.0 {
                    4.0
                } else {
                    2.5
                }
            }),
            vec![-3.0, 3.0],
            Some(4.0),
            "cantor_well",
        )
    }

    /// Value at `x`.
    pub fn at(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl ScalarBv for Profile1d {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x[0])
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, 1)?;
        let h = level_spacing(level);
        let (mids, w) = cell_midpoints(region.lo[0], region.hi[0], h);
        let mut m = DiscreteMeasure::empty(1);
        let sub = w / PROFILE_SUBCELLS as f64;
        for c in mids {
            let a = c - 0.5 * w;
            let mut var = 0.0;
            let mut prev = (self.f)(a);
            for k in 1..=PROFILE_SUBCELLS {
                let v = (self.f)(a + k as f64 * sub);
                var += (v - prev).abs();
                prev = v;
            }
            if var > 0.0 {
                m.push(&[c], var);
            }
        }
        Ok(GradientMeasure {
            measure: m,
            scale: h,
            lateral_spacing: None,
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        self.sup
    }

    fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        self.jumps
            .iter()
            .map(|j| (x[0] - j).abs())
            .min_by(f64::total_cmp)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// The entry `1 + cantor_function(Phi^-1(x2 - x1 1_{x1 > 0}))` of the
/// Cantor shear matrix.
#[derive(Debug, Clone)]
pub struct CantorShearEntry {
    lateral_factor: f64,
}

impl CantorShearEntry {
    fn argument(x: &[f64]) -> f64 {
        if x[0] > 0.0 {
            x[1] - x[0]
        } else {
            x[1]
        }
    }
}

impl ScalarBv for CantorShearEntry {
    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        1.0 + cantor_function(cantor_phi_inverse(Self::argument(x)))
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        check_region(region, 2)?;
        let w = 0.5f64.powi(level as i32);
        let centers: Vec<f64> = cantor_left_endpoints(level)
            .into_iter()
            .map(cantor_phi)
            .collect();
        let (xs, dx) = cell_midpoints(
            region.lo[0],
            region.hi[0],
            self.lateral_factor * level_spacing(level),
        );
        let mut m = DiscreteMeasure::empty(2);
        for &x1 in &xs {
            let (shift, density) = if x1 > 0.0 {
                (x1, std::f64::consts::SQRT_2)
            } else {
                (0.0, 1.0)
            };
            for &c in &centers {
                let p = [x1, shift + c];
                if region.contains(&p) {
                    m.push(&p, w * dx * density);
                }
            }
        }
        Ok(GradientMeasure {
            measure: m,
            scale: dx.max(3f64.powi(-(level as i32))),
            lateral_spacing: Some(dx),
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        Some(2.0)
    }

    fn describe(&self) -> String {
        "cantor_shear_entry".into()
    }
}

/// Matrix-valued coefficient with scalar entries, stored row-major.
#[derive(Debug, Clone)]
pub struct MatrixBv {
    dim: usize,
    entries: Vec<ScalarRef>,
    det_lower_bound: Option<f64>,
    name: String,
}

impl MatrixBv {
    /// Builds an `n x n` field from `n^2` row-major entries of dimension `n`.
    pub fn new(
        dim: usize,
        entries: Vec<ScalarRef>,
        det_lower_bound: Option<f64>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(invalid(format!(
                "a {dim}x{dim} matrix needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if let Some(e) = entries.iter().find(|e| e.dim() != dim) {
            return Err(invalid(format!(
                "entry {} lives in dimension {}, expected {dim}",
                e.describe(),
                e.dim()
            )));
        }
        if let Some(eps) = det_lower_bound {
            if !(eps > 0.0) {
                return Err(invalid("declared determinant floor must be positive"));
            }
        }
        Ok(Self {
            dim,
            entries,
            det_lower_bound,
            name: name.into(),
        })
    }

    /// A constant matrix field.
    pub fn constant(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(invalid("matrix must be square"));
        }
        let entries: Vec<ScalarRef> = (0..n * n)
            .map(|k| Arc::new(Constant::new(n, matrix[(k / n, k % n)])) as ScalarRef)
            .collect();
        let det = matrix.determinant();
        let floor = if det > 0.0 { Some(0.5 * det) } else { None };
        Self::new(n, entries, floor, "constant")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn det_lower_bound(&self) -> Option<f64> {
        self.det_lower_bound
    }

    /// Entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> &ScalarRef {
        &self.entries[i * self.dim + j]
    }

    /// All entries, row-major.
    pub fn entries(&self) -> &[ScalarRef] {
        &self.entries
    }

    /// The matrix at `x`.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).evaluate(x))
    }

    /// Smallest distance from `x` to a described jump set of an entry.
    pub fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.jump_distance(x))
            .min_by(f64::total_cmp)
    }

    /// Largest declared entry bound, if every entry declares one.
    pub fn sup_bound(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|e| e.sup_bound())
            .try_fold(0.0f64, |m, b| b.map(|b| m.max(b)))
    }

    /// The pointwise inverse field `x -> sigma(x)^-1`.
    pub fn inverse_field(&self) -> MatrixBv {
        let shared = Arc::new(self.clone());
        let entries = (0..self.dim * self.dim)
            .map(|k| {
                Arc::new(InverseEntry {
                    sigma: shared.clone(),
                    row: k / self.dim,
                    col: k % self.dim,
                }) as ScalarRef
            })
            .collect();
        MatrixBv {
            dim: self.dim,
            entries,
            det_lower_bound: None,
            name: format!("inverse({})", self.name),
        }
    }
}

/// Entry `(row, col)` of the pointwise inverse of a matrix field.
#[derive(Debug, Clone)]
pub struct InverseEntry {
    sigma: Arc<MatrixBv>,
    row: usize,
    col: usize,
}

impl ScalarBv for InverseEntry {
    fn dim(&self) -> usize {
        self.sigma.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let a = self.sigma.evaluate(x);
        match cayley_hamilton_inverse(&a, 0.0) {
            Ok(inv) => inv[(self.row, self.col)],
            Err(_) => f64::NAN,
        }
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        let mut out = DiscreteMeasure::empty(self.sigma.dim);
        let mut scale: f64 = 0.0;
        for e in &self.sigma.entries {
            let g = e.gradient_measure(region, level)?;
            out.extend(&g.measure);
            scale = scale.max(g.scale);
        }
        Ok(GradientMeasure {
            measure: out,
            scale,
            lateral_spacing: None,
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        None
    }

    fn jump_distance(&self, x: &[f64]) -> Option<f64> {
        self.sigma.jump_distance(x)
    }

    fn describe(&self) -> String {
        format!("inverse({})[{},{}]", self.sigma.name, self.row, self.col)
    }
}

/// `[[c, 1], [1_{c x1 < x2}, c]]`, jumping across the line `x2 = c x1`.
pub fn jump_line_matrix(c: f64) -> Result<MatrixBv> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(invalid(format!("jump-line constant must exceed 1, got {c}")));
    }
    let entries: Vec<ScalarRef> = vec![
        Arc::new(Constant::new(2, c)),
        Arc::new(Constant::new(2, 1.0)),
        Arc::new(HalfSpace::new(vec![-c, 1.0], 0.0)?),
        Arc::new(Constant::new(2, c)),
    ];
    MatrixBv::new(2, entries, Some(0.5 * (c * c - 1.0)), format!("jump_line({c})"))
}

/// `[[b, a 1_C], [a 1_C, b]]` with the cone `C = {a/b x1 < x2 < b/a x1}`.
pub fn cone_matrix(a: f64, b: f64) -> Result<MatrixBv> {
    if !(a > 0.0 && a < b && b.is_finite()) {
        return Err(invalid(format!("cone parameters need 0 < a < b, got {a}, {b}")));
    }
    let wedge: ScalarRef = Arc::new(Wedge::new(a / b, b / a, a)?);
    let entries: Vec<ScalarRef> = vec![
        Arc::new(Constant::new(2, b)),
        wedge.clone(),
        wedge,
        Arc::new(Constant::new(2, b)),
    ];
    MatrixBv::new(2, entries, Some(0.5 * (b * b - a * a)), format!("cone({a},{b})"))
}

/// The Cantor shear matrix
/// `[[1, 0], [1_{x1 > 0}, 1 + cantor_function(Phi^-1(x2 - x1 1_{x1 > 0}))]]`.
pub fn cantor_matrix() -> MatrixBv {
    let entries: Vec<ScalarRef> = vec![
        Arc::new(Constant::new(2, 1.0)),
        Arc::new(Constant::new(2, 0.0)),
        Arc::new(HalfSpace::new(vec![1.0, 0.0], 0.0).expect("valid normal")),
        Arc::new(CantorShearEntry {
            lateral_factor: 1.0,
        }),
    ];
    MatrixBv::new(2, entries, Some(0.5), "cantor_shear").expect("valid cantor matrix")
}

/// Inverse of a square matrix from its characteristic polynomial.
///
/// The coefficients `c_k` of `det(lambda I - A)` follow from the power sums
/// `tr(A^l)` by Newton's identities, and
/// `A^-1 = -(A^(n-1) + c_(n-1) A^(n-2) + ... + c_1 I) / c_0`. Fails with
/// [`Error::Singular`] when `det A <= floor`.
pub fn cayley_hamilton_inverse(a: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(invalid("matrix must be square and nonempty"));
    }
    let mut powers = Vec::with_capacity(n + 1);
    powers.push(DMatrix::identity(n, n));
    for k in 1..=n {
        let next = &powers[k - 1] * a;
        powers.push(next);
    }
    let traces: Vec<f64> = powers.iter().map(|p| p.trace()).collect();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    for k in 1..=n {
        let s: f64 = (1..=k).map(|j| c[n - k + j] * traces[j]).sum();
        c[n - k] = -s / k as f64;
    }
    let det = if n.is_multiple_of(2) { c[0] } else { -c[0] };
    if !(det > floor) {
        return Err(Error::Singular { det, floor });
    }
    let mut acc = DMatrix::zeros(n, n);
    for k in 1..=n {
        acc += &powers[k - 1] * c[k];
    }
    Ok(acc * (-1.0 / c[0]))
}

/// `sigma(x)^-1` by [`cayley_hamilton_inverse`] with the declared
/// determinant floor (zero when none is declared).
pub fn cayley_inverse(sigma: &MatrixBv, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() != sigma.dim {
        return Err(invalid("probe has the wrong dimension"));
    }
    cayley_hamilton_inverse(&sigma.evaluate(x), sigma.det_lower_bound.unwrap_or(0.0))
}

/// Radial flat mollifier profile on `|z| <= 1`: constant on `|z| <= 1/2`
/// and decreasing smoothly to zero at `|z| = 1`. Not normalized.
pub fn flat_mollifier(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let u = 2.0 * (r - 0.5);
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        b / (a + b)
    }
}

/// Nodes and weights of the normalized flat mollifier on a uniform lattice
/// of `per_axis` cells per axis over `[-1, 1]^n`.
fn mollifier_rule(dim: usize, per_axis: usize) -> Vec<(Vec<f64>, f64)> {
    let h = 2.0 / per_axis as f64;
    let axis: Vec<f64> = (0..per_axis).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let mut nodes: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        nodes = nodes
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    let mut rule: Vec<(Vec<f64>, f64)> = nodes
        .into_iter()
        .filter_map(|z| {
            let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w = flat_mollifier(r);
            (w > 0.0).then_some((z, w))
        })
        .collect();
    let total: f64 = rule.iter().map(|p| p.1).sum();
    for p in &mut rule {
        p.1 /= total;
    }
    rule
}

/// A coefficient convolved with the flat mollifier of radius `eps`.
#[derive(Debug, Clone)]
pub struct Mollified {
    inner: ScalarRef,
    eps: f64,
    rule: Vec<(Vec<f64>, f64)>,
    spread: Vec<(Vec<f64>, f64)>,
}

/// Mollifies a coefficient in dimension 1 or 2 at radius `eps`.
pub fn mollify(phi: ScalarRef, eps: f64) -> Result<Mollified> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("mollification radius must be positive, got {eps}")));
    }
    let n = phi.dim();
    let per_axis = match n {
        1 => 512,
        2 => 64,
        _ => return Err(invalid("mollification is implemented in dimensions 1 and 2")),
    };
    Ok(Mollified {
        rule: mollifier_rule(n, per_axis),
        spread: mollifier_rule(n, if n == 1 { 8 } else { 4 }),
        inner: phi,
        eps,
    })
}

impl ScalarBv for Mollified {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        let mut acc = 0.0;
        for (z, w) in &self.rule {
            for k in 0..x.len() {
                y[k] = x[k] - self.eps * z[k];
            }
            acc += w * self.inner.evaluate(&y);
        }
        acc
    }

    fn gradient_measure(&self, region: &Region, level: u32) -> Result<GradientMeasure> {
        let n = self.dim();
        let padded = Region {
            lo: region.lo.iter().map(|v| v - self.eps).collect(),
            hi: region.hi.iter().map(|v| v + self.eps).collect(),
        };
        let g = self.inner.gradient_measure(&padded, level)?;
        let mut m = DiscreteMeasure::empty(n);
        let mut p = vec![0.0; n];
        for (x, w) in g.measure.atoms() {
            for (z, v) in &self.spread {
                for k in 0..n {
                    p[k] = x[k] + self.eps * z[k];
                }
                if region.contains(&p) {
                    m.push(&p, w * v);
                }
            }
        }
        Ok(GradientMeasure {
            measure: m,
            scale: g.scale,
            lateral_spacing: g.lateral_spacing,
        })
    }

    fn sup_bound(&self) -> Option<f64> {
        self.inner.sup_bound()
    }

    fn describe(&self) -> String {
        format!("mollified({}, eps={})", self.inner.describe(), self.eps)
    }
}

/// Maximal curl residual of one component triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurlComponent {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// `max |D_i F_kj - D_j F_ki|` over the interior lattice.
    pub max_residual: f64,
}

/// Outcome of [`curl_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurlReport {
    pub eps: f64,
    pub spacing: f64,
    pub components: Vec<CurlComponent>,
    pub max_residual: f64,
}

/// Lattice over `region` padded by `pad`, with its axis sizes.
struct Lattice {
    origin: Vec<f64>,
    spacing: f64,
    sizes: Vec<usize>,
}

impl Lattice {
    fn new(region: &Region, pad: f64, spacing: f64) -> Self {
        let origin: Vec<f64> = region.lo.iter().map(|v| v - pad).collect();
        let sizes = region
            .lo
            .iter()
            .zip(&region.hi)
            .map(|(a, b)| ((b - a + 2.0 * pad) / spacing).round() as usize + 1)
            .collect();
        Self {
            origin,
            spacing,
            sizes,
        }
    }

    fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            p[k] = self.origin[k] + (idx % self.sizes[k]) as f64 * self.spacing;
            idx /= self.sizes[k];
        }
        p
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.sizes.len()];
        for k in (0..self.sizes.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.sizes[k + 1];
        }
        s
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            m[k] = idx % self.sizes[k];
            idx /= self.sizes[k];
        }
        m
    }
}

/// Discrete flat-mollifier stencil at radius `eps` on a lattice of spacing
/// `h`: integer offsets with normalized weights.
pub(crate) fn lattice_stencil(dim: usize, eps: f64, h: f64) -> Vec<(Vec<isize>, f64)> {
    let r = (eps / h).floor() as isize;
    let mut offs: Vec<Vec<isize>> = vec![Vec::new()];
    for _ in 0..dim {
        offs = offs
            .into_iter()
            .flat_map(|p| {
                (-r..=r).map(move |o| {
                    let mut q = p.clone();
                    q.push(o);
                    q
                })
            })
            .collect();
    }
    let mut st: Vec<(Vec<isize>, f64)> = offs
        .into_iter()
        .filter_map(|o| {
            let d = o.iter().map(|v| (*v as f64 * h).powi(2)).sum::<f64>().sqrt();
            let w = flat_mollifier(d / eps);
            (w > 0.0).then_some((o, w))
        })
        .collect();
    let total: f64 = st.iter().map(|p| p.1).sum();
    for p in &mut st {
        p.1 /= total;
    }
    st
}

/// Samples the entries of `field` on a lattice over `region` padded by
/// `pad` and convolves them with the discrete mollifier of radius `eps`.
/// Returns the lattice and, per entry, the mollified values on the lattice
/// shrunk by the stencil radius (other nodes are `NaN`).
fn mollified_lattice(
    field: &MatrixBv,
    region: &Region,
    pad: f64,
    eps: f64,
    h: f64,
) -> (Lattice, Vec<Vec<f64>>) {
    let n = field.dim();
    let lat = Lattice::new(region, pad + eps, h);
    let total = lat.len();
    let strides = lat.strides();
    let stencil = lattice_stencil(n, eps, h);
    let r = (eps / h).floor() as usize;
    let raw: Vec<Vec<f64>> = field
        .entries()
        .iter()
        .map(|e| (0..total).map(|idx| e.evaluate(&lat.point(idx))).collect())
        .collect();
    let smooth = raw
        .iter()
        .map(|vals| {
            (0..total)
                .map(|idx| {
                    let m = lat.multi(idx);
                    if m.iter().zip(&lat.sizes).any(|(a, s)| *a < r || *a + r >= *s) {
                        return f64::NAN;
                    }
                    stencil
                        .iter()
                        .map(|(o, w)| {
                            let j: isize = o
                                .iter()
                                .zip(&strides)
                                .map(|(a, s)| a * *s as isize)
                                .sum();
                            w * vals[(idx as isize + j) as usize]
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    (lat, smooth)
}

/// Curl residuals `D_i F_kj - D_j F_ki` of the mollified field `F` by
/// central differences on a lattice of spacing `spacing` over `region`.
pub fn curl_check(field: &MatrixBv, region: &Region, eps: f64, spacing: f64) -> Result<CurlReport> {
    check_region(region, field.dim())?;
    if !(spacing > 0.0 && eps >= 2.0 * spacing) {
        return Err(invalid(format!(
            "need eps >= 2 * spacing > 0, got eps = {eps}, spacing = {spacing}"
        )));
    }
    let n = field.dim();
    let (lat, smooth) = mollified_lattice(field, region, spacing, eps, spacing);
    let strides = lat.strides();
    let lo_idx = ((eps + spacing) / spacing).round() as usize;
    let mut components = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                let fkj = &smooth[k * n + j];
                let fki = &smooth[k * n + i];
                let mut worst: f64 = 0.0;
                for idx in 0..lat.len() {
                    let m = lat.multi(idx);
                    if m.iter()
                        .zip(&lat.sizes)
                        .any(|(a, s)| *a < lo_idx || *a + lo_idx >= *s)
                    {
                        continue;
                    }
                    let di = (fkj[idx + strides[i]] - fkj[idx - strides[i]]) / (2.0 * spacing);
                    let dj = (fki[idx + strides[j]] - fki[idx - strides[j]]) / (2.0 * spacing);
                    let v = (di - dj).abs();
                    if v.is_finite() {
                        worst = worst.max(v);
                    }
                }
                components.push(CurlComponent {
                    i,
                    j,
                    k,
                    max_residual: worst,
                });
            }
        }
    }
    let max_residual = components.iter().map(|c| c.max_residual).fold(0.0, f64::max);
    Ok(CurlReport {
        eps,
        spacing,
        components,
        max_residual,
    })
}

/// Outcome of [`distortion_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// `max |sigma^-1|^n / det sigma^-1` over the probes, operator norm.
    pub kappa: f64,
    /// `min <xi, sigma xi> / (|sigma xi| |xi|)` over probes and directions.
    pub delta: f64,
    /// True when `delta <= -1`.
    pub angular_violation: bool,
}

/// Unit directions used to estimate the angular constant.
fn sphere_sample(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / 360.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
            (0..4000)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let l = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.into_iter().map(|a| a / l).collect()
                })
                .collect()
        }
    }
}

/// Worst-case distortion and angular constants of `sigma` over `probes`.
pub fn distortion_check(sigma: &MatrixBv, probes: &[Vec<f64>]) -> Result<DistortionReport> {
    if probes.is_empty() {
        return Err(invalid("at least one probe is required"));
    }
    let n = sigma.dim();
    let dirs = sphere_sample(n);
    let mut kappa: f64 = 0.0;
    let mut delta = f64::INFINITY;
    for x in probes {
        let a = sigma.evaluate(x);
        let inv = cayley_inverse(sigma, x)?;
        let norm = inv.clone().svd(false, false).singular_values.max();
        kappa = kappa.max(norm.powi(n as i32) / inv.determinant());
        for xi in &dirs {
            let v = nalgebra::DVector::from_column_slice(xi);
            let av = &a * &v;
            let len = av.norm();
            if len > 0.0 {
                delta = delta.min(v.dot(&av) / len);
            }
        }
    }
    Ok(DistortionReport {
        kappa,
        delta,
        angular_violation: delta <= -1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_integral_matches_endpoint_values() {
        assert!((cantor_integral(1.0) - 0.5).abs() < 1e-14);
        assert!((cantor_integral(1.0 / 3.0) - 1.0 / 12.0).abs() < 1e-14);
        assert!((cantor_phi(1.0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn phi_inverse_round_trips() {
        for &z in &[-0.7, 0.0, 0.1, 0.5, 0.9, 1.0, 2.5] {
            assert!((cantor_phi_inverse(cantor_phi(z)) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_stencil_is_normalized_and_symmetric() {
        let st = lattice_stencil(2, 0.1, 0.02);
        let total: f64 = st.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let first: f64 = st.iter().map(|p| p.0[0] as f64 * p.1).sum();
        assert!(first.abs() < 1e-14);
    }
}
