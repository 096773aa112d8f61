//! Discrete measures, occupation measures, Riesz potentials and energies,
//! fractional maximal functions and regularity-exponent estimation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid_paths::{fmt_f64, SampledPath};
use crate::numerics::{beta, deterministic_sum, linear_fit};

/// Finitely many weighted atoms in `R^n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    locations: Vec<f64>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    /// The zero measure in dimension `dim`.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    /// Builds a measure from row-major locations and weights.
    pub fn from_atoms(dim: usize, locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("measure dimension must be at least 1"));
        }
        if locations.len() != dim * weights.len() {
            return Err(invalid(format!(
                "{} coordinates do not describe {} atoms in dimension {dim}",
                locations.len(),
                weights.len()
            )));
        }
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(invalid("atom locations must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("atom weights must be finite and nonnegative"));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            dim,
            locations,
            weights,
            total_mass,
        })
    }

    /// A single atom of weight `w` at `x`.
    pub fn point_mass(x: &[f64], w: f64) -> Result<Self> {
        Self::from_atoms(x.len(), x.to_vec(), vec![w])
    }

    /// Appends an atom. Zero weights are kept.
    pub fn push(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert!(w >= 0.0);
        self.locations.extend_from_slice(x);
        self.weights.push(w);
        self.total_mass += w;
    }

    /// Appends all atoms of `other`.
    pub fn extend(&mut self, other: &DiscreteMeasure) {
        debug_assert_eq!(other.dim, self.dim);
        self.locations.extend_from_slice(&other.locations);
        self.weights.extend_from_slice(&other.weights);
        self.total_mass += other.total_mass;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of the weights.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Location of atom `j`.
    pub fn location(&self, j: usize) -> &[f64] {
        &self.locations[j * self.dim..(j + 1) * self.dim]
    }

    /// Weight of atom `j`.
    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterator over `(location, weight)`.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.locations
            .chunks_exact(self.dim.max(1))
            .zip(self.weights.iter().copied())
    }

    /// Atoms inside the closed box `[lo, hi]`.
    pub fn restrict_to_box(&self, lo: &[f64], hi: &[f64]) -> Self {
        let mut out = Self::empty(self.dim);
        for (x, w) in self.atoms() {
            if x.iter().zip(lo).zip(hi).all(|((v, a), b)| v >= a && v <= b) {
                out.push(x, w);
            }
        }
        out
    }

    /// Mass of the closed ball `B(x, r)`.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let r2 = r * r;
        self.atoms()
            .filter(|(y, _)| dist2(x, y) <= r2)
            .map(|(_, w)| w)
            .sum()
    }

    /// Writes `x1,...,xn,weight` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (x, wt) in self.atoms() {
            let mut row: Vec<String> = x.iter().map(|&v| fmt_f64(v)).collect();
            row.push(fmt_f64(wt));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[inline]
pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Riesz kernel `max(|x - y|, h)^(gamma - n)` with unit normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPolicy {
    /// Riesz order, `0 < gamma < n`.
    pub gamma: f64,
    /// Distances below this radius are replaced by it.
    pub cap_radius: f64,
}

impl KernelPolicy {
    pub fn new(gamma: f64, cap_radius: f64) -> Self {
        Self { gamma, cap_radius }
    }

    /// Checks `0 < gamma < n` and `cap_radius >= 0`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < dim as f64) {
            return Err(invalid(format!(
                "Riesz order {} must lie in (0, {dim})",
                self.gamma
            )));
        }
        if !(self.cap_radius >= 0.0 && self.cap_radius.is_finite()) {
            return Err(invalid(format!(
                "cap radius must be finite and nonnegative, got {}",
                self.cap_radius
            )));
        }
        Ok(())
    }

    /// Kernel value at squared distance `d2`.
    #[inline]
    pub fn kernel_sq(&self, d2: f64, dim: usize) -> f64 {
        let h2 = self.cap_radius * self.cap_radius;
        let d2 = d2.max(h2);
        if d2 == 0.0 {
            return f64::INFINITY;
        }
        d2.powf(0.5 * (self.gamma - dim as f64))
    }
}

/// Capped kernel `max(d, h)^exponent` evaluated from the squared distance,
/// for a negative exponent.
#[inline]
pub(crate) fn capped_power(d2: f64, h2: f64, half_exponent: f64) -> f64 {
    let d2 = d2.max(h2);
    if d2 == 0.0 {
        f64::INFINITY
    } else {
        d2.powf(half_exponent)
    }
}

/// Occupation measure of a path: an atom of weight `dt` at each left
/// endpoint `X_{t_i}`, `i = 0..N-1`. The total mass is `T`.
pub fn occupation_measure(path: &SampledPath) -> DiscreteMeasure {
    let dt = path.grid().dt();
    let n = path.grid().steps();
    let locations = path.values()[..n * path.dim()].to_vec();
    let mut m = DiscreteMeasure::from_atoms(path.dim(), locations, vec![dt; n])
        .expect("paths have finite coordinates");
    m.total_mass = path.grid().horizon();
    m
}

/// Riesz potential `sum_j w_j max(|x - y_j|, h)^(gamma - n)`.
///
/// Returns `f64::INFINITY` when `h = 0` and `x` coincides with an atom of
/// positive weight.
pub fn riesz_potential(mu: &DiscreteMeasure, policy: &KernelPolicy, x: &[f64]) -> Result<f64> {
    policy.validate(mu.dim())?;
    if x.len() != mu.dim() {
        return Err(invalid("evaluation point has the wrong dimension"));
    }
    Ok(potential_unchecked(mu, policy, x))
}

pub(crate) fn potential_unchecked(mu: &DiscreteMeasure, policy: &KernelPolicy, x: &[f64]) -> f64 {
    let h2 = policy.cap_radius * policy.cap_radius;
    let half = 0.5 * (policy.gamma - mu.dim() as f64);
    let mut acc = 0.0;
    for (y, w) in mu.atoms() {
        if w > 0.0 {
            acc += w * capped_power(dist2(x, y), h2, half);
        }
    }
    acc
}

/// Mutual Riesz energy `sum_{x in mu, y in nu} w_x w_y k(x, y)`.
///
/// The summation order depends only on the unordered pair of measures, so
/// the result is exactly symmetric.
pub fn mutual_energy(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    policy: &KernelPolicy,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(invalid("measures have different dimensions"));
    }
    policy.validate(mu.dim())?;
    let (inner, outer) = if canonical_cmp(mu, nu) == Ordering::Greater {
        (nu, mu)
    } else {
        (mu, nu)
    };
    Ok(deterministic_sum(outer.len(), |j| {
        let w = outer.weight(j);
        if w == 0.0 {
            0.0
        } else {
            w * potential_unchecked(inner, policy, outer.location(j))
        }
    }))
}

fn canonical_cmp(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| {
            a.locations
                .iter()
                .zip(&b.locations)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| {
            a.weights
                .iter()
                .zip(&b.weights)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

/// Truncated fractional maximal function
/// `sup { r^(gamma - n) mu(B(x, r)) : r = 2^k < R }` over closed balls.
///
/// Returns `f64::INFINITY` when an atom of positive weight sits at `x`.
pub fn fractional_maximal(mu: &DiscreteMeasure, gamma: f64, radius: f64, x: &[f64]) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("truncation radius must be positive, got {radius}")));
    }
    let n = mu.dim() as f64;
    if !(0.0..n).contains(&gamma) {
        return Err(invalid(format!("order {gamma} must lie in [0, {n})")));
    }
    let mut dists: Vec<(f64, f64)> = mu
        .atoms()
        .filter(|(_, w)| *w > 0.0)
        .map(|(y, w)| (dist2(x, y).sqrt(), w))
        .collect();
    if dists.is_empty() {
        return Ok(0.0);
    }
    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
    if dists[0].0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let d_min = dists[0].0;
    let mut k = radius.log2().ceil() as i32 - 1;
    while 2f64.powi(k) >= radius {
        k -= 1;
    }
    let mut best: f64 = 0.0;
    let mut idx = dists.len();
    let mut mass: f64 = dists.iter().map(|d| d.1).sum();
    loop {
        let r = 2f64.powi(k);
        if r < d_min {
            break;
        }
        while idx > 0 && dists[idx - 1].0 > r {
            idx -= 1;
            mass -= dists[idx].1;
        }
        best = best.max(r.powf(gamma - n) * mass.max(0.0));
        k -= 1;
    }
    Ok(best)
}

/// Fit of `log sup_x mu(B(x, r))` against `log r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    /// Fitted exponent `d`.
    pub exponent: f64,
    /// Largest absolute residual of the log-log fit.
    pub max_residual: f64,
    pub r_squared: f64,
    /// Radii with positive supremal mass used in the fit.
    pub radii: Vec<f64>,
    /// Supremal ball masses at those radii.
    pub sup_masses: Vec<f64>,
}

/// Estimates the upper-regularity exponent of `mu` from ball masses
/// centered at its atoms. `center_stride` thins the set of centers in
/// dimension `n >= 2` (1 uses every atom).
pub fn upper_regularity_exponent(
    mu: &DiscreteMeasure,
    radii: &[f64],
    center_stride: usize,
) -> Result<RegularityEstimate> {
    if mu.is_empty() {
        return Err(invalid("measure has no atoms"));
    }
    if radii.len() < 3 {
        return Err(invalid(format!("need at least 3 radii, got {}", radii.len())));
    }
    let sup = sup_ball_masses(mu, radii, center_stride.max(1));
    let (rs, ms): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&sup)
        .filter(|(r, m)| **r > 0.0 && **m > 0.0)
        .map(|(r, m)| (*r, *m))
        .unzip();
    if rs.len() < 3 {
        return Err(invalid("fewer than 3 radii carry positive mass"));
    }
    let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&lx, &ly).ok_or_else(|| invalid("radii must be distinct"))?;
    Ok(RegularityEstimate {
        exponent: fit.slope,
        max_residual: fit.max_abs_residual,
        r_squared: fit.r_squared,
        radii: rs,
        sup_masses: ms,
    })
}

fn sup_ball_masses(mu: &DiscreteMeasure, radii: &[f64], stride: usize) -> Vec<f64> {
    let dim = mu.dim();
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| mu.location(a)[0].total_cmp(&mu.location(b)[0]));
    let first: Vec<f64> = order.iter().map(|&j| mu.location(j)[0]).collect();
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0.0);
    for &j in &order {
        prefix.push(prefix.last().unwrap() + mu.weight(j));
    }
    let centers: Vec<usize> = if dim == 1 {
        (0..order.len()).collect()
    } else {
        (0..order.len()).step_by(stride).collect()
    };
    radii
        .iter()
        .map(|&r| {
            let mut best: f64 = 0.0;
            for &c in &centers {
                let x = first[c];
                let lo = first.partition_point(|v| *v < x - r);
                let hi = first.partition_point(|v| *v <= x + r);
                let mass = if dim == 1 {
                    prefix[hi] - prefix[lo]
                } else {
                    let center = mu.location(order[c]);
                    let r2 = r * r;
                    (lo..hi)
                        .filter(|&k| dist2(center, mu.location(order[k])) <= r2)
                        .map(|k| mu.weight(order[k]))
                        .sum()
                };
                best = best.max(mass);
            }
            best
        })
        .collect()
}

/// Histogram estimate of the density of a measure with respect to
/// Lebesgue measure on cubes of side `cell` anchored at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub dim: usize,
    pub cell: f64,
    /// Cube index and density value, in index order.
    pub bins: Vec<(Vec<i64>, f64)>,
}

impl DensityHistogram {
    /// Largest density value.
    pub fn sup_density(&self) -> f64 {
        self.bins.iter().map(|b| b.1).fold(0.0, f64::max)
    }

    /// Integral of the density, equal to the total mass.
    pub fn integral(&self) -> f64 {
        let vol = self.cell.powi(self.dim as i32);
        self.bins.iter().map(|b| b.1 * vol).sum()
    }
}

/// Bins the atoms of `mu` into cubes of side `cell`.
pub fn local_time_density(mu: &DiscreteMeasure, cell: f64) -> Result<DensityHistogram> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(invalid(format!("cell width must be positive, got {cell}")));
    }
    let mut bins: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (x, w) in mu.atoms() {
        let key: Vec<i64> = x.iter().map(|v| (v / cell).floor() as i64).collect();
        *bins.entry(key).or_insert(0.0) += w;
    }
    let vol = cell.powi(mu.dim() as i32);
    Ok(DensityHistogram {
        dim: mu.dim(),
        cell,
        bins: bins.into_iter().map(|(k, m)| (k, m / vol)).collect(),
    })
}

/// Closed-form constant `K` with
/// `int_R |x|^(a-1) |x-y|^(b-1) dx = K |y|^(a+b-1)`.
pub fn riesz_convolution_constant(a: f64, b: f64) -> f64 {
    let c = 1.0 - a - b;
    beta(a, c) + beta(b, c) + beta(a, b)
}

/// Numerical value of `int_R |x|^(a-1) |x-y|^(b-1) dx` on the real line by
/// tanh-sinh quadrature on the three pieces cut at `0` and `y`.
pub fn riesz_convolution_1d(a: f64, b: f64, y: f64, tolerance: f64) -> Result<f64> {
    check_convolution_orders(a, b)?;
    if y == 0.0 || !y.is_finite() {
        return Err(invalid("evaluation point must be finite and nonzero"));
    }
    let atoms = [(0.0, a), (y.abs(), b)];
    Ok(integrate_kernel_product(&atoms, tolerance))
}

fn check_convolution_orders(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a + b < 1.0) {
        return Err(invalid(format!(
            "orders must be positive with sum below the dimension 1, got {a} and {b}"
        )));
    }
    Ok(())
}

/// Integral over the real line of `prod_k |x - c_k|^(g_k - 1)` for factors
/// `(c_k, g_k)` with `sum_k (g_k - 1) < -1`.
fn integrate_kernel_product(factors: &[(f64, f64)], tolerance: f64) -> f64 {
    let min_order = factors.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let decay = -1.0 - factors.iter().map(|f| f.1 - 1.0).sum::<f64>();
    weighted_kernel_integral(
        &factors.iter().map(|f| f.0).collect::<Vec<_>>(),
        &|anchor, offset| {
            factors
                .iter()
                .map(|&(c, g)| offset_distance(anchor, offset, c).powf(g - 1.0))
                .product()
        },
        min_order,
        decay,
        tolerance,
    )
}

/// `|anchor + offset - c|`, exact when `c` is the anchor itself.
fn offset_distance(anchor: f64, offset: f64, c: f64) -> f64 {
    if c == anchor {
        offset.abs()
    } else {
        (anchor + offset - c).abs()
    }
}

/// Integral over the real line of `f(anchor, offset)`, the integrand at
/// `x = anchor + offset`, where `f` behaves like `|x - c|^(min_order - 1)`
/// at worst next to each breakpoint `c` and like `|x|^(-1 - decay)` at
/// infinity.
///
/// Each piece is parametrized by its offset from the nearest breakpoint,
/// with `offset = r w^(1/min_order)` within distance `r` of a breakpoint
/// and `offset = r w^(-1/decay)` beyond it on the half-lines, which turns
/// both singularities into bounded integrands.
fn weighted_kernel_integral(
    breakpoints: &[f64],
    f: &dyn Fn(f64, f64) -> f64,
    min_order: f64,
    decay: f64,
    tolerance: f64,
) -> f64 {
    let mut cuts = breakpoints.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let lo = cuts[0];
    let hi = *cuts.last().unwrap();
    let m = 1.0 / min_order;
    let de = |g: &dyn Fn(f64) -> f64| quadrature::double_exponential::integrate(g, 0.0, 1.0, tolerance).integral;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let jac = |v: f64| half * m * v.powf(m - 1.0);
        total += de(&|v| f(w[0], half * v.powf(m)) * jac(v));
        total += de(&|v| f(w[1], -half * v.powf(m)) * jac(v));
    }
    let reach = 0.5 * (hi - lo).max(1.0);
    let near = |v: f64| (reach * v.powf(m), reach * m * v.powf(m - 1.0));
    let k = 1.0 / decay;
    let far = |v: f64| (reach * v.powf(-k), reach * k * v.powf(-k - 1.0));
    for (anchor, sign) in [(hi, 1.0), (lo, -1.0)] {
        for piece in [&near as &dyn Fn(f64) -> (f64, f64), &far] {
            total += de(&|v| {
                let (u, j) = piece(v);
                f(anchor, sign * u) * j
            });
        }
    }
    total
}

/// Outcome of [`convolution_identity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionCheck {
    /// Constant calibrated at the reference point.
    pub calibrated_constant: f64,
    /// Integral at the probe point.
    pub probe_value: f64,
    /// Calibrated prediction at the probe point.
    pub predicted: f64,
    /// `|probe_value - predicted| / predicted`.
    pub relative_error: f64,
}

/// Checks the scaling law of the one-dimensional Riesz convolution: the
/// constant is calibrated at `reference` and used to predict the integral
/// at `probe`.
pub fn convolution_identity_check(
    gamma1: f64,
    gamma2: f64,
    reference: f64,
    probe: f64,
    tolerance: f64,
) -> Result<ConvolutionCheck> {
    check_convolution_orders(gamma1, gamma2)?;
    let e = gamma1 + gamma2 - 1.0;
    let at_ref = riesz_convolution_1d(gamma1, gamma2, reference, tolerance)?;
    let probe_value = riesz_convolution_1d(gamma1, gamma2, probe, tolerance)?;
    let calibrated_constant = at_ref / reference.abs().powf(e);
    let predicted = calibrated_constant * probe.abs().powf(e);
    Ok(ConvolutionCheck {
        calibrated_constant,
        probe_value,
        predicted,
        relative_error: (probe_value - predicted).abs() / predicted.abs(),
    })
}

/// Both sides of the energy-trading identity on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrading {
    /// `sum_{x in nu} w_x U^(1-s) mu(x)` with uncapped kernel.
    pub lhs: f64,
    /// `int U^gamma mu(x) U^(1-s-gamma) nu(x) dx` by quadrature.
    pub rhs: f64,
    /// Convolution constant relating the two sides.
    pub constant: f64,
    /// `rhs / (constant * lhs)`, ideally 1.
    pub ratio: f64,
}

/// Evaluates both sides of the energy-trading identity for measures on the
/// real line with pairwise distinct atoms and uncapped kernels.
pub fn energy_trading_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    s: f64,
    gamma: f64,
    tolerance: f64,
) -> Result<EnergyTrading> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(invalid("energy trading is implemented on the real line"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("order s must lie in (0,1), got {s}")));
    }
    let other = 1.0 - s - gamma;
    check_convolution_orders(gamma, other)?;
    for (x, _) in mu.atoms() {
        if nu.atoms().any(|(y, _)| x[0] == y[0]) {
            return Err(invalid("atoms of the two measures must be distinct"));
        }
    }
    let policy = KernelPolicy::new(1.0 - s, 0.0);
    let lhs: f64 = nu
        .atoms()
        .map(|(y, w)| w * potential_unchecked(mu, &policy, y))
        .sum();
    let f = |anchor: f64, offset: f64| {
        let u: f64 = mu
            .atoms()
            .map(|(y, w)| w * offset_distance(anchor, offset, y[0]).powf(gamma - 1.0))
            .sum();
        let v: f64 = nu
            .atoms()
            .map(|(y, w)| w * offset_distance(anchor, offset, y[0]).powf(other - 1.0))
            .sum();
        u * v
    };
    let cuts: Vec<f64> = mu.atoms().chain(nu.atoms()).map(|(y, _)| y[0]).collect();
    let rhs = weighted_kernel_integral(&cuts, &f, gamma.min(other), s, tolerance);
    let constant = riesz_convolution_constant(gamma, other);
    Ok(EnergyTrading {
        lhs,
        rhs,
        constant,
        ratio: rhs / (constant * lhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_maximal_excludes_truncation_radius() {
        let mu = DiscreteMeasure::point_mass(&[0.0], 1.0).unwrap();
        let v = fractional_maximal(&mu, 0.5, 2.0, &[1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_order_is_antisymmetric() {
        let a = DiscreteMeasure::from_atoms(1, vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let b = DiscreteMeasure::from_atoms(1, vec![0.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(canonical_cmp(&a, &b), Ordering::Less);
        assert_eq!(canonical_cmp(&b, &a), Ordering::Greater);
    }
}
