//! JSON run configuration.
//!
//! Every section has defaults, so `{}` is a valid configuration. Unknown
//! fields are rejected. [`Config::validate`] collects every problem as a
//! `section.field: message` line before any computation starts.

use std::path::Path;
use std::sync::Arc;

use pathwise::bv_library::{
    cantor_coefficient, indicator_domain, lipschitz_wrap, Constant, Domain, HalfSpace, ScalarFn, ScalarRef,
};
use pathwise::grid_paths::{apply_map, make_fbm, make_power_path, SampledPath, TimeGrid};
use pathwise::numerics::inf_f64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Complete configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct Config {
    /// Master seed of every random draw.
    pub seed: u64,
    pub path: PathConfig,
    pub variability: VariabilityConfig,
    pub integrate: IntegrateConfig,
    pub solve: SolveRunConfig,
    pub sweep: SweepConfig,
}


impl Config {
    /// Parses a configuration file; `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p.display().to_string(), e))?;
                Self::parse(&text)
            }
        }
    }

    /// Parses configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(vec![format!("config: {e}")]))
    }

    /// Checks every section, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut d = Vec::new();
        self.path.check("path", &mut d);
        self.variability.check("variability", &mut d);
        self.integrate.check("integrate", &mut d);
        self.solve.check("solve", &mut d);
        self.sweep.check("sweep", &mut d);
        if d.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(d))
        }
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

fn in_open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// Kinds of sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PathKind {
    /// Fractional Brownian motion with independent coordinates.
    Fbm,
    /// The scalar path `t^exponent`.
    Power,
    /// The segment from `start` with constant `velocity`.
    Segment,
    /// The constant path at `start`.
    Constant,
}

/// A sampled path on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub kind: PathKind,
    pub hurst: f64,
    pub exponent: f64,
    pub dim: usize,
    pub steps: usize,
    pub horizon: f64,
    /// Starting point; random and power paths are shifted to start here.
    pub start: Option<Vec<f64>>,
    pub velocity: Option<Vec<f64>>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            kind: PathKind::Fbm,
            hurst: 0.75,
            exponent: 0.5,
            dim: 2,
            steps: 4096,
            horizon: 1.0,
            start: None,
            velocity: None,
        }
    }
}

impl PathConfig {
    fn check(&self, at: &str, d: &mut Vec<String>) {
        if self.dim == 0 {
            d.push(format!("{at}.dim: must be at least 1"));
        }
        if self.steps < 4 {
            d.push(format!("{at}.steps: must be at least 4, got {}", self.steps));
        }
        if !positive(self.horizon) {
            d.push(format!("{at}.horizon: must be positive, got {}", self.horizon));
        }
        match self.kind {
            PathKind::Fbm if !in_open_unit(self.hurst) => {
                d.push(format!("{at}.hurst: must lie in (0,1), got {}", self.hurst))
            }
            PathKind::Power => {
                if !(self.exponent > 0.0 && self.exponent <= 1.0) {
                    d.push(format!("{at}.exponent: must lie in (0,1], got {}", self.exponent));
                }
                if self.dim != 1 {
                    d.push(format!("{at}.dim: power paths are scalar, got {}", self.dim));
                }
            }
            _ => {}
        }
        for (name, v) in [("start", &self.start), ("velocity", &self.velocity)] {
            if let Some(v) = v {
                if v.len() != self.dim {
                    d.push(format!("{at}.{name}: expected {} coordinates, got {}", self.dim, v.len()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    d.push(format!("{at}.{name}: coordinates must be finite"));
                }
            }
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.horizon, self.steps)?)
    }

    /// Samples the path with `seed`.
    pub fn build(&self, seed: u64) -> Result<SampledPath> {
        let grid = self.grid()?;
        let origin = vec![0.0; self.dim];
        let start = self.start.clone().unwrap_or(origin);
        let path = match self.kind {
            PathKind::Fbm => make_fbm(self.hurst, self.dim, grid, seed)?,
            PathKind::Power => make_power_path(self.exponent, grid)?,
            PathKind::Constant => return Ok(SampledPath::constant(grid, &start)?),
            PathKind::Segment => {
                let v = self.velocity.clone().unwrap_or_else(|| {
                    let mut v = vec![0.0; self.dim];
                    v[self.dim - 1] = 1.0;
                    v
                });
                return Ok(SampledPath::linear(grid, &start, &v)?);
            }
        };
        if start.iter().all(|v| *v == 0.0) {
            return Ok(path);
        }
        Ok(apply_map(&path, |x| Ok(x.iter().zip(&start).map(|(a, b)| a + b).collect()))?)
    }
}

/// Coefficient functions of bounded variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    /// Cantor function of the first coordinate.
    Cantor { dim: usize },
    /// Indicator of a disk in the plane.
    Disk { center: [f64; 2], radius: f64 },
    /// Indicator of an interval on the line.
    Interval { lo: f64, hi: f64 },
    /// Indicator of `<normal, x> > offset`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Constant { dim: usize, value: f64 },
    /// `sin` of the first coordinate.
    Sine { dim: usize },
}

impl CoefficientConfig {
    pub fn dim(&self) -> usize {
        match self {
            CoefficientConfig::Cantor { dim } | CoefficientConfig::Constant { dim, .. } | CoefficientConfig::Sine { dim } => {
                *dim
            }
            CoefficientConfig::Disk { .. } => 2,
            CoefficientConfig::Interval { .. } => 1,
            CoefficientConfig::HalfSpace { normal, .. } => normal.len(),
        }
    }

    fn check(&self, at: &str, d: &mut Vec<String>) {
        if self.dim() == 0 {
            d.push(format!("{at}.dim: must be at least 1"));
        }
        match self {
            CoefficientConfig::Disk { radius, .. } if !positive(*radius) => {
                d.push(format!("{at}.radius: must be positive, got {radius}"))
            }
            CoefficientConfig::Interval { lo, hi } if !(lo < hi) => {
                d.push(format!("{at}: interval ({lo}, {hi}) is empty"))
            }
            CoefficientConfig::HalfSpace { normal, .. } if normal.iter().all(|v| *v == 0.0) => {
                d.push(format!("{at}.normal: must be nonzero"))
            }
            _ => {}
        }
    }

    pub fn build(&self) -> Result<ScalarRef> {
        Ok(match self {
            CoefficientConfig::Cantor { dim } => Arc::new(cantor_coefficient(*dim)?),
            CoefficientConfig::Disk { center, radius } => Arc::new(indicator_domain(Domain::Disk {
                center: *center,
                radius: *radius,
            })?),
            CoefficientConfig::Interval { lo, hi } => {
                Arc::new(indicator_domain(Domain::Interval { lo: *lo, hi: *hi })?)
            }
            CoefficientConfig::HalfSpace { normal, offset } => Arc::new(HalfSpace::new(normal.clone(), *offset)?),
            CoefficientConfig::Constant { dim, value } => Arc::new(Constant::new(*dim, *value)),
            CoefficientConfig::Sine { dim } => {
                let f: ScalarFn = Arc::new(|x: &[f64]| x[0].sin());
                Arc::new(lipschitz_wrap(*dim, f, 1.0)?.named("sin(x1)"))
            }
        })
    }
}

/// Settings of the `variability` subcommand; the path comes from the
/// `path` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariabilityConfig {
    pub coefficient: CoefficientConfig,
    pub s: f64,
    /// `"inf"` selects the supremum norm.
    #[serde(with = "inf_f64")]
    pub p: f64,
    pub levels: Vec<u32>,
    pub margin: f64,
    pub energy_crosscheck: bool,
}

impl Default for VariabilityConfig {
    fn default() -> Self {
        Self {
            coefficient: CoefficientConfig::Disk {
                center: [0.0, 0.0],
                radius: 0.5,
            },
            s: 0.5,
            p: 1.0,
            levels: vec![6, 8, 10],
            margin: 0.05,
            energy_crosscheck: false,
        }
    }
}

impl VariabilityConfig {
    fn check(&self, at: &str, d: &mut Vec<String>) {
        self.coefficient.check(&format!("{at}.coefficient"), d);
        if !in_open_unit(self.s) {
            d.push(format!("{at}.s: must lie in (0,1), got {}", self.s));
        }
        if !(self.p >= 1.0) {
            d.push(format!("{at}.p: must be at least 1, got {}", self.p));
        }
        if self.levels.len() < 2 {
            d.push(format!("{at}.levels: at least two levels are required"));
        }
        if self.levels.iter().any(|l| *l > 20) {
            d.push(format!("{at}.levels: levels above 20 are not supported"));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            d.push(format!("{at}.margin: must be nonnegative, got {}", self.margin));
        }
    }
}

/// Integrand-integrator pairs of the `integrate` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PairKind {
    /// `f = 1 + t - t^2`, `g = t^3 + t`.
    Smooth,
    /// `f = sin(X)` and `g = X` for one scalar fBm `X`.
    LipschitzFbm,
    /// `f = cantor(X)` with `X` a scalar fBm started at `1/2`, `g` an
    /// independent fBm.
    CantorFbm,
    /// `f` the indicator of the disk of radius `0.4` along a planar fBm,
    /// `g` an independent scalar fBm.
    IndicatorFbm,
}

/// Settings of the `integrate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateConfig {
    pub pair: PairKind,
    pub hurst: f64,
    pub steps: usize,
    pub theta: f64,
    /// Upper integration limit, the horizon when unset.
    pub t_end: Option<f64>,
    /// Run the Riemann-sum rate study.
    pub rate: bool,
    /// Interval counts of the rate study.
    pub mesh: Vec<usize>,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        Self {
            pair: PairKind::Smooth,
            hurst: 0.8,
            steps: 1 << 14,
            theta: 0.5,
            t_end: None,
            rate: false,
            mesh: (8..=13).map(|k| 1usize << k).collect(),
        }
    }
}

impl IntegrateConfig {
    fn check(&self, at: &str, d: &mut Vec<String>) {
        if !in_open_unit(self.hurst) {
            d.push(format!("{at}.hurst: must lie in (0,1), got {}", self.hurst));
        }
        if self.steps < 4 {
            d.push(format!("{at}.steps: must be at least 4, got {}", self.steps));
        }
        if !in_open_unit(self.theta) {
            d.push(format!("{at}.theta: must lie in (0,1), got {}", self.theta));
        }
        if let Some(t) = self.t_end {
            if !(0.0..=1.0).contains(&t) {
                d.push(format!("{at}.t_end: must lie in [0, 1], got {t}"));
            }
        }
        if self.rate {
            if self.mesh.len() < 4 {
                d.push(format!("{at}.mesh: a rate study needs at least four meshes"));
            }
            for m in &self.mesh {
                if *m == 0 || !self.steps.is_multiple_of(*m) {
                    d.push(format!("{at}.mesh: {m} intervals do not divide {} steps", self.steps));
                }
            }
        }
    }
}

/// Coefficients of the `solve` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Example {
    /// The jump-line matrix with constant `c`.
    JumpLine,
    /// The cone matrix with parameters `a < b`.
    Cone,
    /// The Cantor shear matrix.
    CantorShear,
    /// The identity matrix in the plane.
    Identity,
    /// The scalar coefficient `|x|^kappa` on `(-1, 1)`, `1` outside.
    PowerWell,
    /// The scalar Cantor well.
    CantorWell,
}

impl Example {
    pub fn dim(self) -> usize {
        match self {
            Example::PowerWell | Example::CantorWell => 1,
            _ => 2,
        }
    }
}

/// How the Doss maps of a planar example are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MapSourceConfig {
    ClosedForm,
    Solved,
}

/// Settings of the `solve` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveRunConfig {
    pub example: Example,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub hurst: f64,
    pub steps: usize,
    /// Starting point, `(1, 1)` in the plane and `0.5` on the line when
    /// unset.
    pub x0: Option<Vec<f64>>,
    pub theta: f64,
    pub source: MapSourceConfig,
    /// Subsampling strides of the residual refinement, coarse to fine.
    pub strides: Vec<usize>,
    /// Run the variability classifier before each residual.
    pub witness: bool,
    pub witness_levels: Vec<u32>,
    /// Half-width of the square on which planar maps are solved.
    pub region_half_width: f64,
}

impl Default for SolveRunConfig {
    fn default() -> Self {
        Self {
            example: Example::JumpLine,
            c: 2.0,
            a: 1.0,
            b: 2.0,
            kappa: 0.5,
            hurst: 0.75,
            steps: 4096,
            x0: None,
            theta: 0.5,
            source: MapSourceConfig::ClosedForm,
            strides: vec![16, 4, 1],
            witness: true,
            witness_levels: vec![6, 8, 10],
            region_half_width: 3.2,
        }
    }
}

impl SolveRunConfig {
    fn check(&self, at: &str, d: &mut Vec<String>) {
        if !in_open_unit(self.hurst) {
            d.push(format!("{at}.hurst: must lie in (0,1), got {}", self.hurst));
        }
        match self.example {
            Example::JumpLine if !(self.c > 1.0 && self.c.is_finite()) => {
                d.push(format!("{at}.c: must exceed 1, got {}", self.c))
            }
            Example::Cone if !(self.a > 0.0 && self.a < self.b && self.b.is_finite()) => {
                d.push(format!("{at}.a, {at}.b: need 0 < a < b, got {}, {}", self.a, self.b))
            }
            Example::PowerWell if !in_open_unit(self.kappa) => {
                d.push(format!("{at}.kappa: must lie in (0,1), got {}", self.kappa))
            }
            _ => {}
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != self.example.dim() {
                d.push(format!("{at}.x0: expected {} coordinates, got {}", self.example.dim(), x0.len()));
            }
        }
        if !in_open_unit(self.theta) {
            d.push(format!("{at}.theta: must lie in (0,1), got {}", self.theta));
        }
        if self.strides.is_empty() {
            d.push(format!("{at}.strides: at least one stride is required"));
        }
        for s in &self.strides {
            if *s == 0 || !self.steps.is_multiple_of(*s) || self.steps / s < 4 {
                d.push(format!("{at}.strides: stride {s} does not leave at least 4 of {} steps", self.steps));
            }
        }
        if self.witness && self.witness_levels.len() < 2 {
            d.push(format!("{at}.witness_levels: at least two levels are required"));
        }
        if !positive(self.region_half_width) {
            d.push(format!("{at}.region_half_width: must be positive"));
        }
    }

    /// The configured or default starting point.
    pub fn start(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| match self.example.dim() {
            1 => vec![0.5],
            _ => vec![1.0, 1.0],
        })
    }
}

/// Studies run by the `sweep` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Study {
    /// Divergence flags of the fBm energy at its starting point over a
    /// grid of `(hurst, s)`.
    Phase,
    /// Median Doss residuals over seeds for each grid size.
    Residual,
}

/// Settings of the `sweep` subcommand. Empty axes fall back to a single
/// default value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub study: Study,
    pub hurst: Vec<f64>,
    pub s: Vec<f64>,
    pub dim: usize,
    pub seeds: usize,
    pub steps: usize,
    /// Examples of the residual study.
    pub examples: Vec<Example>,
    /// Grid sizes of the residual study, nested by subsampling the finest.
    pub sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            study: Study::Phase,
            hurst: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            s: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            dim: 2,
            seeds: 50,
            steps: 1 << 12,
            examples: vec![Example::JumpLine, Example::CantorShear],
            sizes: vec![1 << 10, 1 << 12, 1 << 14],
        }
    }
}

impl SweepConfig {
    fn check(&self, at: &str, d: &mut Vec<String>) {
        if self.hurst.iter().any(|h| !in_open_unit(*h)) {
            d.push(format!("{at}.hurst: values must lie in (0,1)"));
        }
        if self.s.iter().any(|s| !in_open_unit(*s)) {
            d.push(format!("{at}.s: values must lie in (0,1)"));
        }
        if self.dim == 0 {
            d.push(format!("{at}.dim: must be at least 1"));
        }
        if self.study == Study::Phase && self.seeds < 20 {
            d.push(format!("{at}.seeds: the phase study needs at least 20 seeds, got {}", self.seeds));
        }
        if self.seeds == 0 {
            d.push(format!("{at}.seeds: must be positive"));
        }
        if self.study == Study::Residual {
            if let Some(&finest) = self.sizes.iter().max() {
                if self.sizes.iter().any(|n| *n < 4 || finest % n != 0) {
                    d.push(format!("{at}.sizes: every size must be at least 4 and divide {finest}"));
                }
            }
            if self.examples.iter().any(|e| e.dim() != 2) {
                d.push(format!("{at}.examples: the residual study uses planar examples"));
            }
        }
    }
}
