//! The `path`, `variability`, `integrate` and `solve` subcommands.

use std::sync::Arc;

use nalgebra::DMatrix;
use pathwise::bv_library::{
    cantor_coefficient, cantor_matrix, cone_matrix, indicator_domain, jump_line_matrix, Domain, MatrixBv, Profile1d,
    Region, ScalarRef,
};
use pathwise::doss::{
    build_solution, closed_form_maps, linear_maps, residual, solve_nd, solve_scalar, uniqueness_check, ClosedForm,
    DossMaps, ResidualReport, SolveConfig, VerificationReport, WitnessOptions, UNIQUENESS_NOTE,
};
use pathwise::gls_integral::{gls_integrate, rate_study_all, GlsResult, RateReport};
use pathwise::grid_paths::{estimate_holder, make_fbm, GridFunction, HolderEstimate, SampledPath, TimeGrid};
use pathwise::variability::{classify, compose, VariabilityParams, VariabilityReport};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Example, IntegrateConfig, MapSourceConfig, PairKind, SolveRunConfig};
use crate::error::{HarnessError, Result};
use crate::manifest::OutputDir;

/// Distance above which an impostor counts as rejected.
pub const IMPOSTOR_FLOOR: f64 = 1e-2;

fn csv_bytes(path: &SampledPath) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    Ok(buf)
}

/// Summary written by the `path` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSummary {
    pub dim: usize,
    pub steps: usize,
    pub horizon: f64,
    pub holder: HolderEstimate,
}

/// Samples the configured path into `path.csv` and `path_summary.json`.
pub fn run_path(config: &Config, out: &mut OutputDir) -> Result<PathSummary> {
    let path = config.path.build(config.seed)?;
    let summary = PathSummary {
        dim: path.dim(),
        steps: path.grid().steps(),
        horizon: path.grid().horizon(),
        holder: estimate_holder(&path)?,
    };
    out.write("path.csv", &csv_bytes(&path)?)?;
    out.write_json("path_summary.json", &summary)?;
    Ok(summary)
}

/// Classifies the configured path against the configured coefficient into
/// `variability.json`.
pub fn run_variability(config: &Config, out: &mut OutputDir) -> Result<VariabilityReport> {
    let v = &config.variability;
    if v.coefficient.dim() != config.path.dim {
        return Err(HarnessError::Config(vec![format!(
            "variability.coefficient: lives in dimension {} but path.dim is {}",
            v.coefficient.dim(),
            config.path.dim
        )]));
    }
    let path = config.path.build(config.seed)?;
    let phi = v.coefficient.build()?;
    let params = VariabilityParams::new(v.s, v.p)
        .with_levels(v.levels.clone())
        .with_margin(v.margin)
        .with_energy_crosscheck(v.energy_crosscheck);
    let report = classify(&path, phi.as_ref(), &params)?;
    out.write_json("variability.json", &report)?;
    Ok(report)
}

/// Integrand and integrator of an integration pair.
pub fn integration_pair(cfg: &IntegrateConfig, seed: u64) -> Result<(GridFunction, GridFunction)> {
    let grid = TimeGrid::new(1.0, cfg.steps)?;
    Ok(match cfg.pair {
        PairKind::Smooth => (
            GridFunction::from_fn(grid, |t| 1.0 + t - t * t),
            GridFunction::from_fn(grid, |t| t * t * t + t),
        ),
        PairKind::LipschitzFbm => {
            let x = make_fbm(cfg.hurst, 1, grid, seed)?.coordinate(0);
            (x.map(f64::sin), x)
        }
        PairKind::CantorFbm => {
            let x = make_fbm(cfg.hurst, 1, grid, seed)?;
            let shifted = SampledPath::from_coordinates(&[x.coordinate(0).map(|v| v + 0.5)])?;
            let phi = cantor_coefficient(1)?;
            let g = make_fbm(cfg.hurst, 1, grid, seed.wrapping_add(1))?.coordinate(0);
            (compose(&phi, &shifted)?, g)
        }
        PairKind::IndicatorFbm => {
            let x = make_fbm(cfg.hurst, 2, grid, seed)?;
            let phi = indicator_domain(Domain::Disk {
                center: [0.0, 0.0],
                radius: 0.4,
            })?;
            let g = make_fbm(cfg.hurst, 1, grid, seed.wrapping_add(1))?.coordinate(0);
            (compose(&phi, &x)?, g)
        }
    })
}

/// Output of the `integrate` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrateOutput {
    pub pair: PairKind,
    pub result: GlsResult,
    pub rates: Vec<RateReport>,
}

/// Evaluates the configured integral into `integral.json`.
pub fn run_integrate(config: &Config, out: &mut OutputDir) -> Result<IntegrateOutput> {
    let cfg = &config.integrate;
    let (f, g) = integration_pair(cfg, config.seed)?;
    let t_end = cfg.t_end.unwrap_or(1.0);
    let result = gls_integrate(&f, &g, cfg.theta, t_end)?;
    let rates = if cfg.rate {
        rate_study_all(&f, &g, cfg.theta, &cfg.mesh)?
    } else {
        Vec::new()
    };
    let output = IntegrateOutput {
        pair: cfg.pair,
        result,
        rates,
    };
    out.write_json("integral.json", &output)?;
    Ok(output)
}

/// Coefficient, Doss maps and dimension of a `solve` example.
pub struct Problem {
    pub sigma: MatrixBv,
    pub maps: DossMaps,
}

fn scalar_field(profile: Profile1d, name: &str) -> Result<MatrixBv> {
    let entry: ScalarRef = Arc::new(profile);
    Ok(MatrixBv::new(1, vec![entry], None, name)?)
}

fn closed_form(cfg: &SolveRunConfig) -> Option<ClosedForm> {
    match cfg.example {
        Example::JumpLine => Some(ClosedForm::JumpLine { c: cfg.c }),
        Example::Cone => Some(ClosedForm::Cone { a: cfg.a, b: cfg.b }),
        Example::CantorShear => Some(ClosedForm::CantorShear),
        _ => None,
    }
}

/// Builds the coefficient and maps of the configured example.
pub fn build_problem(cfg: &SolveRunConfig) -> Result<Problem> {
    let scalar_domain = (-4.0, 4.0);
    let (sigma, maps) = match cfg.example {
        Example::Identity => {
            let id = DMatrix::identity(2, 2);
            (MatrixBv::constant(&id)?, linear_maps(&id)?)
        }
        Example::PowerWell => {
            let profile = Profile1d::power_well(cfg.kappa)?;
            let maps = solve_scalar(&profile, scalar_domain, &SolveConfig::scalar())?;
            (scalar_field(profile, "power_well")?, maps)
        }
        Example::CantorWell => {
            let profile = Profile1d::cantor_well();
            let maps = solve_scalar(&profile, scalar_domain, &SolveConfig::scalar())?;
            (scalar_field(profile, "cantor_well")?, maps)
        }
        Example::JumpLine | Example::Cone | Example::CantorShear => {
            let sigma = match cfg.example {
                Example::JumpLine => jump_line_matrix(cfg.c)?,
                Example::Cone => cone_matrix(cfg.a, cfg.b)?,
                _ => cantor_matrix(),
            };
            let maps = match cfg.source {
                MapSourceConfig::ClosedForm => closed_form_maps(closed_form(cfg).expect("planar closed form"))?,
                MapSourceConfig::Solved => solve_nd(
                    &sigma,
                    &[0.0, 0.0],
                    &Region::cube(2, cfg.region_half_width),
                    &SolveConfig::default(),
                )?,
            };
            (sigma, maps)
        }
    };
    Ok(Problem { sigma, maps })
}

/// Distance of one impostor path to the driver under `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpostorRecord {
    pub name: String,
    pub uniqueness_sup: f64,
    pub rejected: bool,
}

/// Residual of the candidate on one grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub n: usize,
    pub stride: usize,
    pub report: ResidualReport,
}

/// Contents of `verification.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub example: Example,
    pub source: String,
    pub x0: Vec<f64>,
    pub hurst: f64,
    pub seed: u64,
    pub lip_f: f64,
    pub lip_g: f64,
    pub verification: VerificationReport,
    pub residuals: Vec<ResidualRecord>,
    pub impostors: Vec<ImpostorRecord>,
}

/// Candidates that are not driven by the driver: the solution bumped by
/// `0.1` in its first coordinate on the second half of the horizon, and the
/// path frozen at the starting point.
pub fn impostors(solution: &SampledPath, x0: &[f64]) -> Result<Vec<(String, SampledPath)>> {
    let n = solution.dim();
    let steps = solution.grid().steps();
    let mut bumped = solution.values().to_vec();
    for i in steps / 2..=steps {
        bumped[n * i] += 0.1;
    }
    Ok(vec![
        ("bumped".into(), SampledPath::new(*solution.grid(), n, bumped)?),
        ("frozen".into(), SampledPath::constant(*solution.grid(), x0)?),
    ])
}

/// Solves the configured example along an fBm driver and verifies the
/// candidate at every stride. Writes `driver.csv`, `solution.csv` and
/// `verification.json`.
pub fn run_solve(config: &Config, out: &mut OutputDir) -> Result<SolveOutput> {
    let cfg = &config.solve;
    let problem = build_problem(cfg)?;
    let x0 = cfg.start();
    let dim = cfg.example.dim();
    let driver = make_fbm(cfg.hurst, dim, TimeGrid::new(1.0, cfg.steps)?, config.seed)?;
    let witness = WitnessOptions {
        check: cfg.witness,
        levels: cfg.witness_levels.clone(),
        ..WitnessOptions::default()
    };

    let mut residuals = Vec::new();
    for &stride in &cfg.strides {
        let y = driver.subsample(stride)?;
        let x = build_solution(&problem.maps, &y, &x0)?;
        let report = residual(&x, &problem.sigma, &y, &x0, cfg.theta, &witness)?;
        residuals.push(ResidualRecord {
            n: y.grid().steps(),
            stride,
            report,
        });
    }

    let solution = build_solution(&problem.maps, &driver, &x0)?;
    let uniqueness_sup = uniqueness_check(&solution, &problem.maps, &driver, &x0)?;
    let impostors = impostors(&solution, &x0)?
        .into_iter()
        .map(|(name, path)| {
            let sup = uniqueness_check(&path, &problem.maps, &driver, &x0)?;
            Ok(ImpostorRecord {
                name,
                uniqueness_sup: sup,
                rejected: sup > IMPOSTOR_FLOOR,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let finest = residuals
        .iter()
        .min_by_key(|r| r.stride)
        .expect("at least one stride")
        .report
        .clone();
    let verification = VerificationReport {
        residual_by_n: residuals.iter().map(|r| (r.n, r.report.sup)).collect(),
        s_witness: finest.s_witness,
        classifier_report: finest.classifier,
        uniqueness_sup,
        note: UNIQUENESS_NOTE.to_string(),
    };
    let output = SolveOutput {
        example: cfg.example,
        source: format!("{:?}", problem.maps.source()),
        x0: x0.clone(),
        hurst: cfg.hurst,
        seed: config.seed,
        lip_f: problem.maps.lip_f(),
        lip_g: problem.maps.lip_g(),
        verification,
        residuals,
        impostors,
    };
    out.write("driver.csv", &csv_bytes(&driver)?)?;
    out.write("solution.csv", &csv_bytes(&solution)?)?;
    out.write_json("verification.json", &output)?;
    Ok(output)
}

