//! Parameter sweeps over a grid of cells run in a worker pool.
//!
//! Each cell draws its seed from a ChaCha stream keyed by the master seed
//! and the cell index, so results do not depend on scheduling. A failing
//! cell records its error and the sweep continues.

use pathwise::doss::{closed_form_maps, ClosedForm};
use pathwise::bv_library::{cantor_matrix, jump_line_matrix, MatrixBv};
use pathwise::grid_paths::{make_fbm, TimeGrid};
use pathwise::doss::{build_solution, residual, WitnessOptions};
use pathwise::numerics::median;
use pathwise::variability::fbm_energy_bound;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, Example, Study, SweepConfig};
use crate::error::{HarnessError, Result};
use crate::manifest::OutputDir;

/// Seed of cell `index` under `master`.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Parameters of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub seed: u64,
    pub hurst: f64,
    /// Order `s` of the phase study.
    pub s: Option<f64>,
    /// Example and grid size of the residual study.
    pub example: Option<Example>,
    pub steps: Option<usize>,
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: Cell,
    /// Divergence flag of the phase study.
    pub diverging: Option<bool>,
    /// Mean energy estimate of the phase study, or the median residual of
    /// the residual study.
    pub value: Option<f64>,
    pub error: Option<String>,
}

/// Contents of `sweep.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub study: Study,
    pub rows: Vec<SweepRow>,
}

fn axis(values: &[f64], fallback: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

/// The cells of `cfg`; empty axes contribute a single default value.
pub fn cells(cfg: &SweepConfig, master: u64) -> Vec<Cell> {
    let mut out = Vec::new();
    match cfg.study {
        Study::Phase => {
            for h in axis(&cfg.hurst, 0.75) {
                for s in axis(&cfg.s, 0.5) {
                    out.push((h, Some(s), None, None));
                }
            }
        }
        Study::Residual => {
            let examples = if cfg.examples.is_empty() {
                vec![Example::JumpLine]
            } else {
                cfg.examples.clone()
            };
            let sizes = if cfg.sizes.is_empty() { vec![cfg.steps] } else { cfg.sizes.clone() };
            let hurst = axis(&cfg.hurst, 0.75);
            for &e in &examples {
                for &h in &hurst {
                    for &n in &sizes {
                        out.push((h, None, Some(e), Some(n)));
                    }
                }
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(index, (hurst, s, example, steps))| Cell {
            index,
            seed: cell_seed(master, index),
            hurst,
            s,
            example,
            steps,
        })
        .collect()
}

fn planar_problem(example: Example) -> Result<(MatrixBv, pathwise::doss::DossMaps)> {
    Ok(match example {
        Example::JumpLine => (jump_line_matrix(2.0)?, closed_form_maps(ClosedForm::JumpLine { c: 2.0 })?),
        Example::CantorShear => (cantor_matrix(), closed_form_maps(ClosedForm::CantorShear)?),
        other => {
            return Err(HarnessError::Config(vec![format!(
                "sweep.examples: {other:?} has no closed-form maps"
            )]))
        }
    })
}

/// Median residual over `seeds` drivers on `steps` steps, each subsampled
/// from a driver on `finest` steps so that all sizes share their paths.
fn residual_cell(cell: &Cell, cfg: &SweepConfig, finest: usize) -> Result<f64> {
    let example = cell.example.expect("residual cell");
    let steps = cell.steps.expect("residual cell");
    let (sigma, maps) = planar_problem(example)?;
    let x0 = [1.0, 1.0];
    let witness = WitnessOptions {
        check: false,
        ..WitnessOptions::default()
    };
    let mut sups = Vec::with_capacity(cfg.seeds);
    for k in 0..cfg.seeds {
        let y = make_fbm(cell.hurst, 2, TimeGrid::new(1.0, finest)?, cell_seed(cell.seed, k))?;
        let y = y.subsample(finest / steps)?;
        let x = build_solution(&maps, &y, &x0)?;
        sups.push(residual(&x, &sigma, &y, &x0, 0.5, &witness)?.sup);
    }
    Ok(median(&sups))
}

fn run_cell(cell: &Cell, cfg: &SweepConfig) -> SweepRow {
    let outcome = match cfg.study {
        Study::Phase => TimeGrid::new(1.0, cfg.steps)
            .and_then(|g| {
                fbm_energy_bound(cell.hurst, cfg.dim, cell.s.expect("phase cell"), &vec![0.0; cfg.dim], cfg.seeds, g, cell.seed)
            })
            .map(|r| (Some(r.diverging), Some(r.mean)))
            .map_err(HarnessError::from),
        Study::Residual => {
            let finest = cfg.sizes.iter().copied().max().unwrap_or(cfg.steps);
            residual_cell(cell, cfg, finest).map(|v| (None, Some(v)))
        }
    };
    match outcome {
        Ok((diverging, value)) => SweepRow {
            cell: cell.clone(),
            diverging,
            value,
            error: None,
        },
        Err(e) => SweepRow {
            cell: cell.clone(),
            diverging: None,
            value: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every cell; rows come back in cell order.
pub fn run_cells(cfg: &SweepConfig, master: u64) -> SweepTable {
    let rows = cells(cfg, master).par_iter().map(|c| run_cell(c, cfg)).collect();
    SweepTable { study: cfg.study, rows }
}

fn csv_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The table as CSV with one line per cell.
pub fn to_csv(table: &SweepTable) -> String {
    let mut out = String::from("index,seed,hurst,s,example,steps,diverging,value,error\n");
    for r in &table.rows {
        let c = &r.cell;
        let example = c.example.map(|e| serde_json::to_value(e).expect("enum serializes").as_str().unwrap_or("").to_string());
        let error = r.error.as_ref().map(|e| format!("\"{}\"", e.replace('"', "'").replace('\n', " ")));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.index,
            c.seed,
            c.hurst,
            csv_field(c.s),
            example.unwrap_or_default(),
            csv_field(c.steps),
            csv_field(r.diverging),
            csv_field(r.value),
            error.unwrap_or_default()
        ));
    }
    out
}

/// Runs the configured sweep into `sweep.json` and `sweep.csv`.
pub fn run_sweep(config: &Config, out: &mut OutputDir) -> Result<SweepTable> {
    let table = run_cells(&config.sweep, config.seed);
    out.write_json("sweep.json", &table)?;
    out.write("sweep.csv", to_csv(&table).as_bytes())?;
    Ok(table)
}
