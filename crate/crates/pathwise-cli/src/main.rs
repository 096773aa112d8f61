use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pathwise_cli::config::{Config, Example, MapSourceConfig, PairKind, PathKind, Study};
use pathwise_cli::error::{HarnessError, EXIT_OTHER};
use pathwise_cli::manifest::OutputDir;
use pathwise_cli::suites::{require_pass, Suite};
use pathwise_cli::{runs, suites, sweep};

#[derive(Debug, Parser)]
#[command(name = "pathwise", version, about = "Pathwise integration and Doss solutions for Hoelder paths")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving the outputs and `manifest.json`.
    #[arg(long, global = true, default_value = "pathwise-out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a path and estimate its Hoelder exponent.
    Path {
        #[arg(long, value_enum)]
        kind: Option<PathKind>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        /// Number of time steps.
        #[arg(long = "N")]
        steps: Option<usize>,
    },
    /// Classify the variability of the configured path against a
    /// coefficient.
    Variability {
        #[arg(long)]
        s: Option<f64>,
        /// Integrability exponent; `inf` selects the supremum norm.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Evaluate a generalized Lebesgue-Stieltjes integral and optionally
    /// the Riemann-sum convergence rate.
    Integrate {
        #[arg(long, value_enum)]
        pair: Option<PairKind>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long = "N")]
        steps: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        /// Run the rate study.
        #[arg(long)]
        rate: bool,
        /// Interval counts, either a comma list or `2^a..2^b`.
        #[arg(long)]
        mesh: Option<String>,
    },
    /// Build a Doss solution along an fBm driver and verify it.
    Solve {
        #[arg(long, value_enum)]
        example: Option<Example>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long = "N")]
        steps: Option<usize>,
        #[arg(long, value_enum)]
        source: Option<MapSourceConfig>,
        /// Skip the variability classifier before each residual.
        #[arg(long)]
        no_witness: bool,
    },
    /// Run a validation suite.
    Validate {
        #[arg(long, value_enum, default_value = "full")]
        suite: Suite,
    },
    /// Run a parameter sweep.
    Sweep {
        #[arg(long, value_enum)]
        study: Option<Study>,
        #[arg(long)]
        seeds: Option<usize>,
    },
}

/// Parses `2^a..2^b`, `a..b` or a comma-separated list of interval counts.
fn parse_mesh(text: &str) -> anyhow::Result<Vec<usize>> {
    let power = |s: &str| -> anyhow::Result<usize> {
        let s = s.trim();
        match s.strip_prefix("2^") {
            Some(k) => Ok(1usize << k.parse::<u32>().with_context(|| format!("bad exponent in {s}"))?),
            None => s.parse().with_context(|| format!("bad mesh entry {s}")),
        }
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (power(lo)?, power(hi)?);
        anyhow::ensure!(lo > 0 && lo <= hi, "empty mesh range {text}");
        let mut out = vec![lo];
        while out.last().copied().unwrap_or(hi) * 2 <= hi {
            out.push(out.last().copied().unwrap_or(hi) * 2);
        }
        Ok(out)
    } else {
        text.split(',').map(power).collect()
    }
}

fn apply_overrides(config: &mut Config, command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Path { kind, hurst, dim, steps } => {
            let p = &mut config.path;
            p.kind = kind.unwrap_or(p.kind);
            p.hurst = hurst.unwrap_or(p.hurst);
            p.dim = dim.unwrap_or(p.dim);
            p.steps = steps.unwrap_or(p.steps);
        }
        Command::Variability { s, p } => {
            let v = &mut config.variability;
            v.s = s.unwrap_or(v.s);
            v.p = p.unwrap_or(v.p);
        }
        Command::Integrate {
            pair,
            hurst,
            steps,
            theta,
            rate,
            mesh,
        } => {
            let i = &mut config.integrate;
            i.pair = pair.unwrap_or(i.pair);
            i.hurst = hurst.unwrap_or(i.hurst);
            i.steps = steps.unwrap_or(i.steps);
            i.theta = theta.unwrap_or(i.theta);
            i.rate |= rate;
            if let Some(m) = mesh {
                i.mesh = parse_mesh(m).map_err(|e| HarnessError::Config(vec![format!("--mesh: {e}")]))?;
                i.rate = true;
            }
        }
        Command::Solve {
            example,
            hurst,
            steps,
            source,
            no_witness,
        } => {
            let s = &mut config.solve;
            s.example = example.unwrap_or(s.example);
            s.hurst = hurst.unwrap_or(s.hurst);
            s.steps = steps.unwrap_or(s.steps);
            s.source = source.unwrap_or(s.source);
            s.witness &= !no_witness;
        }
        Command::Validate { .. } => {}
        Command::Sweep { study, seeds } => {
            let s = &mut config.sweep;
            s.study = study.unwrap_or(s.study);
            s.seeds = seeds.unwrap_or(s.seeds);
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut config = Config::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    apply_overrides(&mut config, &cli.command)?;
    config.validate()?;

    let mut out = OutputDir::create(&cli.common.out_dir)?;
    let name = match &cli.command {
        Command::Path { .. } => {
            let s = runs::run_path(&config, &mut out)?;
            println!("path: {} steps, Hoelder exponent {:.3}", s.steps, s.holder.exponent);
            "path"
        }
        Command::Variability { .. } => {
            let r = runs::run_variability(&config, &mut out)?;
            println!("variability: {:?} (growth {:.3})", r.verdict, r.growth_exponent);
            "variability"
        }
        Command::Integrate { .. } => {
            let r = runs::run_integrate(&config, &mut out)?;
            println!("integral: {:.8} (slack {:.3})", r.result.value, r.result.bound_slack);
            for rate in &r.rates {
                println!("rate {:?}: order {:.3}", rate.rule, rate.exponent);
            }
            "integrate"
        }
        Command::Solve { .. } => {
            let r = runs::run_solve(&config, &mut out)?;
            for rec in &r.residuals {
                println!("N = {}: residual {:.3e}", rec.n, rec.report.sup);
            }
            println!("uniqueness sup {:.3e}", r.verification.uniqueness_sup);
            "solve"
        }
        Command::Validate { suite } => {
            let report = suites::run_validate(*suite, &mut out)?;
            for c in &report.checks {
                println!("{}", c.line());
            }
            out.finish("validate", &config)?;
            require_pass(&report)?;
            return Ok(());
        }
        Command::Sweep { .. } => {
            let table = sweep::run_sweep(&config, &mut out)?;
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            println!("sweep: {} cells, {failed} failed", table.rows.len());
            "sweep"
        }
    };
    out.finish(name, &config)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(EXIT_OTHER, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
