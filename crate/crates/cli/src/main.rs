//! Command-line surface tying the solvers together.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 solver
//! non-convergence (partial results are still emitted).

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use hamlab_core::classical::{self, ClassicalGrid};
use hamlab_core::error::Error;
use hamlab_core::huggett::{self, HuggettSpec};
use hamlab_core::io::{
    self, emit_affine, emit_classical_trace, emit_huggett, emit_simpath, model_hash, RunManifest,
};
use hamlab_core::ksaffine::{self, BackwardOptions, BootstrapOptions, KsModel};
use hamlab_core::model::sync_consistency_residual;
use hamlab_core::simlab;

#[derive(Parser)]
#[command(name = "hamlab", about = "Heterogeneous-agent equilibrium solvers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelSource {
    /// Built-in preset name (ks-benchmark, huggett-ls18-7state, huggett-2state).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Path to a model configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV results and the run manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a configuration or preset and print its residuals.
    Validate {
        /// Preset name or config path.
        target: String,
    },
    /// The grid-DP / stationary-distribution / bisection pipeline.
    Classical {
        #[command(subcommand)]
        cmd: ClassicalCmd,
    },
    /// Time-invariant pure-credit equilibrium via distribution transport.
    Huggett {
        #[command(subcommand)]
        cmd: HuggettCmd,
    },
    /// Affine-reduction solver for the production economy with aggregate risk.
    Ks {
        #[command(subcommand)]
        cmd: KsCmd,
    },
}

#[derive(Subcommand)]
enum ClassicalCmd {
    /// Run the bisection driver and emit the trial trace.
    Solve {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Three seed rates, comma-separated.
        #[arg(long, default_value = "0.02,0.045,0.03", value_delimiter = ',')]
        seeds: Vec<f64>,
    },
    /// Probe the demand discontinuity between two rates.
    Probe {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long)]
        r_lo: f64,
        #[arg(long)]
        r_hi: f64,
        #[arg(long, default_value_t = 2000)]
        grid_points: usize,
    },
}

#[derive(Subcommand)]
enum HuggettCmd {
    Solve {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 128)]
        grid_points: usize,
        /// Initial policy ansatz slope and intercept: theta0(c) = slope*c + intercept.
        #[arg(long, default_value_t = 40.0)]
        ansatz_slope: f64,
        #[arg(long, default_value_t = -8.0)]
        ansatz_intercept: f64,
    },
}

#[derive(Subcommand)]
enum KsCmd {
    /// Backward induction to time invariance on a bootstrapped grid.
    Solve {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 48)]
        grid_points: usize,
        #[arg(long, default_value_t = 1500)]
        max_steps: usize,
    },
    /// Solve, then simulate the population means along a productivity path.
    Simulate {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 1_100_000)]
        periods: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        burn_in: usize,
    },
    /// Kernel-aberration accuracy scan over a simulated sample.
    Accuracy {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 1_000_000)]
        periods: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Pooled log-linear fit of simulated capital against the exact transports.
    FitCompare {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 1_100_000)]
        periods: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_source(source: &ModelSource) -> Result<io::LoadedConfig, Error> {
    match (&source.preset, &source.config) {
        (Some(name), None) => io::load_preset(name),
        (None, Some(path)) => io::load_model(path),
        _ => Err(Error::Config(
            "exactly one of --preset and --config is required".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate { target } => {
            let cfg = if io::available_presets().contains(&target.as_str()) {
                io::load_preset(&target)?
            } else {
                io::load_model(&target)?
            };
            cfg.model.validate()?;
            let residual = sync_consistency_residual(&cfg.model.employment)?;
            println!("model ok; hash {}", model_hash(&cfg.model, cfg.classical)?);
            println!("employment synchronization residual: {residual:.3e}");
            Ok(ExitCode::SUCCESS)
        }

        Command::Classical { cmd } => match cmd {
            ClassicalCmd::Solve {
                source,
                grid_points,
                trials,
                seeds,
            } => {
                if seeds.len() != 3 {
                    return Err(Error::Config("exactly three seed rates required".into()));
                }
                let cfg = load_source(&source)?;
                let grid = classical_grid(&cfg, grid_points)?;
                let t0 = Instant::now();
                let trace =
                    classical::equilibrium_bisection(&grid, [seeds[0], seeds[1], seeds[2]], trials)?;
                let (r_last, d_last) = *trace.last().unwrap();
                let (solution, _) = classical::solve_at_rate(&grid, r_last, None)?;
                let mut manifest = RunManifest::new("classical", &model_hash(&cfg.model, cfg.classical)?);
                manifest.grid = format!(
                    "assets [{}, {}] x {grid_points}",
                    grid.asset_grid[0],
                    grid.asset_grid.last().unwrap()
                );
                manifest.wall_ms = t0.elapsed().as_millis() as u64;
                manifest.residuals.insert("final_demand".into(), d_last);
                emit_classical_trace(&trace, Some(&solution), &grid.asset_grid, &source.out, &mut manifest)?;
                manifest.write(&source.out)?;
                println!("final trial: rate {r_last:.9}, demand {d_last:.6e}");
                println!("results in {}", source.out.display());
                Ok(ExitCode::SUCCESS)
            }
            ClassicalCmd::Probe {
                source,
                r_lo,
                r_hi,
                grid_points,
            } => {
                let cfg = load_source(&source)?;
                let grid = classical_grid(&cfg, grid_points)?;
                let (gap, dist) = classical::discontinuity_probe(&grid, r_lo, r_hi)?;
                println!("demand gap {gap:.6}, distribution sup-distance {dist:.6e}");
                Ok(ExitCode::SUCCESS)
            }
        },

        Command::Huggett { cmd } => match cmd {
            HuggettCmd::Solve {
                source,
                grid_points,
                ansatz_slope,
                ansatz_intercept,
            } => {
                let cfg = load_source(&source)?;
                let spec = HuggettSpec::from_model(&cfg.model)?;
                let opts = huggett::SolverOptions {
                    grid_points,
                    ..Default::default()
                };
                let t0 = Instant::now();
                let eq = huggett::solve_equilibrium(&spec, spec.face_value, |_, c| {
                    ansatz_slope * c + ansatz_intercept
                }, &opts)?;
                let mut manifest = RunManifest::new("huggett", &model_hash(&cfg.model, cfg.classical)?);
                manifest.grid = format!("consumption ]0, {:.6}] x {grid_points}", eq.c_bar);
                manifest.wall_ms = t0.elapsed().as_millis() as u64;
                manifest
                    .tolerances
                    .insert("clearing_rel".into(), opts.clearing_tol_rel);
                manifest.tolerances.insert("outer".into(), opts.outer_tol);
                manifest.caps.insert("outer".into(), opts.outer_cap as u64);
                emit_huggett(&eq, &source.out, &mut manifest)?;
                manifest.write(&source.out)?;
                println!(
                    "B = {:.9}, r = {:.6}, c_bar = {:.6}, clearing = {:.3e}",
                    eq.bond_price, eq.rate, eq.c_bar, eq.diagnostics.clearing
                );
                println!(
                    "borrowing limit {:.5}, investment bound {:.5}, outer iterations {}",
                    eq.borrowing_limit, eq.investment_bound, eq.diagnostics.outer_iterations
                );
                println!("results in {}", source.out.display());
                if eq.diagnostics.converged {
                    Ok(ExitCode::SUCCESS)
                } else {
                    eprintln!("warning: outer loop hit its cap; results are partial");
                    Ok(ExitCode::from(2))
                }
            }
        },

        Command::Ks { cmd } => match cmd {
            KsCmd::Solve {
                source,
                grid_points,
                max_steps,
            } => {
                let (eq, cfg, wall) = ks_solve(&source, grid_points, max_steps)?;
                let mut manifest = RunManifest::new("ks", &model_hash(&cfg.model, cfg.classical)?);
                manifest.grid = format!(
                    "A* [{:.6}, {:.6}] x {grid_points}",
                    eq.grid[0],
                    eq.grid.last().unwrap()
                );
                manifest.wall_ms = wall;
                emit_affine(&eq, &source.out, &mut manifest)?;
                manifest.write(&source.out)?;
                let r = &eq.report;
                println!(
                    "steps {}, layer distances: a {:.3e}, g {:.3e}, K {:.3e}, transport {:.3e}",
                    r.steps, r.dist_a, r.dist_g, r.dist_k, r.dist_theta
                );
                println!("results in {}", source.out.display());
                if r.converged {
                    Ok(ExitCode::SUCCESS)
                } else {
                    eprintln!("warning: backward induction hit the step budget");
                    Ok(ExitCode::from(2))
                }
            }
            KsCmd::Simulate {
                source,
                periods,
                seed,
                burn_in,
            } => {
                let (eq, cfg, _) = ks_solve(&source, 48, 1500)?;
                let mid = 0.5 * (eq.grid[0] + eq.grid.last().unwrap());
                let sim = simlab::simulate(&eq, periods, seed, &[mid * 1.05, mid * 0.95], 0, burn_in)?;
                let mut manifest = RunManifest::new("ks-simulate", &model_hash(&cfg.model, cfg.classical)?);
                manifest.seed = Some(seed);
                emit_simpath(&sim, &source.out, &mut manifest)?;
                manifest.write(&source.out)?;
                let disp = simlab::dispersion_report(&sim, 10_000, 1e-6);
                println!(
                    "distinct means per productivity state over the last 10k periods: {:?}",
                    disp.distinct
                );
                println!("results in {}", source.out.display());
                Ok(ExitCode::SUCCESS)
            }
            KsCmd::Accuracy {
                source,
                periods,
                seed,
            } => {
                let (eq, _, _) = ks_solve(&source, 48, 1500)?;
                let mid = 0.5 * (eq.grid[0] + eq.grid.last().unwrap());
                let sim = simlab::simulate(&eq, periods, seed, &[mid * 1.05, mid * 0.95], 0, periods / 10)?;
                let (at_means, at_thresholds) = simlab::aberration_scan(&sim, &eq)?;
                println!("max |R - 1| at group means: {at_means:.6e}");
                println!("max |R - 1| at investment thresholds: {at_thresholds:.6e}");
                Ok(ExitCode::SUCCESS)
            }
            KsCmd::FitCompare {
                source,
                periods,
                seed,
            } => {
                let (eq, _, _) = ks_solve(&source, 48, 1500)?;
                let mid = 0.5 * (eq.grid[0] + eq.grid.last().unwrap());
                let sim = simlab::simulate(&eq, periods, seed, &[mid * 1.05, mid * 0.95], 0, periods / 10)?;
                let k_path = simlab::capital_path(&sim, &eq);
                let fit = simlab::loglinear_fit_compare(&k_path, &sim.x_path, &eq, sim.burn_in)?;
                for y in 0..fit.kappa0.len() {
                    println!(
                        "into state {y}: log K' = {:.6} + {:.6} log K",
                        fit.kappa0[y], fit.kappa1[y]
                    );
                }
                println!(
                    "sup deviation from exact transports (simulated range): {:?}",
                    fit.deviation
                );
                println!(
                    "sup deviation over the plotted domain: {:?}",
                    fit.deviation_plot
                );
                println!(
                    "pooled SSE {:.6e} vs split SSE {:.6e}",
                    fit.pooled_sse, fit.split_sse
                );
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn classical_grid(cfg: &io::LoadedConfig, n: usize) -> Result<ClassicalGrid, Error> {
    let cl = cfg.classical.ok_or_else(|| {
        Error::Config("configuration carries no [classical] asset bounds".into())
    })?;
    let wage = cfg
        .model
        .wage
        .ok_or_else(|| Error::Config("classical pipeline needs a fixed-wage model".into()))?;
    ClassicalGrid::new(
        cl.asset_min,
        cl.asset_max,
        n,
        cfg.model.employment.states.clone(),
        cfg.model.employment.p_matrices[0][0].clone(),
        wage,
        cfg.model.preferences,
    )
}

fn ks_solve(
    source: &ModelSource,
    grid_points: usize,
    max_steps: usize,
) -> Result<(ksaffine::AffineEquilibrium, io::LoadedConfig, u64), Error> {
    let cfg = load_source(source)?;
    let model = KsModel::from_model(&cfg.model)?;
    let opts = BackwardOptions {
        max_steps,
        ..Default::default()
    };
    let boot = BootstrapOptions {
        grid_points,
        ..Default::default()
    };
    let t0 = Instant::now();
    let eq = ksaffine::bootstrap_solve(&model, &opts, &boot)?;
    Ok((eq, cfg, t0.elapsed().as_millis() as u64))
}
