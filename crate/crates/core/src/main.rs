// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pinn_core::config::{ExperimentConfig, ProblemConfig};
use pinn_core::harness::{self, Benchmark};
use pinn_core::network::ParamSet;
use pinn_core::oracle::{self, relative_l2};
use pinn_core::problems::{Burgers, PbGeometry, PbMode, PoissonBoltzmann, Riccati};
use pinn_core::{PinnError, Result};

#[derive(Parser)]
#[command(name = "pinn", version, about = "Train and benchmark physics-informed neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all trials of one experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run every `*.cfg` file in a directory and write a combined summary.
    Sweep {
        #[arg(long)]
        config_dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Combined summary path (default: <config-dir>/sweep-summary.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a reference solution and write it as CSV.
    Oracle {
        #[arg(long, value_enum)]
        problem: OracleProblem,
        #[arg(long)]
        out: PathBuf,
        /// Take problem parameters from a config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = oracle::BURGERS_REFERENCE_NX)]
        nx: usize,
        #[arg(long, default_value_t = oracle::BURGERS_REFERENCE_NT)]
        nt: usize,
        #[arg(long, default_value_t = oracle::PB_REFERENCE_NR)]
        nr: usize,
    },
    /// Score saved parameters against a problem's reference solution.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum)]
        problem: EvalProblem,
        /// Take problem parameters from a config file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleProblem {
    Burgers,
    PbLinear,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalProblem {
    Riccati,
    Burgers,
    Pb,
}

fn problem_from(config: Option<&Path>, fallback: ProblemConfig) -> Result<ProblemConfig> {
    match config {
        Some(p) => Ok(ExperimentConfig::load(p)?.problem),
        None => Ok(fallback),
    }
}

fn print_summary(rows: &[harness::SummaryRow]) {
    print!("{}", harness::summary_csv(rows));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            trials,
            seed,
            epochs,
            out,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let bench = Benchmark::prepare(&cfg)?;
            let result = harness::run_experiment(&bench, jobs.unwrap_or_else(harness::default_jobs))?;
            harness::emit_plot_data(&result, &cfg.out)?;
            for o in &result.outcomes {
                if let Some(why) = &o.diverged {
                    eprintln!("trial {} diverged at {why}", o.trial);
                }
            }
            print_summary(&[result.summary()]);
            eprintln!("wrote {}", cfg.out.display());
        }
        Command::Sweep { config_dir, jobs, out } => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&config_dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(PinnError::Usage(format!("no *.cfg files in {}", config_dir.display())));
            }
            let configs = paths.iter().map(|p| ExperimentConfig::load(p)).collect::<Result<Vec<_>>>()?;
            let rows = harness::run_sweep(&configs, jobs.unwrap_or_else(harness::default_jobs))?;
            let out = out.unwrap_or_else(|| config_dir.join("sweep-summary.csv"));
            std::fs::write(&out, harness::summary_csv(&rows))?;
            print_summary(&rows);
            eprintln!("wrote {}", out.display());
        }
        Command::Oracle {
            problem,
            out,
            config,
            nx,
            nt,
            nr,
        } => {
            let grid = match problem {
                OracleProblem::Burgers => {
                    match problem_from(config.as_deref(), ProblemConfig::Burgers(Burgers::default()))? {
                        ProblemConfig::Burgers(b) => oracle::solve_burgers(&b, nx, nt)?,
                        _ => return Err(PinnError::Usage("config does not describe a Burgers problem".into())),
                    }
                }
                OracleProblem::PbLinear => {
                    let fallback = ProblemConfig::Pb(PoissonBoltzmann::new(PbGeometry::default(), PbMode::Linearized)?);
                    match problem_from(config.as_deref(), fallback)? {
                        ProblemConfig::Pb(p) => oracle::solve_pb_linear_radial(&p.geometry, nr)?,
                        _ => return Err(PinnError::Usage("config does not describe a PB problem".into())),
                    }
                }
            };
            grid.save(&out)?;
            eprintln!("wrote {} ({} nodes, {})", out.display(), grid.values.len(), grid.solver);
        }
        Command::Eval { params, problem, config } => {
            let fallback = match problem {
                EvalProblem::Riccati => ProblemConfig::Riccati(Riccati::default()),
                EvalProblem::Burgers => ProblemConfig::Burgers(Burgers::default()),
                EvalProblem::Pb => ProblemConfig::Pb(PoissonBoltzmann::new(PbGeometry::default(), PbMode::Nonlinear)?),
            };
            let prob = problem_from(config.as_deref(), fallback)?;
            let p = ParamSet::load(&params)?;
            let set = harness::reference_test_set(&prob)?
                .ok_or_else(|| PinnError::Usage("no reference solution for this geometry".into()))?;
            let pred = set.predict(&p)?;
            println!("test_mse,{:?}", oracle::mse(&pred, &set.targets));
            println!("relative_l2,{:?}", relative_l2(&pred, &set.targets));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
