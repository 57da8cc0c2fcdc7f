use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gotensor::sim::GridSpec;
use gotensor_cli::commands::{self, Outcome, PolicyChoice, Run};
use gotensor_cli::scenario_file::{Algorithm, Scenario, ScenarioFile};
use gotensor_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "gotensor", version, about = "Goal-oriented sampling and actuation co-design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file; the built-in scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seed for the solver restarts and the simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Convergence tolerance of every solver.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for a joint policy and write report.txt and policy.json.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
    },
    /// Simulate one policy and write trace.csv and summary.txt.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        horizon: Option<u64>,
        /// got, uniform:N, age:N, change-aware, aoii or mse.
        #[arg(long, default_value = "got", conflicts_with = "policy_file")]
        policy: String,
        /// policy.json written by `solve`.
        #[arg(long)]
        policy_file: Option<PathBuf>,
    },
    /// Sampling rate against average cost for every policy family.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        horizon: Option<u64>,
        /// Exact evaluation instead of simulation.
        #[arg(long)]
        analytic: bool,
    },
    /// Co-design against the baselines over a (pS, CS) grid.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
        /// For example `pS=0.2:1.0:0.2;CS=0,5,10`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// JESP against brute force over a (pS, CS) grid.
    Gap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<String>,
    },
    /// Check a scenario file.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Write the built-in scenario.
    Scenario {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Option<PathBuf>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::built_in()),
    }
}

fn run_for(common: &Common, algorithm: Option<Algorithm>, horizon: Option<u64>) -> Result<(Run, Algorithm)> {
    let mut scenario = load(&common.scenario)?;
    let file = &mut scenario.file;
    if let Some(seed) = common.seed {
        file.solver.seed = seed;
        file.simulation.seed = seed;
    }
    if let Some(eps) = common.epsilon {
        file.solver.epsilon = eps;
    }
    if let Some(h) = horizon {
        file.simulation.horizon = h;
    }
    let algorithm = algorithm.unwrap_or(file.solver.algorithm);
    file.solver.algorithm = algorithm;
    let run = Run {
        scenario,
        out: common.out.clone(),
        command_line: std::env::args().collect(),
    };
    Ok((run, algorithm))
}

fn grid_for(run: &Run, spec: &Option<String>) -> Result<GridSpec> {
    let defaults = run.scenario.file.grid();
    match spec {
        Some(s) => GridSpec::parse(s, &defaults).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(defaults),
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Solve { common, algorithm } => {
            let (run, algorithm) = run_for(&common, algorithm, None)?;
            commands::solve(&run, algorithm)
        }
        Command::Simulate {
            common,
            algorithm,
            horizon,
            policy,
            policy_file,
        } => {
            let (run, algorithm) = run_for(&common, algorithm, horizon)?;
            let choice = match policy_file {
                Some(p) => PolicyChoice::File(p),
                None => PolicyChoice::parse(&policy)?,
            };
            commands::simulate(&run, &choice, algorithm)
        }
        Command::Sweep {
            common,
            algorithm,
            horizon,
            analytic,
        } => {
            let (run, algorithm) = run_for(&common, algorithm, horizon)?;
            commands::sweep(&run, analytic, algorithm)
        }
        Command::Compare { common, algorithm, grid } => {
            let (run, algorithm) = run_for(&common, algorithm, None)?;
            let grid = grid_for(&run, &grid)?;
            commands::compare(&run, &grid, algorithm)
        }
        Command::Gap { common, grid } => {
            let (run, _) = run_for(&common, None, None)?;
            let grid = grid_for(&run, &grid)?;
            commands::gap(&run, &grid)
        }
        Command::Validate { scenario } => commands::validate(&load(&scenario)?),
        Command::Scenario { out } => {
            std::fs::write(&out, ScenarioFile::paper_like().to_toml()).map_err(|e| CliError::io(&out, e))?;
            Ok(Outcome {
                summary: format!("wrote {}", out.display()),
                ..Outcome::default()
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.failures {
                eprintln!("failed: {f}");
            }
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
