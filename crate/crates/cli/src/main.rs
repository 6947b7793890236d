mod commands;
mod config;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use commands::{Dumps, Run, RunError, SolvePlan};
use config::load;
use report::Report;

/// Runs weight, Cauchy transform, homotopy and solver experiments from TOML configs.
#[derive(Parser, Debug)]
#[command(name = "dolbeault-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weights k, k̃ and their decomposition against enumeration.
    Weights(Common),
    /// Weighted Cauchy area transform against closed forms.
    Cauchy(Common),
    /// Kernel integral bounds with a fitted constant.
    Kernel(Common),
    /// Homotopy identities over a resolution sweep.
    Homotopy(Common),
    /// Weighted dbar solver.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Writes the solution at the finest level as CSV.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Writes every stage form at the finest level into this directory.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Weighted norms over a refinement sweep.
    Norms(Common),
    /// Empirical operator norms over a seeded test family.
    Opnorm(Common),
    /// Membership witnesses for (p, s) pairs.
    Witness(Common),
    /// Solver target norms across a list of epsilon values.
    Sweep(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Weights(_) => "weights",
            Command::Cauchy(_) => "cauchy",
            Command::Kernel(_) => "kernel",
            Command::Homotopy(_) => "homotopy",
            Command::Solve { .. } => "solve",
            Command::Norms(_) => "norms",
            Command::Opnorm(_) => "opnorm",
            Command::Witness(_) => "witness",
            Command::Sweep(_) => "sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Weights(c)
            | Command::Cauchy(c)
            | Command::Kernel(c)
            | Command::Homotopy(c)
            | Command::Norms(c)
            | Command::Opnorm(c)
            | Command::Witness(c)
            | Command::Sweep(c) => c,
            Command::Solve { common, .. } => common,
        }
    }
}

fn dispatch(cmd: &Command, text: &str) -> Run<(Report, u64)> {
    let kind = cmd.name();
    let flag = cmd.common().seed;
    macro_rules! body {
        ($t:ty) => {{
            let loaded = load::<$t>(text, kind)?;
            (loaded.body, flag.or(loaded.seed).unwrap_or(0))
        }};
    }
    Ok(match cmd {
        Command::Weights(_) => {
            let (c, seed) = body!(config::WeightsConfig);
            (commands::weights(&c)?, seed)
        }
        Command::Cauchy(_) => {
            let (c, seed) = body!(config::CauchyConfig);
            (commands::cauchy(&c, seed)?, seed)
        }
        Command::Kernel(_) => {
            let (c, seed) = body!(config::KernelConfig);
            (commands::kernel(&c)?, seed)
        }
        Command::Homotopy(_) => {
            let (c, seed) = body!(config::HomotopyConfig);
            (commands::homotopy(&c)?, seed)
        }
        Command::Solve { field, trace, .. } => {
            let (c, seed) = body!(config::SolveFile);
            if c.epsilons.is_some() {
                return Err(config::UsageError::new("epsilons", "only used by the sweep subcommand").into());
            }
            let dumps = Dumps {
                field: field.clone(),
                trace: trace.clone(),
            };
            (commands::solve_cmd(&SolvePlan::parse(&c)?, &dumps)?, seed)
        }
        Command::Norms(_) => {
            let (c, seed) = body!(config::NormsConfig);
            (commands::norms(&c)?, seed)
        }
        Command::Opnorm(_) => {
            let (c, seed) = body!(config::OpnormConfig);
            (commands::opnorm(&c, seed)?, seed)
        }
        Command::Witness(_) => {
            let (c, seed) = body!(config::WitnessConfig);
            (commands::witness(&c)?, seed)
        }
        Command::Sweep(_) => {
            let (c, seed) = body!(config::SolveFile);
            if c.epsilons.is_none() {
                return Err(config::UsageError::new("epsilons", "missing list of epsilon values").into());
            }
            (commands::sweep_cmd(&SolvePlan::parse(&c)?)?, seed)
        }
    })
}

fn emit(report: &Report, cmd: &Command, text: &str, seed: u64) -> io::Result<()> {
    let common = cmd.common();
    match &common.out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path)?);
            report.write(&mut f, cmd.name(), text.as_bytes(), seed)?;
            f.flush()
        }
        None => report.write(io::stdout().lock(), cmd.name(), text.as_bytes(), seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let common = cli.command.common();
    let text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::from(2);
        }
    };
    let (report, seed) = match dispatch(&cli.command, &text) {
        Ok(r) => r,
        Err(e @ RunError::Usage(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = emit(&report, &cli.command, &text, seed) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(1);
    }
    eprintln!(
        "{}: {} rows, {} failed checks, {:.2} s",
        cli.command.name(),
        report.rows.len(),
        report.failures.len(),
        started.elapsed().as_secs_f64()
    );
    for f in &report.failures {
        eprintln!("FAILED {f}");
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
