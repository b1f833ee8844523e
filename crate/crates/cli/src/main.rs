use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gossipgd_cli::commands::{cmd_explore_m, cmd_grid, cmd_rates, cmd_run, cmd_validate, Axis};
use gossipgd_cli::config::{build, Mode, RunConfig};
use gossipgd_cli::CliError;

#[derive(Parser)]
#[command(name = "gossipgd", version, about = "Decentralized gradient method with multi-round gossip")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its error trace as CSV.
    Run {
        config: PathBuf,
        /// Execution path; overrides the config.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// CSV destination; overrides the config. `-` for stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Overrides the iteration count of the config.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Communication rounds per iteration over a (rho, sigma) grid.
    Grid(GridArgs),
    /// Per-step convergence rate rho^(1/m) over a (rho, sigma) grid.
    Rates(GridArgs),
    /// Check the assumptions of a config; exits 1 if any check fails.
    Validate { config: PathBuf },
    /// Evaluate the m expression for every r >= rho, s >= sigma on a grid.
    ExploreM {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0.99)]
        r_max: f64,
        #[arg(long, default_value_t = 0.99)]
        s_max: f64,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct GridArgs {
    /// `lo:hi` or a comma-separated list, inside (0, 1).
    #[arg(long, default_value = "0.05:0.95")]
    rho: Axis,
    #[arg(long, default_value = "0.05:0.95")]
    sigma: Axis,
    /// Points per `lo:hi` axis.
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(io::stdout().lock())),
    }
}

fn to_stdout(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p == Path::new("-"))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, mode, output, iterations } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.run.mode = m;
            }
            if let Some(o) = output {
                cfg.run.output = Some(o);
            }
            if let Some(k) = iterations {
                cfg.run.iterations = k;
            }
            let exp = build(&cfg)?;
            let summary = cmd_run(&exp, sink(exp.output.as_deref())?)?;
            if to_stdout(exp.output.as_deref()) {
                eprintln!("{summary}");
            } else {
                println!("{summary}");
            }
            Ok(())
        }
        Command::Grid(a) => cmd_grid(&a.rho, &a.sigma, a.resolution, sink(a.output.as_deref())?),
        Command::Rates(a) => cmd_rates(&a.rho, &a.sigma, a.resolution, sink(a.output.as_deref())?),
        Command::Validate { config } => {
            let exp = build(&RunConfig::load(&config)?)?;
            let report = cmd_validate(&exp)?;
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                let failed = report.checks.iter().filter(|c| !c.passed).count();
                Err(CliError::Validation(format!("{failed} check(s) failed")))
            }
        }
        Command::ExploreM { rho, sigma, r_max, s_max, resolution, output } => {
            let (corner, smallest) = cmd_explore_m(rho, sigma, r_max, s_max, resolution, sink(output.as_deref())?)?;
            eprintln!("m at (r, s) = ({rho}, {sigma}): {corner}; smallest on grid: {smallest}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
