//! Batch runner: `homoflow <check|simulate|homogenize|sweep> --config <path> [--out <path>]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use homoflow::config::{keys_help, ExperimentConfig};
use homoflow::runner::{run_check, run_homogenize, run_simulate, run_sweep, CsvTable};
use homoflow::Error;

#[derive(Parser)]
#[command(name = "homoflow", version, about = "Homogenization experiments for oscillating transport fields")]
#[command(after_long_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Io {
    /// Experiment config file
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (defaults to output.path, else stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Invariant suite for every eps in eps_list; exits 1 if any invariant fails
    #[command(after_long_help = keys_help())]
    Check(Io),
    /// Sample the eps-solution on a spacetime grid
    #[command(after_long_help = keys_help())]
    Simulate(Io),
    /// Effective coefficients of the configured family
    #[command(after_long_help = keys_help())]
    Homogenize(Io),
    /// Weak and strong convergence over eps_list
    #[command(after_long_help = keys_help())]
    Sweep(Io),
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn write(table: &CsvTable, io: &Io, cfg: &ExperimentConfig) -> Result<(), Error> {
    let bytes = table.to_bytes()?;
    match io.out.clone().or_else(|| cfg.output_path.as_ref().map(PathBuf::from)) {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    let io = match &cli.command {
        Command::Check(io) | Command::Simulate(io) | Command::Homogenize(io) | Command::Sweep(io) => io,
    };
    let text = std::fs::read_to_string(&io.config).map_err(|e| Error::Config {
        line: 0,
        key: String::new(),
        message: format!("cannot read {}: {e}", io.config.display()),
    })?;
    let cfg = ExperimentConfig::parse(&text)?;
    match &cli.command {
        Command::Check(_) => {
            let out = run_check(&cfg)?;
            write(&out.table, io, &cfg)?;
            Ok(if out.all_pass { 0 } else { EXIT_INVARIANT })
        }
        Command::Simulate(_) => write(&run_simulate(&cfg)?, io, &cfg).map(|_| 0),
        Command::Homogenize(_) => write(&run_homogenize(&cfg)?, io, &cfg).map(|_| 0),
        Command::Sweep(_) => write(&run_sweep(&cfg)?, io, &cfg).map(|_| 0),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("homoflow: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
