//! `extbin`: build, damage, decode and verify extended binomial codes.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or IO error,
//! 2 on a usage error. `EXTBIN_WORKERS` caps the worker thread count.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use commands::{CmdError, Output};
use config::{Format, Options};

#[derive(Parser, Debug)]
#[command(name = "extbin", version, about = "Extended binomial code workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with default options (flags take precedence)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Mean excitations of binomial, qubit and extended binomial codewords
    Table1,
    /// Print one codeword
    Codeword,
    /// Knill-Laflamme, logical-algebra and decoder suites
    Verify,
    /// Residual and recovery-infidelity slopes over a γ grid
    Scaling,
    /// Syndrome extraction for one pattern, or an exhaustive decoder sweep
    Syndrome,
    /// Measurement-based encoding of a physical qubit
    Encode,
    /// Overlap under free evolution e^{-i n Δt}
    Cc,
    /// Code orders reachable under a critical excitation number
    Budget,
}

fn run(command: Command, opts: &Options) -> Result<Output, CmdError> {
    match command {
        Command::Table1 => commands::table1(opts),
        Command::Codeword => commands::codeword_cmd(opts),
        Command::Verify => commands::verify(opts),
        Command::Scaling => commands::scaling(opts),
        Command::Syndrome => commands::syndrome(opts),
        Command::Encode => commands::encode(opts),
        Command::Cc => commands::cc(opts),
        Command::Budget => commands::budget(opts),
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
    ExitCode::from(2)
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var("EXTBIN_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("EXTBIN_WORKERS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_workers() {
        return usage_error(&msg);
    }
    let opts = match &cli.config {
        Some(path) => match Options::from_file(path) {
            Ok(file) => cli.options.clone().or(file),
            Err(msg) => return usage_error(&msg),
        },
        None => cli.options.clone(),
    };
    let output = match run(cli.command, &opts) {
        Ok(o) => o,
        Err(CmdError::Usage(msg)) => return usage_error(&msg),
        Err(CmdError::Run(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let bytes = match opts.format() {
        Format::Json => output.report.to_json(),
        Format::Csv => Ok(output.csv),
    };
    let written = bytes.and_then(|b| extbin_core::report::emit(&b, opts.out.as_deref()));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if output.report.pass {
        ExitCode::SUCCESS
    } else {
        for c in output.report.results["checks"]
            .as_array()
            .into_iter()
            .flatten()
        {
            if c["pass"] == false {
                eprintln!(
                    "check failed: {} = {} (tolerance {})",
                    c["name"], c["value"], c["tolerance"]
                );
            }
        }
        ExitCode::from(1)
    }
}
