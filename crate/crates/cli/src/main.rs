//! `lw`: check, run, enumerate, conformance-test and serve widget programs.
//!
//! Exit codes: 0 success, 1 domain failure, 2 environment failure.

mod commands;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lwidget_core::runtime::TiePolicy;

#[derive(Parser)]
#[command(name = "lw", version, about = "Toolchain for the linear widget calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck a program and print its type table.
    Check {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also print the typing derivation of this definition.
        #[arg(long)]
        derivation: Option<String>,
    },
    /// Run the entry definition against a stimulus trace.
    Run {
        file: PathBuf,
        /// JSON-lines trace, one stimulus per line.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 16)]
        horizon: u64,
        /// left, right or seed:N.
        #[arg(long, default_value = "seed:0")]
        tie: TiePolicy,
        /// Run this definition instead of the declared entry.
        #[arg(long)]
        entry: Option<String>,
    },
    /// Enumerate every outcome of the entry definition up to a horizon.
    Enumerate {
        file: PathBuf,
        #[arg(long, default_value_t = 16)]
        horizon: u64,
        #[arg(long)]
        entry: Option<String>,
        /// Give up after this many evaluation branches.
        #[arg(long, default_value_t = lwidget_core::semantics::DEFAULT_BRANCH_LIMIT)]
        limit: usize,
    },
    /// Check that every realizable run lies in the enumerated outcome set.
    Conform {
        /// A program file or a directory of `.lw` files.
        path: PathBuf,
        #[arg(long, default_value_t = 16)]
        horizon: u64,
        #[arg(long, default_value_t = lwidget_core::semantics::DEFAULT_BRANCH_LIMIT)]
        limit: usize,
    },
    /// Serve interactive sessions as newline-delimited JSON over TCP.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Horizon for sessions whose load message names none.
        #[arg(long, default_value_t = 16)]
        horizon: u64,
        #[arg(long, default_value = "seed:0")]
        tie: TiePolicy,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let code = match cli.command {
        Command::Check { file, format, derivation } => commands::check(&file, format, derivation.as_deref(), &mut out, &mut err),
        Command::Run { file, trace, horizon, tie, entry } => commands::run(&file, &trace, horizon, tie, entry.as_deref(), &mut out, &mut err),
        Command::Enumerate { file, horizon, entry, limit } => commands::enumerate(&file, horizon, entry.as_deref(), limit, &mut out, &mut err),
        Command::Conform { path, horizon, limit } => commands::conform(&path, horizon, limit, &mut out, &mut err),
        Command::Serve { port, host, horizon, tie } => serve::serve(&host, port, horizon, tie, &mut err),
    };
    ExitCode::from(code as u8)
}
