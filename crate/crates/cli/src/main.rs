//! `dosefind`: decision tables, trial simulation, theorem verification and
//! single decisions for phase I dose-finding designs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dosefind", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Txt,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (overrides output.formats).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a decision table for every configured interval design.
    Table {
        #[command(flatten)]
        common: Common,
        /// Largest sample size in the table (defaults to trial.max_n).
        #[arg(long)]
        max_n: Option<u32>,
    },
    /// Simulate trials and write operating characteristics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Master seed; wins over the SEED variable and sim.seed.
        #[arg(long, env = "SEED")]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the equivalence checks and write a certificate.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Seed for the random Int-CRM histories.
        #[arg(long, env = "SEED")]
        seed: Option<u64>,
    },
    /// Print one decision: E/S/D for local designs, a 1-based dose for CRM-type designs.
    Decide {
        /// mtpi, mtpi2, boin, ccd, i3p3, intcrm or crm.
        design: String,
        /// Patients treated at the current dose.
        n: Option<u32>,
        /// DLTs among them.
        y: Option<u32>,
        /// Patient history, one `dose,dlt` line per patient (doses from 1).
        #[arg(long)]
        history: Option<PathBuf>,
        /// Number of doses for a history.
        #[arg(long)]
        doses: Option<usize>,
        /// Take design parameters from the matching [[design]] entry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
