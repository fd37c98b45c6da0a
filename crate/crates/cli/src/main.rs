//! `bsalign` command-line driver.

mod align;
mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use bsalign::oracle::{run_checks, OracleOptions};
use bsalign::submodel::{joint_entropy, TemperedGrid};
use bsalign::AlignError;
use clap::{Parser, Subcommand};

use crate::config::{pam_values, parse_grid, AlignArgs, GridSpec, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable input file (exit 2).
    Input(String),
    /// Invalid option value (exit 2).
    Usage(String),
    /// Anything that fails after the inputs were accepted (exit 1).
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Usage(m) | CliError::Run(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "bsalign", version, about = "Bayesian pairwise protein structure alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior over alignments of two C-alpha traces.
    Align(AlignArgs),
    /// Tabulate joint entropies of tempered PAM models.
    Entropy {
        #[arg(long, value_parser = parse_grid, default_value = "100:300:10")]
        pam_grid: GridSpec,
        #[arg(long, value_parser = parse_grid, default_value = "0:1:0.1")]
        eta_grid: GridSpec,
        /// Directory receiving entropy.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Check the dynamic programming and sampler against brute-force enumeration.
    Oracle {
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        #[arg(long, default_value_t = 5)]
        max_m: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, hide = true)]
        flip_gap_sign: bool,
    },
}

fn cmd_entropy(pam: &GridSpec, eta: &GridSpec, out: &std::path::Path) -> Result<(), CliError> {
    let ks = pam_values(pam)?;
    let etas = eta.values()?;
    if etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(CliError::Usage("tempering exponents must lie in [0, 1]".into()));
    }
    let grid = TemperedGrid::new(&ks, &etas).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Run(format!("cannot create {}: {e}", out.display())))?;

    let mut csv = String::from("k");
    let mut table = String::from("entropy (bits)\n     k");
    for e in &etas {
        let _ = write!(csv, ",{e}");
        let _ = write!(table, " {:>7}", format!("{e:.2}"));
    }
    csv.push('\n');
    table.push('\n');
    for (i, k) in ks.iter().enumerate() {
        let _ = write!(csv, "{k}");
        let _ = write!(table, "{k:>6}");
        for j in 0..etas.len() {
            let h = joint_entropy(grid.get(i, j));
            let _ = write!(csv, ",{h}");
            let _ = write!(table, " {:>7.3}", h / std::f64::consts::LN_2);
        }
        csv.push('\n');
        table.push('\n');
    }
    output::write_atomic(out, "entropy.csv", &csv)?;
    print!("{table}");
    Ok(())
}

fn cmd_oracle(opts: &OracleOptions) -> Result<(), CliError> {
    let results = run_checks(opts).map_err(|e| match e {
        AlignError::Refused(m) => CliError::Usage(m),
        other => CliError::Run(other.to_string()),
    })?;
    let mut failed = Vec::new();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Run(format!("failed: {}", failed.join("; "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Align(args) => RunConfig::from_args(args).and_then(|cfg| align::cmd_align(&cfg)),
        Command::Entropy { pam_grid, eta_grid, out } => cmd_entropy(pam_grid, eta_grid, out),
        Command::Oracle { max_n, max_m, seed, flip_gap_sign } => cmd_oracle(&OracleOptions {
            max_n: *max_n,
            max_m: *max_m,
            seed: *seed,
            flip_gap_sign: *flip_gap_sign,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
