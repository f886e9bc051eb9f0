//! Experiment runner for gauge-invariant quantum thermodynamics.
//!
//! Exit codes: 0 success, 1 property violation, 2 configuration error,
//! 3 numerical validation failure.

mod checks;
mod config;
mod error;
mod format;
mod run;
mod third_law;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use error::{CliError, CliResult};
use verify::Suite;

#[derive(Parser)]
#[command(name = "gauge-thermo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a protocol from its thermal state; write ledger.csv and report.json.
    Run {
        /// TOML config, or a previous report.json.
        #[arg(long)]
        config: PathBuf,
        /// Overrides `outputs` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a fuzz suite over random protocols and print a JSON report.
    Verify {
        #[arg(value_enum)]
        suite_name: Option<Suite>,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to DIR/verify_<suite>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan the gauge-invariant entropy down to zero temperature; write third_law.csv.
    ThirdLaw {
        /// Matrix file, or a config whose Hamiltonian does not depend on time.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(config: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(out) = out {
        cfg.outputs = out;
    }
    let done = run::cmd_run(&cfg)?;
    for f in &done.files {
        println!("wrote {}", f.display());
    }
    let r = &done.report;
    println!(
        "integration tolerance {:.3e}; final w_u {:.9}, s_gt {:.9}, c_rel {:.9}, s_gamma {:.9}",
        r.integration.estimate.estimate,
        r.final_values.w_u,
        r.final_values.s_gt,
        r.final_values.c_rel,
        r.final_values.s_gamma
    );
    Ok(())
}

fn verify(
    positional: Option<Suite>,
    flag: Option<Suite>,
    cases: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let suite = match (positional, flag) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(
                "suite given twice with different values".into(),
            ))
        }
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => return Err(CliError::Config("missing suite name".into())),
    };
    let report = verify::cmd_verify(suite, cases, seed)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let name = format!(
            "verify_{}.json",
            suite.to_possible_value().expect("named").get_name()
        );
        let path = dir.join(name);
        std::fs::write(&path, &json).map_err(|e| CliError::io(&path, e))?;
    }
    print!("{json}");
    let failures = verify::failure_lines(&report);
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("{f}");
        }
        Err(CliError::Violation(format!(
            "{} of {} cases failed",
            failures.len(),
            report.cases
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Verify {
            suite_name,
            suite,
            cases,
            seed,
            out,
        } => verify(suite_name, suite, cases, seed, out),
        Command::ThirdLaw { config, out } => {
            third_law::cmd_third_law(&config, out.as_deref()).map(|(path, r)| {
                println!("wrote {}", path.display());
                println!(
                    "n0 = {}, s_gt = {:.9} at beta = {:.3e}, ln n0 = {:.9}",
                    r.ground_multiplicity, r.final_s_gt, r.final_beta, r.limit_ln_n0
                );
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
