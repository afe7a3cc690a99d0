use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use shapenewton::optimize::{run, Termination};
use shapenewton::verify::{run_verify, VerifyOptions};

mod config;
mod output;

use config::{output_root, ConfigError, LoadedConfig};
use output::{termination_label, write_compare, write_run, CompareRow, Summary, Timing, COMPARE_FILE};

const EXIT_SOLVER: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "shapenewton", version, about = "Newton and gradient shape optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace, snapshots and manifest.
    Run { config: PathBuf },
    /// Run several experiments and tabulate their final values.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
    },
    /// Check the assembled derivatives against their oracles.
    Verify {
        /// Multiplies every kernel width used by the checks.
        #[arg(long, default_value_t = 1.0)]
        sigma_scale: f64,
        /// Also write every diagnostic row to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum RunError {
    Config(ConfigError),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(dir, e) => write!(f, "cannot write outputs to {}: {e}", dir.display()),
        }
    }
}

/// Loads, solves and writes one experiment.
fn execute(path: &Path) -> Result<Summary, RunError> {
    let loaded = LoadedConfig::load(path).map_err(RunError::Config)?;
    let shape = loaded.initial_shape().map_err(RunError::Config)?;
    let field = loaded.config.field.density();
    let started = chrono::Utc::now();
    let trace = run(&loaded.config.solver, &shape, &field)
        .map_err(|e| RunError::Config(ConfigError::Field { path: path.into(), field: "solver".into(), message: e.to_string() }))?;
    let timing = Timing { started, finished: chrono::Utc::now() };
    let dir = loaded.run_dir();
    write_run(&dir, path, &loaded.config, &trace, &timing).map_err(|e| RunError::Io(dir, e))
}

fn cmd_run(path: &Path) -> ExitCode {
    match execute(path) {
        Ok(summary) => {
            println!(
                "{} on {}: {} after {} iterations, |L|_inf {:e}, |f|_inf {:e}",
                summary.method,
                summary.test,
                termination_label(&summary.termination),
                summary.iterations,
                summary.linf_l,
                summary.linf_f_points
            );
            if matches!(summary.termination, Termination::Failed { .. }) {
                ExitCode::from(EXIT_SOLVER)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ RunError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}

fn cmd_compare(paths: &[PathBuf]) -> ExitCode {
    let results: Vec<Result<Summary, RunError>> = paths.par_iter().map(|p| execute(p)).collect();
    let mut failed = false;
    let rows: Vec<CompareRow> = paths
        .iter()
        .zip(results)
        .map(|(p, r)| match r {
            Ok(s) if !matches!(s.termination, Termination::Failed { .. }) => CompareRow::ok(p.clone(), &s),
            Ok(s) => {
                failed = true;
                CompareRow::failed(p.clone(), termination_label(&s.termination))
            }
            Err(e) => {
                failed = true;
                CompareRow::failed(p.clone(), e.to_string())
            }
        })
        .collect();
    for row in &rows {
        println!(
            "{:<8} {} {} {}",
            row.status,
            row.config.display(),
            row.method.as_deref().unwrap_or("-"),
            row.linf_l.map_or_else(|| row.termination.clone(), |l| format!("|L|_inf {l:e}"))
        );
    }
    let path = output_root(None).join(COMPARE_FILE);
    if let Err(e) = write_compare(&path, &rows) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::from(EXIT_SOLVER);
    }
    println!("wrote {}", path.display());
    if failed {
        ExitCode::from(EXIT_SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_verify(sigma_scale: f64, csv_path: Option<&Path>) -> ExitCode {
    if !(sigma_scale > 0.0 && sigma_scale.is_finite()) {
        eprintln!("error: --sigma-scale must be positive, got {sigma_scale}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let options = VerifyOptions { sigma_scale, ..VerifyOptions::default() };
    let report = match run_verify(&options) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    };
    for check in &report.checks {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.summary);
    }
    if let Some(path) = csv_path {
        let written = csv::Writer::from_path(path).and_then(|mut w| {
            for row in report.rows() {
                w.serialize(row)?;
            }
            w.flush().map_err(csv::Error::from)
        });
        if let Err(e) = written {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_SOLVER);
        }
    }
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SOLVER)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Compare { configs } => cmd_compare(configs),
        Command::Verify { sigma_scale, csv } => cmd_verify(*sigma_scale, csv.as_deref()),
    }
}
