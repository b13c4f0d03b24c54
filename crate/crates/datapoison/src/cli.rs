//! Command-line front end. Output goes to caller-supplied writers so the
//! whole surface can be exercised in tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::campaign::{self, check_golden, format_sweep_table, parse_values, Summary, SweepParam};
use crate::scenario::{load_scenario, Scenario};
use crate::tracefile::write_trace_file;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "datapoison",
    version,
    about = "Fault injection for a self-stabilizing token ring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and print its privilege snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Writes a JSONL trace here, overriding the scenario's trace_path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Suppresses the summary.
        #[arg(long)]
        quiet: bool,
    },
    /// Compare the fault-free five-node ring with the known output.
    Check,
    /// Repeat a scenario over a list of parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// "rate" or "transient_uses"
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 10)]
        reps: u64,
    },
}

/// Parses `args` (program name first) and runs the command.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            trace,
            quiet,
        } => cmd_run(&config, seed, trace, quiet, out, err),
        Command::Check => cmd_check(out, err),
        Command::Sweep {
            config,
            param,
            values,
            reps,
        } => cmd_sweep(&config, &param, &values, reps, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn config_error(e: impl ToString) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

fn runtime_error(e: impl ToString) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    }
}

/// A relative trace path in a scenario file is taken relative to that file.
fn resolve_trace(config: &Path, scenario: &Scenario, flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| {
        scenario.trace_path.as_ref().map(|p| {
            if p.is_relative() {
                config.parent().unwrap_or(Path::new("")).join(p)
            } else {
                p.clone()
            }
        })
    })
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    trace: Option<PathBuf>,
    quiet: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut scenario = load_scenario(config).map_err(config_error)?;
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    let trace = resolve_trace(config, &scenario, trace);
    let record = campaign::execute(&scenario).map_err(runtime_error)?;
    for s in &record.snapshots {
        writeln!(out, "{}", s.line).map_err(runtime_error)?;
    }
    if let Some(path) = &trace {
        write_trace_file(path, &record)
            .map_err(|e| runtime_error(format!("{}: {e}", path.display())))?;
    }
    if !quiet {
        write!(err, "{}", Summary::of(&record)).map_err(runtime_error)?;
        if let Some(path) = &trace {
            writeln!(err, "trace: {}", path.display()).map_err(runtime_error)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_check(out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let record = campaign::execute(&Scenario::fault_free_reference()).map_err(runtime_error)?;
    let lines: Vec<&str> = record.snapshots.iter().map(|s| s.line.as_str()).collect();
    match check_golden(&lines) {
        Ok(()) => {
            writeln!(
                out,
                "ok: first {} lines match ({} snapshots)",
                campaign::GOLDEN_PREFIX.len(),
                lines.len()
            )
            .map_err(runtime_error)?;
            Ok(EXIT_OK)
        }
        Err(mismatch) => {
            let _ = writeln!(err, "mismatch: {mismatch}");
            Ok(EXIT_MISMATCH)
        }
    }
}

fn cmd_sweep(
    config: &Path,
    param: &str,
    values: &str,
    reps: u64,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let scenario = load_scenario(config).map_err(config_error)?;
    let param: SweepParam = param.parse().map_err(config_error)?;
    let values = parse_values(param, values).map_err(config_error)?;
    let rows = campaign::sweep(&scenario, &values, reps).map_err(|e| Failure {
        code: if e.is_config() {
            EXIT_CONFIG
        } else {
            EXIT_RUNTIME
        },
        message: e.to_string(),
    })?;
    out.write_all(format_sweep_table(&rows).as_bytes())
        .map_err(runtime_error)?;
    Ok(EXIT_OK)
}
