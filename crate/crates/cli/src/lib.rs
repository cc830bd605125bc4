//! The `irqueue` command: run, explore, fuzz and check scenarios of the
//! interrupt-reentrant queue on a simulated single CPU.
//!
//! Exit status is 0 when everything checked out, 1 when an invariant failed
//! (a reproducing schedule is printed) and 2 for usage, parse or validation
//! errors, which are reported on one line of stderr.

pub mod scenario_file;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use irqueue_sim::{
    check_trace, explore, fuzz, read_trace, run_schedule_with, Basis, CheckError, ExploreConfig,
    FuzzConfig, Halt, ReorderSummary, RunError, RunTally, Schedule, Trace, DEFAULT_MAX_STEPS,
};
use thiserror::Error;

use crate::scenario_file::ScenarioFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "irqueue", version, about = "Simulate the interrupt-reentrant queue on one CPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute one schedule, then print the drain order and reorder summary.
    Run {
        scenario: PathBuf,
        /// File of schedule tokens; overrides any schedule in the scenario.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Write the line-delimited JSON trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
    },
    /// Enumerate every legal preemption schedule.
    Explore {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
    },
    /// Run seeded random schedules.
    Fuzz {
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        iters: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
    },
    /// Replay a trace file and re-verify it.
    Check { trace: PathBuf },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Entry point shared by the binary and the tests.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{first}");
            return EXIT_USAGE;
        }
    };
    let mut text = String::new();
    let result = match cli.command {
        Command::Run {
            scenario,
            schedule,
            trace,
            max_steps,
        } => cmd_run(&scenario, schedule.as_deref(), trace.as_deref(), max_steps, &mut text),
        Command::Explore {
            scenario,
            max_steps,
        } => cmd_explore(&scenario, max_steps, &mut text),
        Command::Fuzz {
            scenario,
            seed,
            iters,
            max_steps,
        } => cmd_fuzz(&scenario, seed, iters, max_steps, &mut text),
        Command::Check { trace } => cmd_check(&trace, &mut text),
    };
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(code) => code,
        Err(CliError::Usage(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let file = scenario_file::parse(&read(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    file.scenario
        .validate()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(file)
}

fn load_schedule(path: &Path) -> Result<Schedule, CliError> {
    let text = read(path)?;
    let tokens: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect();
    tokens
        .join(" ")
        .parse()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn status(clean: bool) -> i32 {
    if clean {
        EXIT_OK
    } else {
        EXIT_FAILURES
    }
}

fn displacements(trace: &Trace, basis: Basis) -> Option<String> {
    let report = trace.measure_reorder().ok()?;
    let parts: Vec<String> = report
        .placements
        .iter()
        .map(|p| format!("{} {:+}", trace.label(p.node), p.displacement(basis)))
        .collect();
    Some(parts.join(", "))
}

fn cmd_run(
    path: &Path,
    schedule_file: Option<&Path>,
    trace_path: Option<&Path>,
    max_steps: usize,
    out: &mut String,
) -> Result<i32, CliError> {
    let file = load_scenario(path)?;
    let schedule = match schedule_file {
        Some(p) => load_schedule(p)?,
        None => file.schedule.clone().unwrap_or_default(),
    };
    let trace = run_schedule_with(&file.scenario, &schedule, max_steps).map_err(|e| match e {
        RunError::Schedule { .. } => usage(format!("schedule does not fit the scenario: {e}")),
        RunError::Scenario(e) => usage(format!("{}: {e}", path.display())),
    })?;
    if let Some(p) = trace_path {
        let mut f = io::BufWriter::new(fs::File::create(p)?);
        trace.write_jsonl(&mut f)?;
        f.flush()?;
    }

    let _ = writeln!(out, "schedule: {}", trace.schedule);
    let _ = writeln!(out, "steps: {}", trace.steps);
    if trace.drained {
        let _ = writeln!(out, "drain order: {}", trace.delivered().join(" "));
    } else {
        let _ = writeln!(out, "dequeued: {}", trace.delivered().join(" "));
    }
    for basis in Basis::ALL {
        if let Some(line) = displacements(&trace, basis) {
            let _ = writeln!(out, "displacement ({}): {line}", basis.name());
        }
    }
    let stalled: Vec<&str> = trace.stalled.iter().map(|&n| trace.label(n)).collect();
    let _ = writeln!(
        out,
        "stalled: {}",
        if stalled.is_empty() {
            "none".to_string()
        } else {
            stalled.join(" ")
        }
    );
    let _ = writeln!(out, "max_V_steps: {}", trace.max_v_steps);
    if trace.halt == Some(Halt::Livelock) {
        let _ = writeln!(out, "livelock suspect: step budget of {max_steps} exhausted");
    }
    let _ = writeln!(out, "failures: {}", trace.failures.len());
    for f in &trace.failures {
        let _ = writeln!(out, "failure: {f}");
    }
    let clean = trace.failures.is_empty() && trace.halt.is_none();
    if !clean {
        let _ = writeln!(out, "reproduce with schedule: {}", trace.schedule);
    }
    Ok(status(clean))
}

fn write_reorder(out: &mut String, summary: &ReorderSummary) {
    let hist = |h: &std::collections::BTreeMap<usize, u64>| {
        let parts: Vec<String> = h.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        parts.join(" ")
    };
    let _ = writeln!(
        out,
        "reorder (completion): max |d| {}, reordered runs {}, histogram {}",
        summary.max_abs_completion,
        summary.reordered_runs,
        hist(&summary.histogram_completion)
    );
    let _ = writeln!(
        out,
        "reorder (arrival): max |d| {}, histogram {}",
        summary.max_abs_arrival,
        hist(&summary.histogram_arrival)
    );
}

fn write_tally(out: &mut String, tally: &RunTally) {
    let _ = writeln!(out, "failures: {}", tally.failure_count());
    let _ = writeln!(out, "livelock_suspects: {}", tally.livelocks);
    let _ = writeln!(out, "max_V_steps: {}", tally.max_v_steps);
    let _ = writeln!(out, "total_steps: {}", tally.total_steps);
    let _ = writeln!(out, "stalled_runs: {}", tally.stall_runs);
    let _ = writeln!(out, "isolated_frames_checked: {}", tally.isolated_checked);
    write_reorder(out, &tally.reorder);
}

fn cmd_explore(path: &Path, max_steps: usize, out: &mut String) -> Result<i32, CliError> {
    let file = load_scenario(path)?;
    let config = ExploreConfig {
        max_steps,
        ..ExploreConfig::default()
    };
    let report = explore(&file.scenario, config).map_err(|e| usage(e.to_string()))?;
    let _ = writeln!(out, "schedules_visited: {}", report.schedules_visited);
    write_tally(out, &report.tally);
    for found in &report.tally.failures {
        let _ = writeln!(out, "failure: {}", found.failure);
        let _ = writeln!(out, "  schedule: {}", found.schedule);
    }
    for suspect in &report.tally.livelock_suspects {
        let _ = writeln!(out, "livelock suspect schedule: {suspect}");
    }
    Ok(status(report.is_clean()))
}

fn cmd_fuzz(
    path: &Path,
    seed: u64,
    iters: u64,
    max_steps: usize,
    out: &mut String,
) -> Result<i32, CliError> {
    let file = load_scenario(path)?;
    let config = FuzzConfig {
        max_steps,
        ..FuzzConfig::new(seed, iters)
    };
    let report = fuzz(&file.scenario, config).map_err(|e| usage(e.to_string()))?;
    let _ = writeln!(out, "seed: {}", report.seed);
    let _ = writeln!(out, "iterations: {}", report.iterations);
    write_tally(out, &report.tally);
    let _ = writeln!(out, "fingerprint: {:016x}", report.fingerprint);
    for (found, index) in report.tally.failures.iter().zip(&report.failure_iterations) {
        let _ = writeln!(out, "failure (seed {seed}, index {index}): {}", found.failure);
        let _ = writeln!(out, "  schedule: {}", found.schedule);
    }
    for suspect in &report.tally.livelock_suspects {
        let _ = writeln!(out, "livelock suspect schedule: {suspect}");
    }
    Ok(status(report.is_clean()))
}

fn cmd_check(path: &Path, out: &mut String) -> Result<i32, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let lines = read_trace(io::BufReader::new(file))
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match check_trace(&lines) {
        Ok(report) => {
            let _ = writeln!(out, "steps: {}", report.steps);
            let _ = writeln!(out, "drain order: {}", report.delivered.join(" "));
            let _ = writeln!(out, "snapshots: match replayed writes");
            let _ = writeln!(out, "re-execution: identical");
            let _ = writeln!(out, "failures: {}", report.failures.len());
            for f in &report.failures {
                let _ = writeln!(out, "failure: {f}");
            }
            Ok(status(report.failures.is_empty()))
        }
        Err(
            e @ (CheckError::Snapshot { .. }
            | CheckError::Diverged { .. }
            | CheckError::Length { .. }),
        ) => {
            let _ = writeln!(out, "trace rejected: {e}");
            Ok(EXIT_FAILURES)
        }
        Err(e) => Err(usage(format!("{}: {e}", path.display()))),
    }
}
