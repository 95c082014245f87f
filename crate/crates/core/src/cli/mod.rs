//! Scenario runner and probe.

pub mod probe;
pub mod report;
pub mod runner;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::random::MapKind;
use probe::ProbeConfig;
use report::{Report, EXIT_INVALID, EXIT_OK, EXIT_TASK_ERROR};
use runner::RunOptions;

#[derive(Debug, Parser)]
#[command(name = "cpkernel", version, about = "Iterate CP maps on positive definite kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MapKindArg {
    General,
    Subunital,
    Unital,
    DiagonalUnital,
}

impl From<MapKindArg> for MapKind {
    fn from(k: MapKindArg) -> Self {
        match k {
            MapKindArg::General => MapKind::General,
            MapKindArg::Subunital => MapKind::Subunital,
            MapKindArg::Unital => MapKind::Unital,
            MapKindArg::DiagonalUnital => MapKind::DiagonalUnital,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and write a JSON report.
    Run {
        scenario: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Directory for per-task CSV series.
        #[arg(long)]
        emit_series: Option<PathBuf>,
        /// Tolerance override such as `psd=1e-10`; repeatable.
        #[arg(long = "tol", value_name = "KEY=VALUE")]
        tol: Vec<String>,
        /// Record wall-clock time per task.
        #[arg(long)]
        timing: bool,
    },
    /// Search random instances for premise and domination violations.
    Probe {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of points and fiber dimension.
        #[arg(long, value_name = "N,D", default_value = "1,2", value_parser = parse_dims)]
        dims: (usize, usize),
        #[arg(long)]
        rank_deficient: bool,
        #[arg(long, value_enum, default_value = "subunital")]
        map_kind: MapKindArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (n, d) = s.split_once(',').ok_or_else(|| format!("expected N,D, got `{s}`"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("bad N: {e}"))?;
    let d: usize = d.trim().parse().map_err(|e| format!("bad D: {e}"))?;
    if n == 0 || d == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((n, d))
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(scenario: &Path, output: Option<&Path>, series_dir: Option<&Path>, opts: RunOptions) -> i32 {
    let outcome = match fs::read_to_string(scenario) {
        Ok(text) => runner::run_scenario_json(&text, &opts),
        Err(e) => {
            let err = Error::Invalid(format!("cannot read {}: {e}", scenario.display()));
            runner::RunOutcome { report: Report::invalid(&err), series: Vec::new() }
        }
    };
    if let Some(dir) = series_dir {
        let written = fs::create_dir_all(dir)
            .and_then(|()| outcome.series.iter().try_for_each(|f| fs::write(dir.join(&f.name), &f.contents)));
        if let Err(e) = written {
            eprintln!("cannot write series to {}: {e}", dir.display());
            return EXIT_TASK_ERROR;
        }
    }
    if let Err(e) = write_output(output, &outcome.report.to_json()) {
        eprintln!("cannot write report: {e}");
        return EXIT_TASK_ERROR;
    }
    outcome.exit_code()
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, output, emit_series, tol, timing } => {
            run(&scenario, output.as_deref(), emit_series.as_deref(), RunOptions { timing, tol_overrides: tol })
        }
        Command::Probe { instances, seed, dims: (n, d), rank_deficient, map_kind, output } => {
            let cfg =
                ProbeConfig { instances, seed, n, d, rank_deficient, map_kind: map_kind.into(), ..Default::default() };
            match probe::probe(&cfg) {
                Ok(r) => match write_output(output.as_deref(), &r.to_json()) {
                    Ok(()) => EXIT_OK,
                    Err(e) => {
                        eprintln!("cannot write report: {e}");
                        EXIT_TASK_ERROR
                    }
                },
                Err(e) => {
                    eprintln!("probe failed: {e}");
                    EXIT_TASK_ERROR
                }
            }
        }
    }
}
