use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phaseforge_cli::{
    cells_to_csv, generate_files, parse_set, run_phase_transition, run_trace, solve_file, trace_to_csv, CliError,
    ExperimentConfig, FileFormat, SolveRequest, SolverKind, SolverOverrides,
};
use phaseforge_core::Termination;

#[derive(Parser)]
#[command(name = "phaseforge", version, about = "Phase retrieval solvers and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success rate per measurement count over seeded trials.
    PhaseTransition(ExperimentArgs),
    /// Per-iteration error of one seeded run.
    Trace(ExperimentArgs),
    /// Solve an instance stored on disk.
    Solve(SolveArgs),
    /// Write a seeded instance (truth, ensemble, observations) to a directory.
    Gen(GenArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output CSV; stdout when absent and the config names none.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, env = "PHASEFORGE_THREADS", value_name = "K")]
    threads: Option<usize>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override a config entry, e.g. `--set max_iters=200` or `--set n=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    solver: SolverKind,
    #[arg(long, value_name = "PATH")]
    ensemble: PathBuf,
    #[arg(long, value_name = "PATH")]
    observations: PathBuf,
    /// Ground truth; the final error is printed when given.
    #[arg(long, value_name = "PATH")]
    truth: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Solver settings, e.g. `--set max_iters=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory receiving truth, ensemble and observations.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FileFormat,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_sets(raw: &[String]) -> Result<Vec<(String, String)>, CliError> {
    raw.iter().map(|s| parse_set(s)).collect()
}

fn load_config(
    path: &Path,
    sets: &[String],
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<ExperimentConfig, CliError> {
    let mut sets = parse_sets(sets)?;
    if let Some(seed) = seed {
        sets.push(("seed".into(), seed.to_string()));
    }
    if let Some(k) = threads {
        sets.push(("threads".into(), k.to_string()));
    }
    ExperimentConfig::load(path, &sets)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn solve_overrides(sets: &[String]) -> Result<SolverOverrides, CliError> {
    let mut table = toml::Table::new();
    for (key, value) in parse_sets(sets)? {
        if !SolverOverrides::KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("unknown solver setting '{key}'")));
        }
        let v = value.parse().unwrap_or(toml::Value::String(value));
        table.insert(key, v);
    }
    table.try_into().map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::PhaseTransition(args) => {
            let cfg = load_config(&args.config, &args.set, args.seed, args.threads)?;
            let cells = run_phase_transition(&cfg)?;
            emit(args.out.as_deref().or(cfg.out.as_deref()), &cells_to_csv(&cells))
        }
        Command::Trace(args) => {
            let cfg = load_config(&args.config, &args.set, args.seed, args.threads)?;
            let run = run_trace(&cfg)?;
            emit(args.out.as_deref().or(cfg.out.as_deref()), &trace_to_csv(&run.rows))?;
            if run.termination == Termination::Degenerate {
                return Err(CliError::Degenerate(format!("stopped after {} iterations", run.iterations)));
            }
            Ok(())
        }
        Command::Solve(args) => {
            let req = SolveRequest {
                solver: args.solver,
                ensemble: args.ensemble,
                observations: args.observations,
                truth: args.truth,
                out: args.out,
                sparsity: args.sparsity,
                rank: args.rank,
                overrides: solve_overrides(&args.set)?,
            };
            let summary = solve_file(&req)?;
            let mut line = format!("{} after {} iterations", summary.termination, summary.iterations);
            if let Some(err) = summary.error {
                line.push_str(&format!(", relative error {err:e}"));
            }
            println!("{line}");
            if summary.termination == Termination::Degenerate {
                return Err(CliError::Degenerate(line));
            }
            Ok(())
        }
        Command::Gen(args) => {
            let cfg = load_config(&args.config, &args.set, args.seed, None)?;
            let files = generate_files(&cfg, &args.out, args.format)?;
            println!("{}", files.truth.display());
            println!("{}", files.ensemble.display());
            println!("{}", files.observations.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phaseforge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
