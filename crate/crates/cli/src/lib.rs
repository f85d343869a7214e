//! Experiment harness behind the `phaseforge` binary: seeded instance
//! generation, solver dispatch, phase-transition sweeps, convergence traces
//! and file-based solving.

pub mod config;
pub mod dispatch;
pub mod error;
pub mod experiment;
pub mod files;
pub mod instance;

pub use config::{parse_set, ExperimentConfig, Problem, SolverKind, SolverOverrides};
pub use error::CliError;
pub use experiment::{
    cells_to_csv, run_phase_transition, run_trace, run_trial, trace_to_csv, CellResult, TraceRow, TraceRun,
    TrialOutcome, PHASE_TRANSITION_HEADER, TRACE_HEADER,
};
pub use files::{generate_files, solve_file, FileFormat, InstanceFiles, SolveRequest, SolveSummary};
