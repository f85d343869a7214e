//! File-based instance generation and solving.
//!
//! An instance on disk is three matrices in one format (CSV or binary):
//! `truth` (`n × q`), `ensemble` (`q·m × n`, column `k`'s rows stacked at
//! `k·m`) and `observations` (`m × q`). Single-signal problems use `q = 1`.

use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2};
use phaseforge_core::io::{read_path, write_path, AnyMatrix};
use phaseforge_core::rng::trial_seed;
use phaseforge_core::{
    ColumnwiseEnsemble, Complex64, Field, FixedColumnwise, FixedMeasurements, Observation, ScalarField,
    SensingEnsemble, SolverConfig, Termination,
};

use crate::config::{ExperimentConfig, Problem, SolverKind, SolverOverrides};
use crate::dispatch::{solve_lowrank, solve_vector};
use crate::error::CliError;
use crate::instance::{lowrank_instance, sparse_instance, stack_ensembles, unstructured_instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FileFormat {
    Csv,
    Bin,
}

impl FileFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Csv => "csv",
            FileFormat::Bin => "bin",
        }
    }
}

#[derive(Clone, Debug)]
pub struct InstanceFiles {
    pub truth: PathBuf,
    pub ensemble: PathBuf,
    pub observations: PathBuf,
}

impl InstanceFiles {
    pub fn in_dir(dir: &Path, format: FileFormat) -> Self {
        let ext = format.extension();
        Self {
            truth: dir.join(format!("truth.{ext}")),
            ensemble: dir.join(format!("ensemble.{ext}")),
            observations: dir.join(format!("observations.{ext}")),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn write<T: Field>(path: &Path, m: &Array2<T>) -> Result<(), CliError> {
    write_path(path, m).map_err(|e| match e {
        phaseforge_core::Error::Io(source) => io_err(path)(source),
        other => other.into(),
    })
}

fn read(path: &Path) -> Result<AnyMatrix, CliError> {
    read_path(path).map_err(|e| match e {
        phaseforge_core::Error::Io(source) => io_err(path)(source),
        other => CliError::Input(other),
    })
}

fn column_matrix<T: Field>(v: &[T]) -> Array2<T> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("length matches shape")
}

/// Writes trial 0 of the config's single grid cell into `dir`.
pub fn generate_files(cfg: &ExperimentConfig, dir: &Path, format: FileFormat) -> Result<InstanceFiles, CliError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let &[m] = grid.as_slice() else {
        return Err(CliError::Config(format!("gen needs exactly one measurement count, got {}", grid.len())));
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = InstanceFiles::in_dir(dir, format);
    let seed = trial_seed(cfg.seed, m, 0);
    match cfg.field {
        ScalarField::Real => generate_in::<f64>(cfg, m, seed, &files)?,
        ScalarField::Complex => generate_in::<Complex64>(cfg, m, seed, &files)?,
    }
    Ok(files)
}

fn generate_in<T: Field>(cfg: &ExperimentConfig, m: usize, seed: u64, files: &InstanceFiles) -> Result<(), CliError> {
    match cfg.problem {
        Problem::Unstructured | Problem::Sparse => {
            let inst = if cfg.problem == Problem::Sparse {
                sparse_instance::<T>(cfg.n, cfg.s, m, seed)?
            } else {
                unstructured_instance::<T>(cfg.n, m, seed)?
            };
            write(&files.truth, &column_matrix(&inst.truth))?;
            write(&files.ensemble, inst.ensemble.entries())?;
            write(&files.observations, &column_matrix(inst.observation.values()))?;
        }
        Problem::LowRank => {
            let inst = lowrank_instance::<T>(cfg.n, cfg.q, cfg.r, m, cfg.condition, seed)?;
            write(&files.truth, &inst.truth)?;
            write(&files.ensemble, &stack_ensembles(&inst))?;
            write(&files.observations, &inst.observations)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SolveRequest {
    pub solver: SolverKind,
    pub ensemble: PathBuf,
    pub observations: PathBuf,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    /// Sparsity for sparse solvers; defaults to `n`.
    pub sparsity: Option<usize>,
    /// Rank for low-rank solvers; defaults to 1.
    pub rank: Option<usize>,
    pub overrides: SolverOverrides,
}

#[derive(Clone, Debug)]
pub struct SolveSummary {
    /// Final relative error, when a truth file was given.
    pub error: Option<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

/// Solves the instance in the request's files and writes the estimate to `out`
/// in the format its extension selects.
pub fn solve_file(req: &SolveRequest) -> Result<SolveSummary, CliError> {
    let cfg = req.overrides.solver_config()?;
    let ensemble = read(&req.ensemble)?;
    let observations = read(&req.observations)?;
    let truth = req.truth.as_deref().map(read).transpose()?;
    let complex = ensemble.field() == ScalarField::Complex
        || truth.as_ref().is_some_and(|t| t.field() == ScalarField::Complex);
    if complex {
        solve_in::<Complex64>(req, &cfg, ensemble, observations, truth)
    } else {
        solve_in::<f64>(req, &cfg, ensemble, observations, truth)
    }
}

fn solve_in<T: Field>(
    req: &SolveRequest,
    cfg: &SolverConfig,
    ensemble: AnyMatrix,
    observations: AnyMatrix,
    truth: Option<AnyMatrix>,
) -> Result<SolveSummary, CliError> {
    let entries: Array2<T> = ensemble.into_field()?;
    let ys: Array2<f64> = observations.into_field().map_err(|_| {
        CliError::Config(format!("{}: observations must be real", req.observations.display()))
    })?;
    let truth: Option<Array2<T>> = truth.map(|t| t.into_field()).transpose()?;
    let n = entries.ncols();
    let shape_err = |msg: String| Err(CliError::Config(msg));

    let (estimate, report) = if req.solver.is_lowrank() {
        let (m, q) = ys.dim();
        if entries.nrows() != m * q {
            return shape_err(format!("ensemble has {} rows, expected m·q = {}", entries.nrows(), m * q));
        }
        let columns = (0..q)
            .map(|k| SensingEnsemble::from_rows(entries.slice(s![k * m..(k + 1) * m, ..]).to_owned(), 0, k as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let e = ColumnwiseEnsemble::new(columns)?;
        if let Some(t) = &truth {
            if t.dim() != (n, q) {
                return shape_err(format!("truth is {:?}, expected ({n}, {q})", t.dim()));
            }
        }
        let mut src = FixedColumnwise::new(&e, &ys)?;
        let report = solve_lowrank(req.solver, &mut src, req.rank.unwrap_or(1), cfg, truth.as_ref())?;
        (report.estimate.clone(), report.map(drop))
    } else {
        if ys.ncols() != 1 && ys.nrows() != 1 {
            return shape_err(format!("observations must be a single column, got {:?}", ys.dim()));
        }
        let values: Array1<f64> = ys.iter().copied().collect();
        let a = SensingEnsemble::from_rows(entries, 0, 0)?;
        let y = Observation::new(values, 0, 0)?;
        let truth_vec: Option<Vec<T>> = truth.map(|t| t.iter().copied().collect());
        if let Some(t) = &truth_vec {
            if t.len() != n {
                return shape_err(format!("truth has {} entries, expected {n}", t.len()));
            }
        }
        let mut src = FixedMeasurements::new(&a, &y)?;
        let report = solve_vector(req.solver, &mut src, req.sparsity.unwrap_or(n), cfg, truth_vec.as_deref())?;
        (column_matrix(&report.estimate), report.map(drop))
    };
    write(&req.out, &estimate)?;
    Ok(SolveSummary {
        error: req.truth.as_ref().map(|_| report.final_error()),
        iterations: report.iterations,
        termination: report.termination,
    })
}
