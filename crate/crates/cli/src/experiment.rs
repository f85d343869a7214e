//! Phase-transition sweeps and convergence traces.

use std::fmt::Write as _;
use std::time::Duration;

use phaseforge_core::rng::trial_seed;
use phaseforge_core::{
    Complex64, Field, FixedColumnwise, FixedMeasurements, ScalarField, SolverConfig,
    SplitColumnwise, Termination,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Problem};
use crate::dispatch::{solve_lowrank, solve_vector};
use crate::error::CliError;
use crate::instance::{lowrank_instance, sparse_instance, unstructured_instance};

pub const PHASE_TRANSITION_HEADER: &str =
    "problem,solver,n,q,r,s,m,trials,successes,mean_err,median_err,mean_iters,mean_ms";
pub const TRACE_HEADER: &str = "iter,err,ms";

/// Outcome of one seeded solver run against its generated truth.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub error: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<f64>,
    pub times: Vec<Duration>,
    pub elapsed: Duration,
}

/// Aggregate over the trials of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub problem: Problem,
    pub solver: String,
    pub n: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub mean_err: f64,
    pub median_err: f64,
    pub mean_iters: f64,
    pub mean_ms: f64,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Generates the instance for `(m, seed)` and solves it.
pub fn run_trial(cfg: &ExperimentConfig, solver: &SolverConfig, m: usize, seed: u64) -> Result<TrialOutcome, CliError> {
    match cfg.field {
        ScalarField::Real => run_trial_in::<f64>(cfg, solver, m, seed),
        ScalarField::Complex => run_trial_in::<Complex64>(cfg, solver, m, seed),
    }
}

fn run_trial_in<T: Field>(
    cfg: &ExperimentConfig,
    solver: &SolverConfig,
    m: usize,
    seed: u64,
) -> Result<TrialOutcome, CliError> {
    let solver = SolverConfig { seed, ..solver.clone() };
    let report = match cfg.problem {
        Problem::Unstructured | Problem::Sparse => {
            let inst = if cfg.problem == Problem::Sparse {
                sparse_instance::<T>(cfg.n, cfg.s, m, seed)?
            } else {
                unstructured_instance::<T>(cfg.n, m, seed)?
            };
            let truth = Some(inst.truth.as_slice());
            if solver.sample_splitting {
                let mut src = inst.split_source()?;
                solve_vector(cfg.solver, &mut src, cfg.sparsity(), &solver, truth)?.map(drop)
            } else {
                let mut src = FixedMeasurements::new(&inst.ensemble, &inst.observation)?;
                solve_vector(cfg.solver, &mut src, cfg.sparsity(), &solver, truth)?.map(drop)
            }
        }
        Problem::LowRank => {
            let inst = lowrank_instance::<T>(cfg.n, cfg.q, cfg.r, m, cfg.condition, seed)?;
            if solver.sample_splitting {
                let mut src = SplitColumnwise::new(seed, 0, m, inst.truth.clone())?;
                solve_lowrank(cfg.solver, &mut src, cfg.r, &solver, Some(&inst.truth))?.map(drop)
            } else {
                let mut src = FixedColumnwise::new(&inst.ensembles, &inst.observations)?;
                solve_lowrank(cfg.solver, &mut src, cfg.r, &solver, Some(&inst.truth))?.map(drop)
            }
        }
    };
    Ok(TrialOutcome {
        error: report.final_error(),
        iterations: report.iterations,
        termination: report.termination,
        trace: report.trace,
        times: report.times,
        elapsed: report.elapsed,
    })
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Runs every `(m, trial)` cell of the sweep.
///
/// Trials run in parallel; results are gathered in grid order, so the
/// output does not depend on the thread count.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<Vec<CellResult>, CliError> {
    cfg.validate()?;
    let solver = cfg.solver_config()?;
    let grid = cfg.grid()?;
    let jobs: Vec<(usize, usize)> = grid.iter().flat_map(|&m| (0..cfg.trials).map(move |t| (m, t))).collect();
    let outcomes: Vec<Result<TrialOutcome, CliError>> = with_threads(cfg.threads, || {
        jobs.par_iter().map(|&(m, t)| run_trial(cfg, &solver, m, trial_seed(cfg.seed, m, t))).collect()
    })?;
    let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;

    let (q, r, s) = match cfg.problem {
        Problem::Unstructured => (1, 1, cfg.n),
        Problem::Sparse => (1, 1, cfg.s),
        Problem::LowRank => (cfg.q, cfg.r, cfg.n),
    };
    Ok(grid
        .iter()
        .zip(outcomes.chunks(cfg.trials))
        .map(|(&m, cell)| {
            let k = cell.len() as f64;
            let mut errors: Vec<f64> = cell.iter().map(|o| o.error).collect();
            CellResult {
                problem: cfg.problem,
                solver: cfg.solver.to_string(),
                n: cfg.n,
                q,
                r,
                s,
                m,
                trials: cell.len(),
                successes: cell.iter().filter(|o| o.error < cfg.threshold).count(),
                mean_err: errors.iter().sum::<f64>() / k,
                median_err: median(&mut errors),
                mean_iters: cell.iter().map(|o| o.iterations as f64).sum::<f64>() / k,
                mean_ms: if cfg.timing {
                    cell.iter().map(|o| o.elapsed.as_secs_f64() * 1e3).sum::<f64>() / k
                } else {
                    0.0
                },
            }
        })
        .collect())
}

pub fn cells_to_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(PHASE_TRANSITION_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.problem,
            c.solver,
            c.n,
            c.q,
            c.r,
            c.s,
            c.m,
            c.trials,
            c.successes,
            c.mean_err,
            c.median_err,
            c.mean_iters,
            c.mean_ms
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub err: f64,
    pub ms: f64,
}

#[derive(Clone, Debug)]
pub struct TraceRun {
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    pub iterations: usize,
}

/// Per-iteration error of trial 0 in the single grid cell of `cfg`.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<TraceRun, CliError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let &[m] = grid.as_slice() else {
        return Err(CliError::Config(format!("trace needs exactly one measurement count, got {}", grid.len())));
    };
    let outcome = run_trial(cfg, &cfg.solver_config()?, m, trial_seed(cfg.seed, m, 0))?;
    let rows = outcome
        .trace
        .iter()
        .zip(&outcome.times)
        .enumerate()
        .map(|(iter, (&err, t))| TraceRow { iter, err, ms: if cfg.timing { t.as_secs_f64() * 1e3 } else { 0.0 } })
        .collect();
    Ok(TraceRun { rows, termination: outcome.termination, iterations: outcome.iterations })
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{}", r.iter, r.err, r.ms).expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_layout() {
        let cell = CellResult {
            problem: Problem::Sparse,
            solver: "copram".into(),
            n: 10,
            q: 1,
            r: 1,
            s: 2,
            m: 30,
            trials: 4,
            successes: 3,
            mean_err: 0.25,
            median_err: 1e-9,
            mean_iters: 12.5,
            mean_ms: 0.0,
        };
        assert_eq!(
            cells_to_csv(&[cell]),
            "problem,solver,n,q,r,s,m,trials,successes,mean_err,median_err,mean_iters,mean_ms\n\
             sparse,copram,10,1,1,2,30,4,3,0.25,0.000000001,12.5,0\n"
        );
        let rows = [TraceRow { iter: 0, err: 0.5, ms: 0.0 }, TraceRow { iter: 1, err: f64::NAN, ms: 0.0 }];
        assert_eq!(trace_to_csv(&rows), "iter,err,ms\n0,0.5,0\n1,NaN,0\n");
    }
}
