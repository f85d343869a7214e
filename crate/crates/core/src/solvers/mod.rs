//! Iterative phase retrieval solvers and their shared configuration/report types.

pub mod lowrank;
pub mod sparse;
pub mod unstructured;

use std::time::{Duration, Instant};

use crate::error::{ensure, Result};
use crate::spectral::TruncationRule;

/// Truncation of gradient terms: term `i` is kept when
/// `|<a_i, x>| ≥ alpha_lb · ‖x‖` and `y_i ≤ alpha_ub · mean(y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientTruncation {
    pub alpha_lb: f64,
    pub alpha_ub: f64,
}

impl GradientTruncation {
    pub const OFF: GradientTruncation = GradientTruncation { alpha_lb: 0.0, alpha_ub: f64::INFINITY };

    pub fn is_off(&self) -> bool {
        self.alpha_lb <= 0.0 && self.alpha_ub == f64::INFINITY
    }
}

impl Default for GradientTruncation {
    fn default() -> Self {
        Self { alpha_lb: 0.3, alpha_ub: 2.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the relative phase-invariant change between iterates drops below this.
    pub tol: f64,
    /// Gradient step; `None` picks the solver's own default.
    pub step_size: Option<f64>,
    /// Draw a fresh measurement set every iteration (alternating solvers).
    pub sample_splitting: bool,
    /// Low-rank only: also draw a fresh set between the coefficient and subspace updates.
    pub per_substep_splitting: bool,
    /// Rule for spectral initialization matrices.
    pub truncation: TruncationRule,
    /// Rule for gradient terms (truncated solvers).
    pub gradient_truncation: GradientTruncation,
    /// Iteration cap of the `r`-dimensional per-column sub-solver.
    pub inner_iters: usize,
    /// Relative normal-equation residual for inner least-squares solves.
    pub ls_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-10,
            step_size: None,
            sample_splitting: false,
            per_substep_splitting: false,
            truncation: TruncationRule::default(),
            gradient_truncation: GradientTruncation::default(),
            inner_iters: 200,
            ls_tol: 1e-10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.max_iters >= 1, || "max_iters must be at least 1".into())?;
        ensure(self.tol > 0.0, || format!("tol must be positive, got {}", self.tol))?;
        if let Some(step) = self.step_size {
            ensure(step > 0.0 && step.is_finite(), || format!("step_size must be positive, got {step}"))?;
        }
        ensure(self.inner_iters >= 1, || "inner_iters must be at least 1".into())?;
        ensure(self.ls_tol > 0.0, || "ls_tol must be positive".into())?;
        ensure(
            self.gradient_truncation.alpha_lb >= 0.0 && self.gradient_truncation.alpha_ub > 0.0,
            || "truncation constants must be nonnegative".into(),
        )
    }

    pub(crate) fn step_or(&self, default: f64) -> f64 {
        self.step_size.unwrap_or(default)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    Degenerate,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max-iters",
            Termination::Degenerate => "degenerate",
        })
    }
}

/// Outcome of one solver run.
///
/// `trace[t]` is the relative error against the truth after iteration `t`
/// (entry 0 is the initial estimate) when a truth was supplied, otherwise
/// the relative change from the previous iterate (entry 0 is NaN).
#[derive(Clone, Debug)]
pub struct SolverReport<E> {
    pub estimate: E,
    pub trace: Vec<f64>,
    /// Wall time elapsed at each trace entry.
    pub times: Vec<Duration>,
    pub iterations: usize,
    pub termination: Termination,
    pub elapsed: Duration,
    /// Columns whose per-column sub-problem was degenerate (low-rank solvers).
    pub flagged_columns: Vec<usize>,
}

impl<E> SolverReport<E> {
    pub fn final_error(&self) -> f64 {
        *self.trace.last().expect("trace always has the initial entry")
    }

    pub fn map<F, G: FnOnce(E) -> F>(self, f: G) -> SolverReport<F> {
        SolverReport {
            estimate: f(self.estimate),
            trace: self.trace,
            times: self.times,
            iterations: self.iterations,
            termination: self.termination,
            elapsed: self.elapsed,
            flagged_columns: self.flagged_columns,
        }
    }
}

/// Accumulates trace entries and timings for a run.
pub(crate) struct Recorder {
    start: Instant,
    trace: Vec<f64>,
    times: Vec<Duration>,
}

impl Recorder {
    pub(crate) fn new() -> Self {
        Self { start: Instant::now(), trace: Vec::new(), times: Vec::new() }
    }

    pub(crate) fn push(&mut self, err: f64) {
        self.trace.push(err);
        self.times.push(self.start.elapsed());
    }

    pub(crate) fn finish<E>(self, estimate: E, termination: Termination, flagged_columns: Vec<usize>) -> SolverReport<E> {
        let iterations = self.trace.len().saturating_sub(1);
        SolverReport {
            estimate,
            trace: self.trace,
            times: self.times,
            iterations,
            termination,
            elapsed: self.start.elapsed(),
            flagged_columns,
        }
    }
}

/// Median of successive error ratios `e[t+1]/e[t]` for `t ≥ from`,
/// skipping entries at or below `floor`.
pub fn median_contraction(trace: &[f64], from: usize, floor: f64) -> Option<f64> {
    let mut ratios: Vec<f64> = trace
        .windows(2)
        .skip(from)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    let mid = ratios.len() / 2;
    Some(if ratios.len() % 2 == 1 { ratios[mid] } else { 0.5 * (ratios[mid - 1] + ratios[mid]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { step_size: Some(-1.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn contraction_median() {
        let trace = [1.0, 0.5, 0.25, 0.125, 0.1];
        assert_eq!(median_contraction(&trace, 0, 0.0), Some(0.5));
        assert_eq!(median_contraction(&trace, 3, 0.0), Some(0.8));
        assert_eq!(median_contraction(&trace, 10, 0.0), None);
    }
}
