//! Maps a [`SolverKind`] onto the library solvers, including initialization.

use std::time::Duration;

use ndarray::Array2;
use phaseforge_core::solvers::lowrank::{altmin_lowrap, columnwise_twf, lrpr1_projected_gd};
use phaseforge_core::solvers::sparse::{altmin_sparse, copram, thresh_wf};
use phaseforge_core::solvers::unstructured::{altmin_phase, twf, wf};
use phaseforge_core::spectral::spectral_init;
use phaseforge_core::{
    matrix_phase_error, relative_dist, ColumnwiseSource, Error, Field, MeasurementSource, SolverConfig, SolverReport,
    Termination,
};

use crate::config::SolverKind;
use crate::error::CliError;

/// Zero estimate reported when initialization finds no usable spectrum.
fn degenerate<E>(estimate: E, initial_error: f64) -> SolverReport<E> {
    SolverReport {
        estimate,
        trace: vec![initial_error],
        times: vec![Duration::ZERO],
        iterations: 0,
        termination: Termination::Degenerate,
        elapsed: Duration::ZERO,
        flagged_columns: Vec::new(),
    }
}

fn is_degenerate(e: &Error) -> bool {
    matches!(e, Error::DegenerateSpectrum { .. } | Error::DegenerateInput(_))
}

/// Runs a single-signal solver. `s` is the sparsity for sparse solvers and
/// ignored otherwise.
pub fn solve_vector<T: Field>(
    kind: SolverKind,
    src: &mut dyn MeasurementSource<T>,
    s: usize,
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<SolverReport<Vec<T>>, CliError> {
    if kind.is_lowrank() {
        return Err(CliError::Usage(format!("{kind} needs column-wise measurements")));
    }
    let n = src.current().0.cols();
    let zero = vec![T::zero(); n];
    let zero_error = match truth {
        Some(t) => relative_dist(&zero, t)?,
        None => f64::NAN,
    };
    let report = match kind {
        SolverKind::AltminSparse => altmin_sparse(src, s, cfg, truth).map(|r| r.map(|e| e.into_values())),
        SolverKind::Copram => copram(src, s, cfg, None, truth).map(|r| r.map(|e| e.into_values())),
        SolverKind::ThreshWf => {
            let (a, y) = src.current();
            thresh_wf(a, y, s, cfg, None, truth).map(|r| r.map(|e| e.into_values()))
        }
        _ => {
            let x0 = {
                let (a, y) = src.current();
                spectral_init(a, y, cfg.truncation)
            };
            match x0 {
                Ok(x0) => match kind {
                    SolverKind::AltminPhase => altmin_phase(src, &x0, cfg, truth),
                    SolverKind::Wf => {
                        let (a, y) = src.current();
                        wf(a, y, &x0, cfg, truth)
                    }
                    SolverKind::Twf => {
                        let (a, y) = src.current();
                        twf(a, y, &x0, cfg, truth)
                    }
                    _ => unreachable!("sparse and low-rank kinds handled above"),
                },
                Err(e) => Err(e),
            }
        }
    };
    match report {
        Ok(r) => Ok(r),
        Err(e) if is_degenerate(&e) => Ok(degenerate(zero, zero_error)),
        Err(e) => Err(e.into()),
    }
}

/// Runs a column-wise solver on an `n × q` problem of rank `r`.
pub fn solve_lowrank<T: Field>(
    kind: SolverKind,
    src: &mut dyn ColumnwiseSource<T>,
    r: usize,
    cfg: &SolverConfig,
    truth: Option<&Array2<T>>,
) -> Result<SolverReport<Array2<T>>, CliError> {
    let (n, q) = {
        let (e, _) = src.current();
        (e.n(), e.q())
    };
    let zero = Array2::zeros((n, q));
    let report = match kind {
        SolverKind::AltminLowrap => altmin_lowrap(src, r, cfg, truth).map(|(_, rep)| rep),
        SolverKind::Lrpr1 => lrpr1_projected_gd(src, r, cfg, None, truth).map(|(_, rep)| rep),
        SolverKind::TwfColumnwise => {
            let (e, ys) = src.current();
            columnwise_twf(e, ys, cfg, truth)
        }
        other => return Err(CliError::Usage(format!("{other} needs a single measurement vector"))),
    };
    match report {
        Ok(r) => Ok(r),
        Err(e) if is_degenerate(&e) => {
            let err = match truth {
                Some(t) => matrix_phase_error(&zero, t)?,
                None => f64::NAN,
            };
            Ok(degenerate(zero, err))
        }
        Err(e) => Err(e.into()),
    }
}
