//! AltMinPhase, Wirtinger flow and truncated Wirtinger flow on full vectors.

use crate::error::{ensure, Result};
use crate::field::{norm, Field};
use crate::linalg::cgls;
use crate::measurement::{MeasurementSource, Observation, SensingEnsemble};
use crate::metrics::{phase_invariant_dist, relative_dist};
use crate::solvers::sparse::hard_threshold;
use crate::solvers::{GradientTruncation, Recorder, SolverConfig, SolverReport, Termination};

/// Default step of [`wf`].
pub const WF_STEP: f64 = 0.2;
/// Default step of [`twf`].
pub const TWF_STEP: f64 = 0.36;

/// `phase(z) = z / |z|`, with `phase(0) = 1`.
pub fn phase_of<T: Field>(z: T) -> T {
    z.phase()
}

/// Trace entry for a vector iterate.
pub(crate) fn vector_error<T: Field>(truth: Option<&[T]>, x: &[T], prev: Option<&[T]>) -> f64 {
    match (truth, prev) {
        (Some(t), _) => relative_dist(x, t).expect("lengths checked by caller"),
        (None, Some(p)) => relative_change(x, p),
        (None, None) => f64::NAN,
    }
}

fn relative_change<T: Field>(x: &[T], prev: &[T]) -> f64 {
    let d = phase_invariant_dist(x, prev).expect("same length");
    let nx = norm(x);
    if nx > 0.0 {
        d / nx
    } else {
        d
    }
}

pub(crate) fn converged<T: Field>(x: &[T], prev: &[T], tol: f64) -> bool {
    let d = phase_invariant_dist(x, prev).expect("same length");
    d == 0.0 || d < tol * norm(x)
}

pub(crate) fn check_problem<T: Field>(a: &SensingEnsemble<T>, y: &Observation, x0: &[T]) -> Result<()> {
    ensure(a.rows() == y.len(), || format!("{} observations for {} measurement rows", y.len(), a.rows()))?;
    ensure(x0.len() == a.cols(), || format!("initial estimate has length {}, expected {}", x0.len(), a.cols()))?;
    ensure(norm(x0) > 0.0, || "initial estimate must be nonzero".into())
}

/// `f(x) = (1/m) Σ (y_i² − |<a_i, x>|²)²`.
pub fn wf_objective<T: Field>(a: &SensingEnsemble<T>, y: &Observation, x: &[T]) -> f64 {
    let z = a.apply(x);
    z.iter()
        .zip(y.values())
        .map(|(zi, yi)| (yi * yi - zi.norm_sqr()).powi(2))
        .sum::<f64>()
        / a.rows() as f64
}

/// Gradient of [`wf_objective`] with respect to the real coordinates of `x`,
/// packed as a vector of `T`: `(4/m) Σ (|z_i|² − y_i²) z_i a_i`, `z_i = <a_i, x>`.
///
/// For complex signals this is `2 ∂f/∂x̄`, so the real and imaginary parts
/// are the partial derivatives along `Re x_j` and `Im x_j`.
pub fn wf_gradient<T: Field>(a: &SensingEnsemble<T>, y: &Observation, x: &[T]) -> Vec<T> {
    let mut d = descent_direction(a, y, x, GradientTruncation::OFF);
    d.iter_mut().for_each(|v| *v = v.scale(4.0));
    d
}

/// `(1/m) Σ_{i kept} (|z_i|² − y_i²) z_i a_i`, a quarter of the gradient
/// restricted to the terms passing `trunc`.
pub(crate) fn descent_direction<T: Field>(
    a: &SensingEnsemble<T>,
    y: &Observation,
    x: &[T],
    trunc: GradientTruncation,
) -> Vec<T> {
    let m = a.rows() as f64;
    let z = a.apply(x);
    let (lb, ub) = if trunc.is_off() {
        (0.0, f64::INFINITY)
    } else {
        let mean_y = y.values().iter().sum::<f64>() / m;
        (trunc.alpha_lb * norm(x), trunc.alpha_ub * mean_y)
    };
    let w: Vec<T> = z
        .iter()
        .zip(y.values())
        .map(|(&zi, &yi)| {
            if zi.abs() >= lb && yi <= ub {
                zi.scale((zi.norm_sqr() - yi * yi) / m)
            } else {
                T::zero()
            }
        })
        .collect();
    a.apply_adjoint(&w)
}

/// Iterate-to-trace-entry map: `(iterate, previous iterate)`.
pub(crate) type ErrorFn<'a, T> = dyn FnMut(&[T], Option<&[T]>) -> f64 + 'a;

/// Shared gradient loop: `x ← P(x − (step/‖x0‖²) · d(x))` with `P` the
/// optional top-`s` projection.
pub(crate) fn gradient_loop<T: Field>(
    a: &SensingEnsemble<T>,
    y: &Observation,
    x0: &[T],
    cfg: &SolverConfig,
    step: f64,
    trunc: GradientTruncation,
    sparsity: Option<usize>,
    err: &mut ErrorFn<'_, T>,
) -> Result<SolverReport<Vec<T>>> {
    cfg.validate()?;
    check_problem(a, y, x0)?;
    let x0_norm_sq = norm(x0).powi(2);
    let scale = step / x0_norm_sq;

    let mut rec = Recorder::new();
    rec.push(err(x0, None));
    let mut x = x0.to_vec();
    let mut termination = Termination::MaxIters;
    for _ in 0..cfg.max_iters {
        let d = descent_direction(a, y, &x, trunc);
        let mut next: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi - di.scale(scale)).collect();
        if let Some(s) = sparsity {
            next = hard_threshold(&next, s).into_values();
        }
        if !norm(&next).is_finite() {
            termination = Termination::Degenerate;
            break;
        }
        rec.push(err(&next, Some(&x)));
        let done = converged(&next, &x, cfg.tol);
        x = next;
        if done {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(rec.finish(x, termination, Vec::new()))
}

/// Wirtinger flow: gradient descent on [`wf_objective`] from `x0`.
///
/// The update is `x ← x − (step/‖x0‖²) · ∇f(x)/4`; the factor `1/4`
/// puts `step` on the customary scale where 0.1 to 0.3 is stable.
pub fn wf<T: Field>(
    a: &SensingEnsemble<T>,
    y: &Observation,
    x0: &[T],
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<SolverReport<Vec<T>>> {
    check_truth(truth, a.cols())?;
    let mut err = |x: &[T], prev: Option<&[T]>| vector_error(truth, x, prev);
    gradient_loop(a, y, x0, cfg, cfg.step_or(WF_STEP), GradientTruncation::OFF, None, &mut err)
}

/// Truncated Wirtinger flow: [`wf`] with gradient terms filtered by
/// `cfg.gradient_truncation`.
pub fn twf<T: Field>(
    a: &SensingEnsemble<T>,
    y: &Observation,
    x0: &[T],
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<SolverReport<Vec<T>>> {
    check_truth(truth, a.cols())?;
    let mut err = |x: &[T], prev: Option<&[T]>| vector_error(truth, x, prev);
    gradient_loop(a, y, x0, cfg, cfg.step_or(TWF_STEP), cfg.gradient_truncation, None, &mut err)
}

pub(crate) fn check_truth<T: Field>(truth: Option<&[T]>, n: usize) -> Result<()> {
    if let Some(t) = truth {
        ensure(t.len() == n, || format!("truth has length {}, expected {n}", t.len()))?;
    }
    Ok(())
}

/// Shared AltMin loop: phases from the current estimate, then least squares
/// `min ‖diag(phase) y − A x‖`.
pub(crate) fn altmin_loop<T: Field>(
    src: &mut dyn MeasurementSource<T>,
    x0: &[T],
    cfg: &SolverConfig,
    err: &mut ErrorFn<'_, T>,
) -> Result<SolverReport<Vec<T>>> {
    cfg.validate()?;
    {
        let (a, y) = src.current();
        check_problem(a, y, x0)?;
    }
    let mut rec = Recorder::new();
    rec.push(err(x0, None));
    let mut x = x0.to_vec();
    if src.current().0.rows() < x0.len() {
        return Ok(rec.finish(x, Termination::Degenerate, Vec::new()));
    }

    let mut termination = Termination::MaxIters;
    for _ in 0..cfg.max_iters {
        if cfg.sample_splitting {
            src.advance()?;
        }
        let (a, y) = src.current();
        let n = a.cols();
        let z = a.apply(&x);
        let b: Vec<T> = z.iter().zip(y.values()).map(|(&zi, &yi)| phase_of(zi).scale(yi)).collect();
        let sol = cgls(a, &b, &x, cfg.ls_tol, 10 * n);
        if !norm(&sol.x).is_finite() {
            termination = Termination::Degenerate;
            break;
        }
        rec.push(err(&sol.x, Some(&x)));
        let done = converged(&sol.x, &x, cfg.tol);
        x = sol.x;
        if done {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(rec.finish(x, termination, Vec::new()))
}

/// AltMinPhase from `x0`.
///
/// Reports [`Termination::Degenerate`] without iterating when `m < n`
/// (the least-squares step is underdetermined).
pub fn altmin_phase<T: Field>(
    src: &mut dyn MeasurementSource<T>,
    x0: &[T],
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<SolverReport<Vec<T>>> {
    check_truth(truth, x0.len())?;
    let mut err = |x: &[T], prev: Option<&[T]>| vector_error(truth, x, prev);
    altmin_loop(src, x0, cfg, &mut err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{ensemble_stream, forward_phaseless, sample_ensemble, FixedMeasurements, SplitMeasurements};
    use crate::rng::GaussianStream;
    use num_complex::Complex64;

    fn instance<T: Field>(n: usize, m: usize, seed: u64) -> (SensingEnsemble<T>, Observation, Vec<T>) {
        let a = sample_ensemble::<T>(n, m, seed, 0).unwrap();
        let mut g = GaussianStream::new(seed, u64::MAX);
        let x: Vec<T> = (0..n).map(|_| g.sample()).collect();
        let y = forward_phaseless(&a, &x).unwrap();
        (a, y, x)
    }

    #[test]
    fn wf_at_truth_is_stationary() {
        let (a, y, x) = instance::<f64>(8, 60, 1);
        let g = wf_gradient(&a, &y, &x);
        assert!(norm(&g) < 1e-10);
        let rep = wf(&a, &y, &x, &SolverConfig::default(), Some(&x)).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        assert_eq!(rep.iterations, 1);
        assert!(rep.final_error() < 1e-12);
    }

    #[test]
    fn twf_without_truncation_is_wf() {
        let (a, y, x) = instance::<Complex64>(6, 50, 3);
        let x0: Vec<Complex64> = x.iter().map(|v| v + Complex64::new(0.1, -0.05)).collect();
        let cfg = SolverConfig { max_iters: 30, step_size: Some(0.2), ..Default::default() };
        let plain = wf(&a, &y, &x0, &cfg, Some(&x)).unwrap();
        let off = SolverConfig { gradient_truncation: GradientTruncation::OFF, ..cfg };
        let trunc = twf(&a, &y, &x0, &off, Some(&x)).unwrap();
        assert_eq!(plain.estimate, trunc.estimate);
        assert_eq!(plain.trace, trunc.trace);
    }

    #[test]
    fn zero_start_is_rejected() {
        let (a, y, _) = instance::<f64>(4, 20, 2);
        assert!(wf(&a, &y, &[0.0; 4], &SolverConfig::default(), None).is_err());
        assert!(twf(&a, &y, &[1.0; 3], &SolverConfig::default(), None).is_err());
    }

    #[test]
    fn divergence_is_reported_degenerate() {
        let (a, y, x) = instance::<f64>(4, 20, 2);
        let cfg = SolverConfig { step_size: Some(1e200), max_iters: 20, ..Default::default() };
        let rep = wf(&a, &y, &x.iter().map(|v| v * 3.0).collect::<Vec<_>>(), &cfg, None).unwrap();
        assert_eq!(rep.termination, Termination::Degenerate);
    }

    #[test]
    fn trace_without_truth_starts_with_nan() {
        let (a, y, x) = instance::<f64>(4, 40, 5);
        let x0: Vec<f64> = x.iter().map(|v| v * 1.1).collect();
        let cfg = SolverConfig { max_iters: 5, ..Default::default() };
        let rep = twf(&a, &y, &x0, &cfg, None).unwrap();
        assert!(rep.trace[0].is_nan());
        assert_eq!(rep.trace.len(), rep.iterations + 1);
        assert_eq!(rep.times.len(), rep.trace.len());
    }

    #[test]
    fn altmin_fixed_point() {
        let (a, y, x) = instance::<Complex64>(8, 64, 4);
        let mut src = FixedMeasurements::new(&a, &y).unwrap();
        let rep = altmin_phase(&mut src, &x, &SolverConfig::default(), Some(&x)).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        assert_eq!(rep.iterations, 1);
        assert!(rep.final_error() < 1e-8);
    }

    #[test]
    fn altmin_underdetermined_is_degenerate() {
        let (a, y, x) = instance::<f64>(16, 8, 4);
        let mut src = FixedMeasurements::new(&a, &y).unwrap();
        let rep = altmin_phase(&mut src, &x, &SolverConfig::default(), Some(&x)).unwrap();
        assert_eq!(rep.termination, Termination::Degenerate);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn sample_splitting_consumes_one_item_per_iteration() {
        let n = 6;
        let mut g = GaussianStream::new(77, 1);
        let x: Vec<f64> = (0..n).map(|_| g.normal()).collect();
        let mut src = SplitMeasurements::new(ensemble_stream::<f64>(31, n, 8 * n).unwrap(), x.clone()).unwrap();
        let x0: Vec<f64> = x.iter().map(|v| v + 0.05).collect();
        let cfg = SolverConfig { sample_splitting: true, max_iters: 7, tol: 1e-300, ..Default::default() };
        let rep = altmin_phase(&mut src, &x0, &cfg, Some(&x)).unwrap();
        // Exact phases give exact recovery, after which successive iterates coincide.
        assert!(rep.iterations >= 2);
        assert_eq!(src.consumed(), rep.iterations + 1);
        assert_eq!(src.current().0.stream_index(), rep.iterations as u64);
    }
}
