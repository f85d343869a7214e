//! Sparse phase retrieval: AltMinSparse, thresholded Wirtinger flow and
//! CoPRAM, with the CoSaMP inner solver and the top-`s` projection.

use ndarray::Array2;

use crate::error::{ensure, Result};
use crate::field::{norm, Field};
use crate::linalg::cholesky_solve;
use crate::measurement::{MeasurementSource, Observation, SensingEnsemble};
use crate::solvers::unstructured::{altmin_loop, check_problem, check_truth, converged, gradient_loop, vector_error};
use crate::solvers::{Recorder, SolverConfig, SolverReport, Termination};
use crate::spectral::{sparse_spectral_init, top_s_indices};

/// Default step of [`thresh_wf`].
pub const THRESH_WF_STEP: f64 = 0.25;

/// Signal estimate with an explicit support; entries off the support are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseEstimate<T> {
    values: Vec<T>,
    support: Vec<usize>,
}

impl<T: Field> SparseEstimate<T> {
    /// Zeroes every entry outside `support` (sorted and deduplicated).
    pub fn new(mut values: Vec<T>, mut support: Vec<usize>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        ensure(support.iter().all(|&j| j < values.len()), || "support index out of range".into())?;
        let mut keep = vec![false; values.len()];
        support.iter().for_each(|&j| keep[j] = true);
        values.iter_mut().zip(&keep).filter(|(_, &k)| !k).for_each(|(v, _)| *v = T::zero());
        Ok(Self { values, support })
    }

    pub(crate) fn from_parts(values: Vec<T>, support: Vec<usize>) -> Self {
        Self { values, support }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn support(&self) -> &[usize] {
        &self.support
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Keeps the `s` largest-magnitude entries (ties to the lowest index) and
/// zeroes the rest. `s` is clamped to `x.len()`.
pub fn hard_threshold<T: Field>(x: &[T], s: usize) -> SparseEstimate<T> {
    let mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let support = top_s_indices(&mags, s.min(x.len()));
    let mut values = vec![T::zero(); x.len()];
    for &j in &support {
        values[j] = x[j];
    }
    SparseEstimate { values, support }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosampConfig {
    pub max_iters: usize,
    /// Stop when the residual norm changes by less than this fraction.
    pub stagnation: f64,
}

impl Default for CosampConfig {
    fn default() -> Self {
        Self { max_iters: 50, stagnation: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct CosampResult<T> {
    pub estimate: SparseEstimate<T>,
    pub iterations: usize,
    /// Least squares failed on every candidate support.
    pub degenerate: bool,
}

/// Least squares of `b` on the columns `cols` of the measurement operator.
fn support_ls<T: Field>(a: &SensingEnsemble<T>, b: &[T], cols: &[usize]) -> Option<Vec<T>> {
    let k = cols.len();
    if k == 0 || k > a.rows() {
        return None;
    }
    // Operator entries are conj(a_ij): G = Σ_i a_iS a_iS^H, rhs = Σ_i b_i a_iS.
    let mut g = Array2::<T>::zeros((k, k));
    let mut rhs = vec![T::zero(); k];
    for (row, &bi) in a.row_iter().zip(b) {
        for (p, &cp) in cols.iter().enumerate() {
            let ap = row[cp];
            rhs[p] += ap * bi;
            for (q, &cq) in cols.iter().enumerate().skip(p) {
                g[[p, q]] += ap * row[cq].conj();
            }
        }
    }
    for p in 0..k {
        for q in 0..p {
            g[[p, q]] = g[[q, p]].conj();
        }
    }
    cholesky_solve(&g, &rhs)
}

/// CoSaMP for `b ≈ A x` with `x` `s`-sparse.
pub fn cosamp<T: Field>(a: &SensingEnsemble<T>, b: &[T], s: usize, cfg: &CosampConfig) -> Result<CosampResult<T>> {
    ensure(b.len() == a.rows(), || format!("{} right-hand sides for {} rows", b.len(), a.rows()))?;
    let n = a.cols();
    ensure(s >= 1 && s <= n, || format!("sparsity {s} outside 1..={n}"))?;

    let b_norm = norm(b);
    let mut x = SparseEstimate { values: vec![T::zero(); n], support: Vec::new() };
    if b_norm == 0.0 {
        return Ok(CosampResult { estimate: hard_threshold(&x.values, s), iterations: 0, degenerate: false });
    }
    let mut residual = b.to_vec();
    let mut r_norm = b_norm;
    let mut failures = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let proxy = a.apply_adjoint(&residual);
        let proxy_mag: Vec<f64> = proxy.iter().map(|v| v.abs()).collect();
        let mut merged = top_s_indices(&proxy_mag, (2 * s).min(n));
        merged.extend_from_slice(&x.support);
        merged.sort_unstable();
        merged.dedup();

        let mut sol = support_ls(a, b, &merged);
        if sol.is_none() {
            // Prune to the strongest candidates the row count can identify.
            let cap = merged.len().min(a.rows()).saturating_sub(1).max(s.min(a.rows()));
            let score: Vec<f64> = merged.iter().map(|&j| proxy_mag[j] + x.values[j].abs()).collect();
            let keep = top_s_indices(&score, cap);
            merged = keep.into_iter().map(|p| merged[p]).collect();
            sol = support_ls(a, b, &merged);
        }
        let Some(coef) = sol else {
            failures += 1;
            if failures >= 2 {
                return Ok(CosampResult { estimate: x, iterations, degenerate: true });
            }
            continue;
        };

        let mut full = vec![T::zero(); n];
        for (&j, &c) in merged.iter().zip(&coef) {
            full[j] = c;
        }
        let next = hard_threshold(&full, s);
        let ax = a.apply(&next.values);
        let next_res: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let next_norm = norm(&next_res);
        let stalled = (r_norm - next_norm).abs() < cfg.stagnation * r_norm;
        x = next;
        residual = next_res;
        r_norm = next_norm;
        if r_norm <= 1e-14 * b_norm || stalled {
            break;
        }
    }
    Ok(CosampResult { estimate: x, iterations, degenerate: false })
}

/// Measurement source seen through a fixed column subset.
struct Restricted<'a, T: Field> {
    inner: &'a mut dyn MeasurementSource<T>,
    support: &'a [usize],
    current: (SensingEnsemble<T>, Observation),
}

impl<'a, T: Field> Restricted<'a, T> {
    fn new(inner: &'a mut dyn MeasurementSource<T>, support: &'a [usize]) -> Result<Self> {
        let (a, y) = inner.current();
        let current = (a.restrict_columns(support)?, y.clone());
        Ok(Self { inner, support, current })
    }
}

impl<T: Field> MeasurementSource<T> for Restricted<'_, T> {
    fn current(&self) -> (&SensingEnsemble<T>, &Observation) {
        (&self.current.0, &self.current.1)
    }
    fn advance(&mut self) -> Result<()> {
        self.inner.advance()?;
        let (a, y) = self.inner.current();
        self.current = (a.restrict_columns(self.support)?, y.clone());
        Ok(())
    }
    fn consumed(&self) -> usize {
        self.inner.consumed()
    }
}

fn embed<T: Field>(values: &[T], support: &[usize], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (&j, &v) in support.iter().zip(values) {
        out[j] = v;
    }
    out
}

fn degenerate_report<T: Field>(n: usize, truth: Option<&[T]>) -> SolverReport<SparseEstimate<T>> {
    let zero = vec![T::zero(); n];
    let mut rec = Recorder::new();
    rec.push(vector_error(truth, &zero, None));
    rec.finish(hard_threshold(&zero, 0), Termination::Degenerate, Vec::new())
}

/// AltMinSparse: support fixed once from the diagonal of `Y₀`, then
/// AltMinPhase on those coordinates; the estimate is zero elsewhere.
pub fn altmin_sparse<T: Field>(
    src: &mut dyn MeasurementSource<T>,
    s: usize,
    cfg: &SolverConfig,
    truth: Option<&[T]>,
) -> Result<SolverReport<SparseEstimate<T>>> {
    let (n, init) = {
        let (a, y) = src.current();
        (a.cols(), sparse_spectral_init(a, y, s)?)
    };
    check_truth(truth, n)?;
    if init.degenerate {
        return Ok(degenerate_report(n, truth));
    }
    let support = init.estimate.support().to_vec();
    let x0: Vec<T> = support.iter().map(|&j| init.estimate.values()[j]).collect();
    let mut restricted = Restricted::new(src, &support)?;
    let mut err = |x: &[T], prev: Option<&[T]>| {
        let full = embed(x, &support, n);
        let prev_full = prev.map(|p| embed(p, &support, n));
        vector_error(truth, &full, prev_full.as_deref())
    };
    let report = altmin_loop(&mut restricted, &x0, cfg, &mut err)?;
    let support_ref = &support;
    Ok(report.map(|v| SparseEstimate { values: embed(&v, support_ref, n), support: support_ref.clone() }))
}

/// Thresholded Wirtinger flow: a (truncated) gradient step followed by the
/// top-`s` projection, so the support can move every iteration.
///
/// Starts from `init` when given, otherwise from [`sparse_spectral_init`].
pub fn thresh_wf<T: Field>(
    a: &SensingEnsemble<T>,
    y: &Observation,
    s: usize,
    cfg: &SolverConfig,
    init: Option<&[T]>,
    truth: Option<&[T]>,
) -> Result<SolverReport<SparseEstimate<T>>> {
    let n = a.cols();
    check_truth(truth, n)?;
    ensure(s >= 1 && s <= n, || format!("sparsity {s} outside 1..={n}"))?;
    let x0 = match init {
        Some(x0) => x0.to_vec(),
        None => {
            let start = sparse_spectral_init(a, y, s)?;
            if start.degenerate {
                return Ok(degenerate_report(n, truth));
            }
            start.estimate.into_values()
        }
    };
    let mut err = |x: &[T], prev: Option<&[T]>| vector_error(truth, x, prev);
    let report = gradient_loop(a, y, &x0, cfg, cfg.step_or(THRESH_WF_STEP), cfg.gradient_truncation, Some(s), &mut err)?;
    Ok(report.map(|v| hard_threshold(&v, s)))
}

/// CoPRAM: alternate measurement-phase estimates with a CoSaMP solve of
/// `diag(phase) y ≈ A x`.
///
/// Starts from `init` when given, otherwise from [`sparse_spectral_init`]
/// on the source's first measurement set.
pub fn copram<T: Field>(
    src: &mut dyn MeasurementSource<T>,
    s: usize,
    cfg: &SolverConfig,
    init: Option<&[T]>,
    truth: Option<&[T]>,
) -> Result<SolverReport<SparseEstimate<T>>> {
    cfg.validate()?;
    let n = src.current().0.cols();
    check_truth(truth, n)?;
    ensure(s >= 1 && s <= n, || format!("sparsity {s} outside 1..={n}"))?;
    let x0 = match init {
        Some(x0) => x0.to_vec(),
        None => {
            let (a, y) = src.current();
            let start = sparse_spectral_init(a, y, s)?;
            if start.degenerate {
                return Ok(degenerate_report(n, truth));
            }
            start.estimate.into_values()
        }
    };
    {
        let (a, y) = src.current();
        check_problem(a, y, &x0)?;
    }

    let inner = CosampConfig::default();
    let mut rec = Recorder::new();
    rec.push(vector_error(truth, &x0, None));
    let mut x = hard_threshold(&x0, s);
    let mut termination = Termination::MaxIters;
    for _ in 0..cfg.max_iters {
        if cfg.sample_splitting {
            src.advance()?;
        }
        let (a, y) = src.current();
        let z = a.apply(x.values());
        let b: Vec<T> = z.iter().zip(y.values()).map(|(&zi, &yi)| zi.phase().scale(yi)).collect();
        let cs = cosamp(a, &b, s, &inner)?;
        if cs.degenerate || !norm(cs.estimate.values()).is_finite() {
            termination = Termination::Degenerate;
            break;
        }
        rec.push(vector_error(truth, cs.estimate.values(), Some(x.values())));
        let done = converged(cs.estimate.values(), x.values(), cfg.tol);
        x = cs.estimate;
        if done {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(rec.finish(x, termination, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{forward_phaseless, sample_ensemble, FixedMeasurements};
    use crate::rng::GaussianStream;
    use crate::solvers::unstructured::wf;
    use crate::solvers::GradientTruncation;
    use crate::spectral::{spectral_init, TruncationRule};
    use ndarray::Array2;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn hard_threshold_examples() {
        let h = hard_threshold(&[3.0, -5.0, 1.0], 2);
        assert_eq!(h.values(), &[3.0, -5.0, 0.0]);
        assert_eq!(h.support(), &[0, 1]);
        assert_eq!(hard_threshold(&[2.0, -2.0, 0.0], 1).values(), &[2.0, 0.0, 0.0]);
        for s in 1..=3 {
            assert!(hard_threshold(&[0.0; 3], s).values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sparse_estimate_zeroes_off_support() {
        let e = SparseEstimate::new(vec![1.0, 2.0, 3.0], vec![2, 0, 2]).unwrap();
        assert_eq!(e.values(), &[1.0, 0.0, 3.0]);
        assert_eq!(e.support(), &[0, 2]);
        assert!(SparseEstimate::new(vec![1.0], vec![3]).is_err());
    }

    fn subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == s {
                out.push(cur.clone());
                return;
            }
            for j in start..n {
                cur.push(j);
                rec(j + 1, n, s, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, s, &mut Vec::new(), &mut out);
        out
    }

    proptest! {
        #[test]
        fn hard_threshold_is_idempotent(x in proptest::collection::vec(-5.0f64..5.0, 1..12), s in 1usize..12) {
            let once = hard_threshold(&x, s);
            let twice = hard_threshold(once.values(), s);
            prop_assert_eq!(once.values(), twice.values());
        }

        #[test]
        fn hard_threshold_is_the_sparse_projection(x in proptest::collection::vec(-5.0f64..5.0, 1..=8), s in 1usize..=8) {
            let n = x.len();
            let s = s.min(n);
            let h = hard_threshold(&x, s);
            let dist = |v: &[f64]| v.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = subsets(n, s)
                .into_iter()
                .map(|supp| {
                    let mut v = vec![0.0; n];
                    supp.iter().for_each(|&j| v[j] = x[j]);
                    dist(&v)
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!((dist(h.values()) - best).abs() <= 1e-12 * (1.0 + best));
        }
    }

    #[test]
    fn cosamp_identity_and_zero() {
        let id = SensingEnsemble::from_rows(Array2::<f64>::eye(8), 0, 0).unwrap();
        let b = [0.0, 1.5, 0.0, 0.0, -2.0, 0.0, 0.25, 0.0];
        let res = cosamp(&id, &b, 3, &CosampConfig::default()).unwrap();
        assert_eq!(res.estimate.values(), &b);
        assert_eq!(res.estimate.support(), &[1, 4, 6]);

        let a = sample_ensemble::<f64>(10, 6, 1, 0).unwrap();
        let res = cosamp(&a, &[0.0; 6], 2, &CosampConfig::default()).unwrap();
        assert!(res.estimate.values().iter().all(|&v| v == 0.0));
    }

    fn best_subset_ls(a: &SensingEnsemble<f64>, b: &[f64], s: usize) -> Vec<f64> {
        let n = a.cols();
        let mut best = (f64::INFINITY, vec![0.0; n]);
        for supp in subsets(n, s) {
            let m = nalgebra::DMatrix::from_fn(a.rows(), s, |i, j| a.row(i)[supp[j]]);
            let rhs = nalgebra::DVector::from_column_slice(b);
            let sol = m.clone().svd(true, true).solve(&rhs, 1e-14).unwrap();
            let res = (&m * &sol - &rhs).norm();
            if res < best.0 {
                let mut v = vec![0.0; n];
                supp.iter().zip(sol.iter()).for_each(|(&j, &c)| v[j] = c);
                best = (res, v);
            }
        }
        best.1
    }

    #[test]
    fn cosamp_matches_exhaustive_best_subset() {
        for seed in 0..10u64 {
            let n = 8 + (seed as usize % 5);
            let s = 1 + (seed as usize % 2);
            let m = 8;
            let a = sample_ensemble::<f64>(n, m, 100 + seed, 0).unwrap();
            let mut g = GaussianStream::new(seed, 3);
            let supp = g.choose_indices(n, s);
            let mut x = vec![0.0; n];
            supp.iter().for_each(|&j| x[j] = g.normal() + 2.0f64.copysign(g.normal()));
            let b = a.apply(&x);
            let got = cosamp(&a, &b, s, &CosampConfig::default()).unwrap();
            let brute = best_subset_ls(&a, &b, s);
            let err: f64 = got.estimate.values().iter().zip(&brute).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            assert!(err < 1e-8, "seed {seed}: {err}");
        }
    }

    fn sparse_instance(n: usize, s: usize, m: usize, seed: u64) -> (SensingEnsemble<f64>, Observation, Vec<f64>) {
        let a = sample_ensemble::<f64>(n, m, seed, 0).unwrap();
        let mut g = GaussianStream::new(seed, u64::MAX);
        let mut x = vec![0.0; n];
        for j in g.choose_indices(n, s) {
            x[j] = g.normal();
        }
        let y = forward_phaseless(&a, &x).unwrap();
        (a, y, x)
    }

    #[test]
    fn thresh_wf_fixed_point() {
        let (a, y, x) = sparse_instance(40, 3, 60, 2);
        let rep = thresh_wf(&a, &y, 3, &SolverConfig::default(), Some(&x), Some(&x)).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        assert_eq!(rep.iterations, 1);
        assert!(rep.final_error() < 1e-12);
    }

    #[test]
    fn thresh_wf_full_support_without_truncation_is_wf() {
        let (a, y, x) = sparse_instance(6, 6, 60, 3);
        let cfg = SolverConfig {
            max_iters: 40,
            step_size: Some(0.2),
            gradient_truncation: GradientTruncation::OFF,
            ..Default::default()
        };
        let x0 = spectral_init(&a, &y, TruncationRule::NONE).unwrap();
        let plain = wf(&a, &y, &x0, &cfg, Some(&x)).unwrap();
        let thr = thresh_wf(&a, &y, 6, &cfg, None, Some(&x)).unwrap();
        assert_eq!(plain.trace, thr.trace);
        assert_eq!(plain.estimate, thr.estimate.into_values());
    }

    #[test]
    fn copram_exact_phases_single_solve() {
        let id = SensingEnsemble::from_rows(Array2::<f64>::eye(10), 0, 0).unwrap();
        let mut x = vec![0.0; 10];
        x[2] = 1.0;
        x[7] = -3.0;
        let y = forward_phaseless(&id, &x).unwrap();
        let mut src = FixedMeasurements::new(&id, &y).unwrap();
        let rep = copram(&mut src, 2, &SolverConfig::default(), Some(&x), Some(&x)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.termination, Termination::Converged);
        assert_eq!(rep.estimate.values(), &x[..]);
    }

    #[test]
    fn altmin_sparse_full_support_is_altmin_phase() {
        let (a, y, x) = sparse_instance(6, 6, 48, 5);
        let cfg = SolverConfig { max_iters: 30, ..Default::default() };
        let mut src = FixedMeasurements::new(&a, &y).unwrap();
        let sparse = altmin_sparse(&mut src, 6, &cfg, Some(&x)).unwrap();
        let init = sparse_spectral_init(&a, &y, 6).unwrap().estimate.into_values();
        let mut src = FixedMeasurements::new(&a, &y).unwrap();
        let plain = crate::solvers::unstructured::altmin_phase(&mut src, &init, &cfg, Some(&x)).unwrap();
        assert_eq!(sparse.trace, plain.trace);
        assert_eq!(sparse.estimate.values(), &plain.estimate[..]);
    }

    #[test]
    fn sign_flip_covariance_of_sparse_solvers() {
        let (a, y, x) = sparse_instance(60, 3, 80, 9);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let x0: Vec<f64> = x.iter().map(|v| 0.9 * v).collect();
        let x0n: Vec<f64> = x0.iter().map(|v| -v).collect();
        let cfg = SolverConfig { max_iters: 50, ..Default::default() };

        let p = thresh_wf(&a, &y, 3, &cfg, Some(&x0), Some(&x)).unwrap();
        let q = thresh_wf(&a, &y, 3, &cfg, Some(&x0n), Some(&neg)).unwrap();
        for (u, v) in p.trace.iter().zip(&q.trace) {
            assert!((u - v).abs() <= 1e-10);
        }
        for (u, v) in p.estimate.values().iter().zip(q.estimate.values()) {
            assert!((u + v).abs() <= 1e-10);
        }

        let mut s1 = FixedMeasurements::new(&a, &y).unwrap();
        let mut s2 = FixedMeasurements::new(&a, &y).unwrap();
        let p = copram(&mut s1, 3, &cfg, Some(&x0), Some(&x)).unwrap();
        let q = copram(&mut s2, 3, &cfg, Some(&x0n), Some(&neg)).unwrap();
        for (u, v) in p.trace.iter().zip(&q.trace) {
            assert!((u - v).abs() <= 1e-10);
        }

        let mut s1 = FixedMeasurements::new(&a, &y).unwrap();
        let mut s2 = FixedMeasurements::new(&a, &y).unwrap();
        let p = altmin_sparse(&mut s1, 3, &cfg, Some(&x)).unwrap();
        let q = altmin_sparse(&mut s2, 3, &cfg, Some(&neg)).unwrap();
        assert_eq!(p.trace, q.trace);
    }

    #[test]
    fn complex_cosamp_recovers_sparse_signal() {
        let a = sample_ensemble::<Complex64>(40, 30, 4, 0).unwrap();
        let mut x = vec![Complex64::new(0.0, 0.0); 40];
        x[3] = Complex64::new(1.0, -1.0);
        x[21] = Complex64::new(-0.5, 2.0);
        let b = a.apply(&x);
        let res = cosamp(&a, &b, 2, &CosampConfig::default()).unwrap();
        let err: f64 = res.estimate.values().iter().zip(&x).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10);
    }
}
