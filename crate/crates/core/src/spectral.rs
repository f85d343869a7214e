//! Spectral and truncated-spectral initializations.
//!
//! The weighted covariance `Y = (1/N) Σ y_i² a_i a_i^H` has expectation
//! `‖x‖² I + 2 x x^T` for real Gaussian measurements and
//! `‖x‖² I + x x^H` for complex ones, so its top eigenvector points along
//! the signal. The column-wise version pools all `mq` measurements and its
//! top-`r` eigenvectors estimate the shared column span.

use ndarray::Array2;

use crate::error::{ensure, Error, Result};
use crate::field::{axpy, dotc, Field};
use crate::linalg::{top_eigenvectors, HermitianOperator};
use crate::measurement::{ColumnwiseEnsemble, Observation, SensingEnsemble};
use crate::solvers::sparse::SparseEstimate;

/// Largest dimension for which the spectral matrix is stored densely.
pub const DENSE_LIMIT: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationMode {
    None,
    MeanMultiple,
}

/// Keeps term `i` only when `y_i² ≤ c_trunc · mean(y²)` (mode `MeanMultiple`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationRule {
    pub mode: TruncationMode,
    pub c_trunc: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self { mode: TruncationMode::MeanMultiple, c_trunc: 9.0 }
    }
}

impl TruncationRule {
    pub const NONE: TruncationRule = TruncationRule { mode: TruncationMode::None, c_trunc: 9.0 };

    pub fn mean_multiple(c_trunc: f64) -> Result<Self> {
        ensure(c_trunc > 0.0 && c_trunc.is_finite(), || format!("c_trunc must be positive, got {c_trunc}"))?;
        Ok(Self { mode: TruncationMode::MeanMultiple, c_trunc })
    }

    /// Threshold on `y²` given the mean of `y²`; infinite when disabled.
    fn threshold(&self, mean_sq: f64) -> f64 {
        match self.mode {
            TruncationMode::None => f64::INFINITY,
            TruncationMode::MeanMultiple => self.c_trunc * mean_sq,
        }
    }
}

#[derive(Clone, Debug)]
enum Repr<T> {
    Dense(Array2<T>),
    /// `v -> scale · Σ_i w_i <a_i, v> a_i` over the stored ensembles.
    Implicit {
        ensembles: Vec<SensingEnsemble<T>>,
        weights: Vec<Vec<f64>>,
        scale: f64,
    },
}

/// `Y = (1/N) Σ y_i² a_i a_i^H` over the terms passing a [`TruncationRule`].
#[derive(Clone, Debug)]
pub struct SpectralMatrix<T> {
    repr: Repr<T>,
    n: usize,
    samples: usize,
    kept: usize,
    rule: TruncationRule,
}

impl<T: Field> SpectralMatrix<T> {
    pub fn dim(&self) -> usize {
        self.n
    }
    /// Normalizing count `N` (`m`, or `mq` for the column-wise matrix).
    pub fn samples(&self) -> usize {
        self.samples
    }
    /// Terms that survived truncation.
    pub fn kept(&self) -> usize {
        self.kept
    }
    pub fn rule(&self) -> TruncationRule {
        self.rule
    }
    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense(_))
    }

    pub fn to_dense(&self) -> Array2<T> {
        match &self.repr {
            Repr::Dense(y) => y.clone(),
            Repr::Implicit { .. } => {
                let mut out = Array2::zeros((self.n, self.n));
                let mut e = vec![T::zero(); self.n];
                let mut col = vec![T::zero(); self.n];
                for j in 0..self.n {
                    e.iter_mut().for_each(|v| *v = T::zero());
                    e[j] = T::one();
                    self.apply(&e, &mut col);
                    out.column_mut(j).iter_mut().zip(&col).for_each(|(d, &v)| *d = v);
                }
                out
            }
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Dense(y) => (0..self.n).map(|i| y[[i, i]].re()).sum(),
            Repr::Implicit { ensembles, weights, scale } => {
                let mut acc = 0.0;
                for (a, w) in ensembles.iter().zip(weights) {
                    for (row, &wi) in a.row_iter().zip(w) {
                        acc += wi * row.iter().map(|v| v.norm_sqr()).sum::<f64>();
                    }
                }
                acc * scale
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(y) => (0..self.n).map(|i| y[[i, i]].re()).collect(),
            Repr::Implicit { ensembles, weights, scale } => {
                let mut d = vec![0.0; self.n];
                for (a, w) in ensembles.iter().zip(weights) {
                    for (row, &wi) in a.row_iter().zip(w) {
                        for (dj, v) in d.iter_mut().zip(row) {
                            *dj += wi * v.norm_sqr();
                        }
                    }
                }
                d.iter_mut().for_each(|v| *v *= scale);
                d
            }
        }
    }
}

impl<T: Field> HermitianOperator<T> for SpectralMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[T], out: &mut [T]) {
        match &self.repr {
            Repr::Dense(y) => y.apply(v, out),
            Repr::Implicit { ensembles, weights, scale } => {
                out.iter_mut().for_each(|o| *o = T::zero());
                for (a, w) in ensembles.iter().zip(weights) {
                    for (row, &wi) in a.row_iter().zip(w) {
                        if wi == 0.0 {
                            continue;
                        }
                        let z = dotc(row, v);
                        axpy(z.scale(wi * scale), row, out);
                    }
                }
            }
        }
    }
}

/// Accumulates `scale · Σ w_i a_i a_i^H`, upper triangle then mirrored.
fn accumulate_dense<T: Field>(n: usize, terms: &[(&SensingEnsemble<T>, Vec<f64>)], scale: f64) -> Array2<T> {
    let mut y = Array2::<T>::zeros((n, n));
    for (a, w) in terms {
        for (row, &wi) in a.row_iter().zip(w) {
            if wi == 0.0 {
                continue;
            }
            for j in 0..n {
                let aj = row[j].scale(wi);
                for l in j..n {
                    y[[j, l]] += aj * row[l].conj();
                }
            }
        }
    }
    for j in 0..n {
        y[[j, j]] = T::from_real(y[[j, j]].re() * scale);
        for l in j + 1..n {
            let v = y[[j, l]].scale(scale);
            y[[j, l]] = v;
            y[[l, j]] = v.conj();
        }
    }
    y
}

fn build<T: Field>(
    ensembles: Vec<&SensingEnsemble<T>>,
    observations: Vec<&[f64]>,
    rule: TruncationRule,
) -> Result<SpectralMatrix<T>> {
    let n = ensembles[0].cols();
    let samples: usize = observations.iter().map(|y| y.len()).sum();
    ensure(samples > 0, || "no measurements".into())?;
    let mean_sq = observations.iter().flat_map(|y| y.iter()).map(|v| v * v).sum::<f64>() / samples as f64;
    let threshold = rule.threshold(mean_sq);

    let mut kept = 0;
    let weights: Vec<Vec<f64>> = observations
        .iter()
        .map(|y| {
            y.iter()
                .map(|&v| {
                    let v2 = v * v;
                    if v2 <= threshold {
                        kept += 1;
                        v2
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    if kept == 0 {
        return Err(Error::DegenerateInput("every measurement was truncated".into()));
    }
    let scale = 1.0 / samples as f64;
    let repr = if n <= DENSE_LIMIT {
        let terms: Vec<_> = ensembles.iter().copied().zip(weights).collect();
        Repr::Dense(accumulate_dense(n, &terms, scale))
    } else {
        Repr::Implicit { ensembles: ensembles.into_iter().cloned().collect(), weights, scale }
    };
    Ok(SpectralMatrix { repr, n, samples, kept, rule })
}

/// `Y₀ = (1/m) Σ y_i² a_i a_i^H` over measurements passing `rule`.
pub fn build_y0<T: Field>(a: &SensingEnsemble<T>, y: &Observation, rule: TruncationRule) -> Result<SpectralMatrix<T>> {
    ensure(a.rows() == y.len(), || format!("{} observations for {} measurement rows", y.len(), a.rows()))?;
    build(vec![a], vec![y.values()], rule)
}

/// `Y_U = (1/mq) Σ_{k,i} y_ik² a_ik a_ik^H` over measurements passing `rule`.
pub fn build_yu<T: Field>(e: &ColumnwiseEnsemble<T>, ys: &Array2<f64>, rule: TruncationRule) -> Result<SpectralMatrix<T>> {
    ensure(ys.dim() == (e.m(), e.q()), || {
        format!("observations {:?} do not match ensemble ({}, {})", ys.dim(), e.m(), e.q())
    })?;
    let cols: Vec<Vec<f64>> = (0..e.q()).map(|k| ys.column(k).to_vec()).collect();
    build(e.iter().collect(), cols.iter().map(|c| c.as_slice()).collect(), rule)
}

/// Rotates `v` so its largest-modulus entry is real and positive.
fn canonical_phase<T: Field>(v: &mut [T]) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
        .0;
    let c = v[pivot].phase().conj();
    v.iter_mut().for_each(|x| *x *= c);
}

/// Unit top eigenvector of `Y` scaled to `norm_estimate`.
pub fn spectral_estimate<T: Field, O: HermitianOperator<T> + ?Sized>(y: &O, norm_estimate: f64) -> Result<Vec<T>> {
    ensure(norm_estimate > 0.0 && norm_estimate.is_finite(), || {
        format!("norm estimate must be positive, got {norm_estimate}")
    })?;
    let eig = top_eigenvectors(y, 1)?;
    let mut v = eig.vectors.column(0).to_vec();
    canonical_phase(&mut v);
    v.iter_mut().for_each(|x| *x = x.scale(norm_estimate));
    Ok(v)
}

/// `√((1/m) Σ y²)`, the norm estimate used for spectral starts.
pub fn norm_estimate(y: &Observation) -> f64 {
    y.mean_square().sqrt()
}

/// Spectral start for unstructured problems: top eigenvector of the
/// (optionally truncated) `Y₀`, scaled by [`norm_estimate`].
pub fn spectral_init<T: Field>(a: &SensingEnsemble<T>, y: &Observation, rule: TruncationRule) -> Result<Vec<T>> {
    let ymat = build_y0(a, y, rule)?;
    let scale = norm_estimate(y);
    if scale == 0.0 {
        return Err(Error::DegenerateSpectrum { gap: 0.0 });
    }
    spectral_estimate(&ymat, scale)
}

/// Sorts indices by decreasing score, ties to the lowest index, keeps `s`.
pub(crate) fn top_s_indices(scores: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Indices of the `s` largest diagonal entries of `Y₀`, ascending.
pub fn sparse_support_init<T: Field>(a: &SensingEnsemble<T>, y: &Observation, s: usize) -> Result<Vec<usize>> {
    ensure(a.rows() == y.len(), || format!("{} observations for {} measurement rows", y.len(), a.rows()))?;
    ensure(s >= 1 && s <= a.cols(), || format!("sparsity {s} outside 1..={}", a.cols()))?;
    let m = a.rows() as f64;
    let mut diag = vec![0.0; a.cols()];
    for (row, &yi) in a.row_iter().zip(y.values()) {
        let w = yi * yi;
        for (d, v) in diag.iter_mut().zip(row) {
            *d += w * v.norm_sqr();
        }
    }
    diag.iter_mut().for_each(|d| *d /= m);
    Ok(top_s_indices(&diag, s))
}

/// Output of [`sparse_spectral_init`]; `degenerate` marks a zero estimate
/// returned because the restricted spectrum had no usable gap.
#[derive(Clone, Debug)]
pub struct SparseInit<T> {
    pub estimate: SparseEstimate<T>,
    pub degenerate: bool,
}

/// Support from [`sparse_support_init`], values from the top eigenvector
/// of `Y₀` restricted to that support.
pub fn sparse_spectral_init<T: Field>(a: &SensingEnsemble<T>, y: &Observation, s: usize) -> Result<SparseInit<T>> {
    let support = sparse_support_init(a, y, s)?;
    let n = a.cols();
    let scale = norm_estimate(y);
    let sub = a.restrict_columns(&support)?;
    let ymat = build_y0(&sub, y, TruncationRule::NONE)?;
    let result = if scale > 0.0 { spectral_estimate(&ymat, scale) } else { Err(Error::DegenerateSpectrum { gap: 0.0 }) };
    match result {
        Ok(v) => {
            let mut values = vec![T::zero(); n];
            for (&j, &vj) in support.iter().zip(&v) {
                values[j] = vj;
            }
            Ok(SparseInit { estimate: SparseEstimate::from_parts(values, support), degenerate: false })
        }
        Err(Error::DegenerateSpectrum { .. }) => {
            Ok(SparseInit { estimate: SparseEstimate::from_parts(vec![T::zero(); n], Vec::new()), degenerate: true })
        }
        Err(e) => Err(e),
    }
}

/// Top-`r` eigenvectors of `Y_U` (orthonormal `n × r`).
pub fn lowrank_spectral_init<T: Field>(
    e: &ColumnwiseEnsemble<T>,
    ys: &Array2<f64>,
    r: usize,
    rule: TruncationRule,
) -> Result<Array2<T>> {
    ensure(r >= 1 && r <= e.n().min(e.q()), || {
        format!("rank {r} outside 1..={}", e.n().min(e.q()))
    })?;
    let yu = build_yu(e, ys, rule)?;
    Ok(top_eigenvectors(&yu, r)?.vectors)
}
