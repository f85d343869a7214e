//! Gaussian sensing ensembles and the phaseless forward model `y = |A x|`.
//!
//! Row `i` of an ensemble stores the measurement vector `a_i`; the
//! measurement is `y_i = |<a_i, x>| = |Σ_j conj(a_ij) x_j|`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{ensure, invalid, Result};
use crate::field::{axpy, dotc, Field, ScalarField};
use crate::rng::GaussianStream;

/// Dense row-major `m × n` measurement matrix, addressed by `(seed, stream_index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingEnsemble<T> {
    entries: Array2<T>,
    seed: u64,
    stream_index: u64,
}

impl<T: Field> SensingEnsemble<T> {
    /// Wraps an explicit matrix whose rows are the measurement vectors.
    pub fn from_rows(entries: Array2<T>, seed: u64, stream_index: u64) -> Result<Self> {
        ensure(entries.nrows() >= 1 && entries.ncols() >= 1, || {
            format!("ensemble must be at least 1x1, got {:?}", entries.dim())
        })?;
        let entries = entries.as_standard_layout().into_owned();
        Ok(Self { entries, seed, stream_index })
    }

    pub fn field(&self) -> ScalarField {
        T::KIND
    }
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }
    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let n = self.cols();
        &self.entries.as_slice().expect("standard layout")[i * n..(i + 1) * n]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.entries
            .as_slice()
            .expect("standard layout")
            .chunks_exact(self.cols())
    }

    /// `z_i = <a_i, x>` for every row.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols());
        self.row_iter().map(|a| dotc(a, x)).collect()
    }

    /// `Σ_i w_i a_i` (the adjoint of [`apply`](Self::apply)).
    pub fn apply_adjoint(&self, w: &[T]) -> Vec<T> {
        debug_assert_eq!(w.len(), self.rows());
        let mut out = vec![T::zero(); self.cols()];
        for (a, &wi) in self.row_iter().zip(w) {
            axpy(wi, a, &mut out);
        }
        out
    }

    /// Ensemble restricted to the given signal coordinates.
    pub fn restrict_columns(&self, cols: &[usize]) -> Result<Self> {
        ensure(!cols.is_empty(), || "empty column selection".into())?;
        ensure(cols.iter().all(|&c| c < self.cols()), || "column index out of range".into())?;
        let m = self.rows();
        let mut out = Array2::zeros((m, cols.len()));
        for (i, a) in self.row_iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out[[i, j]] = a[c];
            }
        }
        Self::from_rows(out, self.seed, self.stream_index)
    }

    /// Ensemble with rows `U^H a_i`, so that `<U^H a_i, b> = <a_i, U b>`.
    pub fn compress(&self, u: &Array2<T>) -> Result<Self> {
        ensure(u.nrows() == self.cols(), || {
            format!("basis has {} rows, ensemble has {} columns", u.nrows(), self.cols())
        })?;
        let r = u.ncols();
        let mut out = Array2::zeros((self.rows(), r));
        for (i, a) in self.row_iter().enumerate() {
            for j in 0..r {
                let mut acc = T::zero();
                for (l, &al) in a.iter().enumerate() {
                    acc += u[[l, j]].conj() * al;
                }
                out[[i, j]] = acc;
            }
        }
        Self::from_rows(out, self.seed, self.stream_index)
    }
}

/// Draws an `m × n` ensemble of i.i.d. unit-variance Gaussians of field `T`.
pub fn sample_ensemble<T: Field>(n: usize, m: usize, seed: u64, stream_index: u64) -> Result<SensingEnsemble<T>> {
    ensure(n >= 1 && m >= 1, || format!("ensemble dimensions must be positive (n={n}, m={m})"))?;
    let mut g = GaussianStream::new(seed, stream_index);
    let mut data = vec![T::zero(); m * n];
    g.fill(&mut data);
    let entries = Array2::from_shape_vec((m, n), data).expect("shape matches buffer");
    Ok(SensingEnsemble { entries, seed, stream_index })
}

/// Nonnegative magnitudes `y = |A x|`, tagged with the ensemble that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    values: Array1<f64>,
    seed: u64,
    stream_index: u64,
}

impl Observation {
    pub fn new(values: Array1<f64>, seed: u64, stream_index: u64) -> Result<Self> {
        ensure(values.iter().all(|v| *v >= 0.0 && v.is_finite()), || {
            "observations must be finite and nonnegative".into()
        })?;
        Ok(Self { values, seed, stream_index })
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice().expect("contiguous")
    }
    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// `(1/m) Σ y_i²`, an unbiased estimate of `‖x‖²`.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.len().max(1) as f64
    }
}

pub fn forward_phaseless<T: Field>(a: &SensingEnsemble<T>, x: &[T]) -> Result<Observation> {
    ensure(x.len() == a.cols(), || {
        format!("signal length {} does not match ensemble width {}", x.len(), a.cols())
    })?;
    let values: Array1<f64> = a.row_iter().map(|row| dotc(row, x).abs()).collect();
    Observation::new(values, a.seed, a.stream_index)
}

/// Independent per-column ensembles `A_1 … A_q` sharing `(m, n, field)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnwiseEnsemble<T> {
    columns: Vec<SensingEnsemble<T>>,
}

impl<T: Field> ColumnwiseEnsemble<T> {
    pub fn new(columns: Vec<SensingEnsemble<T>>) -> Result<Self> {
        let first = columns.first().ok_or_else(|| invalid("columnwise ensemble needs q >= 1"))?;
        let (m, n) = (first.rows(), first.cols());
        ensure(columns.iter().all(|c| c.rows() == m && c.cols() == n), || {
            "all column ensembles must share (m, n)".into()
        })?;
        let mut ids: Vec<(u64, u64)> = columns.iter().map(|c| (c.seed, c.stream_index)).collect();
        ids.sort_unstable();
        ensure(ids.windows(2).all(|w| w[0] != w[1]), || {
            "column ensembles must use distinct sub-streams".into()
        })?;
        Ok(Self { columns })
    }

    /// Column `k` uses sub-stream `first_stream + k`.
    pub fn sample(n: usize, m: usize, q: usize, seed: u64, first_stream: u64) -> Result<Self> {
        ensure(q >= 1, || "q must be positive".into())?;
        let columns = (0..q as u64)
            .map(|k| sample_ensemble(n, m, seed, first_stream + k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns })
    }

    pub fn q(&self) -> usize {
        self.columns.len()
    }
    pub fn m(&self) -> usize {
        self.columns[0].rows()
    }
    pub fn n(&self) -> usize {
        self.columns[0].cols()
    }
    pub fn column(&self, k: usize) -> &SensingEnsemble<T> {
        &self.columns[k]
    }
    pub fn iter(&self) -> impl Iterator<Item = &SensingEnsemble<T>> + '_ {
        self.columns.iter()
    }
}

/// `Y[:, k] = |A_k x_k|` as an `m × q` array.
pub fn forward_columnwise<T: Field>(e: &ColumnwiseEnsemble<T>, x: &Array2<T>) -> Result<Array2<f64>> {
    ensure(x.nrows() == e.n() && x.ncols() == e.q(), || {
        format!("matrix is {:?}, ensemble expects ({}, {})", x.dim(), e.n(), e.q())
    })?;
    let mut out = Array2::zeros((e.m(), e.q()));
    for (k, a) in e.iter().enumerate() {
        let xk = x.column(k).to_vec();
        for (i, row) in a.row_iter().enumerate() {
            out[[i, k]] = dotc(row, &xk).abs();
        }
    }
    Ok(out)
}

/// Infinite sequence of fresh ensembles; item `t` uses sub-stream `t`.
#[derive(Clone, Debug)]
pub struct EnsembleStream<T> {
    seed: u64,
    n: usize,
    m: usize,
    next: u64,
    _field: std::marker::PhantomData<T>,
}

pub fn ensemble_stream<T: Field>(seed: u64, n: usize, m: usize) -> Result<EnsembleStream<T>> {
    ensure(n >= 1 && m >= 1, || format!("ensemble dimensions must be positive (n={n}, m={m})"))?;
    Ok(EnsembleStream { seed, n, m, next: 0, _field: std::marker::PhantomData })
}

impl<T: Field> EnsembleStream<T> {
    /// Index of the next item to be produced.
    pub fn position(&self) -> u64 {
        self.next
    }
}

impl<T: Field> Iterator for EnsembleStream<T> {
    type Item = SensingEnsemble<T>;

    fn next(&mut self) -> Option<Self::Item> {
        let e = sample_ensemble(self.n, self.m, self.seed, self.next).expect("dimensions validated");
        self.next += 1;
        Some(e)
    }
}

/// Where an alternating solver gets its ensemble and observations.
///
/// Fixed sources always return the same pair. Sample-splitting sources hand
/// out a fresh pair on every [`advance`](Self::advance).
pub trait MeasurementSource<T: Field> {
    fn current(&self) -> (&SensingEnsemble<T>, &Observation);
    fn advance(&mut self) -> Result<()>;
    /// Number of distinct ensembles handed out so far.
    fn consumed(&self) -> usize;
}

pub struct FixedMeasurements<'a, T> {
    ensemble: &'a SensingEnsemble<T>,
    observation: &'a Observation,
}

impl<'a, T: Field> FixedMeasurements<'a, T> {
    pub fn new(ensemble: &'a SensingEnsemble<T>, observation: &'a Observation) -> Result<Self> {
        ensure(ensemble.rows() == observation.len(), || {
            format!("{} observations for {} measurement rows", observation.len(), ensemble.rows())
        })?;
        Ok(Self { ensemble, observation })
    }
}

impl<T: Field> MeasurementSource<T> for FixedMeasurements<'_, T> {
    fn current(&self) -> (&SensingEnsemble<T>, &Observation) {
        (self.ensemble, self.observation)
    }
    fn advance(&mut self) -> Result<()> {
        Ok(())
    }
    fn consumed(&self) -> usize {
        1
    }
}

/// Sample splitting: each item of an [`EnsembleStream`] measured against the same truth.
pub struct SplitMeasurements<T> {
    stream: EnsembleStream<T>,
    truth: Vec<T>,
    current: (SensingEnsemble<T>, Observation),
    consumed: usize,
}

impl<T: Field> SplitMeasurements<T> {
    pub fn new(mut stream: EnsembleStream<T>, truth: Vec<T>) -> Result<Self> {
        let a = stream.next().expect("stream is infinite");
        let y = forward_phaseless(&a, &truth)?;
        Ok(Self { stream, truth, current: (a, y), consumed: 1 })
    }
}

impl<T: Field> MeasurementSource<T> for SplitMeasurements<T> {
    fn current(&self) -> (&SensingEnsemble<T>, &Observation) {
        (&self.current.0, &self.current.1)
    }
    fn advance(&mut self) -> Result<()> {
        let a = self.stream.next().expect("stream is infinite");
        let y = forward_phaseless(&a, &self.truth)?;
        self.current = (a, y);
        self.consumed += 1;
        Ok(())
    }
    fn consumed(&self) -> usize {
        self.consumed
    }
}

/// Column-wise counterpart of [`MeasurementSource`].
pub trait ColumnwiseSource<T: Field> {
    fn current(&self) -> (&ColumnwiseEnsemble<T>, &Array2<f64>);
    fn advance(&mut self) -> Result<()>;
    fn consumed(&self) -> usize;
}

pub struct FixedColumnwise<'a, T> {
    ensemble: &'a ColumnwiseEnsemble<T>,
    observations: &'a Array2<f64>,
}

impl<'a, T: Field> FixedColumnwise<'a, T> {
    pub fn new(ensemble: &'a ColumnwiseEnsemble<T>, observations: &'a Array2<f64>) -> Result<Self> {
        ensure(observations.dim() == (ensemble.m(), ensemble.q()), || {
            format!("observations {:?} do not match ensemble ({}, {})", observations.dim(), ensemble.m(), ensemble.q())
        })?;
        ensure(observations.iter().all(|v| *v >= 0.0 && v.is_finite()), || {
            "observations must be finite and nonnegative".into()
        })?;
        Ok(Self { ensemble, observations })
    }
}

impl<T: Field> ColumnwiseSource<T> for FixedColumnwise<'_, T> {
    fn current(&self) -> (&ColumnwiseEnsemble<T>, &Array2<f64>) {
        (self.ensemble, self.observations)
    }
    fn advance(&mut self) -> Result<()> {
        Ok(())
    }
    fn consumed(&self) -> usize {
        1
    }
}

/// Fresh column-wise ensembles per draw: set `t` uses sub-streams `first + t·q + k`.
pub struct SplitColumnwise<T> {
    seed: u64,
    first_stream: u64,
    m: usize,
    truth: Array2<T>,
    current: (ColumnwiseEnsemble<T>, Array2<f64>),
    consumed: usize,
}

impl<T: Field> SplitColumnwise<T> {
    pub fn new(seed: u64, first_stream: u64, m: usize, truth: Array2<T>) -> Result<Self> {
        let e = ColumnwiseEnsemble::sample(truth.nrows(), m, truth.ncols(), seed, first_stream)?;
        let y = forward_columnwise(&e, &truth)?;
        Ok(Self { seed, first_stream, m, truth, current: (e, y), consumed: 1 })
    }
}

impl<T: Field> ColumnwiseSource<T> for SplitColumnwise<T> {
    fn current(&self) -> (&ColumnwiseEnsemble<T>, &Array2<f64>) {
        (&self.current.0, &self.current.1)
    }
    fn advance(&mut self) -> Result<()> {
        let (n, q) = self.truth.dim();
        let first = self.first_stream + (self.consumed * q) as u64;
        let e = ColumnwiseEnsemble::sample(n, self.m, q, self.seed, first)?;
        let y = forward_columnwise(&e, &self.truth)?;
        self.current = (e, y);
        self.consumed += 1;
        Ok(())
    }
    fn consumed(&self) -> usize {
        self.consumed
    }
}
