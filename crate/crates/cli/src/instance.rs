//! Seeded problem instances for the harness.
//!
//! Everything about trial `seed` comes from sub-streams of that seed:
//! ensembles use streams `0, 1, ...` (matching [`ensemble_stream`]) and the
//! signal uses [`SIGNAL_STREAM`].

use ndarray::Array2;
use phaseforge_core::measurement::ensemble_stream;
use phaseforge_core::rng::GaussianStream;
use phaseforge_core::solvers::lowrank::{generate_lrpr_instance, LrprInstance};
use phaseforge_core::{
    forward_phaseless, sample_ensemble, Field, Observation, Result, SensingEnsemble, SplitMeasurements,
};

pub const SIGNAL_STREAM: u64 = 1 << 40;

/// Single-signal instance: truth, one ensemble and its observation.
#[derive(Clone, Debug)]
pub struct VectorInstance<T> {
    pub truth: Vec<T>,
    pub ensemble: SensingEnsemble<T>,
    pub observation: Observation,
    pub seed: u64,
}

impl<T: Field> VectorInstance<T> {
    pub fn new(truth: Vec<T>, m: usize, seed: u64) -> Result<Self> {
        let ensemble = sample_ensemble(truth.len(), m, seed, 0)?;
        let observation = forward_phaseless(&ensemble, &truth)?;
        Ok(Self { truth, ensemble, observation, seed })
    }

    /// Sample-splitting source whose first item is this instance's ensemble.
    pub fn split_source(&self) -> Result<SplitMeasurements<T>> {
        let stream = ensemble_stream(self.seed, self.truth.len(), self.ensemble.rows())?;
        SplitMeasurements::new(stream, self.truth.clone())
    }
}

/// Standard Gaussian signal of length `n`.
pub fn gaussian_signal<T: Field>(n: usize, seed: u64) -> Vec<T> {
    let mut g = GaussianStream::new(seed, SIGNAL_STREAM);
    (0..n).map(|_| g.sample()).collect()
}

/// `s`-sparse signal: uniformly random support, standard Gaussian nonzeros.
pub fn sparse_signal<T: Field>(n: usize, s: usize, seed: u64) -> Vec<T> {
    let mut g = GaussianStream::new(seed, SIGNAL_STREAM);
    let support = g.choose_indices(n, s);
    let mut x = vec![T::zero(); n];
    for j in support {
        x[j] = g.sample();
    }
    x
}

pub fn unstructured_instance<T: Field>(n: usize, m: usize, seed: u64) -> Result<VectorInstance<T>> {
    VectorInstance::new(gaussian_signal(n, seed), m, seed)
}

pub fn sparse_instance<T: Field>(n: usize, s: usize, m: usize, seed: u64) -> Result<VectorInstance<T>> {
    VectorInstance::new(sparse_signal(n, s, seed), m, seed)
}

pub fn lowrank_instance<T: Field>(
    n: usize,
    q: usize,
    r: usize,
    m: usize,
    condition: f64,
    seed: u64,
) -> Result<LrprInstance<T>> {
    generate_lrpr_instance(n, q, r, m, condition, seed)
}

/// Per-column ensembles stacked vertically: rows `k·m .. (k+1)·m` belong to column `k`.
pub fn stack_ensembles<T: Field>(inst: &LrprInstance<T>) -> Array2<T> {
    let (m, n, q) = (inst.ensembles.m(), inst.ensembles.n(), inst.ensembles.q());
    let mut out = Array2::zeros((m * q, n));
    for (k, e) in inst.ensembles.iter().enumerate() {
        out.slice_mut(ndarray::s![k * m..(k + 1) * m, ..]).assign(e.entries());
    }
    out
}
