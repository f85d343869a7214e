//! Seeded fixtures shared by the integration suites.
#![allow(dead_code)]

use phaseforge_core::rng::GaussianStream;
use phaseforge_core::{forward_phaseless, sample_ensemble, Field, Observation, SensingEnsemble};

/// Stream reserved for signals, far from the ensemble streams.
const SIGNAL_STREAM: u64 = 1 << 40;

pub struct Instance<T> {
    pub a: SensingEnsemble<T>,
    pub y: Observation,
    pub x: Vec<T>,
}

pub fn instance<T: Field>(x: Vec<T>, m: usize, seed: u64) -> Instance<T> {
    let a = sample_ensemble::<T>(x.len(), m, seed, 0).unwrap();
    let y = forward_phaseless(&a, &x).unwrap();
    Instance { a, y, x }
}

pub fn gaussian<T: Field>(n: usize, seed: u64) -> Vec<T> {
    let mut g = GaussianStream::new(seed, SIGNAL_STREAM);
    (0..n).map(|_| g.sample()).collect()
}

/// `s`-sparse signal on a random support; `value` maps the draw index to the entry.
pub fn sparse<T: Field>(n: usize, s: usize, seed: u64, mut value: impl FnMut(&mut GaussianStream) -> T) -> Vec<T> {
    let mut g = GaussianStream::new(seed, SIGNAL_STREAM);
    let support = g.choose_indices(n, s);
    let mut x = vec![T::zero(); n];
    for j in support {
        x[j] = value(&mut g);
    }
    x
}

pub fn seeds() -> std::ops::Range<u64> {
    0..20
}
