//! Non-convex phase retrieval for unstructured, sparse and low-rank signals.
//!
//! Measurements are `y_i = |<a_i, x>|` with i.i.d. real or complex Gaussian
//! rows `a_i`. Every solver is generic over [`Field`] (`f64` or
//! [`num_complex::Complex64`]) and fully deterministic given its seeds.

pub mod error;
pub mod field;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod metrics;
pub mod rng;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{Field, ScalarField};
pub use measurement::{
    forward_columnwise, forward_phaseless, sample_ensemble, ColumnwiseEnsemble, ColumnwiseSource, FixedColumnwise,
    FixedMeasurements, MeasurementSource, Observation, SensingEnsemble, SplitColumnwise, SplitMeasurements,
};
pub use metrics::{matrix_phase_error, phase_invariant_dist, relative_dist, subspace_distance};
pub use num_complex::Complex64;
pub use solvers::{GradientTruncation, SolverConfig, SolverReport, Termination};
pub use spectral::{TruncationMode, TruncationRule};
