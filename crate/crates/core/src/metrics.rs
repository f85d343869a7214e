//! Phase-invariant error metrics.

use ndarray::Array2;

use crate::error::{ensure, Result};
use crate::field::{dotc, norm_sqr, Field};
use crate::linalg::{adjoint_times, orthonormality_defect, spectral_norm};

/// Tolerance on `‖U^H U − I‖` for inputs to [`subspace_distance`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;

fn aligned_distance<T: Field>(xhat: &[T], x: &[T]) -> f64 {
    // Optimal global phase c = phase(<x, xhat>) minimizes ‖c x − xhat‖.
    let c = dotc(x, xhat).phase();
    xhat.iter()
        .zip(x)
        .map(|(&h, &t)| (h - c * t).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `min_θ ‖x e^{jθ} − x̂‖`.
///
/// Equals `sqrt(‖x‖² + ‖x̂‖² − 2|<x̂, x>|)`; evaluated as the residual at the
/// optimal phase to avoid cancellation near zero. For real signals this is
/// `min(‖x̂ − x‖, ‖x̂ + x‖)`.
pub fn phase_invariant_dist<T: Field>(xhat: &[T], x: &[T]) -> Result<f64> {
    ensure(xhat.len() == x.len(), || {
        format!("length mismatch: {} vs {}", xhat.len(), x.len())
    })?;
    // Both orientations, so the metric is exactly symmetric.
    Ok(aligned_distance(xhat, x).min(aligned_distance(x, xhat)))
}

/// [`phase_invariant_dist`] divided by `‖x‖`; the absolute distance when `x = 0`.
pub fn relative_dist<T: Field>(xhat: &[T], x: &[T]) -> Result<f64> {
    let d = phase_invariant_dist(xhat, x)?;
    let nx = norm_sqr(x).sqrt();
    Ok(if nx > 0.0 { d / nx } else { d })
}

/// `sqrt(Σ_k dist²(x̂_k, x_k) / ‖X‖_F²)`.
pub fn matrix_phase_error<T: Field>(xhat: &Array2<T>, x: &Array2<T>) -> Result<f64> {
    ensure(xhat.dim() == x.dim(), || format!("shape mismatch: {:?} vs {:?}", xhat.dim(), x.dim()))?;
    let total: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    ensure(total > 0.0, || "true matrix is zero; normalized error undefined".into())?;
    let mut acc = 0.0;
    for k in 0..x.ncols() {
        let d = phase_invariant_dist(&xhat.column(k).to_vec(), &x.column(k).to_vec())?;
        acc += d * d;
    }
    Ok((acc / total).sqrt())
}

/// `‖(I − Û Û^H) U‖₂`, the sine of the largest principal angle between spans.
pub fn subspace_distance<T: Field>(uhat: &Array2<T>, u: &Array2<T>) -> Result<f64> {
    ensure(uhat.dim() == u.dim(), || format!("shape mismatch: {:?} vs {:?}", uhat.dim(), u.dim()))?;
    ensure(orthonormality_defect(uhat) <= ORTHONORMAL_TOL, || "estimate basis is not orthonormal".into())?;
    ensure(orthonormality_defect(u) <= ORTHONORMAL_TOL, || "reference basis is not orthonormal".into())?;
    let proj = uhat.dot(&adjoint_times(uhat, u));
    let residual = u - &proj;
    Ok(spectral_norm(&residual).min(1.0))
}
