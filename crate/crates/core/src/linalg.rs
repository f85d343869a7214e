//! Small dense and matrix-free linear algebra used by the solvers.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::field::{axpy, dotc, norm, norm_sqr, Field};
use crate::rng::GaussianStream;

/// Real eigenvalue/eigenvector pairs, sorted by decreasing eigenvalue.
#[derive(Clone, Debug)]
pub struct Eigen<T> {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: Array2<T>,
}

/// Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Only the upper triangle's conjugate symmetry is assumed; the input is
/// symmetrized first.
pub fn hermitian_eig<T: Field>(a: &Array2<T>) -> Eigen<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eig needs a square matrix");
    let mut h = a.clone();
    for i in 0..n {
        h[[i, i]] = T::from_real(h[[i, i]].re());
        for j in i + 1..n {
            let v = (h[[i, j]] + h[[j, i]].conj()).scale(0.5);
            h[[i, j]] = v;
            h[[j, i]] = v.conj();
        }
    }
    let mut v = Array2::<T>::eye(n);
    let total: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    let floor = (f64::EPSILON * f64::EPSILON) * total;

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| h[[i, j]].norm_sqr())
            .sum();
        if off <= floor || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = h[[p, q]];
                let gabs = g.abs();
                if gabs == 0.0 {
                    continue;
                }
                // Phase factor making the pivot real, then a real rotation.
                let ph = g.phase();
                let app = h[[p, p]].re();
                let aqq = h[[q, q]].re();
                let theta = (aqq - app) / (2.0 * gabs);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e_minus = ph.conj();
                let e_plus = ph;
                // Columns: A <- A V.
                for k in 0..n {
                    let akp = h[[k, p]];
                    let akq = h[[k, q]] * e_minus;
                    h[[k, p]] = akp.scale(c) - akq.scale(s);
                    h[[k, q]] = akp.scale(s) + akq.scale(c);
                }
                // Rows: A <- V^H A.
                for k in 0..n {
                    let apk = h[[p, k]];
                    let aqk = h[[q, k]] * e_plus;
                    h[[p, k]] = apk.scale(c) - aqk.scale(s);
                    h[[q, k]] = apk.scale(s) + aqk.scale(c);
                }
                h[[p, q]] = T::zero();
                h[[q, p]] = T::zero();
                h[[p, p]] = T::from_real(h[[p, p]].re());
                h[[q, q]] = T::from_real(h[[q, q]].re());
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]] * e_minus;
                    v[[k, p]] = vkp.scale(c) - vkq.scale(s);
                    v[[k, q]] = vkp.scale(s) + vkq.scale(c);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| h[[j, j]].re().total_cmp(&h[[i, i]].re()).then(i.cmp(&j)));
    let values = order.iter().map(|&i| h[[i, i]].re()).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Eigen { values, vectors }
}

/// Thin QR by twice-iterated modified Gram-Schmidt; `R` has a nonnegative diagonal.
///
/// Columns that vanish after orthogonalization are replaced by a unit vector
/// orthogonal to the previous ones (their `R` diagonal is zero).
pub fn qr<T: Field>(a: &Array2<T>) -> (Array2<T>, Array2<T>) {
    let (n, k) = a.dim();
    assert!(k <= n, "thin QR needs at least as many rows as columns");
    let mut q = Array2::<T>::zeros((n, k));
    let mut r = Array2::<T>::zeros((k, k));
    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = a.column(j).to_vec();
        for _pass in 0..2 {
            for (i, qi) in cols.iter().enumerate() {
                let c = dotc(qi, &v);
                r[[i, j]] += c;
                axpy(-c, qi, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 1e-13 * scale * (n as f64).sqrt() {
            v.iter_mut().for_each(|x| *x = x.scale(1.0 / nv));
            r[[j, j]] = T::from_real(nv);
        } else {
            v = fallback_direction(&cols, n);
            r[[j, j]] = T::zero();
        }
        cols.push(v);
    }
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            q[[i, j]] = x;
        }
    }
    (q, r)
}

fn fallback_direction<T: Field>(cols: &[Vec<T>], n: usize) -> Vec<T> {
    for e in 0..n {
        let mut v = vec![T::zero(); n];
        v[e] = T::one();
        for _pass in 0..2 {
            for qi in cols {
                let c = dotc(qi, &v);
                axpy(-c, qi, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 0.5 {
            v.iter_mut().for_each(|x| *x = x.scale(1.0 / nv));
            return v;
        }
    }
    unreachable!("fewer than n orthonormal columns always leave a basis direction")
}

/// Orthonormal basis of the column span (Q factor of [`qr`]).
pub fn orthonormalize<T: Field>(a: &Array2<T>) -> Array2<T> {
    qr(a).0
}

/// Largest deviation of `U^H U` from the identity.
pub fn orthonormality_defect<T: Field>(u: &Array2<T>) -> f64 {
    let k = u.ncols();
    let mut worst = 0.0f64;
    for i in 0..k {
        let ci = u.column(i).to_vec();
        for j in i..k {
            let cj = u.column(j).to_vec();
            let g = dotc(&ci, &cj);
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// `A^H B` for tall matrices.
pub fn adjoint_times<T: Field>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let a_h = a.t().mapv(|v| v.conj());
    a_h.dot(b)
}

/// Hermitian operator `v -> Y v` on `T^n`.
pub trait HermitianOperator<T: Field> {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[T], out: &mut [T]);
}

impl<T: Field> HermitianOperator<T> for Array2<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (j, &vj) in v.iter().enumerate() {
                acc += self[[i, j]] * vj;
            }
            *o = acc;
        }
    }
}

pub const EIG_TOL: f64 = 1e-8;
pub const EIG_MAX_ITERS: usize = 1000;
pub const EIGENGAP_TOL: f64 = 1e-12;

/// Top-`k` eigenpairs of a Hermitian PSD operator by block orthogonal
/// iteration with Rayleigh-Ritz.
///
/// Runs a block of `k + 1` vectors (when `k < n`) so the gap below the
/// `k`-th eigenvalue can be checked. Stops when every one of the top `k`
/// Ritz residuals is below `EIG_TOL · |θ_1|` or after `EIG_MAX_ITERS` sweeps.
/// A gap `θ_k − θ_{k+1} ≤ EIGENGAP_TOL · |θ_1|` is reported as
/// [`Error::DegenerateSpectrum`].
pub fn top_eigenvectors<T: Field, O: HermitianOperator<T> + ?Sized>(op: &O, k: usize) -> Result<Eigen<T>> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot take {k} eigenvectors of a {n}-dimensional operator")));
    }
    let p = (k + 1).min(n);
    let mut g = GaussianStream::new(0x005E_ED0F_E16E, p as u64);
    let mut start = Array2::<T>::zeros((n, p));
    start.iter_mut().for_each(|v| *v = g.sample());
    let mut q = orthonormalize(&start);

    let mut z = Array2::<T>::zeros((n, p));
    let mut values = vec![0.0; p];
    let mut ritz = q.clone();
    let mut buf_in = vec![T::zero(); n];
    let mut buf_out = vec![T::zero(); n];

    for _it in 0..EIG_MAX_ITERS {
        for j in 0..p {
            buf_in.iter_mut().zip(q.column(j)).for_each(|(b, &v)| *b = v);
            op.apply(&buf_in, &mut buf_out);
            z.column_mut(j).iter_mut().zip(&buf_out).for_each(|(d, &v)| *d = v);
        }
        let h = adjoint_times(&q, &z);
        let eig = hermitian_eig(&h);
        ritz = q.dot(&eig.vectors);
        let z_ritz = z.dot(&eig.vectors);
        values = eig.values;

        let scale = values[0].abs();
        let mut converged = true;
        for j in 0..k {
            let mut res = z_ritz.column(j).to_vec();
            let rj = ritz.column(j).to_vec();
            axpy(T::from_real(-values[j]), &rj, &mut res);
            if norm(&res) > EIG_TOL * scale {
                converged = false;
                break;
            }
        }
        // A block spanning the whole space is resolved exactly by one Rayleigh-Ritz step.
        if converged || p == n {
            break;
        }
        q = orthonormalize(&z_ritz);
    }

    if p > k {
        let gap = values[k - 1] - values[k];
        if gap <= EIGENGAP_TOL * values[0].abs() {
            return Err(Error::DegenerateSpectrum { gap });
        }
    }

    let vectors = ritz.slice(ndarray::s![.., 0..k]).to_owned();
    values.truncate(k);
    Ok(Eigen { values, vectors })
}

/// Linear map with an adjoint, for least-squares solves.
pub trait LinearOperator<T: Field> {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[T]) -> Vec<T>;
    fn apply_adjoint(&self, y: &[T]) -> Vec<T>;
}

impl<T: Field> LinearOperator<T> for crate::measurement::SensingEnsemble<T> {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        crate::measurement::SensingEnsemble::apply(self, x)
    }
    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        crate::measurement::SensingEnsemble::apply_adjoint(self, y)
    }
}

#[derive(Clone, Debug)]
pub struct LsSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// `‖A^H (b − A x)‖ / ‖A^H b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Least squares `min ‖A x − b‖` by conjugate gradients on the normal
/// equations (CGLS), warm-started at `x0`.
pub fn cgls<T: Field, A: LinearOperator<T> + ?Sized>(
    a: &A,
    b: &[T],
    x0: &[T],
    tol: f64,
    max_iters: usize,
) -> LsSolution<T> {
    let mut x = x0.to_vec();
    let ax = a.apply(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut s = a.apply_adjoint(&r);
    let ref_norm = norm(&a.apply_adjoint(b)).max(norm(&s)).max(f64::MIN_POSITIVE);
    let mut p = s.clone();
    let mut gamma = norm_sqr(&s);
    let mut iterations = 0;
    let mut rel = gamma.sqrt() / ref_norm;
    while rel > tol && iterations < max_iters {
        let q = a.apply(&p);
        let qq = norm_sqr(&q);
        if qq == 0.0 || !qq.is_finite() {
            break;
        }
        let alpha = T::from_real(gamma / qq);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        s = a.apply_adjoint(&r);
        let gamma_new = norm_sqr(&s);
        let beta = T::from_real(gamma_new / gamma);
        for (pi, &si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_new;
        iterations += 1;
        rel = gamma.sqrt() / ref_norm;
    }
    LsSolution { x, iterations, relative_residual: rel, converged: rel <= tol }
}

/// Solves the Hermitian positive definite system `G x = rhs` by Cholesky.
/// Returns `None` when `G` is not numerically positive definite.
pub fn cholesky_solve<T: Field>(g: &Array2<T>, rhs: &[T]) -> Option<Vec<T>> {
    let n = g.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    let max_diag = (0..n).map(|i| g[[i, i]].re()).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = g[[j, j]].re();
        for k in 0..j {
            d -= l[[j, k]].norm_sqr();
        }
        if d <= 1e-13 * max_diag || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[[j, j]] = T::from_real(djj);
        for i in j + 1..n {
            let mut v = g[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = v.scale(1.0 / djj);
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[[i, k]];
            let yk = y[k];
            y[i] -= lik * yk;
        }
        y[i] = y[i].scale(1.0 / l[[i, i]].re());
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let lki = l[[k, i]].conj();
            let yk = y[k];
            y[i] -= lki * yk;
        }
        y[i] = y[i].scale(1.0 / l[[i, i]].re());
    }
    Some(y)
}

/// Spectral norm of a tall matrix, via the eigenvalues of `M^H M`.
pub fn spectral_norm<T: Field>(m: &Array2<T>) -> f64 {
    let g = adjoint_times(m, m);
    hermitian_eig(&g).values.first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

pub fn frobenius<T: Field>(m: &Array2<T>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn column<T: Field>(m: &Array2<T>, k: usize) -> Vec<T> {
    m.column(k).to_vec()
}

pub fn to_array1<T: Field>(v: Vec<T>) -> Array1<T> {
    Array1::from_vec(v)
}
