//! Scalar fields the solvers are generic over.
//!
//! Every algorithm in this crate is written once against [`Field`] and
//! instantiated for `f64` (real Gaussian measurements) and [`Complex64`]
//! (circular complex Gaussian measurements).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_complex::Complex64;

/// Tag for the two supported measurement fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarField {
    Real,
    Complex,
}

impl ScalarField {
    pub fn tag(self) -> u32 {
        match self {
            ScalarField::Real => 0,
            ScalarField::Complex => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(ScalarField::Real),
            1 => Some(ScalarField::Complex),
            _ => None,
        }
    }
}

impl Display for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarField::Real => f.write_str("real"),
            ScalarField::Complex => f.write_str("complex"),
        }
    }
}

impl std::str::FromStr for ScalarField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(ScalarField::Real),
            "complex" => Ok(ScalarField::Complex),
            other => Err(format!("unknown field '{other}' (expected real|complex)")),
        }
    }
}

/// Scalar type of signals and measurement vectors.
pub trait Field:
    LinalgScalar
    + ScalarOperand
    + Send
    + Sync
    + Debug
    + PartialEq
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    const KIND: ScalarField;

    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn from_real(v: f64) -> Self;
    /// Builds a scalar from parts; `None` when `im != 0` for the real field.
    fn from_parts(re: f64, im: f64) -> Option<Self>;
    fn scale(self, k: f64) -> Self;
    fn is_finite(self) -> bool;

    /// One entry of the unit-variance Gaussian of this field, from standard
    /// normal draws `g0`, `g1` (`g1` unused by the real field).
    fn gaussian(g0: f64, g1: f64) -> Self;

    /// `z / |z|`, with `phase(0) = 1`.
    fn phase(self) -> Self {
        let a = self.abs();
        if a == 0.0 {
            Self::one()
        } else {
            self.scale(1.0 / a)
        }
    }
}

impl Field for f64 {
    const KIND: ScalarField = ScalarField::Real;

    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn from_real(v: f64) -> Self {
        v
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(re)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn gaussian(g0: f64, _g1: f64) -> Self {
        g0
    }
    #[inline]
    fn phase(self) -> Self {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl Field for Complex64 {
    const KIND: ScalarField = ScalarField::Complex;

    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(Complex64::new(re, im))
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        Complex64::new(self.re * k, self.im * k)
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn gaussian(g0: f64, g1: f64) -> Self {
        Complex64::new(g0 * std::f64::consts::FRAC_1_SQRT_2, g1 * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `Σ conj(a_j) b_j`.
#[inline]
pub fn dotc<T: Field>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&u, &v) in a.iter().zip(b) {
        acc += u.conj() * v;
    }
    acc
}

#[inline]
pub fn norm_sqr<T: Field>(a: &[T]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

#[inline]
pub fn norm<T: Field>(a: &[T]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy<T: Field>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
