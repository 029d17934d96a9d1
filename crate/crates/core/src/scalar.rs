//! Scalar abstraction shared by every module.
//!
//! All numerics are written against [`Scalar`], which is implemented for
//! `f32` and `f64`. Complex quantities use `nalgebra::Complex<T>`.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{Complex, ComplexField, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable throughout the crate.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Machine epsilon of the underlying format.
    const EPSILON: Self;

    /// Smallest positive normal value.
    const MIN_POSITIVE: Self;

    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion to `f64`, used for reports and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const EPSILON: Self = f32::EPSILON;
    const MIN_POSITIVE: Self = f32::MIN_POSITIVE;
}

impl Scalar for f64 {
    const EPSILON: Self = f64::EPSILON;
    const MIN_POSITIVE: Self = f64::MIN_POSITIVE;
}

pub type RMat<T> = DMatrix<T>;
pub type RVec<T> = DVector<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

#[inline]
pub fn c<T: Scalar>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<T: Scalar>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// The imaginary unit.
#[inline]
pub fn ci<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

#[inline]
pub fn cabs<T: Scalar>(z: Complex<T>) -> T {
    z.modulus()
}

pub fn to_complex<T: Scalar>(m: &RMat<T>) -> CMat<T> {
    m.map(cr)
}

pub fn to_complex_vec<T: Scalar>(v: &RVec<T>) -> CVec<T> {
    v.map(cr)
}

/// Hermitian inner product `(a, b) = a* b`, conjugate-linear in `a`.
#[inline]
pub fn hdot<T: Scalar>(a: &CVec<T>, b: &CVec<T>) -> Complex<T> {
    a.dotc(b)
}

/// Real part of `(a, M b)` for a real matrix `M`.
pub fn re_form<T: Scalar>(a: &CVec<T>, m: &RMat<T>, b: &CVec<T>) -> T {
    hdot(a, &(to_complex(m) * b)).re
}
