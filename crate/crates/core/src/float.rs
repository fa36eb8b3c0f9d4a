//! Scalar abstraction for the model.
//!
//! Every formula in this crate is written against [`Real`] so the same code
//! runs in `f32` or `f64`. Concrete `f64` aliases for the main types live at
//! the crate root.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar the model is generic over. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` literal appearing in a formula.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal must be representable")
    }

    /// Lossy conversion to `f64`, used for diagnostics and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the generic real scalar.
pub type C<T> = Complex<T>;

/// Shorthand constructor.
#[inline]
pub fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

/// Unconjugated bilinear form `a . b` of two 2-component complex vectors.
///
/// This is the natural pairing between left covectors and right vectors of a
/// complex-symmetric matrix; biorthogonality is stated through it, not through
/// the Hermitian inner product.
#[inline]
pub fn bilinear<T: Real>(a: &[C<T>; 2], b: &[C<T>; 2]) -> C<T> {
    a[0] * b[0] + a[1] * b[1]
}
