//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All operators are complex matrices over a real field `T`. The concrete
//! aliases exported at the crate root fix `T = f64`, which is what the
//! tolerances in this crate are calibrated for; `f32` compiles and runs but
//! only coarse checks hold in single precision.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use num_complex::Complex;

/// Real scalar usable as the field under every matrix in the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits in scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }
}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// `e^{i θ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> C<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Modulus of a complex scalar.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}
