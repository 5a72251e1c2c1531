use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::LowerExp;

/// Real scalar used by the generic numerical core.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Send + Sync {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Send + Sync {}

pub type C<T> = Complex<T>;

#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn c_f64<T: Real>(z: Complex<f64>) -> C<T> {
    Complex::new(real(z.re), real(z.im))
}

#[inline]
pub fn c_to_f64<T: Real>(z: C<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

/// Squared modulus without the square root.
#[inline]
pub fn abs2<T: Real>(z: C<T>) -> T {
    z.re * z.re + z.im * z.im
}

#[inline]
pub fn modulus<T: Real>(z: C<T>) -> T {
    abs2(z).sqrt()
}

#[inline]
pub fn i_unit<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

/// Principal square root.
#[inline]
pub fn csqrt<T: Real>(z: C<T>) -> C<T> {
    nalgebra::ComplexField::sqrt(z)
}
