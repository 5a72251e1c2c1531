//! Fast path for the undriven two-photon model with memory loss switched off.
//!
//! The jump `b` maps Span(|2,0⟩, |0,1⟩) into Span(|0,0⟩, |1,0⟩) and nothing maps back,
//! so the Liouvillian restricted to operators on these four states is block upper
//! triangular. Its eigenvalues are `μᵢ + μⱼ*` over the eigenvalues `μ` of the
//! non-Hermitian generators on each subspace (zero on the dark pair).

use nalgebra::Matrix2;
use num_complex::Complex;

use crate::scalar::{cr, csqrt, real, Real, C};

/// Non-Hermitian generator `−i H_eff` on Span(|2,0⟩, |0,1⟩).
pub fn alpha0_excited_generator<T: Real>(g2: C<T>, kappa_b: T) -> Matrix2<C<T>> {
    let s2 = real::<T>(2.0).sqrt();
    let mi = Complex::new(T::zero(), -T::one());
    Matrix2::new(
        cr(T::zero()),
        mi * g2 * cr(s2),
        mi * g2.conj() * cr(s2),
        cr(-kappa_b / real(2.0)),
    )
}

/// Roots of the excited-subspace generator, `−κ_b/4 ± √(κ_b²/16 − 2|g₂|²)`.
pub fn alpha0_excited_rates<T: Real>(g2: C<T>, kappa_b: T) -> [C<T>; 2] {
    let m = alpha0_excited_generator(g2, kappa_b);
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let half = cr(real::<T>(0.5));
    let disc = csqrt(tr * tr * half * half - det);
    [tr * half + disc, tr * half - disc]
}

/// All sixteen eigenvalues of the restricted Liouvillian.
pub fn alpha0_reduced_spectrum<T: Real>(g2: C<T>, kappa_b: T) -> Vec<C<T>> {
    let [p, m] = alpha0_excited_rates(g2, kappa_b);
    let mu = [cr(T::zero()), cr(T::zero()), p, m];
    let mut out = Vec::with_capacity(16);
    for a in &mu {
        for b in &mu {
            out.push(*a + b.conj());
        }
    }
    out
}

/// Slowest decaying nonzero eigenvalue of the reduced spectrum.
pub fn alpha0_reduced_gap<T: Real>(g2: C<T>, kappa_b: T) -> C<T> {
    let tol = real::<T>(1e-12) * kappa_b;
    alpha0_reduced_spectrum(g2, kappa_b)
        .into_iter()
        .filter(|z| z.re.abs() > tol)
        .fold(None::<C<T>>, |best, z| match best {
            Some(b)
                if b.re.abs() < z.re.abs()
                    || (b.re.abs() == z.re.abs() && b.im.abs() <= z.im.abs()) =>
            {
                Some(b)
            }
            _ => Some(z),
        })
        .expect("κ_b > 0 gives a decaying mode")
}
