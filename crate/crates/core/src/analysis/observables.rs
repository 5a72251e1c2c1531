use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatObservables {
    pub x: f64,
    pub z: f64,
    pub parity: f64,
}

/// Hermite functions and their derivatives at the origin.
fn hermite_at_origin(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut psi = vec![0.0; n + 1];
    psi[0] = std::f64::consts::PI.powf(-0.25);
    for k in 1..n {
        psi[k + 1] = -((k as f64) / (k as f64 + 1.0)).sqrt() * psi[k - 1];
    }
    let dpsi = (0..n)
        .map(|k| {
            let down = if k > 0 {
                (k as f64 / 2.0).sqrt() * psi[k - 1]
            } else {
                0.0
            };
            down - ((k as f64 + 1.0) / 2.0).sqrt() * psi[k + 1]
        })
        .collect();
    psi.truncate(n);
    (psi, dpsi)
}

/// Projector onto the half-line `x_θ > 0` of the quadrature `(a e^{−iθ} + a† e^{iθ})/√2`, on `n` Fock levels.
pub fn half_space_projector(theta: f64, n: usize) -> DMatrix<Complex64> {
    let (psi, dpsi) = hermite_at_origin(n);
    DMatrix::from_fn(n, n, |m, k| {
        let overlap = if m == k {
            0.5
        } else if (m + k) % 2 == 0 {
            0.0
        } else {
            (psi[k] * dpsi[m] - psi[m] * dpsi[k]) / (2.0 * (m as f64 - k as f64))
        };
        Complex64::from_polar(overlap, (m as f64 - k as f64) * theta)
    })
}

/// `Z_α = Π₊ − Π₋` with the half-spaces split along `arg α`.
pub fn z_operator(alpha: Complex64, n: usize) -> Result<DMatrix<Complex64>> {
    if alpha.norm() == 0.0 {
        return Err(invalid("alpha", "Z_α needs α ≠ 0"));
    }
    let p = half_space_projector(alpha.arg(), n);
    Ok(p * Complex64::new(2.0, 0.0) - DMatrix::identity(n, n))
}

pub fn cat_observables(rho_mem: &DMatrix<Complex64>, alpha: Complex64) -> Result<CatObservables> {
    let n = rho_mem.nrows();
    if n == 0 || rho_mem.ncols() != n {
        return Err(Error::InvalidDims(
            "memory density matrix must be square".into(),
        ));
    }
    let z_op = z_operator(alpha, n)?;
    let mut z = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            z += z_op[(i, j)] * rho_mem[(j, i)];
        }
    }
    let parity: f64 = (0..n)
        .map(|k| {
            if k % 2 == 0 {
                rho_mem[(k, k)].re
            } else {
                -rho_mem[(k, k)].re
            }
        })
        .sum();
    Ok(CatObservables {
        x: parity,
        z: z.re,
        parity,
    })
}
