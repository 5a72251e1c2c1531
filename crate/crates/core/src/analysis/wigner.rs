use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::displacement_block;

/// Largest auxiliary Fock space used to resolve a displaced parity column.
pub const MAX_AUX_LEVELS: usize = 1200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        GridSpec {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
            n_re: n,
            n_im: n,
        }
    }

    /// Cut along the real axis.
    pub fn real_cut(min: f64, max: f64, n: usize) -> Self {
        GridSpec {
            re_min: min,
            re_max: max,
            im_min: 0.0,
            im_max: 0.0,
            n_re: n,
            n_im: 1,
        }
    }

    /// Cut along the imaginary axis.
    pub fn imag_cut(min: f64, max: f64, n: usize) -> Self {
        GridSpec {
            re_min: 0.0,
            re_max: 0.0,
            im_min: min,
            im_max: max,
            n_re: 1,
            n_im: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_re == 0 || self.n_im == 0 {
            return Err(invalid("grid", "needs at least one point per axis"));
        }
        let ok = |lo: f64, hi: f64, n: usize| {
            lo.is_finite() && hi.is_finite() && (hi > lo || (n == 1 && hi == lo))
        };
        if !ok(self.re_min, self.re_max, self.n_re) || !ok(self.im_min, self.im_max, self.n_im) {
            return Err(invalid("grid", "ranges must be finite and increasing"));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn re_axis(&self) -> Vec<f64> {
        Self::axis(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_axis(&self) -> Vec<f64> {
        Self::axis(self.im_min, self.im_max, self.n_im)
    }

    pub fn d_re(&self) -> f64 {
        if self.n_re > 1 {
            (self.re_max - self.re_min) / (self.n_re - 1) as f64
        } else {
            1.0
        }
    }

    pub fn d_im(&self) -> f64 {
        if self.n_im > 1 {
            (self.im_max - self.im_min) / (self.n_im - 1) as f64
        } else {
            1.0
        }
    }

    pub fn points(&self) -> Vec<Complex64> {
        let (re, im) = (self.re_axis(), self.im_axis());
        let mut out = Vec::with_capacity(re.len() * im.len());
        for y in &im {
            for x in &re {
                out.push(Complex64::new(*x, *y));
            }
        }
        out
    }
}

/// `values[(i_re, i_im)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    /// `Σ W dλ_r dλ_i`
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.spec.d_re() * self.spec.d_im()
    }

    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        let (re, im) = (self.spec.re_axis(), self.spec.im_axis());
        let mut out = Vec::with_capacity(re.len() * im.len());
        for (j, y) in im.iter().enumerate() {
            for (i, x) in re.iter().enumerate() {
                out.push((*x, *y, self.values[(i, j)]));
            }
        }
        out
    }

    pub fn at(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[(i_re, i_im)]
    }
}

fn aux_levels(n: usize, lambda: Complex64) -> usize {
    let r = (n as f64).sqrt() + lambda.norm() + 6.0;
    (r * r).ceil() as usize
}

/// `W(λ) = (2/π) Σ_m (−1)^m ⟨m|D_λ† ρ D_λ|m⟩` for a single-mode density matrix.
pub fn wigner_point(rho: &DMatrix<Complex64>, lambda: Complex64) -> Result<f64> {
    let n = rho.nrows();
    if n == 0 || rho.ncols() != n {
        return Err(Error::InvalidDims(
            "Wigner input must be a square density matrix".into(),
        ));
    }
    let m = aux_levels(n, lambda);
    if m > MAX_AUX_LEVELS {
        return Err(Error::Truncation(format!(
            "|λ| = {:.2} needs {m} auxiliary levels (limit {MAX_AUX_LEVELS})",
            lambda.norm()
        )));
    }
    let d = displacement_block(lambda, n, m);
    let rd = rho * &d;
    let mut acc = 0.0;
    for k in 0..m {
        let col = d.column(k);
        let v: Complex64 = col
            .iter()
            .zip(rd.column(k).iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        acc += if k % 2 == 0 { v.re } else { -v.re };
    }
    Ok(2.0 / std::f64::consts::PI * acc)
}

/// Wigner function of the memory-reduced density matrix on a rectangular grid.
pub fn wigner(rho_mem: &DMatrix<Complex64>, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let pts = spec.points();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|l| wigner_point(rho_mem, *l))
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(spec.n_re, spec.n_im);
    for (k, v) in vals.into_iter().enumerate() {
        values[(k % spec.n_re, k / spec.n_re)] = v;
    }
    Ok(WignerGrid {
        spec: *spec,
        values,
    })
}
