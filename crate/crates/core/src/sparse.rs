//! Compressed sparse row matrices used inside the integrators.
//!
//! Dense column-major buffers (nalgebra layout) are the only dense format the
//! kernels touch, so `A·M` and `M·A` both stream over contiguous columns.

use nalgebra::DMatrix;

use crate::scalar::{Real, C};

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T: Real> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C<T>>,
}

impl<T: Real> Csr<T> {
    pub fn from_dense(m: &DMatrix<C<T>>) -> Self {
        let (nrows, ncols) = m.shape();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = m[(i, j)];
                if v.re != T::zero() || v.im != T::zero() {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Builds from unsorted triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, C<T>)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<C<T>> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    let last = values.last_mut().unwrap();
                    *last += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            values.push(v);
        }
        let zero = C::new(T::zero(), T::zero());
        let mut k_out = 0;
        for k in 0..values.len() {
            if values[k] != zero {
                rows[k_out] = rows[k];
                indices[k_out] = indices[k];
                values[k_out] = values[k];
                k_out += 1;
            }
        }
        rows.truncate(k_out);
        indices.truncate(k_out);
        values.truncate(k_out);
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Csr::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut m = DMatrix::from_element(self.nrows, self.ncols, C::new(T::zero(), T::zero()));
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    /// `y = scale · A x + y`
    pub fn matvec_acc(&self, x: &[C<T>], scale: C<T>, y: &mut [C<T>]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C::new(T::zero(), T::zero());
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi += scale * acc;
        }
    }

    /// `out = scale · A M + out` for a column-major `M` with `ncols_m` columns.
    pub fn left_mul_acc(&self, m: &[C<T>], ncols_m: usize, scale: C<T>, out: &mut [C<T>]) {
        let n = self.ncols;
        let r = self.nrows;
        for j in 0..ncols_m {
            let col = &m[j * n..(j + 1) * n];
            let dst = &mut out[j * r..(j + 1) * r];
            self.matvec_acc(col, scale, dst);
        }
    }

    /// `out = scale · M A + out` for a column-major `M` with `nrows_m` rows.
    pub fn right_mul_acc(&self, m: &[C<T>], nrows_m: usize, scale: C<T>, out: &mut [C<T>]) {
        for k in 0..self.nrows {
            let src = &m[k * nrows_m..(k + 1) * nrows_m];
            for p in self.indptr[k]..self.indptr[k + 1] {
                let j = self.indices[p];
                let v = scale * self.values[p];
                let dst = &mut out[j * nrows_m..(j + 1) * nrows_m];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * *s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn sample() -> DMatrix<Complex<f64>> {
        DMatrix::from_fn(4, 4, |i, j| {
            if (i + 2 * j) % 3 == 0 {
                Complex::new(i as f64 - 1.5, j as f64 * 0.25)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn dense_roundtrip_and_products() {
        let a = sample();
        let s = Csr::from_dense(&a);
        assert_eq!(s.to_dense(), a);
        let m = DMatrix::from_fn(4, 4, |i, j| {
            Complex::new((i * 4 + j) as f64, 1.0 - j as f64)
        });
        let mut out = vec![Complex::new(0.0, 0.0); 16];
        s.left_mul_acc(m.as_slice(), 4, Complex::new(1.0, 0.0), &mut out);
        assert!((DMatrix::from_column_slice(4, 4, &out) - &a * &m).norm() < 1e-12);
        let mut out = vec![Complex::new(0.0, 0.0); 16];
        s.right_mul_acc(m.as_slice(), 4, Complex::new(1.0, 0.0), &mut out);
        assert!((DMatrix::from_column_slice(4, 4, &out) - &m * &a).norm() < 1e-12);
        assert_eq!(s.adjoint().to_dense(), a.adjoint());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let one = Complex::new(1.0, 0.0);
        let s = Csr::from_triplets(
            2,
            2,
            vec![
                (1, 0, one),
                (0, 1, one),
                (1, 0, one),
                (0, 0, one),
                (0, 0, -one),
            ],
        );
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.to_dense()[(1, 0)], Complex::new(2.0, 0.0));
    }
}
