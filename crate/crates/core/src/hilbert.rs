//! Truncated two-mode Fock space: memory mode `a` (slow index) and buffer mode `b`.
//!
//! Basis index of `|m⟩_a ⊗ |n⟩_b` is `m * n_buf + n`.

use std::ops::{Add, Mul, Sub};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{abs2, cr, modulus, real, to_f64, Real, C};

pub const DEFAULT_DIM_CAP: usize = 512;

/// Norm deficit above which a coherent amplitude table is rejected.
const COHERENT_DEFICIT_ERROR: f64 = 1e-4;
/// Columns of a projected displacement with norm below `1 - this` are outside the low-Fock block.
const LOW_BLOCK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceDims {
    n_mem: usize,
    n_buf: usize,
}

impl SpaceDims {
    pub fn new(n_mem: usize, n_buf: usize) -> Result<Self> {
        Self::with_cap(n_mem, n_buf, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(n_mem: usize, n_buf: usize, cap: usize) -> Result<Self> {
        if n_mem < 2 || n_buf < 2 {
            return Err(Error::InvalidDims(format!(
                "each mode needs at least 2 levels (got n_mem = {n_mem}, n_buf = {n_buf})"
            )));
        }
        let dim = n_mem * n_buf;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(SpaceDims { n_mem, n_buf })
    }

    pub fn n_mem(&self) -> usize {
        self.n_mem
    }

    pub fn n_buf(&self) -> usize {
        self.n_buf
    }

    pub fn dim(&self) -> usize {
        self.n_mem * self.n_buf
    }

    pub fn index(&self, m: usize, n: usize) -> usize {
        m * self.n_buf + n
    }

    pub fn levels(&self, mode: Mode) -> usize {
        match mode {
            Mode::Mem => self.n_mem,
            Mode::Buf => self.n_buf,
        }
    }

    fn check(&self, other: &SpaceDims) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimsMismatch(*self, *other))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Mem,
    Buf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Smallest memory truncation that keeps a coherent state of amplitude `|alpha|` comfortable.
pub fn required_levels(alpha_abs: f64) -> usize {
    (alpha_abs * alpha_abs + 6.0 * alpha_abs + 5.0).ceil() as usize
}

fn czero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QOperator<T: Real> {
    dims: SpaceDims,
    mat: DMatrix<C<T>>,
}

impl<T: Real> QOperator<T> {
    pub fn from_matrix(dims: SpaceDims, mat: DMatrix<C<T>>) -> Result<Self> {
        let d = dims.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::InvalidDims(format!(
                "operator is {}x{}, space dimension is {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(QOperator { dims, mat })
    }

    pub fn zeros(dims: SpaceDims) -> Self {
        let d = dims.dim();
        QOperator {
            dims,
            mat: DMatrix::from_element(d, d, czero()),
        }
    }

    pub fn identity(dims: SpaceDims) -> Self {
        let d = dims.dim();
        QOperator {
            dims,
            mat: DMatrix::identity(d, d),
        }
    }

    /// Embeds a single-mode matrix as `op ⊗ I` (memory) or `I ⊗ op` (buffer).
    pub fn embed(dims: SpaceDims, mode: Mode, single: &DMatrix<C<T>>) -> Result<Self> {
        let n = dims.levels(mode);
        if single.nrows() != n || single.ncols() != n {
            return Err(Error::InvalidDims(format!(
                "single-mode operator must be {n}x{n}"
            )));
        }
        let mut out = Self::zeros(dims);
        let (nm, nb) = (dims.n_mem, dims.n_buf);
        match mode {
            Mode::Mem => {
                for i in 0..nm {
                    for j in 0..nm {
                        let v = single[(i, j)];
                        if v != czero() {
                            for k in 0..nb {
                                out.mat[(dims.index(i, k), dims.index(j, k))] = v;
                            }
                        }
                    }
                }
            }
            Mode::Buf => {
                for m in 0..nm {
                    for i in 0..nb {
                        for j in 0..nb {
                            out.mat[(dims.index(m, i), dims.index(m, j))] = single[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.mat
    }

    pub fn dag(&self) -> Self {
        QOperator {
            dims: self.dims,
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        QOperator {
            dims: self.dims,
            mat: &self.mat * s,
        }
    }

    pub fn trace(&self) -> C<T> {
        self.mat.trace()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.mat
            .iter()
            .fold(T::zero(), |acc, z| acc + abs2(*z))
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.mat
            .iter()
            .fold(T::zero(), |acc, z| acc.max(modulus(*z)))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.dims.check(&other.dims)?;
        Ok(QOperator {
            dims: self.dims,
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        })
    }

    /// Largest entry of `|H - H†|`.
    pub fn hermiticity_error(&self) -> T {
        let d = self.mat.nrows();
        let mut e = T::zero();
        for i in 0..d {
            for j in 0..=i {
                e = e.max(modulus(self.mat[(i, j)] - self.mat[(j, i)].conj()));
            }
        }
        e
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn apply(&self, state: &QState<T>) -> Result<DVector<C<T>>> {
        self.dims.check(&state.dims)?;
        match &state.data {
            StateData::Ket(v) => Ok(&self.mat * v),
            StateData::Density(_) => Err(Error::InvalidState(
                "operator application needs a ket".into(),
            )),
        }
    }
}

impl<'a, T: Real> Add for &'a QOperator<T> {
    type Output = QOperator<T>;
    fn add(self, rhs: Self) -> QOperator<T> {
        assert_eq!(self.dims, rhs.dims, "dims mismatch");
        QOperator {
            dims: self.dims,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl<'a, T: Real> Sub for &'a QOperator<T> {
    type Output = QOperator<T>;
    fn sub(self, rhs: Self) -> QOperator<T> {
        assert_eq!(self.dims, rhs.dims, "dims mismatch");
        QOperator {
            dims: self.dims,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl<'a, T: Real> Mul for &'a QOperator<T> {
    type Output = QOperator<T>;
    fn mul(self, rhs: Self) -> QOperator<T> {
        assert_eq!(self.dims, rhs.dims, "dims mismatch");
        QOperator {
            dims: self.dims,
            mat: &self.mat * &rhs.mat,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateData<T: Real> {
    Ket(DVector<C<T>>),
    Density(DMatrix<C<T>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QState<T: Real> {
    dims: SpaceDims,
    data: StateData<T>,
}

impl<T: Real> QState<T> {
    /// Normalized ket; rejects norm errors above 1e-9.
    pub fn ket(dims: SpaceDims, v: DVector<C<T>>) -> Result<Self> {
        let s = Self::ket_unchecked(dims, v)?;
        s.check_invariants()?;
        Ok(s)
    }

    pub fn ket_unchecked(dims: SpaceDims, v: DVector<C<T>>) -> Result<Self> {
        if v.len() != dims.dim() {
            return Err(Error::InvalidDims(format!(
                "ket length {} != {}",
                v.len(),
                dims.dim()
            )));
        }
        Ok(QState {
            dims,
            data: StateData::Ket(v),
        })
    }

    /// Rescales `v` to unit norm.
    pub fn ket_normalized(dims: SpaceDims, v: DVector<C<T>>) -> Result<Self> {
        let n = v.iter().fold(T::zero(), |a, z| a + abs2(*z)).sqrt();
        if n <= T::zero() {
            return Err(Error::DegenerateInput("zero ket".into()));
        }
        Self::ket_unchecked(dims, v.map(|z| z / cr(n)))
    }

    pub fn density(dims: SpaceDims, m: DMatrix<C<T>>) -> Result<Self> {
        let s = Self::density_unchecked(dims, m)?;
        s.check_invariants()?;
        Ok(s)
    }

    pub fn density_unchecked(dims: SpaceDims, m: DMatrix<C<T>>) -> Result<Self> {
        let d = dims.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::InvalidDims(format!(
                "density is {}x{}, expected {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(QState {
            dims,
            data: StateData::Density(m),
        })
    }

    /// `|m⟩_a ⊗ |n⟩_b`
    pub fn fock(dims: SpaceDims, m: usize, n: usize) -> Result<Self> {
        if m >= dims.n_mem || n >= dims.n_buf {
            return Err(Error::InvalidDims(format!(
                "Fock state |{m},{n}⟩ outside truncation"
            )));
        }
        let mut v = DVector::from_element(dims.dim(), czero());
        v[dims.index(m, n)] = C::new(T::one(), T::zero());
        Ok(QState {
            dims,
            data: StateData::Ket(v),
        })
    }

    /// Product state from single-mode amplitude vectors.
    pub fn product(dims: SpaceDims, mem: &DVector<C<T>>, buf: &DVector<C<T>>) -> Result<Self> {
        if mem.len() != dims.n_mem || buf.len() != dims.n_buf {
            return Err(Error::InvalidDims(
                "factor lengths do not match dims".into(),
            ));
        }
        let v = DVector::from_fn(dims.dim(), |k, _| mem[k / dims.n_buf] * buf[k % dims.n_buf]);
        Self::ket_normalized(dims, v)
    }

    /// Memory density matrix `ρ_mem ⊗ |0⟩⟨0|_b`.
    pub fn from_memory_density(dims: SpaceDims, rho_mem: &DMatrix<C<T>>) -> Result<Self> {
        let nm = dims.n_mem;
        if rho_mem.nrows() != nm || rho_mem.ncols() != nm {
            return Err(Error::InvalidDims("memory density size mismatch".into()));
        }
        let d = dims.dim();
        let mut m = DMatrix::from_element(d, d, czero());
        for i in 0..nm {
            for j in 0..nm {
                m[(dims.index(i, 0), dims.index(j, 0))] = rho_mem[(i, j)];
            }
        }
        Self::density(dims, m)
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn data(&self) -> &StateData<T> {
        &self.data
    }

    pub fn is_ket(&self) -> bool {
        matches!(self.data, StateData::Ket(_))
    }

    pub fn as_ket(&self) -> Option<&DVector<C<T>>> {
        match &self.data {
            StateData::Ket(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn to_density_matrix(&self) -> DMatrix<C<T>> {
        match &self.data {
            StateData::Ket(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        QState {
            dims: self.dims,
            data: StateData::Density(self.to_density_matrix()),
        }
    }

    pub fn trace(&self) -> T {
        match &self.data {
            StateData::Ket(v) => v.iter().fold(T::zero(), |a, z| a + abs2(*z)),
            StateData::Density(m) => m.trace().re,
        }
    }

    /// Asserts the ket-norm or density trace/Hermiticity/positivity tolerances.
    pub fn check_invariants(&self) -> Result<()> {
        match &self.data {
            StateData::Ket(_) => {
                let n = self.trace().sqrt();
                if (n - T::one()).abs() > real(1e-9) {
                    return Err(Error::InvalidState(format!("ket norm {:e}", to_f64(n))));
                }
            }
            StateData::Density(m) => {
                let tr = m.trace();
                if (tr.re - T::one()).abs() > real(1e-9) || tr.im.abs() > real(1e-9) {
                    return Err(Error::InvalidState(format!("trace {:e}", to_f64(tr.re))));
                }
                let herm = m
                    .iter()
                    .zip(m.adjoint().iter())
                    .fold(T::zero(), |a, (x, y)| a.max(modulus(*x - *y)));
                if herm > real(1e-10) {
                    return Err(Error::InvalidState(format!(
                        "non-Hermitian density ({:e})",
                        to_f64(herm)
                    )));
                }
                let h = (m + m.adjoint()) * cr(real::<T>(0.5));
                let ev = h.symmetric_eigenvalues();
                let min = ev.iter().fold(T::max_value().unwrap(), |a, x| a.min(*x));
                if min < real(-1e-8) {
                    return Err(Error::InvalidState(format!(
                        "negative eigenvalue {:e}",
                        to_f64(min)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Partial trace over the buffer.
    pub fn memory_reduced(&self) -> DMatrix<C<T>> {
        let (nm, nb) = (self.dims.n_mem, self.dims.n_buf);
        let mut r = DMatrix::from_element(nm, nm, czero());
        match &self.data {
            StateData::Ket(v) => {
                for i in 0..nm {
                    for j in 0..nm {
                        let mut acc = czero();
                        for k in 0..nb {
                            acc += v[i * nb + k] * v[j * nb + k].conj();
                        }
                        r[(i, j)] = acc;
                    }
                }
            }
            StateData::Density(m) => {
                for i in 0..nm {
                    for j in 0..nm {
                        let mut acc = czero();
                        for k in 0..nb {
                            acc += m[(i * nb + k, j * nb + k)];
                        }
                        r[(i, j)] = acc;
                    }
                }
            }
        }
        r
    }

    /// Population of the two highest memory Fock levels.
    pub fn memory_top_population(&self) -> T {
        memory_top_population(self.dims, &self.data)
    }

    /// `⟨ψ|φ⟩` for kets, `Tr(ρσ)` otherwise (equal to the fidelity when one side is pure).
    pub fn overlap(&self, other: &Self) -> Result<T> {
        self.dims.check(&other.dims)?;
        Ok(match (&self.data, &other.data) {
            (StateData::Ket(a), StateData::Ket(b)) => abs2(a.dotc(b)),
            _ => {
                let a = self.to_density_matrix();
                let b = other.to_density_matrix();
                (a * b).trace().re
            }
        })
    }
}

pub(crate) fn memory_top_population<T: Real>(dims: SpaceDims, data: &StateData<T>) -> T {
    let (nm, nb) = (dims.n_mem, dims.n_buf);
    let mut p = T::zero();
    for m in nm.saturating_sub(2)..nm {
        for k in 0..nb {
            let idx = m * nb + k;
            p += match data {
                StateData::Ket(v) => abs2(v[idx]),
                StateData::Density(r) => r[(idx, idx)].re,
            };
        }
    }
    p
}

/// Single-mode annihilation matrix on `n` levels.
pub fn destroy<T: Real>(n: usize) -> DMatrix<C<T>> {
    let mut m = DMatrix::from_element(n, n, czero());
    for k in 1..n {
        m[(k - 1, k)] = cr(real::<T>(k as f64).sqrt());
    }
    m
}

pub fn mode_operators<T: Real>(dims: SpaceDims) -> Result<(QOperator<T>, QOperator<T>)> {
    let a = QOperator::embed(dims, Mode::Mem, &destroy(dims.n_mem))?;
    let b = QOperator::embed(dims, Mode::Buf, &destroy(dims.n_buf))?;
    Ok((a, b))
}

/// Coherent amplitudes `e^{-|α|²/2} αⁿ/√n!` for `n < levels`, and the norm deficit of the table.
pub fn coherent_amplitudes<T: Real>(alpha: C<T>, levels: usize) -> (DVector<C<T>>, T) {
    let mut v = DVector::from_element(levels, czero());
    v[0] = cr((-abs2(alpha) / real(2.0)).exp());
    for n in 1..levels {
        v[n] = v[n - 1] * alpha / cr(real::<T>(n as f64).sqrt());
    }
    let norm2 = v.iter().fold(T::zero(), |a, z| a + abs2(*z));
    (v, T::one() - norm2)
}

fn single_mode_coherent<T: Real>(alpha: C<T>, levels: usize) -> Result<DVector<C<T>>> {
    let amp = to_f64(modulus(alpha));
    if required_levels(amp) > levels {
        warn!(
            "coherent amplitude {amp:.3} exceeds truncation comfort ({} levels, {} recommended)",
            levels,
            required_levels(amp)
        );
    }
    let (v, deficit) = coherent_amplitudes(alpha, levels);
    if to_f64(deficit) > COHERENT_DEFICIT_ERROR {
        return Err(Error::Truncation(format!(
            "coherent state |{amp:.3}⟩ loses {:.3e} of its norm in {levels} levels",
            to_f64(deficit)
        )));
    }
    let n = (T::one() - deficit).sqrt();
    Ok(v.map(|z| z / cr(n)))
}

fn vacuum<T: Real>(levels: usize) -> DVector<C<T>> {
    let mut v = DVector::from_element(levels, czero());
    v[0] = cr(T::one());
    v
}

pub fn coherent_state<T: Real>(alpha: C<T>, dims: SpaceDims, mode: Mode) -> Result<QState<T>> {
    let c = single_mode_coherent(alpha, dims.levels(mode))?;
    match mode {
        Mode::Mem => QState::product(dims, &c, &vacuum(dims.n_buf)),
        Mode::Buf => QState::product(dims, &vacuum(dims.n_mem), &c),
    }
}

/// Memory cat `(|α⟩ ± |−α⟩)/√N±`, buffer in vacuum.
pub fn cat_state<T: Real>(alpha: C<T>, parity: Parity, dims: SpaceDims) -> Result<QState<T>> {
    let mem = cat_amplitudes(alpha, parity, dims.n_mem)?;
    QState::product(dims, &mem, &vacuum(dims.n_buf))
}

/// Single-mode cat amplitudes built directly on the parity sublattice.
pub fn cat_amplitudes<T: Real>(
    alpha: C<T>,
    parity: Parity,
    levels: usize,
) -> Result<DVector<C<T>>> {
    let a2 = abs2(alpha);
    if parity == Parity::Odd && a2 == T::zero() {
        return Err(Error::DegenerateInput(
            "odd cat state at α = 0 has zero norm".into(),
        ));
    }
    let c = single_mode_coherent(alpha, levels)?;
    let keep = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let v = DVector::from_fn(levels, |n, _| if n % 2 == keep { c[n] } else { czero() });
    let n = v.iter().fold(T::zero(), |a, z| a + abs2(*z)).sqrt();
    if n <= T::zero() {
        return Err(Error::DegenerateInput("cat amplitude vanishes".into()));
    }
    Ok(v.map(|z| z / cr(n)))
}

/// Exact `levels × cols` block `⟨m|D_λ|n⟩` of the infinite displacement operator.
///
/// Columns follow `D|n⟩ = (a† − λ*) D|n−1⟩ / √n`, starting from the coherent column.
pub fn displacement_block<T: Real>(lambda: C<T>, levels: usize, cols: usize) -> DMatrix<C<T>> {
    let mut d = DMatrix::from_element(levels, cols.max(1), czero());
    let (c0, _) = coherent_amplitudes(lambda, levels);
    d.set_column(0, &c0);
    let lc = lambda.conj();
    for n in 1..cols {
        let sn = real::<T>(n as f64).sqrt();
        for m in 0..levels {
            let up = if m > 0 {
                d[(m - 1, n - 1)] * cr(real::<T>(m as f64).sqrt())
            } else {
                czero()
            };
            d[(m, n)] = (up - lc * d[(m, n - 1)]) / cr(sn);
        }
    }
    d
}

/// Projected single-mode displacement and the size of its low-Fock block.
pub fn single_mode_displacement<T: Real>(
    lambda: C<T>,
    levels: usize,
) -> Result<(DMatrix<C<T>>, usize)> {
    let amp = to_f64(modulus(lambda));
    if required_levels(amp) > levels {
        warn!("displacement {amp:.3} exceeds truncation comfort ({levels} levels)");
    }
    let d = displacement_block(lambda, levels, levels);
    let mut low = 0;
    for n in 0..levels {
        let norm2 = d.column(n).iter().fold(T::zero(), |a, z| a + abs2(*z));
        if norm2 >= real(1.0 - LOW_BLOCK_TOL) {
            low = n + 1;
        } else {
            break;
        }
    }
    if low == 0 {
        return Err(Error::Truncation(format!(
            "displacement {amp:.3} has no unitary low-Fock block in {levels} levels"
        )));
    }
    let blk = d.columns(0, low);
    let g = blk.adjoint() * blk;
    let dev = (g - DMatrix::<C<T>>::identity(low, low))
        .iter()
        .fold(T::zero(), |a, z| a.max(modulus(*z)));
    if dev > real(1e-8) {
        return Err(Error::Truncation(format!(
            "displacement {amp:.3} deviates from unitarity by {:.3e} on its low-Fock block",
            to_f64(dev)
        )));
    }
    Ok((d, low))
}

pub fn displacement_operator<T: Real>(
    lambda: C<T>,
    dims: SpaceDims,
    mode: Mode,
) -> Result<QOperator<T>> {
    let (d, _) = single_mode_displacement(lambda, dims.levels(mode))?;
    QOperator::embed(dims, mode, &d)
}

pub fn single_mode_parity<T: Real>(levels: usize) -> DMatrix<C<T>> {
    DMatrix::from_fn(levels, levels, |i, j| {
        if i != j {
            czero()
        } else if i % 2 == 0 {
            cr(T::one())
        } else {
            cr(-T::one())
        }
    })
}

pub fn parity_operator<T: Real>(dims: SpaceDims, mode: Mode) -> QOperator<T> {
    QOperator::embed(dims, mode, &single_mode_parity(dims.levels(mode)))
        .expect("sizes match by construction")
}

pub fn expectation<T: Real>(op: &QOperator<T>, state: &QState<T>) -> Result<C<T>> {
    op.dims.check(&state.dims)?;
    Ok(match &state.data {
        StateData::Ket(v) => v.dotc(&(&op.mat * v)),
        StateData::Density(r) => trace_product(&op.mat, r),
    })
}

/// `Tr(A B)` without forming the product.
pub fn trace_product<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> C<T> {
    let d = a.nrows();
    let mut acc = czero();
    for j in 0..d {
        for i in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}
