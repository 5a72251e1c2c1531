use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hilbert::{QOperator, QState, SpaceDims};
use crate::lindblad::evolve::effective_hamiltonian;
use crate::model::CollapseOp;
use crate::scalar::{abs2, cr, csqrt, i_unit, modulus, real, to_f64, Real, C};
use crate::sparse::Csr;

/// Largest connected block handed to the dense eigensolver (3600² entries).
pub const DEFAULT_BLOCK_CAP: usize = 3600;
/// Eigenvalues with `|Re λ| < STEADY_TOL · rate_scale` belong to the steady space.
pub const STEADY_TOL: f64 = 1e-9;

/// Superoperator acting on column-major `vec(ρ)`, stored sparse.
#[derive(Clone, Debug)]
pub struct Liouvillian<T: Real> {
    dims: SpaceDims,
    matrix: Csr<T>,
    rate_scale: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport<T: Real> {
    pub lambda_min: C<T>,
    pub steady_dim: usize,
    pub n_eigenvalues: usize,
}

#[derive(Clone, Debug)]
pub enum SteadyState<T: Real> {
    Unique(QState<T>),
    /// Frobenius-orthonormal basis of the kernel.
    Manifold {
        basis: Vec<DMatrix<C<T>>>,
        dim: usize,
    },
}

pub fn build_liouvillian<T: Real>(
    h: &QOperator<T>,
    collapse: &[CollapseOp<T>],
) -> Result<Liouvillian<T>> {
    let dims = h.dims();
    let d = dims.dim();
    for c in collapse {
        if c.op.dims() != dims {
            return Err(Error::DimsMismatch(c.op.dims(), dims));
        }
    }
    let heff = Csr::from_dense(&effective_hamiltonian(h, collapse));
    let i = i_unit::<T>();
    let mut trip: Vec<(usize, usize, C<T>)> = Vec::new();
    for (r, k, v) in heff.iter() {
        for j in 0..d {
            trip.push((r + j * d, k + j * d, -i * v));
        }
    }
    for (c, j, v) in heff.iter() {
        let w = i * v.conj();
        for r in 0..d {
            trip.push((r + c * d, r + j * d, w));
        }
    }
    for op in collapse {
        let l = Csr::from_dense(op.op.matrix());
        let nz: Vec<(usize, usize, C<T>)> = l.iter().collect();
        for &(r, k, v) in &nz {
            for &(c, j, w) in &nz {
                trip.push((r + c * d, k + j * d, v * w.conj()));
            }
        }
    }
    let rate_scale = collapse.iter().fold(T::zero(), |m, c| m.max(c.rate));
    let rate_scale = if rate_scale > T::zero() {
        rate_scale
    } else {
        h.max_abs().max(T::one())
    };
    Ok(Liouvillian {
        dims,
        matrix: Csr::from_triplets(d * d, d * d, trip),
        rate_scale,
    })
}

impl<T: Real> Liouvillian<T> {
    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn matrix(&self) -> &Csr<T> {
        &self.matrix
    }

    pub fn rate_scale(&self) -> T {
        self.rate_scale
    }

    pub fn with_rate_scale(mut self, s: T) -> Self {
        self.rate_scale = s;
        self
    }

    pub fn apply(&self, rho: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let d = self.dims.dim();
        let mut out = vec![cr(T::zero()); d * d];
        self.matrix
            .matvec_acc(rho.as_slice(), cr(T::one()), &mut out);
        DMatrix::from_column_slice(d, d, &out)
    }

    /// `max_c |Σ_i L[(i,i), c]|`, zero for a trace-preserving generator.
    pub fn trace_preservation_error(&self) -> T {
        let d = self.dims.dim();
        let mut col = vec![cr(T::zero()); d * d];
        for i in 0..d {
            for (c, v) in self.matrix.row(i + i * d) {
                col[c] += v;
            }
        }
        col.iter().fold(T::zero(), |m, z| m.max(modulus(*z)))
    }

    /// Connected components of the sparsity graph; each is an invariant block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.matrix.nrows();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (r, c, _) in self.matrix.iter() {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for x in 0..n {
            let r = find(&mut parent, x);
            groups.entry(r).or_default().push(x);
        }
        groups.into_values().collect()
    }

    /// Strongly connected components of the directed sparsity graph.
    ///
    /// Ordering the basis by components makes the matrix block triangular, so the
    /// spectrum is the union of the spectra of the diagonal blocks.
    pub fn strong_blocks(&self) -> Vec<Vec<usize>> {
        let n = self.matrix.nrows();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|r| self.matrix.row(r).map(|(c, _)| c).collect())
            .collect();
        tarjan(&adj)
    }

    fn dense_block(&self, idx: &[usize]) -> DMatrix<C<T>> {
        let n = self.matrix.nrows();
        let mut local = vec![usize::MAX; n];
        for (k, &g) in idx.iter().enumerate() {
            local[g] = k;
        }
        let m = idx.len();
        let mut out = DMatrix::from_element(m, m, cr(T::zero()));
        for (k, &g) in idx.iter().enumerate() {
            for (c, v) in self.matrix.row(g) {
                if local[c] != usize::MAX {
                    out[(k, local[c])] = v;
                }
            }
        }
        out
    }

    fn check_block(&self, size: usize, cap: usize) -> Result<()> {
        if size > cap {
            return Err(Error::DimensionCap { dim: size, cap });
        }
        Ok(())
    }

    /// All eigenvalues, block by block.
    pub fn spectrum(&self, block_cap: usize) -> Result<Vec<C<T>>> {
        let blocks = self.strong_blocks();
        for b in &blocks {
            self.check_block(b.len(), block_cap)?;
        }
        let mut ev = Vec::with_capacity(self.matrix.nrows());
        for b in &blocks {
            ev.extend(block_eigenvalues(self.dense_block(b))?);
        }
        Ok(ev)
    }

    fn steady_threshold(&self) -> T {
        real::<T>(STEADY_TOL) * self.rate_scale
    }
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            if *k < adj[v].len() {
                let w = adj[v][*k];
                *k += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("Tarjan stack holds the component");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn block_eigenvalues<T: Real>(m: DMatrix<C<T>>) -> Result<Vec<C<T>>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    if let Some(ev) = m.eigenvalues() {
        return Ok(ev.iter().copied().collect());
    }
    let schur = Schur::try_new(m, T::default_epsilon(), 400 * n).ok_or_else(|| {
        Error::Numerical(format!(
            "Schur iteration did not converge on a {n}x{n} block"
        ))
    })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|k| t[(k, k)]).collect())
}

/// Nonzero eigenvalue with the smallest `|Re λ|`, and the steady-space dimension.
pub fn spectral_gap<T: Real>(l: &Liouvillian<T>) -> Result<GapReport<T>> {
    spectral_gap_capped(l, DEFAULT_BLOCK_CAP)
}

pub fn spectral_gap_capped<T: Real>(l: &Liouvillian<T>, block_cap: usize) -> Result<GapReport<T>> {
    let ev = l.spectrum(block_cap)?;
    gap_from_eigenvalues(&ev, l.steady_threshold())
}

pub fn gap_from_eigenvalues<T: Real>(ev: &[C<T>], threshold: T) -> Result<GapReport<T>> {
    let steady = ev.iter().filter(|z| z.re.abs() < threshold).count();
    let best = ev
        .iter()
        .filter(|z| z.re.abs() >= threshold)
        .min_by(|a, b| {
            a.re.abs()
                .partial_cmp(&b.re.abs())
                .unwrap()
                .then(a.im.abs().partial_cmp(&b.im.abs()).unwrap())
                .then(a.im.partial_cmp(&b.im).unwrap())
        })
        .copied();
    match best {
        Some(lambda_min) => Ok(GapReport {
            lambda_min,
            steady_dim: steady,
            n_eigenvalues: ev.len(),
        }),
        None => {
            let cluster: Vec<String> = ev
                .iter()
                .take(8)
                .map(|z| format!("{:.3e}{:+.3e}i", to_f64(z.re), to_f64(z.im)))
                .collect();
            Err(Error::DegenerateGap(format!(
                "{} eigenvalues all within the steady threshold: [{}]",
                ev.len(),
                cluster.join(", ")
            )))
        }
    }
}

/// Unique trace-one steady state, or an orthonormal kernel basis when the steady space is degenerate.
pub fn steady_state<T: Real>(l: &Liouvillian<T>) -> Result<SteadyState<T>> {
    steady_state_capped(l, DEFAULT_BLOCK_CAP)
}

pub fn steady_state_capped<T: Real>(
    l: &Liouvillian<T>,
    block_cap: usize,
) -> Result<SteadyState<T>> {
    let d = l.dims.dim();
    let thr = l.steady_threshold();
    let mut basis: Vec<DVector<C<T>>> = Vec::new();
    for b in l.blocks() {
        l.check_block(b.len(), block_cap)?;
        for z in null_space(l.dense_block(&b), thr) {
            let mut v = DVector::from_element(d * d, cr(T::zero()));
            for (loc, &g) in b.iter().enumerate() {
                v[g] = z[loc];
            }
            basis.push(v);
        }
    }
    match basis.len() {
        0 => Err(Error::Numerical("no steady eigenvalue found".into())),
        1 => {
            let mut rho = DMatrix::from_column_slice(d, d, basis[0].as_slice());
            let tr = rho.trace();
            if modulus(tr) < real(1e-12) {
                return Err(Error::Numerical("steady kernel vector is traceless".into()));
            }
            rho /= tr;
            let rho = (&rho + rho.adjoint()) * cr(real::<T>(0.5));
            let min = rho
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(T::max_value().unwrap(), |a, x| a.min(*x));
            if min < real(-1e-6) {
                return Err(Error::IndefiniteSteadyState(to_f64(min)));
            }
            Ok(SteadyState::Unique(QState::density_unchecked(l.dims, rho)?))
        }
        n => Ok(SteadyState::Manifold {
            basis: basis
                .iter()
                .map(|v| DMatrix::from_column_slice(d, d, v.as_slice()))
                .collect(),
            dim: n,
        }),
    }
}

/// Orthonormal basis of `{x : M x ≈ 0}` from a Householder QR with column-norm pivoting.
///
/// Trailing diagonal entries of `R` below `tol` mark the null directions.
pub fn null_space<T: Real>(mut m: DMatrix<C<T>>, tol: T) -> Vec<DVector<C<T>>> {
    let (nr, nc) = m.shape();
    let kmax = nr.min(nc);
    let mut perm: Vec<usize> = (0..nc).collect();
    let mut norms: Vec<T> = vec![T::zero(); nc];
    let mut rank = kmax;
    for k in 0..kmax {
        // recompute to avoid drift of the downdated norms
        for j in k..nc {
            norms[j] = m.as_slice()[j * nr + k..(j + 1) * nr]
                .iter()
                .fold(T::zero(), |a, z| a + abs2(*z));
        }
        let (jmax, nmax) = (k..nc).fold((k, -T::one()), |(bj, bn), j| {
            if norms[j] > bn {
                (j, norms[j])
            } else {
                (bj, bn)
            }
        });
        if nmax.sqrt() <= tol {
            rank = k;
            break;
        }
        if jmax != k {
            m.swap_columns(k, jmax);
            perm.swap(k, jmax);
            norms.swap(k, jmax);
        }
        let alpha = nmax.sqrt();
        let x0 = m[(k, k)];
        let phase = if modulus(x0) > T::zero() {
            x0 / cr(modulus(x0))
        } else {
            cr(T::one())
        };
        let beta = -phase * cr(alpha);
        // v = x − β e_k, H = I − 2 v v† / (v† v)
        let mut v: Vec<C<T>> = (k..nr).map(|i| m[(i, k)]).collect();
        v[0] -= beta;
        let vnorm2 = v.iter().fold(T::zero(), |a, z| a + abs2(*z));
        if vnorm2 > T::zero() {
            let two = real::<T>(2.0);
            let data = m.as_mut_slice();
            for j in k + 1..nc {
                let col = &mut data[j * nr + k..(j + 1) * nr];
                let dot = v
                    .iter()
                    .zip(col.iter())
                    .fold(cr(T::zero()), |a, (x, y)| a + x.conj() * *y);
                let f = dot * cr(two / vnorm2);
                for (c, x) in col.iter_mut().zip(v.iter()) {
                    *c -= *x * f;
                }
            }
        }
        m[(k, k)] = beta;
        for i in k + 1..nr {
            m[(i, k)] = cr(T::zero());
        }
    }
    let mut out: Vec<DVector<C<T>>> = Vec::new();
    for j in rank..nc {
        // R11 y = −R12[:, j]
        let mut y = vec![cr(T::zero()); rank];
        for i in (0..rank).rev() {
            let mut acc = -m[(i, j)];
            for t in i + 1..rank {
                acc -= m[(i, t)] * y[t];
            }
            y[i] = acc / m[(i, i)];
        }
        let mut v = DVector::from_element(nc, cr(T::zero()));
        for (i, yi) in y.into_iter().enumerate() {
            v[perm[i]] = yi;
        }
        v[perm[j]] = cr(T::one());
        for u in &out {
            let p = u.dotc(&v);
            v -= u * p;
        }
        let n = v.norm();
        v /= cr(n);
        out.push(v);
    }
    out
}

/// `(κ_b/2) Re(1 − √(1 − 32 g₂²/κ_b²))`
pub fn alpha0_confinement_closed_form<T: Real>(g2: T, kappa_b: T) -> T {
    let x = real::<T>(32.0) * g2 * g2 / (kappa_b * kappa_b);
    let root = csqrt(Complex::new(T::one() - x, T::zero()));
    kappa_b / real(2.0) * (T::one() - root.re)
}

#[allow(dead_code)]
pub(crate) fn c64<T: Real>(z: C<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}
