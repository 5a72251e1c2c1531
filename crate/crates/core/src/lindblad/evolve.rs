use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{memory_top_population, QOperator, QState, StateData};
use crate::model::CollapseOp;
use crate::ode::{Dopri, OdeOptions, OdeStats, OdeSystem};
use crate::pulse::TimeDependentProblem;
use crate::scalar::{cr, i_unit, real, to_f64, Real, C};
use crate::sparse::Csr;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions<T: Real> {
    pub ode: OdeOptions<T>,
    pub store_states: bool,
    /// Top-two memory level population that aborts the run.
    pub leakage_error: Option<T>,
    pub leakage_warn: Option<T>,
    pub trace_tol: T,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        EvolveOptions {
            ode: OdeOptions::default(),
            store_states: false,
            leakage_error: Some(real(1e-6)),
            leakage_warn: Some(real(1e-8)),
            trace_tol: real(1e-6),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<QState<T>>,
    pub observables: Vec<(String, Vec<C<T>>)>,
    pub final_state: QState<T>,
    pub stats: OdeStats,
    pub max_trace_drift: T,
    pub max_leakage: T,
}

impl<T: Real> EvolutionResult<T> {
    pub fn observable(&self, name: &str) -> Option<&[C<T>]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// `H_eff = H − (i/2) Σ L†L`
pub fn effective_hamiltonian<T: Real>(
    h: &QOperator<T>,
    collapse: &[CollapseOp<T>],
) -> DMatrix<C<T>> {
    let mut m = h.matrix().clone();
    let half_i = i_unit::<T>() * cr(real::<T>(0.5));
    for c in collapse {
        let l = c.op.matrix();
        m -= (l.adjoint() * l) * half_i;
    }
    m
}

pub(crate) struct JumpPair<T: Real> {
    pub l: Csr<T>,
    pub ld: Csr<T>,
}

pub(crate) fn jump_pairs<T: Real>(collapse: &[CollapseOp<T>]) -> Vec<JumpPair<T>> {
    collapse
        .iter()
        .map(|c| {
            let l = Csr::from_dense(c.op.matrix());
            let ld = l.adjoint();
            JumpPair { l, ld }
        })
        .collect()
}

/// `dρ/dt = −i H_eff ρ + i ρ H_eff† + Σ L ρ L†` on column-major `ρ`.
pub(crate) struct MasterRhs<'a, T: Real> {
    pub d: usize,
    pub heff: Csr<T>,
    pub heff_dag: Csr<T>,
    pub jumps: &'a [JumpPair<T>],
    pub scratch: Vec<C<T>>,
    pub adjoint: bool,
}

impl<'a, T: Real> MasterRhs<'a, T> {
    pub fn new(
        h: &QOperator<T>,
        collapse: &[CollapseOp<T>],
        jumps: &'a [JumpPair<T>],
        adjoint: bool,
    ) -> Self {
        let heff = Csr::from_dense(&effective_hamiltonian(h, collapse));
        let heff_dag = heff.adjoint();
        let d = h.dims().dim();
        MasterRhs {
            d,
            heff,
            heff_dag,
            jumps,
            scratch: vec![cr(T::zero()); d * d],
            adjoint,
        }
    }
}

impl<'a, T: Real> OdeSystem<T> for MasterRhs<'a, T> {
    fn rhs(&mut self, _t: T, y: &[C<T>], dy: &mut [C<T>]) {
        let d = self.d;
        let i = i_unit::<T>();
        let one = cr(T::one());
        dy.iter_mut().for_each(|z| *z = cr(T::zero()));
        if !self.adjoint {
            self.heff.left_mul_acc(y, d, -i, dy);
            self.heff_dag.right_mul_acc(y, d, i, dy);
            for jp in self.jumps {
                self.scratch.iter_mut().for_each(|z| *z = cr(T::zero()));
                jp.ld.right_mul_acc(y, d, one, &mut self.scratch);
                jp.l.left_mul_acc(&self.scratch, d, one, dy);
            }
        } else {
            // Heisenberg picture: i H_eff† X − i X H_eff + Σ L† X L
            self.heff_dag.left_mul_acc(y, d, i, dy);
            self.heff.right_mul_acc(y, d, -i, dy);
            for jp in self.jumps {
                self.scratch.iter_mut().for_each(|z| *z = cr(T::zero()));
                jp.l.right_mul_acc(y, d, one, &mut self.scratch);
                jp.ld.left_mul_acc(&self.scratch, d, one, dy);
            }
        }
    }
}

fn trace_of<T: Real>(y: &[C<T>], d: usize) -> T {
    (0..d).fold(T::zero(), |a, i| a + y[i + i * d].re)
}

fn apply_unitary<T: Real>(u: &DMatrix<C<T>>, y: &mut [C<T>], d: usize) {
    let rho = DMatrix::from_column_slice(d, d, y);
    let out = u * rho * u.adjoint();
    y.copy_from_slice(out.as_slice());
}

struct Observer<T: Real> {
    names: Vec<String>,
    ops: Vec<Csr<T>>,
}

impl<T: Real> Observer<T> {
    fn eval(&self, y: &[C<T>], d: usize) -> Vec<C<T>> {
        self.ops
            .iter()
            .map(|o| {
                let mut acc = cr(T::zero());
                for (i, k, v) in o.iter() {
                    acc += v * y[k + i * d];
                }
                acc
            })
            .collect()
    }
}

/// Integrates `problem` from its initial state at t = 0.
pub fn evolve<T: Real>(
    problem: &TimeDependentProblem<T>,
    times: &[T],
    observables: &[(&str, &QOperator<T>)],
    opts: &EvolveOptions<T>,
) -> Result<EvolutionResult<T>> {
    evolve_from(
        problem,
        &problem.initial,
        T::zero(),
        times,
        observables,
        opts,
    )
}

/// Integrates from `initial` at `t0`; the run ends at the last requested time.
pub fn evolve_from<T: Real>(
    problem: &TimeDependentProblem<T>,
    initial: &QState<T>,
    t0: T,
    times: &[T],
    observables: &[(&str, &QOperator<T>)],
    opts: &EvolveOptions<T>,
) -> Result<EvolutionResult<T>> {
    let dims = problem.dims;
    if initial.dims() != dims {
        return Err(Error::DimsMismatch(initial.dims(), dims));
    }
    if times.is_empty() {
        return Err(Error::InsufficientData("no output times requested".into()));
    }
    let tol_t = real::<T>(1e-12) * problem.total_time.abs().max(T::one());
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InsufficientData(
                "output times must be strictly increasing".into(),
            ));
        }
    }
    if times[0] < t0 || *times.last().unwrap() > problem.total_time + tol_t {
        return Err(Error::InsufficientData(
            "output times outside the problem span".into(),
        ));
    }
    for (name, o) in observables {
        if o.dims() != dims {
            return Err(Error::InvalidDims(format!(
                "observable `{name}` has mismatched dims"
            )));
        }
    }
    let d = dims.dim();
    let t_final = *times.last().unwrap();
    let jumps = jump_pairs(&problem.collapse);
    let observer = Observer {
        names: observables.iter().map(|(n, _)| n.to_string()).collect(),
        ops: observables
            .iter()
            .map(|(_, o)| Csr::from_dense(o.matrix()))
            .collect(),
    };
    let mut y: Vec<C<T>> = initial.to_density_matrix().as_slice().to_vec();

    let mut out_times = Vec::with_capacity(times.len());
    let mut states = Vec::new();
    let mut series: Vec<Vec<C<T>>> = vec![Vec::with_capacity(times.len()); observer.ops.len()];
    let mut stats = OdeStats::default();
    let mut drift = T::zero();
    let mut max_leak = T::zero();
    let mut warned = false;

    let record = |t: T,
                  y: &[C<T>],
                  out_times: &mut Vec<T>,
                  states: &mut Vec<QState<T>>,
                  series: &mut Vec<Vec<C<T>>>|
     -> Result<()> {
        out_times.push(t);
        for (s, v) in series.iter_mut().zip(observer.eval(y, d)) {
            s.push(v);
        }
        if opts.store_states {
            states.push(QState::density_unchecked(
                dims,
                DMatrix::from_column_slice(d, d, y),
            )?);
        }
        Ok(())
    };
    let mut check_leak = |t: T, y: &[C<T>], max_leak: &mut T| -> Result<()> {
        let data = StateData::Density(DMatrix::from_column_slice(d, d, y));
        let p = memory_top_population(dims, &data);
        *max_leak = max_leak.max(p);
        if let Some(e) = opts.leakage_error {
            if p > e {
                return Err(Error::Leakage {
                    t: to_f64(t),
                    population: to_f64(p),
                });
            }
        }
        if let Some(w) = opts.leakage_warn {
            if p > w && !warned {
                warn!(
                    "memory truncation edge holds population {:.2e} at t = {:.3e}",
                    to_f64(p),
                    to_f64(t)
                );
                warned = true;
            }
        }
        Ok(())
    };

    let mut ti = 0;
    while ti < times.len() && times[ti] <= t0 {
        record(times[ti], &y, &mut out_times, &mut states, &mut series)?;
        ti += 1;
    }
    check_leak(t0, &y, &mut max_leak)?;
    let mut h_guess: Option<T> = None;
    let mut t = t0;
    for iv in &problem.intervals {
        if ti >= times.len() || t >= t_final {
            break;
        }
        if iv.t_end <= t0 {
            continue;
        }
        if iv.t_start >= t0 {
            for k in problem.kicks.iter().filter(|k| k.time == iv.t_start) {
                let before = trace_of(&y, d);
                apply_unitary(k.unitary.matrix(), &mut y, d);
                let loss = (before - trace_of(&y, d)).abs();
                if loss > real(1e-6) {
                    return Err(Error::Truncation(format!(
                        "displacement at t = {:.3e} lost {:.2e} of the trace",
                        to_f64(k.time),
                        to_f64(loss)
                    )));
                }
                check_leak(k.time, &y, &mut max_leak)?;
            }
        }
        let end = iv.t_end.min(t_final);
        let mut sys = MasterRhs::new(&iv.hamiltonian, &problem.collapse, &jumps, false);
        let mut ode = opts.ode;
        if let Some(h) = h_guess {
            ode.h_init = Some(h.min(end - t));
        }
        let tr0 = trace_of(&y, d);
        let mut st = Dopri::new(&mut sys, t, &y, ode);
        while ti < times.len() && times[ti] <= end + tol_t {
            let target = if times[ti] > end { end } else { times[ti] };
            st.advance_to(&mut sys, target)?;
            record(times[ti], st.y(), &mut out_times, &mut states, &mut series)?;
            check_leak(target, st.y(), &mut max_leak)?;
            ti += 1;
        }
        st.advance_to(&mut sys, end)?;
        y.copy_from_slice(st.y());
        if st.h() > T::zero() {
            h_guess = Some(st.h());
        }
        let s = st.stats();
        stats.accepted += s.accepted;
        stats.rejected += s.rejected;
        stats.rhs_evals += s.rhs_evals;
        drift += (trace_of(&y, d) - tr0).abs();
        if drift > opts.trace_tol {
            return Err(Error::Numerical(format!(
                "trace drift {:.2e} exceeds {:.1e} by t = {:.3e}",
                to_f64(drift),
                to_f64(opts.trace_tol),
                to_f64(end)
            )));
        }
        check_leak(end, &y, &mut max_leak)?;
        t = end;
    }
    while ti < times.len() {
        // Times beyond the last interval (free of dynamics only when the sequence is empty).
        record(times[ti], &y, &mut out_times, &mut states, &mut series)?;
        ti += 1;
    }
    let final_state = QState::density_unchecked(dims, DMatrix::from_column_slice(d, d, &y))?;
    Ok(EvolutionResult {
        times: out_times,
        states,
        observables: observer.names.into_iter().zip(series).collect(),
        final_state,
        stats,
        max_trace_drift: drift,
        max_leakage: max_leak,
    })
}

/// Heisenberg-picture image at t = 0 of `observable` measured at `t_end` (pre-kick at `t_end`).
pub fn evolve_adjoint<T: Real>(
    problem: &TimeDependentProblem<T>,
    observable: &QOperator<T>,
    t_end: T,
    ode: &OdeOptions<T>,
) -> Result<QOperator<T>> {
    let dims = problem.dims;
    if observable.dims() != dims {
        return Err(Error::DimsMismatch(observable.dims(), dims));
    }
    let d = dims.dim();
    let jumps = jump_pairs(&problem.collapse);
    let mut x: Vec<C<T>> = observable.matrix().as_slice().to_vec();
    let mut h_guess: Option<T> = None;
    for iv in problem.intervals.iter().rev() {
        if iv.t_start >= t_end {
            continue;
        }
        let span = iv.t_end.min(t_end) - iv.t_start;
        let mut sys = MasterRhs::new(&iv.hamiltonian, &problem.collapse, &jumps, true);
        let mut o = *ode;
        if let Some(h) = h_guess {
            o.h_init = Some(h.min(span));
        }
        let mut st = Dopri::new(&mut sys, T::zero(), &x, o);
        st.advance_to(&mut sys, span)?;
        x.copy_from_slice(st.y());
        if st.h() > T::zero() {
            h_guess = Some(st.h());
        }
        for k in problem.kicks.iter().rev().filter(|k| k.time == iv.t_start) {
            let u = k.unitary.matrix();
            let xm = DMatrix::from_column_slice(d, d, &x);
            x.copy_from_slice((u.adjoint() * xm * u).as_slice());
        }
    }
    QOperator::from_matrix(dims, DMatrix::from_column_slice(d, d, &x))
}

/// Direct master-equation right-hand side for a constant generator (dense reference path).
pub fn lindblad_rhs<T: Real>(
    h: &QOperator<T>,
    collapse: &[CollapseOp<T>],
    rho: &DMatrix<C<T>>,
) -> DMatrix<C<T>> {
    let i = i_unit::<T>();
    let mut out = (h.matrix() * rho - rho * h.matrix()) * (-i);
    for c in collapse {
        let l = c.op.matrix();
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += l * rho * &ld - (&ldl * rho + rho * &ldl) * cr(real::<T>(0.5));
    }
    out
}
