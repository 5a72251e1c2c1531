//! Quantum-jump unraveling and synthetic measurement records.
//!
//! Trajectory `i` of a run with seed `s` draws from `ChaCha8Rng::seed_from_u64(s)` on
//! stream `i`, so any trajectory can be regenerated on its own and the ensemble does
//! not depend on scheduling.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    dwell_from_counts, fit_exponential, DwellEstimate, FitResult, TelegraphTrace,
};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{QOperator, QState, StateData};
use crate::lindblad::{effective_hamiltonian, jump_pairs};
use crate::ode::{Dopri, OdeOptions};
use crate::pulse::TimeDependentProblem;
use crate::sparse::Csr;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    /// Index into the problem's collapse operators.
    pub channel: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneSample {
    pub t_start: f64,
    pub t_int: f64,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Stream index within the seed.
    pub index: u64,
    pub jumps: Vec<JumpEvent>,
    pub times: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub heterodyne: Vec<HeterodyneSample>,
}

impl TrajectoryRecord {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Wraps a binary trace as a record with a single series.
    pub fn from_telegraph(seed: u64, index: u64, name: &str, trace: &TelegraphTrace) -> Self {
        TrajectoryRecord {
            seed,
            index,
            jumps: Vec::new(),
            times: trace.times.clone(),
            series: vec![(
                name.to_string(),
                trace.values.iter().map(|v| *v as f64).collect(),
            )],
            heterodyne: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryOptions {
    pub ode: OdeOptions<f64>,
    /// Largest jump probability accumulated over one accepted substep.
    pub max_jump_prob: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            ode: OdeOptions::default(),
            max_jump_prob: 0.1,
        }
    }
}

pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn expect(op: &Csr<f64>, psi: &[Complex64], scratch: &mut [Complex64]) -> f64 {
    scratch
        .iter_mut()
        .for_each(|z| *z = Complex64::new(0.0, 0.0));
    op.matvec_acc(psi, Complex64::new(1.0, 0.0), scratch);
    let v: Complex64 = psi
        .iter()
        .zip(scratch.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    v.re / norm2(psi)
}

/// Pure initial ket; a density matrix is replaced by one of its eigenvectors drawn with its weight.
fn sample_initial(state: &QState<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    match state.data() {
        StateData::Ket(v) => Ok(v.as_slice().to_vec()),
        StateData::Density(m) => {
            let eig = m.clone().symmetric_eigen();
            let w: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0)).collect();
            let total: f64 = w.iter().sum();
            if !(total > 0.0) {
                return Err(Error::InvalidState(
                    "density matrix has no positive weight".into(),
                ));
            }
            let mut r = rng.random::<f64>() * total;
            let mut pick = w.len() - 1;
            for (k, x) in w.iter().enumerate() {
                if r < *x {
                    pick = k;
                    break;
                }
                r -= x;
            }
            let v = eig.eigenvectors.column(pick);
            let n = v.norm();
            Ok(v.iter().map(|z| z / n).collect())
        }
    }
}

struct Unraveler<'a> {
    problem: &'a TimeDependentProblem<f64>,
    times: &'a [f64],
    observables: Vec<(String, Csr<f64>)>,
    heff: Vec<Csr<f64>>,
    jumps: Vec<crate::lindblad::JumpPair<f64>>,
    opts: TrajectoryOptions,
}

impl Unraveler<'_> {
    fn run(&self, seed: u64, index: u64) -> Result<TrajectoryRecord> {
        let p = self.problem;
        let d = p.dims.dim();
        let mut rng = trajectory_rng(seed, index);
        let mut psi = sample_initial(&p.initial, &mut rng)?;
        let n0 = norm2(&psi).sqrt();
        psi.iter_mut().for_each(|z| *z /= n0);
        let mut scratch = vec![Complex64::new(0.0, 0.0); d];
        let mut series: Vec<Vec<f64>> =
            vec![Vec::with_capacity(self.times.len()); self.observables.len()];
        let mut events = Vec::new();
        let mut threshold: f64 = rng.random();
        let t_final = self.times.last().copied().unwrap_or(0.0);
        let tol_t = 1e-12 * p.total_time.max(1.0);
        let mut ti = 0;
        let record = |psi: &[Complex64], series: &mut Vec<Vec<f64>>, scratch: &mut [Complex64]| {
            for ((_, op), s) in self.observables.iter().zip(series.iter_mut()) {
                s.push(expect(op, psi, scratch));
            }
        };
        while ti < self.times.len() && self.times[ti] <= 0.0 {
            record(&psi, &mut series, &mut scratch);
            ti += 1;
        }
        let mut t = 0.0;
        for (iv_idx, iv) in p.intervals.iter().enumerate() {
            if ti >= self.times.len() || t >= t_final {
                break;
            }
            for k in p.kicks.iter().filter(|k| k.time == iv.t_start) {
                let v = DVector::from_column_slice(&psi);
                psi = (k.unitary.matrix() * v).as_slice().to_vec();
            }
            let end = iv.t_end.min(t_final);
            let heff = &self.heff[iv_idx];
            let mut sys = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
                dy.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                heff.matvec_acc(y, Complex64::new(0.0, -1.0), dy);
            };
            let mut st = Dopri::new(&mut sys, t, &psi, self.opts.ode);
            let cap = 1.0 - self.opts.max_jump_prob;
            let mut guard = |old: &[Complex64], new: &[Complex64]| norm2(new) >= cap * norm2(old);
            while st.t() < end {
                let limit = if ti < self.times.len() && self.times[ti] < end {
                    self.times[ti]
                } else {
                    end
                };
                st.step_guarded(&mut sys, limit, &mut guard)?;
                if norm2(st.y()) <= threshold {
                    // bisect the interpolated norm for the jump time
                    let (mut lo, mut hi) = (st.t_prev(), st.t());
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        st.interpolate(mid, &mut scratch);
                        if norm2(&scratch) > threshold {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let tj = hi;
                    st.interpolate(tj, &mut psi);
                    let channel = self.apply_jump(&mut psi, &mut scratch, &mut rng)?;
                    events.push(JumpEvent { time: tj, channel });
                    threshold = rng.random();
                    st.reset(&mut sys, tj, &psi);
                    continue;
                }
                while ti < self.times.len()
                    && self.times[ti] <= st.t() + tol_t
                    && self.times[ti] <= end + tol_t
                {
                    record(st.y(), &mut series, &mut scratch);
                    ti += 1;
                }
            }
            psi.copy_from_slice(st.y());
            t = end;
        }
        while ti < self.times.len() {
            record(&psi, &mut series, &mut scratch);
            ti += 1;
        }
        Ok(TrajectoryRecord {
            seed,
            index,
            jumps: events,
            times: self.times.to_vec(),
            series: self
                .observables
                .iter()
                .map(|(n, _)| n.clone())
                .zip(series)
                .collect(),
            heterodyne: Vec::new(),
        })
    }

    fn apply_jump(
        &self,
        psi: &mut [Complex64],
        scratch: &mut [Complex64],
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        let one = Complex64::new(1.0, 0.0);
        let weights: Vec<f64> = self
            .jumps
            .iter()
            .map(|jp| {
                scratch
                    .iter_mut()
                    .for_each(|z| *z = Complex64::new(0.0, 0.0));
                jp.l.matvec_acc(psi, one, scratch);
                norm2(scratch)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical(
                "jump requested with vanishing jump rates".into(),
            ));
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if r < *w {
                pick = k;
                break;
            }
            r -= w;
        }
        scratch
            .iter_mut()
            .for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.jumps[pick].l.matvec_acc(psi, one, scratch);
        let n = norm2(scratch).sqrt();
        for (p, s) in psi.iter_mut().zip(scratch.iter()) {
            *p = s / n;
        }
        Ok(pick)
    }
}

/// Monte Carlo wavefunction trajectories of `problem`, sampled at `times`.
///
/// Each trajectory integrates `−i H_eff ψ` and jumps when `‖ψ‖²` falls below a uniform
/// draw; substeps that would lose more than `max_jump_prob` of the norm are refined.
/// Observables are recorded as `⟨ψ|O|ψ⟩/⟨ψ|ψ⟩` (real part).
pub fn jump_unravel(
    problem: &TimeDependentProblem<f64>,
    seed: u64,
    n_traj: usize,
    times: &[f64],
    observables: &[(&str, &QOperator<f64>)],
    opts: &TrajectoryOptions,
) -> Result<Vec<TrajectoryRecord>> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InsufficientData(
            "sample times must be strictly increasing".into(),
        ));
    }
    let tol_t = 1e-12 * problem.total_time.max(1.0);
    if times.first().is_some_and(|t| *t < 0.0)
        || times
            .last()
            .is_some_and(|t| *t > problem.total_time + tol_t)
    {
        return Err(Error::InsufficientData(
            "sample times outside the problem span".into(),
        ));
    }
    if !(opts.max_jump_prob > 0.0 && opts.max_jump_prob < 1.0) {
        return Err(invalid("max_jump_prob", "must lie in (0, 1)"));
    }
    for (name, o) in observables {
        if o.dims() != problem.dims {
            return Err(Error::InvalidDims(format!(
                "observable `{name}` has mismatched dims"
            )));
        }
    }
    let un = Unraveler {
        problem,
        times,
        observables: observables
            .iter()
            .map(|(n, o)| (n.to_string(), Csr::from_dense(o.matrix())))
            .collect(),
        heff: problem
            .intervals
            .iter()
            .map(|iv| Csr::from_dense(&effective_hamiltonian(&iv.hamiltonian, &problem.collapse)))
            .collect(),
        jumps: jump_pairs(&problem.collapse),
        opts: *opts,
    };
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| un.run(seed, i))
        .collect()
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean.
    pub std_err: Vec<f64>,
}

/// Mean and standard error of a named series; the reduction order is fixed by `(seed, index)`.
pub fn ensemble_mean(records: &[TrajectoryRecord], name: &str) -> Result<EnsembleSeries> {
    let mut sorted: Vec<&TrajectoryRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.seed, r.index));
    let first = sorted
        .first()
        .ok_or_else(|| Error::InsufficientData("no trajectories".into()))?;
    let times = first.times.clone();
    let mut cols: Vec<&[f64]> = Vec::with_capacity(sorted.len());
    for r in &sorted {
        if r.times != times {
            return Err(Error::InvalidDims(
                "trajectories were sampled on different clocks".into(),
            ));
        }
        cols.push(
            r.series(name)
                .ok_or_else(|| Error::InvalidState(format!("no series `{name}`")))?,
        );
    }
    let n = cols.len() as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut std_err = Vec::with_capacity(times.len());
    let mut buf = vec![0.0; cols.len()];
    for k in 0..times.len() {
        for (b, c) in buf.iter_mut().zip(&cols) {
            *b = c[k];
        }
        let m = pairwise_sum(&buf) / n;
        for b in buf.iter_mut() {
            *b = (*b - m) * (*b - m);
        }
        let var = if cols.len() > 1 {
            pairwise_sum(&buf) / (n - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        std_err.push((var / n).sqrt());
    }
    Ok(EnsembleSeries {
        times,
        mean,
        std_err,
    })
}

/// Integrated heterodyne records: `n_shots` samples per pointer amplitude, pointer-major.
///
/// Each quadrature carries Gaussian noise of variance `1/(2 η κ_b T_int)`.
pub fn heterodyne_readout(
    pointer_amps: &[Complex64],
    t_int: f64,
    kappa_b: f64,
    eta: f64,
    seed: u64,
    n_shots: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if !(t_int > 0.0) {
        return Err(invalid("t_int", "integration time must be positive"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", "efficiency must lie in (0, 1]"));
    }
    if !(kappa_b > 0.0) {
        return Err(invalid("kappa_b", "must be positive"));
    }
    let sigma = (1.0 / (2.0 * eta * kappa_b * t_int)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pointer_amps
        .iter()
        .map(|beta| {
            (0..n_shots)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    beta + Complex64::new(re, im) * sigma
                })
                .collect()
        })
        .collect())
}

/// Symmetric two-state Markov chain sampled every `t_int`, flipping at rate `1/(2 T_X)` each way.
pub fn telegraph_synthesize(t_x: f64, t_int: f64, total: f64, seed: u64) -> Result<TelegraphTrace> {
    if !(t_int > 0.0 && total >= t_int) {
        return Err(invalid("t_int", "need 0 < t_int ≤ total"));
    }
    if !(t_x > 0.0) {
        return Err(invalid("t_x", "must be positive"));
    }
    if t_int >= t_x / 10.0 {
        warn!(
            "sampling period {t_int:.3e} s is not well below T_X/10 = {:.3e} s",
            t_x / 10.0
        );
    }
    let n = (total / t_int).floor() as usize;
    let p_flip = if t_x.is_infinite() {
        0.0
    } else {
        0.5 * (-(-t_int / t_x).exp_m1())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: i8 = if rng.random::<bool>() { 1 } else { -1 };
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(s);
        if rng.random::<f64>() < p_flip {
            s = -s;
        }
    }
    TelegraphTrace::new((0..n).map(|k| k as f64 * t_int).collect(), values, 0.0)
}

/// Heterodyne record of a pointer that follows the telegraph sign: one sample per trace point.
pub fn pointer_record(
    trace: &TelegraphTrace,
    beta: Complex64,
    kappa_b: f64,
    eta: f64,
    seed: u64,
) -> Result<Vec<HeterodyneSample>> {
    let dt = if trace.times.len() > 1 {
        trace.exposure() / trace.times.len() as f64
    } else {
        0.0
    };
    let noise = heterodyne_readout(
        &[Complex64::new(0.0, 0.0)],
        dt,
        kappa_b,
        eta,
        seed,
        trace.values.len(),
    )?;
    Ok(trace
        .times
        .iter()
        .zip(&trace.values)
        .zip(&noise[0])
        .map(|((t, v), n)| HeterodyneSample {
            t_start: *t,
            t_int: dt,
            value: beta * *v as f64 + n,
        })
        .collect())
}

/// Binarizes a record with hysteresis: the state changes only when the signal crosses `±band`.
pub fn telegraph_from_series(times: &[f64], values: &[f64], band: f64) -> Result<TelegraphTrace> {
    if times.len() != values.len() {
        return Err(Error::InvalidDims(
            "times and values differ in length".into(),
        ));
    }
    let first = values
        .iter()
        .find(|v| v.abs() >= band)
        .copied()
        .unwrap_or(1.0);
    let mut s: i8 = if first >= 0.0 { 1 } else { -1 };
    let out = values
        .iter()
        .map(|v| {
            if *v >= band {
                s = 1;
            } else if *v <= -band {
                s = -1;
            }
            s
        })
        .collect();
    TelegraphTrace::new(times.to_vec(), out, band)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitflipEstimate {
    /// Pooled dwell-time estimate over all records.
    pub dwell: DwellEstimate,
    /// Exponential fit of `⟨Z(0) Z(t)⟩` over the ensemble, kept only when it is reliable.
    pub ensemble_fit: Option<FitResult>,
    pub flips: usize,
    pub lower_bound_only: bool,
}

impl BitflipEstimate {
    pub fn t_x_fit(&self) -> Option<f64> {
        self.ensemble_fit.as_ref().and_then(|f| f.get("T"))
    }
}

pub const MIN_RECORDED_FLIPS: usize = 100;

/// Bit-flip time from the `series` of each record (hysteresis band `band`).
pub fn bitflip_time_from_trajectories(
    records: &[TrajectoryRecord],
    series: &str,
    band: f64,
) -> Result<BitflipEstimate> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no trajectories".into()));
    }
    let mut flips = 0;
    let mut exposure = 0.0;
    for r in records {
        let v = r
            .series(series)
            .ok_or_else(|| Error::InvalidState(format!("no series `{series}`")))?;
        let tr = telegraph_from_series(&r.times, v, band)?;
        flips += tr.switches();
        exposure += tr.exposure();
    }
    if flips < MIN_RECORDED_FLIPS {
        warn!("only {flips} flips recorded; the dwell estimate is statistics limited");
    }
    let dwell = dwell_from_counts(flips, exposure)?;
    let aligned: Vec<TrajectoryRecord> = records
        .iter()
        .map(|r| {
            let v = r.series(series).unwrap_or(&[]);
            let s0 = v
                .first()
                .map(|x| x.signum())
                .filter(|s| *s != 0.0)
                .unwrap_or(1.0);
            let mut a = r.clone();
            a.series = vec![("aligned".into(), v.iter().map(|x| x * s0).collect())];
            a
        })
        .collect();
    // Jump records can decay without crossing the band, so the fit does not wait for flips.
    let ensemble_fit = ensemble_mean(&aligned, "aligned")
        .ok()
        .and_then(|e| fit_exponential(&e.times, &e.mean).ok())
        .filter(|f| f.reliable());
    Ok(BitflipEstimate {
        lower_bound_only: dwell.lower_bound_only,
        dwell,
        ensemble_fit,
        flips,
    })
}

/// Dense expectation helper for callers holding a full density matrix.
pub fn density_expectation(op: &QOperator<f64>, rho: &DMatrix<Complex64>) -> f64 {
    (op.matrix() * rho).trace().re
}

/// Heterodyne shots of the longitudinal readout for a memory coherent state with `mean_photons`.
///
/// Each shot draws a Poisson photon number, maps it to the steady buffer amplitude and adds
/// heterodyne noise.
pub fn longitudinal_readout_shots(
    mean_photons: f64,
    g_l: f64,
    g_sp: f64,
    kappa_b: f64,
    t_int: f64,
    eta: f64,
    seed: u64,
    n_shots: usize,
) -> Result<Vec<Complex64>> {
    if !(mean_photons >= 0.0) {
        return Err(invalid("mean_photons", "must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<u32> = if mean_photons == 0.0 {
        vec![0; n_shots]
    } else {
        let pois = rand_distr::Poisson::new(mean_photons)
            .map_err(|e| invalid("mean_photons", e.to_string()))?;
        (0..n_shots)
            .map(|_| rng.sample::<f64, _>(pois) as u32)
            .collect()
    };
    let max_n = counts.iter().copied().max().unwrap_or(0);
    let table: Vec<Complex64> = (0..=max_n)
        .map(|n| crate::semiclassical::longitudinal_response(n, g_l, g_sp, kappa_b))
        .collect::<Result<_>>()?;
    let noise = heterodyne_readout(
        &[Complex64::new(0.0, 0.0)],
        t_int,
        kappa_b,
        eta,
        rng.random(),
        n_shots,
    )?;
    Ok(counts
        .iter()
        .zip(&noise[0])
        .map(|(n, z)| table[*n as usize] + z)
        .collect())
}
