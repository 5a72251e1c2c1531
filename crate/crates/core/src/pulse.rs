//! Square-pulse sequences, protocol builders and their compilation into
//! piecewise-constant master-equation problems.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::hilbert::{
    displacement_operator, expectation, mode_operators, single_mode_displacement, Mode, QOperator,
    QState, SpaceDims,
};
use crate::lindblad::{evolve_adjoint, evolve_from, EvolveOptions};
use crate::model::{
    collapse_operators, hamiltonian_longitudinal, hamiltonian_reset, hamiltonian_two_photon,
    Cancellation, CollapseFlags, CollapseOp, DriveSpec, PhysicalParams,
};
use crate::ode::OdeOptions;
use crate::scalar::{abs2, cr, modulus, real, to_f64, Real, C};
use crate::semiclassical::kappa_conf_closed_form;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    TwoPhotonPump,
    BufferDrive,
    MemoryDrive,
    LongitudinalPump,
    ResetPump,
    MemoryDisplacement,
}

impl Channel {
    pub const CONTINUOUS: [Channel; 5] = [
        Channel::TwoPhotonPump,
        Channel::BufferDrive,
        Channel::MemoryDrive,
        Channel::LongitudinalPump,
        Channel::ResetPump,
    ];

    fn slot(self) -> usize {
        match self {
            Channel::TwoPhotonPump => 0,
            Channel::BufferDrive => 1,
            Channel::MemoryDrive => 2,
            Channel::LongitudinalPump => 3,
            Channel::ResetPump => 4,
            Channel::MemoryDisplacement => usize::MAX,
        }
    }
}

/// One square pulse. Pump envelopes are relative to the calibrated coupling
/// (1 = nominal), drives are in rad/s, displacements are amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<T: Real> {
    pub channel: Channel,
    pub t_start: T,
    pub duration: T,
    pub envelope: C<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(channel: Channel, t_start: T, duration: T, envelope: C<T>) -> Self {
        Segment {
            channel,
            t_start,
            duration,
            envelope,
        }
    }

    pub fn displacement(t: T, lambda: C<T>) -> Self {
        Segment {
            channel: Channel::MemoryDisplacement,
            t_start: t,
            duration: T::zero(),
            envelope: lambda,
        }
    }

    pub fn t_end(&self) -> T {
        self.t_start + self.duration
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence<T: Real> {
    segments: Vec<Segment<T>>,
    total_time: T,
}

impl<T: Real> PulseSequence<T> {
    /// Sorts segments by start time; `total_time` defaults to the latest segment end.
    pub fn new(mut segments: Vec<Segment<T>>, total_time: Option<T>) -> Result<Self> {
        for s in &segments {
            let bad = |x: T| !to_f64(x).is_finite();
            if bad(s.t_start) || bad(s.duration) || bad(s.envelope.re) || bad(s.envelope.im) {
                return Err(Error::Sequence("non-finite segment field".into()));
            }
            if s.t_start < T::zero() {
                return Err(Error::Sequence("segment starts before t = 0".into()));
            }
            if s.duration < T::zero() {
                return Err(Error::Sequence("negative segment duration".into()));
            }
            if s.channel == Channel::MemoryDisplacement && s.duration != T::zero() {
                return Err(Error::Sequence(
                    "displacements are instantaneous (duration 0)".into(),
                ));
            }
        }
        segments.sort_by(|a, b| a.t_start.partial_cmp(&b.t_start).unwrap());
        for ch in Channel::CONTINUOUS {
            let on: Vec<&Segment<T>> = segments
                .iter()
                .filter(|s| s.channel == ch && s.duration > T::zero())
                .collect();
            for w in on.windows(2) {
                if w[1].t_start < w[0].t_end() {
                    return Err(Error::Sequence(format!(
                        "overlapping segments on channel {ch:?}"
                    )));
                }
            }
        }
        let end = segments.iter().fold(T::zero(), |m, s| m.max(s.t_end()));
        let total_time = match total_time {
            Some(t) if t < end => {
                return Err(Error::Sequence(
                    "total_time shorter than the last segment".into(),
                ));
            }
            Some(t) => t,
            None => end,
        };
        Ok(PulseSequence {
            segments,
            total_time,
        })
    }

    pub fn empty(total_time: T) -> Self {
        PulseSequence {
            segments: Vec::new(),
            total_time,
        }
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn total_time(&self) -> T {
        self.total_time
    }

    /// Appends `other` shifted to start at this sequence's end.
    pub fn then(&self, other: &PulseSequence<T>) -> Result<Self> {
        let shift = self.total_time;
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().map(|s| Segment {
            t_start: s.t_start + shift,
            ..*s
        }));
        Self::new(segs, Some(shift + other.total_time))
    }
}

/// Channel levels held constant over one interval.
pub type Levels<T> = [C<T>; 5];

#[derive(Clone, Debug, PartialEq)]
pub struct Interval<T: Real> {
    pub t_start: T,
    pub t_end: T,
    pub levels: Levels<T>,
    pub hamiltonian: QOperator<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kick<T: Real> {
    pub time: T,
    pub lambda: C<T>,
    pub unitary: QOperator<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDependentProblem<T: Real> {
    pub dims: SpaceDims,
    pub breakpoints: Vec<T>,
    pub intervals: Vec<Interval<T>>,
    /// Applied when the evolution proceeds past `time`; observations at `time` see the pre-kick state.
    pub kicks: Vec<Kick<T>>,
    pub collapse: Vec<CollapseOp<T>>,
    pub initial: QState<T>,
    pub total_time: T,
}

impl<T: Real> TimeDependentProblem<T> {
    /// Time-independent generator on `[0, total_time]`.
    pub fn constant(
        hamiltonian: QOperator<T>,
        collapse: Vec<CollapseOp<T>>,
        initial: QState<T>,
        total_time: T,
    ) -> Result<Self> {
        let dims = hamiltonian.dims();
        if initial.dims() != dims {
            return Err(Error::DimsMismatch(initial.dims(), dims));
        }
        if let Some(c) = collapse.iter().find(|c| c.op.dims() != dims) {
            return Err(Error::DimsMismatch(c.op.dims(), dims));
        }
        if !(total_time > T::zero()) {
            return Err(Error::Sequence("total time must be positive".into()));
        }
        let interval = Interval {
            t_start: T::zero(),
            t_end: total_time,
            levels: [cr(T::zero()); 5],
            hamiltonian,
        };
        Ok(TimeDependentProblem {
            dims,
            breakpoints: vec![T::zero(), total_time],
            intervals: vec![interval],
            kicks: Vec::new(),
            collapse,
            initial,
            total_time,
        })
    }

    /// Start of a terminal longitudinal window and the displacement applied right before it.
    pub fn readout_window(&self) -> Option<(T, C<T>)> {
        let last = self.intervals.last()?;
        if modulus(last.levels[Channel::LongitudinalPump.slot()]) == T::zero() {
            return None;
        }
        let mut start = last.t_start;
        for iv in self.intervals.iter().rev().skip(1) {
            if iv.levels == last.levels && iv.t_end == start {
                start = iv.t_start;
            } else {
                break;
            }
        }
        let lambda = self
            .kicks
            .iter()
            .filter(|k| k.time == start)
            .fold(cr(T::zero()), |acc, k| acc + k.lambda);
        Some((start, lambda))
    }

    pub fn with_initial(&self, initial: QState<T>) -> Result<Self> {
        if initial.dims() != self.dims {
            return Err(Error::DimsMismatch(initial.dims(), self.dims));
        }
        let mut p = self.clone();
        p.initial = initial;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions<T: Real> {
    pub allow_pump_overlap: bool,
    pub cancellation: Cancellation<T>,
    pub collapse: CollapseFlags<T>,
}

impl<T: Real> Default for CompileOptions<T> {
    fn default() -> Self {
        CompileOptions {
            allow_pump_overlap: false,
            cancellation: Cancellation::Exact,
            collapse: CollapseFlags::default(),
        }
    }
}

fn levels_at<T: Real>(seq: &PulseSequence<T>, t0: T, t1: T) -> Levels<T> {
    let mid = (t0 + t1) / real(2.0);
    let mut lv = [cr(T::zero()); 5];
    for s in &seq.segments {
        if s.channel != Channel::MemoryDisplacement && s.t_start <= mid && mid < s.t_end() {
            lv[s.channel.slot()] = s.envelope;
        }
    }
    lv
}

fn interval_hamiltonian<T: Real>(
    lv: &Levels<T>,
    params: &PhysicalParams<T>,
    dims: SpaceDims,
    opts: &CompileOptions<T>,
) -> Result<QOperator<T>> {
    let pump = lv[0];
    let mut p = *params;
    p.g2 = params.g2 * pump;
    let drive = DriveSpec {
        eps_d: lv[1],
        eps_z: lv[2],
    };
    let mut h = hamiltonian_two_photon(&p, &drive, dims)?;
    let sl = lv[3];
    if modulus(sl) > T::zero() {
        if sl.im != T::zero() {
            return Err(Error::Sequence(
                "longitudinal pump envelope must be real".into(),
            ));
        }
        if modulus(pump) > T::zero() && !opts.allow_pump_overlap {
            return Err(Error::Sequence(
                "longitudinal and two-photon pumps overlap".into(),
            ));
        }
        let mut q = *params;
        q.g_l = params.g_l * sl.re;
        q.g_sp = params.g_sp * sl.re;
        let canc = match opts.cancellation {
            Cancellation::Exact => Cancellation::Exact,
            Cancellation::Residual(g) => Cancellation::Residual(g * sl.re),
        };
        h = &h + &hamiltonian_longitudinal(&q, dims, canc)?;
    }
    let sr = lv[4];
    if modulus(sr) > T::zero() {
        if sr.im != T::zero() {
            return Err(Error::Sequence("reset pump envelope must be real".into()));
        }
        h = &h + &hamiltonian_reset(params.g_reset * sr.re * sr.re, dims)?;
    }
    Ok(h)
}

/// Piecewise-constant realization of a pulse sequence.
pub fn compile<T: Real>(
    seq: &PulseSequence<T>,
    params: &PhysicalParams<T>,
    dims: SpaceDims,
    initial: QState<T>,
    opts: &CompileOptions<T>,
) -> Result<TimeDependentProblem<T>> {
    params.validate()?;
    if initial.dims() != dims {
        return Err(Error::DimsMismatch(initial.dims(), dims));
    }
    for s in &seq.segments {
        let pumped = matches!(
            s.channel,
            Channel::TwoPhotonPump | Channel::LongitudinalPump | Channel::ResetPump
        );
        if pumped && modulus(s.envelope) > T::one() + real(1e-12) {
            warn!(
                "{:?} scale {:.3} exceeds the calibrated amplitude",
                s.channel,
                to_f64(modulus(s.envelope))
            );
        }
    }
    let mut bps: Vec<T> = vec![T::zero(), seq.total_time];
    for s in &seq.segments {
        bps.push(s.t_start);
        bps.push(s.t_end());
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    bps.retain(|t| *t <= seq.total_time);

    let mut cache: BTreeMap<Vec<(u64, u64)>, QOperator<T>> = BTreeMap::new();
    let mut intervals = Vec::new();
    for w in bps.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let lv = levels_at(seq, t0, t1);
        let key: Vec<(u64, u64)> = lv
            .iter()
            .map(|z| (to_f64(z.re).to_bits(), to_f64(z.im).to_bits()))
            .collect();
        let h = match cache.get(&key) {
            Some(h) => h.clone(),
            None => {
                let h = interval_hamiltonian(&lv, params, dims, opts)?;
                cache.insert(key, h.clone());
                h
            }
        };
        intervals.push(Interval {
            t_start: t0,
            t_end: t1,
            levels: lv,
            hamiltonian: h,
        });
    }
    let mut kicks = Vec::new();
    for s in seq
        .segments
        .iter()
        .filter(|s| s.channel == Channel::MemoryDisplacement)
    {
        if modulus(s.envelope) == T::zero() {
            continue;
        }
        kicks.push(Kick {
            time: s.t_start,
            lambda: s.envelope,
            unitary: displacement_operator(s.envelope, dims, Mode::Mem)?,
        });
    }
    let collapse = collapse_operators(params, dims, &opts.collapse)?;
    Ok(TimeDependentProblem {
        dims,
        breakpoints: bps,
        intervals,
        kicks,
        collapse,
        initial,
        total_time: seq.total_time,
    })
}

/// Pump and stabilizing buffer drive for `|±α⟩` over `[t0, t0 + dt)`.
fn stabilize<T: Real>(params: &PhysicalParams<T>, alpha_sq: C<T>, t0: T, dt: T) -> [Segment<T>; 2] {
    [
        Segment::new(Channel::TwoPhotonPump, t0, dt, cr(T::one())),
        Segment::new(Channel::BufferDrive, t0, dt, params.g2.conj() * alpha_sq),
    ]
}

/// Cat preparation from the vacuum: pump and buffer drive for `dt`.
pub fn build_cat_prep<T: Real>(
    params: &PhysicalParams<T>,
    alpha: C<T>,
    dt: T,
) -> Result<PulseSequence<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Sequence("preparation time must be positive".into()));
    }
    PulseSequence::new(
        stabilize(params, alpha * alpha, T::zero(), dt).to_vec(),
        Some(dt),
    )
}

/// Memory-drive amplitude and duration rotating the cat qubit by `angle` about its Z axis.
///
/// The drive term `ε a† + ε* a` is taken parallel to `α`, so the induced
/// displacement `−iε` is in quadrature with `α` and the projected Hamiltonian
/// is `2|α||ε| Z`: the gate is `exp(−i angle/2 · Z)`.
pub fn zeno_drive<T: Real>(alpha: C<T>, eps_abs: T, angle: T) -> Result<(C<T>, T)> {
    let a = modulus(alpha);
    if a == T::zero() {
        return Err(Error::DegenerateInput("Zeno gate needs α ≠ 0".into()));
    }
    if !(eps_abs > T::zero()) {
        return Err(Error::DegenerateInput("Zeno gate needs |ε_Z| > 0".into()));
    }
    let phase = alpha / cr(a);
    let sign = if angle < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    let duration = angle.abs() / (real::<T>(4.0) * a * eps_abs);
    Ok((phase * cr(sign * eps_abs), duration))
}

pub fn build_zeno_gate<T: Real>(
    params: &PhysicalParams<T>,
    alpha: C<T>,
    eps_z: C<T>,
    angle: T,
) -> Result<PulseSequence<T>> {
    let (eps, dur) = zeno_drive(alpha, modulus(eps_z), angle)?;
    let mut segs = stabilize(params, alpha * alpha, T::zero(), dur).to_vec();
    segs.push(Segment::new(Channel::MemoryDrive, T::zero(), dur, eps));
    PulseSequence::new(segs, Some(dur))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolonomicTimings<T: Real> {
    pub prep: T,
    /// Memory-drive magnitude of the π/2 Zeno step (rad/s).
    pub zeno_eps: T,
    pub deflation: T,
    pub inflation: T,
    pub ringdown: T,
    pub readout: T,
}

impl<T: Real> HolonomicTimings<T> {
    pub fn defaults(params: &PhysicalParams<T>, alpha1: T, alpha2: T) -> Self {
        let g = modulus(params.g2);
        let k1 = kappa_conf_closed_form(g, params.kappa_b, alpha1);
        let k2 = kappa_conf_closed_form(g, params.kappa_b, alpha2);
        HolonomicTimings {
            prep: real(400e-9),
            zeno_eps: real(std::f64::consts::TAU * 200e3),
            deflation: real::<T>(3.0) / k1,
            inflation: real::<T>(3.0) / k2,
            ringdown: real(100e-9),
            readout: real(1e-6),
        }
    }
}

/// Parity-to-photon-number mapping preceded by a `D(−λ)` displacement, so that
/// the readout photon number is an affine function of `W(λ)`.
pub fn build_holonomic_tomography<T: Real>(
    params: &PhysicalParams<T>,
    lambda: C<T>,
    alpha1: T,
    alpha2: T,
    timings: &HolonomicTimings<T>,
) -> Result<PulseSequence<T>> {
    let tm = timings;
    for (name, v) in [
        ("prep", tm.prep),
        ("deflation", tm.deflation),
        ("inflation", tm.inflation),
        ("readout", tm.readout),
    ] {
        if !(v > T::zero()) {
            return Err(Error::Sequence(format!(
                "holonomic timing `{name}` must be positive"
            )));
        }
    }
    if tm.ringdown < T::zero() {
        return Err(Error::Sequence(
            "holonomic ring-down must be non-negative".into(),
        ));
    }
    let g = modulus(params.g2);
    let kc = kappa_conf_closed_form(g, params.kappa_b, alpha1).min(kappa_conf_closed_form(
        g,
        params.kappa_b,
        alpha2,
    ));
    for (name, v) in [
        ("prep", tm.prep),
        ("deflation", tm.deflation),
        ("inflation", tm.inflation),
    ] {
        if v * kc < T::one() {
            warn!("holonomic `{name}` window shorter than 1/κ_conf; the mapping is not adiabatic");
        }
    }
    let a1 = cr(alpha1);
    let (eps, t_z) = zeno_drive(a1, tm.zeno_eps, -T::pi() / real(2.0))?;
    let mut segs = vec![Segment::displacement(T::zero(), -lambda)];
    let mut t = T::zero();
    segs.extend(stabilize(params, a1 * a1, t, tm.prep + t_z));
    t += tm.prep;
    segs.push(Segment::new(Channel::MemoryDrive, t, t_z, eps));
    t += t_z;
    segs.push(Segment::new(
        Channel::TwoPhotonPump,
        t,
        tm.deflation,
        cr(T::one()),
    ));
    t += tm.deflation;
    segs.push(Segment::new(
        Channel::TwoPhotonPump,
        t,
        tm.inflation,
        cr(T::one()),
    ));
    segs.push(Segment::new(
        Channel::BufferDrive,
        t,
        tm.inflation,
        -params.g2.conj() * cr(alpha2 * alpha2),
    ));
    t += tm.inflation + tm.ringdown;
    segs.push(Segment::displacement(t, C::new(T::zero(), alpha2)));
    segs.push(Segment::new(
        Channel::LongitudinalPump,
        t,
        tm.readout,
        cr(T::one()),
    ));
    t += tm.readout;
    PulseSequence::new(segs, Some(t))
}

/// Bit-flip probe: displace to `α`, stabilize, ramp to `α′` in eight steps, displace by `α′`, read out.
pub fn build_bitflip_probe<T: Real>(
    params: &PhysicalParams<T>,
    alpha: T,
    alpha_prime: T,
    stabilize_time: T,
    ramp_time: T,
    readout_time: T,
) -> Result<PulseSequence<T>> {
    if !(alpha > T::zero()) || !(alpha_prime > T::zero()) {
        return Err(Error::Sequence(
            "bit-flip probe needs positive real amplitudes".into(),
        ));
    }
    if stabilize_time < T::zero() || ramp_time < T::zero() || !(readout_time > T::zero()) {
        return Err(Error::Sequence(
            "bit-flip probe timings must be non-negative".into(),
        ));
    }
    let mut segs = vec![Segment::displacement(T::zero(), cr(alpha))];
    let mut t = T::zero();
    if stabilize_time > T::zero() {
        segs.extend(stabilize(params, cr(alpha * alpha), t, stabilize_time));
        t += stabilize_time;
    }
    if ramp_time > T::zero() {
        let dt = ramp_time / real(8.0);
        for k in 1..=8 {
            let ak = alpha + (alpha_prime - alpha) * real::<T>(k as f64) / real(8.0);
            segs.extend(stabilize(params, cr(ak * ak), t, dt));
            t += dt;
        }
    }
    segs.push(Segment::displacement(t, cr(alpha_prime)));
    segs.push(Segment::new(
        Channel::LongitudinalPump,
        t,
        readout_time,
        cr(T::one()),
    ));
    PulseSequence::new(segs, Some(t + readout_time))
}

/// Deflation probe: displace to `α`, pump without drive for `dt`, read out.
pub fn build_deflation_probe<T: Real>(
    alpha: C<T>,
    dt: T,
    readout_time: T,
) -> Result<PulseSequence<T>> {
    if dt < T::zero() || !(readout_time > T::zero()) {
        return Err(Error::Sequence(
            "deflation probe timings must be non-negative".into(),
        ));
    }
    let mut segs = vec![Segment::displacement(T::zero(), alpha)];
    if dt > T::zero() {
        segs.push(Segment::new(
            Channel::TwoPhotonPump,
            T::zero(),
            dt,
            cr(T::one()),
        ));
    }
    segs.push(Segment::new(
        Channel::LongitudinalPump,
        dt,
        readout_time,
        cr(T::one()),
    ));
    PulseSequence::new(segs, Some(dt + readout_time))
}

#[derive(Clone, Debug)]
pub struct ReadoutOutcome<T: Real> {
    /// Memory photon number seen by the longitudinal readout.
    pub photon_number: T,
    /// State at the start of the readout window, before the final displacement.
    pub state: QState<T>,
    pub displacement: C<T>,
}

/// Evolves to the readout window and evaluates `⟨(a + λ)†(a + λ)⟩` on the pre-displacement state.
///
/// The photon number is conserved by the longitudinal coupling, so the window itself is not integrated.
pub fn simulate_readout<T: Real>(
    problem: &TimeDependentProblem<T>,
    opts: &EvolveOptions<T>,
) -> Result<ReadoutOutcome<T>> {
    let (t_ro, lambda) = problem
        .readout_window()
        .unwrap_or((problem.total_time, cr(T::zero())));
    let res = evolve_from(problem, &problem.initial, T::zero(), &[t_ro], &[], opts)?;
    let state = res.final_state;
    let (a, _) = mode_operators::<T>(problem.dims)?;
    let n = expectation(&(&a.dag() * &a), &state)?.re;
    let ea = expectation(&a, &state)?;
    let tr = state.trace();
    let photon_number = n + real::<T>(2.0) * (lambda.conj() * ea).re + abs2(lambda) * tr;
    Ok(ReadoutOutcome {
        photon_number,
        state,
        displacement: lambda,
    })
}

/// Readout of the holonomic tomography as a memory observable.
///
/// Everything after the opening `D(−λ)` is independent of `λ`, so the readout photon
/// number is `Tr(E D(−λ) ρ D(−λ)†)` for a single Heisenberg-picture operator `E`,
/// restricted here to the buffer vacuum.
#[derive(Clone, Debug)]
pub struct HolonomicMap<T: Real> {
    pub observable: DMatrix<C<T>>,
}

/// Largest trace a displaced input may lose to the truncation.
pub const MAP_TRUNCATION_TOL: f64 = 1e-6;

impl<T: Real> HolonomicMap<T> {
    pub fn photon_number(&self, rho_mem: &DMatrix<C<T>>, lambda: C<T>) -> Result<T> {
        let n = self.observable.nrows();
        if rho_mem.nrows() != n || rho_mem.ncols() != n {
            return Err(Error::InvalidDims(format!(
                "input must be {n}×{n} to match the map"
            )));
        }
        let (d, _) = single_mode_displacement(-lambda, n)?;
        let shifted = &d * rho_mem * d.adjoint();
        let lost = rho_mem.trace().re - shifted.trace().re;
        if lost > real(MAP_TRUNCATION_TOL) {
            return Err(Error::Truncation(format!(
                "displacement by {:.3} loses {:.2e} of the trace",
                to_f64(modulus(lambda)),
                to_f64(lost)
            )));
        }
        Ok((&self.observable * shifted).trace().re)
    }
}

pub fn holonomic_map<T: Real>(
    params: &PhysicalParams<T>,
    alpha1: T,
    alpha2: T,
    timings: &HolonomicTimings<T>,
    dims: SpaceDims,
    opts: &CompileOptions<T>,
    ode: &OdeOptions<T>,
) -> Result<HolonomicMap<T>> {
    let seq = build_holonomic_tomography(params, cr(T::zero()), alpha1, alpha2, timings)?;
    let problem = compile(&seq, params, dims, QState::fock(dims, 0, 0)?, opts)?;
    let (t_ro, mu) = problem
        .readout_window()
        .unwrap_or((problem.total_time, cr(T::zero())));
    let (a, _) = mode_operators::<T>(dims)?;
    let id = QOperator::identity(dims);
    let shifted = &a + &id.scale(mu);
    let e = evolve_adjoint(&problem, &(&shifted.dag() * &shifted), t_ro, ode)?;
    let m = e.matrix();
    let observable = DMatrix::from_fn(dims.n_mem(), dims.n_mem(), |i, j| {
        m[(dims.index(i, 0), dims.index(j, 0))]
    });
    Ok(HolonomicMap { observable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn overlapping_same_channel_rejected() {
        let segs = vec![
            Segment::new(Channel::BufferDrive, 0.0, 2.0, Complex::new(1.0, 0.0)),
            Segment::new(Channel::BufferDrive, 1.0, 2.0, Complex::new(1.0, 0.0)),
        ];
        assert!(PulseSequence::new(segs, None).is_err());
    }

    #[test]
    fn zeno_drive_arithmetic() {
        let tau = std::f64::consts::TAU;
        let alpha = Complex::new(11.3f64.sqrt(), 0.0);
        let eps = std::f64::consts::PI / (4.0 * alpha.re * 235e-9);
        assert!((eps / tau - 158e3).abs() < 1e3, "{}", eps / tau);
        let (e, d) = zeno_drive(alpha, eps, std::f64::consts::PI).unwrap();
        assert!((d - 235e-9).abs() < 1e-15);
        assert!(e.im.abs() < 1e-12 && e.re > 0.0);
        let (_, d0) = zeno_drive(alpha, eps, 0.0).unwrap();
        assert_eq!(d0, 0.0);
        assert!(zeno_drive(Complex::new(0.0, 0.0), eps, 1.0).is_err());
    }
}
