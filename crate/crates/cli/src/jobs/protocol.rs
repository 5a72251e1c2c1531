use std::f64::consts::FRAC_2_PI;

use catsim_core::analysis::{fit_damped_cosine, FitResult};
use catsim_core::hilbert::{cat_state, Parity, QState};
use catsim_core::lindblad::evolve;
use catsim_core::model::{hamiltonian_two_photon, DriveSpec};
use catsim_core::pulse::{
    build_bitflip_probe, build_deflation_probe, compile, holonomic_map, simulate_readout,
    HolonomicMap, HolonomicTimings, PulseSequence, TimeDependentProblem,
};
use catsim_core::semiclassical::drive_dephasing_rate;
use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{c, collapse, compile_options, linspace, observable_operator};
use crate::config::{JobConfig, Observable, ProtocolJob, SequenceBlock, StateSpec};
use crate::error::CliResult;
use crate::output::{json_artifact, num, Artifact, Table};

/// Affine scale turning a tomography photon number into a Wigner estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolonomicCalibration {
    /// Readout of the vacuum (even) at λ = 0.
    pub n_even: f64,
    /// Readout of Fock |1⟩ (odd) at λ = 0.
    pub n_odd: f64,
    pub midpoint: f64,
    /// Ideal bright/dark half-span `2α₂²`.
    pub half_span: f64,
}

impl HolonomicCalibration {
    fn measure(map: &HolonomicMap<f64>, alpha2: f64) -> CliResult<Self> {
        let n = map.observable.nrows();
        let fock =
            |k: usize| DMatrix::from_fn(n, n, |i, j| c(if i == k && j == k { 1.0 } else { 0.0 }));
        let n_even = map.photon_number(&fock(0), c(0.0))?;
        let n_odd = map.photon_number(&fock(1), c(0.0))?;
        Ok(HolonomicCalibration {
            n_even,
            n_odd,
            midpoint: 0.5 * (n_even + n_odd),
            half_span: 2.0 * alpha2 * alpha2,
        })
    }
}

pub fn wigner_estimate(photon_number: f64, cal: &HolonomicCalibration) -> f64 {
    FRAC_2_PI * (photon_number - cal.midpoint) / cal.half_span
}

#[derive(Serialize)]
struct HolonomicSummary {
    alpha1: f64,
    alpha2: f64,
    timings: HolonomicTimings<f64>,
    calibration: HolonomicCalibration,
}

#[derive(Serialize)]
struct ZenoSummary {
    alpha: [f64; 2],
    eps_z: f64,
    predicted_omega: f64,
    predicted_decay_rate: f64,
    fit: Option<FitResult>,
}

#[derive(Serialize)]
struct ReadoutSummary {
    photon_number: f64,
    readout_displacement: [f64; 2],
}

pub fn run(cfg: &JobConfig, j: &ProtocolJob) -> CliResult<Vec<Artifact>> {
    match j {
        ProtocolJob::Holonomic {
            state,
            alpha1,
            alpha2,
            grid,
            timings,
        } => holonomic(cfg, state, *alpha1, *alpha2, grid, timings),
        ProtocolJob::Zeno {
            alpha,
            eps_z,
            duration,
            n_points,
            initial,
        } => zeno(cfg, alpha.0, *eps_z, *duration, *n_points, initial.as_ref()),
        ProtocolJob::Deflation {
            alphas,
            time,
            readout,
        } => {
            let p = &cfg.params;
            let rows = alphas
                .par_iter()
                .map(|a| {
                    let a = a.0;
                    let dims = cfg.hilbert.dims_for(a.norm())?;
                    let seq = build_deflation_probe(a, *time, *readout)?;
                    let prob = compile(
                        &seq,
                        p,
                        dims,
                        QState::fock(dims, 0, 0)?,
                        &compile_options(cfg),
                    )?;
                    let n = simulate_readout(&prob, &cfg.solver.evolve())?.photon_number;
                    let ideal = 0.5 * (1.0 - (-2.0 * a.norm_sqr()).exp());
                    Ok([a.re, a.im, n, ideal])
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut t = Table::new(&["alpha_re", "alpha_im", "photon_number", "ideal"]);
            for r in rows {
                t.push_numbers(&r);
            }
            Ok(vec![t.into_artifact("deflation.csv")])
        }
        ProtocolJob::BitflipProbe {
            alpha,
            alpha_prime,
            stabilize,
            ramp,
            readout,
            initial,
        } => {
            let seq = build_bitflip_probe(
                &cfg.params,
                *alpha,
                *alpha_prime,
                *stabilize,
                *ramp,
                *readout,
            )?;
            let init = initial.clone().unwrap_or_default();
            let amp = init.amplitude() + alpha + 2.0 * alpha_prime;
            readout_only(cfg, &seq, &init, amp)
        }
        ProtocolJob::Sequence {
            segments,
            total_time,
            initial,
        } => {
            let block = SequenceBlock {
                segments: segments.clone(),
                total_time: *total_time,
            };
            let amp = initial.amplitude() + block.displacement_budget();
            readout_only(cfg, &block.build()?, initial, amp)
        }
    }
}

fn readout_only(
    cfg: &JobConfig,
    seq: &PulseSequence<f64>,
    init: &StateSpec,
    amp: f64,
) -> CliResult<Vec<Artifact>> {
    let dims = cfg.hilbert.dims_for(amp)?;
    let prob = compile(
        seq,
        &cfg.params,
        dims,
        init.build(dims)?,
        &compile_options(cfg),
    )?;
    let out = simulate_readout(&prob, &cfg.solver.evolve())?;
    let s = ReadoutSummary {
        photon_number: out.photon_number,
        readout_displacement: [out.displacement.re, out.displacement.im],
    };
    Ok(vec![json_artifact("protocol.json", &s)])
}

fn holonomic(
    cfg: &JobConfig,
    state: &StateSpec,
    alpha1: f64,
    alpha2: f64,
    grid: &crate::config::GridBlock,
    timings: &crate::config::TimingsBlock,
) -> CliResult<Vec<Artifact>> {
    let p = &cfg.params;
    let tm = timings.apply(HolonomicTimings::defaults(p, alpha1, alpha2));
    let dims = cfg
        .hilbert
        .dims_for(alpha2.max(state.amplitude() + grid.reach()))?;
    let map = holonomic_map(
        p,
        alpha1,
        alpha2,
        &tm,
        dims,
        &compile_options(cfg),
        &cfg.solver.ode(),
    )?;
    let cal = HolonomicCalibration::measure(&map, alpha2)?;
    let rho = state.build(dims)?.memory_reduced();
    let pts = grid.spec().points();
    let ns = pts
        .par_iter()
        .map(|l| map.photon_number(&rho, *l))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["re", "im", "value", "photon_number"]);
    for (l, n) in pts.iter().zip(&ns) {
        t.push_numbers(&[l.re, l.im, wigner_estimate(*n, &cal), *n]);
    }
    let summary = HolonomicSummary {
        alpha1,
        alpha2,
        timings: tm,
        calibration: cal,
    };
    Ok(vec![
        t.into_artifact("holonomic.csv"),
        json_artifact("holonomic.json", &summary),
    ])
}

/// Stabilized cat under a memory drive parallel to α. The drive rotates about Z, so the
/// parity of an initial even cat oscillates at `4|α|ε_Z` and `Z` stays put.
fn zeno(
    cfg: &JobConfig,
    alpha: Complex64,
    eps: f64,
    duration: f64,
    n_points: usize,
    initial: Option<&StateSpec>,
) -> CliResult<Vec<Artifact>> {
    let p = &cfg.params;
    let amp = alpha.norm().max(initial.map_or(0.0, |s| s.amplitude()));
    let dims = cfg.hilbert.dims_for(amp)?;
    let eps_z = alpha / alpha.norm() * eps;
    let drive = DriveSpec {
        eps_z,
        ..DriveSpec::stabilizing(p.g2, alpha)
    };
    let h = hamiltonian_two_photon(p, &drive, dims)?;
    let init = match initial {
        Some(s) => s.build(dims)?,
        None => cat_state(alpha, Parity::Even, dims)?,
    };
    let prob = TimeDependentProblem::constant(h, collapse(cfg, dims)?, init, duration)?;
    let z = observable_operator(Observable::Z, dims, Some(alpha))?;
    let par = observable_operator(Observable::Parity, dims, None)?;
    let times = linspace(duration, n_points);
    let res = evolve(
        &prob,
        &times,
        &[("z", &z), ("parity", &par)],
        &cfg.solver.evolve(),
    )?;
    let zs: Vec<f64> = res
        .observable("z")
        .unwrap_or(&[])
        .iter()
        .map(|v| v.re)
        .collect();
    let ps: Vec<f64> = res
        .observable("parity")
        .unwrap_or(&[])
        .iter()
        .map(|v| v.re)
        .collect();
    let mut t = Table::new(&["t", "z", "parity"]);
    for k in 0..times.len() {
        t.push(vec![num(times[k]), num(zs[k]), num(ps[k])]);
    }
    let fit = match fit_damped_cosine(&times, &ps) {
        Ok(f) => Some(f),
        Err(e) => {
            warn!("damped-cosine fit of the parity failed: {e}");
            None
        }
    };
    let summary = ZenoSummary {
        alpha: [alpha.re, alpha.im],
        eps_z: eps,
        predicted_omega: 4.0 * alpha.norm() * eps,
        predicted_decay_rate: drive_dephasing_rate(eps_z, alpha, p.g2, p.kappa_b)?
            + 2.0 * p.kappa_a * alpha.norm_sqr(),
        fit,
    };
    Ok(vec![
        t.into_artifact("zeno.csv"),
        json_artifact("zeno_fit.json", &summary),
    ])
}
