//! One module per job kind. Each returns its artifacts in memory; the caller writes them.

mod bitflip;
mod evolve;
mod fit;
mod gap;
mod protocol;
mod readout;
mod semiclassical;
mod wigner;

use std::path::Path;

use catsim_core::analysis::z_operator;
use catsim_core::hilbert::{mode_operators, parity_operator, Mode, QOperator, SpaceDims};
use catsim_core::model::{collapse_operators, CollapseOp};
use catsim_core::pulse::CompileOptions;
use num_complex::Complex64;

use crate::config::{Job, JobConfig, Observable};
use crate::error::CliResult;
use crate::output::Artifact;

pub use bitflip::log_linear_fit;
pub use protocol::{wigner_estimate, HolonomicCalibration};

pub fn execute(cfg: &JobConfig, base_dir: &Path) -> CliResult<Vec<Artifact>> {
    match &cfg.job {
        Job::Evolve(j) => evolve::run(cfg, j),
        Job::Wigner(j) => wigner::run(cfg, j),
        Job::Gap(j) => gap::run(cfg, j),
        Job::Bitflip(j) => bitflip::run(cfg, j),
        Job::Semiclassical(j) => semiclassical::run(cfg, j),
        Job::Protocol(j) => protocol::run(cfg, j),
        Job::Fit(j) => fit::run(j, base_dir),
        Job::Readout(j) => readout::run(cfg, j),
    }
}

fn collapse(cfg: &JobConfig, dims: SpaceDims) -> CliResult<Vec<CollapseOp<f64>>> {
    Ok(collapse_operators(&cfg.params, dims, &cfg.collapse)?)
}

fn compile_options(cfg: &JobConfig) -> CompileOptions<f64> {
    CompileOptions {
        collapse: cfg.collapse,
        ..CompileOptions::default()
    }
}

/// `n` evenly spaced times on `[0, t_end]`.
fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Hermitian operator for each requested observable.
fn observable_operator(
    obs: Observable,
    dims: SpaceDims,
    alpha_ref: Option<Complex64>,
) -> CliResult<QOperator<f64>> {
    let (a, b) = mode_operators::<f64>(dims)?;
    let re = |x: &QOperator<f64>| (x + &x.dag()).scale(c(0.5));
    let im = |x: &QOperator<f64>| (x + &x.dag().scale(c(-1.0))).scale(Complex64::new(0.0, -0.5));
    let a2 = &a * &a;
    Ok(match obs {
        Observable::NMem => &a.dag() * &a,
        Observable::NBuf => &b.dag() * &b,
        Observable::Parity => parity_operator(dims, Mode::Mem),
        Observable::Z => {
            let alpha = alpha_ref.unwrap_or(c(0.0));
            QOperator::embed(dims, Mode::Mem, &z_operator(alpha, dims.n_mem())?)?
        }
        Observable::ReA => re(&a),
        Observable::ImA => im(&a),
        Observable::ReB => re(&b),
        Observable::ImB => im(&b),
        Observable::ReA2 => re(&a2),
        Observable::ImA2 => im(&a2),
    })
}
