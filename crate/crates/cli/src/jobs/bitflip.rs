use catsim_core::analysis::FitResult;
use catsim_core::hilbert::{coherent_state, Mode};
use catsim_core::model::{collapse_operators, hamiltonian_two_photon, DriveSpec};
use catsim_core::pulse::TimeDependentProblem;
use catsim_core::trajectories::{
    bitflip_time_from_trajectories, ensemble_mean, jump_unravel, TrajectoryOptions,
};
use serde::Serialize;

use super::{c, linspace, observable_operator};
use crate::config::{BitflipJob, JobConfig, Observable};
use crate::error::CliResult;
use crate::output::{json_artifact, num, Artifact, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `exp(slope)`: growth of T_X per added photon.
    pub factor_per_photon: f64,
}

/// Least-squares line through `(x, ln y)`; needs two distinct abscissae and positive `y`.
pub fn log_linear_fit(x: &[f64], y: &[f64]) -> Option<LogLinearFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, y)| **y > 0.0 && y.is_finite())
        .map(|(x, y)| (*x, y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(LogLinearFit {
        slope,
        intercept,
        r_squared,
        factor_per_photon: slope.exp(),
    })
}

#[derive(Serialize)]
struct Point {
    alpha_sq: f64,
    t_x: f64,
    ensemble_fit: Option<FitResult>,
    flips: usize,
}

#[derive(Serialize)]
struct Summary {
    noise_scale: f64,
    n_traj: usize,
    points: Vec<Point>,
    log_linear: Option<LogLinearFit>,
}

/// T_X from the decay of the ensemble `⟨Z_α⟩` of jump trajectories started in `|α⟩`.
pub fn run(cfg: &JobConfig, j: &BitflipJob) -> CliResult<Vec<Artifact>> {
    let mut p = cfg.params;
    p.kappa_a *= j.noise_scale;
    let mut table = Table::new(&[
        "alpha_sq",
        "t_x",
        "t_x_sigma",
        "dwell_t_x",
        "dwell_ci_low",
        "dwell_ci_high",
        "flips",
        "lower_bound_only",
    ]);
    let mut traces = Table::new(&["alpha_sq", "t", "z", "z_stderr"]);
    let mut points = Vec::new();
    for (i, &a2) in j.alpha_sq.iter().enumerate() {
        let alpha = c(a2.sqrt());
        let dims = cfg.hilbert.dims_for(alpha.re)?;
        let h = hamiltonian_two_photon(&p, &DriveSpec::stabilizing(p.g2, alpha), dims)?;
        let col = collapse_operators(&p, dims, &cfg.collapse)?;
        let init = coherent_state(alpha, dims, Mode::Mem)?;
        let t_end = j.t_end.get(i);
        let prob = TimeDependentProblem::constant(h, col, init, t_end)?;
        let z = observable_operator(Observable::Z, dims, Some(alpha))?;
        let times = linspace(t_end, j.n_points);
        let opts = TrajectoryOptions {
            ode: cfg.solver.ode(),
            ..TrajectoryOptions::default()
        };
        let seed = cfg.seed ^ ((i as u64 + 1) << 40);
        let recs = jump_unravel(&prob, seed, j.n_traj, &times, &[("z", &z)], &opts)?;
        let est = bitflip_time_from_trajectories(&recs, "z", j.band)?;
        let mean = ensemble_mean(&recs, "z")?;
        for k in 0..mean.times.len() {
            traces.push_numbers(&[a2, mean.times[k], mean.mean[k], mean.std_err[k]]);
        }
        let t_x = est.t_x_fit().unwrap_or(f64::NAN);
        let sigma = est
            .ensemble_fit
            .as_ref()
            .and_then(|f| f.sigma_of("T"))
            .unwrap_or(f64::NAN);
        table.push(vec![
            num(a2),
            num(t_x),
            num(sigma),
            num(est.dwell.t_x),
            num(est.dwell.ci_low),
            num(est.dwell.ci_high),
            est.flips.to_string(),
            est.lower_bound_only.to_string(),
        ]);
        points.push(Point {
            alpha_sq: a2,
            t_x,
            ensemble_fit: est.ensemble_fit,
            flips: est.flips,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.alpha_sq).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.t_x).collect();
    let summary = Summary {
        noise_scale: j.noise_scale,
        n_traj: j.n_traj,
        log_linear: log_linear_fit(&xs, &ys),
        points,
    };
    Ok(vec![
        table.into_artifact("bitflip.csv"),
        traces.into_artifact("bitflip_z.csv"),
        json_artifact("bitflip_fit.json", &summary),
    ])
}
