use catsim_core::lindblad::evolve;
use catsim_core::model::{hamiltonian_two_photon, DriveSpec};
use catsim_core::pulse::{compile, TimeDependentProblem};
use catsim_core::trajectories::{ensemble_mean, jump_unravel, TrajectoryOptions};

use super::{collapse, compile_options, linspace, observable_operator};
use crate::config::{EvolveJob, JobConfig, Method};
use crate::error::CliResult;
use crate::output::{Artifact, Table};

/// Without `drive` or `sequence` the pump stays on with no buffer drive.
fn problem(cfg: &JobConfig, j: &EvolveJob) -> CliResult<TimeDependentProblem<f64>> {
    let p = &cfg.params;
    let mut amp = j.initial.amplitude();
    if let Some(d) = &j.drive {
        amp = amp.max(d.alpha.0.norm());
    }
    if let Some(s) = &j.sequence {
        amp += s.displacement_budget();
    }
    let dims = cfg.hilbert.dims_for(amp)?;
    let init = j.initial.build(dims)?;
    if let Some(s) = &j.sequence {
        return Ok(compile(&s.build()?, p, dims, init, &compile_options(cfg))?);
    }
    let drive = match &j.drive {
        Some(d) => DriveSpec {
            eps_z: d.eps_z.0,
            ..DriveSpec::stabilizing(p.g2, d.alpha.0)
        },
        None => DriveSpec::none(),
    };
    let h = hamiltonian_two_photon(p, &drive, dims)?;
    // t_end is required without a sequence
    let t_end = j.t_end.unwrap_or(0.0);
    Ok(TimeDependentProblem::constant(
        h,
        collapse(cfg, dims)?,
        init,
        t_end,
    )?)
}

pub fn run(cfg: &JobConfig, j: &EvolveJob) -> CliResult<Vec<Artifact>> {
    let prob = problem(cfg, j)?;
    let times = linspace(prob.total_time, j.n_points);
    let alpha_ref = j
        .alpha_ref
        .or_else(|| j.drive.as_ref().map(|d| d.alpha))
        .map(|a| a.0);
    let ops = j
        .observables
        .iter()
        .map(|o| Ok((o.name(), observable_operator(*o, prob.dims, alpha_ref)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let named: Vec<(&str, &_)> = ops.iter().map(|(n, o)| (*n, o)).collect();
    let table = match j.method {
        Method::Master => {
            let res = evolve(&prob, &times, &named, &cfg.solver.evolve())?;
            let mut header = vec!["t"];
            header.extend(j.observables.iter().map(|o| o.name()));
            let mut t = Table::new(&header);
            let cols: Vec<_> = j
                .observables
                .iter()
                .map(|o| res.observable(o.name()).unwrap_or(&[]))
                .collect();
            for (k, tk) in res.times.iter().enumerate() {
                let mut row = vec![*tk];
                row.extend(cols.iter().map(|c| c[k].re));
                t.push_numbers(&row);
            }
            t
        }
        Method::Trajectories => {
            let opts = TrajectoryOptions {
                ode: cfg.solver.ode(),
                ..TrajectoryOptions::default()
            };
            let recs = jump_unravel(&prob, cfg.seed, j.n_traj, &times, &named, &opts)?;
            let mut header = vec!["t".to_string()];
            for o in &j.observables {
                header.push(o.name().to_string());
                header.push(format!("{}_stderr", o.name()));
            }
            let mut t = Table::new(&header);
            let series = j
                .observables
                .iter()
                .map(|o| ensemble_mean(&recs, o.name()))
                .collect::<Result<Vec<_>, _>>()?;
            for (k, tk) in times.iter().enumerate() {
                let mut row = vec![*tk];
                for s in &series {
                    row.push(s.mean[k]);
                    row.push(s.std_err[k]);
                }
                t.push_numbers(&row);
            }
            t
        }
    };
    Ok(vec![table.into_artifact("evolve.csv")])
}
