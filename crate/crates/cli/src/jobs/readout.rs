use catsim_core::analysis::readout_fidelity;
use catsim_core::trajectories::longitudinal_readout_shots;
use serde::Serialize;

use crate::config::{JobConfig, ReadoutJob};
use crate::error::CliResult;
use crate::output::{json_artifact, num, Artifact, Table};

#[derive(Serialize)]
struct Summary {
    mean_photons: [f64; 2],
    t_int: f64,
    n_shots: usize,
    fidelity: f64,
}

pub fn run(cfg: &JobConfig, j: &ReadoutJob) -> CliResult<Vec<Artifact>> {
    let p = &cfg.params;
    let shots = |branch: usize| {
        longitudinal_readout_shots(
            j.mean_photons[branch],
            p.g_l,
            p.g_sp,
            p.kappa_b,
            j.t_int,
            p.eta_het,
            cfg.seed.wrapping_add(branch as u64),
            j.n_shots,
        )
    };
    let (a, b) = (shots(0)?, shots(1)?);
    let fidelity = readout_fidelity(&a, &b)?;
    let mut t = Table::new(&["branch", "mean_photons", "re", "im"]);
    for (k, s) in [&a, &b].iter().enumerate() {
        for z in s.iter() {
            t.push(vec![
                k.to_string(),
                num(j.mean_photons[k]),
                num(z.re),
                num(z.im),
            ]);
        }
    }
    let summary = Summary {
        mean_photons: j.mean_photons,
        t_int: j.t_int,
        n_shots: j.n_shots,
        fidelity,
    };
    Ok(vec![
        t.into_artifact("readout_shots.csv"),
        json_artifact("readout.json", &summary),
    ])
}
