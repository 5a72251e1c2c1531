use catsim_core::analysis::wigner;
use catsim_core::lindblad::evolve;
use catsim_core::pulse::{build_cat_prep, compile};
use log::warn;

use super::compile_options;
use crate::config::{JobConfig, WignerJob};
use crate::error::CliResult;
use crate::output::{Artifact, Table};

pub fn run(cfg: &JobConfig, j: &WignerJob) -> CliResult<Vec<Artifact>> {
    let amp = j
        .state
        .amplitude()
        .max(j.prepare.as_ref().map_or(0.0, |p| p.alpha.0.norm()));
    let dims = cfg.hilbert.dims_for(amp)?;
    let mut state = j.state.build(dims)?;
    if let Some(p) = &j.prepare {
        let seq = build_cat_prep(&cfg.params, p.alpha.0, p.time)?;
        let prob = compile(&seq, &cfg.params, dims, state, &compile_options(cfg))?;
        state = evolve(&prob, &[p.time], &[], &cfg.solver.evolve())?.final_state;
    }
    let rho = state.memory_reduced();
    let grid = wigner(&rho, &j.grid.spec())?;
    let integral = grid.integral();
    if (integral - rho.trace().re).abs() > 0.02 {
        warn!("Wigner grid integrates to {integral:.4}; the grid may not cover the state");
    }
    let mut t = Table::new(&["re", "im", "value"]);
    for (x, y, w) in grid.rows() {
        t.push_numbers(&[x, y, w]);
    }
    Ok(vec![t.into_artifact("wigner.csv")])
}
