use catsim_core::lindblad::{
    alpha0_confinement_closed_form, build_liouvillian, spectral_gap_capped,
};
use catsim_core::model::{hamiltonian_two_photon, DriveSpec};
use rayon::prelude::*;

use super::collapse;
use crate::config::{GapJob, JobConfig};
use crate::error::CliResult;
use crate::output::{num, Artifact, Table};

/// Slowest Liouvillian rate per target amplitude. At α = 0 the confinement rate
/// `−2 Re λ_min` is compared with its closed form; elsewhere that column is NaN.
pub fn run(cfg: &JobConfig, j: &GapJob) -> CliResult<Vec<Artifact>> {
    let p = &cfg.params;
    let rows = j
        .alphas
        .par_iter()
        .map(|alpha| {
            let alpha = alpha.0;
            let dims = cfg.hilbert.dims_for(alpha.norm())?;
            let drive = if alpha.norm() == 0.0 {
                DriveSpec::none()
            } else {
                DriveSpec::stabilizing(p.g2, alpha)
            };
            let h = hamiltonian_two_photon(p, &drive, dims)?;
            let l = build_liouvillian(&h, &collapse(cfg, dims)?)?;
            let gap = spectral_gap_capped(&l, j.block_cap)?;
            let numeric = -2.0 * gap.lambda_min.re;
            let closed = if alpha.norm() == 0.0 {
                alpha0_confinement_closed_form(p.g2.norm(), p.kappa_b)
            } else {
                f64::NAN
            };
            Ok(vec![
                num(alpha.re),
                num(alpha.im),
                num(gap.lambda_min.re),
                num(gap.lambda_min.im),
                gap.steady_dim.to_string(),
                gap.n_eigenvalues.to_string(),
                num(numeric),
                num(closed),
                num(numeric / closed - 1.0),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(&[
        "alpha_re",
        "alpha_im",
        "lambda_min_re",
        "lambda_min_im",
        "steady_dim",
        "n_eigenvalues",
        "confinement_numeric",
        "confinement_closed_form",
        "relative_difference",
    ]);
    for r in rows {
        t.push(r);
    }
    Ok(vec![t.into_artifact("gap.csv")])
}
