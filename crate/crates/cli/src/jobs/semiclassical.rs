use catsim_core::semiclassical::{
    buffer_pointer, critical_alpha, fixed_points, integrate_flow, kappa_conf_closed_form,
    rate_predictors, stability_at, Classification, FlowParams, RatePredictors, SemiclassicalState,
};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{JobConfig, SemiclassicalJob};
use crate::error::CliResult;
use crate::output::{json_artifact, Artifact, Table};

#[derive(Serialize)]
struct FixedPoint {
    a: [f64; 2],
    b: [f64; 2],
    classification: Classification,
    eigenvalues: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Summary {
    fixed_points: Vec<FixedPoint>,
    kappa_conf_closed_form: f64,
    critical_alpha: f64,
    buffer_pointers: Option<[[f64; 2]; 2]>,
    predictors: Option<RatePredictors<f64>>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn run(cfg: &JobConfig, j: &SemiclassicalJob) -> CliResult<Vec<Artifact>> {
    let p = &cfg.params;
    let (g2, kb, alpha, eps_z) = (p.g2, p.kappa_b, j.alpha.0, j.eps_z.0);
    let flow = FlowParams {
        g2,
        kappa_b: kb,
        alpha,
        eps_z,
    };
    let mut out = Vec::new();
    for (k, s) in j.starts.iter().enumerate() {
        let init = SemiclassicalState::new(Complex64::new(s[0], s[1]), Complex64::new(s[2], s[3]));
        let traj = integrate_flow(init, &flow, j.t_end, j.n_samples)?;
        let mut t = Table::new(&["t", "re_a", "im_a", "re_b", "im_b"]);
        for (tk, st) in traj.times.iter().zip(&traj.states) {
            t.push_numbers(&[*tk, st.a.re, st.a.im, st.b.re, st.b.im]);
        }
        out.push(t.into_artifact(&format!("semiclassical_{k:03}.csv")));
    }
    let fixed = fixed_points(g2, kb, alpha)
        .iter()
        .map(|fp| {
            let r = stability_at(fp, g2, kb, alpha)?;
            Ok(FixedPoint {
                a: pair(fp.a),
                b: pair(fp.b),
                classification: r.classification,
                eigenvalues: r.eigenvalues.iter().map(|z| pair(*z)).collect(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let driven = alpha.norm() > 0.0 && eps_z.norm() > 0.0;
    let buffer_pointers = if driven {
        let (bp, bm) = buffer_pointer(eps_z, alpha, g2)?;
        Some([pair(bp), pair(bm)])
    } else {
        None
    };
    let predictors = if driven {
        Some(rate_predictors(
            alpha.norm(),
            p.kappa_a,
            eps_z.norm(),
            g2.norm(),
            kb,
        )?)
    } else {
        None
    };
    let summary = Summary {
        fixed_points: fixed,
        kappa_conf_closed_form: kappa_conf_closed_form(g2.norm(), kb, alpha.norm()),
        critical_alpha: critical_alpha(g2.norm(), kb),
        buffer_pointers,
        predictors,
    };
    out.push(json_artifact("semiclassical.json", &summary));
    Ok(out)
}
