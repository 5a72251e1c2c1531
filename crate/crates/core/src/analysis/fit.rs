use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// One-standard-deviation uncertainties; infinite when the curvature matrix is singular.
    pub sigma: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A constrained parameter ended on its bound.
    pub at_bound: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn sigma_of(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.sigma[i])
    }

    /// Parameters are trustworthy only for a converged fit with finite uncertainties.
    pub fn reliable(&self) -> bool {
        self.converged && self.sigma.iter().all(|s| s.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub mu0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            step_tol: 1e-10,
            mu0: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn numeric_jacobian(resid: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-3);
        q[k] = p[k] + h;
        let up = resid(&q);
        q[k] = p[k] - h;
        let dn = resid(&q);
        q[k] = p[k];
        for i in 0..m {
            j[(i, k)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    j
}

/// Damped Gauss–Newton with Marquardt scaling.
///
/// Stops when the step is below `step_tol` relative to the parameters, or when no
/// damping yields a decrease (a minimum to working precision). `project` maps
/// trial points back into the feasible set.
pub fn levenberg_marquardt(
    resid: &dyn Fn(&[f64]) -> Vec<f64>,
    jac: Option<&dyn Fn(&[f64]) -> DMatrix<f64>>,
    p0: &[f64],
    project: &dyn Fn(&mut [f64]),
    opts: &LmOptions,
) -> LmOutcome {
    let np = p0.len();
    let mut p = p0.to_vec();
    project(&mut p);
    let mut r = resid(&p);
    let m = r.len();
    let cost_of = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut cost = cost_of(&r);
    let mut mu = opts.mu0;
    let mut converged = false;
    let mut iterations = 0;
    let jacobian = |p: &[f64]| match jac {
        Some(f) => f(p),
        None => numeric_jacobian(resid, p, m),
    };
    while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(&p);
        let a = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        let dmax = (0..np).fold(0.0f64, |x, k| x.max(a[(k, k)]));
        let mut improved = false;
        while mu < 1e20 {
            let mut damped = a.clone();
            for k in 0..np {
                damped[(k, k)] += mu * a[(k, k)].max(1e-12 * dmax).max(1e-300);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= 4.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            project(&mut trial);
            let rt = resid(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct <= cost {
                let dp = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                let decreased = ct < cost;
                p = trial;
                r = rt;
                cost = ct;
                mu = (mu / 3.0).max(1e-15);
                if dp <= opts.step_tol * (pn + opts.step_tol) {
                    converged = true;
                }
                improved = decreased || converged;
                break;
            }
            mu *= 4.0;
        }
        if converged {
            break;
        }
        if !improved {
            // no damping decreases the cost: stationary to working precision
            converged = true;
            break;
        }
    }
    let j = jacobian(&p);
    let a = j.transpose() * &j;
    let dof = m.saturating_sub(np).max(1) as f64;
    let s2 = cost / dof;
    let cov = match a.clone().try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => inv * s2,
        _ => DMatrix::from_element(np, np, f64::INFINITY),
    };
    LmOutcome {
        params: p,
        cov,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    }
}

fn sigma_from_transform(cov: &DMatrix<f64>, t: &DMatrix<f64>) -> Vec<f64> {
    if cov.iter().any(|x| !x.is_finite()) {
        return vec![f64::INFINITY; t.nrows()];
    }
    let c = t * cov * t.transpose();
    (0..c.nrows()).map(|k| c[(k, k)].max(0.0).sqrt()).collect()
}

fn check_series(t: &[f64], y: &[f64], min: usize) -> Result<(f64, f64)> {
    if t.len() != y.len() {
        return Err(Error::InvalidDims(
            "time and value series differ in length".into(),
        ));
    }
    if t.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} points, got {}",
            t.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("non-finite sample".into()));
    }
    let t0 = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let t1 = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(t1 > t0) {
        return Err(Error::InsufficientData(
            "time samples span zero duration".into(),
        ));
    }
    Ok((t0, t1 - t0))
}

/// Least squares for `y ≈ Σ c_k basis_k`; returns coefficients and the residual sum of squares.
fn linear_lsq(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = y.len();
    let n = columns.len();
    let a = DMatrix::from_fn(m, n, |i, k| columns[k][i]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-12).ok()?;
    let rss = (a * &c - b).norm_squared();
    Some((c.iter().cloned().collect(), rss))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

const MIN_RATE: f64 = 1e-9;

/// `y = y₀ + A e^{−t/T}`, `T > 0`.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<FitResult> {
    let (t0, span) = check_series(t, y, 8)?;
    let tau: Vec<f64> = t.iter().map(|x| (x - t0) / span).collect();
    let ones = vec![1.0; tau.len()];
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for k in log_grid(1e-3, 1e3, 241) {
        let e: Vec<f64> = tau.iter().map(|x| (-k * x).exp()).collect();
        if let Some((c, rss)) = linear_lsq(&[ones.clone(), e], y) {
            if best.as_ref().is_none_or(|b| rss < b.2) {
                best = Some((k, c, rss));
            }
        }
    }
    let (k0, c0, _) = best.ok_or_else(|| Error::Numerical("exponential scan failed".into()))?;
    let resid = |p: &[f64]| -> Vec<f64> {
        tau.iter()
            .zip(y)
            .map(|(x, v)| p[0] + p[1] * (-p[2] * x).exp() - v)
            .collect()
    };
    let jac = |p: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(tau.len(), 3, |i, k| {
            let e = (-p[2] * tau[i]).exp();
            match k {
                0 => 1.0,
                1 => e,
                _ => -p[1] * tau[i] * e,
            }
        })
    };
    let project = |p: &mut [f64]| p[2] = p[2].max(MIN_RATE);
    let out = levenberg_marquardt(
        &resid,
        Some(&jac),
        &[c0[0], c0[1], k0],
        &project,
        &LmOptions::default(),
    );
    let [y0, a1, k] = [out.params[0], out.params[1], out.params[2]];
    let big_t = span / k;
    let shift = (t0 / big_t).exp();
    let amp = a1 * shift;
    // d(y0, A, T)/d(y0, A', k')
    let tr = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0,
            0.0,
            0.0,
            0.0,
            shift,
            amp * t0 / span,
            0.0,
            0.0,
            -span / (k * k),
        ],
    );
    let scale = y
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let identifiable = a1.abs() > 1e-9 * scale && k > MIN_RATE * 10.0;
    Ok(FitResult {
        model: "exponential".into(),
        names: vec!["y0".into(), "A".into(), "T".into()],
        values: vec![y0, amp, big_t],
        sigma: sigma_from_transform(&out.cov, &tr),
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged && identifiable,
        at_bound: k <= MIN_RATE,
    })
}

/// `y = y₀ + A e^{−t/T} cos(Ωt + φ)`, `T, Ω > 0`.
pub fn fit_damped_cosine(t: &[f64], y: &[f64]) -> Result<FitResult> {
    let (t0, span) = check_series(t, y, 8)?;
    let tau: Vec<f64> = t.iter().map(|x| (x - t0) / span).collect();
    let n = tau.len();
    let ones = vec![1.0; n];
    let w_max = std::f64::consts::PI * (n - 1) as f64;
    let n_w = (4 * n).clamp(200, 2000);
    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None;
    for iw in 0..n_w {
        let w = 0.5 * std::f64::consts::PI
            + (w_max - 0.5 * std::f64::consts::PI) * iw as f64 / (n_w - 1) as f64;
        for k in log_grid(1e-2, 30.0, 25) {
            let ec: Vec<f64> = tau.iter().map(|x| (-k * x).exp() * (w * x).cos()).collect();
            let es: Vec<f64> = tau.iter().map(|x| (-k * x).exp() * (w * x).sin()).collect();
            if let Some((c, rss)) = linear_lsq(&[ones.clone(), ec, es], y) {
                if best.as_ref().is_none_or(|b| rss < b.3) {
                    best = Some((w, k, c, rss));
                }
            }
        }
    }
    let (w0, k0, c0, _) = best.ok_or_else(|| Error::Numerical("oscillation scan failed".into()))?;
    // p = [y0, c, s, k, w]
    let resid = |p: &[f64]| -> Vec<f64> {
        tau.iter()
            .zip(y)
            .map(|(x, v)| {
                p[0] + (-p[3] * x).exp() * (p[1] * (p[4] * x).cos() + p[2] * (p[4] * x).sin()) - v
            })
            .collect()
    };
    let jac = |p: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(n, 5, |i, k| {
            let x = tau[i];
            let e = (-p[3] * x).exp();
            let (cw, sw) = ((p[4] * x).cos(), (p[4] * x).sin());
            match k {
                0 => 1.0,
                1 => e * cw,
                2 => e * sw,
                3 => -x * e * (p[1] * cw + p[2] * sw),
                _ => x * e * (-p[1] * sw + p[2] * cw),
            }
        })
    };
    let project = |p: &mut [f64]| {
        p[3] = p[3].max(MIN_RATE);
        p[4] = p[4].abs();
    };
    let out = levenberg_marquardt(
        &resid,
        Some(&jac),
        &[c0[0], c0[1], c0[2], k0, w0],
        &project,
        &LmOptions::default(),
    );
    let p = &out.params;
    let (y0, c, s, k, w) = (p[0], p[1], p[2], p[3], p[4]);
    let a1 = (c * c + s * s).sqrt();
    let big_t = span / k;
    let omega = w / span;
    let shift = (t0 / big_t).exp();
    let amp = a1 * shift;
    let phi_local = (-s).atan2(c);
    let phi = phi_local - omega * t0;
    let phi = phi
        - 2.0
            * std::f64::consts::PI
            * ((phi + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)).floor();
    let a1s = a1.max(f64::MIN_POSITIVE);
    // rows: y0, A, T, Ω, φ ; columns: y0, c, s, k, w
    let tr = DMatrix::from_row_slice(
        5,
        5,
        &[
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            shift * c / a1s,
            shift * s / a1s,
            amp * t0 / span,
            0.0,
            0.0,
            0.0,
            0.0,
            -span / (k * k),
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0 / span,
            0.0,
            s / (a1s * a1s),
            -c / (a1s * a1s),
            0.0,
            -t0 / span,
        ],
    );
    let scale = y
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let identifiable = a1 > 1e-9 * scale && w > 0.0;
    Ok(FitResult {
        model: "damped_cosine".into(),
        names: ["y0", "A", "T", "Omega", "phi"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        values: vec![y0, amp, big_t, omega, phi],
        sigma: sigma_from_transform(&out.cov, &tr),
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged && identifiable,
        at_bound: k <= MIN_RATE,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    /// Equal mixture of `|±α⟩`, cut along the real axis.
    Mixture,
    /// Even cat, cut along the imaginary axis.
    Cat,
    /// Thermal state, cut along the real axis.
    Thermal,
}

/// Contrasts `A, C, D`, axis scale `B`, cat size, memory thermal occupation and one offset per cut.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerCutParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub n_th: f64,
    pub offsets: [f64; 3],
}

impl WignerCutParams {
    /// Values for ideal states: unit scale, no offsets.
    pub fn theoretical(alpha: f64, n_th: f64) -> Self {
        let pi = std::f64::consts::PI;
        WignerCutParams {
            a: 1.0 / pi,
            b: 1.0,
            c: 2.0 / (pi * (1.0 + (-2.0 * alpha * alpha).exp())),
            d: 2.0 / (pi * (2.0 * n_th + 1.0)),
            alpha,
            n_th,
            offsets: [0.0; 3],
        }
    }

    fn to_vec(self) -> Vec<f64> {
        vec![
            self.a,
            self.b,
            self.c,
            self.d,
            self.alpha,
            self.n_th,
            self.offsets[0],
            self.offsets[1],
            self.offsets[2],
        ]
    }

    fn from_slice(p: &[f64]) -> Self {
        WignerCutParams {
            a: p[0],
            b: p[1],
            c: p[2],
            d: p[3],
            alpha: p[4],
            n_th: p[5],
            offsets: [p[6], p[7], p[8]],
        }
    }
}

pub const CUT_PARAM_NAMES: [&str; 9] = [
    "A",
    "B",
    "C",
    "D",
    "alpha",
    "n_th",
    "offset_mixture",
    "offset_cat",
    "offset_thermal",
];

fn cut_value_and_grad(kind: CutKind, p: &WignerCutParams, x: f64) -> (f64, [f64; 9]) {
    let mut g = [0.0; 9];
    match kind {
        CutKind::Mixture => {
            let (um, up) = (p.b * x - p.alpha, p.b * x + p.alpha);
            let (gm, gp) = ((-2.0 * um * um).exp(), (-2.0 * up * up).exp());
            g[0] = gm + gp;
            g[1] = p.a * (-4.0 * x) * (um * gm + up * gp);
            g[4] = p.a * 4.0 * (um * gm - up * gp);
            g[6] = 1.0;
            (p.a * (gm + gp) + p.offsets[0], g)
        }
        CutKind::Cat => {
            let gauss = (-2.0 * p.b * p.b * x * x).exp();
            let e2 = (-2.0 * p.alpha * p.alpha).exp();
            let arg = 4.0 * p.alpha * p.b * x;
            let h = e2 + arg.cos();
            g[2] = gauss * h;
            g[1] = p.c * gauss * (-4.0 * p.b * x * x * h - arg.sin() * 4.0 * p.alpha * x);
            g[4] = p.c * gauss * (-4.0 * p.alpha * e2 - arg.sin() * 4.0 * p.b * x);
            g[7] = 1.0;
            (p.c * gauss * h + p.offsets[1], g)
        }
        CutKind::Thermal => {
            let w = 2.0 * p.n_th + 1.0;
            let e = (-2.0 * p.b * p.b * x * x / w).exp();
            g[3] = e;
            g[1] = p.d * e * (-4.0 * p.b * x * x / w);
            g[5] = p.d * e * 4.0 * p.b * p.b * x * x / (w * w);
            g[8] = 1.0;
            (p.d * e + p.offsets[2], g)
        }
    }
}

/// Closed-form Wigner cut for the chosen state family, offset included.
pub fn wigner_cut_models(kind: CutKind, params: &WignerCutParams) -> impl Fn(f64) -> f64 {
    let p = *params;
    move |x| cut_value_and_grad(kind, &p, x).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerCutData {
    pub mixture: (Vec<f64>, Vec<f64>),
    pub cat: (Vec<f64>, Vec<f64>),
    pub thermal: (Vec<f64>, Vec<f64>),
}

/// Joint least squares over the three cuts with a shared axis scale and cat size; `n_th ≥ 0`.
pub fn fit_wigner_cuts(data: &WignerCutData, initial: &WignerCutParams) -> Result<FitResult> {
    let series = [
        (CutKind::Mixture, &data.mixture),
        (CutKind::Cat, &data.cat),
        (CutKind::Thermal, &data.thermal),
    ];
    for (kind, (x, y)) in &series {
        if x.len() != y.len() {
            return Err(Error::InvalidDims(format!(
                "{kind:?} cut coordinates and values differ in length"
            )));
        }
        if x.len() < 20 {
            return Err(Error::InsufficientData(format!(
                "{kind:?} cut needs at least 20 points"
            )));
        }
    }
    let pts: Vec<(CutKind, f64, f64)> = series
        .iter()
        .flat_map(|(k, (x, y))| x.iter().zip(y.iter()).map(move |(a, b)| (*k, *a, *b)))
        .collect();
    let resid = |p: &[f64]| -> Vec<f64> {
        let q = WignerCutParams::from_slice(p);
        pts.iter()
            .map(|(k, x, y)| cut_value_and_grad(*k, &q, *x).0 - y)
            .collect()
    };
    let jac = |p: &[f64]| -> DMatrix<f64> {
        let q = WignerCutParams::from_slice(p);
        let mut j = DMatrix::zeros(pts.len(), 9);
        for (i, (k, x, _)) in pts.iter().enumerate() {
            let (_, g) = cut_value_and_grad(*k, &q, *x);
            for (c, v) in g.iter().enumerate() {
                j[(i, c)] = *v;
            }
        }
        j
    };
    let project = |p: &mut [f64]| p[5] = p[5].max(0.0);
    let out = levenberg_marquardt(
        &resid,
        Some(&jac),
        &initial.to_vec(),
        &project,
        &LmOptions::default(),
    );
    let at_bound = out.params[5] == 0.0;
    let sigma = (0..9).map(|k| out.cov[(k, k)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        model: "wigner_cuts".into(),
        names: CUT_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        values: out.params,
        sigma,
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged,
        at_bound,
    })
}
