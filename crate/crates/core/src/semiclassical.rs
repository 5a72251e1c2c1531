//! Mean-field dynamics of the two-photon exchange: `a = ⟨a⟩`, `b = ⟨b⟩`.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lindblad::alpha0_confinement_closed_form;
use crate::ode::{Dopri, OdeOptions};
use crate::scalar::{abs2, cplx, cr, i_unit, modulus, real, to_f64, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalState<T: Real> {
    pub a: C<T>,
    pub b: C<T>,
}

impl<T: Real> SemiclassicalState<T> {
    pub fn new(a: C<T>, b: C<T>) -> Self {
        SemiclassicalState { a, b }
    }

    pub fn norm(&self) -> T {
        (abs2(self.a) + abs2(self.b)).sqrt()
    }

    fn dist(&self, o: &Self) -> T {
        SemiclassicalState::new(self.a - o.a, self.b - o.b).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Critical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport<T: Real> {
    pub point: SemiclassicalState<T>,
    pub eigenvalues: Vec<C<T>>,
    pub classification: Classification,
    /// `−2 max Re λ` over the spectrum at `(α, 0)`.
    pub kappa_conf: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams<T: Real> {
    pub g2: C<T>,
    pub kappa_b: T,
    pub alpha: C<T>,
    pub eps_z: C<T>,
}

/// `ȧ = −2i g₂ a* b − i ε_Z`, `ḃ = −i g₂* (a² − α²) − (κ_b/2) b`.
pub fn flow_rhs<T: Real>(
    s: &SemiclassicalState<T>,
    g2: C<T>,
    kappa_b: T,
    alpha: C<T>,
    eps_z: C<T>,
) -> SemiclassicalState<T> {
    let i = i_unit::<T>();
    let two = cr(real::<T>(2.0));
    let da = -two * i * g2 * s.a.conj() * s.b - i * eps_z;
    let db = -i * g2.conj() * (s.a * s.a - alpha * alpha) - cr(kappa_b / real(2.0)) * s.b;
    SemiclassicalState::new(da, db)
}

/// Real Jacobian of [`flow_rhs`] in the coordinates `(Re a, Im a, Re b, Im b)`.
pub fn flow_jacobian<T: Real>(s: &SemiclassicalState<T>, g2: C<T>, kappa_b: T) -> Matrix4<T> {
    let i = i_unit::<T>();
    let two = cr(real::<T>(2.0));
    // (∂/∂z, ∂/∂z*) of each component
    let a_da = (cr(T::zero()), -two * i * g2 * s.b);
    let a_db = (-two * i * g2 * s.a.conj(), cr(T::zero()));
    let b_da = (-two * i * g2.conj() * s.a, cr(T::zero()));
    let b_db = (cr(-kappa_b / real(2.0)), cr(T::zero()));
    let mut j = Matrix4::zeros();
    let mut put = |r: usize, c: usize, (p, q): (C<T>, C<T>)| {
        j[(r, c)] = (p + q).re;
        j[(r, c + 1)] = -(p - q).im;
        j[(r + 1, c)] = (p + q).im;
        j[(r + 1, c + 1)] = (p - q).re;
    };
    put(0, 0, a_da);
    put(0, 2, a_db);
    put(2, 0, b_da);
    put(2, 2, b_db);
    j
}

/// `(0, 2i g₂* α²/κ_b)`, `(α, 0)`, `(−α, 0)`.
pub fn fixed_points<T: Real>(g2: C<T>, kappa_b: T, alpha: C<T>) -> [SemiclassicalState<T>; 3] {
    let zero = cr(T::zero());
    let b0 = cr(real::<T>(2.0)) * i_unit::<T>() * g2.conj() * alpha * alpha / cr(kappa_b);
    [
        SemiclassicalState::new(zero, b0),
        SemiclassicalState::new(alpha, zero),
        SemiclassicalState::new(-alpha, zero),
    ]
}

fn spectrum4<T: Real>(j: Matrix4<T>) -> Vec<C<T>> {
    j.complex_eigenvalues().iter().copied().collect()
}

pub fn stability_at<T: Real>(
    point: &SemiclassicalState<T>,
    g2: C<T>,
    kappa_b: T,
    alpha: C<T>,
) -> Result<StabilityReport<T>> {
    if !(kappa_b > T::zero()) {
        return Err(invalid("kappa_b", "must be positive"));
    }
    let fps = fixed_points(g2, kappa_b, alpha);
    let scale = T::one() + modulus(alpha) + modulus(fps[0].b);
    if !fps.iter().any(|p| p.dist(point) <= real::<T>(1e-9) * scale) {
        return Err(Error::DegenerateInput(format!(
            "({:.6e}{:+.6e}i, {:.6e}{:+.6e}i) is not a fixed point",
            to_f64(point.a.re),
            to_f64(point.a.im),
            to_f64(point.b.re),
            to_f64(point.b.im)
        )));
    }
    let eigenvalues = spectrum4(flow_jacobian(point, g2, kappa_b));
    let max_re = eigenvalues
        .iter()
        .fold(T::min_value().unwrap(), |m, z| m.max(z.re));
    let tol = real::<T>(1e-12) * kappa_b;
    let classification = if max_re < -tol {
        Classification::Stable
    } else if max_re > tol {
        Classification::Unstable
    } else {
        Classification::Critical
    };
    let stable = spectrum4(flow_jacobian(&fps[1], g2, kappa_b));
    let kappa_conf = -real::<T>(2.0)
        * stable
            .iter()
            .fold(T::min_value().unwrap(), |m, z| m.max(z.re));
    Ok(StabilityReport {
        point: *point,
        eigenvalues,
        classification,
        kappa_conf,
    })
}

/// Confinement rate `−2 max Re λ` at the stable points; quantum gap formula at `α = 0`.
pub fn kappa_conf_closed_form<T: Real>(g2: T, kappa_b: T, alpha: T) -> T {
    let g = g2.abs();
    let a = alpha.abs();
    if a == T::zero() {
        return alpha0_confinement_closed_form(g, kappa_b);
    }
    let x = real::<T>(8.0) * g * a / kappa_b;
    let half = kappa_b / real(2.0);
    if x < T::one() {
        half * (T::one() - (T::one() - x * x).sqrt())
    } else {
        half
    }
}

/// Amplitude of the stable point where the linearization becomes critically damped, `κ_b/(8|g₂|)`.
pub fn critical_alpha<T: Real>(g2: T, kappa_b: T) -> T {
    kappa_b / (real::<T>(8.0) * g2.abs())
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<SemiclassicalState<T>>,
}

impl<T: Real> FlowTrajectory<T> {
    pub fn last(&self) -> &SemiclassicalState<T> {
        self.states
            .last()
            .expect("trajectory has at least the initial point")
    }
}

pub const BLOWUP_AMPLITUDE: f64 = 1e3;

/// Integrates the flow on `[0, t_end]` and samples it at `n_samples + 1` evenly spaced times.
pub fn integrate_flow<T: Real>(
    initial: SemiclassicalState<T>,
    p: &FlowParams<T>,
    t_end: T,
    n_samples: usize,
) -> Result<FlowTrajectory<T>> {
    if !(initial.norm() < T::max_value().unwrap()) {
        return Err(invalid("initial", "must be finite"));
    }
    if !(t_end > T::zero()) || n_samples == 0 {
        return Err(invalid("t_span", "needs t_end > 0 and at least one sample"));
    }
    let mut sys = |_t: T, y: &[C<T>], dy: &mut [C<T>]| {
        let d = flow_rhs(
            &SemiclassicalState::new(y[0], y[1]),
            p.g2,
            p.kappa_b,
            p.alpha,
            p.eps_z,
        );
        dy[0] = d.a;
        dy[1] = d.b;
    };
    let opts = OdeOptions {
        rtol: real(1e-10),
        atol: real(1e-12),
        ..Default::default()
    };
    let mut ode = Dopri::new(&mut sys, T::zero(), &[initial.a, initial.b], opts);
    let mut times = vec![T::zero()];
    let mut states = vec![initial];
    let lim = real::<T>(BLOWUP_AMPLITUDE);
    let mut buf = [cr(T::zero()); 2];
    for k in 1..=n_samples {
        let tk = t_end * real::<T>(k as f64 / n_samples as f64);
        while ode.t() < tk {
            ode.step(&mut sys, tk)?;
            let y = ode.y();
            if !(modulus(y[0]) <= lim && modulus(y[1]) <= lim) {
                return Err(Error::BlowUp {
                    t: to_f64(ode.t()),
                    a: to_f64(modulus(y[0])),
                    b: to_f64(modulus(y[1])),
                });
            }
        }
        buf.copy_from_slice(ode.y());
        times.push(tk);
        states.push(SemiclassicalState::new(buf[0], buf[1]));
    }
    Ok(FlowTrajectory { times, states })
}

/// Buffer amplitudes on the `±α` branches under a weak Zeno drive, `∓ε_Z/(2α* g₂)`.
pub fn buffer_pointer<T: Real>(eps_z: C<T>, alpha: C<T>, g2: C<T>) -> Result<(C<T>, C<T>)> {
    if modulus(alpha) == T::zero() {
        return Err(invalid("alpha", "pointer states need α ≠ 0"));
    }
    if modulus(g2) == T::zero() {
        return Err(invalid("g2", "must be nonzero"));
    }
    let bp = -eps_z / (cr(real::<T>(2.0)) * alpha.conj() * g2);
    Ok((bp, -bp))
}

/// `(κ_b/2)|b₊ − b₋|² = (κ_b/2)|ε_Z/(α g₂)|²`.
pub fn drive_dephasing_rate<T: Real>(eps_z: C<T>, alpha: C<T>, g2: C<T>, kappa_b: T) -> Result<T> {
    let (bp, bm) = buffer_pointer(eps_z, alpha, g2)?;
    Ok(kappa_b / real(2.0) * abs2(bp - bm))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePredictors<T: Real> {
    pub gamma_z_kappa_a: T,
    pub gamma_z_drive: T,
    pub omega_z: T,
    pub oscillation_quality: T,
    /// Drive amplitude maximizing the quality factor.
    pub optimal_eps_z: T,
    pub optimal_quality: T,
}

pub fn rate_predictors<T: Real>(
    alpha: T,
    kappa_a: T,
    eps_z: T,
    g2: T,
    kappa_b: T,
) -> Result<RatePredictors<T>> {
    for (name, v) in [
        ("alpha", alpha),
        ("kappa_a", kappa_a),
        ("eps_z", eps_z),
        ("g2", g2),
        ("kappa_b", kappa_b),
    ] {
        if !(v >= T::zero()) {
            return Err(invalid(name, "must be non-negative"));
        }
    }
    let two = real::<T>(2.0);
    let four = real::<T>(4.0);
    let gamma_a = two * kappa_a * alpha * alpha;
    let omega_z = four * alpha * eps_z;
    // Γ_drive = c ε²
    let c = if alpha > T::zero() && g2 > T::zero() {
        kappa_b / (two * alpha * alpha * g2 * g2)
    } else {
        T::max_value().unwrap()
    };
    let gamma_drive = if eps_z == T::zero() {
        T::zero()
    } else {
        c * eps_z * eps_z
    };
    let quality = |e: T, gd: T| {
        let den = gamma_a + gd;
        if den > T::zero() {
            four * alpha * e / den
        } else if e > T::zero() {
            T::max_value().unwrap()
        } else {
            T::zero()
        }
    };
    let optimal_eps_z = (gamma_a / c).sqrt();
    let optimal_quality = if gamma_a > T::zero() {
        alpha / (gamma_a * c).sqrt() * two
    } else {
        T::max_value().unwrap()
    };
    Ok(RatePredictors {
        gamma_z_kappa_a: gamma_a,
        gamma_z_drive: gamma_drive,
        omega_z,
        oscillation_quality: quality(eps_z, gamma_drive),
        optimal_eps_z,
        optimal_quality,
    })
}

/// Steady buffer amplitude for `n_a` memory photons under the longitudinal coupling.
///
/// Solves `0 = −i g_l n − i g_sp (2|b|² + b²) − (κ_b/2) b` by damped Newton iteration
/// from the linear response `−2i g_l n/κ_b`.
pub fn longitudinal_response<T: Real>(n_a: u32, g_l: T, g_sp: T, kappa_b: T) -> Result<C<T>> {
    if !(kappa_b > T::zero()) {
        return Err(invalid("kappa_b", "must be positive"));
    }
    let n = real::<T>(n_a as f64);
    let i = i_unit::<T>();
    let two = real::<T>(2.0);
    let half_k = kappa_b / two;
    let f =
        |b: C<T>| -i * cr(g_l * n) - i * cr(g_sp) * (cr(two * abs2(b)) + b * b) - cr(half_k) * b;
    let mut b = -i * cr(two * g_l * n / kappa_b);
    if g_sp == T::zero() || n_a == 0 {
        return Ok(b);
    }
    let scale = modulus(b).max(T::one());
    let tol = real::<T>(1e-14) * (g_l.abs() * n + half_k * scale);
    let mut r = f(b);
    for _ in 0..100 {
        if modulus(r) <= tol {
            return Ok(b);
        }
        // ∂f/∂b and ∂f/∂b* as Wirtinger derivatives, then a real 2×2 solve
        let p = -i * cr(g_sp) * (cr(two) * b.conj() + cr(two) * b) - cr(half_k);
        let q = -i * cr(g_sp) * cr(two) * b;
        let j11 = (p + q).re;
        let j12 = -(p - q).im;
        let j21 = (p + q).im;
        let j22 = (p - q).re;
        let det = j11 * j22 - j12 * j21;
        if det == T::zero() {
            break;
        }
        let dx = (j22 * r.re - j12 * r.im) / det;
        let dy = (-j21 * r.re + j11 * r.im) / det;
        let step = cplx(-dx, -dy);
        let mut s = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand = b + step * cr(s);
            let rc = f(cand);
            if modulus(rc) < modulus(r) {
                b = cand;
                r = rc;
                accepted = true;
                break;
            }
            s /= two;
        }
        if !accepted {
            break;
        }
    }
    if modulus(r) <= tol * real(1e3) {
        return Ok(b);
    }
    Err(Error::NoConvergence(format!(
        "longitudinal response for n_a = {n_a}: residual {:e}",
        to_f64(modulus(r))
    )))
}
