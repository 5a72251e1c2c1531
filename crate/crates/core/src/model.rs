//! Device parameters, pump-to-coupling formulas and the rotating-frame operators.
//!
//! Rates inside this crate are angular (rad/s). Circuit energies are ordinary
//! frequencies (Hz), as are the outputs of [`saddle_frequencies`] and [`flux_shift`].

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{mode_operators, required_levels, QOperator, SpaceDims};
use crate::scalar::{cr, modulus, real, to_f64, Real, C};

pub const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams<T: Real> {
    pub g2: C<T>,
    pub kappa_b: T,
    pub kappa_a: T,
    pub n_th_mem: T,
    pub n_th_buf: T,
    pub delta_mem: T,
    pub delta_buf: T,
    pub g_l: T,
    pub g_sp: T,
    pub eta_het: T,
    /// Beam-splitter rate of the reset process at unit reset-pump scale.
    pub g_reset: T,
    /// Buffer self-Kerr, `-(K/2) b†²b²`.
    pub kerr_buf: T,
}

impl<T: Real> PhysicalParams<T> {
    /// Measured device values of the reference experiment.
    pub fn device() -> Self {
        let w = |hz: f64| real::<T>(TWO_PI * hz);
        PhysicalParams {
            g2: cr(w(0.763e6)),
            kappa_b: w(2.6e6),
            kappa_a: w(9.3e3),
            n_th_mem: real(0.10),
            n_th_buf: real(0.011),
            delta_mem: T::zero(),
            delta_buf: T::zero(),
            g_l: w(100e3),
            g_sp: T::zero(),
            eta_het: T::one(),
            g_reset: T::zero(),
            kerr_buf: T::zero(),
        }
    }

    /// Pure two-photon model: only `g2` and buffer loss.
    pub fn two_photon(g2: T, kappa_b: T) -> Self {
        PhysicalParams {
            g2: cr(g2),
            kappa_b,
            kappa_a: T::zero(),
            n_th_mem: T::zero(),
            n_th_buf: T::zero(),
            delta_mem: T::zero(),
            delta_buf: T::zero(),
            g_l: T::zero(),
            g_sp: T::zero(),
            eta_het: T::one(),
            g_reset: T::zero(),
            kerr_buf: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: T| to_f64(x).is_finite();
        if !(self.kappa_b > T::zero()) || !finite(self.kappa_b) {
            return Err(invalid("kappa_b", "must be positive"));
        }
        if !(self.kappa_a >= T::zero()) || !finite(self.kappa_a) {
            return Err(invalid("kappa_a", "must be non-negative"));
        }
        for (name, n) in [("n_th_mem", self.n_th_mem), ("n_th_buf", self.n_th_buf)] {
            if !(n >= T::zero() && n < T::one()) {
                return Err(invalid(name, "thermal occupation must lie in [0, 1)"));
            }
        }
        if !(self.eta_het > T::zero() && self.eta_het <= T::one()) {
            return Err(invalid("eta_het", "efficiency must lie in (0, 1]"));
        }
        for (name, x) in [
            ("g2", self.g2.re),
            ("g2", self.g2.im),
            ("delta_mem", self.delta_mem),
            ("delta_buf", self.delta_buf),
            ("g_l", self.g_l),
            ("g_sp", self.g_sp),
            ("g_reset", self.g_reset),
            ("kerr_buf", self.kerr_buf),
        ] {
            if !finite(x) {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Largest collapse rate, used as the scale of spectral thresholds.
    pub fn rate_scale(&self) -> T {
        self.kappa_b.max(self.kappa_a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams<T: Real> {
    pub e_j: T,
    pub de_j: T,
    pub phi_a: T,
    pub phi_b: T,
    pub omega_a0: T,
    pub omega_b0: T,
    /// Stored for completeness; none of the formulas here use it.
    pub e_l: T,
}

impl<T: Real> CircuitParams<T> {
    pub fn device() -> Self {
        CircuitParams {
            e_j: real(12.03e9),
            de_j: real(0.47e9),
            phi_a: real(0.06),
            phi_b: real(0.29),
            omega_a0: real(5.26e9),
            omega_b0: real(7.70e9),
            e_l: real(42.76e9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("phi_a", self.phi_a), ("phi_b", self.phi_b)] {
            if !(p > T::zero() && p < T::one()) {
                return Err(invalid(name, "zero-point phase must lie in (0, 1)"));
            }
        }
        for (name, e) in [
            ("e_j", self.e_j),
            ("de_j", self.de_j),
            ("omega_a0", self.omega_a0),
            ("omega_b0", self.omega_b0),
            ("e_l", self.e_l),
        ] {
            if !(e > T::zero()) || !to_f64(e).is_finite() {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec<T: Real> {
    pub eps_d: C<T>,
    pub eps_z: C<T>,
}

impl<T: Real> DriveSpec<T> {
    pub fn none() -> Self {
        DriveSpec {
            eps_d: cr(T::zero()),
            eps_z: cr(T::zero()),
        }
    }

    /// Buffer drive `ε_d = g₂* α²` stabilizing `|±α⟩`.
    pub fn stabilizing(g2: C<T>, alpha: C<T>) -> Self {
        DriveSpec {
            eps_d: g2.conj() * alpha * alpha,
            eps_z: cr(T::zero()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpKind {
    TwoPhoton,
    Longitudinal,
    Reset,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RateSet<T: Real> {
    TwoPhoton { g2: T },
    Longitudinal { g_lin: T, g_l: T, g_sp: T },
    Reset { g_reset: T, kappa_a_reset: T },
}

/// Couplings (rad/s) generated by a pump of dimensionless amplitude `eps_p`.
///
/// `kappa_b` (rad/s) is only used by the reset pump.
pub fn coupling_rates<T: Real>(
    circuit: &CircuitParams<T>,
    kind: PumpKind,
    eps_p: T,
    kappa_b: T,
) -> Result<RateSet<T>> {
    circuit.validate()?;
    if !(eps_p >= T::zero() && eps_p <= real(0.5)) {
        return Err(invalid("eps_p", "pump amplitude must lie in [0, 0.5]"));
    }
    if eps_p > real(0.3) {
        warn!(
            "pump amplitude {:.3} is beyond the small-amplitude expansion comfort (0.3)",
            to_f64(eps_p)
        );
    }
    let w = real::<T>(TWO_PI);
    let (pa, pb) = (circuit.phi_a, circuit.phi_b);
    Ok(match kind {
        PumpKind::TwoPhoton => RateSet::TwoPhoton {
            g2: w * real(0.5) * circuit.e_j * eps_p * pa * pa * pb,
        },
        PumpKind::Longitudinal => {
            let g_l = w * circuit.e_j * eps_p * pa * pa * pb;
            RateSet::Longitudinal {
                g_lin: -w * circuit.e_j * eps_p * pb,
                g_l,
                g_sp: real::<T>(0.5) * (pb * pb) / (pa * pa) * g_l,
            }
        }
        PumpKind::Reset => {
            if !(kappa_b > T::zero()) {
                return Err(invalid(
                    "kappa_b",
                    "reset rate needs a positive buffer loss",
                ));
            }
            let g_reset = w * circuit.de_j * eps_p * eps_p * pa * pb / real(8.0);
            RateSet::Reset {
                g_reset,
                kappa_a_reset: real::<T>(4.0) * g_reset * g_reset / kappa_b,
            }
        }
    })
}

/// `κ_a^reset = 4 g_reset² / κ_b`
pub fn reset_memory_rate<T: Real>(g_reset: T, kappa_b: T) -> T {
    real::<T>(4.0) * g_reset * g_reset / kappa_b
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleFrequencies<T: Real> {
    pub omega_a_plus: T,
    pub omega_a_minus: T,
    pub omega_b_plus: T,
    pub omega_b_minus: T,
}

/// `ω_± = ω₀ ∓ 2ΔE_J φ²` for both modes (Hz).
pub fn saddle_frequencies<T: Real>(circuit: &CircuitParams<T>) -> SaddleFrequencies<T> {
    let two = real::<T>(2.0);
    let sa = two * circuit.de_j * circuit.phi_a * circuit.phi_a;
    let sb = two * circuit.de_j * circuit.phi_b * circuit.phi_b;
    SaddleFrequencies {
        omega_a_plus: circuit.omega_a0 - sa,
        omega_a_minus: circuit.omega_a0 + sa,
        omega_b_plus: circuit.omega_b0 - sb,
        omega_b_minus: circuit.omega_b0 + sb,
    }
}

/// Second-order buffer frequency shift (Hz) at flux bias `(φ_Σ, φ_Δ)`.
pub fn flux_shift<T: Real>(circuit: &CircuitParams<T>, phi_sigma: T, phi_delta: T) -> T {
    let pi = T::pi();
    if phi_sigma.abs() > pi || phi_delta.abs() > pi {
        warn!("flux bias outside [-π, π]");
    }
    let pb2 = circuit.phi_b * circuit.phi_b;
    real::<T>(2.0)
        * pb2
        * (circuit.e_j * phi_sigma.cos() * phi_delta.cos()
            - circuit.de_j * phi_sigma.sin() * phi_delta.sin())
}

/// `|α|²` implied by the buffer drive, `|ε_d / g₂|`; `None` without a two-photon coupling.
pub fn target_alpha_sq<T: Real>(g2: C<T>, eps_d: C<T>) -> Option<T> {
    let g = modulus(g2);
    if g > T::zero() {
        Some(modulus(eps_d) / g)
    } else {
        None
    }
}

pub(crate) fn check_truncation<T: Real>(alpha_sq: T, dims: SpaceDims) -> Result<()> {
    let need = required_levels(to_f64(alpha_sq).sqrt());
    if need > dims.n_mem() {
        return Err(Error::Truncation(format!(
            "|α|² = {:.3} needs at least {need} memory levels, have {}",
            to_f64(alpha_sq),
            dims.n_mem()
        )));
    }
    Ok(())
}

/// `g₂* a²b† + g₂ a†²b − ε_d* b − ε_d b† + δ_a a†a + δ_b b†b + ε_Z a† + ε_Z* a − (K/2) b†²b²`
pub fn hamiltonian_two_photon<T: Real>(
    params: &PhysicalParams<T>,
    drive: &DriveSpec<T>,
    dims: SpaceDims,
) -> Result<QOperator<T>> {
    if let Some(a2) = target_alpha_sq(params.g2, drive.eps_d) {
        if a2 > T::zero() {
            check_truncation(a2, dims)?;
        }
    }
    let (a, b) = mode_operators::<T>(dims)?;
    let (ad, bd) = (a.dag(), b.dag());
    let a2 = &a * &a;
    let a2b_d = &a2 * &bd;
    let mut h = a2b_d.scale(params.g2.conj());
    h = &h + &a2b_d.dag().scale(params.g2);
    h = &h - &b.scale(drive.eps_d.conj());
    h = &h - &bd.scale(drive.eps_d);
    h = &h + &(&ad * &a).scale(cr(params.delta_mem));
    h = &h + &(&bd * &b).scale(cr(params.delta_buf));
    h = &h + &ad.scale(drive.eps_z);
    h = &h + &a.scale(drive.eps_z.conj());
    if params.kerr_buf != T::zero() {
        let bd2b2 = &(&bd * &bd) * &(&b * &b);
        h = &h - &bd2b2.scale(cr(params.kerr_buf / real(2.0)));
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "g_lin")]
pub enum Cancellation<T: Real> {
    Exact,
    Residual(T),
}

/// `g_lin(b + b†) + g_l a†a(b + b†) + g_sp(b†²b + b†b²)`, the first term only for a residual cancellation.
pub fn hamiltonian_longitudinal<T: Real>(
    params: &PhysicalParams<T>,
    dims: SpaceDims,
    cancellation: Cancellation<T>,
) -> Result<QOperator<T>> {
    let (a, b) = mode_operators::<T>(dims)?;
    let bd = b.dag();
    let x = &b + &bd;
    let n = &a.dag() * &a;
    let mut h = (&n * &x).scale(cr(params.g_l));
    let sp = &(&(&bd * &bd) * &b) + &(&(&bd * &b) * &b);
    h = &h + &sp.scale(cr(params.g_sp));
    if let Cancellation::Residual(g_lin) = cancellation {
        h = &h + &x.scale(cr(g_lin));
    }
    Ok(h)
}

/// Beam-splitter exchange `g (a b† + a† b)` driven by the reset pump.
pub fn hamiltonian_reset<T: Real>(g_reset: T, dims: SpaceDims) -> Result<QOperator<T>> {
    let (a, b) = mode_operators::<T>(dims)?;
    let x = &a * &b.dag();
    Ok((&x + &x.dag()).scale(cr(g_reset)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFlags<T: Real> {
    pub mem_loss: bool,
    pub mem_heat: bool,
    pub buf_loss: bool,
    pub buf_heat: bool,
    /// Effective reset-induced memory decay rate (rad/s), if any.
    pub reset: Option<T>,
}

impl<T: Real> Default for CollapseFlags<T> {
    fn default() -> Self {
        CollapseFlags {
            mem_loss: true,
            mem_heat: true,
            buf_loss: true,
            buf_heat: true,
            reset: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOp<T: Real> {
    pub label: &'static str,
    pub rate: T,
    /// Already scaled by `√rate`.
    pub op: QOperator<T>,
}

/// Collapse operators of the thermal memory/buffer master equation; zero-rate channels are dropped.
pub fn collapse_operators<T: Real>(
    params: &PhysicalParams<T>,
    dims: SpaceDims,
    include: &CollapseFlags<T>,
) -> Result<Vec<CollapseOp<T>>> {
    params.validate()?;
    let (a, b) = mode_operators::<T>(dims)?;
    let one = T::one();
    let mut list = Vec::new();
    let mut push = |label: &'static str, rate: T, op: &QOperator<T>| -> Result<()> {
        if rate < T::zero() {
            return Err(invalid(label, "negative collapse rate"));
        }
        if rate > T::zero() {
            list.push(CollapseOp {
                label,
                rate,
                op: op.scale(cr(rate.sqrt())),
            });
        }
        Ok(())
    };
    if include.mem_loss {
        push("mem_loss", params.kappa_a * (one + params.n_th_mem), &a)?;
    }
    if include.mem_heat {
        push("mem_heat", params.kappa_a * params.n_th_mem, &a.dag())?;
    }
    if include.buf_loss {
        push("buf_loss", params.kappa_b * (one + params.n_th_buf), &b)?;
    }
    if include.buf_heat {
        push("buf_heat", params.kappa_b * params.n_th_buf, &b.dag())?;
    }
    if let Some(r) = include.reset {
        push("mem_reset", r, &a)?;
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{cat_state, parity_operator, Mode, Parity};
    use num_complex::Complex;

    #[test]
    fn device_pump_inversion() {
        let c = CircuitParams::<f64>::device();
        // g2/2π = ½ E_J ε φa² φb  →  ε = 2·0.763 MHz / (E_J φa² φb)
        let eps = 2.0 * 0.763e6 / (12.03e9 * 0.06f64.powi(2) * 0.29);
        assert!((eps - 0.1215).abs() < 5e-4, "{eps}");
        match coupling_rates(&c, PumpKind::TwoPhoton, eps, 1.0).unwrap() {
            RateSet::TwoPhoton { g2 } => assert!((g2 / TWO_PI - 0.763e6).abs() < 1e-6),
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_pump_gives_zero_rates() {
        let c = CircuitParams::<f64>::device();
        for kind in [PumpKind::TwoPhoton, PumpKind::Longitudinal, PumpKind::Reset] {
            let r = coupling_rates(&c, kind, 0.0, 1.0).unwrap();
            let all_zero = match r {
                RateSet::TwoPhoton { g2 } => g2 == 0.0,
                RateSet::Longitudinal { g_lin, g_l, g_sp } => {
                    g_lin == 0.0 && g_l == 0.0 && g_sp == 0.0
                }
                RateSet::Reset {
                    g_reset,
                    kappa_a_reset,
                } => g_reset == 0.0 && kappa_a_reset == 0.0,
            };
            assert!(all_zero);
        }
        assert!(coupling_rates(&c, PumpKind::Reset, 0.1, 0.0).is_err());
        assert!(coupling_rates(&c, PumpKind::TwoPhoton, 0.6, 1.0).is_err());
    }

    #[test]
    fn reset_rate_arithmetic() {
        let k = reset_memory_rate(TWO_PI * 50e3, TWO_PI * 2.6e6) / TWO_PI;
        assert!((k - 4.0 * 0.05f64.powi(2) / 2.6 * 1e6).abs() < 1e-6);
        assert!((k - 3846.15).abs() < 0.01);
    }

    #[test]
    fn saddle_and_flux_consistency() {
        let c = CircuitParams::<f64>::device();
        let s = saddle_frequencies(&c);
        assert!(((s.omega_a_minus - s.omega_a_plus) - 4.0 * 0.47e9 * 0.0036).abs() < 1e-3);
        let pi2 = std::f64::consts::FRAC_PI_2;
        let diff = flux_shift(&c, pi2, pi2) - flux_shift(&c, pi2, -pi2);
        assert!((diff + 4.0 * c.de_j * c.phi_b * c.phi_b).abs() < 1e-3);
        let mut c0 = c;
        c0.de_j = 1e-300;
        assert!(flux_shift(&c0, pi2, -pi2).abs() < 1e-3);
        assert!((flux_shift(&c, 0.0, 0.0) - 2.0 * 0.0841 * 12.03e9).abs() < 1.0);
    }

    #[test]
    fn two_photon_hamiltonian_annihilates_cats() {
        let dims = SpaceDims::new(30, 3).unwrap();
        let mut p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
        p.g2 = Complex::new(0.8, 0.0);
        let alpha = Complex::new(1.5, 0.0);
        let h = hamiltonian_two_photon(&p, &DriveSpec::stabilizing(p.g2, alpha), dims).unwrap();
        assert!(h.is_hermitian(1e-12));
        for parity in [Parity::Even, Parity::Odd] {
            let psi = cat_state(alpha, parity, dims).unwrap();
            let v = h.apply(&psi).unwrap();
            assert!(v.norm() < 1e-6 * h.norm(), "{}", v.norm());
        }
    }

    #[test]
    fn memory_parity_commutes_without_drives() {
        let dims = SpaceDims::new(8, 4).unwrap();
        let mut p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
        p.delta_mem = 0.3;
        p.delta_buf = -0.7;
        let h = hamiltonian_two_photon(&p, &DriveSpec::none(), dims).unwrap();
        let pa = parity_operator(dims, Mode::Mem);
        assert_eq!(h.commutator(&pa).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn truncation_rule_enforced() {
        let dims = SpaceDims::new(10, 3).unwrap();
        let p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
        let r = hamiltonian_two_photon(
            &p,
            &DriveSpec::stabilizing(p.g2, Complex::new(2.0, 0.0)),
            dims,
        );
        assert!(matches!(r, Err(Error::Truncation(_))));
    }

    #[test]
    fn collapse_sets() {
        let dims = SpaceDims::new(4, 3).unwrap();
        let p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
        let ops = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].label, "buf_loss");
        let dev = PhysicalParams::<f64>::device();
        let ops = collapse_operators(&dev, dims, &CollapseFlags::default()).unwrap();
        let rates: Vec<f64> = ops.iter().map(|c| c.rate / TWO_PI).collect();
        let expect = [9.3e3 * 1.1, 9.3e3 * 0.1, 2.6e6 * 1.011, 2.6e6 * 0.011];
        for (r, e) in rates.iter().zip(expect) {
            assert!((r - e).abs() < 1e-6 * e);
        }
    }

    #[test]
    fn longitudinal_exact_cancellation_drops_linear_term() {
        let dims = SpaceDims::new(3, 3).unwrap();
        let p = PhysicalParams::<f64>::two_photon(0.0, 1.0);
        let h = hamiltonian_longitudinal(&p, dims, Cancellation::Exact).unwrap();
        assert_eq!(h.max_abs(), 0.0);
        let h = hamiltonian_longitudinal(&p, dims, Cancellation::Residual(0.5)).unwrap();
        assert!(h.max_abs() > 0.0 && h.is_hermitian(1e-15));
    }
}
