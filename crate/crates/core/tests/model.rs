use catsim_core::hilbert::{
    cat_state, mode_operators, parity_operator, Mode, Parity, QOperator, SpaceDims,
};
use catsim_core::model::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn hz(x: f64) -> f64 {
    TWO_PI * x
}

#[test]
fn device_collapse_rates() {
    let p = PhysicalParams::<f64>::device();
    let dims = SpaceDims::new(4, 3).unwrap();
    let ops = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    let want = [
        ("mem_loss", hz(9.3e3 * 1.1)),
        ("mem_heat", hz(9.3e3 * 0.1)),
        ("buf_loss", hz(2.6e6 * 1.011)),
        ("buf_heat", hz(2.6e6 * 0.011)),
    ];
    assert_eq!(ops.len(), 4);
    for (op, (label, rate)) in ops.iter().zip(want) {
        assert_eq!(op.label, label);
        assert!((op.rate / rate - 1.0).abs() < 1e-12, "{label}");
    }
    // operators carry √rate
    let (a, _) = mode_operators::<f64>(dims).unwrap();
    let want_op = a.scale(c(ops[0].rate.sqrt()));
    assert!((ops[0].op.matrix() - want_op.matrix()).norm() < 1e-9);
}

#[test]
fn pure_two_photon_has_only_buffer_loss() {
    let p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
    let ops =
        collapse_operators(&p, SpaceDims::new(3, 3).unwrap(), &CollapseFlags::default()).unwrap();
    assert_eq!(ops.len(), 1);
    assert_eq!(ops[0].label, "buf_loss");
}

#[test]
fn reset_channel_rate() {
    let p = PhysicalParams::<f64>::device();
    let ka_reset = reset_memory_rate(hz(50e3), p.kappa_b);
    assert!(
        (ka_reset / TWO_PI - 3.846e3).abs() < 1.0,
        "{}",
        ka_reset / TWO_PI
    );
    let flags = CollapseFlags {
        reset: Some(ka_reset),
        ..CollapseFlags::default()
    };
    let ops = collapse_operators(&p, SpaceDims::new(3, 2).unwrap(), &flags).unwrap();
    assert!(ops
        .iter()
        .any(|o| o.label == "mem_reset" && o.rate == ka_reset));
    let bad = CollapseFlags {
        reset: Some(-1.0),
        ..CollapseFlags::default()
    };
    assert!(collapse_operators(&p, SpaceDims::new(3, 2).unwrap(), &bad).is_err());
}

#[test]
fn readout_coupling_arithmetic() {
    let circuit = CircuitParams::<f64>::device();
    let eps = 0.05;
    match coupling_rates(&circuit, PumpKind::Longitudinal, eps, 0.0).unwrap() {
        RateSet::Longitudinal { g_lin, g_l, g_sp } => {
            assert!((g_sp / g_l - 11.68).abs() < 5e-3);
            let exact = 0.5 * (0.29f64 / 0.06).powi(2);
            assert!((g_sp / g_l - exact).abs() < 1e-12 * exact);
            assert!(g_lin < 0.0 && g_l > 0.0);
            assert!((g_lin / g_l + 1.0 / 0.06f64.powi(2)).abs() < 1e-9);
        }
        _ => unreachable!(),
    }
    let p = PhysicalParams::<f64>::device();
    let beta = C64::new(0.0, -2.0 * p.g_l / p.kappa_b);
    assert!((beta.im + 0.0769).abs() < 1e-4, "{beta}");
}

#[test]
fn saddle_splittings() {
    let s = saddle_frequencies(&CircuitParams::<f64>::device());
    let buf = (s.omega_b_minus - s.omega_b_plus).abs();
    let mem = (s.omega_a_minus - s.omega_a_plus).abs();
    assert!((buf / (4.0 * 0.47e9 * 0.29 * 0.29) - 1.0).abs() < 1e-12);
    assert!((buf / 1e6 - 158.1).abs() < 0.1);
    assert!((mem / 1e6 - 6.768).abs() < 1e-3);

    let mut flat = CircuitParams::<f64>::device();
    flat.de_j = 0.0;
    let s = saddle_frequencies(&flat);
    assert_eq!(s.omega_b_plus, s.omega_b_minus);
    assert_eq!(s.omega_a_plus, flat.omega_a0);
}

#[test]
fn flux_shift_scale_and_saddle() {
    let circuit = CircuitParams::<f64>::device();
    let zero = flux_shift(&circuit, 0.0, 0.0);
    assert!((zero / 1e9 - 2.0 * 0.0841 * 12.03).abs() < 1e-6);
    let h = std::f64::consts::FRAC_PI_2;
    let split = flux_shift(&circuit, h, h) - flux_shift(&circuit, h, -h);
    let s = saddle_frequencies(&circuit);
    assert!((split.abs() - (s.omega_b_minus - s.omega_b_plus)).abs() < 1e-3);
}

#[test]
fn pump_bounds() {
    let circuit = CircuitParams::<f64>::device();
    assert!(coupling_rates(&circuit, PumpKind::TwoPhoton, -0.1, 1.0).is_err());
    assert!(coupling_rates(&circuit, PumpKind::TwoPhoton, 0.6, 1.0).is_err());
    assert!(coupling_rates(&circuit, PumpKind::Reset, 0.1, 0.0).is_err());
}

#[test]
fn cats_are_dark_states_at_truncation() {
    let alpha = 1.5;
    let dims = SpaceDims::new(30, 3).unwrap();
    let p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
    let h = hamiltonian_two_photon(&p, &DriveSpec::stabilizing(p.g2, c(alpha)), dims).unwrap();
    let hn = h.norm();
    for parity in [Parity::Even, Parity::Odd] {
        let cat = cat_state(c(alpha), parity, dims).unwrap();
        let out = h.apply(&cat).unwrap();
        assert!(out.norm() < 1e-6 * hn, "{parity:?} {}", out.norm());
    }
}

#[test]
fn memory_parity_but_not_joint_parity() {
    let dims = SpaceDims::new(10, 4).unwrap();
    let p = PhysicalParams::<f64>::two_photon(1.0, 4.0);
    let h = hamiltonian_two_photon(
        &p,
        &DriveSpec {
            eps_d: c(0.5),
            eps_z: c(0.0),
        },
        dims,
    )
    .unwrap();
    let pa = parity_operator::<f64>(dims, Mode::Mem);
    let pb = parity_operator::<f64>(dims, Mode::Buf);
    assert!(h.commutator(&pa).unwrap().max_abs() < 1e-14);
    let joint = &pa * &pb;
    assert!(h.commutator(&joint).unwrap().max_abs() > 0.1);
    let hz = hamiltonian_two_photon(
        &p,
        &DriveSpec {
            eps_d: c(0.0),
            eps_z: c(0.1),
        },
        dims,
    )
    .unwrap();
    assert!(hz.commutator(&pa).unwrap().max_abs() > 0.01);
}

#[test]
fn zero_couplings_give_zero_operators() {
    let dims = SpaceDims::new(4, 3).unwrap();
    let p = PhysicalParams::<f64>::two_photon(0.0, 1.0);
    let h = hamiltonian_two_photon(&p, &DriveSpec::none(), dims).unwrap();
    assert_eq!(h.max_abs(), 0.0);
    let hl = hamiltonian_longitudinal(&p, dims, Cancellation::Exact).unwrap();
    assert_eq!(hl.max_abs(), 0.0);
    let hr = hamiltonian_longitudinal(&p, dims, Cancellation::Residual(0.2)).unwrap();
    assert!(hr.max_abs() > 0.0);
}

#[test]
fn longitudinal_is_diagonal_in_memory_number() {
    let dims = SpaceDims::new(5, 4).unwrap();
    let mut p = PhysicalParams::<f64>::device();
    p.g_sp = 11.68 * p.g_l;
    let h = hamiltonian_longitudinal(&p, dims, Cancellation::Exact).unwrap();
    let (a, _) = mode_operators::<f64>(dims).unwrap();
    let n = &a.dag() * &a;
    assert!(h.commutator(&n).unwrap().max_abs() < 1e-6 * h.max_abs());
}

#[test]
fn params_serde_round_trip() {
    let p = PhysicalParams::<f64>::device();
    let s = serde_json::to_string(&p).unwrap();
    let q: PhysicalParams<f64> = serde_json::from_str(&s).unwrap();
    assert_eq!(p, q);
}

#[test]
fn negative_rates_rejected() {
    let mut p = PhysicalParams::<f64>::device();
    p.kappa_b = -1.0;
    assert!(p.validate().is_err());
    let mut p = PhysicalParams::<f64>::device();
    p.n_th_mem = -0.1;
    assert!(
        collapse_operators(&p, SpaceDims::new(3, 2).unwrap(), &CollapseFlags::default()).is_err()
    );
}

fn hermitian(h: &QOperator<f64>) -> bool {
    h.hermiticity_error() <= 1e-12 * h.max_abs().max(1.0)
}

proptest! {
    #[test]
    fn pump_linearity(eps in 0.0f64..0.25) {
        let circuit = CircuitParams::<f64>::device();
        let kb = hz(2.6e6);
        let pair = |k| (
            coupling_rates(&circuit, k, eps, kb).unwrap(),
            coupling_rates(&circuit, k, 2.0 * eps, kb).unwrap(),
        );
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1e-300);
        match pair(PumpKind::TwoPhoton) {
            (RateSet::TwoPhoton { g2: a }, RateSet::TwoPhoton { g2: b }) => prop_assert!(close(2.0 * a, b)),
            _ => unreachable!(),
        }
        match pair(PumpKind::Longitudinal) {
            (RateSet::Longitudinal { g_l: a, .. }, RateSet::Longitudinal { g_l: b, .. }) => prop_assert!(close(2.0 * a, b)),
            _ => unreachable!(),
        }
        // g_reset is quadratic in the pump, so the induced memory decay is quartic
        match pair(PumpKind::Reset) {
            (RateSet::Reset { g_reset: ga, kappa_a_reset: a }, RateSet::Reset { g_reset: gb, kappa_a_reset: b }) => {
                prop_assert!(close(4.0 * ga, gb));
                prop_assert!(close(16.0 * a, b));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn hamiltonians_are_hermitian(
        // |g₂| ≥ 0.5 keeps |ε_d/g₂| inside the 30-level truncation
        g_re in 0.5f64..2.0, g_im in -2.0f64..2.0,
        ed_re in -2.0f64..2.0, ed_im in -2.0f64..2.0,
        ez_re in -1.0f64..1.0, ez_im in -1.0f64..1.0,
        dm in -1.0f64..1.0, db in -1.0f64..1.0, kerr in 0.0f64..1.0,
        gl in -1.0f64..1.0, gsp in -1.0f64..1.0, glin in -1.0f64..1.0, gr in 0.0f64..1.0,
    ) {
        let dims = SpaceDims::new(30, 3).unwrap();
        let mut p = PhysicalParams::<f64>::two_photon(1.0, 1.0);
        p.g2 = C64::new(g_re, g_im);
        p.delta_mem = dm;
        p.delta_buf = db;
        p.kerr_buf = kerr;
        p.g_l = gl;
        p.g_sp = gsp;
        let drive = DriveSpec { eps_d: C64::new(ed_re, ed_im), eps_z: C64::new(ez_re, ez_im) };
        prop_assert!(hermitian(&hamiltonian_two_photon(&p, &drive, dims).unwrap()));
        prop_assert!(hermitian(&hamiltonian_longitudinal(&p, dims, Cancellation::Residual(glin)).unwrap()));
        prop_assert!(hermitian(&hamiltonian_reset(gr, dims).unwrap()));
    }
}
