use approx::assert_relative_eq;
use catsim_core::hilbert::{
    cat_state, coherent_state, destroy, mode_operators, Mode, Parity, QOperator, QState, SpaceDims,
};
use catsim_core::lindblad::*;
use catsim_core::model::{
    collapse_operators, hamiltonian_two_photon, CollapseFlags, CollapseOp, DriveSpec,
    PhysicalParams,
};
use catsim_core::pulse::TimeDependentProblem;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn lossy_mode(n: usize, kappa: f64, n_th: f64) -> (QOperator<f64>, Vec<CollapseOp<f64>>) {
    // Buffer mode of a (2 × n) space; the memory decays three times faster so the steady state is unique.
    let dims = SpaceDims::new(2, n).unwrap();
    let mut p = PhysicalParams::two_photon(0.0, kappa);
    p.kappa_a = 3.0 * kappa;
    p.n_th_buf = n_th;
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    (QOperator::zeros(dims), col)
}

fn two_photon(
    g2: f64,
    kb: f64,
    alpha: f64,
    dims: SpaceDims,
) -> (QOperator<f64>, Vec<CollapseOp<f64>>) {
    let p = PhysicalParams::two_photon(g2, kb);
    let drive = DriveSpec::stabilizing(c(g2), c(alpha));
    let h = hamiltonian_two_photon(&p, &drive, dims).unwrap();
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    (h, col)
}

fn no_leak() -> EvolveOptions<f64> {
    EvolveOptions {
        leakage_error: None,
        leakage_warn: None,
        ..Default::default()
    }
}

/// Two-photon Hamiltonian with a buffer drive, assembled without the truncation guard.
fn small_hamiltonian(
    p: &PhysicalParams<f64>,
    eps_d: C64,
    eps_z: C64,
    dims: SpaceDims,
) -> QOperator<f64> {
    let (_, b) = mode_operators::<f64>(dims).unwrap();
    let h = hamiltonian_two_photon(
        p,
        &DriveSpec {
            eps_d: c(0.0),
            eps_z,
        },
        dims,
    )
    .unwrap();
    let drive = &b.scale(eps_d.conj()) + &b.dag().scale(eps_d);
    &h - &drive
}

fn random_density(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let m = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let rho = &m * m.adjoint();
    let tr = rho.trace();
    rho / tr
}

#[test]
fn single_loss_gap_is_half_kappa() {
    let (h, col) = lossy_mode(4, 2.0, 0.0);
    let l = build_liouvillian(&h, &col).unwrap();
    let ev = l.spectrum(DEFAULT_BLOCK_CAP).unwrap();
    assert!(ev.iter().any(|z| z.norm() < 1e-12));
    assert!(ev.iter().any(|z| (z - c(-1.0)).norm() < 1e-10));
    let gap = spectral_gap(&l).unwrap();
    assert_relative_eq!(gap.lambda_min.re, -1.0, epsilon = 1e-10);
}

#[test]
fn liouvillian_matches_direct_rhs() {
    let dims = SpaceDims::new(4, 3).unwrap();
    let mut p = PhysicalParams::two_photon(0.3, 1.0);
    p.kappa_a = 0.05;
    p.n_th_mem = 0.1;
    p.n_th_buf = 0.02;
    p.delta_mem = 0.2;
    let h = small_hamiltonian(&p, C64::new(0.1, 0.05), C64::new(0.02, -0.01), dims);
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    let l = build_liouvillian(&h, &col).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let rho = random_density(dims.dim(), &mut rng);
        let diff = l.apply(&rho) - lindblad_rhs(&h, &col, &rho);
        assert!(diff.camax() < 1e-10);
    }
    assert!(l.trace_preservation_error() < 1e-12);
}

#[test]
fn steady_state_is_annihilated() {
    let (h, col) = lossy_mode(6, 1.0, 0.2);
    let l = build_liouvillian(&h, &col).unwrap();
    match steady_state(&l).unwrap() {
        SteadyState::Unique(s) => {
            let r = l.apply(&s.to_density_matrix());
            assert!(r.camax() < 1e-10);
        }
        other => panic!("expected a unique state, got {other:?}"),
    }
}

#[test]
fn pure_loss_relaxes_to_vacuum() {
    let (h, col) = lossy_mode(5, 1.0, 0.0);
    let l = build_liouvillian(&h, &col).unwrap();
    let SteadyState::Unique(s) = steady_state(&l).unwrap() else {
        panic!()
    };
    let rho = s.to_density_matrix();
    assert_relative_eq!(rho[(0, 0)].re, 1.0, epsilon = 1e-10);
}

#[test]
fn thermal_steady_state_occupation() {
    let n_th = 0.15;
    let (h, col) = lossy_mode(30, 1.0, n_th);
    let l = build_liouvillian(&h, &col).unwrap();
    let SteadyState::Unique(s) = steady_state(&l).unwrap() else {
        panic!()
    };
    let (_, b) = mode_operators::<f64>(h.dims()).unwrap();
    let n = &b.dag() * &b;
    let mean = catsim_core::hilbert::expectation(&n, &s).unwrap().re;
    assert!((mean - n_th).abs() < 1e-8, "{mean}");
}

#[test]
fn cat_manifold_kernel_has_dimension_four() {
    let dims = SpaceDims::new(18, 3).unwrap();
    let (h, col) = two_photon(0.3, 1.0, 1.5, dims);
    let l = build_liouvillian(&h, &col).unwrap();
    match steady_state(&l).unwrap() {
        SteadyState::Manifold { basis, dim } => {
            assert_eq!(dim, 4);
            // The kernel contains both even/odd cat projectors and their coherences.
            let even = cat_state(c(1.5), Parity::Even, dims)
                .unwrap()
                .to_density_matrix();
            let odd = cat_state(c(1.5), Parity::Odd, dims)
                .unwrap()
                .to_density_matrix();
            let ep = even.as_slice().iter().map(|z| *z).collect::<Vec<_>>();
            let op = odd.as_slice().iter().map(|z| *z).collect::<Vec<_>>();
            for target in [ep, op] {
                let mut resid: Vec<C64> = target.clone();
                for v in &basis {
                    let proj: C64 = v.iter().zip(&target).map(|(a, b)| a.conj() * b).sum();
                    for (r, a) in resid.iter_mut().zip(v.iter()) {
                        *r -= proj * a;
                    }
                }
                let n: f64 = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                assert!(n < 1e-3, "cat projector outside kernel: {n}");
            }
        }
        SteadyState::Unique(_) => panic!("expected a degenerate manifold"),
    }
}

#[test]
fn alpha0_gap_matches_closed_form_and_reduced_path() {
    let dims = SpaceDims::new(20, 6).unwrap();
    for ratio in [0.05, 0.1, 0.19, 0.3, 0.5] {
        let (h, col) = two_photon(ratio, 1.0, 0.0, dims);
        let l = build_liouvillian(&h, &col).unwrap();
        let gap = spectral_gap(&l).unwrap();
        let closed = alpha0_confinement_closed_form(ratio, 1.0);
        let numeric = -2.0 * gap.lambda_min.re;
        assert!(
            (numeric - closed).abs() < 0.01 * closed,
            "g2 = {ratio}: {numeric} vs {closed}"
        );
        let reduced = alpha0_reduced_gap(c(ratio), 1.0);
        assert!(
            (reduced.re - gap.lambda_min.re).abs() < 1e-8,
            "{reduced} vs {}",
            gap.lambda_min
        );
    }
}

#[test]
fn alpha0_closed_form_limits() {
    let kb = 1.0;
    let g = 1e-4;
    assert_relative_eq!(
        alpha0_confinement_closed_form(g, kb),
        8.0 * g * g / kb,
        max_relative = 1e-6
    );
    let crit = kb / 32f64.sqrt();
    assert_eq!(alpha0_confinement_closed_form(crit * 1.0001, kb), kb / 2.0);
    assert_relative_eq!(
        alpha0_confinement_closed_form(crit * (1.0 - 1e-12), kb),
        kb / 2.0,
        epsilon = 1e-5
    );
    assert_relative_eq!(
        alpha0_confinement_closed_form(0.1, 1.0),
        0.5 * (1.0 - 0.68f64.sqrt()),
        epsilon = 1e-15
    );
    assert!((alpha0_confinement_closed_form(0.1f64, 1.0) - 0.08769).abs() < 1e-5);
}

#[test]
fn device_alpha0_gap_is_underdamped() {
    let p = PhysicalParams::<f64>::device();
    let g = p.g2.re / p.kappa_b;
    assert!(32.0 * g * g > 2.7);
    let dims = SpaceDims::new(12, 5).unwrap();
    let (h, col) = two_photon(g, 1.0, 0.0, dims);
    let gap = spectral_gap(&build_liouvillian(&h, &col).unwrap()).unwrap();
    assert_relative_eq!(-2.0 * gap.lambda_min.re, 0.5, epsilon = 1e-8);
}

#[test]
fn constant_problem_conserves_trivially() {
    let dims = SpaceDims::new(3, 2).unwrap();
    let s = QState::fock(dims, 1, 0).unwrap();
    let prob =
        TimeDependentProblem::constant(QOperator::zeros(dims), vec![], s.clone(), 1.0).unwrap();
    let r = evolve(&prob, &[0.0, 0.5, 1.0], &[], &no_leak()).unwrap();
    let diff = r.final_state.to_density_matrix() - s.to_density_matrix();
    assert!(diff.camax() < 1e-14);
}

#[test]
fn buffer_coherent_amplitude_decays() {
    let dims = SpaceDims::new(2, 14).unwrap();
    let beta = C64::new(1.0, 0.5);
    let (_, b) = mode_operators::<f64>(dims).unwrap();
    let mut p = PhysicalParams::two_photon(0.0, 1.0);
    p.n_th_buf = 0.0;
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    let init = coherent_state(beta, dims, Mode::Buf).unwrap();
    let prob = TimeDependentProblem::constant(QOperator::zeros(dims), col, init, 3.0).unwrap();
    let ts: Vec<f64> = (0..=6).map(|k| 0.5 * k as f64).collect();
    let r = evolve(&prob, &ts, &[("b", &b)], &no_leak()).unwrap();
    for (t, v) in ts.iter().zip(r.observable("b").unwrap()) {
        let expect = beta * (-t / 2.0).exp();
        assert!((v - expect).norm() < 1e-7, "t = {t}: {v} vs {expect}");
    }
    assert!(r.max_trace_drift < 1e-6);
}

#[test]
fn evolution_matches_liouvillian_propagator() {
    let dims = SpaceDims::new(4, 3).unwrap();
    let mut p = PhysicalParams::two_photon(0.4, 1.0);
    p.kappa_a = 0.1;
    p.n_th_mem = 0.1;
    let h = small_hamiltonian(&p, c(0.3), c(0.05), dims);
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    let l = build_liouvillian(&h, &col).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho0 = random_density(dims.dim(), &mut rng);
    let init = QState::density(dims, rho0.clone()).unwrap();
    let t = 5.0;
    let prob = TimeDependentProblem::constant(h, col, init, t).unwrap();
    let r = evolve(&prob, &[t], &[], &no_leak()).unwrap();
    let lm = l.matrix().to_dense() * nalgebra::Complex::new(t, 0.0);
    let prop = lm.exp();
    let v = nalgebra::DVector::from_column_slice(rho0.as_slice());
    let expect = prop * v;
    let got = r.final_state.to_density_matrix();
    let err = (nalgebra::DVector::from_column_slice(got.as_slice()) - expect).camax();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn memory_parity_is_conserved_without_single_photon_terms() {
    let dims = SpaceDims::new(12, 4).unwrap();
    let p = PhysicalParams::two_photon(0.3, 1.0);
    let h = hamiltonian_two_photon(&p, &DriveSpec::none(), dims).unwrap();
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    let pm = catsim_core::hilbert::parity_operator::<f64>(dims, Mode::Mem);
    let init = coherent_state(c(1.2), dims, Mode::Mem).unwrap();
    let prob = TimeDependentProblem::constant(h, col, init, 4.0).unwrap();
    let ts: Vec<f64> = (0..=8).map(|k| 0.5 * k as f64).collect();
    let r = evolve(
        &prob,
        &ts,
        &[("P", &pm)],
        &EvolveOptions {
            leakage_error: None,
            ..Default::default()
        },
    )
    .unwrap();
    let v = r.observable("P").unwrap();
    for z in v {
        assert!((z - v[0]).norm() < 1e-8);
    }
}

#[test]
fn adjoint_evolution_agrees_with_forward() {
    let dims = SpaceDims::new(5, 3).unwrap();
    let mut p = PhysicalParams::two_photon(0.4, 1.0);
    p.kappa_a = 0.1;
    let h = small_hamiltonian(&p, c(0.5), c(0.05), dims);
    let col = collapse_operators(&p, dims, &CollapseFlags::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho0 = random_density(dims.dim(), &mut rng);
    let init = QState::density(dims, rho0.clone()).unwrap();
    let prob = TimeDependentProblem::constant(h, col, init, 2.0).unwrap();
    let a = QOperator::embed(dims, Mode::Mem, &destroy::<f64>(5)).unwrap();
    let n = &a.dag() * &a;
    let fwd = evolve(&prob, &[2.0], &[("n", &n)], &no_leak()).unwrap();
    let m = evolve_adjoint(&prob, &n, 2.0, &Default::default()).unwrap();
    let back = catsim_core::hilbert::trace_product(m.matrix(), &rho0);
    assert!((back - fwd.observable("n").unwrap()[0]).norm() < 1e-7);
}
