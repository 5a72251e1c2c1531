use catsim_core::analysis::*;
use catsim_core::hilbert::{cat_amplitudes, coherent_amplitudes, Parity};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn projector(v: &DVector<Complex64>) -> DMatrix<Complex64> {
    v * v.adjoint()
}

fn fock(n: usize, k: usize) -> DMatrix<Complex64> {
    let mut v = DVector::zeros(n);
    v[k] = c(1.0, 0.0);
    projector(&v)
}

fn coherent(alpha: Complex64, n: usize) -> DMatrix<Complex64> {
    let (v, deficit) = coherent_amplitudes(alpha, n);
    assert!(deficit < 1e-14);
    projector(&v)
}

fn even_cat(alpha: f64, n: usize) -> DMatrix<Complex64> {
    projector(&cat_amplitudes(c(alpha, 0.0), Parity::Even, n).unwrap())
}

fn thermal(n_th: f64, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c(n_th.powi(i as i32) / (n_th + 1.0).powi(i as i32 + 1), 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

fn cmax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

#[test]
fn vacuum_and_single_photon_at_origin() {
    let w0 = wigner_point(&fock(10, 0), c(0.0, 0.0)).unwrap();
    let w1 = wigner_point(&fock(10, 1), c(0.0, 0.0)).unwrap();
    assert!((w0 - 2.0 / PI).abs() < 1e-12);
    assert!((w1 + 2.0 / PI).abs() < 1e-12);
}

#[test]
fn coherent_state_wigner_is_displaced_gaussian() {
    let alpha = c(1.2, -0.7);
    let rho = coherent(alpha, 40);
    for lam in [c(0.0, 0.0), c(1.0, -0.5), c(-0.3, 0.9), c(2.0, 1.0)] {
        let w = wigner_point(&rho, lam).unwrap();
        let expect = 2.0 / PI * (-2.0 * (lam - alpha).norm_sqr()).exp();
        assert!((w - expect).abs() < 1e-10, "{lam}: {w} vs {expect}");
    }
}

#[test]
fn cat_fringes_along_imaginary_axis() {
    let alpha = 1.6;
    let rho = even_cat(alpha, 40);
    let period = PI / (2.0 * alpha);
    let w = |y: f64| wigner_point(&rho, c(0.0, y)).unwrap();
    assert!(w(0.0) > 0.0);
    assert!(w(period / 2.0) < 0.0);
    assert!(w(period) > 0.0);
    assert!(w(1.5 * period) < 0.0);
    // every other zero crossing is one period apart
    let mut zeros = Vec::new();
    let step = period / 40.0;
    let mut y = 0.0;
    while zeros.len() < 4 {
        if w(y) * w(y + step) < 0.0 {
            let (mut lo, mut hi) = (y, y + step);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if w(lo) * w(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        y += step;
    }
    assert!((zeros[2] - zeros[0] - period).abs() < 1e-8);
    assert!((zeros[3] - zeros[1] - period).abs() < 1e-8);
}

#[test]
fn wigner_grid_normalization() {
    let rho = even_cat(1.6, 40);
    let grid = wigner(&rho, &GridSpec::square(5.0, 81)).unwrap();
    assert!((grid.integral() - 1.0).abs() < 0.02, "{}", grid.integral());
    assert_eq!(grid.rows().len(), 81 * 81);
}

#[test]
fn wigner_rejects_points_beyond_aux_space() {
    let rho = fock(10, 0);
    assert!(wigner_point(&rho, c(40.0, 0.0)).is_err());
}

#[test]
fn cut_models_match_exact_states() {
    let alpha = 2.1;
    let n_th = 0.1;
    let p = WignerCutParams::theoretical(alpha, n_th);
    let mix = (coherent(c(alpha, 0.0), 50) + coherent(c(-alpha, 0.0), 50)) * c(0.5, 0.0);
    let cat = even_cat(alpha, 50);
    let th = thermal(n_th, 40);
    let m_mix = wigner_cut_models(CutKind::Mixture, &p);
    let m_cat = wigner_cut_models(CutKind::Cat, &p);
    let m_th = wigner_cut_models(CutKind::Thermal, &p);
    for k in 0..=40 {
        let x = -4.0 + 0.2 * k as f64;
        assert!((wigner_point(&mix, c(x, 0.0)).unwrap() - m_mix(x)).abs() < 1e-6);
        assert!((wigner_point(&cat, c(0.0, x)).unwrap() - m_cat(x)).abs() < 1e-6);
        assert!((wigner_point(&th, c(x, 0.0)).unwrap() - m_th(x)).abs() < 1e-6);
    }
}

#[test]
fn cut_model_special_values() {
    let mut p = WignerCutParams::theoretical(1.3, 0.0);
    p.d = 1.0;
    let th = wigner_cut_models(CutKind::Thermal, &p);
    for x in [0.0, 0.4, -1.1] {
        assert!((th(x) - (-2.0 * x * x).exp()).abs() < 1e-15);
    }
    let cat = wigner_cut_models(CutKind::Cat, &p);
    assert!((cat(0.0) - p.c * ((-2.0 * 1.3f64 * 1.3).exp() + 1.0)).abs() < 1e-15);
}

#[test]
fn z_of_coherent_state_points_along_alpha() {
    for alpha in [
        c(2.0, 0.0),
        c(0.0, 2.0),
        c(2.0f64.sqrt(), -(2.0f64.sqrt())),
        Complex64::from_polar(2.0, 2.5),
    ] {
        let rho = coherent(alpha, 40);
        let obs = cat_observables(&rho, alpha).unwrap();
        assert!(obs.z >= 0.999, "α = {alpha}: Z = {}", obs.z);
        let flipped = cat_observables(&coherent(-alpha, 40), alpha).unwrap();
        assert!(flipped.z <= -0.999);
    }
}

#[test]
fn plus_cat_has_unit_x_and_zero_z() {
    let alpha = c(1.7, 0.0);
    let obs = cat_observables(&even_cat(1.7, 40), alpha).unwrap();
    assert!((obs.x - 1.0).abs() < 1e-9);
    assert!(obs.z.abs() < 1e-9);
}

#[test]
fn mixture_has_zero_z_and_small_parity() {
    let a = 1.5;
    let rho = (coherent(c(a, 0.0), 40) + coherent(c(-a, 0.0), 40)) * c(0.5, 0.0);
    let obs = cat_observables(&rho, c(a, 0.0)).unwrap();
    assert!(obs.z.abs() < 1e-12);
    assert!((obs.x - (-2.0 * a * a).exp()).abs() < 1e-10);
}

#[test]
fn z_needs_nonzero_alpha() {
    assert!(cat_observables(&fock(5, 0), c(0.0, 0.0)).is_err());
}

#[test]
fn exponential_round_trip() {
    let t: Vec<f64> = (0..60).map(|k| k as f64 * 40e-9).collect();
    let y: Vec<f64> = t.iter().map(|x| 0.05 + 0.9 * (-x / 490e-9).exp()).collect();
    let fit = fit_exponential(&t, &y).unwrap();
    assert!(fit.converged);
    assert!(
        (fit.get("T").unwrap() / 490e-9 - 1.0).abs() < 1e-9,
        "{:?}",
        fit
    );
    assert!((fit.get("A").unwrap() / 0.9 - 1.0).abs() < 1e-6);
    assert!((fit.get("y0").unwrap() / 0.05 - 1.0).abs() < 1e-6);
}

#[test]
fn exponential_with_offset_time_axis() {
    let t: Vec<f64> = (0..40).map(|k| 2.0 + k as f64 * 0.1).collect();
    let y: Vec<f64> = t.iter().map(|x| -0.3 + 2.0 * (-x / 1.5).exp()).collect();
    let fit = fit_exponential(&t, &y).unwrap();
    assert!((fit.get("T").unwrap() / 1.5 - 1.0).abs() < 1e-6);
    assert!((fit.get("A").unwrap() / 2.0 - 1.0).abs() < 1e-6);
}

#[test]
fn constant_data_is_flagged() {
    let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
    let y = vec![0.4; 20];
    let fit = fit_exponential(&t, &y).unwrap();
    assert!(!fit.converged);
    assert!(!fit.reliable());
}

#[test]
fn fitters_require_enough_points() {
    let t = [0.0, 1.0, 2.0];
    assert!(fit_exponential(&t, &[1.0, 0.5, 0.2]).is_err());
    assert!(fit_damped_cosine(&t, &[1.0, 0.5, 0.2]).is_err());
}

#[test]
fn damped_cosine_round_trip() {
    let omega = 2.0 * PI * 1.3e6;
    let t: Vec<f64> = (0..120).map(|k| k as f64 * 25e-9).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|x| 0.1 + 0.8 * (-x / 1.2e-6).exp() * (omega * x + 0.4).cos())
        .collect();
    let fit = fit_damped_cosine(&t, &y).unwrap();
    assert!(fit.converged, "{fit:?}");
    for (name, truth) in [
        ("y0", 0.1),
        ("A", 0.8),
        ("T", 1.2e-6),
        ("Omega", omega),
        ("phi", 0.4),
    ] {
        let v = fit.get(name).unwrap();
        assert!((v / truth - 1.0).abs() < 1e-6, "{name}: {v} vs {truth}");
    }
}

#[test]
fn noisy_exponential_sigma_is_honest() {
    let noise = Normal::new(0.0, 0.01).unwrap();
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let mut inside = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = t
            .iter()
            .map(|x| 0.2 + (-x / 1.1).exp() + noise.sample(&mut rng))
            .collect();
        let fit = fit_exponential(&t, &y).unwrap();
        if (fit.get("T").unwrap() - 1.1).abs() <= 3.0 * fit.sigma_of("T").unwrap() {
            inside += 1;
        }
    }
    assert!(inside >= 95, "{inside}");
}

fn cut_axes() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lin = |lo: f64, hi: f64, n: usize| {
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect::<Vec<_>>()
    };
    (lin(-4.0, 4.0, 81), lin(-2.5, 2.5, 101), lin(-3.0, 3.0, 61))
}

fn synth_cuts(
    truth: &WignerCutParams,
    noise: Option<(&Normal<f64>, &mut ChaCha8Rng)>,
) -> WignerCutData {
    let (xm, xc, xt) = cut_axes();
    let mut noise = noise;
    let mut eval = |kind, xs: &[f64]| -> Vec<f64> {
        let m = wigner_cut_models(kind, truth);
        xs.iter()
            .map(|x| {
                let e = match noise.as_mut() {
                    Some((d, r)) => d.sample(*r),
                    None => 0.0,
                };
                m(*x) + e
            })
            .collect()
    };
    let ym = eval(CutKind::Mixture, &xm);
    let yc = eval(CutKind::Cat, &xc);
    let yt = eval(CutKind::Thermal, &xt);
    WignerCutData {
        mixture: (xm, ym),
        cat: (xc, yc),
        thermal: (xt, yt),
    }
}

fn guess_from(truth: &WignerCutParams) -> WignerCutParams {
    let mut g = *truth;
    g.a *= 0.9;
    g.b *= 1.04;
    g.c *= 1.1;
    g.d *= 0.9;
    g.alpha = 2.0;
    g.n_th = 0.2;
    g.offsets = [0.01, -0.01, 0.0];
    g
}

#[test]
fn wigner_cut_fit_round_trip() {
    let mut truth = WignerCutParams::theoretical(2.1, 0.10);
    truth.a *= 0.8;
    truth.c *= 0.7;
    truth.offsets = [0.003, -0.002, 0.001];
    let fit = fit_wigner_cuts(&synth_cuts(&truth, None), &guess_from(&truth)).unwrap();
    assert!(fit.converged);
    assert!(!fit.at_bound);
    assert!((fit.get("alpha").unwrap() - 2.1).abs() < 1e-6 * 2.1);
    assert!((fit.get("n_th").unwrap() - 0.10).abs() < 1e-6 * 0.10);
    for (k, name) in ["A", "B", "C", "D"].iter().enumerate() {
        let t = [truth.a, truth.b, truth.c, truth.d][k];
        assert!((fit.get(name).unwrap() / t - 1.0).abs() < 1e-6, "{name}");
    }
}

#[test]
fn wigner_cut_fit_flags_thermal_bound() {
    let truth = WignerCutParams::theoretical(1.8, 0.0);
    let mut guess = guess_from(&truth);
    guess.alpha = 1.7;
    let fit = fit_wigner_cuts(&synth_cuts(&truth, None), &guess).unwrap();
    assert!(fit.values[5] >= 0.0);
    assert!(fit.get("n_th").unwrap() < 1e-6);
}

#[test]
fn wigner_cut_fit_noise_coverage() {
    let truth = WignerCutParams::theoretical(2.1, 0.10);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let truth_vec = [
        truth.a,
        truth.b,
        truth.c,
        truth.d,
        truth.alpha,
        truth.n_th,
        0.0,
        0.0,
        0.0,
    ];
    let mut inside = [0usize; 9];
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let data = synth_cuts(&truth, Some((&noise, &mut rng)));
        let fit = fit_wigner_cuts(&data, &guess_from(&truth)).unwrap();
        assert!(fit.converged);
        for k in 0..9 {
            if (fit.values[k] - truth_vec[k]).abs() <= 3.0 * fit.sigma[k] {
                inside[k] += 1;
            }
        }
    }
    for (k, n) in inside.iter().enumerate() {
        assert!(*n >= 95, "{}: {n}/100", CUT_PARAM_NAMES[k]);
    }
}

#[test]
fn wigner_cut_fit_needs_twenty_points() {
    let truth = WignerCutParams::theoretical(2.1, 0.10);
    let mut data = synth_cuts(&truth, None);
    data.thermal.0.truncate(19);
    data.thermal.1.truncate(19);
    assert!(fit_wigner_cuts(&data, &truth).is_err());
}

#[test]
fn readout_fidelity_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = Normal::new(0.0, 1.0).unwrap();
    let a: Vec<Complex64> = (0..20000)
        .map(|_| c(n.sample(&mut rng), n.sample(&mut rng)))
        .collect();
    let b: Vec<Complex64> = (0..20000)
        .map(|_| c(4.0 + n.sample(&mut rng), n.sample(&mut rng)))
        .collect();
    let f = readout_fidelity(&a, &b).unwrap();
    // Φ(2)
    assert!((f - 0.977_249_868).abs() < 0.005, "{f}");
    assert_eq!(readout_fidelity(&a, &a).unwrap(), 0.5);
    assert!(readout_fidelity(&a[..50], &b).is_err());
}

fn synthetic_telegraph(t_x: f64, dt: f64, n: usize, rng: &mut ChaCha8Rng) -> TelegraphTrace {
    let p_flip = 0.5 * (1.0 - (-dt / t_x).exp());
    let mut s = if rng.random::<bool>() { 1i8 } else { -1 };
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(s);
        if rng.random::<f64>() < p_flip {
            s = -s;
        }
    }
    TelegraphTrace::new((0..n).map(|k| k as f64 * dt).collect(), values, 0.0).unwrap()
}

#[test]
fn dwell_estimator_coverage() {
    let t_x = 10e-3;
    let mut covered = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = synthetic_telegraph(t_x, 1e-4, 10_000, &mut rng);
        let est = dwell_estimator(&trace).unwrap();
        if !est.lower_bound_only && est.ci_low <= t_x && t_x <= est.ci_high {
            covered += 1;
        }
    }
    assert!(covered >= 90, "{covered}");
}

#[test]
fn constant_trace_gives_lower_bound() {
    let trace = TelegraphTrace::new(
        (0..1000).map(|k| k as f64 * 1e-3).collect(),
        vec![1; 1000],
        0.0,
    )
    .unwrap();
    let est = dwell_estimator(&trace).unwrap();
    assert!(est.lower_bound_only);
    assert!(est.ci_high.is_infinite());
    assert!((est.t_x - 1.0 / (2.0 * 20f64.ln())).abs() < 1e-9);
}

#[test]
fn poisson_limits() {
    assert!((poisson_upper_limit(0) - 20f64.ln()).abs() < 1e-9);
    // χ²-quantile identity: upper limit for k=1 solves e^{−μ}(1+μ) = 0.05
    let mu = poisson_upper_limit(1);
    assert!(((-mu).exp() * (1.0 + mu) - 0.05).abs() < 1e-12);
    assert!((mu - 4.743_864_518).abs() < 1e-6);
}

#[test]
fn device_scale_trace_duration() {
    assert!((required_trace_duration(15.0, 50) - 1500.0).abs() < 1e-9);
}

#[test]
fn telegraph_rejects_bad_values() {
    assert!(TelegraphTrace::new(vec![0.0, 1.0], vec![1, 0], 0.0).is_err());
    assert!(TelegraphTrace::new(vec![0.0, 0.0], vec![1, 1], 0.0).is_err());
}

#[test]
fn fit_results_serialize() {
    let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
    let y: Vec<f64> = t.iter().map(|x| (-x / 5.0).exp()).collect();
    let fit = fit_exponential(&t, &y).unwrap();
    let back: FitResult = serde_json::from_str(&serde_json::to_string(&fit).unwrap()).unwrap();
    assert_eq!(back, fit);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wigner_is_bounded(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(8, &mut rng);
        let w = wigner_point(&rho, c(re, im)).unwrap();
        prop_assert!(w.abs() <= 2.0 / PI + 1e-10);
    }

    #[test]
    fn observables_stay_in_range(seed in any::<u64>(), r in 0.5f64..3.0, th in -3.1f64..3.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(12, &mut rng);
        let obs = cat_observables(&rho, Complex64::from_polar(r, th)).unwrap();
        prop_assert!(obs.z.abs() <= 1.0 + 1e-6);
        prop_assert!(obs.x.abs() <= 1.0 + 1e-6);
        prop_assert_eq!(obs.x, obs.parity);
    }

    #[test]
    fn projector_is_hermitian_and_idempotent_on_low_levels(th in -3.1f64..3.1) {
        let n = 60;
        let p = half_space_projector(th, n);
        prop_assert!(cmax(&(&p - p.adjoint())) < 1e-14);
        // truncation only spoils the top of the space
        let p2 = &p * &p;
        let k = 10;
        let err = cmax(&(p2.view((0, 0), (k, k)) - p.view((0, 0), (k, k))));
        prop_assert!(err < 0.03, "{}", err);
    }

    #[test]
    fn readout_fidelity_in_range(seed in any::<u64>(), shift in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<Complex64> = (0..200).map(|_| c(n.sample(&mut rng), n.sample(&mut rng))).collect();
        let b: Vec<Complex64> = (0..200).map(|_| c(shift + n.sample(&mut rng), n.sample(&mut rng))).collect();
        let f = readout_fidelity(&a, &b).unwrap();
        prop_assert!((0.5..=1.0).contains(&f));
    }

    #[test]
    fn poisson_limit_increases(k in 0usize..60) {
        prop_assert!(poisson_upper_limit(k + 1) > poisson_upper_limit(k));
        prop_assert!(poisson_upper_limit(k) > k as f64);
    }
}
