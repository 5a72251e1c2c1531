use num_complex::Complex64;

use crate::error::{Error, Result};

/// `(P(A | A) + P(B | B)) / 2` with the best threshold on the quadrature joining the two sample means.
pub fn readout_fidelity(samples_a: &[Complex64], samples_b: &[Complex64]) -> Result<f64> {
    const MIN: usize = 100;
    if samples_a.len() < MIN || samples_b.len() < MIN {
        return Err(Error::InsufficientData(format!(
            "readout fidelity needs at least {MIN} samples per class"
        )));
    }
    let mean = |s: &[Complex64]| s.iter().sum::<Complex64>() / s.len() as f64;
    let sep = mean(samples_b) - mean(samples_a);
    let dir = if sep.norm() > 0.0 {
        sep / sep.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let project = |z: &Complex64| (z * dir.conj()).re;
    let mut pts: Vec<(f64, bool)> = samples_a.iter().map(|z| (project(z), false)).collect();
    pts.extend(samples_b.iter().map(|z| (project(z), true)));
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (na, nb) = (samples_a.len() as f64, samples_b.len() as f64);
    // Threshold below everything: all classified as B.
    let mut a_left = 0.0;
    let mut b_left = 0.0;
    let mut best = 0.5;
    let mut k = 0;
    while k < pts.len() {
        let x = pts[k].0;
        while k < pts.len() && pts[k].0 == x {
            if pts[k].1 {
                b_left += 1.0;
            } else {
                a_left += 1.0;
            }
            k += 1;
        }
        let f = 0.5 * (a_left / na + (nb - b_left) / nb);
        best = f64::max(best, f64::max(f, 1.0 - f));
    }
    Ok(best)
}
