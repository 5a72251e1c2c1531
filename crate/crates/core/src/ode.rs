//! Adaptive Dormand–Prince 5(4) integrator on complex state vectors.

use crate::error::{Error, Result};
use crate::scalar::{abs2, cr, real, to_f64, Real, C};

pub trait OdeSystem<T: Real> {
    fn rhs(&mut self, t: T, y: &[C<T>], dy: &mut [C<T>]);
}

impl<T: Real, F: FnMut(T, &[C<T>], &mut [C<T>])> OdeSystem<T> for F {
    fn rhs(&mut self, t: T, y: &[C<T>], dy: &mut [C<T>]) {
        self(t, y, dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions<T: Real> {
    pub rtol: T,
    pub atol: T,
    pub h_init: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        OdeOptions {
            rtol: real(1e-8),
            atol: real(1e-10),
            h_init: None,
            h_max: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const CN: [f64; 6] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0];

/// Stepper holding the current point, the previous accepted point and the FSAL derivative.
pub struct Dopri<T: Real> {
    opts: OdeOptions<T>,
    t: T,
    h: T,
    y: Vec<C<T>>,
    f: Vec<C<T>>,
    t_prev: T,
    y_prev: Vec<C<T>>,
    f_prev: Vec<C<T>>,
    k: [Vec<C<T>>; 6],
    tmp: Vec<C<T>>,
    y_new: Vec<C<T>>,
    f_new: Vec<C<T>>,
    stats: OdeStats,
}

impl<T: Real> Dopri<T> {
    pub fn new<S: OdeSystem<T>>(sys: &mut S, t0: T, y0: &[C<T>], opts: OdeOptions<T>) -> Self {
        let n = y0.len();
        let z = vec![cr(T::zero()); n];
        let mut s = Dopri {
            opts,
            t: t0,
            h: T::zero(),
            y: y0.to_vec(),
            f: z.clone(),
            t_prev: t0,
            y_prev: y0.to_vec(),
            f_prev: z.clone(),
            k: [
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
                z.clone(),
            ],
            tmp: z.clone(),
            y_new: z.clone(),
            f_new: z,
            stats: OdeStats::default(),
        };
        sys.rhs(t0, &s.y, &mut s.f);
        s.stats.rhs_evals += 1;
        s.f_prev.copy_from_slice(&s.f);
        s
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn y(&self) -> &[C<T>] {
        &self.y
    }

    pub fn stats(&self) -> OdeStats {
        self.stats
    }

    /// Step size proposed for the next step.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn t_prev(&self) -> T {
        self.t_prev
    }

    /// Replaces the state (after a jump or kick), keeping the step-size estimate.
    pub fn reset<S: OdeSystem<T>>(&mut self, sys: &mut S, t: T, y: &[C<T>]) {
        self.t = t;
        self.t_prev = t;
        self.y.copy_from_slice(y);
        self.y_prev.copy_from_slice(y);
        sys.rhs(t, &self.y, &mut self.f);
        self.stats.rhs_evals += 1;
        self.f_prev.copy_from_slice(&self.f);
    }

    fn weighted_norm(&self, v: &[C<T>], y: &[C<T>], y2: Option<&[C<T>]>) -> T {
        let n = v.len().max(1);
        let mut acc = T::zero();
        for i in 0..v.len() {
            let mut sc = abs2(y[i]).sqrt();
            if let Some(y2) = y2 {
                sc = sc.max(abs2(y2[i]).sqrt());
            }
            let w = self.opts.atol + self.opts.rtol * sc;
            acc += abs2(v[i]) / (w * w);
        }
        (acc / real(n as f64)).sqrt()
    }

    fn initial_step<S: OdeSystem<T>>(&mut self, sys: &mut S, span: T) -> T {
        if let Some(h) = self.opts.h_init {
            return h;
        }
        let d0 = self.weighted_norm(&self.y, &self.y, None);
        let d1 = self.weighted_norm(&self.f, &self.y, None);
        let small = real::<T>(1e-5);
        let h0 = if d0 < small || d1 < small {
            span * real(1e-6)
        } else {
            real::<T>(0.01) * d0 / d1
        };
        let h0 = h0.min(span);
        for i in 0..self.y.len() {
            self.tmp[i] = self.y[i] + self.f[i] * cr(h0);
        }
        let mut f1 = vec![cr(T::zero()); self.y.len()];
        sys.rhs(self.t + h0, &self.tmp, &mut f1);
        self.stats.rhs_evals += 1;
        for i in 0..f1.len() {
            f1[i] -= self.f[i];
        }
        let d2 = self.weighted_norm(&f1, &self.y, None) / h0;
        let m = d1.max(d2);
        let h1 = if m <= real(1e-15) {
            (h0 * real(1e-3)).max(real::<T>(1e-6) * span)
        } else {
            (real::<T>(0.01) / m).powf(real(0.2))
        };
        (real::<T>(100.0) * h0).min(h1).min(span)
    }

    fn stage<S: OdeSystem<T>>(&mut self, sys: &mut S, h: T, row: &[f64], stage: usize) {
        let n = self.y.len();
        for i in 0..n {
            let mut acc = self.f[i] * cr(real::<T>(row[0]));
            for (j, a) in row.iter().enumerate().skip(1) {
                if *a != 0.0 {
                    acc += self.k[j][i] * cr(real::<T>(*a));
                }
            }
            self.tmp[i] = self.y[i] + acc * cr(h);
        }
        let tt = self.t + real::<T>(CN[stage]) * h;
        let mut out = std::mem::take(&mut self.k[stage]);
        sys.rhs(tt, &self.tmp, &mut out);
        self.k[stage] = out;
        self.stats.rhs_evals += 1;
    }

    /// Advances by one accepted step, never past `t_limit`.
    ///
    /// `guard(y_old, y_new)` may veto an otherwise accepted step, which then halves `h`.
    pub fn step_guarded<S, G>(&mut self, sys: &mut S, t_limit: T, guard: &mut G) -> Result<()>
    where
        S: OdeSystem<T>,
        G: FnMut(&[C<T>], &[C<T>]) -> bool,
    {
        let remaining = t_limit - self.t;
        if remaining <= T::zero() {
            return Ok(());
        }
        if self.h <= T::zero() {
            self.h = self.initial_step(sys, remaining);
        }
        if let Some(hm) = self.opts.h_max {
            self.h = self.h.min(hm);
        }
        let h_min = real::<T>(1e-13) * self.t.abs().max(t_limit.abs());
        let n = self.y.len();
        loop {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::Numerical(format!(
                    "step budget exhausted at t = {:e}",
                    to_f64(self.t)
                )));
            }
            let mut h = self.h;
            let last = h >= remaining * real(1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h < h_min {
                let norm = self.y.iter().fold(T::zero(), |a, z| a + abs2(*z)).sqrt();
                return Err(Error::StepUnderflow {
                    t: to_f64(self.t),
                    norm: to_f64(norm),
                });
            }
            self.stage(sys, h, &A2, 1);
            self.stage(sys, h, &A3, 2);
            self.stage(sys, h, &A4, 3);
            self.stage(sys, h, &A5, 4);
            self.stage(sys, h, &A6, 5);
            for i in 0..n {
                let mut acc = self.f[i] * cr(real::<T>(B[0]));
                for j in 2..6 {
                    acc += self.k[j][i] * cr(real::<T>(B[j]));
                }
                self.y_new[i] = self.y[i] + acc * cr(h);
            }
            let t_new = if last { t_limit } else { self.t + h };
            sys.rhs(t_new, &self.y_new, &mut self.f_new);
            self.stats.rhs_evals += 1;
            for i in 0..n {
                let mut e = self.f[i] * cr(real::<T>(E[0]));
                for j in 2..6 {
                    e += self.k[j][i] * cr(real::<T>(E[j]));
                }
                e += self.f_new[i] * cr(real::<T>(E[6]));
                self.tmp[i] = e * cr(h);
            }
            let err = self.weighted_norm(&self.tmp, &self.y, Some(&self.y_new));
            let err_f = to_f64(err);
            if !err_f.is_finite() {
                self.h = h * real(0.2);
                self.stats.rejected += 1;
                continue;
            }
            if err_f <= 1.0 {
                if !guard(&self.y, &self.y_new) {
                    self.h = h * real(0.5);
                    self.stats.rejected += 1;
                    continue;
                }
                let fac = if err_f == 0.0 {
                    10.0
                } else {
                    (0.9 * err_f.powf(-0.2)).clamp(0.2, 10.0)
                };
                std::mem::swap(&mut self.y_prev, &mut self.y);
                std::mem::swap(&mut self.f_prev, &mut self.f);
                std::mem::swap(&mut self.y, &mut self.y_new);
                std::mem::swap(&mut self.f, &mut self.f_new);
                self.t_prev = self.t;
                self.t = t_new;
                if !last || fac < 1.0 {
                    self.h = h * real(fac);
                } else {
                    self.h = self.h.max(h * real(fac));
                }
                self.stats.accepted += 1;
                return Ok(());
            }
            let fac = (0.9 * err_f.powf(-0.2)).clamp(0.2, 1.0);
            self.h = h * real(fac);
            self.stats.rejected += 1;
        }
    }

    pub fn step<S: OdeSystem<T>>(&mut self, sys: &mut S, t_limit: T) -> Result<()> {
        self.step_guarded(sys, t_limit, &mut |_: &[C<T>], _: &[C<T>]| true)
    }

    /// Integrates until exactly `t_end`.
    pub fn advance_to<S: OdeSystem<T>>(&mut self, sys: &mut S, t_end: T) -> Result<()> {
        while self.t < t_end {
            self.step(sys, t_end)?;
        }
        Ok(())
    }

    /// Cubic Hermite interpolation inside the last accepted step.
    pub fn interpolate(&self, t: T, out: &mut [C<T>]) {
        let h = self.t - self.t_prev;
        if h <= T::zero() {
            out.copy_from_slice(&self.y);
            return;
        }
        let s = (t - self.t_prev) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = real::<T>(2.0);
        let three = real::<T>(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        for i in 0..out.len() {
            out[i] = self.y_prev[i] * cr(h00)
                + self.f_prev[i] * cr(h10 * h)
                + self.y[i] * cr(h01)
                + self.f[i] * cr(h11 * h);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn harmonic_rotation_accuracy() {
        let mut sys = |_t: f64, y: &[Complex<f64>], dy: &mut [Complex<f64>]| {
            dy[0] = Complex::new(0.0, -2.0) * y[0] - 0.1 * y[0];
        };
        let y0 = [Complex::new(1.0, 0.0)];
        let mut st = Dopri::new(&mut sys, 0.0, &y0, OdeOptions::default());
        st.advance_to(&mut sys, 10.0).unwrap();
        let exact = (Complex::new(-0.1, -2.0) * 10.0).exp();
        assert!((st.y()[0] - exact).norm() < 1e-7);
        assert_eq!(st.t(), 10.0);
    }

    #[test]
    fn hermite_interpolant_is_accurate_inside_steps() {
        let mut sys = |_t: f64, y: &[Complex<f64>], dy: &mut [Complex<f64>]| dy[0] = -y[0];
        let mut st = Dopri::new(
            &mut sys,
            0.0,
            &[Complex::new(1.0, 0.0)],
            OdeOptions::default(),
        );
        st.step(&mut sys, 1.0).unwrap();
        let tm = 0.5 * (st.t_prev() + st.t());
        let mut out = [Complex::new(0.0, 0.0)];
        st.interpolate(tm, &mut out);
        assert!((out[0].re - (-tm).exp()).abs() < 1e-6);
    }

    #[test]
    fn underflow_is_reported() {
        let mut sys = |_t: f64, y: &[Complex<f64>], dy: &mut [Complex<f64>]| dy[0] = y[0] * y[0];
        let mut st = Dopri::new(
            &mut sys,
            0.0,
            &[Complex::new(1.0, 0.0)],
            OdeOptions::default(),
        );
        let r = st.advance_to(&mut sys, 2.0);
        assert!(
            matches!(
                r,
                Err(Error::StepUnderflow { .. }) | Err(Error::Numerical(_))
            ),
            "{r:?}"
        );
    }
}
