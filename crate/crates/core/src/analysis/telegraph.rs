use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary record of the inferred cat branch, sampled on a uniform clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelegraphTrace {
    pub times: Vec<f64>,
    pub values: Vec<i8>,
    pub threshold: f64,
}

impl TelegraphTrace {
    pub fn new(times: Vec<f64>, values: Vec<i8>, threshold: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidDims(
                "telegraph times and values differ in length".into(),
            ));
        }
        if values.iter().any(|v| *v != 1 && *v != -1) {
            return Err(Error::InvalidState("telegraph values must be ±1".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("telegraph times must increase".into()));
        }
        Ok(TelegraphTrace {
            times,
            values,
            threshold,
        })
    }

    pub fn switches(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Observed duration, one sample period per sample.
    pub fn exposure(&self) -> f64 {
        match self.times.len() {
            0 => 0.0,
            1 => 0.0,
            n => (self.times[n - 1] - self.times[0]) * n as f64 / (n - 1) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellEstimate {
    /// Correlation time of the ±1 signal; the switching rate per direction is `1/(2 T_X)`.
    pub t_x: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub events: usize,
    pub exposure: f64,
    /// Too few switches for an estimate; `t_x` and `ci_low` hold a 95% lower bound and `ci_high` is infinite.
    pub lower_bound_only: bool,
}

pub const MIN_DWELL_EVENTS: usize = 20;
const Z95: f64 = 1.959963984540054;

/// Upper end of the one-sided 95% Poisson interval for `k` observed events.
pub fn poisson_upper_limit(k: usize) -> f64 {
    let cdf = |mu: f64| {
        let mut term = (-mu).exp();
        let mut acc = term;
        for j in 1..=k {
            term *= mu / j as f64;
            acc += term;
        }
        acc
    };
    let (mut lo, mut hi) = (0.0, 10.0 + 4.0 * k as f64);
    while cdf(hi) > 0.05 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) > 0.05 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exponential dwell-time maximum likelihood with the trailing dwell right-censored.
///
/// Every switch closes one dwell, so the rate estimate is `K / exposure` whatever the
/// censoring of the first and last dwells. The interval is the Fisher one on `ln γ`.
pub fn dwell_estimator(trace: &TelegraphTrace) -> Result<DwellEstimate> {
    dwell_from_counts(trace.switches(), trace.exposure())
}

/// Pooled estimate from `events` switches over a total observed duration `exposure`.
pub fn dwell_from_counts(events: usize, exposure: f64) -> Result<DwellEstimate> {
    if !(exposure > 0.0) {
        return Err(Error::InsufficientData(
            "telegraph trace needs at least two samples".into(),
        ));
    }
    let k = events;
    if k < MIN_DWELL_EVENTS {
        let bound = exposure / (2.0 * poisson_upper_limit(k));
        return Ok(DwellEstimate {
            t_x: bound,
            ci_low: bound,
            ci_high: f64::INFINITY,
            events: k,
            exposure,
            lower_bound_only: true,
        });
    }
    let gamma = k as f64 / exposure;
    let spread = (Z95 / (k as f64).sqrt()).exp();
    Ok(DwellEstimate {
        t_x: 1.0 / (2.0 * gamma),
        ci_low: 1.0 / (2.0 * gamma * spread),
        ci_high: spread / (2.0 * gamma),
        events: k,
        exposure,
        lower_bound_only: false,
    })
}

/// `⟨v_i v_{i+k}⟩` for lags `0..=max_lag` samples.
pub fn autocorrelation(trace: &TelegraphTrace, max_lag: usize) -> Vec<f64> {
    let v = &trace.values;
    (0..=max_lag.min(v.len().saturating_sub(1)))
        .map(|k| {
            let n = v.len() - k;
            let s: i64 = (0..n).map(|i| (v[i] * v[i + k]) as i64).sum();
            s as f64 / n as f64
        })
        .collect()
}

/// Trace length expected to contain `events` switches when the correlation time is `t_x`.
pub fn required_trace_duration(t_x: f64, events: usize) -> f64 {
    2.0 * t_x * events as f64
}

/// Correlation time from `ln C(τ) = −τ/T_X`, least squares through the origin over lags
/// up to `max_lag` samples with `C > 0.05`.
pub fn autocorrelation_time(trace: &TelegraphTrace, max_lag: usize) -> Result<f64> {
    let n = trace.times.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "telegraph trace needs at least two samples".into(),
        ));
    }
    let dt = trace.exposure() / n as f64;
    let ac = autocorrelation(trace, max_lag);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (k, c) in ac.iter().enumerate().skip(1) {
        if *c > 0.05 {
            let x = k as f64 * dt;
            sxx += x * x;
            sxy += x * c.ln();
        }
    }
    if !(sxy < 0.0) {
        return Err(Error::InsufficientData(
            "autocorrelation shows no decay over the lag window".into(),
        ));
    }
    Ok(-sxx / sxy)
}
