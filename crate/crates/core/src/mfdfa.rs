//! Multifractal detrended fluctuation analysis.
//!
//! The series is integrated into a profile, cut into non-overlapping windows
//! of each scale (taken from both ends so the tail is not ignored), detrended
//! per window with a least-squares polynomial, and the q-order averages of the
//! residual variance give the fluctuation functions `F_q(s)`. Their log-log
//! slopes are the generalized Hurst exponents `H(q)`, from which the mass
//! exponents `tau(q) = q H(q) - 1` and the singularity spectrum
//! `(alpha, f(alpha))` follow by a numerical Legendre transform.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Spectra narrower than this are treated as monofractal noise.
pub const DEFAULT_MIN_WIDTH: f64 = 0.05;

const FOLD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfdfaConfig {
    /// Strictly increasing moment orders. `q = 0` uses the logarithmic average.
    pub q_values: Vec<f64>,
    pub min_scale: usize,
    pub max_scale_fraction: f64,
    pub n_scales: usize,
    pub detrend_order: usize,
}

impl Default for MfdfaConfig {
    fn default() -> Self {
        MfdfaConfig {
            q_values: q_grid(-5.0, 5.0, 0.25),
            min_scale: 10,
            max_scale_fraction: 0.25,
            n_scales: 20,
            detrend_order: 3,
        }
    }
}

/// Evenly spaced q values from `lo` to `hi` inclusive.
pub fn q_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

impl MfdfaConfig {
    fn validate(&self, len: usize) -> Result<()> {
        if self.q_values.len() < 3 {
            return Err(Error::InvalidArgument("need at least 3 q values".into()));
        }
        if self.q_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "q values must be strictly increasing".into(),
            ));
        }
        if self.min_scale < self.detrend_order + 2 {
            return Err(Error::InvalidArgument(format!(
                "min_scale {} must be at least detrend_order + 2",
                self.min_scale
            )));
        }
        if len < 4 * self.min_scale {
            return Err(Error::TooShort {
                required: 4 * self.min_scale,
                actual: len,
            });
        }
        Ok(())
    }

    /// Log-spaced integer scales between `min_scale` and `floor(len * max_scale_fraction)`.
    pub fn scales(&self, len: usize) -> Result<Vec<usize>> {
        self.validate(len)?;
        let max_scale = (len as f64 * self.max_scale_fraction).floor() as usize;
        if max_scale <= self.min_scale {
            return Err(Error::DegenerateScaleRange(0));
        }
        let (lo, hi) = ((self.min_scale as f64).ln(), (max_scale as f64).ln());
        let n = self.n_scales.max(2);
        let mut scales: Vec<usize> = (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp().round() as usize)
            .map(|s| s.clamp(self.min_scale, max_scale))
            .collect();
        scales.dedup();
        if scales.len() < 4 {
            return Err(Error::DegenerateScaleRange(scales.len()));
        }
        Ok(scales)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdfaResult {
    pub q: Vec<f64>,
    pub scales: Vec<usize>,
    /// `fq[qi][si]` is `F_q(s)`.
    pub fq: Vec<Vec<f64>>,
    pub hq: Vec<f64>,
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f_alpha: Vec<f64>,
}

impl MfdfaResult {
    /// `H(q)` at the grid point nearest `q`.
    pub fn h_at(&self, q: f64) -> f64 {
        let i = self
            .q
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - q).abs().total_cmp(&(b.1 - q).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.hq[i]
    }

    pub fn features(&self) -> Result<SpectrumFeatures> {
        spectrum_features(self)
    }

    /// CSV with one row per q: `q,h,tau,alpha,f_alpha`.
    pub fn write_curves_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", "h", "tau", "alpha", "f_alpha"])?;
        for i in 0..self.q.len() {
            w.write_record(&[
                self.q[i].to_string(),
                self.hq[i].to_string(),
                self.tau[i].to_string(),
                self.alpha[i].to_string(),
                self.f_alpha[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Orthonormal polynomial basis (degree `0..=order`) over `s` equally spaced
/// points mapped to [-1, 1], by modified Gram–Schmidt.
fn detrend_basis(s: usize, order: usize) -> Vec<Vec<f64>> {
    let half = (s as f64 - 1.0) / 2.0;
    let t: Vec<f64> = (0..s).map(|k| (k as f64 - half) / half).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for deg in 0..=order {
        let mut v: Vec<f64> = t.iter().map(|x| x.powi(deg as i32)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis
}

/// Mean squared residual of `y` after projecting out the basis.
fn residual_variance(y: &[f64], basis: &[Vec<f64>], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(y);
    for b in basis {
        let dot: f64 = scratch.iter().zip(b).map(|(x, y)| x * y).sum();
        scratch.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
    scratch.iter().map(|r| r * r).sum::<f64>() / y.len() as f64
}

/// Squared fluctuations of every window at scale `s`, both directions.
fn window_fluctuations(profile: &[f64], s: usize, order: usize) -> Vec<f64> {
    let n = profile.len();
    let count = n / s;
    let basis = detrend_basis(s, order);
    let mut scratch = Vec::with_capacity(s);
    let mut out = Vec::with_capacity(2 * count);
    for v in 0..count {
        out.push(residual_variance(&profile[v * s..(v + 1) * s], &basis, &mut scratch));
    }
    for v in 0..count {
        let end = n - v * s;
        out.push(residual_variance(&profile[end - s..end], &basis, &mut scratch));
    }
    out
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `ln F_q(s)` from the squared window fluctuations.
fn log_fluctuation(log_f2: &[f64], q: f64) -> f64 {
    let n = log_f2.len() as f64;
    if q.abs() < 1e-12 {
        0.5 * log_f2.iter().sum::<f64>() / n
    } else {
        (log_sum_exp(log_f2.iter().map(|l| 0.5 * q * l)) - n.ln()) / q
    }
}

/// Derivative of `y` with respect to `x` by central differences, one-sided at the ends.
fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect()
}

pub fn mfdfa(values: &[f64], config: &MfdfaConfig) -> Result<MfdfaResult> {
    crate::signal::check_samples(values, 2)?;
    let scales = config.scales(values.len())?;

    let mu = stats::mean(values);
    let mut acc = 0.0;
    let profile: Vec<f64> = values
        .iter()
        .map(|v| {
            acc += v - mu;
            acc
        })
        .collect();

    // Per scale: log of the strictly positive window fluctuations.
    let mut kept_scales = Vec::with_capacity(scales.len());
    let mut log_f2_by_scale = Vec::with_capacity(scales.len());
    for &s in &scales {
        let logs: Vec<f64> = window_fluctuations(&profile, s, config.detrend_order)
            .into_iter()
            .filter(|f2| *f2 > 0.0 && f2.is_finite())
            .map(f64::ln)
            .collect();
        if !logs.is_empty() {
            kept_scales.push(s);
            log_f2_by_scale.push(logs);
        }
    }
    if kept_scales.len() < 4 {
        return Err(Error::DegenerateScaleRange(kept_scales.len()));
    }

    let log_s: Vec<f64> = kept_scales.iter().map(|&s| (s as f64).ln()).collect();
    let q = config.q_values.clone();
    let mut fq = Vec::with_capacity(q.len());
    let mut hq = Vec::with_capacity(q.len());
    for &qv in &q {
        let log_fq: Vec<f64> = log_f2_by_scale
            .iter()
            .map(|l| log_fluctuation(l, qv))
            .collect();
        hq.push(stats::ols(&log_s, &log_fq).0);
        fq.push(log_fq.into_iter().map(f64::exp).collect());
    }

    let tau: Vec<f64> = q.iter().zip(&hq).map(|(q, h)| q * h - 1.0).collect();
    let alpha = gradient(&q, &tau);
    let f_alpha = q
        .iter()
        .zip(&alpha)
        .zip(&tau)
        .map(|((q, a), t)| q * a - t)
        .collect();

    Ok(MfdfaResult {
        q,
        scales: kept_scales,
        fq,
        hq,
        tau,
        alpha,
        f_alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    NonConvex,
    WidthBelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVerdict {
    pub valid: bool,
    pub reason: Option<Rejection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFeatures {
    /// Singularity strength at the spectrum maximum.
    pub beta: f64,
    /// Spectrum width, `max(alpha) - min(alpha)`.
    pub omega: f64,
    /// Signed branch-width imbalance `((a_max - beta) - (beta - a_min)) / omega`.
    pub epsilon: f64,
    pub valid: bool,
    pub rejection_reason: Option<Rejection>,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn alpha_range(alpha: &[f64]) -> (f64, f64) {
    alpha
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
            (lo.min(a), hi.max(a))
        })
}

/// Validity of a spectrum given as points in curve order (q order).
///
/// The curve must fall away monotonically on both sides of its peak; any
/// re-increase on a branch is a fold.
pub fn validate_curve(alpha: &[f64], f_alpha: &[f64], min_width: f64) -> SpectrumVerdict {
    let peak = argmax(f_alpha);
    let right_ok = f_alpha[peak..]
        .windows(2)
        .all(|w| w[1] <= w[0] + FOLD_TOLERANCE);
    let left_ok = f_alpha[..=peak]
        .windows(2)
        .all(|w| w[0] <= w[1] + FOLD_TOLERANCE);
    if !(left_ok && right_ok) {
        return SpectrumVerdict {
            valid: false,
            reason: Some(Rejection::NonConvex),
        };
    }
    let (lo, hi) = alpha_range(alpha);
    if hi - lo < min_width {
        return SpectrumVerdict {
            valid: false,
            reason: Some(Rejection::WidthBelowThreshold),
        };
    }
    SpectrumVerdict {
        valid: true,
        reason: None,
    }
}

pub fn validate_spectrum(result: &MfdfaResult, min_width: f64) -> SpectrumVerdict {
    validate_curve(&result.alpha, &result.f_alpha, min_width)
}

/// `(beta, omega, epsilon)` of a spectrum curve plus its validity at the default width.
pub fn curve_features(alpha: &[f64], f_alpha: &[f64]) -> Result<SpectrumFeatures> {
    if alpha.len() < 5 || alpha.len() != f_alpha.len() {
        return Err(Error::EmptySpectrum);
    }
    let beta = alpha[argmax(f_alpha)];
    let (lo, hi) = alpha_range(alpha);
    let omega = hi - lo;
    let epsilon = if omega > 0.0 {
        ((hi - beta) - (beta - lo)) / omega
    } else {
        0.0
    };
    let verdict = validate_curve(alpha, f_alpha, DEFAULT_MIN_WIDTH);
    Ok(SpectrumFeatures {
        beta,
        omega,
        epsilon,
        valid: verdict.valid,
        rejection_reason: verdict.reason,
    })
}

pub fn spectrum_features(result: &MfdfaResult) -> Result<SpectrumFeatures> {
    curve_features(&result.alpha, &result.f_alpha)
}
