//! Synthetic breath-like recordings with known scaling structure.
//!
//! A user is a point in (cascade multiplier, Hurst exponent, AR filter)
//! space. Each recording multiplies a fractional Gaussian noise carrier by the
//! square root of a random binomial cascade, filters it through the user's AR
//! polynomial, and mixes in a little white noise.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{TimeSeries, DEFAULT_SAMPLE_RATE_HZ};
use crate::stats;

pub const DEFAULT_RECORDING_LEN: usize = 15_000;

/// Raw-unit offset and scale applied to generated recordings so they look
/// like velocity readings rather than already-standardized data.
const RAW_OFFSET: f64 = 2.0;
const RAW_SCALE: f64 = 0.4;

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for sub-stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// Binomial multiplicative cascade measure; each node's two children get
/// `a` and `1 - a` of its mass in random order.
pub fn binomial_measure(length: usize, a: f64, seed: u64) -> Result<Vec<f64>> {
    if !length.is_power_of_two() || length < 1 << 10 {
        return Err(Error::BadLength(length));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cascade multiplier {a} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measure = vec![1.0];
    while measure.len() < length {
        let mut next = Vec::with_capacity(measure.len() * 2);
        for m in &measure {
            let (l, r) = if rng.random::<bool>() {
                (a, 1.0 - a)
            } else {
                (1.0 - a, a)
            };
            next.push(m * l);
            next.push(m * r);
        }
        measure = next;
    }
    Ok(measure)
}

pub fn binomial_cascade(length: usize, a: f64, seed: u64) -> Result<TimeSeries> {
    let measure = binomial_measure(length, a, seed)?;
    TimeSeries::new(
        measure,
        DEFAULT_SAMPLE_RATE_HZ,
        "synthetic",
        format!("cascade-{seed}"),
    )
}

/// Fractional Gaussian noise by circulant embedding (Davies–Harte).
pub fn fgn_values(length: usize, hurst: f64, seed: u64) -> Result<Vec<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::BadHurst(hurst));
    }
    if length < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: length,
        });
    }
    let m = length;
    let big = 2 * m;
    let two_h = 2.0 * hurst;
    let gamma = |k: usize| {
        let k = k as f64;
        0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
    };
    let mut row: Vec<Complex<f64>> = (0..big)
        .map(|j| {
            let k = if j <= m { j } else { big - j };
            Complex::new(gamma(k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(big);
    fft.process(&mut row);
    let eigen: Vec<f64> = row.iter().map(|c| c.re.max(0.0)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let bf = big as f64;
    let mut z = vec![Complex::new(0.0, 0.0); big];
    z[0] = Complex::new((eigen[0] / bf).sqrt() * normal(), 0.0);
    z[m] = Complex::new((eigen[m] / bf).sqrt() * normal(), 0.0);
    for k in 1..m {
        let s = (eigen[k] / (2.0 * bf)).sqrt();
        let c = Complex::new(s * normal(), s * normal());
        z[k] = c;
        z[big - k] = c.conj();
    }
    fft.process(&mut z);
    Ok(z[..length].iter().map(|c| c.re).collect())
}

pub fn fgn(length: usize, hurst: f64, seed: u64) -> Result<TimeSeries> {
    TimeSeries::new(
        fgn_values(length, hurst, seed)?,
        DEFAULT_SAMPLE_RATE_HZ,
        "synthetic",
        format!("fgn-{seed}"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGeneratorSpec {
    pub user_id: String,
    pub cascade_multiplier: f64,
    pub hurst: f64,
    pub ar_phi: Vec<f64>,
    pub noise_mix: f64,
    /// Per-recording relative perturbation of the user's parameters.
    #[serde(default)]
    pub session_jitter: f64,
    pub seed: u64,
}

impl UserGeneratorSpec {
    fn validate(&self) -> Result<()> {
        let ok = self.cascade_multiplier > 0.5
            && self.cascade_multiplier < 0.95
            && self.hurst > 0.0
            && self.hurst < 1.0
            && (0.0..=1.0).contains(&self.noise_mix)
            && self.session_jitter >= 0.0
            && self.ar_phi.iter().all(|p| p.is_finite())
            && self.ar_phi.iter().map(|p| p.abs()).sum::<f64>() < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid generator spec for {}",
                self.user_id
            )))
        }
    }
}

fn standardize(values: &mut [f64]) {
    let mu = stats::mean(values);
    let sd = stats::std_dev(values);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    values.iter_mut().for_each(|v| *v = (*v - mu) / sd);
}

/// Recording `index` of the user, `length` samples in raw units.
pub fn synth_recording(spec: &UserGeneratorSpec, length: usize, index: usize) -> Result<TimeSeries> {
    spec.validate()?;
    let seed = derive_seed(spec.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |x: f64| {
        let e: f64 = rng.sample(StandardNormal);
        x * (1.0 + spec.session_jitter * e)
    };
    let a = jitter(spec.cascade_multiplier - 0.5).clamp(0.01, 0.44) + 0.5;
    let hurst = jitter(spec.hurst).clamp(0.05, 0.95);
    let phi: Vec<f64> = spec.ar_phi.iter().map(|&p| jitter(p)).collect();

    let padded = length.next_power_of_two().max(1 << 10);
    let measure = binomial_measure(padded, a, derive_seed(seed, 1))?;
    let carrier = fgn_values(padded, hurst, derive_seed(seed, 2))?;
    let scale = padded as f64;
    let mut x: Vec<f64> = carrier
        .iter()
        .zip(&measure)
        .map(|(g, m)| g * (m * scale).sqrt())
        .collect();

    let mut y = vec![0.0; padded];
    for t in 0..padded {
        let mut v = x[t];
        for (k, p) in phi.iter().enumerate() {
            if t > k {
                v += p * y[t - k - 1];
            }
        }
        y[t] = v;
    }
    standardize(&mut y);

    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let lambda = spec.noise_mix;
    for (xv, yv) in x.iter_mut().zip(&y) {
        let w: f64 = noise_rng.sample(StandardNormal);
        *xv = (1.0 - lambda) * yv + lambda * w;
    }
    x.truncate(length);
    let values = x.into_iter().map(|v| RAW_OFFSET + RAW_SCALE * v).collect();
    TimeSeries::new(
        values,
        DEFAULT_SAMPLE_RATE_HZ,
        spec.user_id.clone(),
        format!("rec{index:02}"),
    )
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_users: usize,
    pub recordings_per_user: usize,
    pub length: usize,
    /// Width of the parameter region the users are spread over, in (0, 1].
    pub spacing: f64,
    pub noise_mix: f64,
    pub session_jitter: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_users: 15,
            recordings_per_user: 10,
            length: DEFAULT_RECORDING_LEN,
            spacing: 1.0,
            noise_mix: 0.1,
            session_jitter: 0.0,
            seed: 7,
        }
    }
}

impl CohortSpec {
    /// User parameters on a Halton low-discrepancy set.
    pub fn users(&self) -> Vec<UserGeneratorSpec> {
        let s = self.spacing.clamp(0.0, 1.0);
        (0..self.n_users)
            .map(|i| {
                let k = i + 1;
                let centered = |base| halton(k, base) - 0.5;
                UserGeneratorSpec {
                    user_id: format!("user{i:02}"),
                    cascade_multiplier: 0.72 + 0.32 * s * centered(2),
                    hurst: 0.55 + 0.6 * s * centered(3),
                    ar_phi: vec![1.0 * s * centered(5), 0.5 * s * centered(7)],
                    noise_mix: self.noise_mix,
                    session_jitter: self.session_jitter,
                    seed: derive_seed(self.seed, i as u64),
                }
            })
            .collect()
    }

    pub fn recordings(&self) -> Result<Vec<TimeSeries>> {
        use rayon::prelude::*;
        let users = self.users();
        let jobs: Vec<(usize, usize)> = (0..users.len())
            .flat_map(|u| (0..self.recordings_per_user).map(move |r| (u, r)))
            .collect();
        jobs.par_iter()
            .map(|&(u, r)| synth_recording(&users[u], self.length, r))
            .collect()
    }

    /// Reproducibility manifest: the cohort parameters and every user spec.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "cohort": self,
            "users": self.users(),
        })
    }
}
