//! Recording ingest, z-score normalization, overlapping segmentation and
//! the shuffle surrogate used to separate correlation-induced multifractality
//! from distribution effects.
//!
//! Recordings are stored one per CSV file under `dataset/<user_id>/<recording_id>.csv`.
//! The first line is a header of the form `sample_rate=<hz>`, followed by one
//! sample per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub sample_rate_hz: f64,
    pub user_id: String,
    pub recording_id: String,
    pub normalized: bool,
}

impl TimeSeries {
    pub fn new(
        values: Vec<f64>,
        sample_rate_hz: f64,
        user_id: impl Into<String>,
        recording_id: impl Into<String>,
    ) -> Result<Self> {
        let series = TimeSeries {
            values,
            sample_rate_hz,
            user_id: user_id.into(),
            recording_id: recording_id.into(),
            normalized: false,
        };
        series.validate()?;
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(series)
    }

    /// Unlabelled series at the nominal sample rate.
    pub fn anonymous(values: Vec<f64>) -> Result<Self> {
        Self::new(values, DEFAULT_SAMPLE_RATE_HZ, "", "")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        check_samples(&self.values, 2)
    }
}

pub(crate) fn check_samples(values: &[f64], min_len: usize) -> Result<()> {
    if values.len() < min_len {
        return Err(Error::TooShort {
            required: min_len,
            actual: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub values: Vec<f64>,
    pub parent_recording: String,
    pub segment_index: usize,
    pub user_id: String,
}

/// Standardize to zero mean and unit population standard deviation.
pub fn normalize_zscore(series: &TimeSeries) -> Result<TimeSeries> {
    series.validate()?;
    let mu = stats::mean(&series.values);
    let sigma = stats::std_dev(&series.values);
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut values: Vec<f64> = series.values.iter().map(|v| (v - mu) / sigma).collect();
    // A second centering pass removes the rounding residue of the first.
    let residual = stats::mean(&values);
    values.iter_mut().for_each(|v| *v -= residual);
    Ok(TimeSeries {
        values,
        sample_rate_hz: series.sample_rate_hz,
        user_id: series.user_id.clone(),
        recording_id: series.recording_id.clone(),
        normalized: true,
    })
}

/// Number of full windows of `window` samples stepping by `slide`.
pub fn segment_count(len: usize, window: usize, slide: usize) -> usize {
    if window == 0 || slide == 0 || window > len {
        return 0;
    }
    (len - window) / slide + 1
}

/// Cut `series` into equal-length windows; trailing samples past the last full
/// window are dropped.
pub fn segment(series: &TimeSeries, window: usize, slide: usize) -> Result<Vec<Segment>> {
    if window == 0 || slide == 0 {
        return Err(Error::InvalidArgument(
            "window and slide must be positive".into(),
        ));
    }
    if window > series.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: series.len(),
        });
    }
    let count = segment_count(series.len(), window, slide);
    Ok((0..count)
        .map(|k| Segment {
            values: series.values[k * slide..k * slide + window].to_vec(),
            parent_recording: series.recording_id.clone(),
            segment_index: k,
            user_id: series.user_id.clone(),
        })
        .collect())
}

/// Default window (a tenth of the recording) and slide (half a window).
pub fn default_window(len: usize) -> (usize, usize) {
    let window = len / 10;
    (window, (window / 2).max(1))
}

/// Segment with the default layout, or with a fixed window when given.
///
/// Recordings shorter than two windows are rejected.
pub fn segment_recording(series: &TimeSeries, fixed_window: Option<usize>) -> Result<Vec<Segment>> {
    let (window, slide) = match fixed_window {
        Some(w) => (w, (w / 2).max(1)),
        None => default_window(series.len()),
    };
    if window == 0 || series.len() < 2 * window {
        return Err(Error::TooShort {
            required: 2 * window.max(1),
            actual: series.len(),
        });
    }
    segment(series, window, slide)
}

/// Random permutation of the samples, deterministic in `seed`.
pub fn shuffle_surrogate(series: &TimeSeries, seed: u64) -> Result<TimeSeries> {
    series.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = series.values.clone();
    values.shuffle(&mut rng);
    Ok(TimeSeries {
        values,
        ..series.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a Gaussian with the sample's
/// own mean and standard deviation, with the asymptotic p-value.
pub fn ks_normality(series: &TimeSeries) -> Result<KsResult> {
    check_samples(&series.values, 8)?;
    let n = series.len();
    let mu = stats::mean(&series.values);
    let sigma = stats::sample_variance(&series.values).sqrt();
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut sorted = series.values.clone();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = stats::normal_cdf(x, mu, sigma);
            let upper = (i + 1) as f64 / nf - cdf;
            let lower = cdf - i as f64 / nf;
            upper.max(lower)
        })
        .fold(0.0_f64, f64::max)
        .clamp(0.0, 1.0);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(KsResult {
        statistic,
        p_value: stats::kolmogorov_sf(lambda),
    })
}

pub fn read_recording(
    path: &Path,
    user_id: impl Into<String>,
    recording_id: impl Into<String>,
) -> Result<TimeSeries> {
    let parse_err = |reason: String| Error::Parse {
        path: path.display().to_string(),
        reason,
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("empty file".into()))??;
    let rate = header
        .trim()
        .strip_prefix("sample_rate=")
        .ok_or_else(|| parse_err(format!("bad header {header:?}")))?
        .parse::<f64>()
        .map_err(|e| parse_err(e.to_string()))?;
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        values.push(
            trimmed
                .parse::<f64>()
                .map_err(|e| parse_err(format!("line {}: {e}", lineno + 2)))?,
        );
    }
    TimeSeries::new(values, rate, user_id, recording_id)
}

pub fn write_recording(path: &Path, series: &TimeSeries) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "sample_rate={}", series.sample_rate_hz)?;
    for v in &series.values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Load every `<user>/<recording>.csv` under `root`, sorted by user then recording.
pub fn read_dataset(root: &Path) -> Result<Vec<TimeSeries>> {
    let mut users: Vec<_> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    users.sort_by_key(|e| e.file_name());
    let mut out = Vec::new();
    for user in users {
        let user_id = user.file_name().to_string_lossy().into_owned();
        let mut files: Vec<_> = fs::read_dir(user.path())?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort_by_key(|e| e.file_name());
        for file in files {
            let path = file.path();
            let recording_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push(read_recording(&path, user_id.clone(), recording_id)?);
        }
    }
    Ok(out)
}

pub fn write_dataset(root: &Path, recordings: &[TimeSeries]) -> Result<()> {
    for rec in recordings {
        let path = root
            .join(&rec.user_id)
            .join(format!("{}.csv", rec.recording_id));
        write_recording(&path, rec)?;
    }
    Ok(())
}
