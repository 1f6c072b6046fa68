//! Per-segment feature extraction, the feature matrix, column filters,
//! importance-based selection and recording-grouped train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfdfa::{self, MfdfaConfig, Rejection};
use crate::signal::{self, Segment, TimeSeries};
use crate::stats;

/// Names of the per-segment features, in column order.
pub const FEATURE_NAMES: [&str; 11] = [
    "beta",
    "omega",
    "epsilon",
    "abs_sum_changes",
    "ar_coef_3",
    "ar_coef_4",
    "n_peaks_s1",
    "cwt_peaks_w1",
    "cwt_peaks_w5",
    "pacf_lag3",
    "kurtosis_g2",
];

pub const AR_ORDER: usize = 10;

pub fn abs_sum_changes(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Biased (1/N) autocovariance at lags `0..=max_lag`.
fn autocovariance(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let mu = stats::mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - mu).collect();
    (0..=max_lag)
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Levinson–Durbin recursion on autocovariances `r[0..=order]`.
///
/// Returns the order-`order` AR coefficients and the reflection coefficients
/// (partial autocorrelations) at lags `1..=order`.
fn levinson_durbin(r: &[f64], order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(r[0] > 0.0) {
        return Err(Error::SingularToeplitz);
    }
    let mut phi = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for k in 0..order {
        let acc: f64 = (0..k).map(|j| phi[j] * r[k - j]).sum();
        let kappa = (r[k + 1] - acc) / err;
        if !kappa.is_finite() {
            return Err(Error::SingularToeplitz);
        }
        let prev = phi.clone();
        phi[k] = kappa;
        for j in 0..k {
            phi[j] = prev[j] - kappa * prev[k - 1 - j];
        }
        err *= 1.0 - kappa * kappa;
        reflection.push(kappa);
        if !(err > 0.0) && k + 1 < order {
            return Err(Error::SingularToeplitz);
        }
    }
    Ok((phi, reflection))
}

/// Yule–Walker AR(`order`) coefficients, `phi[0]` being the lag-1 coefficient.
pub fn ar_coefficients(values: &[f64], order: usize) -> Result<Vec<f64>> {
    if values.len() <= order {
        return Err(Error::TooShort {
            required: order + 1,
            actual: values.len(),
        });
    }
    let r = autocovariance(values, order);
    Ok(levinson_durbin(&r, order)?.0)
}

/// Partial autocorrelation at `lag`.
pub fn pacf(values: &[f64], lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be positive".into()));
    }
    if values.len() <= lag + 1 {
        return Err(Error::TooShort {
            required: lag + 2,
            actual: values.len(),
        });
    }
    let r = autocovariance(values, lag);
    let (_, reflection) = levinson_durbin(&r, lag)?;
    Ok(reflection[lag - 1])
}

/// Points strictly greater than their `support` neighbours on each side.
pub fn count_peaks(values: &[f64], support: usize) -> usize {
    if support == 0 || values.len() < 2 * support + 1 {
        return 0;
    }
    (support..values.len() - support)
        .filter(|&i| {
            let x = values[i];
            values[i - support..i].iter().all(|v| x > *v)
                && values[i + 1..=i + support].iter().all(|v| x > *v)
        })
        .count()
}

/// Ricker (Mexican hat) wavelet of width `w` sampled on `|t| <= 10 w`.
pub fn ricker_kernel(width: f64) -> Vec<f64> {
    let half = (10.0 * width).floor() as i64;
    let norm = 2.0 / ((3.0 * width).sqrt() * std::f64::consts::PI.powf(0.25));
    (-half..=half)
        .map(|t| {
            let u = t as f64 / width;
            norm * (1.0 - u * u) * (-0.5 * u * u).exp()
        })
        .collect()
}

/// Number of positive strict local maxima in the Ricker-wavelet response.
///
/// The response is evaluated only where the kernel fully overlaps the signal.
pub fn cwt_peaks(values: &[f64], width: usize) -> usize {
    let kernel = ricker_kernel(width as f64);
    if values.len() < kernel.len() {
        return 0;
    }
    let response: Vec<f64> = values
        .windows(kernel.len())
        .map(|w| w.iter().zip(&kernel).map(|(a, b)| a * b).sum())
        .collect();
    response
        .windows(3)
        .filter(|w| w[1] > 0.0 && w[1] > w[0] && w[1] > w[2])
        .count()
}

/// Adjusted Fisher–Pearson excess kurtosis `G2`.
pub fn kurtosis_g2(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 4 {
        return Err(Error::TooShort {
            required: 4,
            actual: n,
        });
    }
    let mu = stats::mean(values);
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = (v - mu) * (v - mu);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n as f64;
    m4 /= n as f64;
    if m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let g2 = m4 / (m2 * m2) - 3.0;
    let nf = n as f64;
    Ok(((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: String,
    pub recording_id: String,
    pub segment_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extraction {
    Accepted(FeatureVector),
    Rejected(Rejection),
}

/// All named features of one segment, or its spectrum rejection.
pub fn extract_features(segment: &Segment, config: &MfdfaConfig) -> Result<Extraction> {
    let v = &segment.values;
    let result = mfdfa::mfdfa(v, config)?;
    let spectrum = mfdfa::spectrum_features(&result)?;
    if let Some(reason) = spectrum.rejection_reason {
        return Ok(Extraction::Rejected(reason));
    }
    let ar = ar_coefficients(v, AR_ORDER)?;
    let values = vec![
        spectrum.beta,
        spectrum.omega,
        spectrum.epsilon,
        abs_sum_changes(v),
        ar[2],
        ar[3],
        count_peaks(v, 1) as f64,
        cwt_peaks(v, 1) as f64,
        cwt_peaks(v, 5) as f64,
        pacf(v, 3)?,
        kurtosis_g2(v)?,
    ];
    Ok(Extraction::Accepted(FeatureVector {
        user_id: segment.user_id.clone(),
        recording_id: segment.parent_recording.clone(),
        segment_index: segment.segment_index,
        values,
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub segments: usize,
    pub rejected_non_convex: usize,
    pub rejected_narrow: usize,
}

/// Normalize, segment and featurize every recording in parallel.
pub fn extract_dataset(
    recordings: &[TimeSeries],
    config: &MfdfaConfig,
    fixed_window: Option<usize>,
) -> Result<(FeatureMatrix, ExtractionStats)> {
    let mut segments = Vec::new();
    for rec in recordings {
        let normalized = signal::normalize_zscore(rec)?;
        segments.extend(signal::segment_recording(&normalized, fixed_window)?);
    }
    let results: Vec<Extraction> = segments
        .par_iter()
        .map(|s| extract_features(s, config))
        .collect::<Result<_>>()?;
    let mut stats = ExtractionStats {
        segments: segments.len(),
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Extraction::Accepted(row) => rows.push(row),
            Extraction::Rejected(Rejection::NonConvex) => stats.rejected_non_convex += 1,
            Extraction::Rejected(Rejection::WidthBelowThreshold) => stats.rejected_narrow += 1,
        }
    }
    Ok((FeatureMatrix::new(default_names(), rows)?, stats))
}

pub fn default_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, rows: Vec<FeatureVector>) -> Result<Self> {
        let d = feature_names.len();
        for row in &rows {
            if row.values.len() != d {
                return Err(Error::LengthMismatch(row.values.len(), d));
            }
            if let Some(i) = row.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(FeatureMatrix {
            feature_names,
            rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    /// Distinct users in sorted order.
    pub fn users(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.user_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn rows_for(&self, user: &str) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.user_id == user)
                .cloned()
                .collect(),
        }
    }

    /// Column subset in the given order, rows unchanged.
    pub fn select_columns(&self, columns: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: columns
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureVector {
                    values: columns.iter().map(|&j| r.values[j]).collect(),
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn select_named(&self, names: &[String]) -> Result<FeatureMatrix> {
        let columns = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::MissingFeature(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&columns))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "user_id".to_string(),
            "recording_id".to_string(),
            "segment_index".to_string(),
        ];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.user_id.clone(),
                r.recording_id.clone(),
                r.segment_index.to_string(),
            ];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "user_id" {
            return Err(Error::Parse {
                path: "<features>".into(),
                reason: "expected user_id,recording_id,segment_index header".into(),
            });
        }
        let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let bad = |reason: String| Error::Parse {
                path: "<features>".into(),
                reason,
            };
            let segment_index = rec[2].parse().map_err(|e| bad(format!("{e}")))?;
            let values = rec
                .iter()
                .skip(3)
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureVector {
                user_id: rec[0].to_string(),
                recording_id: rec[1].to_string(),
                segment_index,
                values,
            });
        }
        FeatureMatrix::new(names, rows)
    }
}

/// Drop columns whose variance after min-max scaling is below `threshold`.
pub fn variance_filter(matrix: &FeatureMatrix, threshold: f64) -> Result<FeatureMatrix> {
    let keep: Vec<usize> = (0..matrix.n_features())
        .filter(|&j| {
            let col = matrix.column(j);
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            if !(hi > lo) {
                return false;
            }
            let scaled: Vec<f64> = col.iter().map(|v| (v - lo) / (hi - lo)).collect();
            stats::variance(&scaled) >= threshold
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::AllColumnsDropped);
    }
    Ok(matrix.select_columns(&keep))
}

/// Keep a column only if its absolute correlation with every earlier kept
/// column is at most `threshold`.
pub fn correlation_filter(matrix: &FeatureMatrix, threshold: f64) -> FeatureMatrix {
    let columns: Vec<Vec<f64>> = (0..matrix.n_features()).map(|j| matrix.column(j)).collect();
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..columns.len() {
        if keep
            .iter()
            .all(|&k| stats::pearson(&columns[k], &columns[j]).abs() <= threshold)
        {
            keep.push(j);
        }
    }
    matrix.select_columns(&keep)
}

/// Rank features by how many pairwise models place them in their own top
/// `per_model_top`, breaking ties by summed importance then by name.
pub fn select_top_features<'a, I>(
    feature_names: &[String],
    importances: I,
    per_model_top: usize,
    top_k: usize,
) -> Result<Vec<String>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let d = feature_names.len();
    let mut prevalence = vec![0usize; d];
    let mut total = vec![0.0; d];
    let mut models = 0;
    for imp in importances {
        if imp.len() != d {
            return Err(Error::LengthMismatch(imp.len(), d));
        }
        models += 1;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
        for &j in order.iter().take(per_model_top) {
            prevalence[j] += 1;
        }
        for j in 0..d {
            total[j] += imp[j];
        }
    }
    if models == 0 {
        return Err(Error::NoModels);
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        prevalence[b]
            .cmp(&prevalence[a])
            .then(total[b].total_cmp(&total[a]))
            .then(feature_names[a].cmp(&feature_names[b]))
    });
    Ok(order
        .into_iter()
        .take(top_k)
        .map(|j| feature_names[j].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

/// Per user, shuffle recordings and send the first `train_fraction` of them
/// (with all their segments) to the training side.
pub fn grouped_split(matrix: &FeatureMatrix, spec: &SplitSpec) -> Result<Split> {
    let mut recordings: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &matrix.rows {
        recordings
            .entry(&r.user_id)
            .or_default()
            .insert(&r.recording_id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_set: BTreeSet<(&str, &str)> = BTreeSet::new();
    for (user, recs) in &recordings {
        let n = recs.len();
        if n < 2 {
            return Err(Error::InsufficientRecordings {
                user: user.to_string(),
                count: n,
            });
        }
        let mut recs: Vec<&str> = recs.iter().copied().collect();
        recs.shuffle(&mut rng);
        let n_train = ((n as f64 * spec.train_fraction).round() as usize).clamp(1, n - 1);
        for rec in &recs[..n_train] {
            train_set.insert((user, rec));
        }
    }
    let (train, test): (Vec<FeatureVector>, Vec<FeatureVector>) = matrix
        .rows
        .iter()
        .cloned()
        .partition(|r| train_set.contains(&(r.user_id.as_str(), r.recording_id.as_str())));
    Ok(Split {
        train: FeatureMatrix {
            feature_names: matrix.feature_names.clone(),
            rows: train,
        },
        test: FeatureMatrix {
            feature_names: matrix.feature_names.clone(),
            rows: test,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn ar_process(phi: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let e = noise(n + 500, seed);
        let mut y = vec![0.0; n + 500];
        for t in 0..y.len() {
            let mut v = e[t];
            for (k, p) in phi.iter().enumerate() {
                if t > k {
                    v += p * y[t - k - 1];
                }
            }
            y[t] = v;
        }
        y.split_off(500)
    }

    #[test]
    fn abs_sum_examples() {
        assert_eq!(abs_sum_changes(&[1.0, 3.0, 2.0]), 3.0);
        assert_eq!(abs_sum_changes(&[4.0, 4.0, 4.0]), 0.0);
        let alt: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        assert_eq!(abs_sum_changes(&alt), 99.0);
    }

    #[test]
    fn white_noise_ar_coefficients_near_zero() {
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let c = ar_coefficients(&noise(1500, seed), AR_ORDER).unwrap();
            worst = worst.max(c.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        assert!(worst < 0.12, "{worst}");
        // mean over seeds is far tighter than the per-draw spread
        let mean_abs: f64 = (0..100)
            .map(|s| ar_coefficients(&noise(1500, s), AR_ORDER).unwrap()[2].abs())
            .sum::<f64>()
            / 100.0;
        assert!(mean_abs < 0.08, "{mean_abs}");
    }

    #[test]
    fn ar1_recovery() {
        let c = ar_coefficients(&ar_process(&[0.5], 5000, 1), AR_ORDER).unwrap();
        assert!((c[0] - 0.5).abs() < 0.05, "{c:?}");
        assert!(c[1..].iter().all(|v| v.abs() < 0.05), "{c:?}");
    }

    #[test]
    fn ar3_recovery() {
        let phi = [0.4, -0.2, 0.3];
        let c = ar_coefficients(&ar_process(&phi, 8000, 2), 3).unwrap();
        for (a, b) in c.iter().zip(&phi) {
            assert!((a - b).abs() < 0.05, "{c:?}");
        }
    }

    #[test]
    fn pacf_properties() {
        let x = ar_process(&[0.6], 5000, 5);
        assert!((pacf(&x, 1).unwrap() - 0.6).abs() < 0.05);
        assert!(pacf(&x, 3).unwrap().abs() < 0.05);
        // pacf at lag k equals the last AR(k) coefficient on the same data
        let y = ar_process(&[0.3, 0.2, -0.25], 3000, 6);
        let c = ar_coefficients(&y, 3).unwrap();
        assert!((pacf(&y, 3).unwrap() - c[2]).abs() < 1e-12);
    }

    #[test]
    fn white_noise_pacf() {
        let mean: f64 = (0..50).map(|s| pacf(&noise(1500, s), 3).unwrap()).sum::<f64>() / 50.0;
        assert!(mean.abs() < 0.08);
    }

    #[test]
    fn singular_toeplitz() {
        assert!(matches!(
            ar_coefficients(&[2.0; 50], AR_ORDER),
            Err(Error::SingularToeplitz)
        ));
        assert!(matches!(pacf(&[1.0; 20], 3), Err(Error::SingularToeplitz)));
    }

    #[test]
    fn peak_counting() {
        assert_eq!(count_peaks(&[0.0, 1.0, 0.0, 1.0, 0.0], 1), 2);
        let ramp: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(count_peaks(&ramp, 1), 0);
        assert_eq!(count_peaks(&[0.0, 2.0, 1.0, 3.0, 1.0, 2.0, 0.0], 2), 1);
        // boundary points are never peaks
        assert_eq!(count_peaks(&[5.0, 0.0, 5.0], 1), 0);
    }

    fn gaussian_bumps(n: usize, centers: &[f64], width: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                centers
                    .iter()
                    .map(|c| (-0.5 * ((i as f64 - c) / width).powi(2)).exp())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn cwt_peak_fixtures() {
        for w in [1usize, 5] {
            let one = gaussian_bumps(400, &[200.0], w as f64);
            assert_eq!(cwt_peaks(&one, w), 1, "w={w}");
            let two = gaussian_bumps(600, &[180.0, 420.0], w as f64);
            assert_eq!(cwt_peaks(&two, w), 2, "w={w}");
            assert_eq!(cwt_peaks(&[3.0; 300], w), 0);
        }
    }

    #[test]
    fn kurtosis_fixtures() {
        // +-1 alternating: g2 = -2, G2 from the closed form
        let n = 100;
        let v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let nf = n as f64;
        let want = ((nf + 1.0) * -2.0 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
        assert!((kurtosis_g2(&v).unwrap() - want).abs() < 1e-12);

        let g = noise(200_000, 3);
        assert!(kurtosis_g2(&g).unwrap().abs() < 0.15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let laplace: Vec<f64> = (0..200_000)
            .map(|_| {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        assert!((kurtosis_g2(&laplace).unwrap() - 3.0).abs() < 0.2);
        assert!(matches!(kurtosis_g2(&[1.0; 10]), Err(Error::ZeroVariance)));
    }

    fn matrix(cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = cols[0].len();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        let rows = (0..n)
            .map(|i| FeatureVector {
                user_id: format!("u{}", i % 2),
                recording_id: format!("r{}", i % 5),
                segment_index: i,
                values: cols.iter().map(|c| c[i]).collect(),
            })
            .collect();
        FeatureMatrix::new(names, rows).unwrap()
    }

    #[test]
    fn variance_filter_cases() {
        let alt: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { -0.5f64.sqrt() } else { 0.5f64.sqrt() }).collect();
        let m = matrix(vec![vec![1.0; 40], alt, noise(40, 1)]);
        let out = variance_filter(&m, 0.01).unwrap();
        assert_eq!(out.feature_names, vec!["f1", "f2"]);
        let flat = matrix(vec![vec![1.0; 10]]);
        assert!(matches!(variance_filter(&flat, 0.01), Err(Error::AllColumnsDropped)));
        let informative = matrix((0..11).map(|s| noise(200, s)).collect());
        assert_eq!(variance_filter(&informative, 0.01).unwrap().n_features(), 11);
    }

    #[test]
    fn correlation_filter_cases() {
        let a = noise(500, 1);
        let b = noise(500, 2);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let m = matrix(vec![a.clone(), b.clone(), a.clone(), neg]);
        let out = correlation_filter(&m, 0.8);
        assert_eq!(out.feature_names, vec!["f0", "f1"]);
        assert_eq!(out.n_rows(), 500);
        assert_eq!(out.rows[7].values, vec![a[7], b[7]]);
    }

    #[test]
    fn top_features_by_prevalence() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let imps = [vec![0.7, 0.2, 0.1], vec![0.5, 0.1, 0.4], vec![0.6, 0.3, 0.1]];
        let top = select_top_features(&names, imps.iter().map(|v| v.as_slice()), 1, 1).unwrap();
        assert_eq!(top, vec!["a"]);
        let ranked = select_top_features(&names, imps.iter().map(|v| v.as_slice()), 2, 3).unwrap();
        assert_eq!(ranked, vec!["a", "b", "c"]);
        let empty: Vec<&[f64]> = vec![];
        assert!(matches!(
            select_top_features(&names, empty, 2, 2),
            Err(Error::NoModels)
        ));
    }

    fn grouped_fixture(users: usize, recs: usize) -> FeatureMatrix {
        let rows = (0..users)
            .flat_map(|u| {
                (0..recs).flat_map(move |r| {
                    (0..19).map(move |s| FeatureVector {
                        user_id: format!("u{u}"),
                        recording_id: format!("r{r}"),
                        segment_index: s,
                        values: vec![u as f64, r as f64],
                    })
                })
            })
            .collect();
        FeatureMatrix::new(vec!["x".into(), "y".into()], rows).unwrap()
    }

    #[test]
    fn grouped_split_six_four() {
        let m = grouped_fixture(3, 10);
        let a = grouped_split(&m, &SplitSpec { train_fraction: 0.6, seed: 1 }).unwrap();
        let b = grouped_split(&m, &SplitSpec { train_fraction: 0.6, seed: 2 }).unwrap();
        for split in [&a, &b] {
            assert_eq!(split.train.n_rows(), 3 * 6 * 19);
            assert_eq!(split.test.n_rows(), 3 * 4 * 19);
            let train: BTreeSet<_> = split
                .train
                .rows
                .iter()
                .map(|r| (r.user_id.clone(), r.recording_id.clone()))
                .collect();
            assert!(split
                .test
                .rows
                .iter()
                .all(|r| !train.contains(&(r.user_id.clone(), r.recording_id.clone()))));
        }
        assert_ne!(a.train, b.train);
        assert_eq!(a, grouped_split(&m, &SplitSpec { train_fraction: 0.6, seed: 1 }).unwrap());
    }

    #[test]
    fn grouped_split_needs_two_recordings() {
        let m = grouped_fixture(2, 1);
        assert!(matches!(
            grouped_split(&m, &SplitSpec::default()),
            Err(Error::InsufficientRecordings { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let m = matrix(vec![noise(10, 1), noise(10, 2)]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(FeatureMatrix::read_csv(buf.as_slice()).unwrap(), m);
    }
}
