//! Identification time against library size, measured on one thread.

use std::fs;
use std::path::Path;
use std::time::Instant;

use breathid_core::auth::{decide_identity, fuse, identify, Block, FusionWeights, DEFAULT_ALPHA, DEFAULT_IDENTIFY_ETA};
use breathid_core::features::{FeatureMatrix, FeatureVector};
use breathid_core::learn::{CVConfig, ParamGrid};
use breathid_core::library::ModelLibrary;
use breathid_core::stats;
use breathid_core::synth::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{BenchConfig, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n_users: usize,
    pub n_models: usize,
    pub median_seconds: f64,
    pub mean_seconds: f64,
    pub ci95_seconds: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// User count whose pair count is `size`.
pub fn users_for(size: usize) -> Result<usize, CliError> {
    let n = ((1.0 + (1.0 + 8.0 * size as f64).sqrt()) / 2.0).round() as usize;
    if n < 2 || n * (n - 1) / 2 != size {
        return Err(CliError::Args(format!("library size {size} is not n choose 2")));
    }
    Ok(n)
}

/// Gaussian clusters, one per user, with separate train and test draws.
fn gaussian_cohort(cfg: &BenchConfig, n_users: usize, seed: u64) -> Result<(FeatureMatrix, Vec<Vec<Vec<f64>>>), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..cfg.n_features).map(|k| format!("f{k}")).collect();
    let mut rows = Vec::new();
    let mut tests = Vec::new();
    for u in 0..n_users {
        let center: Vec<f64> = (0..cfg.n_features).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            center.iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect()
        };
        for s in 0..cfg.train_rows {
            rows.push(FeatureVector {
                user_id: format!("user{u:02}"),
                recording_id: "train".into(),
                segment_index: s,
                values: draw(&mut rng),
            });
        }
        tests.push((0..cfg.test_rows).map(|_| draw(&mut rng)).collect());
    }
    Ok((FeatureMatrix::new(names, rows)?, tests))
}

fn identify_once(library: &ModelLibrary, rows: &[Vec<f64>], weights: &FusionWeights) -> Result<(), CliError> {
    let ht = identify(rows, library, Block::Ht { alpha: DEFAULT_ALPHA })?;
    let ml = identify(rows, library, Block::Ml)?;
    let fused = fuse(&[ht, ml], weights)?;
    std::hint::black_box(decide_identity(&fused, DEFAULT_IDENTIFY_ETA, None));
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Per-identification time at each size, plus a least-squares line through
/// the medians.
///
/// Sizes are timed round-robin within each repetition so that transient load
/// affects every size alike; each repetition contributes the mean over all
/// users of one size, and the median over repetitions is fitted.
pub fn measure(cfg: &BenchConfig) -> Result<(Vec<BenchRow>, LinearFit), CliError> {
    if cfg.sizes.len() < 2 || cfg.reps == 0 {
        return Err(CliError::Args("need at least two sizes and one repetition".into()));
    }
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let weights = FusionWeights::default();
    let mut fixtures = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let n = users_for(size)?;
        let seed = derive_seed(cfg.seed, n as u64);
        let (train, tests) = gaussian_cohort(cfg, n, seed)?;
        let cv = CVConfig {
            k: 3,
            grid: ParamGrid::single(cfg.forest),
            seed,
        };
        fixtures.push((ModelLibrary::enroll_all(&train, &cv)?, tests));
    }
    let per_rep = single.install(|| -> Result<Vec<Vec<f64>>, CliError> {
        for (library, tests) in &fixtures {
            identify_once(library, &tests[0], &weights)?;
        }
        let mut per_rep = vec![Vec::with_capacity(cfg.reps); fixtures.len()];
        for _ in 0..cfg.reps {
            for (k, (library, tests)) in fixtures.iter().enumerate() {
                let start = Instant::now();
                for test in tests {
                    identify_once(library, test, &weights)?;
                }
                per_rep[k].push(start.elapsed().as_secs_f64() / tests.len() as f64);
            }
        }
        Ok(per_rep)
    })?;
    let rows: Vec<BenchRow> = fixtures
        .iter()
        .zip(&per_rep)
        .map(|((library, _), times)| {
            let sd = if times.len() > 1 { stats::sample_variance(times).sqrt() } else { 0.0 };
            BenchRow {
                n_users: library.n_users(),
                n_models: library.n_models(),
                median_seconds: median(times),
                mean_seconds: stats::mean(times),
                ci95_seconds: 1.96 * sd / (times.len() as f64).sqrt(),
                samples: times.len(),
            }
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.n_models as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.median_seconds).collect();
    let (slope, intercept) = stats::ols(&x, &y);
    Ok((
        rows,
        LinearFit {
            slope,
            intercept,
            r_squared: stats::r_squared(&x, &y),
        },
    ))
}

/// Writes `bench_identify.csv` and `bench_identify.json` under `report_dir`.
pub fn run(cfg: &BenchConfig, report_dir: &Path) -> Result<Value, CliError> {
    let (rows, fit) = measure(cfg)?;
    fs::create_dir_all(report_dir)?;
    let mut csv = String::from("n_users,n_models,median_seconds,mean_seconds,ci95_seconds\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n_users, r.n_models, r.median_seconds, r.mean_seconds, r.ci95_seconds
        ));
    }
    fs::write(report_dir.join("bench_identify.csv"), csv)?;
    let out = json!({ "command": "bench-identify", "rows": rows, "fit": fit });
    fs::write(report_dir.join("bench_identify.json"), serde_json::to_string_pretty(&out)?)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn pair_sizes() {
        let users: Vec<usize> = [45, 105, 190, 300, 435].iter().map(|&s| users_for(s).unwrap()).collect();
        assert_eq!(users, vec![10, 15, 20, 25, 30]);
        assert!(users_for(44).is_err());
    }
}
