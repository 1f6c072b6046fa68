//! Seeded fixtures shared by the benchmarks.

use breathid_core::features::{FeatureMatrix, FeatureVector};
use breathid_core::learn::{CVConfig, ForestParams, ParamGrid};
use breathid_core::library::ModelLibrary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Two overlapping Gaussian classes in `d` dimensions.
pub fn two_classes(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let x = y
        .iter()
        .map(|&c| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) + f64::from(c)).collect())
        .collect();
    (x, y)
}

/// Library over `n_users` Gaussian clusters plus held-out rows for each user.
pub fn gaussian_library(n_users: usize, seed: u64) -> (ModelLibrary, Vec<Vec<Vec<f64>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 10;
    let mut rows = Vec::new();
    let mut tests = Vec::new();
    for u in 0..n_users {
        let center: Vec<f64> = (0..d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut draw = || -> Vec<f64> { center.iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect() };
        for s in 0..60 {
            rows.push(FeatureVector { user_id: format!("user{u:02}"), recording_id: "train".into(), segment_index: s, values: draw() });
        }
        tests.push((0..40).map(|_| draw()).collect());
    }
    let train = FeatureMatrix::new((0..d).map(|k| format!("f{k}")).collect(), rows).expect("valid fixture");
    let cv = CVConfig { k: 3, grid: ParamGrid::single(ForestParams { n_trees: 20, ..Default::default() }), seed };
    (ModelLibrary::enroll_all(&train, &cv).expect("separable fixture"), tests)
}
