//! Stratified k-fold cross-validation and exhaustive grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, RandomForest};
use crate::error::{Error, Result};
use crate::synth::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid {
            n_trees: vec![50, 100, 200],
            max_depth: vec![Some(4), Some(8), None],
            min_samples_split: vec![2, 5],
            min_samples_leaf: vec![1, 3],
        }
    }
}

impl ParamGrid {
    pub fn single(params: ForestParams) -> Self {
        ParamGrid {
            n_trees: vec![params.n_trees],
            max_depth: vec![params.max_depth],
            min_samples_split: vec![params.min_samples_split],
            min_samples_leaf: vec![params.min_samples_leaf],
        }
    }

    /// Every grid point, varying the last-listed knob fastest.
    pub fn points(&self) -> Vec<ForestParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_samples_split in &self.min_samples_split {
                    for &min_samples_leaf in &self.min_samples_leaf {
                        out.push(ForestParams {
                            n_trees,
                            max_depth,
                            min_samples_split,
                            min_samples_leaf,
                            features_per_split: None,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CVConfig {
    pub k: usize,
    pub grid: ParamGrid,
    pub seed: u64,
}

impl Default for CVConfig {
    fn default() -> Self {
        CVConfig {
            k: 5,
            grid: ParamGrid::default(),
            seed: 0,
        }
    }
}

/// Fold index of every sample; each class is dealt round-robin after a seeded shuffle.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < k {
            return Err(Error::ClassTooSmall {
                class: class as usize,
                count: idx.len(),
                folds: k,
            });
        }
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    Ok(fold)
}

/// Mean validation accuracy over `k` stratified folds.
pub fn stratified_kfold_cv(
    x: &[Vec<f64>],
    y: &[u8],
    params: ForestParams,
    k: usize,
    seed: u64,
) -> Result<f64> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::EmptyData);
    }
    let folds = stratified_folds(y, k, seed)?;
    let scores: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (mut tx, mut ty, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
            for i in 0..x.len() {
                if folds[i] == f {
                    vx.push(x[i].clone());
                    vy.push(y[i]);
                } else {
                    tx.push(x[i].clone());
                    ty.push(y[i]);
                }
            }
            let forest = RandomForest::fit(&tx, &ty, params, derive_seed(seed, f as u64 + 1))?;
            let correct = vx
                .iter()
                .zip(&vy)
                .filter(|(r, l)| forest.predict(r) == **l)
                .count();
            Ok(correct as f64 / vx.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_params: ForestParams,
    pub best_score: f64,
}

/// Best grid point by CV score; ties keep the earliest point.
pub fn grid_search(x: &[Vec<f64>], y: &[u8], cv: &CVConfig) -> Result<GridResult> {
    let points = cv.grid.points();
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let scores: Vec<f64> = points
        .iter()
        .map(|p| stratified_kfold_cv(x, y, *p, cv.k, cv.seed))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(GridResult {
        best_params: points[best],
        best_score: scores[best],
    })
}
