use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::Classifier;
use crate::error::{Error, Result};
use crate::synth::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }
}

impl ForestParams {
    fn tree_params(&self, d: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: Some(
                self.features_per_split
                    .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    /// Mean impurity-decrease importance per feature, summing to 1 whenever
    /// any tree split at all.
    pub importances: Vec<f64>,
}

impl RandomForest {
    /// Bootstrap-aggregated trees; tree `t` draws from its own seeded stream.
    pub fn fit(x: &[Vec<f64>], y: &[u8], params: ForestParams, seed: u64) -> Result<RandomForest> {
        if x.is_empty() || x.len() != y.len() || params.n_trees == 0 {
            return Err(Error::EmptyData);
        }
        let n = x.len();
        let d = x[0].len();
        let tree_params = params.tree_params(d);
        let trees: Vec<DecisionTree> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit_indices(x, y, &sample, tree_params, &mut rng)
            })
            .collect::<Result<_>>()?;

        let mut importances = vec![0.0; d];
        let mut contributing = 0usize;
        for tree in &trees {
            let total: f64 = tree.impurity_decrease.iter().sum();
            if total > 0.0 {
                contributing += 1;
                for (acc, v) in importances.iter_mut().zip(&tree.impurity_decrease) {
                    *acc += v / total;
                }
            }
        }
        if contributing > 0 {
            let total: f64 = importances.iter().sum();
            importances.iter_mut().for_each(|v| *v /= total);
        }
        Ok(RandomForest {
            trees,
            params,
            seed,
            n_features: d,
            importances,
        })
    }

    /// Vote counts `[class 0, class 1]` over the trees.
    pub fn votes(&self, row: &[f64]) -> [usize; 2] {
        let mut v = [0, 0];
        for t in &self.trees {
            v[t.predict(row) as usize] += 1;
        }
        v
    }

    /// Fraction of trees voting for class 1.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.votes(row)[1] as f64 / self.trees.len() as f64
    }

    /// Majority vote; a tie goes to class 0.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let v = self.votes(row);
        u8::from(v[1] > v[0])
    }
}

impl Classifier for RandomForest {
    fn classify(&self, row: &[f64]) -> u8 {
        self.predict(row)
    }
}

impl Classifier for DecisionTree {
    fn classify(&self, row: &[f64]) -> u8 {
        self.predict(row)
    }
}
