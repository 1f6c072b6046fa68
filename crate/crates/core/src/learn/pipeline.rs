use serde::{Deserialize, Serialize};

use super::cv::{grid_search, CVConfig};
use super::forest::{ForestParams, RandomForest};
use super::Classifier;
use crate::error::{Error, Result};
use crate::stats;

/// Pair models whose cross-validation score does not exceed this are discarded.
pub const DISCARD_SCORE: f64 = 0.60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardScaler {
    /// Column means and population standard deviations; constant columns get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        let d = rows[0].len();
        let mut mean = Vec::with_capacity(d);
        let mut std = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            mean.push(stats::mean(&col));
            let s = stats::std_dev(&col);
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(StandardScaler { mean, std })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Scaler plus forest for one unordered user pair. Class 0 is `pair.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModelPipeline {
    pub pair: (String, String),
    pub scaler: StandardScaler,
    pub model: RandomForest,
    pub params: ForestParams,
    pub cv_score: f64,
}

impl ScalerModelPipeline {
    pub fn predict(&self, row: &[f64]) -> u8 {
        self.model.predict(&self.scaler.transform(row))
    }

    pub fn votes(&self, row: &[f64]) -> [usize; 2] {
        self.model.votes(&self.scaler.transform(row))
    }

    /// Rows predicted as each side of the pair.
    pub fn row_counts(&self, rows: &[Vec<f64>]) -> [usize; 2] {
        let mut c = [0, 0];
        for r in rows {
            c[self.predict(r) as usize] += 1;
        }
        c
    }
}

impl Classifier for ScalerModelPipeline {
    fn classify(&self, row: &[f64]) -> u8 {
        self.predict(row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairFit {
    Fitted(ScalerModelPipeline),
    Discarded { pair: (String, String), cv_score: f64 },
}

/// Scale on the pooled pair data, tune by grid search, refit on everything.
pub fn fit_pair_pipeline(
    pair: (&str, &str),
    train_i: &[Vec<f64>],
    train_j: &[Vec<f64>],
    cv: &CVConfig,
) -> Result<PairFit> {
    if train_i.is_empty() || train_j.is_empty() {
        return Err(Error::EmptyData);
    }
    let pooled: Vec<Vec<f64>> = train_i.iter().chain(train_j).cloned().collect();
    let scaler = StandardScaler::fit(&pooled)?;
    let x: Vec<Vec<f64>> = pooled.iter().map(|r| scaler.transform(r)).collect();
    let y: Vec<u8> = std::iter::repeat_n(0u8, train_i.len())
        .chain(std::iter::repeat_n(1u8, train_j.len()))
        .collect();
    let tuned = grid_search(&x, &y, cv)?;
    let pair = (pair.0.to_string(), pair.1.to_string());
    if tuned.best_score <= DISCARD_SCORE {
        return Ok(PairFit::Discarded {
            pair,
            cv_score: tuned.best_score,
        });
    }
    let model = RandomForest::fit(&x, &y, tuned.best_params, cv.seed)?;
    Ok(PairFit::Fitted(ScalerModelPipeline {
        pair,
        scaler,
        model,
        params: tuned.best_params,
        cv_score: tuned.best_score,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// `resolution x resolution` lattice of predictions over two features, the
/// remaining features held at `base`. `grid[iy][ix]`.
pub fn decision_grid<C: Classifier + ?Sized>(
    classifier: &C,
    base: &[f64],
    feature_x: usize,
    feature_y: usize,
    bounds: GridBounds,
    resolution: usize,
) -> Vec<Vec<u8>> {
    let at = |(lo, hi): (f64, f64), i: usize| {
        if resolution <= 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * i as f64 / (resolution - 1) as f64
        }
    };
    let mut point = base.to_vec();
    (0..resolution)
        .map(|iy| {
            (0..resolution)
                .map(|ix| {
                    point[feature_x] = at(bounds.x, ix);
                    point[feature_y] = at(bounds.y, iy);
                    classifier.classify(&point)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::cv::ParamGrid;
    use crate::learn::tree::{DecisionTree, TreeParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_rows(center: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| center.iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    fn quick_cv() -> CVConfig {
        CVConfig {
            k: 5,
            grid: ParamGrid::single(ForestParams { n_trees: 20, ..Default::default() }),
            seed: 3,
        }
    }

    #[test]
    fn separated_pair_is_kept() {
        let a = gaussian_rows(&[0.0, 0.0, 0.0], 60, 1);
        let b = gaussian_rows(&[4.0, -4.0, 0.0], 60, 2);
        match fit_pair_pipeline(("a", "b"), &a, &b, &quick_cv()).unwrap() {
            PairFit::Fitted(p) => {
                assert!(p.cv_score > 0.9);
                let pooled: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
                let want = StandardScaler::fit(&pooled).unwrap();
                assert_eq!(p.scaler, want);
                assert_eq!(p.predict(&[0.0, 0.0, 0.0]), 0);
                assert_eq!(p.predict(&[4.0, -4.0, 0.0]), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_pair_is_discarded() {
        let mut discarded = 0;
        for seed in 0..5 {
            let a = gaussian_rows(&[0.0, 0.0], 60, 10 + seed);
            let b = gaussian_rows(&[0.0, 0.0], 60, 20 + seed);
            if let PairFit::Discarded { cv_score, .. } = fit_pair_pipeline(("a", "b"), &a, &b, &quick_cv()).unwrap() {
                assert!(cv_score <= DISCARD_SCORE);
                discarded += 1;
            }
        }
        assert!(discarded >= 4, "{discarded}");
    }

    #[test]
    fn scaler_handles_constant_column() {
        let s = StandardScaler::fit(&[vec![1.0, 2.0], vec![1.0, 4.0]]).unwrap();
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(&[1.0, 3.0]), vec![0.0, 0.0]);
    }

    struct Constant;
    impl Classifier for Constant {
        fn classify(&self, _: &[f64]) -> u8 {
            1
        }
    }

    #[test]
    fn grids() {
        let bounds = GridBounds { x: (-1.0, 1.0), y: (-1.0, 1.0) };
        let g = decision_grid(&Constant, &[0.0, 0.0], 0, 1, bounds, 5);
        assert!(g.iter().flatten().all(|&c| c == 1));

        let x = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let tree = DecisionTree::fit(&x, &[0, 1], TreeParams::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let g = decision_grid(&tree, &[0.0, 0.0], 0, 1, bounds, 4);
        for row in &g {
            assert_eq!(row, &vec![0, 0, 1, 1]);
        }
    }

    #[test]
    fn forest_grid_separates_training_clusters() {
        let a = gaussian_rows(&[-2.0, -2.0], 50, 4);
        let b = gaussian_rows(&[2.0, 2.0], 50, 5);
        let PairFit::Fitted(p) = fit_pair_pipeline(("a", "b"), &a, &b, &quick_cv()).unwrap() else {
            panic!("discarded");
        };
        let bounds = GridBounds { x: (-3.0, 3.0), y: (-3.0, 3.0) };
        let g = decision_grid(&p, &[0.0, 0.0], 0, 1, bounds, 7);
        assert_eq!(g[1][1], 0);
        assert_eq!(g[5][5], 1);
    }

    #[test]
    fn prediction_invariant_under_affine_rescaling() {
        let a = gaussian_rows(&[0.0, 1.0], 40, 6);
        let b = gaussian_rows(&[2.0, -1.0], 40, 7);
        let affine = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| vec![3.0 * r[0] + 10.0, 0.5 * r[1] - 2.0]).collect()
        };
        let (PairFit::Fitted(p), PairFit::Fitted(q)) = (
            fit_pair_pipeline(("a", "b"), &a, &b, &quick_cv()).unwrap(),
            fit_pair_pipeline(("a", "b"), &affine(&a), &affine(&b), &quick_cv()).unwrap(),
        ) else {
            panic!("discarded");
        };
        let probes = gaussian_rows(&[1.0, 0.0], 50, 8);
        let moved = affine(&probes);
        for (r, m) in probes.iter().zip(&moved) {
            assert_eq!(p.votes(r), q.votes(m));
        }
    }
}
