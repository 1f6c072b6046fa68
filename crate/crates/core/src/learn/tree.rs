//! Binary CART classification tree with Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means all.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub params: TreeParams,
    pub n_features: usize,
    /// Weighted impurity decrease attributed to each feature (unnormalized).
    pub impurity_decrease: Vec<f64>,
}

pub(crate) fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[0] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn class_counts(y: &[u8], idx: &[usize]) -> [usize; 2] {
    let mut c = [0, 0];
    for &i in idx {
        c[y[i] as usize] += 1;
    }
    c
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    child_impurity: f64,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: TreeParams,
    n_total: f64,
    rng: &'a mut R,
    nodes: Vec<Node>,
    decrease: Vec<f64>,
}

impl<R: Rng> Builder<'_, R> {
    /// Best threshold on one feature, minimizing the weighted child Gini.
    fn best_on_feature(&self, idx: &mut [usize], feature: usize) -> Option<BestSplit> {
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let n = idx.len();
        let total = class_counts(self.y, idx);
        let mut left = [0usize; 2];
        let mut best: Option<BestSplit> = None;
        let min_leaf = self.params.min_samples_leaf.max(1);
        for pos in 0..n - 1 {
            left[self.y[idx[pos]] as usize] += 1;
            let n_left = pos + 1;
            let here = x[idx[pos]][feature];
            let next = x[idx[pos + 1]][feature];
            if here == next || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nf = n as f64;
            let imp = (n_left as f64 / nf) * gini(left) + ((n - n_left) as f64 / nf) * gini(right);
            if best.as_ref().is_none_or(|b| imp < b.child_impurity) {
                let mut threshold = here + (next - here) / 2.0;
                if threshold >= next {
                    threshold = here;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    child_impurity: imp,
                });
            }
        }
        best
    }

    fn find_split(&mut self, idx: &mut [usize]) -> Option<BestSplit> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(self.rng);
        let k = self.params.features_per_split.unwrap_or(d).clamp(1, d);
        let mut best: Option<BestSplit> = None;
        for (visited, &f) in features.iter().enumerate() {
            // Past the subset, keep looking only until some valid split exists.
            if visited >= k && best.is_some() {
                break;
            }
            if let Some(s) = self.best_on_feature(idx, f) {
                if best.as_ref().is_none_or(|b| s.child_impurity < b.child_impurity) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = class_counts(self.y, idx);
        let impurity = gini(counts);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if impurity <= 1e-12 || !depth_ok || idx.len() < self.params.min_samples_split.max(2) {
            return id;
        }
        let Some(split) = self.find_split(idx) else {
            return id;
        };
        if split.child_impurity > impurity + 1e-12 {
            return id;
        }
        let x = self.x;
        let mid = partition(idx, |&i| x[i][split.feature] <= split.threshold);
        if mid == 0 || mid == idx.len() {
            return id;
        }
        self.decrease[split.feature] +=
            idx.len() as f64 / self.n_total * (impurity - split.child_impurity);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// In-place partition; returns the count of elements satisfying `pred`, moved to the front.
fn partition<T, F: Fn(&T) -> bool>(v: &mut [T], pred: F) -> usize {
    let mut store = 0;
    for i in 0..v.len() {
        if pred(&v[i]) {
            v.swap(i, store);
            store += 1;
        }
    }
    store
}

impl DecisionTree {
    /// Fit on the rows selected by `sample` (indices may repeat, as in a bootstrap).
    pub fn fit_indices<R: Rng>(
        x: &[Vec<f64>],
        y: &[u8],
        sample: &[usize],
        params: TreeParams,
        rng: &mut R,
    ) -> Result<DecisionTree> {
        if x.is_empty() || sample.is_empty() || x.len() != y.len() {
            return Err(Error::EmptyData);
        }
        let d = x[0].len();
        if d == 0 {
            return Err(Error::EmptyData);
        }
        let mut builder = Builder {
            x,
            y,
            params,
            n_total: sample.len() as f64,
            rng,
            nodes: Vec::new(),
            decrease: vec![0.0; d],
        };
        let mut idx = sample.to_vec();
        builder.build(&mut idx, 0);
        Ok(DecisionTree {
            nodes: builder.nodes,
            params,
            n_features: d,
            impurity_decrease: builder.decrease,
        })
    }

    pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[u8], params: TreeParams, rng: &mut R) -> Result<Self> {
        let all: Vec<usize> = (0..x.len()).collect();
        Self::fit_indices(x, y, &all, params, rng)
    }

    fn leaf(&self, row: &[f64]) -> [usize; 2] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Majority class at the leaf; ties go to class 0.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let c = self.leaf(row);
        u8::from(c[1] > c[0])
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
