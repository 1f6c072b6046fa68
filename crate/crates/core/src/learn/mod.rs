//! Tree ensembles and model selection for the pairwise classifiers.

pub mod cv;
pub mod forest;
pub mod pipeline;
pub mod tree;

pub use cv::{grid_search, stratified_folds, stratified_kfold_cv, CVConfig, GridResult, ParamGrid};
pub use forest::{ForestParams, RandomForest};
pub use pipeline::{
    decision_grid, fit_pair_pipeline, GridBounds, PairFit, ScalerModelPipeline, StandardScaler,
    DISCARD_SCORE,
};
pub use tree::{DecisionTree, Node, TreeParams};

/// Anything that assigns a binary class to a feature row.
pub trait Classifier {
    fn classify(&self, row: &[f64]) -> u8;
}
