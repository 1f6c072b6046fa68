use std::fs;
use std::path::{Path, PathBuf};

use breathid_core::auth::{FusionWeights, TrialConfig};
use breathid_core::learn::ForestParams;
use breathid_core::mfdfa::MfdfaConfig;
use breathid_core::synth::CohortSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Identification-time benchmark over synthetic feature-level cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Library sizes; each must be `n choose 2` for some user count `n`.
    pub sizes: Vec<usize>,
    pub n_features: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Timed passes over every user at each size; the median pass is fitted.
    pub reps: usize,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![45, 105, 190, 300, 435],
            n_features: 10,
            train_rows: 60,
            test_rows: 40,
            reps: 7,
            forest: ForestParams {
                n_trees: 20,
                ..Default::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub features_path: PathBuf,
    pub library_path: PathBuf,
    /// Held-out rows written by `enroll`, read by `confirm` and `identify`.
    pub test_features_path: PathBuf,
    pub report_dir: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub cohort: CohortSpec,
    pub mfdfa: MfdfaConfig,
    /// Segment length; `None` means a tenth of each recording.
    pub fixed_window: Option<usize>,
    pub evaluation: TrialConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_dir: "work/dataset".into(),
            features_path: "work/features.csv".into(),
            library_path: "work/library.json".into(),
            test_features_path: "work/test_features.csv".into(),
            report_dir: "work/reports".into(),
            jobs: None,
            cohort: CohortSpec::default(),
            mfdfa: MfdfaConfig::default(),
            fixed_window: None,
            evaluation: TrialConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

/// Command-line values that win over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub eta_threshold: Option<f64>,
    pub weights: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// `--eta-threshold` is applied by each command to the threshold it uses.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.cohort.seed = seed;
            self.evaluation.seed = seed;
            self.bench.seed = seed;
        }
        if let Some(jobs) = o.jobs {
            if jobs == 0 {
                return Err(CliError::Args("--jobs must be at least 1".into()));
            }
            self.jobs = Some(jobs);
        }
        if let Some(w) = &o.weights {
            self.evaluation.weights = FusionWeights::new(w.clone())?;
        }
        if let Some(eta) = o.eta_threshold {
            if !(0.0..=100.0).contains(&eta) {
                return Err(CliError::Args(format!("eta threshold {eta} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

/// Parse `w1,w2,...`.
pub fn parse_weights(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad weight {p:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"evaluation": {"n_trials": 2}, "cohort": {"n_users": 4}}"#).unwrap();
        assert_eq!(cfg.evaluation.n_trials, 2);
        assert_eq!(cfg.evaluation.cv.k, 5);
        assert_eq!(cfg.cohort.n_users, 4);
        assert_eq!(cfg.cohort.recordings_per_user, 10);
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides { seed: Some(9), weights: Some(vec![0.5, 0.5]), ..Default::default() }).unwrap();
        assert_eq!((cfg.cohort.seed, cfg.evaluation.seed), (9, 9));
        assert_eq!(cfg.evaluation.weights.w, vec![0.5, 0.5]);
        assert!(cfg.apply(&Overrides { weights: Some(vec![0.5, 0.6]), ..Default::default() }).is_err());
        assert!(cfg.apply(&Overrides { jobs: Some(0), ..Default::default() }).is_err());
        assert_eq!(parse_weights("0.3, 0.7").unwrap(), vec![0.3, 0.7]);
        assert!(parse_weights("a,b").is_err());
    }
}
