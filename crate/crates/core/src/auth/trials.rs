//! Repeated split-shuffle evaluation of the full enrollment and
//! authentication pipeline.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::confirm::{hotelling_p_values, ht_votes_all, ml_votes_all};
use super::{
    decide_identity, fuse, metrics, ConfirmationOutcome, FusionWeights, PredictionVector, Tallies,
    DEFAULT_ALPHA, DEFAULT_CONFIRM_ETA, DEFAULT_IDENTIFY_ETA,
};
use crate::error::{Error, Result};
use crate::features::{
    correlation_filter, grouped_split, select_top_features, variance_filter, FeatureMatrix,
    SplitSpec,
};
use crate::learn::{CVConfig, ForestParams, RandomForest};
use crate::library::ModelLibrary;
use crate::synth::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub variance_threshold: f64,
    pub correlation_threshold: f64,
    pub per_model_top: usize,
    pub top_k: usize,
    /// Forests used only to rank features before enrollment.
    pub selection_forest: ForestParams,
    pub cv: CVConfig,
    pub alpha: f64,
    pub confirm_eta: f64,
    pub identify_eta: f64,
    /// Weights for the HT and ML vectors, in that order.
    pub weights: FusionWeights,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n_trials: 66,
            seed: 0,
            train_fraction: 0.6,
            variance_threshold: 0.01,
            correlation_threshold: 0.8,
            per_model_top: 10,
            top_k: 10,
            selection_forest: ForestParams {
                n_trees: 50,
                ..Default::default()
            },
            cv: CVConfig::default(),
            alpha: DEFAULT_ALPHA,
            confirm_eta: DEFAULT_CONFIRM_ETA,
            identify_eta: DEFAULT_IDENTIFY_ETA,
            weights: FusionWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Ht,
    Ml,
    Fused,
}

impl VectorKind {
    pub const ALL: [VectorKind; 3] = [VectorKind::Ht, VectorKind::Ml, VectorKind::Fused];

    pub fn name(self) -> &'static str {
        match self {
            VectorKind::Ht => "ht",
            VectorKind::Ml => "ml",
            VectorKind::Fused => "fused",
        }
    }
}

/// Prediction vectors computed from one user's test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserVectors {
    pub user: String,
    pub index: usize,
    pub ht: Vec<f64>,
    pub ml: Vec<f64>,
    pub fused: Vec<f64>,
}

impl UserVectors {
    pub fn get(&self, kind: VectorKind) -> &[f64] {
        match kind {
            VectorKind::Ht => &self.ht,
            VectorKind::Ml => &self.ml,
            VectorKind::Fused => &self.fused,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationSummary {
    pub kind: VectorKind,
    pub tallies: Tallies,
    pub precision: Option<f64>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub selected_features: Vec<String>,
    pub n_models: usize,
    pub n_discarded: usize,
    pub tcr_ht: f64,
    pub tcr_ml: f64,
    pub identification: Vec<IdentificationSummary>,
    pub users: Vec<String>,
    pub vectors: Vec<UserVectors>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSpread {
    pub mean: f64,
    /// Twice the population standard deviation.
    pub two_sigma: f64,
    pub count: usize,
}

impl MeanSpread {
    pub fn of(values: &[f64]) -> Option<MeanSpread> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanSpread {
            mean,
            two_sigma: 2.0 * var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub top1: f64,
    pub top2: f64,
    pub top3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub kind: VectorKind,
    pub precision: Option<MeanSpread>,
    pub accuracy: MeanSpread,
    pub rank: RankStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tcr_ht: MeanSpread,
    pub tcr_ml: MeanSpread,
    pub identification: Vec<BlockSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: TrialConfig,
    pub n_users: usize,
    pub n_rows: usize,
    pub trials: Vec<TrialReport>,
    pub summary: Summary,
}

/// Fraction of `(V, true index)` cases whose true user is within the top
/// `k`, counting ties against it: at most `k` users, itself included, may
/// score at least as high.
pub fn rank_statistics<'a, I>(cases: I) -> RankStats
where
    I: IntoIterator<Item = (&'a [f64], usize)>,
{
    let mut hits = [0usize; 3];
    let mut total = 0usize;
    for (v, truth) in cases {
        total += 1;
        let at_least = v.iter().filter(|&&x| x >= v[truth]).count();
        for (k, h) in hits.iter_mut().enumerate() {
            if at_least <= k + 1 {
                *h += 1;
            }
        }
    }
    let frac = |h: usize| if total == 0 { 0.0 } else { h as f64 / total as f64 };
    RankStats {
        top1: frac(hits[0]),
        top2: frac(hits[1]),
        top3: frac(hits[2]),
    }
}

fn selection_importances(train: &FeatureMatrix, params: ForestParams, seed: u64) -> Result<Vec<Vec<f64>>> {
    let users = train.users();
    let per_user: Vec<Vec<Vec<f64>>> = users.iter().map(|u| train.rows_for(u).values()).collect();
    let pairs: Vec<(usize, usize)> = (0..users.len())
        .flat_map(|i| (i + 1..users.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let x: Vec<Vec<f64>> = per_user[i].iter().chain(&per_user[j]).cloned().collect();
            let y: Vec<u8> = std::iter::repeat_n(0, per_user[i].len())
                .chain(std::iter::repeat_n(1, per_user[j].len()))
                .collect();
            Ok(RandomForest::fit(&x, &y, params, derive_seed(seed, k as u64))?.importances)
        })
        .collect()
}

/// Library and held-out rows of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLibrary {
    pub seed: u64,
    pub library: ModelLibrary,
    /// Test side, projected onto the selected features.
    pub test: FeatureMatrix,
}

/// The enrollment half of trial `trial`: split, filter, rank features with
/// per-pair forests, then fit the pair library on the selected features.
pub fn enroll_trial(matrix: &FeatureMatrix, config: &TrialConfig, trial: usize) -> Result<TrialLibrary> {
    let seed = derive_seed(config.seed, trial as u64);
    let split = grouped_split(
        matrix,
        &SplitSpec {
            train_fraction: config.train_fraction,
            seed,
        },
    )?;
    let filtered = correlation_filter(
        &variance_filter(&split.train, config.variance_threshold)?,
        config.correlation_threshold,
    );
    let importances = selection_importances(&filtered, config.selection_forest, derive_seed(seed, 1))?;
    let selected = select_top_features(
        &filtered.feature_names,
        importances.iter().map(Vec::as_slice),
        config.per_model_top,
        config.top_k,
    )?;
    let train = split.train.select_named(&selected)?;
    let cv = CVConfig {
        seed: derive_seed(seed, 2),
        ..config.cv.clone()
    };
    Ok(TrialLibrary {
        seed,
        library: ModelLibrary::enroll_all(&train, &cv)?,
        test: split.test.select_named(&selected)?,
    })
}

fn run_trial(matrix: &FeatureMatrix, config: &TrialConfig, trial: usize) -> Result<TrialReport> {
    let TrialLibrary { seed, library, test } = enroll_trial(matrix, config, trial)?;
    let selected = library.selected_features.clone();
    let n = library.n_users();

    let mut confirm_ht = Vec::with_capacity(n);
    let mut confirm_ml = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for (i, user) in library.users.iter().enumerate() {
        let rows = test.rows_for(user).values();
        let (v_ht, (v_ml, voters)) = if rows.is_empty() {
            (vec![0; n], (vec![0; n], vec![0; n]))
        } else {
            let p = hotelling_p_values(&library, &rows)?;
            (ht_votes_all(&p, config.alpha), ml_votes_all(&library, &rows)?)
        };
        confirm_ht.push(ConfirmationOutcome::new(user, v_ht[i], n - 1, config.confirm_eta));
        confirm_ml.push(ConfirmationOutcome::new(user, v_ml[i], voters[i], config.confirm_eta));
        let as_vector = |v: &[usize]| PredictionVector {
            users: library.users.clone(),
            values: v.iter().map(|&x| x as f64).collect(),
        };
        let (ht, ml) = (as_vector(&v_ht), as_vector(&v_ml));
        let fused = fuse(&[ht.clone(), ml.clone()], &config.weights)?;
        vectors.push(UserVectors {
            user: user.clone(),
            index: i,
            ht: ht.values,
            ml: ml.values,
            fused: fused.values,
        });
    }

    let identification = VectorKind::ALL
        .iter()
        .map(|&kind| {
            let tallies = identification_tallies(&library.users, &vectors, kind, config.identify_eta);
            let m = metrics(&tallies)?;
            Ok(IdentificationSummary {
                kind,
                tallies,
                precision: m.precision,
                accuracy: m.accuracy,
            })
        })
        .collect::<Result<_>>()?;

    Ok(TrialReport {
        trial,
        seed,
        selected_features: selected,
        n_models: library.n_models(),
        n_discarded: library.discarded().len(),
        tcr_ht: metrics(&Tallies::from_confirmations(&confirm_ht))?.tcr,
        tcr_ml: metrics(&Tallies::from_confirmations(&confirm_ml))?.tcr,
        identification,
        users: library.users.clone(),
        vectors,
    })
}

fn identification_tallies(users: &[String], vectors: &[UserVectors], kind: VectorKind, eta_t: f64) -> Tallies {
    let outcomes: Vec<_> = vectors
        .iter()
        .map(|uv| {
            let pv = PredictionVector {
                users: users.to_vec(),
                values: uv.get(kind).to_vec(),
            };
            decide_identity(&pv, eta_t, Some(&uv.user))
        })
        .collect();
    Tallies::from_identifications(&outcomes)
}

/// Split, filter, select, enroll and authenticate `n_trials` times, each
/// trial with its own derived seed.
pub fn shuffle_trials(matrix: &FeatureMatrix, config: &TrialConfig) -> Result<EvaluationReport> {
    if config.n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be positive".into()));
    }
    FusionWeights::new(config.weights.w.clone())?;
    let trials = (0..config.n_trials)
        .map(|t| run_trial(matrix, config, t))
        .collect::<Result<Vec<_>>>()?;
    let collect = |f: &dyn Fn(&TrialReport) -> f64| -> MeanSpread {
        MeanSpread::of(&trials.iter().map(f).collect::<Vec<_>>()).expect("at least one trial")
    };
    let identification = VectorKind::ALL
        .iter()
        .enumerate()
        .map(|(b, &kind)| {
            let precisions: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.identification[b].precision)
                .collect();
            BlockSummary {
                kind,
                precision: MeanSpread::of(&precisions),
                accuracy: collect(&|t| t.identification[b].accuracy),
                rank: rank_statistics(
                    trials
                        .iter()
                        .flat_map(|t| t.vectors.iter().map(move |uv| (uv.get(kind), uv.index))),
                ),
            }
        })
        .collect();
    let summary = Summary {
        tcr_ht: collect(&|t| t.tcr_ht),
        tcr_ml: collect(&|t| t.tcr_ml),
        identification,
    };
    Ok(EvaluationReport {
        config: config.clone(),
        n_users: matrix.users().len(),
        n_rows: matrix.n_rows(),
        trials,
        summary,
    })
}

impl EvaluationReport {
    /// `(eta_t, tallies)` pooled over all trials for each threshold.
    pub fn threshold_sweep(&self, kind: VectorKind, etas: &[f64]) -> Vec<(f64, Tallies)> {
        etas.iter()
            .map(|&eta| {
                let mut total = Tallies::default();
                for t in &self.trials {
                    let s = identification_tallies(&t.users, &t.vectors, kind, eta);
                    total.n += s.n;
                    total.t += s.t;
                    total.f += s.f;
                    total.h += s.h;
                }
                (eta, total)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per trial.
    pub fn write_trials_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["trial".to_string(), "seed".into(), "n_models".into(), "n_discarded".into(), "tcr_ht".into(), "tcr_ml".into()];
        for kind in VectorKind::ALL {
            for col in ["t", "f", "h", "precision", "accuracy"] {
                header.push(format!("{}_{col}", kind.name()));
            }
        }
        w.write_record(&header)?;
        for t in &self.trials {
            let mut rec = vec![
                t.trial.to_string(),
                t.seed.to_string(),
                t.n_models.to_string(),
                t.n_discarded.to_string(),
                t.tcr_ht.to_string(),
                t.tcr_ml.to_string(),
            ];
            for s in &t.identification {
                rec.push(s.tallies.t.to_string());
                rec.push(s.tallies.f.to_string());
                rec.push(s.tallies.h.to_string());
                rec.push(s.precision.map(|p| p.to_string()).unwrap_or_default());
                rec.push(s.accuracy.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
