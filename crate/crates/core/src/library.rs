//! Enrollment: the library of pairwise scaler+forest models, one per
//! unordered user pair, plus the training features kept for the
//! hypothesis-test path.
//!
//! On disk the library is a single JSON document. Each pipeline and the
//! training store carry a SHA-256 checksum of their canonical serialization.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::learn::{fit_pair_pipeline, CVConfig, PairFit, ScalerModelPipeline};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedPair {
    pub i: usize,
    pub j: usize,
    pub cv_score: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLibrary {
    pub users: Vec<String>,
    pub selected_features: Vec<String>,
    pub cv: CVConfig,
    pipelines: BTreeMap<(usize, usize), ScalerModelPipeline>,
    discarded: Vec<DiscardedPair>,
    training_store: BTreeMap<String, FeatureMatrix>,
    /// Pair fits performed over the library's lifetime.
    pub fit_calls: usize,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

fn fit_pairs(
    users: &[String],
    store: &BTreeMap<String, FeatureMatrix>,
    pairs: &[(usize, usize)],
    cv: &CVConfig,
) -> Result<Vec<((usize, usize), PairFit)>> {
    let rows: BTreeMap<&str, Vec<Vec<f64>>> = store
        .iter()
        .map(|(u, m)| (u.as_str(), m.values()))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let fit = fit_pair_pipeline(
                (&users[i], &users[j]),
                &rows[users[i].as_str()],
                &rows[users[j].as_str()],
                cv,
            )?;
            Ok(((i, j), fit))
        })
        .collect()
}

impl ModelLibrary {
    fn absorb(&mut self, fits: Vec<((usize, usize), PairFit)>) {
        self.fit_calls += fits.len();
        for ((i, j), fit) in fits {
            match fit {
                PairFit::Fitted(p) => {
                    self.pipelines.insert((i, j), p);
                }
                PairFit::Discarded { cv_score, .. } => self.discarded.push(DiscardedPair {
                    i,
                    j,
                    cv_score,
                    reason: format!("cross-validation score {cv_score:.3} <= 0.60"),
                }),
            }
        }
    }

    /// Fit every unordered pair of the users present in `train`.
    pub fn enroll_all(train: &FeatureMatrix, cv: &CVConfig) -> Result<ModelLibrary> {
        let users = train.users();
        if users.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "enrollment needs at least 2 users, got {}",
                users.len()
            )));
        }
        let store: BTreeMap<String, FeatureMatrix> =
            users.iter().map(|u| (u.clone(), train.rows_for(u))).collect();
        let pairs: Vec<(usize, usize)> = (0..users.len())
            .flat_map(|i| (i + 1..users.len()).map(move |j| (i, j)))
            .collect();
        let fits = fit_pairs(&users, &store, &pairs, cv)?;
        let mut lib = ModelLibrary {
            users,
            selected_features: train.feature_names.clone(),
            cv: cv.clone(),
            pipelines: BTreeMap::new(),
            discarded: Vec::new(),
            training_store: store,
            fit_calls: 0,
        };
        lib.absorb(fits);
        Ok(lib)
    }

    /// A new library with one more user; only the new user's pairs are fitted.
    pub fn enroll_user(&self, new_user_train: &FeatureMatrix) -> Result<ModelLibrary> {
        let ids = new_user_train.users();
        let [user] = ids.as_slice() else {
            return Err(Error::InvalidArgument(format!(
                "expected rows of exactly one user, got {}",
                ids.len()
            )));
        };
        if self.users.contains(user) {
            return Err(Error::DuplicateUser(user.clone()));
        }
        let projected = new_user_train.select_named(&self.selected_features)?;
        let mut lib = self.clone();
        lib.users.push(user.clone());
        lib.training_store.insert(user.clone(), projected);
        let n = lib.users.len() - 1;
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, n)).collect();
        let fits = fit_pairs(&lib.users, &lib.training_store, &pairs, &lib.cv)?;
        lib.absorb(fits);
        Ok(lib)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Trained pipelines (discarded pairs excluded).
    pub fn n_models(&self) -> usize {
        self.pipelines.len()
    }

    /// Pair slots: trained plus discarded.
    pub fn n_slots(&self) -> usize {
        self.pipelines.len() + self.discarded.len()
    }

    pub fn discarded(&self) -> &[DiscardedPair] {
        &self.discarded
    }

    pub fn user_index(&self, user: &str) -> Result<usize> {
        self.users
            .iter()
            .position(|u| u == user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    /// Model for the unordered pair; `None` if it was discarded.
    pub fn pipeline(&self, i: usize, j: usize) -> Option<&ScalerModelPipeline> {
        self.pipelines.get(&ordered(i, j))
    }

    pub fn pipelines(&self) -> impl Iterator<Item = (&(usize, usize), &ScalerModelPipeline)> {
        self.pipelines.iter()
    }

    pub fn training(&self, user: &str) -> Option<&FeatureMatrix> {
        self.training_store.get(user)
    }

    /// Training rows per user in library order.
    pub fn training_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.users
            .iter()
            .map(|u| self.training_store[u].values())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let pipelines = self
            .pipelines
            .iter()
            .map(|(&(i, j), p)| {
                Ok(PipelineEntry {
                    i,
                    j,
                    checksum: checksum(&serde_json::to_string(p)?),
                    pipeline: p.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let file = LibraryFile {
            format_version: FORMAT_VERSION,
            users: self.users.clone(),
            selected_features: self.selected_features.clone(),
            cv: self.cv.clone(),
            fit_calls: self.fit_calls,
            pipelines,
            discarded: self.discarded.clone(),
            training_checksum: checksum(&serde_json::to_string(&self.training_store)?),
            training_store: self.training_store.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<ModelLibrary> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptFile(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptFile("missing format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version as u32,
                expected: FORMAT_VERSION,
            });
        }
        let file: LibraryFile =
            serde_json::from_value(value).map_err(|e| Error::CorruptFile(e.to_string()))?;
        let mut pipelines = BTreeMap::new();
        for entry in file.pipelines {
            if checksum(&serde_json::to_string(&entry.pipeline)?) != entry.checksum {
                return Err(Error::CorruptFile(format!(
                    "checksum mismatch for pair ({}, {})",
                    entry.i, entry.j
                )));
            }
            if entry.i >= entry.j || entry.j >= file.users.len() {
                return Err(Error::CorruptFile(format!(
                    "bad pair index ({}, {})",
                    entry.i, entry.j
                )));
            }
            pipelines.insert((entry.i, entry.j), entry.pipeline);
        }
        if checksum(&serde_json::to_string(&file.training_store)?) != file.training_checksum {
            return Err(Error::CorruptFile("training store checksum mismatch".into()));
        }
        if file.users.iter().any(|u| !file.training_store.contains_key(u)) {
            return Err(Error::CorruptFile("training store incomplete".into()));
        }
        Ok(ModelLibrary {
            users: file.users,
            selected_features: file.selected_features,
            cv: file.cv,
            pipelines,
            discarded: file.discarded,
            training_store: file.training_store,
            fit_calls: file.fit_calls,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelLibrary> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn checksum(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct PipelineEntry {
    i: usize,
    j: usize,
    checksum: String,
    pipeline: ScalerModelPipeline,
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    format_version: u32,
    users: Vec<String>,
    selected_features: Vec<String>,
    cv: CVConfig,
    fit_calls: usize,
    pipelines: Vec<PipelineEntry>,
    discarded: Vec<DiscardedPair>,
    training_checksum: String,
    training_store: BTreeMap<String, FeatureMatrix>,
}

/// `n choose 2`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}
