//! User confirmation, identification with weighted fusion, and the
//! TCR / precision / accuracy metrics.

mod confirm;
mod trials;

pub use confirm::{confirm_ht, confirm_ml, hotelling_p_values, identify, pair_row_counts, Block};
pub use trials::{
    enroll_trial, rank_statistics, shuffle_trials, BlockSummary, EvaluationReport, IdentificationSummary,
    MeanSpread, RankStats, Summary, TrialConfig, TrialLibrary, TrialReport, UserVectors, VectorKind,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_CONFIRM_ETA: f64 = 50.0;
pub const DEFAULT_IDENTIFY_ETA: f64 = 55.0;

/// One entry per library user, in library order: favourable-prediction
/// counts, or fused scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub users: Vec<String>,
    pub values: Vec<f64>,
}

impl PredictionVector {
    pub fn n_users(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmationOutcome {
    pub claimed_user: String,
    pub v: usize,
    /// Denominator of `eta`: pair models able to vote.
    pub n_voters: usize,
    pub eta: f64,
    pub eta_t: f64,
    pub confirmed: bool,
}

impl ConfirmationOutcome {
    pub(crate) fn new(claimed_user: &str, v: usize, n_voters: usize, eta_t: f64) -> Self {
        let eta = if n_voters == 0 {
            0.0
        } else {
            100.0 * v as f64 / n_voters as f64
        };
        ConfirmationOutcome {
            claimed_user: claimed_user.to_string(),
            v,
            n_voters,
            eta,
            eta_t,
            confirmed: n_voters > 0 && eta >= eta_t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tally {
    TruePositive,
    FalsePositive,
    NotIdentified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationOutcome {
    pub true_user: Option<String>,
    pub identified_user: Option<String>,
    /// `100 * max(V) / (n - 1)`.
    pub confidence: f64,
    /// Absent when the true user is unknown.
    pub tally: Option<Tally>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w: Vec<f64>,
}

impl FusionWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if w.is_empty() || w.iter().any(|x| !(0.0..=1.0).contains(x)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadWeights(w));
        }
        Ok(FusionWeights { w })
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights { w: vec![0.3, 0.7] }
    }
}

/// `V' = sum_k w_k V_k`, elementwise.
pub fn fuse(vectors: &[PredictionVector], weights: &FusionWeights) -> Result<PredictionVector> {
    let weights = FusionWeights::new(weights.w.clone())?;
    if vectors.len() != weights.w.len() {
        return Err(Error::LengthMismatch(vectors.len(), weights.w.len()));
    }
    let n = vectors[0].n_users();
    let mut values = vec![0.0; n];
    for (v, w) in vectors.iter().zip(&weights.w) {
        if v.n_users() != n {
            return Err(Error::LengthMismatch(v.n_users(), n));
        }
        for (acc, x) in values.iter_mut().zip(&v.values) {
            *acc += w * x;
        }
    }
    Ok(PredictionVector {
        users: vectors[0].users.clone(),
        values,
    })
}

/// Unique argmax of `V` if its confidence reaches `eta_t`.
pub fn decide_identity(v: &PredictionVector, eta_t: f64, true_user: Option<&str>) -> IdentificationOutcome {
    let n = v.n_users();
    let max = v.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..n).filter(|&i| v.values[i] == max).collect();
    let confidence = if n > 1 && max > 0.0 {
        100.0 * max / (n - 1) as f64
    } else {
        0.0
    };
    let identified_user = match winners.as_slice() {
        [i] if max > 0.0 && confidence >= eta_t => Some(v.users[*i].clone()),
        _ => None,
    };
    let tally = true_user.map(|t| match &identified_user {
        None => Tally::NotIdentified,
        Some(u) if u == t => Tally::TruePositive,
        Some(_) => Tally::FalsePositive,
    });
    IdentificationOutcome {
        true_user: true_user.map(str::to_string),
        identified_user,
        confidence,
        tally,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub n: usize,
    pub confirmed: usize,
    pub t: usize,
    pub f: usize,
    pub h: usize,
}

impl Tallies {
    pub fn from_identifications(outcomes: &[IdentificationOutcome]) -> Tallies {
        let mut out = Tallies {
            n: outcomes.len(),
            ..Default::default()
        };
        for o in outcomes {
            match o.tally {
                Some(Tally::TruePositive) => out.t += 1,
                Some(Tally::FalsePositive) => out.f += 1,
                _ => out.h += 1,
            }
        }
        out
    }

    pub fn from_confirmations(outcomes: &[ConfirmationOutcome]) -> Tallies {
        Tallies {
            n: outcomes.len(),
            confirmed: outcomes.iter().filter(|o| o.confirmed).count(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tcr: f64,
    /// Absent when nothing was identified.
    pub precision: Option<f64>,
    pub accuracy: f64,
}

pub fn metrics(tallies: &Tallies) -> Result<Metrics> {
    if tallies.n == 0 {
        return Err(Error::EmptyData);
    }
    let n = tallies.n as f64;
    let identified = tallies.t + tallies.f;
    Ok(Metrics {
        tcr: 100.0 * tallies.confirmed as f64 / n,
        precision: (identified > 0).then(|| 100.0 * tallies.t as f64 / identified as f64),
        accuracy: 100.0 * tallies.t as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(values: &[f64]) -> PredictionVector {
        PredictionVector {
            users: (1..=values.len()).map(|i| format!("user{i}")).collect(),
            values: values.to_vec(),
        }
    }

    fn round1(x: f64) -> f64 {
        (x * 10.0).round() / 10.0
    }

    #[test]
    fn worked_metric_values() {
        let m = metrics(&Tallies { n: 94, t: 31, f: 58, h: 5, confirmed: 0 }).unwrap();
        assert_eq!(round1(m.precision.unwrap()), 34.8);
        assert_eq!(round1(m.accuracy), 33.0);
        let m = metrics(&Tallies { n: 94, t: 18, f: 6, h: 70, confirmed: 0 }).unwrap();
        assert_eq!(round1(m.precision.unwrap()), 75.0);
        assert_eq!(round1(m.accuracy), 19.1);
        let m = metrics(&Tallies { n: 5, confirmed: 5, h: 5, ..Default::default() }).unwrap();
        assert_eq!(m.tcr, 100.0);
        assert_eq!(m.precision, None);
        assert!(metrics(&Tallies::default()).is_err());
    }

    #[test]
    fn eta_arithmetic() {
        let o = ConfirmationOutcome::new("u", 93, 93, 100.0);
        assert_eq!(o.eta, 100.0);
        assert!(o.confirmed);
        let o = ConfirmationOutcome::new("u", 47, 93, 50.0);
        assert!((o.eta - 100.0 * 47.0 / 93.0).abs() < 1e-9);
        assert!(o.confirmed);
        assert!(!ConfirmationOutcome::new("u", 46, 93, 50.0).confirmed);
        assert!(!ConfirmationOutcome::new("u", 0, 0, 0.0).confirmed);
    }

    #[test]
    fn fusion_rules() {
        let a = pv(&[1.0, 4.0, 2.0]);
        let b = pv(&[3.0, 0.0, 2.0]);
        assert_eq!(fuse(&[a.clone(), b.clone()], &FusionWeights::new(vec![1.0, 0.0]).unwrap()).unwrap(), a);
        let same = fuse(&[a.clone(), a.clone()], &FusionWeights::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(same, a);
        let d = fuse(&[a.clone(), b.clone()], &FusionWeights::default()).unwrap();
        for i in 0..3 {
            assert!((d.values[i] - (0.3 * a.values[i] + 0.7 * b.values[i])).abs() < 1e-12);
        }
        assert!(matches!(FusionWeights::new(vec![0.5, 0.6]), Err(Error::BadWeights(_))));
        assert!(matches!(FusionWeights::new(vec![1.5, -0.5]), Err(Error::BadWeights(_))));
        assert!(matches!(
            fuse(&[a.clone(), pv(&[1.0])], &FusionWeights::default()),
            Err(Error::LengthMismatch(..))
        ));
        assert!(matches!(fuse(&[a], &FusionWeights::default()), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn identity_decisions() {
        let o = decide_identity(&pv(&[3.0, 7.0, 2.0]), 0.0, Some("user2"));
        assert_eq!(o.identified_user.as_deref(), Some("user2"));
        assert_eq!(o.tally, Some(Tally::TruePositive));
        let o = decide_identity(&pv(&[5.0, 5.0, 1.0]), 0.0, Some("user1"));
        assert_eq!(o.identified_user, None);
        assert_eq!(o.tally, Some(Tally::NotIdentified));
        // 2 of 5 possible votes is 40%
        let o = decide_identity(&pv(&[2.0, 1.0, 0.0, 0.0, 0.0, 1.0]), 55.0, Some("user2"));
        assert_eq!(o.confidence, 40.0);
        assert_eq!(o.identified_user, None);
        let o = decide_identity(&pv(&[0.0, 0.0, 0.0]), 0.0, None);
        assert_eq!(o.identified_user, None);
        assert_eq!(o.tally, None);
        let o = decide_identity(&pv(&[1.0, 2.0, 0.0]), 0.0, Some("user1"));
        assert_eq!(o.tally, Some(Tally::FalsePositive));
    }

    #[test]
    fn argmax_invariant_under_monotone_transform() {
        let v = pv(&[0.2, 3.1, 1.7, 2.9]);
        let t = PredictionVector {
            users: v.users.clone(),
            values: v.values.iter().map(|x| (x * 2.0).exp() + 1.0).collect(),
        };
        assert_eq!(
            decide_identity(&v, 0.0, None).identified_user,
            decide_identity(&t, 0.0, None).identified_user
        );
    }

    #[test]
    fn raising_threshold_never_adds_identifications() {
        let vs: Vec<PredictionVector> = (0..30)
            .map(|k| pv(&(0..8).map(|i| ((i * 7 + k * 3) % 8) as f64 * ((k % 3) as f64 + 0.5)).collect::<Vec<_>>()))
            .collect();
        let mut last = usize::MAX;
        for eta in (50..=96).map(f64::from) {
            let outcomes: Vec<_> = vs.iter().map(|v| decide_identity(v, eta, Some("user1"))).collect();
            let t = Tallies::from_identifications(&outcomes);
            assert_eq!(t.t + t.f + t.h, t.n);
            assert!(t.t + t.f <= last);
            last = t.t + t.f;
        }
    }
}
