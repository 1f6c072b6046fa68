use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ConfirmationOutcome, PredictionVector};
use crate::error::{Error, Result};
use crate::httest::hotelling_t2;
use crate::library::ModelLibrary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Block {
    /// Pairwise Hotelling tests at significance `alpha`.
    Ht { alpha: f64 },
    /// Pairwise model library.
    Ml,
}

fn check_rows(library: &ModelLibrary, rows: &[Vec<f64>]) -> Result<()> {
    if library.n_users() == 0 {
        return Err(Error::EmptyLibrary);
    }
    if rows.is_empty() {
        return Err(Error::EmptyTestData);
    }
    let d = library.selected_features.len();
    match rows.iter().find(|r| r.len() != d) {
        Some(r) => Err(Error::LengthMismatch(r.len(), d)),
        None => Ok(()),
    }
}

/// Rows predicted as each side, for every trained pair model.
pub fn pair_row_counts(
    library: &ModelLibrary,
    rows: &[Vec<f64>],
) -> Result<Vec<((usize, usize), [usize; 2])>> {
    check_rows(library, rows)?;
    let pipelines: Vec<_> = library.pipelines().collect();
    Ok(pipelines
        .par_iter()
        .map(|(&key, p)| (key, p.row_counts(rows)))
        .collect())
}

/// p-value of the test rows against each user's training rows, in library order.
pub fn hotelling_p_values(library: &ModelLibrary, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_rows(library, rows)?;
    let training = library.training_rows();
    training
        .par_iter()
        .map(|train| Ok(hotelling_t2(rows, train)?.p_value))
        .collect()
}

/// Per-user Yes counts and voting-model counts. A row-majority tie is No for both sides.
fn ml_votes(n: usize, counts: &[((usize, usize), [usize; 2])]) -> (Vec<usize>, Vec<usize>) {
    let mut v = vec![0; n];
    let mut voters = vec![0; n];
    for &((i, j), [a, b]) in counts {
        voters[i] += 1;
        voters[j] += 1;
        if a > b {
            v[i] += 1;
        } else if b > a {
            v[j] += 1;
        }
    }
    (v, voters)
}

/// Votes user `i` wins against the others: the higher p-value wins unless
/// both are at or below `alpha`; equal p-values cast no vote.
fn ht_vote(p: &[f64], i: usize, alpha: f64) -> usize {
    (0..p.len())
        .filter(|&j| j != i && p[i].max(p[j]) > alpha && p[i] > p[j])
        .count()
}

pub fn confirm_ml(
    claimed: &str,
    rows: &[Vec<f64>],
    library: &ModelLibrary,
    eta_t: f64,
) -> Result<ConfirmationOutcome> {
    check_rows(library, rows)?;
    let i = library.user_index(claimed)?;
    let counts: Vec<_> = (0..library.n_users())
        .filter(|&j| j != i)
        .filter_map(|j| {
            let key = if i < j { (i, j) } else { (j, i) };
            library.pipeline(i, j).map(|p| (key, p))
        })
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(key, p)| (key, p.row_counts(rows)))
        .collect();
    let (v, voters) = ml_votes(library.n_users(), &counts);
    Ok(ConfirmationOutcome::new(claimed, v[i], voters[i], eta_t))
}

pub fn confirm_ht(
    claimed: &str,
    rows: &[Vec<f64>],
    library: &ModelLibrary,
    alpha: f64,
    eta_t: f64,
) -> Result<ConfirmationOutcome> {
    check_rows(library, rows)?;
    let i = library.user_index(claimed)?;
    let p = hotelling_p_values(library, rows)?;
    Ok(ConfirmationOutcome::new(
        claimed,
        ht_vote(&p, i, alpha),
        library.n_users() - 1,
        eta_t,
    ))
}

/// ML Yes counts and voter counts for every user from one pass over the library.
pub(crate) fn ml_votes_all(library: &ModelLibrary, rows: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<usize>)> {
    Ok(ml_votes(library.n_users(), &pair_row_counts(library, rows)?))
}

pub(crate) fn ht_votes_all(p: &[f64], alpha: f64) -> Vec<usize> {
    (0..p.len()).map(|i| ht_vote(p, i, alpha)).collect()
}

/// Run the confirmation block for every enrolled user; `V[i] = v_i`.
pub fn identify(rows: &[Vec<f64>], library: &ModelLibrary, block: Block) -> Result<PredictionVector> {
    let values = match block {
        Block::Ml => ml_votes_all(library, rows)?.0,
        Block::Ht { alpha } => ht_votes_all(&hotelling_p_values(library, rows)?, alpha),
    };
    Ok(PredictionVector {
        users: library.users.clone(),
        values: values.into_iter().map(|v| v as f64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMatrix, FeatureVector};
    use crate::learn::{CVConfig, ForestParams, ParamGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blob(center: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| center.iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    fn centers(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|u| vec![6.0 * u as f64, 3.0 * (u % 2) as f64, 0.0]).collect()
    }

    fn library(n: usize) -> ModelLibrary {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        for (u, c) in centers(n).iter().enumerate() {
            for (r, values) in blob(c, 40, &mut rng).into_iter().enumerate() {
                rows.push(FeatureVector { user_id: format!("u{u}"), recording_id: format!("r{}", r % 4), segment_index: r, values });
            }
        }
        let m = FeatureMatrix::new(vec!["a".into(), "b".into(), "c".into()], rows).unwrap();
        let cv = CVConfig { k: 3, grid: ParamGrid::single(ForestParams { n_trees: 11, ..Default::default() }), seed: 2 };
        ModelLibrary::enroll_all(&m, &cv).unwrap()
    }

    #[test]
    fn ht_vote_rules() {
        // (p_i, p_j) = (0.5, 0.0001): a vote for i
        assert_eq!(ht_vote(&[0.5, 0.0001], 0, 0.001), 1);
        assert_eq!(ht_vote(&[0.5, 0.0001], 1, 0.001), 0);
        // both at or below alpha: no vote
        assert_eq!(ht_vote(&[0.0005, 0.0003], 0, 0.001), 0);
        assert_eq!(ht_vote(&[0.0005, 0.0003], 1, 0.001), 0);
        assert_eq!(ht_vote(&[0.3, 0.3], 0, 0.001), 0);
    }

    #[test]
    fn ml_tie_is_no() {
        let (v, voters) = ml_votes(2, &[((0, 1), [3, 3])]);
        assert_eq!(v, vec![0, 0]);
        assert_eq!(voters, vec![1, 1]);
    }

    #[test]
    fn separable_fixture() {
        let lib = library(4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (u, c) in centers(4).iter().enumerate() {
            let test = blob(c, 20, &mut rng);
            let id = format!("u{u}");
            let ml = confirm_ml(&id, &test, &lib, 50.0).unwrap();
            assert_eq!((ml.v, ml.n_voters, ml.confirmed), (3, 3, true));
            assert!((ml.eta - 100.0 * ml.v as f64 / 3.0).abs() < 1e-9);
            let ht = confirm_ht(&id, &test, &lib, 0.001, 50.0).unwrap();
            assert!(ht.confirmed);
            for block in [Block::Ml, Block::Ht { alpha: 0.001 }] {
                let v = identify(&test, &lib, block).unwrap();
                assert_eq!(v.n_users(), 4);
                let best = (0..4).max_by(|&a, &b| v.values[a].total_cmp(&v.values[b])).unwrap();
                assert_eq!(best, u);
                assert!(v.values.iter().all(|x| *x >= 0.0 && *x <= 3.0));
            }
        }
    }

    #[test]
    fn errors() {
        let lib = library(2);
        assert!(matches!(confirm_ml("nobody", &[vec![0.0; 3]], &lib, 50.0), Err(Error::UnknownUser(_))));
        assert!(matches!(confirm_ht("u0", &[], &lib, 0.001, 50.0), Err(Error::EmptyTestData)));
        assert!(matches!(identify(&[vec![0.0; 2]], &lib, Block::Ml), Err(Error::LengthMismatch(2, 3))));
    }
}
