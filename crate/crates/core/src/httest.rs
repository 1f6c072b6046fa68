//! Two-sample Hotelling's T² test and the per-dimension z-box classifier.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::learn::Classifier;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotellingResult {
    pub t2: f64,
    pub f_stat: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
    /// The pooled covariance needed a ridge to factor.
    pub ridge_applied: bool,
}

fn mean_vector(rows: &[Vec<f64>], d: usize) -> DVector<f64> {
    let mut m = DVector::zeros(d);
    for r in rows {
        for j in 0..d {
            m[j] += r[j];
        }
    }
    m / rows.len() as f64
}

fn scatter(rows: &[Vec<f64>], mean: &DVector<f64>) -> DMatrix<f64> {
    let d = mean.len();
    let mut s = DMatrix::zeros(d, d);
    for r in rows {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in 0..=a {
                s[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    s
}

/// Upper tail `P(F > f)` of the F(df1, df2) distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let x = df2 / (df2 + df1 * f);
    beta_reg(df2 / 2.0, df1 / 2.0, x).clamp(0.0, 1.0)
}

/// Equality-of-means test with pooled covariance.
pub fn hotelling_t2(sample_a: &[Vec<f64>], sample_b: &[Vec<f64>]) -> Result<HotellingResult> {
    let (na, nb) = (sample_a.len(), sample_b.len());
    if na == 0 || nb == 0 {
        return Err(Error::EmptyData);
    }
    let d = sample_a[0].len();
    if d == 0 || sample_a.iter().chain(sample_b).any(|r| r.len() != d) {
        return Err(Error::LengthMismatch(d, 0));
    }
    let df = na + nb - 2;
    if df <= d {
        return Err(Error::InsufficientSamples { df, dim: d });
    }
    let ma = mean_vector(sample_a, d);
    let mb = mean_vector(sample_b, d);
    let pooled = (scatter(sample_a, &ma) + scatter(sample_b, &mb)) / df as f64;
    let diff = &ma - &mb;

    let mut ridge_applied = false;
    let chol = match pooled.clone().cholesky() {
        Some(c) => c,
        None => {
            let trace = pooled.trace();
            if !(trace > 0.0) {
                return Err(Error::SingularCovariance);
            }
            ridge_applied = true;
            let ridge = DMatrix::identity(d, d) * (1e-10 * trace / d as f64);
            (pooled + ridge)
                .cholesky()
                .ok_or(Error::SingularCovariance)?
        }
    };
    let solved = chol.solve(&diff);
    let quad = diff.dot(&solved).max(0.0);
    let (naf, nbf) = (na as f64, nb as f64);
    let t2 = naf * nbf / (naf + nbf) * quad;
    let df2 = na + nb - d - 1;
    let f_stat = t2 * df2 as f64 / (d as f64 * df as f64);
    Ok(HotellingResult {
        t2,
        f_stat,
        df1: d,
        df2,
        p_value: f_sf(f_stat, d as f64, df2 as f64),
        ridge_applied,
    })
}

/// Per-dimension two-sided z-tests against a training sample; the point is
/// accepted only when every dimension accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZBox {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub z_crit: f64,
}

impl ZBox {
    pub fn fit(training: &[Vec<f64>], confidence: f64) -> Result<ZBox> {
        if training.len() < 2 {
            return Err(Error::TooShort {
                required: 2,
                actual: training.len(),
            });
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence {confidence} outside (0, 1)"
            )));
        }
        let d = training[0].len();
        let mut mean = Vec::with_capacity(d);
        let mut std = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = training.iter().map(|r| r[j]).collect();
            let s = stats::sample_variance(&col).sqrt();
            if !(s > 0.0) {
                return Err(Error::ZeroVariance);
            }
            mean.push(stats::mean(&col));
            std.push(s);
        }
        Ok(ZBox {
            mean,
            std,
            z_crit: stats::two_sided_z(confidence),
        })
    }

    pub fn accepts(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .all(|(x, (m, s))| ((x - m) / s).abs() <= self.z_crit)
    }
}

impl Classifier for ZBox {
    /// 1 when accepted.
    fn classify(&self, row: &[f64]) -> u8 {
        u8::from(self.accepts(row))
    }
}

pub fn zbox_classify(point: &[f64], training: &[Vec<f64>], confidence: f64) -> Result<bool> {
    Ok(ZBox::fit(training, confidence)?.accepts(point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn identical_samples() {
        let a = gaussian(30, 3, 0.0, 1);
        let r = hotelling_t2(&a, &a).unwrap();
        assert!(r.t2.abs() < 1e-12);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn one_dimension_is_squared_t() {
        let a = gaussian(25, 1, 0.0, 2);
        let b = gaussian(31, 1, 0.4, 3);
        let (ca, cb): (Vec<f64>, Vec<f64>) = (a.iter().map(|r| r[0]).collect(), b.iter().map(|r| r[0]).collect());
        let (na, nb) = (25.0, 31.0);
        let sp2 = ((na - 1.0) * stats::sample_variance(&ca) + (nb - 1.0) * stats::sample_variance(&cb)) / (na + nb - 2.0);
        let t = (stats::mean(&ca) - stats::mean(&cb)) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
        let r = hotelling_t2(&a, &b).unwrap();
        assert!(((r.t2 - t * t) / (t * t)).abs() < 1e-9);
        assert_eq!((r.df1, r.df2), (1, 54));
    }

    const REF_A: f64 = 0.07325435201794978;
    const REF_B: f64 = 0.6724813033633907;

    #[test]
    fn f_tail_reference_values() {
        // F(1, df) tail equals the two-sided t tail; F(1,10) at 4.964603 -> 0.05
        assert!((f_sf(4.964603, 1.0, 10.0) - 0.05).abs() < 1e-6);
        // reference values from scipy.stats.f.sf
        let p = f_sf(3.1326677684046667, 10.0, 189.0);
        assert!((p - 0.001).abs() < 1e-12, "{p}");
        assert!((f_sf(2.5, 3.0, 40.0) / REF_A - 1.0).abs() < 1e-10);
        assert!((f_sf(0.7, 7.0, 13.0) / REF_B - 1.0).abs() < 1e-10);
    }

    #[test]
    fn p_value_monotone_in_t2() {
        let mut last = 1.0;
        for i in 0..50 {
            let p = f_sf(i as f64 * 0.2, 4.0, 30.0);
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn affine_invariance() {
        let a = gaussian(40, 3, 0.0, 4);
        let b = gaussian(35, 3, 0.3, 5);
        let m = [[2.0, 0.5, 0.0], [0.1, 1.0, -0.3], [0.0, 0.2, 3.0]];
        let shift = [5.0, -1.0, 2.0];
        let tf = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| (0..3).map(|i| (0..3).map(|j| m[i][j] * r[j]).sum::<f64>() + shift[i]).collect())
                .collect()
        };
        let r1 = hotelling_t2(&a, &b).unwrap();
        let r2 = hotelling_t2(&tf(&a), &tf(&b)).unwrap();
        assert!(((r1.t2 - r2.t2) / r1.t2).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        let a = gaussian(3, 4, 0.0, 6);
        assert!(matches!(
            hotelling_t2(&a, &a),
            Err(Error::InsufficientSamples { df: 4, dim: 4 })
        ));
        let flat: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0, 2.0]).collect();
        assert!(matches!(hotelling_t2(&flat, &flat), Err(Error::SingularCovariance)));
    }

    #[test]
    fn duplicated_feature_uses_ridge() {
        let a: Vec<Vec<f64>> = gaussian(30, 1, 0.0, 7).into_iter().map(|r| vec![r[0], r[0]]).collect();
        let b: Vec<Vec<f64>> = gaussian(30, 1, 0.2, 8).into_iter().map(|r| vec![r[0], r[0]]).collect();
        let r = hotelling_t2(&a, &b).unwrap();
        assert!(r.ridge_applied);
        assert!(r.p_value.is_finite());
    }

    #[test]
    fn zbox_cases() {
        let train = gaussian(200, 2, 0.0, 9);
        let zb = ZBox::fit(&train, 0.999).unwrap();
        assert!(zb.accepts(&zb.mean.clone()));
        let mut far = zb.mean.clone();
        far[1] += 10.0 * zb.std[1];
        assert!(!zb.accepts(&far));
        // the acceptance region is the axis-aligned box |z_j| <= z_crit
        for ix in -20..=20 {
            for iy in -20..=20 {
                let p = [ix as f64 * 0.25, iy as f64 * 0.25];
                let direct = (0..2).all(|j| ((p[j] - zb.mean[j]) / zb.std[j]).abs() <= zb.z_crit);
                assert_eq!(zb.accepts(&p), direct);
                assert_eq!(zbox_classify(&p, &train, 0.999).unwrap(), direct);
            }
        }
        let flat: Vec<Vec<f64>> = (0..5).map(|_| vec![1.0]).collect();
        assert!(matches!(ZBox::fit(&flat, 0.999), Err(Error::ZeroVariance)));
    }
}
