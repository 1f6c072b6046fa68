//! Analytic and Monte Carlo oracles for the signal, spectrum and test stages.

use breathid_core::httest::hotelling_t2;
use breathid_core::mfdfa::{mfdfa, spectrum_features, MfdfaConfig};
use breathid_core::signal::{ks_normality, normalize_zscore, shuffle_surrogate, TimeSeries};
use breathid_core::synth::{binomial_cascade, fgn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generalized Hurst exponent of the binomial cascade with multiplier `a`.
pub fn cascade_h(q: f64, a: f64) -> f64 {
    if q == 0.0 {
        -(a.log2() + (1.0 - a).log2()) / 2.0
    } else {
        1.0 / q - (a.powf(q) + (1.0 - a).powf(q)).ln() / (q * std::f64::consts::LN_2)
    }
}

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn cascade_hurst_matches_analytic_curve() {
    let cfg = MfdfaConfig::default();
    for seed in 0..3 {
        let c = binomial_cascade(1 << 14, 0.75, seed).unwrap();
        let r = mfdfa(&c.values, &cfg).unwrap();
        for (q, h) in r.q.iter().zip(&r.hq) {
            let want = cascade_h(*q, 0.75);
            assert!((h - want).abs() <= 0.1, "seed {seed} q {q}: {h} vs {want}");
        }
    }
}

#[test]
fn white_noise_spectrum_is_narrow_around_half() {
    let cfg = MfdfaConfig::default();
    for seed in 0..5 {
        let r = mfdfa(&white(1 << 14, seed), &cfg).unwrap();
        let s = spectrum_features(&r).unwrap();
        assert!((0.4..=0.6).contains(&s.beta), "{}", s.beta);
        assert!(s.omega < 0.3, "{}", s.omega);
        assert!((r.h_at(2.0) - 0.5).abs() < 0.05);
    }
}

#[test]
fn fgn_hurst_recovered() {
    let cfg = MfdfaConfig::default();
    let mut total = 0.0;
    for seed in 0..5 {
        let s = fgn(1 << 14, 0.8, seed).unwrap();
        total += mfdfa(&s.values, &cfg).unwrap().h_at(2.0);
    }
    let h = total / 5.0;
    assert!((h - 0.8).abs() < 0.05, "{h}");
}

#[test]
fn shuffling_destroys_cascade_correlations() {
    let cfg = MfdfaConfig::default();
    for seed in 0..10 {
        let c = normalize_zscore(&binomial_cascade(1 << 14, 0.75, seed).unwrap()).unwrap();
        let sh = shuffle_surrogate(&c, 100 + seed).unwrap();
        let w = spectrum_features(&mfdfa(&c.values, &cfg).unwrap()).unwrap().omega;
        let rs = mfdfa(&sh.values, &cfg).unwrap();
        let ws = spectrum_features(&rs).unwrap().omega;
        assert!(w - ws > 0.2, "seed {seed}: {w} vs {ws}");
        assert!((rs.h_at(2.0) - 0.5).abs() < 0.1, "{}", rs.h_at(2.0));
    }
}

#[test]
fn ks_accepts_gaussian_and_rejects_uniform() {
    let reps = 200;
    let accepted = (0..reps)
        .filter(|&seed| ks_normality(&TimeSeries::anonymous(white(10_000, seed)).unwrap()).unwrap().p_value > 0.01)
        .count();
    assert!(accepted as f64 >= 0.99 * reps as f64, "{accepted}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    assert!(ks_normality(&TimeSeries::anonymous(u).unwrap()).unwrap().p_value < 0.001);
}

#[test]
fn hotelling_null_p_values_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut draw = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect()
    };
    let mut p: Vec<f64> = (0..10_000).map(|_| hotelling_t2(&draw(30), &draw(25)).unwrap().p_value).collect();
    p.sort_by(f64::total_cmp);
    // one-sample KS distance against U(0, 1)
    let n = p.len() as f64;
    let d = p
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    // D_crit at the 1% level is 1.628 / sqrt(n)
    assert!(d < 1.628 / n.sqrt(), "{d}");
}
