//! Small descriptive-statistics helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population (1/N) variance.
pub fn variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64
}

/// Unbiased (1/(N-1)) variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Slope and intercept of the ordinary least-squares line through `(x, y)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Coefficient of determination of the OLS line.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let (slope, intercept) = ols(x, y);
    let my = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    if ss_tot == 0.0 {
        return 1.0;
    }
    1.0 - ss_res / ss_tot
}

/// Upper quantile of the standard normal: z such that P(|Z| <= z) = confidence.
pub fn two_sided_z(confidence: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    n.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

pub fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2))
}

/// Survival function of the asymptotic Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // small-argument (Jacobi theta) form converges fast here
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (y * j * j).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            if k % 2 == 1 {
                s += term;
            } else {
                s -= term;
            }
            if term < 1e-18 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_branches_agree_at_switch() {
        let lo = kolmogorov_sf(1.18 - 1e-9);
        let hi = kolmogorov_sf(1.18 + 1e-9);
        assert!((lo - hi).abs() < 1e-8);
        // tabulated: P(K > 1.36) ~ 0.0494
        assert!((kolmogorov_sf(1.36) - 0.04946).abs() < 2e-4);
    }

    #[test]
    fn z_critical_value() {
        assert!((two_sided_z(0.999) - 3.290527).abs() < 1e-5);
        assert!((two_sided_z(0.95) - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn r_squared_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        assert!((r_squared(&x, &y) - 1.0).abs() < 1e-12);
        let (m, b) = ols(&x, &y);
        assert!((m - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }
}
