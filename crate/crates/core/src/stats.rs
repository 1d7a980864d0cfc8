//! Small statistics toolbox used by the verification suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::{PI, SQRT_2};

/// Standard normal CDF, accurate in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function, accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against cell probabilities.
///
/// Adjacent cells are pooled from both ends until every pooled cell expects
/// at least five observations. `probs` must sum to one.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> GofResult {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        obs_acc += o as f64;
        exp_acc += p * total;
        if exp_acc >= 5.0 {
            cells.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs_acc;
                last.1 += exp_acc;
            }
            None => cells.push((obs_acc, exp_acc)),
        }
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 }).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 { 1.0 } else { ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(0.0) };
    GofResult { statistic, dof, p_value }
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-transformed series converges fast for small x.
        let mut cdf = 0.0;
        for k in 1..=50 {
            let odd = (2 * k - 1) as f64;
            cdf += (-(odd * odd) * PI * PI / (8.0 * x * x)).exp();
        }
        (1.0 - (2.0 * PI).sqrt() / x * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> GofResult {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    GofResult { statistic: d, dof: xs.len(), p_value }
}

/// Sample mean with its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample covariance of paired observations and the standard error of the
/// estimate (delta method on the centred products).
pub fn covariance_stderr(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let (_, se) = mean_stderr(&prods);
    (cov, se)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Poisson pmf for `k = 0..len`, computed by recurrence.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut p = (-mean).exp();
    for k in 0..len {
        out.push(p);
        p *= mean / (k as f64 + 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tails_are_complementary() {
        for x in [-8.0, -1.3, 0.0, 0.7, 5.0] {
            assert!((normal_cdf(x) + normal_sf(x) - 1.0).abs() < 1e-14);
        }
        assert!((normal_cdf(-1.2) - 0.115_069_670_221_708_22).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // both series are valid near the switch point
        let x = 1.18;
        let mut cdf = 0.0;
        for k in 1..=50 {
            let odd = (2 * k - 1) as f64;
            cdf += (-(odd * odd) * PI * PI / (8.0 * x * x)).exp();
        }
        let small = 1.0 - (2.0 * PI).sqrt() / x * cdf;
        assert!((small - kolmogorov_sf(x)).abs() < 1e-10);
        assert!((kolmogorov_sf(1.0) - 0.269_999_671_677_354_56).abs() < 1e-9);
    }

    #[test]
    fn chi_square_of_exact_counts_is_zero() {
        let r = chi_square_gof(&[250, 500, 250], &[0.25, 0.5, 0.25]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_pools_sparse_cells() {
        let r = chi_square_gof(&[0, 1, 49, 50], &[0.001, 0.009, 0.49, 0.5]);
        assert_eq!(r.dof, 1);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn poisson_pmf_normalizes() {
        let s: f64 = poisson_pmf(3.0, 60).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
