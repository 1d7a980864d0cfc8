//! Exact loop counts, conditioned walk laws and Stirling checks.
//!
//! Small sizes are computed with big integers; above [`DEFAULT_EXACT_LIMIT`]
//! steps the same quantities are evaluated in log space from tabulated
//! log-factorials, which keeps a relative precision of about 1e-13.

use super::check_endpoint;
use crate::error::{out_of_range, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::f64::consts::{LN_2, PI};

/// Largest step count handled with exact rationals by default.
pub const DEFAULT_EXACT_LIMIT: u64 = 200;

pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    statrs::function::factorial::ln_binomial(n, k)
}

/// Natural log of a positive big integer.
pub(crate) fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * LN_2
}

fn to_rational(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Number of closed 2n-step loops rooted at the origin, `C(2n, n)²`.
pub fn loop_count(n: u64) -> BigUint {
    let c = binomial_big(2 * n, n);
    &c * &c
}

/// `ν(L⁰ₙ) = [2^{-2n} C(2n, n)]²` as an exact rational.
pub fn loop_count_measure_exact(n: u64) -> Result<BigRational> {
    if n == 0 {
        return Err(out_of_range("n", "must be at least 1"));
    }
    Ok(to_rational(loop_count(n), BigUint::one() << (4 * n)))
}

/// `ν(L⁰ₙ)` as a float.
pub fn loop_count_measure(n: u64) -> f64 {
    assert!(n >= 1, "loop length index must be positive");
    if 2 * n <= DEFAULT_EXACT_LIMIT {
        return loop_count_measure_exact(n).unwrap().to_f64().unwrap();
    }
    central_binomial_scaled(n).powi(2)
}

/// `4^{−n} C(2n, n)` from its asymptotic series, relative error below 1e-16
/// for `n > 100`.
fn central_binomial_scaled(n: u64) -> f64 {
    const COEFFS: [f64; 7] =
        [1.0, -1.0 / 8.0, 1.0 / 128.0, 5.0 / 1024.0, -21.0 / 32768.0, -399.0 / 262_144.0, 869.0 / 4_194_304.0];
    let x = 1.0 / n as f64;
    let series = COEFFS.iter().rev().fold(0.0, |acc, c| acc * x + c);
    series / (PI * n as f64).sqrt()
}

/// `q̃ₙ = ν(L⁰ₙ) / 2n`, the per-site Poisson rate of 2n-step walk loops.
pub fn qtilde_exact(n: u64) -> Result<BigRational> {
    let nu = loop_count_measure_exact(n)?;
    Ok(nu / BigRational::from_integer(BigInt::from(2 * n)))
}

pub fn qtilde(n: u64) -> f64 {
    loop_count_measure(n) / (2 * n) as f64
}

/// Law of `S_m` for a `total`-step walk conditioned on `S_total = z`.
///
/// The support is `first, first + 2, …`; `probs` sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedPmf {
    pub total: u64,
    pub endpoint: i64,
    pub time: u64,
    pub first: i64,
    pub probs: Vec<f64>,
}

impl ConditionedPmf {
    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.probs.len()).map(move |i| self.first + 2 * i as i64)
    }

    pub fn last(&self) -> i64 {
        self.first + 2 * (self.probs.len() as i64 - 1)
    }

    pub fn prob(&self, w: i64) -> f64 {
        let off = w - self.first;
        if off < 0 || off % 2 != 0 {
            return 0.0;
        }
        self.probs.get((off / 2) as usize).copied().unwrap_or(0.0)
    }

    /// `P(S_m ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.support().zip(&self.probs).take_while(|(w, _)| (*w as f64) <= x).map(|(_, p)| p).sum::<f64>().min(1.0)
    }

    /// `P(S_m < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.support().zip(&self.probs).take_while(|(w, _)| (*w as f64) < x).map(|(_, p)| p).sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.support().zip(&self.probs).map(|(w, p)| w as f64 * p).sum()
    }
}

fn midpoint_support(total: u64, z: i64, m: u64) -> Result<(i64, i64)> {
    check_endpoint(total, z)?;
    if m > total {
        return Err(out_of_range("m", format!("{m} exceeds total steps {total}")));
    }
    let (m_i, rest) = (m as i64, (total - m) as i64);
    let lo = (-m_i).max(z - rest);
    let hi = m_i.min(z + rest);
    Ok((lo, hi))
}

/// Exact conditioned law as `(w, P(S_m = w | S_total = z))` pairs.
pub fn conditioned_midpoint_pmf_exact(total: u64, z: i64, m: u64) -> Result<Vec<(i64, BigRational)>> {
    let (lo, hi) = midpoint_support(total, z, m)?;
    let rest = total - m;
    let den = binomial_big(total, ((total as i64 + z) / 2) as u64);
    let mut out = Vec::new();
    let mut w = lo;
    while w <= hi {
        let a = binomial_big(m, ((m as i64 + w) / 2) as u64);
        let b = binomial_big(rest, ((rest as i64 + z - w) / 2) as u64);
        out.push((w, to_rational(a * b, den.clone())));
        w += 2;
    }
    Ok(out)
}

/// Log-space evaluation of the same law, renormalised.
pub(crate) fn conditioned_pmf_log_space(total: u64, z: i64, m: u64) -> Result<ConditionedPmf> {
    let (lo, hi) = midpoint_support(total, z, m)?;
    let rest = total - m;
    let ln_den = ln_binomial(total, ((total as i64 + z) / 2) as u64);
    let mut probs = Vec::with_capacity(((hi - lo) / 2 + 1) as usize);
    let mut w = lo;
    while w <= hi {
        let ln_p = ln_binomial(m, ((m as i64 + w) / 2) as u64) + ln_binomial(rest, ((rest as i64 + z - w) / 2) as u64)
            - ln_den;
        probs.push(ln_p.exp());
        w += 2;
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    Ok(ConditionedPmf { total, endpoint: z, time: m, first: lo, probs })
}

/// Law of `S_m` given `S_total = z`, exact for `total ≤ exact_limit`.
pub fn conditioned_midpoint_pmf_with(total: u64, z: i64, m: u64, exact_limit: u64) -> Result<ConditionedPmf> {
    if total > exact_limit {
        return conditioned_pmf_log_space(total, z, m);
    }
    let exact = conditioned_midpoint_pmf_exact(total, z, m)?;
    let first = exact[0].0;
    let probs = exact.iter().map(|(_, p)| p.to_f64().unwrap_or(0.0)).collect();
    Ok(ConditionedPmf { total, endpoint: z, time: m, first, probs })
}

pub fn conditioned_midpoint_pmf(total: u64, z: i64, m: u64) -> Result<ConditionedPmf> {
    conditioned_midpoint_pmf_with(total, z, m, DEFAULT_EXACT_LIMIT)
}

/// Exact conditioned probability against its Gaussian approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCltComparison {
    pub exact: f64,
    pub approx: f64,
    /// `ln(exact / approx)`.
    pub log_ratio: f64,
}

/// Compares `P{S_{2m} = 2j + 2l | S_{4m} = 4l}` with
/// `2 (2π m (1 − (l/m)²))^{-1/2} exp{−(2j)² / (2m(1 − (l/m)²))}`.
///
/// Requires `m > 0`, `|l| ≤ m/2`, `|j| ≤ m/8`.
pub fn local_clt_compare(m: u64, l: i64, j: i64) -> Result<LocalCltComparison> {
    if m == 0 {
        return Err(out_of_range("m", "must be positive"));
    }
    let mi = m as i64;
    if 2 * l.abs() > mi {
        return Err(out_of_range("l", format!("|{l}| > m/2 for m = {m}")));
    }
    if 8 * j.abs() > mi {
        return Err(out_of_range("j", format!("|{j}| > m/8 for m = {m}")));
    }
    let a = (mi + j + l) as u64;
    let b = (mi + l - j) as u64;
    let c = (2 * mi + 2 * l) as u64;
    let ln_exact = if 4 * m <= DEFAULT_EXACT_LIMIT {
        ln_big(&(binomial_big(2 * m, a) * binomial_big(2 * m, b))) - ln_big(&binomial_big(4 * m, c))
    } else {
        ln_binomial(2 * m, a) + ln_binomial(2 * m, b) - ln_binomial(4 * m, c)
    };
    let mf = m as f64;
    let var = mf * (1.0 - (l as f64 / mf).powi(2));
    let two_j = 2.0 * j as f64;
    let ln_approx = 2f64.ln() - 0.5 * (2.0 * PI * var).ln() - two_j * two_j / (2.0 * var);
    Ok(LocalCltComparison { exact: ln_exact.exp(), approx: ln_approx.exp(), log_ratio: ln_exact - ln_approx })
}

/// Stirling's formula with its first correction against the exact factorial.
#[derive(Debug, Clone, PartialEq)]
pub struct StirlingComparison {
    /// `√(2π) n^{n+1/2} e^{−n} (1 + 1/(12n))`; infinite once it leaves f64 range.
    pub approx: f64,
    pub exact: BigUint,
    /// `approx / exact − 1`, computed in log space.
    pub relative_error: f64,
}

pub fn stirling_approx(n: u64) -> Result<StirlingComparison> {
    if n == 0 {
        return Err(out_of_range("n", "must be at least 1"));
    }
    let exact: BigUint = (1..=n).fold(BigUint::one(), |acc, k| acc * k);
    let nf = n as f64;
    let ln_approx = 0.5 * (2.0 * PI).ln() + (nf + 0.5) * nf.ln() - nf + (1.0 / (12.0 * nf)).ln_1p();
    let relative_error = (ln_approx - ln_big(&exact)).exp_m1();
    Ok(StirlingComparison { approx: ln_approx.exp(), exact, relative_error })
}
