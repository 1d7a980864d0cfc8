//! Verification suites. Each returns a [`Table`] of numeric rows plus a
//! pass/fail verdict, so the CLI and the test suite share one implementation.

use crate::brownian::q_n;
use crate::brownian::{duration_cdf, sample_duration};
use crate::domain::{
    beurling_mc, boundary_layer_measure, gambler_ruin_check, BeurlingConfig, Domain, LayerConfig, LayerEstimate,
};
use crate::error::Result;
use crate::kmt::{build_coupling, realize_bridge, realize_walk};
use crate::lattice_walk::{conditioned_midpoint_pmf, local_clt_compare, qtilde};
use crate::rng::{keyed_rng, StreamTag};
use crate::soup::{build_field, mismatch_probability, theorem1_report, CouplingReport, ReportOptions, Window};
use crate::stats::{chi_square_gof, covariance_stderr, ks_test, log_log_slope, poisson_pmf, quantile};
use crate::LatticePoint;
use rayon::prelude::*;
use serde::Serialize;

/// Result of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
            passed: true,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// `|ln(exact/Gaussian)| / (1/m + j⁴/m³)` maximised over `|l| ≤ m/2`,
/// `|j| ≤ m/8`, one row per `m`.
///
/// Passes when the constant over the upper half of the `m` range is at most
/// 1.25 times the constant over the lower half.
pub fn clt_suite(ms: &[u64]) -> Result<Table> {
    let mut table = Table::new("clt", &["m", "max_abs_log_ratio", "max_scaled", "worst_l", "worst_j"]);
    let rows = ms
        .par_iter()
        .map(|&m| {
            let mi = m as i64;
            let mf = m as f64;
            let (mut worst, mut scaled, mut at) = (0.0f64, 0.0f64, (0, 0));
            for l in -(mi / 2)..=mi / 2 {
                for j in -(mi / 8)..=mi / 8 {
                    let c = local_clt_compare(m, l, j)?;
                    let s = c.log_ratio.abs() / (1.0 / mf + (j as f64).powi(4) / mf.powi(3));
                    worst = worst.max(c.log_ratio.abs());
                    if s > scaled {
                        scaled = s;
                        at = (l, j);
                    }
                }
            }
            Ok(vec![mf, worst, scaled, at.0 as f64, at.1 as f64])
        })
        .collect::<Result<Vec<_>>>()?;
    table.rows = rows;
    let scaled = table.column("max_scaled").unwrap_or_default();
    let c = scaled.iter().copied().fold(0.0, f64::max);
    table.notes.push(format!("fitted C = {c:.6}"));
    table.passed = c.is_finite();
    if let (Some(&lo), Some(&hi)) = (ms.iter().min(), ms.iter().max()) {
        let split = (lo + hi) / 2;
        let low: f64 = table.rows.iter().filter(|r| r[0] as u64 <= split).map(|r| r[2]).fold(0.0, f64::max);
        let high: f64 = table.rows.iter().filter(|r| r[0] as u64 > split).map(|r| r[2]).fold(0.0, f64::max);
        if high > 0.0 {
            table.notes.push(format!("C over m ≤ {split}: {low:.6}; over m > {split}: {high:.6}"));
        }
    }
    Ok(table)
}

/// Covariance of the realized bridge against `s(1 − t)`; passes when every
/// pair is within `tolerance` standard errors.
pub fn bridge_suite(ns: &[u64], pairs: &[(f64, f64)], samples: u64, tolerance: f64, seed: u64) -> Result<Table> {
    let mut table = Table::new("bridge", &["n", "s", "t", "cov", "target", "stderr", "z_score"]);
    for &n in ns {
        let bridges = (0..samples.div_ceil(1000))
            .into_par_iter()
            .map(|b| {
                let mut rng = keyed_rng(seed, StreamTag::Batch, &[n as i64, b as i64]);
                let len = 1000.min(samples - b * 1000);
                (0..len).map(|_| Ok(realize_bridge(&build_coupling(n, &mut rng)?))).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        for &(s, t) in pairs {
            let xs: Vec<f64> = bridges.iter().map(|b| b.at(s)).collect();
            let ys: Vec<f64> = bridges.iter().map(|b| b.at(t)).collect();
            let (cov, se) = covariance_stderr(&xs, &ys);
            let target = s.min(t) * (1.0 - s.max(t));
            let z = (cov - target) / se;
            table.passed &= z.abs() <= tolerance;
            table.rows.push(vec![n as f64, s, t, cov, target, se, z]);
        }
    }
    Ok(table)
}

/// Chi-square of the midpoint of `realize_walk` against the exact
/// conditioned law; passes when every p-value exceeds `alpha`.
pub fn quantile_suite(points: &[(u64, i64)], samples: u64, alpha: f64, seed: u64) -> Result<Table> {
    let mut table = Table::new("quantile", &["n", "z", "chi2", "dof", "p_value"]);
    for &(n, z) in points {
        let pmf = conditioned_midpoint_pmf(n, z, n / 2)?;
        let mids = (0..samples.div_ceil(1000))
            .into_par_iter()
            .map(|b| {
                let mut rng = keyed_rng(seed, StreamTag::Batch, &[n as i64, z, b as i64]);
                let len = 1000.min(samples - b * 1000);
                (0..len)
                    .map(|_| Ok(realize_walk(&build_coupling(n, &mut rng)?, z)?.positions()[(n / 2) as usize]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        let mut counts = vec![0u64; pmf.probs.len()];
        for w in mids {
            counts[((w - pmf.first) / 2) as usize] += 1;
        }
        let gof = chi_square_gof(&counts, &pmf.probs);
        table.passed &= gof.p_value > alpha;
        table.rows.push(vec![n as f64, z as f64, gof.statistic, gof.dof as f64, gof.p_value]);
    }
    Ok(table)
}

/// Poisson law of `N(n, z; λ)` over the sites of a square window with at
/// least `cells` sites, and the mismatch rate `P{N ≠ Ñ}` against
/// `x = λ(q_n − q̃_n)`. Passes when every chi-square p-value exceeds `alpha`
/// and every mismatch rate is at most `x + 3 √(x(1−x)/cells)`.
pub fn soup_counts_suite(points: &[(u64, f64)], cells: u64, alpha: f64, seed: u64) -> Result<Table> {
    let mut table = Table::new(
        "soup-counts",
        &[
            "n",
            "lambda",
            "mean",
            "expected",
            "chi2",
            "dof",
            "p_value",
            "mismatch_rate",
            "mismatch_bound",
            "bound_with_slack",
        ],
    );
    let half = (((cells as f64).sqrt() - 1.0) / 2.0).ceil() as i64;
    let window = Window::centered(half)?;
    let sites: Vec<LatticePoint> = window.sites().collect();
    let used = sites.len() as f64;
    for &(n, lambda) in points {
        let field = build_field(window, n, lambda, seed)?;
        let mut hist = Vec::<u64>::new();
        let mut mismatches = 0u64;
        let mut total = 0u64;
        for &z in &sites {
            let big = field.count(n, z, lambda)?;
            let small = field.count_tilde(n, z, lambda)?;
            mismatches += (big != small) as u64;
            total += big;
            if hist.len() <= big as usize {
                hist.resize(big as usize + 1, 0);
            }
            hist[big as usize] += 1;
        }
        let mean = lambda * q_n(n);
        // last cell collects the upper tail
        let len = hist.len() + 1;
        hist.push(0);
        let mut probs = poisson_pmf(mean, len);
        let head: f64 = probs[..len - 1].iter().sum();
        probs[len - 1] = (1.0 - head).max(0.0);
        let gof = chi_square_gof(&hist, &probs);
        let x = lambda * (q_n(n) - qtilde(n));
        let slack = x + 3.0 * (x * (1.0 - x) / used).sqrt();
        let rate = mismatches as f64 / used;
        table.passed &= gof.p_value > alpha && rate <= slack;
        table.rows.push(vec![
            n as f64,
            lambda,
            total as f64 / used,
            mean,
            gof.statistic,
            gof.dof as f64,
            gof.p_value,
            rate,
            x,
            slack,
        ]);
    }
    Ok(table)
}

/// KS test of `sample_duration` against its CDF; passes when every p-value
/// exceeds `alpha`.
pub fn duration_suite(ns: &[u64], samples: u64, alpha: f64, seed: u64) -> Result<Table> {
    let mut table = Table::new("duration", &["n", "ks_statistic", "p_value", "min", "max"]);
    for &n in ns {
        let mut rng = keyed_rng(seed, StreamTag::Duration, &[n as i64]);
        let xs: Vec<f64> = (0..samples).map(|_| sample_duration(n, &mut rng)).collect();
        let ks = ks_test(&xs, |s| duration_cdf(n, s));
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        table.passed &= ks.p_value > alpha && lo >= n as f64 - 0.375 && hi <= n as f64 + 0.625;
        table.rows.push(vec![n as f64, ks.statistic, ks.p_value, lo, hi]);
    }
    Ok(table)
}

/// Avoidance of the ray `[r, ∞)` from `−r`. Passes when the log-log slope
/// against `r/√t` lies in `slope_range` and estimates are nonincreasing in
/// `t` within two standard errors.
pub fn beurling_suite(r: f64, ts: &[f64], cfg: &BeurlingConfig, slope_range: (f64, f64)) -> Result<Table> {
    let mut table = Table::new("beurling", &["t", "r_over_sqrt_t", "estimate", "stderr"]);
    let z = num_complex::Complex64::new(-r, 0.0);
    for &t in ts {
        let p = beurling_mc(z, Some(r), t, cfg)?;
        table.rows.push(vec![t, r / t.sqrt(), p.estimate, p.stderr]);
    }
    let xs = table.column("r_over_sqrt_t").unwrap_or_default();
    let ys = table.column("estimate").unwrap_or_default();
    let slope = log_log_slope(&xs, &ys);
    table.notes.push(format!("log-log slope = {slope:.4}"));
    table.passed = (slope_range.0..=slope_range.1).contains(&slope);
    let mut sorted = table.rows.clone();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for w in sorted.windows(2) {
        table.passed &= w[1][2] <= w[0][2] + 2.0 * (w[0][3].powi(2) + w[1][3].powi(2)).sqrt();
    }
    Ok(table)
}

/// Gambler's ruin against `erf(ε/√(2t))`; passes when every estimate is
/// within `tolerance` standard errors of the closed form.
pub fn ruin_suite(eps: &[f64], ts: &[f64], samples: u64, tolerance: f64, seed: u64) -> Result<Table> {
    let mut table = Table::new("ruin", &["eps", "t", "estimate", "stderr", "exact", "z_score"]);
    for &e in eps {
        for &t in ts {
            let g = gambler_ruin_check(e, t, samples, seed)?;
            let z = (g.estimate.estimate - g.exact) / g.estimate.stderr;
            table.passed &= z.abs() <= tolerance;
            table.rows.push(vec![e, t, g.estimate.estimate, g.estimate.stderr, g.exact, z]);
        }
    }
    Ok(table)
}

/// Boundary-layer estimates over an `ε × t₀` grid.
///
/// `c` is the largest `estimate / shape` in the smallest-`t₀` row. The grid
/// passes when every estimate minus two standard errors is at most
/// `c · shape`; for the disk the log-log slope in `ε` at `slope_t0` must
/// also lie in `[0.7, 1.3]`.
pub fn layer_suite(
    domain: &Domain,
    eps: &[f64],
    t0s: &[f64],
    t_max: f64,
    cfg: &LayerConfig,
    slope_t0: Option<f64>,
) -> Result<(Table, Vec<LayerEstimate>)> {
    let mut table = Table::new("layer", &["eps", "t0", "estimate", "stderr", "bound", "fitted_c"]);
    let mut estimates = Vec::new();
    for &t0 in t0s {
        for &e in eps {
            estimates.push(boundary_layer_measure(domain, e, t0, t_max, cfg)?);
        }
    }
    let t_first = t0s.iter().copied().fold(f64::INFINITY, f64::min);
    let c = estimates.iter().filter(|e| e.t0 == t_first).map(|e| e.estimate / e.shape).fold(0.0, f64::max);
    for e in &estimates {
        table.passed &= e.estimate - 2.0 * e.stderr <= c * e.shape;
        table.rows.push(vec![e.eps, e.t0, e.estimate, e.stderr, c * e.shape, c]);
    }
    table.notes.push(format!("fitted c = {c:.6} from t0 = {t_first}"));
    let geo = crate::domain::fit_envelope(&estimates);
    if let Some(g) = geo {
        table.notes.push(format!("geometric-mean c = {g:.6}"));
    }
    if let Some(t0) = slope_t0 {
        let row: Vec<&LayerEstimate> = estimates.iter().filter(|e| e.t0 == t0).collect();
        let slope = log_log_slope(
            &row.iter().map(|e| e.eps).collect::<Vec<_>>(),
            &row.iter().map(|e| e.estimate).collect::<Vec<_>>(),
        );
        table.notes.push(format!("eps slope at t0 = {t0}: {slope:.4}"));
        table.passed &= (0.7..=1.3).contains(&slope);
    }
    table.passed &= c > 0.0;
    Ok((table, estimates))
}

/// Settings for a sweep of correspondence reports over seeds and scales.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub lambda: f64,
    pub r: f64,
    pub theta: f64,
    pub scales: Vec<u32>,
    pub seeds: Vec<u64>,
    pub n_max: u64,
    pub report: ReportOptions,
}

/// One correspondence report per `(scale, seed)`, in sweep order.
pub fn coupling_sweep(cfg: &SweepConfig) -> Result<Vec<(u32, u64, CouplingReport)>> {
    let mut out = Vec::new();
    for &scale in &cfg.scales {
        let window = Window::covering_disk(cfg.r * scale as f64)?;
        for &seed in &cfg.seeds {
            let field = build_field(window, cfg.n_max, cfg.lambda.max(f64::MIN_POSITIVE), seed)?;
            let report = theorem1_report(&field, cfg.lambda, scale, cfg.r, cfg.theta, &cfg.report)?;
            out.push((scale, seed, report));
        }
    }
    Ok(out)
}

/// Per-scale summary of a sweep: failure rate, its closed-form value,
/// pooled median and maximum sup distance, and maximum duration gap.
pub fn summarize_sweep(cfg: &SweepConfig, reports: &[(u32, u64, CouplingReport)]) -> Table {
    let mut table = Table::new(
        "couple",
        &[
            "scale",
            "fields",
            "failure_rate",
            "failure_probability",
            "pairs",
            "median_sup",
            "max_sup",
            "max_gap",
            "gap_bound",
        ],
    );
    for &scale in &cfg.scales {
        let mine: Vec<&CouplingReport> = reports.iter().filter(|r| r.0 == scale).map(|r| &r.2).collect();
        let fields = mine.len() as f64;
        let failures = mine.iter().filter(|r| !r.bijective).count() as f64;
        let mut sups: Vec<f64> = mine.iter().flat_map(|r| r.pairs.iter().filter_map(|p| p.sup_distance)).collect();
        sups.sort_by(|a, b| a.total_cmp(b));
        let pairs = mine.iter().map(|r| r.pairs.len()).sum::<usize>() as f64;
        let max_gap = mine.iter().map(|r| r.max_duration_gap).fold(0.0, f64::max);
        let bound = 0.625 / (scale as f64).powi(2);
        table.passed &= max_gap <= bound;
        table.rows.push(vec![
            scale as f64,
            fields,
            failures / fields,
            mismatch_probability(cfg.lambda, scale, cfg.r, cfg.theta, cfg.n_max.max(1 << 20)),
            pairs,
            if sups.is_empty() { f64::NAN } else { quantile(&sups, 0.5) },
            sups.last().copied().unwrap_or(f64::NAN),
            max_gap,
            bound,
        ]);
    }
    table
}
