use crate::config::{CoupleArgs, DomainArg, KindArg, SampleArgs, Suite, VerifyArgs};
use crate::error::{CliError, CliResult};
use crate::output::{csv_bytes, csv_number, format_table, table_csv, write_file, SCHEMA_VERSION};
use loopsoup::domain::{BeurlingConfig, Domain, LayerConfig};
use loopsoup::soup::{brownian_soup, build_field, rw_soup, ReportOptions, SoupOptions, UnmatchedReason, Window};
use loopsoup::stats::quantile;
use loopsoup::verify::{self, SweepConfig, Table};
use loopsoup::{CouplingReport, LatticePoint};
use serde::Serialize;
use std::path::{Path, PathBuf};

fn check(ok: bool, message: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(message.into()))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

/// Writes one soup file per requested kind and returns their paths.
pub fn sample(a: &SampleArgs) -> CliResult<Vec<PathBuf>> {
    check(a.lambda.is_finite() && a.lambda >= 0.0, "--lambda must be finite and nonnegative")?;
    check(a.nmax >= 1, "--nmax must be at least 1")?;
    let window =
        Window::new(LatticePoint::new(a.window.x.0, a.window.y.0), LatticePoint::new(a.window.x.1, a.window.y.1))?;
    let field = build_field(window, a.nmax, a.lambda.max(f64::MIN_POSITIVE), a.seed)?;
    let opts = SoupOptions { refine: a.refine, include_small: a.small, t_min: a.t_min };
    let jobs: Vec<(KindArg, PathBuf)> = match a.kind {
        KindArg::Both => {
            vec![(KindArg::Walk, with_suffix(&a.out, "walk")), (KindArg::Brownian, with_suffix(&a.out, "brownian"))]
        }
        k => vec![(k, a.out.clone())],
    };
    let mut written = Vec::new();
    for (kind, path) in jobs {
        let soup = match kind {
            KindArg::Walk => rw_soup(&field, a.lambda, a.scale, &opts)?,
            _ => brownian_soup(&field, a.lambda, a.scale, &opts)?,
        };
        write_file(&path, soup.to_json()?.as_bytes())?;
        println!("wrote {} ({} loops)", path.display(), soup.loops.len());
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReportFile<'a> {
    schema_version: u32,
    seed: u64,
    n_max: u64,
    gap_bound: f64,
    report: &'a CouplingReport,
}

const COUPLE_COLUMNS: [&str; 13] = [
    "schema_version",
    "scale",
    "seed",
    "bijective",
    "failure_rate",
    "pairs",
    "unmatched",
    "count_mismatches",
    "max_duration_gap",
    "gap_bound",
    "max_sup_distance",
    "median_sup_distance",
    "unrealized",
];

fn couple_row(scale: u32, seed: &str, failure: f64, bijective: &str, reports: &[&CouplingReport]) -> Vec<String> {
    let pairs: usize = reports.iter().map(|r| r.pairs.len()).sum();
    let unmatched: usize = reports.iter().map(|r| r.unmatched.len()).sum();
    let mismatches =
        reports.iter().flat_map(|r| &r.unmatched).filter(|u| u.reason == UnmatchedReason::CountMismatch).count();
    let gap = reports.iter().map(|r| r.max_duration_gap).fold(0.0, f64::max);
    let mut sups: Vec<f64> = reports.iter().flat_map(|r| r.pairs.iter().filter_map(|p| p.sup_distance)).collect();
    sups.sort_by(|a, b| a.total_cmp(b));
    let median = if sups.is_empty() { f64::NAN } else { quantile(&sups, 0.5) };
    vec![
        SCHEMA_VERSION.to_string(),
        scale.to_string(),
        seed.to_string(),
        bijective.to_string(),
        csv_number(failure),
        pairs.to_string(),
        unmatched.to_string(),
        mismatches.to_string(),
        csv_number(gap),
        csv_number(0.625 / (scale as f64).powi(2)),
        csv_number(sups.last().copied().unwrap_or(f64::NAN)),
        csv_number(median),
        reports.iter().map(|r| r.unrealized).sum::<u64>().to_string(),
    ]
}

/// Per-seed JSON reports, one CSV per scale with a summary row, and a
/// sweep table when several scales are given.
pub fn couple(a: &CoupleArgs) -> CliResult<()> {
    check(a.lambda.is_finite() && a.lambda >= 0.0, "--lambda must be finite and nonnegative")?;
    check(a.fields >= 1, "--fields must be at least 1")?;
    check(!a.scale.is_empty() && a.scale.iter().all(|&s| s >= 1), "--scale values must be at least 1")?;
    check(a.seed.checked_add(a.fields).is_some(), "--seed + --fields overflows")?;
    let cfg = SweepConfig {
        lambda: a.lambda,
        r: a.r,
        theta: a.theta,
        scales: a.scale.clone(),
        seeds: (a.seed..a.seed + a.fields).collect(),
        n_max: a.nmax,
        report: ReportOptions { refine: a.refine, realize_paths: !a.no_paths },
    };
    let reports = verify::coupling_sweep(&cfg)?;
    for (scale, seed, report) in &reports {
        let file = ReportFile {
            schema_version: SCHEMA_VERSION,
            seed: *seed,
            n_max: a.nmax,
            gap_bound: 0.625 / (*scale as f64).powi(2),
            report,
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| CliError::Io(e.to_string()))?;
        write_file(&a.out_dir.join(format!("report-N{scale}-seed{seed}.json")), text.as_bytes())?;
    }
    let header: Vec<String> = COUPLE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for &scale in &a.scale {
        let mine: Vec<(u64, &CouplingReport)> = reports.iter().filter(|r| r.0 == scale).map(|r| (r.1, &r.2)).collect();
        let mut rows: Vec<Vec<String>> = mine
            .iter()
            .map(|&(seed, r)| {
                let b = r.bijective as u8;
                couple_row(scale, &seed.to_string(), 1.0 - b as f64, &b.to_string(), &[r])
            })
            .collect();
        let all: Vec<&CouplingReport> = mine.iter().map(|m| m.1).collect();
        let failures = all.iter().filter(|r| !r.bijective).count() as f64;
        rows.push(couple_row(scale, "all", failures / all.len() as f64, "", &all));
        write_file(&a.out_dir.join(format!("couple-N{scale}.csv")), &csv_bytes(&header, &rows)?)?;
    }
    let table = verify::summarize_sweep(&cfg, &reports);
    if a.scale.len() > 1 {
        write_file(&a.out_dir.join("sweep.csv"), &table_csv(&table)?)?;
    }
    print!("{}", format_table(&table));
    if table.passed {
        Ok(())
    } else {
        Err(CliError::SuiteFailed("a matched pair exceeds the duration-gap bound".into()))
    }
}

/// Runs one suite and returns its table.
pub fn run_suite(suite: &Suite) -> CliResult<Table> {
    let table = match suite {
        Suite::Clt { m } => verify::clt_suite(&m.values())?,
        Suite::Bridge { n, pairs, samples, tolerance, seed } => {
            let pairs: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0, p.1)).collect();
            verify::bridge_suite(&n.values(), &pairs, *samples, *tolerance, *seed)?
        }
        Suite::Quantile { points, samples, alpha, seed } => {
            let points: Vec<(u64, i64)> = points.iter().map(|p| (p.0, p.1)).collect();
            verify::quantile_suite(&points, *samples, *alpha, *seed)?
        }
        Suite::SoupCounts { points, cells, alpha, seed } => {
            let points: Vec<(u64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
            verify::soup_counts_suite(&points, *cells, *alpha, *seed)?
        }
        Suite::Beurling { r, t, samples, kappa, absorb, slope, seed } => {
            let cfg = BeurlingConfig { samples: *samples, seed: *seed, kappa: *kappa, absorb: *absorb };
            verify::beurling_suite(*r, t, &cfg, (slope.0, slope.1))?
        }
        Suite::Layer { domain, slit_start, eps, t0, t_max, samples, depth, seed } => {
            let (d, slope_t0) = match domain {
                DomainArg::Disk => (Domain::unit_disk(), Some(1.0).filter(|x| t0.contains(x))),
                DomainArg::Slit => (Domain::slit_disk(1.0, *slit_start)?, None),
            };
            let cfg = LayerConfig { samples: *samples, depth: *depth, seed: *seed };
            verify::layer_suite(&d, eps, t0, *t_max, &cfg, slope_t0)?.0
        }
        Suite::Ruin { eps, t, samples, tolerance, seed } => verify::ruin_suite(eps, t, *samples, *tolerance, *seed)?,
        Suite::Duration { n, samples, alpha, seed } => verify::duration_suite(&n.values(), *samples, *alpha, *seed)?,
    };
    Ok(table)
}

pub fn verify(a: &VerifyArgs) -> CliResult<()> {
    let table = run_suite(&a.suite)?;
    print!("{}", format_table(&table));
    if let Some(path) = &a.csv {
        write_file(path, &table_csv(&table)?)?;
    }
    if table.passed {
        Ok(())
    } else {
        Err(CliError::SuiteFailed(format!("suite `{}`", table.name)))
    }
}
