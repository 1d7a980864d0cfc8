//! File writing and table formatting shared by the commands.

use crate::error::{CliError, CliResult};
use loopsoup::verify::Table;
use std::fs;
use std::path::Path;

/// Version stamped into every CSV, JSON and SVG this tool writes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Shortest round-trip form; NaN and missing values become empty fields.
pub fn csv_number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// The table as CSV, with a leading `schema_version` column.
pub fn table_csv(table: &Table) -> CliResult<Vec<u8>> {
    let header: Vec<String> =
        std::iter::once("schema_version".to_string()).chain(table.columns.iter().cloned()).collect();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| std::iter::once(SCHEMA_VERSION.to_string()).chain(r.iter().map(|&x| csv_number(x))).collect())
        .collect();
    csv_bytes(&header, &rows)
}

fn human_number(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.4e}")
    } else {
        format!("{x:.6}")
    }
}

/// Aligned columns, notes, and the verdict.
pub fn format_table(table: &Table) -> String {
    let cells: Vec<Vec<String>> = table.rows.iter().map(|r| r.iter().map(|&x| human_number(x)).collect()).collect();
    let widths: Vec<usize> = table
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let line = |items: Vec<&str>| {
        items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = format!("# {}\n", table.name);
    out.push_str(&line(table.columns.iter().map(String::as_str).collect()));
    out.push('\n');
    for r in &cells {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    for n in &table.notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out.push_str(if table.passed { "result: PASS\n" } else { "result: FAIL\n" });
    out
}
