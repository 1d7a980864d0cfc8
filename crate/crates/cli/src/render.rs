//! SVG drawing of soup files.
//!
//! A loop is matched when the same index appears, coupled, in both a walk
//! and a Brownian input. Matched pairs share a color; every other loop is
//! dashed.

use crate::config::RenderArgs;
use crate::error::{CliError, CliResult};
use crate::output::{read_file, write_file, SCHEMA_VERSION};
use loopsoup::{LoopIndex, SoupKind, SoupRealization};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn color(index: &LoopIndex) -> &'static str {
    let h = index
        .n
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((index.z.x as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add((index.z.y as u64).wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(index.m);
    PALETTE[((h ^ (h >> 31)) % PALETTE.len() as u64) as usize]
}

pub fn load(path: &Path) -> CliResult<SoupRealization> {
    let text = read_file(path)?;
    SoupRealization::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Renders realizations to an SVG document.
pub fn render_svg(soups: &[SoupRealization], size: u32) -> String {
    let coupled = |kind: SoupKind| -> BTreeSet<LoopIndex> {
        soups
            .iter()
            .filter(|s| s.kind == kind)
            .flat_map(|s| s.loops.iter().filter(|l| l.coupled).map(|l| l.index))
            .collect()
    };
    let matched: BTreeSet<LoopIndex> =
        coupled(SoupKind::Walk).intersection(&coupled(SoupKind::Brownian)).copied().collect();

    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in soups.iter().flat_map(|s| &s.loops).flat_map(|l| l.path.points()) {
        lo = (lo.0.min(p.re), lo.1.min(p.im));
        hi = (hi.0.max(p.re), hi.1.max(p.im));
    }
    if !lo.0.is_finite() {
        (lo, hi) = ((-1.0, -1.0), (1.0, 1.0));
    }
    let centre = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let half = ((hi.0 - lo.0).max(hi.1 - lo.1) / 2.0 * 1.05).max(1e-9);
    let px = size as f64;
    let margin = 0.05 * px;
    let k = (px - 2.0 * margin) / (2.0 * half);
    let sx = |x: f64| margin + (x - centre.0 + half) * k;
    let sy = |y: f64| px - margin - (y - centre.1 + half) * k;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" data-schema-version="{SCHEMA_VERSION}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (centre.0 - half, centre.0 + half, centre.1 - half, centre.1 + half);
    let _ = writeln!(
        svg,
        r##"<g class="axes" stroke="#555" stroke-width="1" font-family="sans-serif" font-size="11" fill="#555">"##
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none"/>"#,
        margin,
        margin,
        px - 2.0 * margin,
        px - 2.0 * margin
    );
    let ax = if (y0..=y1).contains(&0.0) { 0.0 } else { y0 };
    let ay = if (x0..=x1).contains(&0.0) { 0.0 } else { x0 };
    let _ = writeln!(svg, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, sx(x0), sy(ax), sx(x1), sy(ax));
    let _ = writeln!(svg, r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#, sx(ay), sy(y0), sx(ay), sy(y1));
    let _ = writeln!(svg, r#"<text x="{:.3}" y="{:.3}" stroke="none">{x0:.3}</text>"#, sx(x0), px - margin / 3.0);
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" stroke="none" text-anchor="end">{x1:.3}</text>"#,
        sx(x1),
        px - margin / 3.0
    );
    let _ = writeln!(svg, r#"<text x="{:.3}" y="{:.3}" stroke="none">{y1:.3}</text>"#, 2.0, sy(y1) - 4.0);
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="loops" fill="none" stroke-linejoin="round">"#);
    for soup in soups {
        let (class, width) = match soup.kind {
            SoupKind::Walk => ("walk", 1.5),
            SoupKind::Brownian => ("brownian", 1.0),
        };
        for l in &soup.loops {
            let paired = l.coupled && matched.contains(&l.index);
            let mut points = String::new();
            for p in l.path.points() {
                let _ = write!(points, "{:.3},{:.3} ", sx(p.re), sy(p.im));
            }
            let dash = if paired { "" } else { r#" stroke-dasharray="4 3""# };
            let _ = writeln!(
                svg,
                r#"<polyline class="{class}" data-index="{},{},{},{}" stroke="{}" stroke-width="{width}"{dash} points="{}"/>"#,
                l.index.n,
                l.index.z.x,
                l.index.z.y,
                l.index.m,
                color(&l.index),
                points.trim_end()
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    svg
}

pub fn render(a: &RenderArgs) -> CliResult<()> {
    if !(16..=16384).contains(&a.size) {
        return Err(CliError::Validation("--size must lie in [16, 16384]".into()));
    }
    let soups = a.input.iter().map(|p| load(p)).collect::<CliResult<Vec<_>>>()?;
    write_file(&a.out, render_svg(&soups, a.size).as_bytes())?;
    println!("wrote {}", a.out.display());
    Ok(())
}
