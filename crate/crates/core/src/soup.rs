//! The coupled loop soups.
//!
//! Every root site `z` carries a marked Poisson process in intensity time:
//! arrivals come at total rate `Σ_n q_n = 4/(5π)` and each carries a length
//! mark `n` with probability `q_n / Σ q`. By the marking theorem the arrivals
//! with mark `n` form a Poisson process of rate `q_n`, independent across
//! `(n, z)`, so `N(n,z;λ)` counts marked arrivals up to `λ` and
//! `Ñ(n,z;λ)` counts them up to `(q̃_n / q_n) λ`. Since `q̃_n < q_n`, the
//! walk loops at a cell are always the first arrivals of the Brownian ones.

use crate::brownian::{
    duration_from_uniform, loop_from_bridge, q_n, q_tail, sample_bridge_2d, scale_brownian, scale_walk,
    sup_distance_rescaled, ContinuousLoop,
};
use crate::error::{out_of_range, Error, Result};
use crate::kmt::couple_2d;
use crate::lattice_walk::{qtilde, LatticePoint};
use crate::rng::{keyed_rng, StreamTag};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Current version of the soup JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Total Brownian mass per site, `Σ_{n≥1} q_n = 4/(5π)`.
pub fn total_site_rate() -> f64 {
    4.0 / (5.0 * PI)
}

/// Inclusive box of root sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub min: LatticePoint,
    pub max: LatticePoint,
}

impl Window {
    pub fn new(min: LatticePoint, max: LatticePoint) -> Result<Self> {
        if min.x > max.x || min.y > max.y {
            return Err(out_of_range("window", format!("empty box {min}..{max}")));
        }
        Ok(Self { min, max })
    }

    /// The box `[−h, h]²`.
    pub fn centered(half_width: i64) -> Result<Self> {
        Self::new(LatticePoint::new(-half_width, -half_width), LatticePoint::new(half_width, half_width))
    }

    /// Smallest centred box holding every site with `|z| < radius`.
    pub fn covering_disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(out_of_range("radius", "must be positive"));
        }
        Self::centered((radius.ceil() as i64 - 1).max(0))
    }

    pub fn contains(&self, z: LatticePoint) -> bool {
        (self.min.x..=self.max.x).contains(&z.x) && (self.min.y..=self.max.y).contains(&z.y)
    }

    pub fn site_count(&self) -> u64 {
        ((self.max.x - self.min.x + 1) * (self.max.y - self.min.y + 1)) as u64
    }

    pub fn sites(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (self.min.y..=self.max.y).flat_map(move |y| (self.min.x..=self.max.x).map(move |x| LatticePoint::new(x, y)))
    }

    fn site_index(&self, z: LatticePoint) -> usize {
        let width = self.max.x - self.min.x + 1;
        ((z.y - self.min.y) * width + (z.x - self.min.x)) as usize
    }
}

/// One arrival at a site: intensity time and length mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub lambda: f64,
    pub n: u64,
}

/// `n` with `P(mark ≤ n) = 1 − (5/8)/(n + 5/8) ≥ u`.
pub fn mark_from_uniform(u: f64) -> u64 {
    let x = 0.625 / (1.0 - u) - 0.625;
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x.ceil() as u64).max(1)
    }
}

/// The shared Poisson field on a window of root sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonField {
    window: Window,
    n_max: u64,
    lambda_max: f64,
    seed: u64,
    sites: Vec<Vec<Arrival>>,
}

/// Generates every site's arrivals up to `λ_max`. Each site reads its own
/// keyed stream sequentially, so arrivals below any `λ` do not depend on
/// `λ_max`.
pub fn build_field(window: Window, n_max: u64, lambda_max: f64, seed: u64) -> Result<PoissonField> {
    if n_max == 0 {
        return Err(out_of_range("n_max", "must be at least 1"));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(out_of_range("lambda_max", "must be positive and finite"));
    }
    let sites: Vec<LatticePoint> = window.sites().collect();
    let sites = sites.par_iter().map(|&z| site_arrivals(seed, z, lambda_max)).collect();
    Ok(PoissonField { window, n_max, lambda_max, seed, sites })
}

fn site_arrivals(seed: u64, z: LatticePoint, lambda_max: f64) -> Vec<Arrival> {
    let mut rng = keyed_rng(seed, StreamTag::Arrivals, &[z.x, z.y]);
    let rate = total_site_rate();
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / rate;
        if t > lambda_max {
            return out;
        }
        let n = mark_from_uniform(rng.random());
        out.push(Arrival { lambda: t, n });
    }
}

/// Ratio `q̃_n / q_n`, the fraction of Brownian intensity time seen by the
/// walk soup.
pub fn walk_time_ratio(n: u64) -> f64 {
    qtilde(n) / q_n(n)
}

impl PoissonField {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mass per site of loops beyond `n_max`, `Σ_{n > n_max} q_n`.
    pub fn truncated_mass(&self) -> f64 {
        q_tail(self.n_max + 1)
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !(lambda >= 0.0) {
            return Err(out_of_range("lambda", "must be nonnegative"));
        }
        if lambda > self.lambda_max {
            return Err(Error::BeyondHorizon { requested: lambda, lambda_max: self.lambda_max });
        }
        Ok(())
    }

    fn site(&self, z: LatticePoint) -> Result<&[Arrival]> {
        if !self.window.contains(z) {
            return Err(out_of_range("z", format!("{z} is outside the field window")));
        }
        Ok(&self.sites[self.window.site_index(z)])
    }

    /// All arrivals at `z` up to `λ_max`, in increasing intensity time.
    pub fn site_arrivals(&self, z: LatticePoint) -> Result<&[Arrival]> {
        self.site(z)
    }

    /// Intensity times of the arrivals in cell `(n, z)`.
    pub fn arrivals(&self, n: u64, z: LatticePoint) -> Result<Vec<f64>> {
        Ok(self.site(z)?.iter().filter(|a| a.n == n).map(|a| a.lambda).collect())
    }

    /// `N(n, z; λ)`: Brownian loops of index `n` rooted at `z`.
    pub fn count(&self, n: u64, z: LatticePoint, lambda: f64) -> Result<u64> {
        self.check_lambda(lambda)?;
        Ok(self.site(z)?.iter().filter(|a| a.n == n && a.lambda <= lambda).count() as u64)
    }

    /// `Ñ(n, z; λ)`: walk loops of length `2n` rooted at `z`.
    pub fn count_tilde(&self, n: u64, z: LatticePoint, lambda: f64) -> Result<u64> {
        self.check_lambda(lambda)?;
        let cut = walk_time_ratio(n) * lambda;
        Ok(self.site(z)?.iter().filter(|a| a.n == n && a.lambda <= cut).count() as u64)
    }

    /// Every occupied cell at `λ` as `(n, z, N, Ñ)`, ordered by `(z, n)`.
    pub fn cells(&self, lambda: f64) -> Result<Vec<(u64, LatticePoint, u64, u64)>> {
        self.check_lambda(lambda)?;
        let mut out = Vec::new();
        for (z, arrivals) in self.window.sites().zip(&self.sites) {
            let mut ns: Vec<u64> = arrivals.iter().filter(|a| a.lambda <= lambda).map(|a| a.n).collect();
            ns.sort_unstable();
            ns.dedup();
            for n in ns {
                let cut = walk_time_ratio(n) * lambda;
                let (mut big, mut small) = (0, 0);
                for a in arrivals.iter().filter(|a| a.n == n) {
                    big += (a.lambda <= lambda) as u64;
                    small += (a.lambda <= cut) as u64;
                }
                out.push((n, z, big, small));
            }
        }
        Ok(out)
    }
}

/// `(n, z, m)`: the `m`-th loop (from 1) of length index `n` rooted at `z`.
/// Small uncoupled loops use `n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LoopIndex {
    pub n: u64,
    pub z: LatticePoint,
    pub m: u64,
}

impl LoopIndex {
    fn key(&self) -> [i64; 4] {
        [self.n as i64, self.z.x, self.z.y, self.m as i64]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoupKind {
    Walk,
    Brownian,
}

/// Knobs for realizing loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoupOptions {
    /// Bridge intervals per walk step, as a power of two.
    pub refine: u32,
    /// Add the independent layer of loops shorter than 5/8.
    pub include_small: bool,
    /// Shortest duration of the small layer, before scaling.
    pub t_min: f64,
}

impl Default for SoupOptions {
    fn default() -> Self {
        Self { refine: 1, include_small: false, t_min: 0.1 }
    }
}

/// What was left out of a realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Truncation {
    pub window: Window,
    pub n_max: u64,
    pub t_min: Option<f64>,
    /// Loops present in the field but not realized because `n > n_max`.
    pub beyond_n_max: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoupLoop {
    pub index: LoopIndex,
    pub path: ContinuousLoop,
    pub coupled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoupRealization {
    pub kind: SoupKind,
    pub lambda: f64,
    pub scale: u32,
    pub truncation: Truncation,
    pub loops: Vec<SoupLoop>,
}

/// Duration `T(n, z; m)` of a coupled Brownian loop, before scaling.
pub fn loop_duration(seed: u64, index: LoopIndex) -> f64 {
    let mut rng = keyed_rng(seed, StreamTag::Duration, &index.key());
    duration_from_uniform(index.n, rng.random())
}

/// Root offset `Y(n, z; m)`, uniform on the open unit square about 0.
pub fn root_offset(seed: u64, index: LoopIndex) -> Complex64 {
    let mut rng = keyed_rng(seed, StreamTag::RootOffset, &index.key());
    let mut coord = || loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u - 0.5;
        }
    };
    Complex64::new(coord(), coord())
}

/// Unscaled walk and Brownian loops of one index, from its shared coupled
/// bridge pair.
pub fn coupled_pair(seed: u64, index: LoopIndex, refine: u32) -> Result<(ContinuousLoop, ContinuousLoop)> {
    if index.n == 0 {
        return Err(out_of_range("n", "index 0 is reserved for uncoupled loops"));
    }
    let mut rng = keyed_rng(seed, StreamTag::BridgePair, &index.key());
    let pair = couple_2d(index.n, refine, &mut rng)?;
    let walk = ContinuousLoop::from_walk(&pair.walk, index.z)?;
    let root = Complex64::new(index.z.x as f64, index.z.y as f64) + root_offset(seed, index);
    let brownian = loop_from_bridge(&pair.bridge, loop_duration(seed, index), root)?;
    Ok((walk, brownian))
}

fn soup_indices(field: &PoissonField, lambda: f64, kind: SoupKind) -> Result<(Vec<LoopIndex>, u64)> {
    let mut indices = Vec::new();
    let mut beyond = 0;
    for (n, z, big, small) in field.cells(lambda)? {
        let count = match kind {
            SoupKind::Walk => small,
            SoupKind::Brownian => big,
        };
        if n > field.n_max {
            beyond += count;
            continue;
        }
        indices.extend((1..=count).map(|m| LoopIndex { n, z, m }));
    }
    indices.sort_unstable();
    Ok((indices, beyond))
}

/// The rooted random walk loop soup at intensity `λ`, scaled by `Φ̃_N`.
pub fn rw_soup(field: &PoissonField, lambda: f64, scale: u32, opts: &SoupOptions) -> Result<SoupRealization> {
    check_scale(scale)?;
    let (indices, beyond) = soup_indices(field, lambda, SoupKind::Walk)?;
    let loops = indices
        .par_iter()
        .map(|&index| {
            let (walk, _) = coupled_pair(field.seed, index, opts.refine)?;
            Ok(SoupLoop { index, path: scale_walk(&walk, scale), coupled: true })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SoupRealization {
        kind: SoupKind::Walk,
        lambda,
        scale,
        truncation: Truncation { window: field.window, n_max: field.n_max, t_min: None, beyond_n_max: beyond },
        loops,
    })
}

/// The rooted Brownian loop soup at intensity `λ`, scaled by `Φ_N`.
pub fn brownian_soup(field: &PoissonField, lambda: f64, scale: u32, opts: &SoupOptions) -> Result<SoupRealization> {
    check_scale(scale)?;
    if opts.include_small && !(opts.t_min > 0.0 && opts.t_min < 0.625) {
        return Err(out_of_range("t_min", "must lie in (0, 5/8)"));
    }
    let (indices, beyond) = soup_indices(field, lambda, SoupKind::Brownian)?;
    let mut loops = indices
        .par_iter()
        .map(|&index| {
            let (_, brownian) = coupled_pair(field.seed, index, opts.refine)?;
            Ok(SoupLoop { index, path: scale_brownian(&brownian, scale), coupled: true })
        })
        .collect::<Result<Vec<_>>>()?;
    if opts.include_small {
        let sites: Vec<LatticePoint> = field.window.sites().collect();
        let small: Vec<SoupLoop> = sites
            .par_iter()
            .flat_map_iter(|&z| small_loops_at(field.seed, z, lambda, opts.t_min))
            .map(|(index, path)| SoupLoop { index, path: scale_brownian(&path, scale), coupled: false })
            .collect();
        loops.extend(small);
    }
    Ok(SoupRealization {
        kind: SoupKind::Brownian,
        lambda,
        scale,
        truncation: Truncation {
            window: field.window,
            n_max: field.n_max,
            t_min: opts.include_small.then_some(opts.t_min),
            beyond_n_max: beyond,
        },
        loops,
    })
}

const SMALL_LOOP_DEPTH: u32 = 5;

fn small_loops_at(seed: u64, z: LatticePoint, lambda: f64, t_min: f64) -> Vec<(LoopIndex, ContinuousLoop)> {
    let rate = small_loop_mass(t_min, 0.625, 1.0).unwrap_or(0.0);
    let mut rng = keyed_rng(seed, StreamTag::SmallLoops, &[z.x, z.y]);
    let mut out = Vec::new();
    let mut t = 0.0;
    for m in 1.. {
        let e: f64 = rng.sample(Exp1);
        t += e / rate;
        if t > lambda {
            break;
        }
        let index = LoopIndex { n: 0, z, m };
        let mut own = keyed_rng(seed, StreamTag::SmallLoops, &index.key());
        // density ∝ t⁻² on [t_min, 5/8)
        let u: f64 = own.random();
        let duration = 1.0 / (1.0 / t_min - u * (1.0 / t_min - 1.6));
        let offset = Complex64::new(own.random::<f64>() - 0.5, own.random::<f64>() - 0.5);
        let root = Complex64::new(z.x as f64, z.y as f64) + offset;
        let bridge = sample_bridge_2d(SMALL_LOOP_DEPTH, &mut own);
        if let Ok(path) = loop_from_bridge(&bridge, duration, root) {
            out.push((index, path));
        }
    }
    out
}

fn check_scale(scale: u32) -> Result<()> {
    if scale == 0 {
        return Err(out_of_range("scale", "N must be at least 1"));
    }
    Ok(())
}

/// `φ_N(t) = k/N²` for `k/N² − 3/(8N²) ≤ t < k/N² + 5/(8N²)`.
pub fn phi_n(t: f64, scale: u32) -> Result<f64> {
    check_scale(scale)?;
    let n2 = (scale as f64).powi(2);
    if !(t >= 0.625 / n2) {
        return Err(out_of_range("t", format!("{t} is below 5/(8N²)")));
    }
    let k = (t * n2 + 0.375).floor();
    Ok(k / n2)
}

fn round_half_toward_zero(x: f64) -> f64 {
    if (x - x.trunc()).abs() == 0.5 {
        x.trunc()
    } else {
        x.round()
    }
}

/// `ψ_N(z)`: the nearest point of `N⁻¹ Z²`, ties rounded toward zero.
pub fn psi_n(z: Complex64, scale: u32) -> Complex64 {
    let n = scale as f64;
    Complex64::new(round_half_toward_zero(z.re * n) / n, round_half_toward_zero(z.im * n) / n)
}

/// `area · (1/2π) · (1/t_min − 1/t_max)`, the Brownian loop mass with
/// durations in `[t_min, t_max)` rooted in a set of that area.
pub fn small_loop_mass(t_min: f64, t_max: f64, area: f64) -> Result<f64> {
    if !(t_min > 0.0 && t_max >= t_min) {
        return Err(out_of_range("t_min", "need 0 < t_min ≤ t_max"));
    }
    if !(area >= 0.0) {
        return Err(out_of_range("area", "must be nonnegative"));
    }
    Ok(area / (2.0 * PI) * (1.0 / t_min - 1.0 / t_max))
}

/// Which side of the correspondence a loop lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Walk,
    Brownian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedReason {
    /// `N(n,z;λ) ≠ Ñ(n,z;λ)` in a selected cell.
    CountMismatch,
    /// The partner fails the other side's selection rule.
    SelectionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Unmatched {
    pub index: LoopIndex,
    pub side: Side,
    pub reason: UnmatchedReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchedPair {
    pub index: LoopIndex,
    /// `|t_γ − t_γ̃|` after scaling.
    pub duration_gap: f64,
    /// Rescaled sup distance, absent when `n > n_max` or paths were not
    /// requested.
    pub sup_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub refine: u32,
    /// Realize both loops of each pair to measure the sup distance.
    pub realize_paths: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { refine: 1, realize_paths: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CouplingReport {
    pub lambda: f64,
    pub scale: u32,
    pub r: f64,
    pub theta: f64,
    pub pairs: Vec<MatchedPair>,
    pub unmatched: Vec<Unmatched>,
    pub bijective: bool,
    pub max_duration_gap: f64,
    pub max_sup_distance: Option<f64>,
    pub median_sup_distance: Option<f64>,
    /// Pairs whose paths were not realized because `n > n_max`.
    pub unrealized: u64,
}

/// The correspondence between long loops of both soups near the origin.
///
/// Walk side: `t_γ̃ > N^{θ−2}` and `|γ̃(0)| < r`. Brownian side:
/// `φ_N(t_γ) > N^{θ−2}` and `|ψ_N(γ(0))| < r`. Loops are paired by index.
pub fn theorem1_report(
    field: &PoissonField,
    lambda: f64,
    scale: u32,
    r: f64,
    theta: f64,
    opts: &ReportOptions,
) -> Result<CouplingReport> {
    check_scale(scale)?;
    if !(theta > 2.0 / 3.0 && theta < 2.0) {
        return Err(out_of_range("theta", "need 2/3 < θ < 2"));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(out_of_range("r", "need r ≥ 1"));
    }
    let nf = scale as f64;
    let radius = r * nf;
    let needed = Window::covering_disk(radius)?;
    if !(field.window.contains(needed.min) && field.window.contains(needed.max)) {
        return Err(out_of_range("window", format!("field window does not cover |z| < {radius}")));
    }
    let cutoff = nf.powf(theta - 2.0);
    let n2 = nf * nf;
    let seed = field.seed;
    let mut walk_side = Vec::new();
    let mut brownian_side = Vec::new();
    for (n, z, big, small) in field.cells(lambda)? {
        // walk loops: duration 2n / (2N²), root z / N
        let walk_root = Complex64::new(z.x as f64, z.y as f64) / nf;
        if n as f64 / n2 > cutoff && walk_root.norm() < r {
            walk_side.extend((1..=small).map(|m| LoopIndex { n, z, m }));
        }
        for m in 1..=big {
            let index = LoopIndex { n, z, m };
            let t = loop_duration(seed, index) / n2;
            let root = (Complex64::new(z.x as f64, z.y as f64) + root_offset(seed, index)) / nf;
            if phi_n(t, scale)? > cutoff && psi_n(root, scale).norm() < r {
                brownian_side.push(index);
            }
        }
    }
    walk_side.sort_unstable();
    brownian_side.sort_unstable();
    let mut common = Vec::new();
    let mut unmatched = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < walk_side.len() || j < brownian_side.len() {
        match (walk_side.get(i), brownian_side.get(j)) {
            (Some(a), Some(b)) if a == b => {
                common.push(*a);
                i += 1;
                j += 1;
            }
            (Some(a), b) if b.is_none_or(|b| a < b) => {
                unmatched.push(unmatched_entry(field, lambda, *a, Side::Walk)?);
                i += 1;
            }
            (_, Some(b)) => {
                unmatched.push(unmatched_entry(field, lambda, *b, Side::Brownian)?);
                j += 1;
            }
            _ => unreachable!(),
        }
    }
    let pairs = common
        .par_iter()
        .map(|&index| {
            let gap = (loop_duration(seed, index) - index.n as f64).abs() / n2;
            let sup_distance = if opts.realize_paths && index.n <= field.n_max {
                let (walk, brownian) = coupled_pair(seed, index, opts.refine)?;
                Some(sup_distance_rescaled(&scale_brownian(&brownian, scale), &scale_walk(&walk, scale), None))
            } else {
                None
            };
            Ok(MatchedPair { index, duration_gap: gap, sup_distance })
        })
        .collect::<Result<Vec<_>>>()?;
    let unrealized =
        if opts.realize_paths { pairs.iter().filter(|p| p.sup_distance.is_none()).count() as u64 } else { 0 };
    let max_duration_gap = pairs.iter().map(|p| p.duration_gap).fold(0.0, f64::max);
    let mut sups: Vec<f64> = pairs.iter().filter_map(|p| p.sup_distance).collect();
    sups.sort_by(|a, b| a.total_cmp(b));
    let max_sup_distance = sups.last().copied();
    let median_sup_distance = (!sups.is_empty()).then(|| crate::stats::quantile(&sups, 0.5));
    Ok(CouplingReport {
        lambda,
        scale,
        r,
        theta,
        bijective: unmatched.is_empty(),
        pairs,
        unmatched,
        max_duration_gap,
        max_sup_distance,
        median_sup_distance,
        unrealized,
    })
}

fn unmatched_entry(field: &PoissonField, lambda: f64, index: LoopIndex, side: Side) -> Result<Unmatched> {
    let big = field.count(index.n, index.z, lambda)?;
    let small = field.count_tilde(index.n, index.z, lambda)?;
    let reason =
        if index.m > big.min(small) { UnmatchedReason::CountMismatch } else { UnmatchedReason::SelectionMismatch };
    Ok(Unmatched { index, side, reason })
}

/// Probability that a given field breaks the correspondence for the cells
/// selected by `(N, r, θ)`: `1 − Π P(N = Ñ)` over `n > N^θ`, `|z| < rN`.
///
/// In a cell, `N = Ñ` exactly when no arrival falls in
/// `((q̃_n/q_n) λ, λ]`, which has probability `exp(−λ (q_n − q̃_n))`.
pub fn mismatch_probability(lambda: f64, scale: u32, r: f64, theta: f64, n_limit: u64) -> f64 {
    let nf = scale as f64;
    let cutoff = nf.powf(theta);
    let radius = r * nf;
    let h = radius.ceil() as i64;
    let mut sites = 0u64;
    for x in -h..=h {
        for y in -h..=h {
            if ((x * x + y * y) as f64).sqrt() < radius {
                sites += 1;
            }
        }
    }
    let mut per_site = 0.0;
    for n in 1..=n_limit {
        if n as f64 > cutoff {
            per_site += q_n(n) - qtilde(n);
        }
    }
    1.0 - (-(lambda * per_site * sites as f64)).exp()
}

#[derive(Serialize, Deserialize)]
struct WireLoop {
    n: u64,
    z: [i64; 2],
    m: u64,
    duration: f64,
    points: Vec<[f64; 3]>,
    coupled: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireSoup {
    schema_version: u32,
    kind: SoupKind,
    lambda: f64,
    #[serde(rename = "scaleN")]
    scale_n: u32,
    truncation: Truncation,
    loops: Vec<WireLoop>,
}

impl SoupRealization {
    pub fn to_json(&self) -> Result<String> {
        let wire = WireSoup {
            schema_version: SCHEMA_VERSION,
            kind: self.kind,
            lambda: self.lambda,
            scale_n: self.scale,
            truncation: self.truncation,
            loops: self
                .loops
                .iter()
                .map(|l| WireLoop {
                    n: l.index.n,
                    z: [l.index.z.x, l.index.z.y],
                    m: l.index.m,
                    duration: l.path.duration(),
                    points: l.path.times().iter().zip(l.path.points()).map(|(t, p)| [*t, p.re, p.im]).collect(),
                    coupled: l.coupled,
                })
                .collect(),
        };
        serde_json::to_string(&wire).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireSoup = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if wire.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema version {}", wire.schema_version)));
        }
        let loops = wire
            .loops
            .into_iter()
            .map(|l| {
                let times = l.points.iter().map(|p| p[0]).collect();
                let points = l.points.iter().map(|p| Complex64::new(p[1], p[2])).collect();
                let path = ContinuousLoop::new(times, points).map_err(|e| Error::Schema(e.to_string()))?;
                if path.duration() != l.duration {
                    return Err(Error::Schema(format!("duration {} disagrees with its points", l.duration)));
                }
                let index = LoopIndex { n: l.n, z: LatticePoint::new(l.z[0], l.z[1]), m: l.m };
                Ok(SoupLoop { index, path, coupled: l.coupled })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SoupRealization {
            kind: wire.kind,
            lambda: wire.lambda,
            scale: wire.scale_n,
            truncation: wire.truncation,
            loops,
        })
    }
}
