//! Quantile coupling and the recursive dyadic coupling of walk bridges with a
//! Brownian bridge.
//!
//! A [`DyadicCoupling`] stores one standard normal per internal node and the
//! base randomness of each leaf. The Brownian bridge and the walk bridge for
//! any admissible endpoint are derived from it deterministically, so the whole
//! family `{S^(n,z)}` lives on one probability space.

use crate::brownian::{sample_bridge, BridgePath1D, BridgePath2D};
use crate::error::{out_of_range, Error, Result};
use crate::lattice_walk::{check_endpoint, conditioned_midpoint_pmf, WalkBridge1D, WalkBridge2D};
use crate::stats::{normal_cdf, normal_sf};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

/// A continuous law given by its CDF and survival function.
pub trait ContinuousLaw {
    fn cdf(&self, x: f64) -> f64;
    fn sf(&self, x: f64) -> f64;
}

/// `N(mean, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLaw {
    mean: f64,
    sd: f64,
}

impl NormalLaw {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidDistribution(format!("normal with mean {mean}, sd {sd}")));
        }
        Ok(Self { mean, sd })
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

impl ContinuousLaw for NormalLaw {
    fn cdf(&self, x: f64) -> f64 {
        normal_cdf((x - self.mean) / self.sd)
    }

    fn sf(&self, x: f64) -> f64 {
        normal_sf((x - self.mean) / self.sd)
    }
}

/// A finitely supported law on the reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    /// Support points must be strictly increasing and masses must be
    /// nonnegative and sum to one.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::InvalidDistribution("support and masses differ in length".into()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDistribution("support is not strictly increasing".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or NaN mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Self { support, probs })
    }

    /// Builds the law from cumulative masses `G(a_j)`.
    pub fn from_cumulative(support: Vec<f64>, cumulative: &[f64]) -> Result<Self> {
        if cumulative.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDistribution("cumulative masses decrease".into()));
        }
        if cumulative.last().is_some_and(|&c| (c - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidDistribution("cumulative masses do not reach one".into()));
        }
        let mut prev = 0.0;
        let probs = cumulative
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect();
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `G(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.support.iter().zip(&self.probs).filter(|(a, _)| **a <= x).map(|(_, p)| p).sum()
    }
}

/// The pair of laws `F` (continuous) and `G` (discrete) being coupled.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSpec<F = NormalLaw> {
    pub continuous: F,
    pub discrete: DiscreteLaw,
}

impl<F: ContinuousLaw> QuantileSpec<F> {
    pub fn new(continuous: F, discrete: DiscreteLaw) -> Self {
        Self { continuous, discrete }
    }
}

/// Index `j` with `G(a_j−) < u ≤ G(a_j)`, where `u = lower = 1 − upper`.
///
/// The search runs from whichever end is closer so that tail probabilities
/// below machine epsilon still resolve correctly.
fn quantile_index(probs: &[f64], lower: f64, upper: f64) -> usize {
    let last = probs.len() - 1;
    if lower <= upper {
        let mut cum = 0.0;
        for (j, p) in probs.iter().enumerate() {
            cum += p;
            if cum >= lower {
                return j;
            }
        }
        last
    } else {
        // largest j with P(W ≥ a_j) > upper
        let mut tail = 0.0;
        for j in (0..=last).rev() {
            tail += probs[j];
            if tail > upper {
                return j;
            }
        }
        0
    }
}

/// Returns the support point `a_j` with `G(a_j−) < F(z_draw) ≤ G(a_j)`.
pub fn quantile_couple<F: ContinuousLaw>(z_draw: f64, spec: &QuantileSpec<F>) -> Result<f64> {
    if z_draw.is_nan() {
        return Err(out_of_range("z_draw", "NaN"));
    }
    let lower = spec.continuous.cdf(z_draw);
    let upper = spec.continuous.sf(z_draw);
    if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || (lower + upper - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("continuous law returned cdf {lower}, sf {upper} at {z_draw}")));
    }
    let j = quantile_index(&spec.discrete.probs, lower, upper);
    Ok(spec.discrete.support[j])
}

/// Mean `(m/n) z` and variance `m (1 − m/n)` of the normal that is quantile
/// coupled with the walk at the split point `m`.
pub fn midpoint_normal_params(n: u64, m: u64, z: i64) -> Result<(f64, f64)> {
    check_endpoint(n, z)?;
    if (2 * m as i64 - n as i64).abs() > 1 {
        return Err(out_of_range("m", format!("{m} is not a split point of {n}")));
    }
    let frac = m as f64 / n as f64;
    Ok((frac * z as f64, m as f64 * (1.0 - frac)))
}

/// Quantile couples a uniform given as `(lower, 1 − lower)` with the law of
/// `S_m` given `S_total = z`.
///
/// Masses are generated from the mode outwards by binomial ratios and
/// normalised afterwards, so no term underflows near the centre.
fn couple_conditioned(total: u64, z: i64, m: u64, lower: f64, upper: f64) -> i64 {
    let (m_i, rest) = (m as i64, (total - m) as i64);
    let lo = (-m_i).max(z - rest);
    let hi = m_i.min(z + rest);
    let len = ((hi - lo) / 2 + 1) as usize;
    if len == 1 {
        return lo;
    }
    // p(w + 2) / p(w)
    let ratio = |w: i64| {
        let a = ((m_i - w) / 2) as f64;
        let b = ((m_i + w) / 2 + 1) as f64;
        let j = (rest + z - w) / 2;
        a * j as f64 / (b * (rest - j + 1) as f64)
    };
    let centre = m as f64 / total as f64 * z as f64;
    let mode_idx = (((centre - lo as f64) / 2.0).round().max(0.0) as usize).min(len - 1);
    let mut probs = vec![0.0; len];
    probs[mode_idx] = 1.0;
    for i in mode_idx + 1..len {
        probs[i] = probs[i - 1] * ratio(lo + 2 * (i as i64 - 1));
    }
    for i in (0..mode_idx).rev() {
        probs[i] = probs[i + 1] / ratio(lo + 2 * i as i64);
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    lo + 2 * quantile_index(&probs, lower, upper) as i64
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { size: u64, left_size: u64, normal: f64, left: usize, right: usize },
    Leaf { size: u64, walk_uniform: f64, piece: Vec<f64> },
}

/// One `n`-coupling: the recursion tree with its stored randomness.
///
/// Leaves carry a standard bridge piece sampled at `size · 2^refine`
/// intervals, which fixes the time grid of the realized bridge.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCoupling {
    steps: u64,
    refine: u32,
    nodes: Vec<Node>,
    root: usize,
}

/// Builds an `n`-coupling whose bridge is resolved at the walk's integer
/// times and the split points.
pub fn build_coupling<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<DyadicCoupling> {
    build_coupling_refined(n, 0, rng)
}

/// As [`build_coupling`], with `2^refine` bridge intervals per walk step.
pub fn build_coupling_refined<R: Rng + ?Sized>(n: u64, refine: u32, rng: &mut R) -> Result<DyadicCoupling> {
    if n == 0 {
        return Err(out_of_range("n", "coupling needs at least one step"));
    }
    if refine > 16 {
        return Err(out_of_range("refine", format!("{refine} exceeds 16")));
    }
    let mut nodes = Vec::new();
    let root = grow(n, refine, rng, &mut nodes);
    Ok(DyadicCoupling { steps: n, refine, nodes, root })
}

fn grow<R: Rng + ?Sized>(size: u64, refine: u32, rng: &mut R, nodes: &mut Vec<Node>) -> usize {
    if size <= 2 {
        let walk_uniform: f64 = rng.random();
        let depth = refine + (size == 2) as u32;
        let piece = sample_bridge(depth, rng).values().to_vec();
        nodes.push(Node::Leaf { size, walk_uniform, piece });
        return nodes.len() - 1;
    }
    let left_size = size / 2;
    let normal: f64 = rng.sample(StandardNormal);
    let left = grow(left_size, refine, rng, nodes);
    let right = grow(size - left_size, refine, rng, nodes);
    nodes.push(Node::Split { size, left_size, normal, left, right });
    nodes.len() - 1
}

impl DyadicCoupling {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn refine(&self) -> u32 {
        self.refine
    }

    /// Number of bridge intervals per walk step.
    pub fn resolution(&self) -> usize {
        1 << self.refine
    }

    /// Normal draw at the root split, if the root is not a leaf.
    pub fn root_normal(&self) -> Option<f64> {
        match self.nodes[self.root] {
            Node::Split { normal, .. } => Some(normal),
            Node::Leaf { .. } => None,
        }
    }

    /// Size of the left child of the root (`⌊n/2⌋`), or `n` for a leaf.
    pub fn root_split(&self) -> u64 {
        match self.nodes[self.root] {
            Node::Split { left_size, .. } => left_size,
            Node::Leaf { size, .. } => size,
        }
    }

    /// Child sizes in preorder, for inspecting the tree shape.
    pub fn leaf_sizes(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.collect_leaves(self.root, &mut out);
        out
    }

    fn collect_leaves(&self, idx: usize, out: &mut Vec<u64>) {
        match &self.nodes[idx] {
            Node::Split { left, right, .. } => {
                self.collect_leaves(*left, out);
                self.collect_leaves(*right, out);
            }
            Node::Leaf { size, .. } => out.push(*size),
        }
    }

    /// Depth of the tree (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        self.depth_of(self.root)
    }

    fn depth_of(&self, idx: usize) -> usize {
        match &self.nodes[idx] {
            Node::Split { left, right, .. } => 1 + self.depth_of(*left).max(self.depth_of(*right)),
            Node::Leaf { .. } => 0,
        }
    }

    /// Replaces every stored normal, leaf uniform and bridge piece value.
    /// Used to build degenerate couplings in tests.
    pub fn with_randomness(mut self, normal: f64, walk_uniform: f64, piece_value: f64) -> Self {
        for node in &mut self.nodes {
            match node {
                Node::Split { normal: n, .. } => *n = normal,
                Node::Leaf { walk_uniform: u, piece, .. } => {
                    *u = walk_uniform;
                    let last = piece.len() - 1;
                    for (i, v) in piece.iter_mut().enumerate() {
                        *v = if i == 0 || i == last { 0.0 } else { piece_value };
                    }
                }
            }
        }
        self
    }
}

/// The standard Brownian bridge on `[0, 1]` carried by the coupling, on the
/// grid `i / (n · 2^refine)`.
pub fn realize_bridge(coupling: &DyadicCoupling) -> BridgePath1D {
    let res = coupling.resolution();
    let intervals = coupling.steps as usize * res;
    let mut values = vec![0.0; intervals + 1];
    fill_bridge(coupling, coupling.root, 0, 1.0, 0.0, 0.0, &mut values);
    let times = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
    BridgePath1D::new(times, values).expect("uniform grid is valid")
}

// Affine form of repeated surgery: a node of relative length `scale²`
// carries `scale · B + linear interpolation of its endpoint values`.
fn fill_bridge(
    c: &DyadicCoupling,
    idx: usize,
    offset: usize,
    scale: f64,
    left_val: f64,
    right_val: f64,
    out: &mut [f64],
) {
    let res = c.resolution();
    match &c.nodes[idx] {
        Node::Split { size, left_size, normal, left, right } => {
            let s = *left_size as f64 / *size as f64;
            let mid = scale * (s * (1.0 - s)).sqrt() * normal + left_val + s * (right_val - left_val);
            let split = offset + *left_size as usize * res;
            out[split] = mid;
            fill_bridge(c, *left, offset, scale * s.sqrt(), left_val, mid, out);
            fill_bridge(c, *right, split, scale * (1.0 - s).sqrt(), mid, right_val, out);
        }
        Node::Leaf { size, piece, .. } => {
            let intervals = *size as usize * res;
            for (j, b) in piece.iter().enumerate() {
                let u = j as f64 / intervals as f64;
                out[offset + j] = scale * b + left_val + u * (right_val - left_val);
            }
        }
    }
}

/// The walk bridge `S^(n,z)` carried by the coupling.
pub fn realize_walk(coupling: &DyadicCoupling, z: i64) -> Result<WalkBridge1D> {
    check_endpoint(coupling.steps, z)?;
    let mut positions = vec![0i64; coupling.steps as usize + 1];
    positions[coupling.steps as usize] = z;
    fill_walk(coupling, coupling.root, 0, 0, z, &mut positions);
    WalkBridge1D::from_positions(positions)
}

fn fill_walk(c: &DyadicCoupling, idx: usize, offset: usize, start: i64, end: i64, out: &mut [i64]) {
    match &c.nodes[idx] {
        Node::Split { size, left_size, normal, left, right } => {
            let w = couple_conditioned(*size, end - start, *left_size, normal_cdf(*normal), normal_sf(*normal));
            let split = offset + *left_size as usize;
            out[split] = start + w;
            fill_walk(c, *left, offset, start, start + w, out);
            fill_walk(c, *right, split, start + w, end, out);
        }
        Node::Leaf { size, walk_uniform, .. } => {
            if *size == 2 {
                let step = match end - start {
                    0 if *walk_uniform < 0.5 => -1,
                    0 => 1,
                    d => d / 2,
                };
                out[offset + 1] = start + step;
            }
            out[offset + *size as usize] = end;
        }
    }
}

/// Bridge, walk and discrepancy for one endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSample {
    pub bridge: BridgePath1D,
    pub walk: WalkBridge1D,
    pub delta: f64,
}

/// `sup_t |Y_t − S_t|` over the bridge grid, with `Y_t = √n B_{t/n} + (t/n) z`
/// and `S` linearly interpolated.
pub fn discrepancy(bridge: &BridgePath1D, walk: &WalkBridge1D) -> f64 {
    let n = walk.steps() as f64;
    let root_n = n.sqrt();
    let z = walk.endpoint() as f64;
    bridge
        .times()
        .iter()
        .zip(bridge.values())
        .map(|(&u, &b)| {
            let y = root_n * b + u * z;
            (y - walk.at(u * n)).abs()
        })
        .fold(0.0, f64::max)
}

/// `Δ(n, z)` evaluated on the coupling's grid.
pub fn delta(coupling: &DyadicCoupling, z: i64) -> Result<f64> {
    Ok(sample(coupling, z)?.delta)
}

pub fn sample(coupling: &DyadicCoupling, z: i64) -> Result<CouplingSample> {
    let walk = realize_walk(coupling, z)?;
    let bridge = realize_bridge(coupling);
    let delta = discrepancy(&bridge, &walk);
    Ok(CouplingSample { bridge, walk, delta })
}

/// A closed planar walk of `2n` steps coupled with a planar bridge.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupled2D {
    pub bridge: BridgePath2D,
    pub walk: WalkBridge2D,
    /// Rescaled one-dimensional discrepancies `Δ_j / √(2n)`.
    pub coordinate_discrepancies: [f64; 2],
}

impl Coupled2D {
    /// `sup_s |n^{−1/2} S_{2ns} − B_s|` on the bridge grid.
    pub fn planar_discrepancy(&self) -> f64 {
        let two_n = self.walk.steps() as f64;
        let scale = (two_n / 2.0).sqrt();
        self.bridge
            .times()
            .iter()
            .zip(self.bridge.values())
            .map(|(&u, &b)| (walk_at(&self.walk, u * two_n) / scale - b).norm())
            .fold(0.0, f64::max)
    }
}

fn walk_at(walk: &WalkBridge2D, t: f64) -> Complex64 {
    let pos = walk.positions();
    let last = pos.len() - 1;
    let t = t.clamp(0.0, last as f64);
    let i = (t.floor() as usize).min(last.saturating_sub(1));
    let frac = t - i as f64;
    let a = pos[i];
    let b = pos[(i + 1).min(last)];
    Complex64::new(a.x as f64 + frac * (b.x - a.x) as f64, a.y as f64 + frac * (b.y - a.y) as f64)
}

/// Product coupling of a `2n`-step planar loop walk with a planar bridge.
pub fn couple_2d<R: Rng + ?Sized>(n: u64, refine: u32, rng: &mut R) -> Result<Coupled2D> {
    let first = build_coupling_refined(2 * n, refine, rng)?;
    let second = build_coupling_refined(2 * n, refine, rng)?;
    couple_2d_from(&first, &second)
}

/// Product coupling from two prebuilt couplings of the same even length.
pub fn couple_2d_from(first: &DyadicCoupling, second: &DyadicCoupling) -> Result<Coupled2D> {
    if first.steps != second.steps || first.refine != second.refine || first.steps % 2 != 0 {
        return Err(out_of_range("couplings", "need two couplings of the same even length and grid"));
    }
    let a = sample(first, 0)?;
    let b = sample(second, 0)?;
    let walk = WalkBridge2D::from_pair(&a.walk, &b.walk)?;
    let rot = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
    let values = a.bridge.values().iter().zip(b.bridge.values()).map(|(&x, &y)| Complex64::new(x, y) * rot).collect();
    let bridge = BridgePath2D::new(a.bridge.times().to_vec(), values)?;
    let root = (first.steps as f64).sqrt();
    Ok(Coupled2D { bridge, walk, coordinate_discrepancies: [a.delta / root, b.delta / root] })
}

/// Outcome of a CDF sandwich evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub total: u64,
    pub endpoint: i64,
    pub time: u64,
    /// Smallest `c1` for which both inequalities hold at every checked side.
    pub c1: f64,
    /// The `x` attaining `c1`.
    pub worst_x: i64,
    /// Sides skipped because `G` is already 0 or 1 there, where no Gaussian
    /// bound can hold for finite `c1`.
    pub skipped: usize,
    pub checked: usize,
}

impl SandwichReport {
    pub fn holds_with(&self, c1: f64) -> bool {
        c1 >= self.c1
    }
}

/// Solves `Φ(y) = lower` (or `1 − Φ(y) = upper` in the upper half).
fn normal_quantile(lower: f64, upper: f64) -> f64 {
    let (mut a, mut b) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let below = if lower <= upper { normal_cdf(mid) < lower } else { normal_sf(mid) > upper };
        if below {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Evaluates `F(x − c1 h(x)) ≤ G(x−1)` and `G(x+1) ≤ F(x + c1 h(x))` with
/// `h(x) = 1 + (x − μ)²/n` at integer offsets `x − μ` in `x_range`, where `G`
/// is the law of `S_m` given `S_total = z`, `m = ⌊total/2⌋`, and `F` is the
/// normal CDF with mean `μ = (m/n) z` and variance `(n/4)(1 − (z/n)²)`.
///
/// Integer offsets are taken around the rounded mean.
pub fn cdf_sandwich_check(total: u64, z: i64, x_range: std::ops::RangeInclusive<i64>) -> Result<SandwichReport> {
    check_endpoint(total, z)?;
    if total == (z.unsigned_abs()) {
        return Err(out_of_range("z", "degenerate bridge has no spread"));
    }
    let m = total / 2;
    let pmf = conditioned_midpoint_pmf(total, z, m)?;
    let n = total as f64;
    let mu = m as f64 / n * z as f64;
    let sigma = ((n / 4.0) * (1.0 - (z as f64 / n).powi(2))).sqrt();
    let centre = mu.round() as i64;
    // lower and upper tails of G at each support point, from both ends
    let lower_cum = |x: i64| -> f64 { pmf.support().zip(&pmf.probs).filter(|(w, _)| *w <= x).map(|(_, p)| p).sum() };
    let upper_cum = |x: i64| -> f64 { pmf.support().zip(&pmf.probs).filter(|(w, _)| *w > x).map(|(_, p)| p).sum() };
    let mut report = SandwichReport { total, endpoint: z, time: m, c1: 0.0, worst_x: centre, skipped: 0, checked: 0 };
    for off in x_range {
        let x = centre + off;
        let h = 1.0 + (x as f64 - mu).powi(2) / n;
        // F(x − c h) ≤ G(x − 1): x − c h ≤ F⁻¹(G(x − 1))
        let (gl, gu) = (lower_cum(x - 1), upper_cum(x - 1));
        if gl <= 0.0 {
            report.skipped += 1;
        } else {
            report.checked += 1;
            let q = mu + sigma * normal_quantile(gl, gu);
            let need = (x as f64 - q) / h;
            if need > report.c1 {
                report.c1 = need;
                report.worst_x = x;
            }
        }
        // G(x + 1) ≤ F(x + c h): x + c h ≥ F⁻¹(G(x + 1))
        let (gl, gu) = (lower_cum(x + 1), upper_cum(x + 1));
        if gu <= 0.0 {
            report.skipped += 1;
        } else {
            report.checked += 1;
            let q = mu + sigma * normal_quantile(gl, gu);
            let need = (q - x as f64) / h;
            if need > report.c1 {
                report.c1 = need;
                report.worst_x = x;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::conditioned_midpoint_pmf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rademacher() -> QuantileSpec {
        QuantileSpec::new(NormalLaw::standard(), DiscreteLaw::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap())
    }

    #[test]
    fn median_split() {
        let spec = rademacher();
        assert_eq!(quantile_couple(-0.3, &spec).unwrap(), -1.0);
        assert_eq!(quantile_couple(0.1, &spec).unwrap(), 1.0);
    }

    #[test]
    fn four_step_midpoint() {
        let g = DiscreteLaw::new(vec![-2.0, 0.0, 2.0], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]).unwrap();
        let spec = QuantileSpec::new(NormalLaw::standard(), g);
        assert_eq!(quantile_couple(-1.2, &spec).unwrap(), -2.0);
        assert_eq!(quantile_couple(-0.9, &spec).unwrap(), 0.0);
        assert_eq!(quantile_couple(1.0, &spec).unwrap(), 2.0);
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(DiscreteLaw::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteLaw::new(vec![0.0, 1.0], vec![0.7, 0.5]).is_err());
        assert!(DiscreteLaw::from_cumulative(vec![0.0, 1.0], &[0.6, 0.4]).is_err());
        assert!(NormalLaw::new(0.0, 0.0).is_err());
        assert!(quantile_couple(f64::NAN, &rademacher()).is_err());
    }

    #[test]
    fn normal_params() {
        assert_eq!(midpoint_normal_params(4, 2, 0).unwrap(), (0.0, 1.0));
        assert_eq!(midpoint_normal_params(4, 2, 4).unwrap(), (2.0, 1.0));
        let (m, v) = midpoint_normal_params(5, 2, 1).unwrap();
        assert!((m - 0.4).abs() < 1e-15 && (v - 1.2).abs() < 1e-15);
        assert!(midpoint_normal_params(4, 2, 1).is_err());
        assert!(midpoint_normal_params(6, 1, 0).is_err());
    }

    #[test]
    fn conditioned_scan_matches_pmf() {
        for (total, z, m) in [(16u64, 2i64, 8u64), (9, 3, 4), (40, -10, 20), (3000, 40, 1500)] {
            let pmf = conditioned_midpoint_pmf(total, z, m).unwrap();
            let mut cum = 0.0;
            for (w, p) in pmf.support().zip(&pmf.probs) {
                if *p < 1e-12 {
                    cum += p;
                    continue;
                }
                let u = cum + 0.5 * p;
                assert_eq!(couple_conditioned(total, z, m, u, 1.0 - u), w);
                cum += p;
            }
        }
    }

    #[test]
    fn tree_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = build_coupling(1, &mut rng).unwrap();
        assert_eq!(one.depth(), 0);
        assert_eq!(one.leaf_sizes(), vec![1]);
        let eight = build_coupling(8, &mut rng).unwrap();
        assert_eq!(eight.depth(), 2);
        assert_eq!(eight.leaf_sizes(), vec![2, 2, 2, 2]);
        let six = build_coupling(6, &mut rng).unwrap();
        assert_eq!(six.leaf_sizes(), vec![1, 2, 1, 2]);
        assert!(build_coupling(0, &mut rng).is_err());
    }

    #[test]
    fn zero_randomness_gives_zero_bridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = build_coupling_refined(12, 2, &mut rng).unwrap().with_randomness(0.0, 0.3, 0.0);
        assert_eq!(realize_bridge(&c).sup_norm(), 0.0);
    }

    #[test]
    fn unique_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = build_coupling(2, &mut rng).unwrap();
        assert_eq!(realize_walk(&c, 2).unwrap().positions(), &[0, 1, 2]);
        assert!(realize_walk(&c, 1).is_err());
        assert!(realize_walk(&c, 4).is_err());
    }

    #[test]
    fn bridge_does_not_depend_on_endpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = build_coupling(10, &mut rng).unwrap();
        let a = sample(&c, 0).unwrap();
        let b = sample(&c, 4).unwrap();
        assert_eq!(a.bridge, b.bridge);
        assert_eq!(b.walk.endpoint(), 4);
    }

    #[test]
    fn one_step_delta_vanishes_at_ends() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = build_coupling(1, &mut rng).unwrap();
        let s = sample(&c, -1).unwrap();
        assert_eq!(s.bridge.values()[0], 0.0);
        assert_eq!(*s.bridge.values().last().unwrap(), 0.0);
        assert!(s.delta.is_finite());
        assert!(s.delta < 1e-12);
    }

    #[test]
    fn sandwich_small_case() {
        let r = cdf_sandwich_check(4, 0, -2..=2).unwrap();
        assert!(r.c1 <= 2.0, "{r:?}");
        // x = −1 needs −1 + 1.25 c ≥ Φ⁻¹(5/6)
        assert!((r.c1 - (1.0 + 0.967_421_566_101_701) / 1.25).abs() < 1e-9, "{r:?}");
    }
}
