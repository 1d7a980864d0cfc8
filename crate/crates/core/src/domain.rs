//! Bounded domains: soup restriction, boundary-layer mass of Brownian loops,
//! and two Brownian oracles (Beurling avoidance, gambler's ruin).

use crate::brownian::ContinuousLoop;
use crate::error::{out_of_range, Result};
use crate::rng::{keyed_rng, StreamRng, StreamTag};
use crate::soup::SoupRealization;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// A simply connected domain containing the origin and contained in the
/// closed unit disk. Domains are open sets.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Disk {
        center: Complex64,
        radius: f64,
    },
    Polygon {
        vertices: Vec<Complex64>,
    },
    /// The disk `|z| < radius` with the segment `[slit_start, radius]` removed.
    SlitDisk {
        radius: f64,
        slit_start: f64,
    },
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64, o: f64| o == 0.0 && point_segment_distance(r, p, q) == 0.0;
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

fn segment_distance(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain::Disk { center: Complex64::new(0.0, 0.0), radius: 1.0 }
    }

    pub fn disk(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.norm() >= radius || center.norm() + radius > 1.0 + 1e-12 {
            return Err(out_of_range("disk", "must contain the origin and lie in the unit disk"));
        }
        Ok(Domain::Disk { center, radius })
    }

    /// A simple polygon given by its vertices in order.
    pub fn polygon(vertices: Vec<Complex64>) -> Result<Self> {
        let k = vertices.len();
        if k < 3 {
            return Err(out_of_range("polygon", "needs at least three vertices"));
        }
        if vertices.iter().any(|v| v.norm() > 1.0 + 1e-12) {
            return Err(out_of_range("polygon", "vertices must lie in the closed unit disk"));
        }
        for i in 0..k {
            for j in i + 1..k {
                let adjacent = j == i + 1 || (i == 0 && j == k - 1);
                if !adjacent
                    && segments_intersect(vertices[i], vertices[(i + 1) % k], vertices[j], vertices[(j + 1) % k])
                {
                    return Err(out_of_range("polygon", "edges cross"));
                }
            }
        }
        let d = Domain::Polygon { vertices };
        if !d.contains(Complex64::new(0.0, 0.0)) {
            return Err(out_of_range("polygon", "must contain the origin"));
        }
        Ok(d)
    }

    pub fn slit_disk(radius: f64, slit_start: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0 && slit_start > 0.0 && slit_start < radius) {
            return Err(out_of_range("slit", "need 0 < slit_start < radius ≤ 1"));
        }
        Ok(Domain::SlitDisk { radius, slit_start })
    }

    fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let vs: &[Complex64] = match self {
            Domain::Polygon { vertices } => vertices,
            _ => &[],
        };
        (0..vs.len()).map(move |i| (vs[i], vs[(i + 1) % vs.len()]))
    }

    fn slit(radius: f64, slit_start: f64) -> (Complex64, Complex64) {
        (Complex64::new(slit_start, 0.0), Complex64::new(radius, 0.0))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Domain::Disk { center, radius } => (z - center).norm() < *radius,
            Domain::SlitDisk { radius, slit_start } => z.norm() < *radius && !(z.im == 0.0 && z.re >= *slit_start),
            Domain::Polygon { .. } => {
                let mut inside = false;
                for (a, b) in self.edges() {
                    if point_segment_distance(z, a, b) == 0.0 {
                        return false;
                    }
                    if (a.im > z.im) != (b.im > z.im) {
                        let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                        if z.re < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// `dist(z, ∂D)` for `z` in `D`.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match self {
            Domain::Disk { center, radius } => (radius - (z - center).norm()).max(0.0),
            Domain::SlitDisk { radius, slit_start } => {
                let (a, b) = Self::slit(*radius, *slit_start);
                (radius - z.norm()).max(0.0).min(point_segment_distance(z, a, b))
            }
            Domain::Polygon { .. } => {
                self.edges().map(|(a, b)| point_segment_distance(z, a, b)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Whether the closed segment `[a, b]` lies in `D`.
    pub fn segment_inside(&self, a: Complex64, b: Complex64) -> bool {
        if !(self.contains(a) && self.contains(b)) {
            return false;
        }
        match self {
            Domain::Disk { .. } => true,
            Domain::SlitDisk { radius, slit_start } => {
                let (c, d) = Self::slit(*radius, *slit_start);
                !segments_intersect(a, b, c, d)
            }
            Domain::Polygon { .. } => !self.edges().any(|(c, d)| segments_intersect(a, b, c, d)),
        }
    }

    /// Distance from a segment lying in `D` to `∂D`.
    pub fn segment_boundary_distance(&self, a: Complex64, b: Complex64) -> f64 {
        match self {
            // distance to the circle is concave along the segment
            Domain::Disk { .. } => self.boundary_distance(a).min(self.boundary_distance(b)),
            Domain::SlitDisk { radius, slit_start } => {
                let (c, d) = Self::slit(*radius, *slit_start);
                (radius - a.norm()).min(radius - b.norm()).max(0.0).min(segment_distance(a, b, c, d))
            }
            Domain::Polygon { .. } => {
                self.edges().map(|(c, d)| segment_distance(a, b, c, d)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } | Domain::SlitDisk { radius, .. } => PI * radius * radius,
            Domain::Polygon { .. } => 0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>().abs(),
        }
    }

    fn bounding_box(&self) -> (Complex64, Complex64) {
        match self {
            Domain::Disk { center, radius } => {
                (center - Complex64::new(*radius, *radius), center + Complex64::new(*radius, *radius))
            }
            Domain::SlitDisk { radius, .. } => (Complex64::new(-radius, -radius), Complex64::new(*radius, *radius)),
            Domain::Polygon { vertices } => {
                let lo = vertices.iter().fold(Complex64::new(f64::INFINITY, f64::INFINITY), |m, v| {
                    Complex64::new(m.re.min(v.re), m.im.min(v.im))
                });
                let hi = vertices.iter().fold(Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, v| {
                    Complex64::new(m.re.max(v.re), m.im.max(v.im))
                });
                (lo, hi)
            }
        }
    }

    /// A uniform point of `D` by rejection from the bounding box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let (lo, hi) = self.bounding_box();
        loop {
            let z = Complex64::new(rng.random_range(lo.re..hi.re), rng.random_range(lo.im..hi.im));
            if self.contains(z) {
                return z;
            }
        }
    }

    /// Whether every sample point and every segment of the loop lies in `D`.
    pub fn contains_loop(&self, lp: &ContinuousLoop) -> bool {
        lp.points().windows(2).all(|w| self.segment_inside(w[0], w[1]))
    }
}

/// Keeps the loops lying in `D`.
pub fn restrict_soup(realization: &SoupRealization, domain: &Domain) -> SoupRealization {
    SoupRealization {
        loops: realization.loops.iter().filter(|l| domain.contains_loop(&l.path)).cloned().collect(),
        ..realization.clone()
    }
}

/// Which proposition's envelope a layer estimate is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// `ε t₀^{−3/2}`, for the disk.
    Disk,
    /// `ε^{1/2} t₀^{−5/4}`, for general domains.
    General,
}

impl Envelope {
    pub fn for_domain(domain: &Domain) -> Self {
        match domain {
            Domain::Disk { .. } => Envelope::Disk,
            _ => Envelope::General,
        }
    }

    pub fn shape(self, eps: f64, t0: f64) -> f64 {
        match self {
            Envelope::Disk => eps * t0.powf(-1.5),
            Envelope::General => eps.sqrt() * t0.powf(-1.25),
        }
    }
}

/// Monte Carlo estimate of the loop mass that stays in `D` but comes within
/// `ε` of the boundary, among loops of duration in `[t₀, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerEstimate {
    pub eps: f64,
    pub t0: f64,
    pub t_max: f64,
    pub samples: u64,
    pub hits: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub envelope: Envelope,
    /// `ε t₀^{−3/2}` or `ε^{1/2} t₀^{−5/4}`.
    pub shape: f64,
    /// Mass per unit area neglected by stopping at `t_max`, `(1/2π)/t_max`.
    pub truncated_mass: f64,
    pub depth: u32,
}

/// Simulation settings for [`boundary_layer_measure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    pub samples: u64,
    /// Each loop is sampled at `2^depth` intervals.
    pub depth: u32,
    pub seed: u64,
}

const BATCH: u64 = 1024;

/// Runs `samples` draws in fixed batches with one keyed stream per batch, so
/// the result does not depend on the thread count.
fn batched_count<F>(seed: u64, label: i64, samples: u64, draw: F) -> u64
where
    F: Fn(&mut StreamRng) -> bool + Sync,
{
    let batches = samples.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = keyed_rng(seed, StreamTag::Batch, &[label, b as i64]);
            let len = BATCH.min(samples - b * BATCH);
            (0..len).filter(|_| draw(&mut rng)).count() as u64
        })
        .sum()
}

pub fn boundary_layer_measure(
    domain: &Domain,
    eps: f64,
    t0: f64,
    t_max: f64,
    cfg: &LayerConfig,
) -> Result<LayerEstimate> {
    if !(eps >= 0.0) {
        return Err(out_of_range("eps", "must be nonnegative"));
    }
    if !(t0 > 0.0 && t_max > t0) {
        return Err(out_of_range("t0", "need 0 < t0 < t_max"));
    }
    let envelope = Envelope::for_domain(domain);
    let limit = match envelope {
        Envelope::Disk => t0.powf(1.5),
        Envelope::General => t0.powf(1.25),
    };
    if eps > limit {
        return Err(out_of_range("eps", format!("{eps} exceeds {limit}")));
    }
    if cfg.samples == 0 || cfg.depth == 0 || cfg.depth > 20 {
        return Err(out_of_range("samples", "need samples ≥ 1 and 1 ≤ depth ≤ 20"));
    }
    let label = (eps.to_bits() ^ t0.to_bits().rotate_left(17) ^ t_max.to_bits().rotate_left(34)) as i64;
    let steps = 1usize << cfg.depth;
    let hits = batched_count(cfg.seed, label, cfg.samples, |rng| {
        let root = domain.sample_uniform(rng);
        let u: f64 = rng.random();
        let t = 1.0 / (1.0 / t0 - u * (1.0 / t0 - 1.0 / t_max));
        layer_indicator(domain, root, t, steps, eps, rng)
    });
    let mass = domain.area() / (2.0 * PI) * (1.0 / t0 - 1.0 / t_max);
    let p = hits as f64 / cfg.samples as f64;
    Ok(LayerEstimate {
        eps,
        t0,
        t_max,
        samples: cfg.samples,
        hits,
        estimate: p * mass,
        stderr: (p * (1.0 - p) / cfg.samples as f64).sqrt() * mass,
        envelope,
        shape: envelope.shape(eps, t0),
        truncated_mass: 1.0 / (2.0 * PI * t_max),
        depth: cfg.depth,
    })
}

// Forward-samples a planar bridge of duration `t` rooted at `root`, leaving
// as soon as it leaves `D`.
fn layer_indicator<R: Rng + ?Sized>(
    domain: &Domain,
    root: Complex64,
    t: f64,
    steps: usize,
    eps: f64,
    rng: &mut R,
) -> bool {
    let dt = t / steps as f64;
    let mut prev = root;
    let mut closest = domain.boundary_distance(root);
    let mut offset = Complex64::new(0.0, 0.0);
    for i in 0..steps {
        let remaining = t - i as f64 * dt;
        let next_offset = if i + 1 == steps {
            Complex64::new(0.0, 0.0)
        } else {
            let mean = offset * (1.0 - dt / remaining);
            let sd = (dt * (remaining - dt) / remaining).sqrt();
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            mean + Complex64::new(nx, ny) * sd
        };
        let next = root + next_offset;
        if !domain.segment_inside(prev, next) {
            return false;
        }
        closest = closest.min(domain.segment_boundary_distance(prev, next));
        prev = next;
        offset = next_offset;
    }
    closest <= eps
}

/// Least-squares constant in log space: the geometric mean of
/// `estimate / shape` over estimates with at least one hit.
pub fn fit_envelope(estimates: &[LayerEstimate]) -> Option<f64> {
    let logs: Vec<f64> = estimates.iter().filter(|e| e.hits > 0).map(|e| (e.estimate / e.shape).ln()).collect();
    if logs.is_empty() {
        return None;
    }
    Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// A Monte Carlo probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl ProbabilityEstimate {
    fn from_count(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Self { estimate: p, stderr: (p * (1.0 - p) / samples as f64).sqrt(), samples }
    }
}

/// Simulation settings for [`beurling_mc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeurlingConfig {
    pub samples: u64,
    pub seed: u64,
    /// Step size is `(kappa · dist)²` where `dist` is the distance to the ray.
    pub kappa: f64,
    /// Paths closer than `absorb · r` to the ray count as hits.
    pub absorb: f64,
}

impl Default for BeurlingConfig {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, kappa: 0.25, absorb: 1e-4 }
    }
}

fn ray_distance(z: Complex64, r: f64) -> f64 {
    if z.re >= r {
        z.im.abs()
    } else {
        (z - r).norm()
    }
}

fn crosses_ray(a: Complex64, b: Complex64, r: f64) -> bool {
    if (a.im > 0.0) == (b.im > 0.0) && a.im != 0.0 && b.im != 0.0 {
        return false;
    }
    let x = if a.im == b.im { a.re.max(b.re) } else { a.re + (b.re - a.re) * a.im / (a.im - b.im) };
    x >= r
}

/// Probability that planar Brownian motion from `z` avoids the ray
/// `[r, ∞)` up to time `t`. With `ray = None` there is no obstacle.
pub fn beurling_mc(z: Complex64, ray: Option<f64>, t: f64, cfg: &BeurlingConfig) -> Result<ProbabilityEstimate> {
    if !(t > 0.0) || cfg.samples == 0 {
        return Err(out_of_range("t", "need t > 0 and at least one sample"));
    }
    let Some(r) = ray else {
        return Ok(ProbabilityEstimate { estimate: 1.0, stderr: 0.0, samples: cfg.samples });
    };
    if !(r > 0.0) || z.norm() > r {
        return Err(out_of_range("z", "need r > 0 and |z| ≤ r"));
    }
    if ray_distance(z, r) == 0.0 {
        return Ok(ProbabilityEstimate { estimate: 0.0, stderr: 0.0, samples: cfg.samples });
    }
    let label =
        (z.re.to_bits() ^ z.im.to_bits().rotate_left(13) ^ r.to_bits().rotate_left(29) ^ t.to_bits().rotate_left(41))
            as i64;
    let delta = cfg.absorb * r;
    let avoided = batched_count(cfg.seed, label, cfg.samples, |rng| {
        let mut pos = z;
        let mut time = 0.0;
        while time < t {
            let d = ray_distance(pos, r);
            if d < delta {
                return false;
            }
            let dt = (cfg.kappa * d).powi(2).min(t - time);
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let next = pos + Complex64::new(nx, ny) * dt.sqrt();
            if crosses_ray(pos, next, r) {
                return false;
            }
            pos = next;
            time += dt;
        }
        true
    });
    Ok(ProbabilityEstimate::from_count(avoided, cfg.samples))
}

/// Monte Carlo and closed form of `P{ε + B stays positive on [0, t]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GamblerCheck {
    pub eps: f64,
    pub t: f64,
    pub estimate: ProbabilityEstimate,
    /// `erf(ε / √(2t))`.
    pub exact: f64,
}

/// Samples the endpoint, then the minimum of the Brownian bridge between
/// the endpoints from its exact law.
pub fn gambler_ruin_check(eps: f64, t: f64, samples: u64, seed: u64) -> Result<GamblerCheck> {
    if !(eps > 0.0 && t > 0.0) || samples == 0 {
        return Err(out_of_range("eps", "need ε > 0, t > 0 and at least one sample"));
    }
    let label = (eps.to_bits() ^ t.to_bits().rotate_left(23)) as i64;
    let survived = batched_count(seed, label, samples, |rng| {
        let n: f64 = rng.sample(StandardNormal);
        let end = eps + t.sqrt() * n;
        let u: f64 = 1.0 - rng.random::<f64>();
        let min = 0.5 * (eps + end - ((end - eps).powi(2) - 2.0 * t * u.ln()).sqrt());
        min > 0.0
    });
    Ok(GamblerCheck {
        eps,
        t,
        estimate: ProbabilityEstimate::from_count(survived, samples),
        exact: libm::erf(eps / (2.0 * t).sqrt()),
    })
}
