//! Brownian bridges, loop construction and the scaling maps.
//!
//! Bridges are represented by their values on a finite time grid. Every
//! sampler here draws the exact finite-dimensional law at its grid points;
//! sup norms are sups over the grid.

use crate::error::{out_of_range, Error, Result};
use crate::lattice_walk::{LatticePoint, WalkBridge2D};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

/// Values a path can take: reals or points of the plane.
pub trait PathValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + PartialEq {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl PathValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl PathValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// A path sampled at increasing times, linearly interpolated in between.
///
/// A *standard* bridge lives on `[0, 1]` and is pinned to zero at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath<T> {
    times: Vec<f64>,
    values: Vec<T>,
}

pub type BridgePath1D = BridgePath<f64>;
pub type BridgePath2D = BridgePath<Complex64>;

impl<T: PathValue> BridgePath<T> {
    pub fn new(times: Vec<f64>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidWalk(format!(
                "path needs matching times/values with at least two samples, got {}/{}",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWalk("sample times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    /// The zero bridge on a uniform grid with `intervals` pieces.
    pub fn zero(intervals: usize) -> Self {
        let times = uniform_grid(intervals);
        let values = vec![T::zero(); times.len()];
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation, clamped to the end values outside the grid.
    pub fn at(&self, t: f64) -> T {
        if t <= self.times[0] {
            return self.values[0];
        }
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return self.values[last];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] + (self.values[i + 1] - self.values[i]) * w
    }

    /// Grid sup of `|B_t|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.magnitude()).fold(0.0, f64::max)
    }

    pub fn map<U: PathValue>(&self, f: impl Fn(T) -> U) -> BridgePath<U> {
        BridgePath { times: self.times.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

impl BridgePath<f64> {
    /// Pairs two real paths on the same grid into a planar path `x + i y`.
    pub fn zip_complex(x: &BridgePath<f64>, y: &BridgePath<f64>) -> Result<BridgePath<Complex64>> {
        if x.times != y.times {
            return Err(Error::InvalidWalk("coordinate paths use different grids".into()));
        }
        let values = x.values.iter().zip(&y.values).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Ok(BridgePath { times: x.times.clone(), values })
    }
}

pub(crate) fn uniform_grid(intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| i as f64 / intervals as f64).collect()
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard 1D bridge on the dyadic grid of resolution `2^{-depth}`, built by
/// midpoint refinement.
pub fn sample_bridge<R: Rng + ?Sized>(depth: u32, rng: &mut R) -> BridgePath1D {
    let mut values = vec![0.0, 0.0];
    for level in 0..depth {
        let half_width = 0.5f64.powi(level as i32 + 1);
        let sd = (half_width / 2.0).sqrt();
        let mut next = Vec::with_capacity(2 * values.len() - 1);
        for w in values.windows(2) {
            next.push(w[0]);
            next.push(0.5 * (w[0] + w[1]) + sd * normal(rng));
        }
        next.push(*values.last().unwrap());
        values = next;
    }
    BridgePath { times: uniform_grid(values.len() - 1), values }
}

/// Standard planar bridge: independent 1D bridges per coordinate.
pub fn sample_bridge_2d<R: Rng + ?Sized>(depth: u32, rng: &mut R) -> BridgePath2D {
    let x = sample_bridge(depth, rng);
    let y = sample_bridge(depth, rng);
    BridgePath::zip_complex(&x, &y).expect("same dyadic grid")
}

/// Standard 1D bridge on an arbitrary grid `0 = t_0 < … < t_k = 1`, sampled
/// forward from the exact conditional laws.
pub fn sample_bridge_on_grid<R: Rng + ?Sized>(times: &[f64], rng: &mut R) -> Result<BridgePath1D> {
    if times.first() != Some(&0.0) || times.last() != Some(&1.0) {
        return Err(out_of_range("times", "grid must start at 0 and end at 1"));
    }
    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    let mut b = 0.0;
    for w in times.windows(2) {
        let (t, u) = (w[0], w[1]);
        if u >= 1.0 {
            values.push(0.0);
            continue;
        }
        let mean = b * (1.0 - u) / (1.0 - t);
        let var = (u - t) * (1.0 - u) / (1.0 - t);
        b = mean + var.sqrt() * normal(rng);
        values.push(b);
    }
    BridgePath::new(times.to_vec(), values)
}

/// Joins two standard bridges at time `s` through a normal draw:
/// `X_s = √(s(1−s)) N`, `X_t = √s B1_{t/s} + (t/s) X_s` on `[0, s]`,
/// `X_t = √(1−s) B2_{(t−s)/(1−s)} + ((1−t)/(1−s)) X_s` on `[s, 1]`.
pub fn surgery_compose<T: PathValue>(
    first: &BridgePath<T>,
    second: &BridgePath<T>,
    normal: T,
    s: f64,
) -> Result<BridgePath<T>> {
    if !(s > 0.0 && s < 1.0) {
        return Err(out_of_range("s", format!("{s} is not in (0, 1)")));
    }
    let mid = normal * (s * (1.0 - s)).sqrt();
    let mut times = Vec::with_capacity(first.len() + second.len() - 1);
    let mut values = Vec::with_capacity(times.capacity());
    for (&u, &b) in first.times.iter().zip(&first.values) {
        times.push(u * s);
        values.push(b * s.sqrt() + mid * u);
    }
    // the join point is shared by both halves
    for (&u, &b) in second.times.iter().zip(&second.values).skip(1) {
        times.push(s + u * (1.0 - s));
        values.push(b * (1.0 - s).sqrt() + mid * (1.0 - u));
    }
    BridgePath::new(times, values)
}

/// `Y_t = √n B_{t/n} + ((n−t)/n) z1 + (t/n) z2` on `[0, n]`.
pub fn bridge_with_endpoints<T: PathValue>(b: &BridgePath<T>, n: f64, z1: T, z2: T) -> Result<BridgePath<T>> {
    if !(n > 0.0) {
        return Err(out_of_range("n", "duration must be positive"));
    }
    let root_n = n.sqrt();
    let times = b.times.iter().map(|&u| u * n).collect();
    let values = b.times.iter().zip(&b.values).map(|(&u, &v)| v * root_n + z1 * (1.0 - u) + z2 * u).collect();
    Ok(BridgePath { times, values })
}

/// A rooted loop `γ: [0, t_γ] → C`, piecewise linear between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLoop {
    root: Complex64,
    duration: f64,
    times: Vec<f64>,
    points: Vec<Complex64>,
}

impl ContinuousLoop {
    pub fn new(times: Vec<f64>, points: Vec<Complex64>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::InvalidLoop("loop needs at least two samples".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLoop("sample times must increase strictly from 0".into()));
        }
        let root = points[0];
        let last = *points.last().unwrap();
        if (last - root).norm() > 1e-9 * (1.0 + root.norm()) {
            return Err(Error::InvalidLoop(format!("loop is not closed: {root} vs {last}")));
        }
        let duration = *times.last().unwrap();
        Ok(Self { root, duration, times, points })
    }

    pub fn root(&self) -> Complex64 {
        self.root
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `γ(t)` by linear interpolation, `t ∈ [0, t_γ]`.
    pub fn at(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return self.points[0];
        }
        let last = self.times.len() - 1;
        if t >= self.duration {
            return self.points[last];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.points[i] + (self.points[i + 1] - self.points[i]) * w
    }

    /// `γ(s t_γ)` for `s ∈ [0, 1]`.
    pub fn at_fraction(&self, s: f64) -> Complex64 {
        self.at(s * self.duration)
    }

    /// Time scaled by `time_factor`, space by `space_factor` (about 0).
    pub fn scaled(&self, time_factor: f64, space_factor: f64) -> ContinuousLoop {
        ContinuousLoop {
            root: self.root * space_factor,
            duration: self.duration * time_factor,
            times: self.times.iter().map(|t| t * time_factor).collect(),
            points: self.points.iter().map(|p| p * space_factor).collect(),
        }
    }

    pub fn translated(&self, by: Complex64) -> ContinuousLoop {
        ContinuousLoop {
            root: self.root + by,
            duration: self.duration,
            times: self.times.clone(),
            points: self.points.iter().map(|p| p + by).collect(),
        }
    }

    /// Linear interpolation of a lattice walk, rooted at `root`, duration 2n.
    pub fn from_walk(walk: &WalkBridge2D, root: LatticePoint) -> Result<ContinuousLoop> {
        let times = (0..=walk.steps()).map(|i| i as f64).collect();
        let points =
            walk.positions().iter().map(|p| Complex64::new((p.x + root.x) as f64, (p.y + root.y) as f64)).collect();
        ContinuousLoop::new(times, points)
    }
}

/// `γ̃(s) = w + √T B(s/T)`: a standard planar bridge scaled to duration `T`
/// and rooted at `w`.
pub fn loop_from_bridge(b: &BridgePath2D, duration: f64, root: Complex64) -> Result<ContinuousLoop> {
    if !(duration > 0.0) {
        return Err(out_of_range("duration", "must be positive"));
    }
    let scale = duration.sqrt();
    let times = b.times().iter().map(|&u| u * duration).collect();
    let points = b.values().iter().map(|&v| root + v * scale).collect();
    ContinuousLoop::new(times, points)
}

/// `Φ_N`: space by `1/N`, time by `1/N²`.
pub fn scale_brownian(lp: &ContinuousLoop, scale: u32) -> ContinuousLoop {
    let n = scale as f64;
    lp.scaled(1.0 / (n * n), 1.0 / n)
}

/// `Φ̃_N`: space by `1/N`, time by `1/(2N²)`.
pub fn scale_walk(lp: &ContinuousLoop, scale: u32) -> ContinuousLoop {
    let n = scale as f64;
    lp.scaled(1.0 / (2.0 * n * n), 1.0 / n)
}

/// `sup_{s ∈ [0,1]} |γ(s t_γ) − γ̃(s t_γ̃)|` over a uniform grid of `grid`
/// intervals (default: four times the larger sample count).
pub fn sup_distance_rescaled(a: &ContinuousLoop, b: &ContinuousLoop, grid: Option<usize>) -> f64 {
    let k = grid.unwrap_or(4 * a.len().max(b.len())).max(1);
    (0..=k)
        .map(|i| {
            let s = i as f64 / k as f64;
            (a.at_fraction(s) - b.at_fraction(s)).norm()
        })
        .fold(0.0, f64::max)
}

/// `q_n = ∫_{n−3/8}^{n+5/8} ds / (2π s²) = 1 / (2π (n + 5/8)(n − 3/8))`.
pub fn q_n(n: u64) -> f64 {
    let nf = n as f64;
    1.0 / (2.0 * PI * (nf + 0.625) * (nf - 0.375))
}

/// `Σ_{k ≥ n} q_k = 1 / (2π (n − 3/8))`, by telescoping.
pub fn q_tail(n: u64) -> f64 {
    1.0 / (2.0 * PI * (n as f64 - 0.375))
}

/// Inverse CDF of the density `(n+5/8)(n−3/8)/s²` on `[n−3/8, n+5/8]`.
pub fn duration_from_uniform(n: u64, u: f64) -> f64 {
    let (hi, lo) = (n as f64 + 0.625, n as f64 - 0.375);
    hi * lo / (hi - u)
}

/// CDF of the duration law, `(n+5/8)(n−3/8)(1/(n−3/8) − 1/s)`.
pub fn duration_cdf(n: u64, s: f64) -> f64 {
    let (hi, lo) = (n as f64 + 0.625, n as f64 - 0.375);
    if s <= lo {
        0.0
    } else if s >= hi {
        1.0
    } else {
        hi * lo * (1.0 / lo - 1.0 / s)
    }
}

pub fn sample_duration<R: Rng + ?Sized>(n: u64, rng: &mut R) -> f64 {
    duration_from_uniform(n, rng.random::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::covariance_stderr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn depth_zero_is_pinned() {
        let b = sample_bridge(0, &mut rng(0));
        assert_eq!(b.times(), &[0.0, 1.0]);
        assert_eq!(b.values(), &[0.0, 0.0]);
    }

    #[test]
    fn dyadic_bridge_covariances() {
        let mut r = rng(1);
        let samples: Vec<BridgePath1D> = (0..100_000).map(|_| sample_bridge(4, &mut r)).collect();
        let at = |i: usize| samples.iter().map(|b| b.values()[i]).collect::<Vec<_>>();
        let (var, _) = covariance_stderr(&at(8), &at(8));
        assert!((var - 0.25).abs() < 0.01);
        let (cov, _) = covariance_stderr(&at(4), &at(12));
        assert!((cov - 1.0 / 16.0).abs() < 0.01);
    }

    #[test]
    fn forward_sampler_matches_covariance() {
        let grid = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let mut r = rng(2);
        let samples: Vec<_> = (0..60_000).map(|_| sample_bridge_on_grid(&grid, &mut r).unwrap()).collect();
        let at = |i: usize| samples.iter().map(|b| b.values()[i]).collect::<Vec<_>>();
        for (i, j) in [(1, 4), (2, 3), (3, 3)] {
            let (cov, se) = covariance_stderr(&at(i), &at(j));
            let target = grid[i] * (1.0 - grid[j]);
            assert!((cov - target).abs() < 4.0 * se, "({i},{j}) {cov} vs {target}");
        }
        assert!(sample_bridge_on_grid(&[0.0, 0.5], &mut r).is_err());
    }

    #[test]
    fn surgery_of_zero_paths() {
        let z = BridgePath1D::zero(2);
        let x = surgery_compose(&z, &z, 0.0, 0.5).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
        let x = surgery_compose(&z, &z, 2.0, 0.5).unwrap();
        assert_eq!(x.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(x.values(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!(surgery_compose(&z, &z, 0.0, 1.0).is_err());
        assert!(surgery_compose(&z, &z, 0.0, 0.0).is_err());
    }

    #[test]
    fn surgery_preserves_bridge_law() {
        let mut r = rng(3);
        let xs: Vec<_> = (0..100_000)
            .map(|_| {
                let a = sample_bridge(2, &mut r);
                let b = sample_bridge(2, &mut r);
                let n = normal(&mut r);
                surgery_compose(&a, &b, n, 0.5).unwrap()
            })
            .collect();
        // grid is 0, 1/8, …, 1
        let at = |i: usize| xs.iter().map(|b| b.values()[i]).collect::<Vec<_>>();
        let (cov, _) = covariance_stderr(&at(2), &at(6));
        assert!((cov - 1.0 / 16.0).abs() < 0.01);
    }

    #[test]
    fn endpoints_map() {
        let z = BridgePath1D::zero(4);
        let y = bridge_with_endpoints(&z, 4.0, 0.0, 2.0).unwrap();
        for (&t, &v) in y.times().iter().zip(y.values()) {
            assert!((v - t / 2.0).abs() < 1e-15);
        }
        let b = sample_bridge(3, &mut rng(4));
        assert_eq!(bridge_with_endpoints(&b, 1.0, 0.0, 0.0).unwrap(), b);
        assert!(bridge_with_endpoints(&b, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn endpoint_bridge_variance_scales() {
        let mut r = rng(5);
        let mids: Vec<f64> = (0..100_000)
            .map(|_| {
                let b = sample_bridge(1, &mut r);
                bridge_with_endpoints(&b, 6.0, 0.0, 0.0).unwrap().values()[1]
            })
            .collect();
        let (var, _) = covariance_stderr(&mids, &mids);
        assert!((var / 1.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn loop_from_bridge_scaling() {
        let b = sample_bridge_2d(3, &mut rng(6));
        let id = loop_from_bridge(&b, 1.0, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(id.points(), b.values());
        let four = loop_from_bridge(&b, 4.0, Complex64::new(0.0, 0.0)).unwrap();
        for (p, q) in four.points().iter().zip(b.values()) {
            assert!((p - q * 2.0).norm() < 1e-15);
        }
        assert_eq!(four.duration(), 4.0);
        let w = Complex64::new(1.5, -2.0);
        let lp = loop_from_bridge(&b, 2.5, w).unwrap();
        assert_eq!(lp.at(0.0), w);
        assert_eq!(lp.at(2.5), w);
        assert!(loop_from_bridge(&b, 0.0, w).is_err());
    }

    #[test]
    fn scaling_maps() {
        let b = sample_bridge_2d(3, &mut rng(7));
        let lp = loop_from_bridge(&b, 4.0, Complex64::new(1.0, 1.0)).unwrap();
        assert_eq!(scale_brownian(&lp, 1), lp);
        let half = scale_brownian(&lp, 2);
        assert_eq!(half.duration(), 1.0);
        assert_eq!(half.points()[3], lp.points()[3] / 2.0);
        let a = scale_brownian(&scale_brownian(&lp, 2), 3);
        let c = scale_brownian(&lp, 6);
        assert!((a.duration() - c.duration()).abs() < 1e-15);
        assert!(sup_distance_rescaled(&a, &c, None) < 1e-15);

        let two =
            WalkBridge2D::from_positions(vec![LatticePoint::ORIGIN, LatticePoint::new(1, 0), LatticePoint::ORIGIN])
                .unwrap();
        let wl = ContinuousLoop::from_walk(&two, LatticePoint::ORIGIN).unwrap();
        assert_eq!(scale_walk(&wl, 1).duration(), 1.0);
        let eight: Vec<LatticePoint> = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (3, 0), (2, 0), (1, 0), (0, 0)]
            .iter()
            .map(|&(x, y)| LatticePoint::new(x, y))
            .collect();
        let wl =
            ContinuousLoop::from_walk(&WalkBridge2D::from_positions(eight).unwrap(), LatticePoint::ORIGIN).unwrap();
        let s = scale_walk(&wl, 2);
        assert_eq!(s.duration(), 1.0);
        assert_eq!(s.points()[1].re, 0.5);
    }

    #[test]
    fn sup_distance_cases() {
        let circle = |dur: f64, shift: f64| {
            let k = 64;
            let times: Vec<f64> = (0..=k).map(|i| dur * i as f64 / k as f64).collect();
            let points = (0..=k)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / k as f64;
                    Complex64::new(a.cos() + shift, a.sin())
                })
                .collect();
            ContinuousLoop::new(times, points).unwrap()
        };
        let c = circle(1.0, 0.0);
        assert_eq!(sup_distance_rescaled(&c, &c, None), 0.0);
        assert!((sup_distance_rescaled(&c, &circle(1.0, 0.3), None) - 0.3).abs() < 1e-12);
        assert!(sup_distance_rescaled(&c, &circle(2.0, 0.0), None) < 1e-12);
    }

    #[test]
    fn q_n_values() {
        assert!((q_n(1) - 0.156_706_405_505_866).abs() < 1e-12);
        let partial: f64 = (1..=200_000).map(q_n).sum();
        assert!((partial + q_tail(200_001) - 4.0 / (5.0 * PI)).abs() < 1e-12);
        assert!((q_tail(1) - 4.0 / (5.0 * PI)).abs() < 1e-15);
        for n in 5..=50u64 {
            let d = (q_n(n) - crate::lattice_walk::qtilde(n)).abs() * (n as f64).powi(4);
            assert!(d < 0.05, "n = {n}: {d}");
        }
    }

    #[test]
    fn duration_inverse_cdf() {
        assert_eq!(duration_from_uniform(3, 0.0), 2.625);
        assert_eq!(duration_from_uniform(3, 1.0), 3.625);
        assert!((duration_from_uniform(1, 0.5) - 1.015_625 / 1.125).abs() < 1e-15);
        for u in [0.1, 0.37, 0.8] {
            assert!((duration_cdf(4, duration_from_uniform(4, u)) - u).abs() < 1e-14);
        }
    }
}
