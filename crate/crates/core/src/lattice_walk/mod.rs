//! Lattice loops and simple random walk bridges.
//!
//! Exact combinatorics (loop measures, conditioned midpoint laws, Stirling
//! checks) live in [`combinatorics`]; this module holds the path types and
//! the exact samplers.

pub mod combinatorics;

pub use combinatorics::{
    conditioned_midpoint_pmf, conditioned_midpoint_pmf_exact, conditioned_midpoint_pmf_with, ln_binomial,
    local_clt_compare, loop_count, loop_count_measure, loop_count_measure_exact, qtilde, qtilde_exact, stirling_approx,
    ConditionedPmf, LocalCltComparison, StirlingComparison, DEFAULT_EXACT_LIMIT,
};

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Sub};

/// A point of Z², viewed as a Gaussian integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> i64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    fn is_unit(self) -> bool {
        self.norm_sq() == 1
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, o: LatticePoint) -> LatticePoint {
        LatticePoint::new(self.x - o.x, self.y - o.y)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A nearest-neighbour move: ±1 or ±i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    East,
    West,
    North,
    South,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::East, Step::West, Step::North, Step::South];

    pub fn delta(self) -> LatticePoint {
        match self {
            Step::East => LatticePoint::new(1, 0),
            Step::West => LatticePoint::new(-1, 0),
            Step::North => LatticePoint::new(0, 1),
            Step::South => LatticePoint::new(0, -1),
        }
    }

    pub fn from_delta(d: LatticePoint) -> Option<Step> {
        Step::ALL.into_iter().find(|s| s.delta() == d)
    }
}

/// A rooted nearest-neighbour loop in Z² of length 2n ≥ 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeLoop {
    root: LatticePoint,
    steps: Vec<Step>,
}

impl LatticeLoop {
    pub fn new(root: LatticePoint, steps: Vec<Step>) -> Result<Self> {
        if steps.len() < 2 || steps.len() % 2 != 0 {
            return Err(Error::InvalidLoop(format!("length must be even and at least 2, got {}", steps.len())));
        }
        let end = steps.iter().fold(LatticePoint::ORIGIN, |p, s| p + s.delta());
        if end != LatticePoint::ORIGIN {
            return Err(Error::InvalidLoop(format!("steps sum to {end}, not zero")));
        }
        Ok(Self { root, steps })
    }

    /// Builds a loop from its positions `ω_0, …, ω_{2n}`.
    pub fn from_positions(positions: &[LatticePoint]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidLoop("no positions".into()));
        }
        let steps = positions
            .windows(2)
            .map(|w| {
                Step::from_delta(w[1] - w[0])
                    .ok_or_else(|| Error::InvalidLoop(format!("non-unit increment {} -> {}", w[0], w[1])))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(positions[0], steps)
    }

    pub fn root(&self) -> LatticePoint {
        self.root
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Number of steps, 2n.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Half the length, n.
    pub fn half_len(&self) -> usize {
        self.steps.len() / 2
    }

    pub fn positions(&self) -> Vec<LatticePoint> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut p = self.root;
        out.push(p);
        for s in &self.steps {
            p = p + s.delta();
            out.push(p);
        }
        out
    }

    pub fn translate(&self, by: LatticePoint) -> LatticeLoop {
        LatticeLoop { root: self.root + by, steps: self.steps.clone() }
    }
}

/// Weight `(2n)^{-1} 4^{-2n}` of a rooted loop under the random walk loop
/// measure.
pub fn rooted_loop_weight(lp: &LatticeLoop) -> f64 {
    let len = lp.len() as i32;
    0.25f64.powi(len) / len as f64
}

/// A one-dimensional simple random walk path started at 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WalkBridge1D {
    positions: Vec<i64>,
}

impl WalkBridge1D {
    pub fn from_positions(positions: Vec<i64>) -> Result<Self> {
        if positions.first() != Some(&0) {
            return Err(Error::InvalidWalk("walk must start at 0".into()));
        }
        if let Some(w) = positions.windows(2).find(|w| (w[1] - w[0]).abs() != 1) {
            return Err(Error::InvalidWalk(format!("non-unit increment {} -> {}", w[0], w[1])));
        }
        Ok(Self { positions })
    }

    /// Builds the path from ±1 increments.
    pub fn from_increments(incs: &[i8]) -> Result<Self> {
        let mut positions = Vec::with_capacity(incs.len() + 1);
        let mut s = 0i64;
        positions.push(0);
        for &d in incs {
            s += d as i64;
            positions.push(s);
        }
        Self::from_positions(positions)
    }

    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn endpoint(&self) -> i64 {
        *self.positions.last().expect("walk has at least one position")
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    /// Linear interpolation `S_t` for real `t ∈ [0, steps]`.
    pub fn at(&self, t: f64) -> f64 {
        let last = self.steps();
        if t <= 0.0 {
            return self.positions[0] as f64;
        }
        if t >= last as f64 {
            return self.positions[last] as f64;
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        let a = self.positions[i] as f64;
        let b = self.positions[i + 1] as f64;
        a + frac * (b - a)
    }
}

/// A two-dimensional simple random walk path started at the origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WalkBridge2D {
    positions: Vec<LatticePoint>,
}

impl WalkBridge2D {
    pub fn from_positions(positions: Vec<LatticePoint>) -> Result<Self> {
        if positions.first() != Some(&LatticePoint::ORIGIN) {
            return Err(Error::InvalidWalk("walk must start at the origin".into()));
        }
        if let Some(w) = positions.windows(2).find(|w| !(w[1] - w[0]).is_unit()) {
            return Err(Error::InvalidWalk(format!("non-unit increment {} -> {}", w[0], w[1])));
        }
        Ok(Self { positions })
    }

    /// Combines two independent 1D walks into one planar walk through
    /// `S = (S¹ + i S²) / (1 + i)`, evaluated on integers as
    /// `(x, y) ↦ ((x + y)/2, (y − x)/2)`.
    pub fn from_pair(first: &WalkBridge1D, second: &WalkBridge1D) -> Result<Self> {
        if first.steps() != second.steps() {
            return Err(Error::InvalidWalk(format!(
                "coordinate walks have different lengths {} and {}",
                first.steps(),
                second.steps()
            )));
        }
        let positions = first
            .positions()
            .iter()
            .zip(second.positions())
            .map(|(&x, &y)| {
                debug_assert_eq!((x + y).rem_euclid(2), 0);
                LatticePoint::new((x + y) / 2, (y - x) / 2)
            })
            .collect();
        Self::from_positions(positions)
    }

    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn positions(&self) -> &[LatticePoint] {
        &self.positions
    }

    pub fn endpoint(&self) -> LatticePoint {
        *self.positions.last().expect("walk has at least one position")
    }

    pub fn is_closed(&self) -> bool {
        self.endpoint() == LatticePoint::ORIGIN
    }

    /// The walk as a rooted loop at `root`; fails unless the walk is closed.
    pub fn to_loop(&self, root: LatticePoint) -> Result<LatticeLoop> {
        let shifted: Vec<LatticePoint> = self.positions.iter().map(|&p| p + root).collect();
        LatticeLoop::from_positions(&shifted)
    }
}

pub(crate) fn check_endpoint(steps: u64, z: i64) -> Result<()> {
    if z.unsigned_abs() > steps || (z.rem_euclid(2) as u64) != steps % 2 {
        return Err(Error::InadmissibleEndpoint { steps, endpoint: z });
    }
    Ok(())
}

/// Uniform sample of a `steps`-step walk conditioned to end at `z`.
///
/// Shuffles the multiset of `(steps + z)/2` up-steps and `(steps − z)/2`
/// down-steps, which is exact in O(steps).
pub fn sample_bridge_1d<R: Rng + ?Sized>(steps: u64, z: i64, rng: &mut R) -> Result<WalkBridge1D> {
    check_endpoint(steps, z)?;
    let ups = ((steps as i64 + z) / 2) as usize;
    let mut incs = vec![-1i8; steps as usize];
    incs[..ups].fill(1);
    incs.shuffle(rng);
    WalkBridge1D::from_increments(&incs)
}

/// Uniform sample from the closed 2n-step loops at the origin.
pub fn sample_bridge_2d<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<WalkBridge2D> {
    if n == 0 {
        return Err(crate::error::out_of_range("n", "must be at least 1"));
    }
    let first = sample_bridge_1d(2 * n, 0, rng)?;
    let second = sample_bridge_1d(2 * n, 0, rng)?;
    WalkBridge2D::from_pair(&first, &second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(i64, i64)]) -> Vec<LatticePoint> {
        v.iter().map(|&(x, y)| LatticePoint::new(x, y)).collect()
    }

    #[test]
    fn loop_validation() {
        assert!(LatticeLoop::new(LatticePoint::ORIGIN, vec![Step::East, Step::West]).is_ok());
        assert!(LatticeLoop::new(LatticePoint::ORIGIN, vec![Step::East, Step::North]).is_err());
        assert!(LatticeLoop::new(LatticePoint::ORIGIN, vec![Step::East]).is_err());
        assert!(LatticeLoop::new(LatticePoint::ORIGIN, vec![]).is_err());
        assert!(LatticeLoop::from_positions(&pts(&[(0, 0), (2, 0), (0, 0)])).is_err());
    }

    #[test]
    fn loop_weights() {
        let two = LatticeLoop::new(LatticePoint::new(3, -1), vec![Step::North, Step::South]).unwrap();
        assert_eq!(rooted_loop_weight(&two), 1.0 / 32.0);
        let four = LatticeLoop::from_positions(&pts(&[(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])).unwrap();
        assert_eq!(rooted_loop_weight(&four), 1.0 / 1024.0);
        let total: f64 = Step::ALL
            .iter()
            .map(|&s| {
                let back = Step::from_delta(LatticePoint::ORIGIN - s.delta()).unwrap();
                rooted_loop_weight(&LatticeLoop::new(LatticePoint::ORIGIN, vec![s, back]).unwrap())
            })
            .sum();
        assert_eq!(total, qtilde(1));
    }

    #[test]
    fn bridge_endpoint_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_bridge_1d(4, 1, &mut rng).is_err());
        assert!(sample_bridge_1d(4, 6, &mut rng).is_err());
        assert!(sample_bridge_1d(3, -3, &mut rng).is_ok());
    }

    #[test]
    fn extreme_endpoint_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = sample_bridge_1d(4, 4, &mut rng).unwrap();
        assert_eq!(w.positions(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_step_bridge_is_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ups = (0..20_000).filter(|_| sample_bridge_1d(2, 0, &mut rng).unwrap().positions()[1] == 1).count();
        assert!((ups as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn pair_transform_hand_case() {
        let a = WalkBridge1D::from_positions(vec![0, 1, 0]).unwrap();
        let w = WalkBridge2D::from_pair(&a, &a).unwrap();
        assert_eq!(w.positions(), &pts(&[(0, 0), (1, 0), (0, 0)])[..]);
        let b = WalkBridge1D::from_positions(vec![0, -1, 0]).unwrap();
        let w = WalkBridge2D::from_pair(&a, &b).unwrap();
        assert_eq!(w.positions(), &pts(&[(0, 0), (0, -1), (0, 0)])[..]);
    }

    #[test]
    fn two_d_samples_have_unit_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..1000u64 {
            let n = 1 + i % 64;
            let w = sample_bridge_2d(n, &mut rng).unwrap();
            assert_eq!(w.steps() as u64, 2 * n);
            assert!(w.is_closed());
            assert!(w.to_loop(LatticePoint::new(5, 5)).is_ok());
        }
    }

    #[test]
    fn interpolation() {
        let w = WalkBridge1D::from_positions(vec![0, 1, 2, 1]).unwrap();
        assert_eq!(w.at(0.5), 0.5);
        assert_eq!(w.at(2.25), 1.75);
        assert_eq!(w.at(3.0), 1.0);
        assert_eq!(w.at(7.0), 1.0);
    }
}
