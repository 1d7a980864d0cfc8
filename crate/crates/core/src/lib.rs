//! Coupled random walk and Brownian loop soups.
//!
//! The crate builds the rooted random walk loop soup and the rooted Brownian
//! loop soup on one probability space: both are driven by the same unit-rate
//! Poisson processes, and every walk loop is paired with a Brownian loop
//! through a dyadic (KMT-style) coupling of walk bridges to Brownian bridges.
//!
//! * [`lattice_walk`]: lattice loops, walk bridges and exact combinatorics.
//! * [`brownian`]: Brownian bridges, loop construction and scaling maps.
//! * [`kmt`]: quantile coupling and the recursive dyadic coupling.
//! * [`soup`]: the shared Poisson field, both soups, and the correspondence report.
//! * [`domain`]: restriction to bounded domains and boundary-layer estimates.
//! * [`verify`]: Monte Carlo verification suites.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod brownian;
pub mod domain;
pub mod error;
pub mod kmt;
pub mod lattice_walk;
pub mod rng;
pub mod soup;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

pub use brownian::{BridgePath, BridgePath1D, BridgePath2D, ContinuousLoop};
pub use domain::{Domain, LayerEstimate};
pub use kmt::{CouplingSample, DyadicCoupling, QuantileSpec};
pub use lattice_walk::{LatticeLoop, LatticePoint, WalkBridge1D, WalkBridge2D};
pub use num_complex::Complex64;
pub use soup::{CouplingReport, LoopIndex, PoissonField, SoupKind, SoupRealization, Window};
