//! Differentially private stochastic convex optimisation by noisy stochastic
//! mirror descent that stops once more than half the data has been touched.
//!
//! Components (feasible sets, potentials, losses, label models) are trait
//! objects selected by name through [`registry`]-backed factories; see
//! [`geometry::set_registry`], [`geometry::potential_registry`],
//! [`losses::loss_registry`] and [`losses::generator_registry`].

pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod optimizer;
pub mod privacy;
pub mod registry;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
