//! Numerical laboratory for the `(2n+1)`-dimensional Riesz transform on the
//! Heisenberg group ℍⁿ.
//!
//! The crate is organised bottom-up:
//!
//! - [`hgroup`]: group law, dilations, the Korányi gauge and metric;
//! - [`kernel`]: the fundamental solution `G` and the Riesz kernel `K = ∇_ℍ G`;
//! - [`lattice`]: anisotropic dyadic cubes and vertical tubes;
//! - [`measure`]: atomic measures and their generators;
//! - [`riesz`]: truncated Riesz transforms and operator-norm estimation;
//! - [`growth`]: densities, high-density cube selection and the witness iteration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod growth;
pub mod hgroup;
pub mod kernel;
pub mod lattice;
pub mod measure;
pub mod riesz;

pub use error::{Error, Result};
pub use hgroup::{GroupParams, HPoint};
pub use lattice::CubeId;
pub use measure::AtomicMeasure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
