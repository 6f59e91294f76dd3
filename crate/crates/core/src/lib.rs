//! Geodesic random walks on Riemannian manifolds, their horizontal lifts to
//! the orthonormal frame bundle O(M), and numerical checks of the lifted
//! walk's generator against the horizontal Laplacian.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod error;
pub mod frame;
pub mod functions;
pub mod generator;
pub mod increments;
pub mod manifold;
pub mod ode;
pub mod rng;
pub mod stats;
pub mod walker;

pub use error::{Error, Result};
