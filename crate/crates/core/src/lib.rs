//! Riemannian statistics on the latent space of a generative model.
//!
//! A decoder `f: Z → X` induces the pullback metric `g = JfᵀJf` on latent
//! space. On top of that metric this crate provides geodesics, curvature,
//! parallel transport, Brownian motion and guided bridges, Monte-Carlo
//! transition densities, Fréchet and maximum-likelihood means, and
//! principal geodesic analysis. A small network ([`metricnet`]) can stand
//! in for the exact metric when decoder Jacobians are expensive.

pub mod dual;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metricnet;
pub mod smoothmap;
pub mod stats;
pub mod stochastics;

pub use error::{Error, Result};
