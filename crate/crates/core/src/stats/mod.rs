//! Fréchet means and principal geodesic analysis on latent space.

mod frechet;
mod pga;

pub use frechet::{frechet_mean, FrechetOptions, FrechetResult};
pub use pga::{pga, principal_curve, CurvePoint, PgaResult};
