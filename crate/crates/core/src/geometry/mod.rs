//! Riemannian geometry of the pullback metric on latent space, generic
//! over a [`MetricProvider`].

mod christoffel;
mod geodesic;
mod metric;
mod transport;

pub use christoffel::{christoffel, curvature, local_geometry, Christoffel, Curvature, LocalGeometry};
pub use geodesic::{
    distance, distance_with, exp_endpoint, exp_map, log_map, log_map_with, GeodesicPath, LogOptions, DEFAULT_STEPS,
};
pub use metric::{MetricProvider, MetricSource, MetricTensor, Region, DEFAULT_FD_STEP, MAX_CONDITION, MIN_EIGENVALUE};
pub use transport::{parallel_transport, Curve};
