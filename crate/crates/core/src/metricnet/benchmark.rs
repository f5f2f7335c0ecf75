use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{check_dim, Result};
use crate::geometry::{exp_endpoint, MetricProvider, DEFAULT_STEPS};
use crate::smoothmap::LatentPoint;

/// A geodesic integration repeated `repeats` times.
#[derive(Clone, Debug)]
pub struct GeodesicWorkload {
    pub start: LatentPoint,
    pub velocity: DVector<f64>,
    pub steps: usize,
    pub repeats: usize,
}

impl GeodesicWorkload {
    pub fn new(start: LatentPoint, velocity: DVector<f64>) -> Self {
        GeodesicWorkload {
            start,
            velocity,
            steps: DEFAULT_STEPS,
            repeats: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkReport {
    pub steps: usize,
    pub repeats: usize,
    /// Mean wall-clock seconds per integration.
    pub exact_seconds: f64,
    pub learned_seconds: f64,
    pub speedup: f64,
    pub exact_endpoint: Vec<f64>,
    pub learned_endpoint: Vec<f64>,
    /// Endpoint gap relative to the exact displacement.
    pub relative_discrepancy: f64,
}

fn timed(p: &MetricProvider, w: &GeodesicWorkload) -> Result<(f64, LatentPoint)> {
    let repeats = w.repeats.max(1);
    let started = Instant::now();
    let mut end = w.start.clone();
    for _ in 0..repeats {
        end = exp_endpoint(p, &w.start, &w.velocity, w.steps)?;
    }
    Ok((started.elapsed().as_secs_f64() / repeats as f64, end))
}

/// Times the same geodesic workload under both providers.
pub fn benchmark(exact: &MetricProvider, learned: &MetricProvider, w: &GeodesicWorkload) -> Result<BenchmarkReport> {
    check_dim(exact.dim(), learned.dim())?;
    let (exact_seconds, e) = timed(exact, w)?;
    let (learned_seconds, l) = timed(learned, w)?;
    let displacement = (&e - &w.start).norm();
    let gap = (&l - &e).norm();
    Ok(BenchmarkReport {
        steps: w.steps,
        repeats: w.repeats.max(1),
        exact_seconds,
        learned_seconds,
        speedup: exact_seconds / learned_seconds.max(f64::MIN_POSITIVE),
        exact_endpoint: e.iter().copied().collect(),
        learned_endpoint: l.iter().copied().collect(),
        relative_discrepancy: if displacement > 0.0 { gap / displacement } else { gap },
    })
}
