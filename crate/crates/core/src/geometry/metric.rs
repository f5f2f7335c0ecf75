use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{bilinear, symmetric_eigenvalues, symmetrize};
use crate::metricnet::MetricNet;
use crate::smoothmap::{jacobian, Decoder, LatentPoint};

/// Largest admissible condition number of a metric evaluation.
pub const MAX_CONDITION: f64 = 1e8;
/// Smallest admissible eigenvalue of a metric evaluation.
pub const MIN_EIGENVALUE: f64 = 1e-12;
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// A validated symmetric positive-definite d×d matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor(DMatrix<f64>);

impl MetricTensor {
    /// Validates symmetry, positive-definiteness and conditioning.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid(format!("metric must be square, got {:?}", m.shape())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric tensor"));
        }
        let n = m.nrows();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let ev = symmetric_eigenvalues(&m);
        let (lo, hi) = (ev[0], ev[n - 1]);
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
        if lo < MIN_EIGENVALUE || hi / lo > MAX_CONDITION {
            return Err(Error::IllConditioned {
                min_eigenvalue: lo,
                condition: hi / lo,
            });
        }
        Ok(MetricTensor(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Lower-triangular `L` with `L Lᵀ = self`.
    pub fn cholesky_lower(&self) -> DMatrix<f64> {
        self.0
            .clone()
            .cholesky()
            .expect("validated metric is positive-definite")
            .unpack()
    }

    pub fn inverse(&self) -> Result<MetricTensor> {
        let chol = self.0.clone().cholesky().expect("validated metric is positive-definite");
        let mut inv = chol.inverse();
        symmetrize(&mut inv);
        MetricTensor::new(inv)
    }

    pub fn determinant(&self) -> f64 {
        let l = self.cholesky_lower();
        let diag: f64 = l.diagonal().iter().product();
        diag * diag
    }

    pub fn inner(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        bilinear(u, &self.0, w)
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.0)[0]
    }
}

/// Axis-aligned box in latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("region bounds must be non-empty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::invalid(format!("degenerate region {lo:?}..{hi:?}")));
        }
        Ok(Region { lo, hi })
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Region::new(vec![-half_width; dim], vec![half_width; dim])
    }

    /// Bounding box of `points` with each extent grown by `fraction`, split
    /// evenly between the two sides.
    pub fn bounding(points: &[LatentPoint], fraction: f64) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::invalid("no points to bound"))?;
        let mut lo: Vec<f64> = first.iter().copied().collect();
        let mut hi = lo.clone();
        for p in points {
            check_dim(lo.len(), p.len())?;
            for (i, v) in p.iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
        }
        for i in 0..lo.len() {
            let pad = (0.5 * (hi[i] - lo[i]) * fraction).max(1e-3);
            lo[i] -= pad;
            hi[i] += pad;
        }
        Region::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.lo.len()
            && z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

#[derive(Clone, Debug)]
pub enum MetricSource {
    /// Pullback `JfᵀJf` of a decoder.
    Exact(Decoder),
    /// Trained approximator predicting `g` and `g⁻¹` directly.
    Learned(MetricNet),
}

/// Supplies `g`, `g⁻¹` and (through finite differences with step `fd_step`)
/// derivatives of `g` at any latent point. Immutable after construction.
#[derive(Clone, Debug)]
pub struct MetricProvider {
    source: MetricSource,
    fd_step: f64,
}

impl MetricProvider {
    pub fn exact(decoder: Decoder) -> Self {
        MetricProvider {
            source: MetricSource::Exact(decoder),
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn learned(model: MetricNet) -> Self {
        MetricProvider {
            source: MetricSource::Learned(model),
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_fd_step(mut self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
        }
        self.fd_step = h;
        Ok(self)
    }

    pub fn source(&self) -> &MetricSource {
        &self.source
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn dim(&self) -> usize {
        match &self.source {
            MetricSource::Exact(f) => f.latent_dim(),
            MetricSource::Learned(m) => m.dim(),
        }
    }

    /// The box outside which the provider is not trusted, if any.
    pub fn region(&self) -> Option<&Region> {
        match &self.source {
            MetricSource::Exact(_) => None,
            MetricSource::Learned(m) => Some(m.region()),
        }
    }

    pub fn check_point(&self, z: &[f64]) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent state"));
        }
        match self.region() {
            Some(r) if !r.contains(z) => Err(Error::OutsideRegion { point: z.to_vec() }),
            _ => Ok(()),
        }
    }

    pub fn metric(&self, z: &LatentPoint) -> Result<MetricTensor> {
        match &self.source {
            MetricSource::Exact(f) => {
                let j = jacobian(f, z)?;
                let mut g = j.tr_mul(&j);
                symmetrize(&mut g);
                MetricTensor::new(g)
            }
            MetricSource::Learned(m) => Ok(m.predict(z)?.0),
        }
    }

    pub fn cometric(&self, z: &LatentPoint) -> Result<MetricTensor> {
        Ok(self.metric_pair(z)?.1)
    }

    /// `(g(z), g(z)⁻¹)`; the exact source inverts by Cholesky, the learned
    /// source returns its own cometric prediction.
    pub fn metric_pair(&self, z: &LatentPoint) -> Result<(MetricTensor, MetricTensor)> {
        match &self.source {
            MetricSource::Exact(_) => {
                let g = self.metric(z)?;
                let ginv = g.inverse()?;
                Ok((g, ginv))
            }
            MetricSource::Learned(m) => m.predict(z),
        }
    }
}
