use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_bridge, Diffusion, PathSeed};
use crate::error::{check_dim, Error, Result};
use crate::geometry::MetricProvider;
use crate::linalg::{bilinear, compensated_sum};
use crate::smoothmap::LatentPoint;

/// Monte-Carlo transition density `p_T(v | x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub log_value: f64,
    pub stderr: f64,
    /// Paths that contributed.
    pub n_paths: usize,
    pub n_failed: usize,
    #[serde(rename = "K")]
    pub steps: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
}

pub(crate) fn density_for_datum(
    p: &MetricProvider,
    x: &LatentPoint,
    v: &LatentPoint,
    diff: &Diffusion,
    n_paths: usize,
    seed: u64,
    data_index: u32,
) -> Result<DensityEstimate> {
    diff.validate()?;
    check_dim(p.dim(), x.len())?;
    check_dim(p.dim(), v.len())?;
    if n_paths == 0 || n_paths > u32::MAX as usize {
        return Err(Error::invalid(format!("path count {n_paths} out of range")));
    }
    let d = x.len() as f64;
    let t = diff.horizon;
    let gv = p.metric(v)?;
    let gx = p.metric(x)?;
    let offset = x - v;
    let log_prefactor = 0.5 * (gv.determinant().ln() - d * (2.0 * std::f64::consts::PI * t).ln())
        - bilinear(&offset, gx.matrix(), &offset) / (2.0 * t);

    // Ordered collect keeps the reduction independent of scheduling.
    let outcomes: Vec<Option<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            simulate_bridge(p, x, v, diff, PathSeed::new(seed, data_index, i as u32))
                .ok()
                .map(|s| s.log_phi)
        })
        .collect();
    let logs: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let n_failed = n_paths - logs.len();
    if logs.is_empty() {
        return Err(Error::AllPathsFailed(n_paths));
    }
    let n = logs.len() as f64;
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let mean = compensated_sum(scaled.iter().copied()) / n;
    let var = if logs.len() > 1 {
        compensated_sum(scaled.iter().map(|w| (w - mean) * (w - mean))) / (n - 1.0)
    } else {
        0.0
    };
    let log_value = log_prefactor + shift + mean.ln();
    Ok(DensityEstimate {
        value: log_value.exp(),
        log_value,
        stderr: (log_prefactor + shift).exp() * (var / n).sqrt(),
        n_paths: logs.len(),
        n_failed,
        steps: diff.steps,
        horizon: t,
        seed,
    })
}

/// `p̂ = √(|g(v)|/(2πT)^d) · exp(−(x−v)ᵀ g(x) (x−v)/(2T)) · mean(φ)` over
/// `n_paths` guided bridges from `x` to `v`. Failed paths are skipped and
/// counted.
pub fn transition_density(
    p: &MetricProvider,
    x: &LatentPoint,
    v: &LatentPoint,
    diff: &Diffusion,
    n_paths: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    density_for_datum(p, x, v, diff, n_paths, seed, 0)
}

/// `Σ_i log p̂_T(z_i | x)`. Datum `i` always uses noise streams
/// `(seed, i, ·)`, so the surface is smooth in `x`.
pub fn log_likelihood(
    p: &MetricProvider,
    x: &LatentPoint,
    data: &[LatentPoint],
    diff: &Diffusion,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("likelihood of an empty data set"));
    }
    if data.len() > u32::MAX as usize {
        return Err(Error::invalid("too many data points"));
    }
    let mut terms = Vec::with_capacity(data.len());
    for (i, z) in data.iter().enumerate() {
        terms.push(density_for_datum(p, x, z, diff, n_paths, seed, i as u32)?.log_value);
    }
    Ok(compensated_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothmap::Decoder;
    use nalgebra::{dvector, DMatrix};

    fn flat() -> MetricProvider {
        MetricProvider::exact(Decoder::linear(DMatrix::identity(2, 2)).unwrap())
    }

    #[test]
    fn flat_density_is_gaussian() {
        let diff = Diffusion::new(1.0, 20).unwrap();
        let at = transition_density(&flat(), &dvector![0.2, 0.1], &dvector![0.2, 0.1], &diff, 100, 1).unwrap();
        assert!((at.value - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(at.stderr, 0.0);
        let off = transition_density(&flat(), &dvector![1.0, 0.0], &dvector![0.0, 0.0], &diff, 100, 1).unwrap();
        assert!((off.value - (-0.5f64).exp() / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn single_flat_datum_likelihood() {
        let diff = Diffusion::new(2.0, 20).unwrap();
        let z = dvector![0.5, 0.5];
        let ll = log_likelihood(&flat(), &z, &[z.clone()], &diff, 100, 3).unwrap();
        assert!((ll - (1.0 / (2.0 * std::f64::consts::PI * 2.0)).ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_data_rejected() {
        let diff = Diffusion::new(1.0, 20).unwrap();
        assert!(log_likelihood(&flat(), &dvector![0.0, 0.0], &[], &diff, 10, 0).is_err());
    }
}
