use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::frechet::{frechet_mean, logs_from, FrechetOptions};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{exp_endpoint, MetricProvider, DEFAULT_STEPS};
use crate::linalg::{bilinear, symmetric_eigen_descending};
use crate::smoothmap::{decode, AmbientPoint, Decoder, LatentPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgaResult {
    pub mu: Vec<f64>,
    /// g(μ)-orthonormal principal directions, by descending variance.
    pub directions: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    /// `coords[i][k] = Log_μ(z_i)ᵀ g(μ) v_k`
    pub coords: Vec<Vec<f64>>,
    pub total_variance: f64,
}

impl PgaResult {
    pub fn mean(&self) -> LatentPoint {
        DVector::from_column_slice(&self.mu)
    }

    pub fn direction(&self, k: usize) -> Option<DVector<f64>> {
        self.directions.get(k).map(|v| DVector::from_column_slice(v))
    }
}

/// Tangent-space principal geodesic analysis about `mu`, or about the
/// Fréchet mean when `mu` is `None`.
///
/// Solves `C g w = λ w` with `C = mean_i u_i u_iᵀ`, `u_i = Log_μ(z_i)`,
/// through the symmetric matrix `LᵀCL` where `g = LLᵀ`. Each direction is
/// signed so that its first non-negligible entry is positive.
pub fn pga(p: &MetricProvider, data: &[LatentPoint], mu: Option<&LatentPoint>, opts: &FrechetOptions) -> Result<PgaResult> {
    if data.len() < 2 {
        return Err(Error::invalid("PGA needs at least two data points"));
    }
    for z in data {
        check_dim(p.dim(), z.len())?;
    }
    let mu = match mu {
        Some(m) => {
            check_dim(p.dim(), m.len())?;
            m.clone()
        }
        None => DVector::from_vec(frechet_mean(p, data, opts)?.mean),
    };
    let d = mu.len();
    let logs = logs_from(p, &mu, data, &opts.log, "the mean")?;
    let n = data.len() as f64;
    let mut c = DMatrix::zeros(d, d);
    for u in &logs {
        c += u * u.transpose();
    }
    c /= n;

    let g = p.metric(&mu)?;
    let l = g.cholesky_lower();
    let s = l.transpose() * &c * &l;
    let (lambdas, ys) = symmetric_eigen_descending(&s);
    let lt = l.transpose();
    let lt_lu = lt.clone().lu();

    let mut directions = Vec::with_capacity(d);
    for k in 0..d {
        let y = ys.column(k).into_owned();
        let mut w = lt_lu
            .solve(&y)
            .ok_or_else(|| Error::invalid("singular metric factor in PGA"))?;
        let scale = w.amax();
        if let Some(first) = w.iter().find(|c| c.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                w = -w;
            }
        }
        directions.push(w);
    }
    let coords: Vec<Vec<f64>> = logs
        .iter()
        .map(|u| directions.iter().map(|w| bilinear(u, g.matrix(), w)).collect())
        .collect();
    let total_variance = logs.iter().map(|u| g.inner(u, u)).sum::<f64>() / n;
    Ok(PgaResult {
        mu: mu.iter().copied().collect(),
        directions: directions.iter().map(|w| w.iter().copied().collect()).collect(),
        variances: lambdas.iter().map(|l| l.max(0.0)).collect(),
        coords,
        total_variance,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub latent: LatentPoint,
    pub ambient: AmbientPoint,
}

/// `Exp_μ(t v_k)` and its decoded image for each `t`.
pub fn principal_curve(
    p: &MetricProvider,
    f: &Decoder,
    res: &PgaResult,
    k: usize,
    ts: &[f64],
) -> Result<Vec<CurvePoint>> {
    let v = res
        .direction(k)
        .ok_or_else(|| Error::invalid(format!("component {k} out of range")))?;
    let mu = res.mean();
    check_dim(f.latent_dim(), mu.len())?;
    ts.iter()
        .map(|&t| {
            let latent = if t == 0.0 {
                mu.clone()
            } else {
                exp_endpoint(p, &mu, &(&v * t), DEFAULT_STEPS)?
            };
            let ambient = decode(f, &latent)?;
            Ok(CurvePoint { t, latent, ambient })
        })
        .collect()
}
