use nalgebra::{DMatrix, DVector};

use super::metric::{MetricProvider, MetricTensor};
use crate::error::Result;
use crate::linalg::{symmetric_eigenvalues, symmetrize};
use crate::smoothmap::LatentPoint;

/// Christoffel symbols of the second kind `Γ^j_{kl}`, stored `[j][k][l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    #[inline]
    fn idx(&self, j: usize, k: usize, l: usize) -> usize {
        (j * self.dim + k) * self.dim + l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(j, k, l)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `Γ^j_{kl} u^k w^l`
    pub fn contract(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        DVector::from_fn(d, |j, _| {
            let mut s = 0.0;
            for k in 0..d {
                let base = (j * d + k) * d;
                let mut row = 0.0;
                for l in 0..d {
                    row += self.data[base + l] * w[l];
                }
                s += u[k] * row;
            }
            s
        })
    }

    /// `g^{kl} Γ^j_{kl}`
    pub fn trace(&self, cometric: &DMatrix<f64>) -> DVector<f64> {
        let d = self.dim;
        DVector::from_fn(d, |j, _| {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += cometric[(k, l)] * self.get(j, k, l);
                }
            }
            s
        })
    }
}

/// Metric, cometric and Christoffel symbols at one point, computed together
/// so integrators evaluate the provider once per stage.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub metric: MetricTensor,
    pub cometric: MetricTensor,
    pub christoffel: Christoffel,
}

pub fn local_geometry(p: &MetricProvider, z: &LatentPoint) -> Result<LocalGeometry> {
    let (metric, cometric) = p.metric_pair(z)?;
    let d = metric.dim();
    let h = p.fd_step();

    // dg[m] = ∂_m g by central differences.
    let mut dg: Vec<DMatrix<f64>> = Vec::with_capacity(d);
    let mut zs = z.clone();
    for m in 0..d {
        zs[m] = z[m] + h;
        let plus = p.metric(&zs)?.into_matrix();
        zs[m] = z[m] - h;
        let minus = p.metric(&zs)?.into_matrix();
        zs[m] = z[m];
        dg.push((plus - minus) / (2.0 * h));
    }

    let ginv = cometric.matrix();
    let mut gamma = Christoffel::zeros(d);
    for k in 0..d {
        for l in k..d {
            // First-kind symbols Γ_{m,kl}.
            let first: Vec<f64> = (0..d)
                .map(|m| 0.5 * (dg[k][(m, l)] + dg[l][(m, k)] - dg[m][(k, l)]))
                .collect();
            for j in 0..d {
                let v: f64 = (0..d).map(|m| ginv[(j, m)] * first[m]).sum();
                let a = gamma.idx(j, k, l);
                let b = gamma.idx(j, l, k);
                gamma.data[a] = v;
                gamma.data[b] = v;
            }
        }
    }
    Ok(LocalGeometry {
        metric,
        cometric,
        christoffel: gamma,
    })
}

/// `Γ^j_{kl} = ½ g^{jm}(∂_k g_{ml} + ∂_l g_{mk} − ∂_m g_{kl})`, symmetric in
/// the lower indices by construction.
pub fn christoffel(p: &MetricProvider, z: &LatentPoint) -> Result<Christoffel> {
    Ok(local_geometry(p, z)?.christoffel)
}

#[derive(Clone, Debug)]
pub struct Curvature {
    dim: usize,
    /// `R^i_{jkl}` stored `[i][j][k][l]`.
    riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// Smallest eigenvalue of the mixed Ricci tensor `g⁻¹ Ric`.
    pub ricci_min_eig: f64,
}

impl Curvature {
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.riemann[((i * d + j) * d + k) * d + l]
    }
}

/// Riemann, Ricci and scalar curvature with `∂Γ` by central differences.
pub fn curvature(p: &MetricProvider, z: &LatentPoint) -> Result<Curvature> {
    let geo = local_geometry(p, z)?;
    let gamma = &geo.christoffel;
    let d = gamma.dim();
    let h = p.fd_step();

    // dgamma[m] = ∂_m Γ
    let mut dgamma: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut zs = z.clone();
    for m in 0..d {
        zs[m] = z[m] + h;
        let plus = christoffel(p, &zs)?;
        zs[m] = z[m] - h;
        let minus = christoffel(p, &zs)?;
        zs[m] = z[m];
        dgamma.push(
            plus.data
                .iter()
                .zip(&minus.data)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    let dg = |m: usize, i: usize, k: usize, l: usize| dgamma[m][(i * d + k) * d + l];

    let mut riemann = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut v = dg(k, i, l, j) - dg(l, i, k, j);
                    for m in 0..d {
                        v += gamma.get(i, k, m) * gamma.get(m, l, j) - gamma.get(i, l, m) * gamma.get(m, k, j);
                    }
                    riemann[((i * d + j) * d + k) * d + l] = v;
                }
            }
        }
    }

    // Ric_{jl} = R^k_{jkl}
    let mut ricci = DMatrix::from_fn(d, d, |j, l| (0..d).map(|k| riemann[((k * d + j) * d + k) * d + l]).sum());
    symmetrize(&mut ricci);
    let ginv = geo.cometric.matrix();
    let scalar = ginv.component_mul(&ricci).sum();

    // Eigenvalues of g⁻¹Ric via the congruent symmetric form L⁻¹ Ric L⁻ᵀ.
    let l = geo.metric.cholesky_lower();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .expect("Cholesky factor is invertible");
    let mut mixed = &linv * &ricci * linv.transpose();
    symmetrize(&mut mixed);
    let ricci_min_eig = symmetric_eigenvalues(&mixed)[0];

    Ok(Curvature {
        dim: d,
        riemann,
        ricci,
        scalar,
        ricci_min_eig,
    })
}
