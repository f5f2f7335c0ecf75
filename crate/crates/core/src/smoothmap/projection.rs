use nalgebra::DVector;

use super::{decode, jacobian, AmbientPoint, Decoder, LatentPoint};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct ProjectionOptions {
    /// Convergence threshold on the squared gradient norm.
    pub grad_tol_sq: f64,
    /// A stalled line search is accepted as converged below this squared
    /// gradient norm.
    pub stall_tol_sq: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            grad_tol_sq: 1e-20,
            stall_tol_sq: 1e-10,
            max_iter: 10_000,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub z: LatentPoint,
    /// `‖f(z) − y‖` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Forward stereographic projection of `y` (rescaled onto the sphere), the
/// natural starting guess for the sphere decoder.
pub fn stereographic_guess(radius: f64, y: &AmbientPoint) -> LatentPoint {
    let norm = y.norm();
    if y.len() != 3 || norm == 0.0 {
        return DVector::zeros(2);
    }
    let p = y * (radius / norm);
    let denom = radius + p[2];
    if denom <= 1e-12 * radius {
        return DVector::zeros(2);
    }
    DVector::from_vec(vec![p[0] / denom, p[1] / denom])
}

/// Local minimiser of `‖f(z) − y‖²` by gradient descent with Armijo
/// backtracking, started from `z0`.
pub fn project_to_latent(
    f: &Decoder,
    y: &AmbientPoint,
    z0: &LatentPoint,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    check_dim(f.ambient_dim(), y.len())?;
    check_dim(f.latent_dim(), z0.len())?;

    let objective = |z: &LatentPoint| -> Result<f64> { Ok((decode(f, z)? - y).norm_squared()) };

    let mut z = z0.clone();
    let mut value = objective(&z)?;
    let mut step: f64 = 1.0;
    for iter in 0..opts.max_iter {
        let r = decode(f, &z)? - y;
        let grad = jacobian(f, &z)?.transpose() * r * 2.0;
        let g2 = grad.norm_squared();
        if g2 < opts.grad_tol_sq {
            return Ok(Projection { residual: value.sqrt(), z, iterations: iter });
        }
        // Start from twice the last accepted step so the step size can recover.
        let mut alpha = (2.0 * step).min(1.0);
        let mut accepted = false;
        while alpha > 1e-20 {
            let cand = &z - &grad * alpha;
            if let Ok(v) = objective(&cand) {
                if v < value && v <= value - opts.armijo * alpha * g2 {
                    z = cand;
                    value = v;
                    step = alpha;
                    accepted = true;
                    break;
                }
            }
            alpha *= opts.shrink;
        }
        if !accepted {
            if g2 < opts.stall_tol_sq {
                return Ok(Projection { residual: value.sqrt(), z, iterations: iter });
            }
            return Err(Error::NoConvergence {
                what: "latent projection",
                iterations: iter,
                residual: value.sqrt(),
                best: z.iter().copied().collect(),
            });
        }
    }
    Err(Error::NoConvergence {
        what: "latent projection",
        iterations: opts.max_iter,
        residual: value.sqrt(),
        best: z.iter().copied().collect(),
    })
}
