use nalgebra::DVector;

use super::christoffel::christoffel;
use super::geodesic::GeodesicPath;
use super::metric::MetricProvider;
use crate::error::{check_dim, Error, Result};
use crate::smoothmap::LatentPoint;

/// Curve along which a vector is transported.
#[derive(Clone, Copy, Debug)]
pub enum Curve<'a> {
    Geodesic(&'a GeodesicPath),
    /// Piecewise-linear curve through `points` at the given `times`.
    Polyline {
        times: &'a [f64],
        points: &'a [LatentPoint],
    },
}

/// Integrates `v̇^j = −Γ^j_{kl} ż^k v^l` with RK4; returns the transported
/// vector at every node of the curve.
pub fn parallel_transport(p: &MetricProvider, curve: Curve<'_>, v0: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    check_dim(p.dim(), v0.len())?;
    match curve {
        Curve::Geodesic(path) => along_geodesic(p, path, v0),
        Curve::Polyline { times, points } => along_polyline(p, times, points, v0),
    }
}

fn along_geodesic(p: &MetricProvider, path: &GeodesicPath, v0: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    if path.len() < 2 {
        return Err(Error::invalid("transport path needs at least two nodes"));
    }
    // Re-integrate position, velocity and the transported vector jointly so
    // every RK4 stage sees a consistent curve.
    let rhs = |z: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        p.check_point(z.as_slice())?;
        let g = christoffel(p, z)?;
        Ok((-g.contract(u, u), -g.contract(u, w)))
    };
    let mut z = path.points[0].clone();
    let mut u = path.velocities[0].clone();
    let mut w = v0.clone();
    let mut out = Vec::with_capacity(path.len());
    out.push(w.clone());
    for k in 0..path.len() - 1 {
        let dt = path.times[k + 1] - path.times[k];
        let half = 0.5 * dt;
        let (a1, b1) = rhs(&z, &u, &w)?;
        let (z2, u2, w2) = (&z + &u * half, &u + &a1 * half, &w + &b1 * half);
        let (a2, b2) = rhs(&z2, &u2, &w2)?;
        let (z3, u3, w3) = (&z + &u2 * half, &u + &a2 * half, &w + &b2 * half);
        let (a3, b3) = rhs(&z3, &u3, &w3)?;
        let (z4, u4, w4) = (&z + &u3 * dt, &u + &a3 * dt, &w + &b3 * dt);
        let (a4, b4) = rhs(&z4, &u4, &w4)?;
        z += (&u + &u2 * 2.0 + &u3 * 2.0 + &u4) * (dt / 6.0);
        u += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        w += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (dt / 6.0);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("transported vector"));
        }
        out.push(w.clone());
    }
    Ok(out)
}

fn along_polyline(
    p: &MetricProvider,
    times: &[f64],
    points: &[LatentPoint],
    v0: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    if points.len() < 2 || times.len() != points.len() {
        return Err(Error::invalid("polyline needs at least two nodes and one time per node"));
    }
    let mut w = v0.clone();
    let mut out = Vec::with_capacity(points.len());
    out.push(w.clone());
    let mut gamma_start = {
        p.check_point(points[0].as_slice())?;
        christoffel(p, &points[0])?
    };
    for k in 0..points.len() - 1 {
        let dt = times[k + 1] - times[k];
        if !(dt > 0.0) {
            return Err(Error::invalid("polyline times must be strictly increasing"));
        }
        let u = (&points[k + 1] - &points[k]) / dt;
        let mid = (&points[k] + &points[k + 1]) * 0.5;
        p.check_point(mid.as_slice())?;
        p.check_point(points[k + 1].as_slice())?;
        let gamma_mid = christoffel(p, &mid)?;
        let gamma_end = christoffel(p, &points[k + 1])?;
        let half = 0.5 * dt;
        let b1 = -gamma_start.contract(&u, &w);
        let b2 = -gamma_mid.contract(&u, &(&w + &b1 * half));
        let b3 = -gamma_mid.contract(&u, &(&w + &b2 * half));
        let b4 = -gamma_end.contract(&u, &(&w + &b3 * dt));
        w += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (dt / 6.0);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("transported vector"));
        }
        out.push(w.clone());
        gamma_start = gamma_end;
    }
    Ok(out)
}
