use nalgebra::{DMatrix, DVector};

use super::christoffel::christoffel;
use super::metric::MetricProvider;
use crate::error::{check_dim, Error, Result};
use crate::smoothmap::{LatentPoint, TangentVector};

/// Fixed RK4 step count used when callers do not choose one.
pub const DEFAULT_STEPS: usize = 100;

/// Discretised geodesic on a uniform grid over `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<LatentPoint>,
    pub velocities: Vec<DVector<f64>>,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &LatentPoint {
        self.points.last().expect("path has at least two nodes")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[inline]
fn acceleration(p: &MetricProvider, z: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    p.check_point(z.as_slice())?;
    Ok(-christoffel(p, z)?.contract(v, v))
}

/// One RK4 step of `z̈ = −Γ(z)[ż, ż]`.
fn rk4_step(p: &MetricProvider, z: &DVector<f64>, v: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let half = 0.5 * dt;
    let a1 = acceleration(p, z, v)?;
    let z2 = z + v * half;
    let v2 = v + &a1 * half;
    let a2 = acceleration(p, &z2, &v2)?;
    let z3 = z + &v2 * half;
    let v3 = v + &a2 * half;
    let a3 = acceleration(p, &z3, &v3)?;
    let z4 = z + &v3 * dt;
    let v4 = v + &a3 * dt;
    let a4 = acceleration(p, &z4, &v4)?;
    let zn = z + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    if zn.iter().chain(vn.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("geodesic state"));
    }
    Ok((zn, vn))
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::invalid(format!("geodesic integration needs at least 2 steps, got {steps}")));
    }
    Ok(())
}

/// Integrates the geodesic with initial velocity `v` for unit time; the
/// endpoint is `Exp_z(v)`.
pub fn exp_map(p: &MetricProvider, z: &LatentPoint, v: &DVector<f64>, steps: usize) -> Result<GeodesicPath> {
    check_steps(steps)?;
    check_dim(p.dim(), z.len())?;
    check_dim(p.dim(), v.len())?;
    p.check_point(z.as_slice())?;
    let dt = 1.0 / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    times.push(0.0);
    points.push(z.clone());
    velocities.push(v.clone());
    for k in 0..steps {
        let (zn, vn) = rk4_step(p, &points[k], &velocities[k], dt)?;
        times.push((k + 1) as f64 * dt);
        points.push(zn);
        velocities.push(vn);
    }
    p.check_point(points[steps].as_slice())?;
    Ok(GeodesicPath {
        times,
        points,
        velocities,
    })
}

/// `Exp_z(v)` without recording the trajectory.
pub fn exp_endpoint(p: &MetricProvider, z: &LatentPoint, v: &DVector<f64>, steps: usize) -> Result<LatentPoint> {
    check_steps(steps)?;
    check_dim(p.dim(), z.len())?;
    check_dim(p.dim(), v.len())?;
    let dt = 1.0 / steps as f64;
    let mut zc = z.clone();
    let mut vc = v.clone();
    for _ in 0..steps {
        let (zn, vn) = rk4_step(p, &zc, &vc, dt)?;
        zc = zn;
        vc = vn;
    }
    p.check_point(zc.as_slice())?;
    Ok(zc)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogOptions {
    pub steps: usize,
    /// Required Euclidean endpoint error.
    pub tol: f64,
    pub max_iter: usize,
    /// Levenberg damping added to the Gauss–Newton normal matrix.
    pub damping: f64,
    /// Forward-difference step for the endpoint Jacobian.
    pub fd_step: f64,
}

impl Default for LogOptions {
    fn default() -> Self {
        LogOptions {
            steps: DEFAULT_STEPS,
            tol: 1e-8,
            max_iter: 100,
            damping: 1e-8,
            fd_step: 1e-7,
        }
    }
}

pub fn log_map(p: &MetricProvider, z1: &LatentPoint, z2: &LatentPoint) -> Result<TangentVector> {
    log_map_with(p, z1, z2, &LogOptions::default())
}

/// Riemannian length of the straight latent segment `z1 + sΔ`, an upper
/// bound on the geodesic distance (composite Simpson, 32 panels).
fn segment_length(p: &MetricProvider, z1: &LatentPoint, delta: &DVector<f64>) -> Result<f64> {
    const PANELS: usize = 32;
    let mut sum = 0.0;
    for i in 0..=PANELS {
        let s = i as f64 / PANELS as f64;
        let speed = p.metric(&(z1 + delta * s))?.norm(delta);
        let w = if i == 0 || i == PANELS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * speed;
    }
    Ok(sum / (3.0 * PANELS as f64))
}

/// Gauss–Newton shooting for `v` with `Exp_{z1}(v) = z2`, started at
/// `v₀ = z2 − z1` rescaled to the g-length of the straight segment.
///
/// A solution longer than the straight segment cannot be minimising. In
/// that case, or if shooting fails, the target is approached through
/// intermediate points on the segment, each solve warm-started from the
/// previous one, and the shortest solution found is returned.
pub fn log_map_with(p: &MetricProvider, z1: &LatentPoint, z2: &LatentPoint, opts: &LogOptions) -> Result<TangentVector> {
    let d = p.dim();
    check_dim(d, z1.len())?;
    check_dim(d, z2.len())?;
    p.check_point(z1.as_slice())?;
    p.check_point(z2.as_slice())?;

    let step = z2 - z1;
    let g1 = p.metric(z1)?;
    let bound = segment_length(p, z1, &step)? * 1.01 + opts.tol;
    let done = |vec: DVector<f64>| TangentVector { base: z1.clone(), vec };

    let mut best: Option<(f64, DVector<f64>)> = None;
    let keep = |v: DVector<f64>, best: &mut Option<(f64, DVector<f64>)>| {
        if !resolved(p, z1, z2, &v, opts) {
            return false;
        }
        let len = g1.norm(&v);
        if best.as_ref().is_none_or(|(l, _)| len < *l) {
            *best = Some((len, v));
        }
        len <= bound
    };
    let step_norm = g1.norm(&step);
    let v0 = if step_norm > 0.0 { &step * ((bound - opts.tol) / 1.01 / step_norm) } else { step.clone() };
    let first = match shoot(p, z1, z2, v0, opts) {
        Ok(v) => {
            if keep(v.clone(), &mut best) {
                return Ok(done(v));
            }
            None
        }
        Err(e) => Some(e),
    };
    for stages in [8usize, 32] {
        let mut guess = &step / stages as f64;
        let mut solution = None;
        for s in 1..=stages {
            let target = z1 + &step * (s as f64 / stages as f64);
            match shoot(p, z1, &target, guess, opts) {
                Ok(v) => {
                    guess = &v * ((s + 1) as f64 / s as f64);
                    solution = Some(v);
                }
                Err(_) => {
                    solution = None;
                    break;
                }
            }
        }
        if let Some(v) = solution {
            if keep(v.clone(), &mut best) {
                return Ok(done(v));
            }
        }
    }
    match (best, first) {
        (Some((_, v)), _) => Ok(done(v)),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::NoConvergence {
            what: "log map (geodesic not resolved by the integrator)",
            iterations: opts.max_iter,
            residual: f64::NAN,
            best: step.iter().copied().collect(),
        }),
    }
}

/// Whether the shot still lands on `z2` at twice the step count. Curves
/// through regions where the metric varies too fast for the integrator can
/// hit the target only by discretisation error.
fn resolved(p: &MetricProvider, z1: &LatentPoint, z2: &LatentPoint, v: &DVector<f64>, opts: &LogOptions) -> bool {
    exp_endpoint(p, z1, v, 2 * opts.steps).is_ok_and(|end| (end - z2).norm() <= 1e-6 * (1.0 + z2.norm()))
}

fn shoot(p: &MetricProvider, z1: &LatentPoint, z2: &LatentPoint, v0: DVector<f64>, opts: &LogOptions) -> Result<DVector<f64>> {
    let d = z1.len();
    let mut v = v0;
    let mut r = exp_endpoint(p, z1, &v, opts.steps)? - z2;
    let mut rn = r.norm();
    for iter in 0..opts.max_iter {
        if rn < opts.tol {
            return Ok(v);
        }
        let h = opts.fd_step * v.norm().max(1.0);
        let mut jac = DMatrix::zeros(d, d);
        for c in 0..d {
            let mut vp = v.clone();
            vp[c] += h;
            let col = (exp_endpoint(p, z1, &vp, opts.steps)? - z2 - &r) / h;
            jac.set_column(c, &col);
        }
        let mut normal = jac.tr_mul(&jac);
        for i in 0..d {
            normal[(i, i)] += opts.damping;
        }
        let rhs = -jac.tr_mul(&r);
        let delta = normal.lu().solve(&rhs).ok_or(Error::NoConvergence {
            what: "log map",
            iterations: iter,
            residual: rn,
            best: v.iter().copied().collect(),
        })?;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &v + &delta * alpha;
            if let Ok(end) = exp_endpoint(p, z1, &cand, opts.steps) {
                let rc = end - z2;
                let rcn = rc.norm();
                if rcn < rn {
                    v = cand;
                    r = rc;
                    rn = rcn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn < opts.tol {
        return Ok(v);
    }
    Err(Error::NoConvergence {
        what: "log map",
        iterations: opts.max_iter,
        residual: rn,
        best: v.iter().copied().collect(),
    })
}

/// Geodesic distance `‖Log_{z1}(z2)‖_g`.
pub fn distance(p: &MetricProvider, z1: &LatentPoint, z2: &LatentPoint) -> Result<f64> {
    distance_with(p, z1, z2, &LogOptions::default())
}

pub fn distance_with(p: &MetricProvider, z1: &LatentPoint, z2: &LatentPoint, opts: &LogOptions) -> Result<f64> {
    if z1 == z2 {
        check_dim(p.dim(), z1.len())?;
        return Ok(0.0);
    }
    let v = log_map_with(p, z1, z2, opts)?;
    Ok(p.metric(z1)?.norm(&v.vec))
}
