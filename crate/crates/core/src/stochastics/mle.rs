use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{log_likelihood, Diffusion};
use crate::error::{check_dim, Error, Result};
use crate::geometry::MetricProvider;
use crate::smoothmap::LatentPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop once the g-norm of the natural-gradient step falls below this.
    pub tol: f64,
    /// Central-difference step for the likelihood gradient.
    pub fd_step: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iter: 50,
            tol: 1e-4,
            fd_step: 1e-3,
            armijo: 1e-4,
            max_halvings: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleStep {
    pub x: Vec<f64>,
    pub log_likelihood: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub mean: Vec<f64>,
    pub initial: Vec<f64>,
    pub initial_log_likelihood: f64,
    pub log_likelihood: f64,
    /// One entry per accepted step.
    pub trace: Vec<MleStep>,
    pub diffusion: Diffusion,
    pub n_paths: usize,
    pub seed: u64,
    pub options: MleOptions,
    /// True when the line search could not improve the likelihood further.
    pub stalled: bool,
}

/// Maximum-likelihood diffusion mean by natural-gradient ascent on the
/// common-random-number log-likelihood.
///
/// Steps are `x ← x + α T g⁻¹(x) ∇(ℓ/N)` with `α` backtracked from 1 until
/// the Armijo condition holds, so accepted steps strictly increase `ℓ`.
/// Starts at `x0`, or the coordinate mean of the data.
#[allow(clippy::too_many_arguments)]
pub fn ml_mean(
    p: &MetricProvider,
    data: &[LatentPoint],
    diff: &Diffusion,
    n_paths: usize,
    opts: &MleOptions,
    seed: u64,
    x0: Option<&LatentPoint>,
) -> Result<MleResult> {
    if data.is_empty() {
        return Err(Error::invalid("ML mean of an empty data set"));
    }
    let d = p.dim();
    for z in data {
        check_dim(d, z.len())?;
    }
    let n = data.len() as f64;
    let mut x = match x0 {
        Some(x) => {
            check_dim(d, x.len())?;
            x.clone()
        }
        None => data.iter().fold(DVector::zeros(d), |acc, z| acc + z) / n,
    };
    let ll = |x: &LatentPoint| log_likelihood(p, x, data, diff, n_paths, seed);

    let initial = x.clone();
    let mut value = ll(&x)?;
    let initial_value = value;
    let mut trace = Vec::new();
    let h = opts.fd_step;

    for _ in 0..opts.max_iter {
        let mut grad = DVector::zeros(d);
        let mut xs = x.clone();
        for i in 0..d {
            xs[i] = x[i] + h;
            let up = ll(&xs)?;
            xs[i] = x[i] - h;
            let down = ll(&xs)?;
            xs[i] = x[i];
            grad[i] = (up - down) / (2.0 * h * n);
        }
        let g = p.metric(&x)?;
        let cometric = g.inverse()?;
        let direction = cometric.matrix() * &grad * diff.horizon;
        if g.norm(&direction) < opts.tol {
            return Ok(finish(x, initial, initial_value, value, trace, diff, n_paths, seed, opts, false));
        }
        // Expected gain per unit α of ℓ along the step.
        let slope = grad.dot(&direction) * n;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = &x + &direction * alpha;
            if let Ok(v) = ll(&cand) {
                if v > value && v >= value + opts.armijo * alpha * slope {
                    accepted = Some((cand, v));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, v)) => {
                x = cand;
                value = v;
                trace.push(MleStep {
                    x: x.iter().copied().collect(),
                    log_likelihood: v,
                    step_size: alpha,
                });
            }
            None => return Ok(finish(x, initial, initial_value, value, trace, diff, n_paths, seed, opts, true)),
        }
    }
    Err(Error::NoConvergence {
        what: "ML mean",
        iterations: opts.max_iter,
        residual: value,
        best: x.iter().copied().collect(),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    x: LatentPoint,
    initial: LatentPoint,
    initial_log_likelihood: f64,
    log_likelihood: f64,
    trace: Vec<MleStep>,
    diff: &Diffusion,
    n_paths: usize,
    seed: u64,
    opts: &MleOptions,
    stalled: bool,
) -> MleResult {
    MleResult {
        mean: x.iter().copied().collect(),
        initial: initial.iter().copied().collect(),
        initial_log_likelihood,
        log_likelihood,
        trace,
        diffusion: *diff,
        n_paths,
        seed,
        options: *opts,
        stalled,
    }
}
