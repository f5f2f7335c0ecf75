use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{exp_endpoint, log_map_with, LogOptions, MetricProvider, DEFAULT_STEPS};
use crate::linalg::compensated_sum;
use crate::smoothmap::LatentPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetOptions {
    /// Initial step `τ`; halved whenever the functional would increase.
    pub step: f64,
    /// Tolerance on the g-norm of the mean Log.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip)]
    pub log: LogOptions,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        FrechetOptions {
            step: 1.0,
            tol: 1e-6,
            max_iter: 200,
            log: LogOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub mean: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    /// `Σ d(μ, z_i)² / N`
    pub variance: f64,
    /// Functional value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub initial_index: usize,
}

/// Logs from `x` to every datum, in data order.
pub(crate) fn logs_from(
    p: &MetricProvider,
    x: &LatentPoint,
    data: &[LatentPoint],
    opts: &LogOptions,
    label: &str,
) -> Result<Vec<DVector<f64>>> {
    data.par_iter()
        .enumerate()
        .map(|(i, z)| {
            log_map_with(p, x, z, opts).map(|t| t.vec).map_err(|e| Error::LogFailure {
                from: label.to_string(),
                to: i,
                source: Box::new(e),
            })
        })
        .collect()
}

struct Evaluation {
    mean_log: DVector<f64>,
    grad_norm: f64,
    functional: f64,
}

fn evaluate(p: &MetricProvider, x: &LatentPoint, data: &[LatentPoint], opts: &LogOptions, label: &str) -> Result<Evaluation> {
    let logs = logs_from(p, x, data, opts, label)?;
    let g = p.metric(x)?;
    let n = data.len() as f64;
    let mean_log = DVector::from_fn(x.len(), |r, _| compensated_sum(logs.iter().map(|u| u[r])) / n);
    let functional = compensated_sum(logs.iter().map(|u| g.inner(u, u))) / n;
    Ok(Evaluation {
        grad_norm: g.norm(&mean_log),
        mean_log,
        functional,
    })
}

/// Index of the datum with the smallest Fréchet sum over the data, among
/// data whose Logs to all others converge.
fn best_datum(p: &MetricProvider, data: &[LatentPoint], opts: &LogOptions) -> Result<usize> {
    let n = data.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let dists: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let v = log_map_with(p, &data[i], &data[j], opts)?.vec;
            Ok(p.metric(&data[i])?.norm(&v))
        })
        .collect();
    let mut sums = vec![0.0; n];
    let mut ok = vec![true; n];
    let mut first_failure = None;
    for (&(i, j), d) in pairs.iter().zip(dists) {
        match d {
            Ok(d) => {
                sums[i] += d * d;
                sums[j] += d * d;
            }
            Err(e) => {
                ok[i] = false;
                ok[j] = false;
                first_failure.get_or_insert((i, j, e));
            }
        }
    }
    let best = (0..n).filter(|&i| ok[i]).min_by(|&a, &b| sums[a].total_cmp(&sums[b]));
    match (best, first_failure) {
        (Some(i), _) => Ok(i),
        (None, Some((i, j, e))) => Err(Error::LogFailure {
            from: format!("datum {i}"),
            to: j,
            source: Box::new(e),
        }),
        (None, None) => unreachable!("a single datum has no failing pairs"),
    }
}

/// Fréchet mean by the fixed-point iteration `x ← Exp_x(τ · mean_i Log_x(z_i))`,
/// started at the best datum. The functional never increases: a step that
/// would increase it is retried with `τ/2`, and each iteration starts again
/// from the configured `τ`.
pub fn frechet_mean(p: &MetricProvider, data: &[LatentPoint], opts: &FrechetOptions) -> Result<FrechetResult> {
    if data.is_empty() {
        return Err(Error::invalid("Fréchet mean of an empty data set"));
    }
    for z in data {
        check_dim(p.dim(), z.len())?;
    }
    if !(opts.step > 0.0 && opts.tol > 0.0) {
        return Err(Error::invalid("Fréchet step and tolerance must be positive"));
    }
    let initial_index = best_datum(p, data, &opts.log)?;
    let mut x = data[initial_index].clone();
    let mut eval = evaluate(p, &x, data, &opts.log, "the initial datum")?;
    let mut trace = vec![eval.functional];
    for iter in 0..opts.max_iter {
        if eval.grad_norm < opts.tol {
            return Ok(FrechetResult {
                mean: x.iter().copied().collect(),
                iterations: iter,
                grad_norm: eval.grad_norm,
                variance: eval.functional,
                trace,
                initial_index,
            });
        }
        let label = format!("iterate {}", iter + 1);
        let mut tau = opts.step;
        let mut halvings = 0;
        loop {
            let next = exp_endpoint(p, &x, &(&eval.mean_log * tau), DEFAULT_STEPS)?;
            let cand = evaluate(p, &next, data, &opts.log, &label)?;
            if cand.functional <= eval.functional {
                x = next;
                eval = cand;
                break;
            }
            halvings += 1;
            tau *= 0.5;
            if halvings > 40 {
                // No decrease at any resolvable step: x is stationary to
                // working precision.
                return Ok(FrechetResult {
                    mean: x.iter().copied().collect(),
                    iterations: iter,
                    grad_norm: eval.grad_norm,
                    variance: eval.functional,
                    trace,
                    initial_index,
                });
            }
        }
        trace.push(eval.functional);
    }
    Err(Error::NoConvergence {
        what: "Fréchet mean",
        iterations: opts.max_iter,
        residual: eval.grad_norm,
        best: x.iter().copied().collect(),
    })
}
