use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{from_upper, to_upper, triangle_len, MetricNet, TrainingMeta};
use crate::error::{Error, Result};
use crate::geometry::{MetricProvider, Region};
use crate::linalg::frobenius_sq;
use crate::smoothmap::{Activation, DenseLayer, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub region: Region,
    pub samples: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The step size decays from `learning_rate` to this value along a
    /// cosine schedule.
    pub final_learning_rate: f64,
    pub epochs: usize,
    pub hidden: [usize; 2],
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(region: Region) -> Self {
        TrainConfig {
            region,
            samples: 10_000,
            batch_size: 128,
            learning_rate: 1e-3,
            final_learning_rate: 1e-3,
            epochs: 200,
            hidden: [64, 64],
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 10 {
            return Err(Error::invalid("training needs at least 10 samples"));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("batch size, epochs and hidden sizes must be positive"));
        }
        let lr_ok = |v: f64| v.is_finite() && v > 0.0;
        if !(lr_ok(self.learning_rate) && lr_ok(self.final_learning_rate)) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub(crate) struct Target {
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    g_norm_sq: f64,
    h_norm_sq: f64,
}

impl Target {
    pub(crate) fn new(g: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        let g_norm_sq = frobenius_sq(&g);
        let h_norm_sq = frobenius_sq(&h);
        if g_norm_sq == 0.0 || h_norm_sq == 0.0 {
            return Err(Error::DegenerateTarget("zero metric or cometric target"));
        }
        Ok(Target {
            g,
            h,
            g_norm_sq,
            h_norm_sq,
        })
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = to_upper(&self.g);
        v.extend(to_upper(&self.h));
        v
    }
}

/// Per-sample loss and its gradient with respect to the network output
/// (upper triangles of `g̃` then `g̃⁻¹`).
fn output_loss_grad(d: usize, y: &[f64], t: &Target) -> (f64, Vec<f64>) {
    let tl = triangle_len(d);
    let g = from_upper(d, &y[..tl]);
    let h = from_upper(d, &y[tl..]);
    let e1 = &g - &t.g;
    let e2 = &h - &t.h;
    let e3 = &h * &g - DMatrix::<f64>::identity(d, d);
    let value = frobenius_sq(&e1) / t.g_norm_sq + frobenius_sq(&e2) / t.h_norm_sq + frobenius_sq(&e3);

    let dg = &e1 * (2.0 / t.g_norm_sq) + h.transpose() * &e3 * 2.0;
    let dh = &e2 * (2.0 / t.h_norm_sq) + &e3 * g.transpose() * 2.0;
    let mut grad = Vec::with_capacity(2 * tl);
    for m in [&dg, &dh] {
        for i in 0..d {
            for j in i..d {
                grad.push(if i == j { m[(i, i)] } else { m[(i, j)] + m[(j, i)] });
            }
        }
    }
    (value, grad)
}

fn activation_derivative(act: Activation, pre: f64, post: f64) -> f64 {
    match act {
        Activation::Tanh => 1.0 - post * post,
        Activation::Sigmoid => post * (1.0 - post),
        Activation::Softplus => Activation::Sigmoid.apply(pre),
        Activation::Identity => 1.0,
    }
}

#[derive(Clone)]
pub(crate) struct Layer {
    pub(crate) w: DMatrix<f64>,
    pub(crate) b: DVector<f64>,
    act: Activation,
}

type Grads = Vec<(DMatrix<f64>, DVector<f64>)>;

/// Training-time network with fixed input/output affine normalisation that
/// is folded into the first and last layers on export.
#[derive(Clone)]
pub(crate) struct Network {
    pub(crate) layers: Vec<Layer>,
    in_shift: DVector<f64>,
    in_scale: DVector<f64>,
    out_shift: DVector<f64>,
    out_scale: DVector<f64>,
}

impl Network {
    pub(crate) fn glorot(sizes: &[usize], acts: &[Activation], rng: &mut impl Rng) -> Self {
        let layers = sizes
            .windows(2)
            .zip(acts)
            .map(|(w, &act)| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-limit..limit)),
                    b: DVector::zeros(w[1]),
                    act,
                }
            })
            .collect();
        let (n_in, n_out) = (sizes[0], sizes[sizes.len() - 1]);
        Network {
            layers,
            in_shift: DVector::zeros(n_in),
            in_scale: DVector::from_element(n_in, 1.0),
            out_shift: DVector::zeros(n_out),
            out_scale: DVector::from_element(n_out, 1.0),
        }
    }

    /// Returns pre-activations and activations per layer; `acts[0]` is the
    /// normalised input.
    fn forward(&self, inputs: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let mut x = inputs.clone();
        for (r, mut row) in x.row_iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = (*v - self.in_shift[r]) / self.in_scale[r];
            }
        }
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut acts = vec![x];
        for layer in &self.layers {
            let mut a = &layer.w * acts.last().expect("non-empty");
            for mut col in a.column_iter_mut() {
                col += &layer.b;
            }
            let h = a.map(|v| layer.act.apply(v));
            pres.push(a);
            acts.push(h);
        }
        (pres, acts)
    }

    fn outputs(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(raw.nrows(), raw.ncols(), |r, c| raw[(r, c)] * self.out_scale[r] + self.out_shift[r])
    }

    pub(crate) fn mean_loss(&self, d: usize, inputs: &DMatrix<f64>, targets: &[&Target]) -> f64 {
        let (_, acts) = self.forward(inputs);
        let y = self.outputs(acts.last().expect("non-empty"));
        let total: f64 = (0..y.ncols())
            .map(|c| output_loss_grad(d, y.column(c).as_slice(), targets[c]).0)
            .sum();
        total / y.ncols() as f64
    }

    /// Mean loss over the batch and its gradient by backpropagation.
    pub(crate) fn loss_and_grad(&self, d: usize, inputs: &DMatrix<f64>, targets: &[&Target]) -> (f64, Grads) {
        let batch = inputs.ncols();
        let (pres, acts) = self.forward(inputs);
        let y = self.outputs(acts.last().expect("non-empty"));
        let inv_b = 1.0 / batch as f64;
        let mut total = 0.0;
        let mut delta = DMatrix::zeros(y.nrows(), batch);
        for c in 0..batch {
            let (l, g) = output_loss_grad(d, y.column(c).as_slice(), targets[c]);
            total += l;
            for (r, gv) in g.into_iter().enumerate() {
                delta[(r, c)] = gv * self.out_scale[r] * inv_b;
            }
        }
        let mut grads: Grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let pre = &pres[i];
            let post = &acts[i + 1];
            let da = DMatrix::from_fn(delta.nrows(), batch, |r, c| {
                delta[(r, c)] * activation_derivative(layer.act, pre[(r, c)], post[(r, c)])
            });
            let dw = &da * acts[i].transpose();
            let db = DVector::from_fn(da.nrows(), |r, _| da.row(r).sum());
            if i > 0 {
                delta = layer.w.tr_mul(&da);
            }
            grads.push((dw, db));
        }
        grads.reverse();
        (total * inv_b, grads)
    }

    fn into_mlp(self) -> Result<Mlp> {
        let n = self.layers.len();
        let mut out = Vec::with_capacity(n);
        for (i, mut layer) in self.layers.into_iter().enumerate() {
            if i == 0 {
                for c in 0..layer.w.ncols() {
                    let s = self.in_scale[c];
                    let shift = self.in_shift[c];
                    for r in 0..layer.w.nrows() {
                        layer.w[(r, c)] /= s;
                        layer.b[r] -= layer.w[(r, c)] * shift;
                    }
                }
            }
            if i == n - 1 {
                for r in 0..layer.w.nrows() {
                    let s = self.out_scale[r];
                    for c in 0..layer.w.ncols() {
                        layer.w[(r, c)] *= s;
                    }
                    layer.b[r] = layer.b[r] * s + self.out_shift[r];
                }
            }
            out.push(DenseLayer::new(layer.w, layer.b, layer.act)?);
        }
        Mlp::new(out)
    }
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &Network, lr: f64) -> Self {
        let zeros: Grads = net
            .layers
            .iter()
            .map(|l| (DMatrix::zeros(l.w.nrows(), l.w.ncols()), DVector::zeros(l.b.len())))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &Grads) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            for k in 0..gw.len() {
                update(&mut layer.w.as_mut_slice()[k], gw.as_slice()[k], &mut mw.as_mut_slice()[k], &mut vw.as_mut_slice()[k]);
            }
            for k in 0..gb.len() {
                update(&mut layer.b[k], gb[k], &mut mb[k], &mut vb[k]);
            }
        }
    }
}

fn columns(points: &[Vec<f64>], idx: &[usize]) -> DMatrix<f64> {
    let d = points[0].len();
    DMatrix::from_fn(d, idx.len(), |r, c| points[idx[c]][r])
}

fn mean_loss_chunked(net: &Network, d: usize, points: &[Vec<f64>], targets: &[Target], idx: &[usize]) -> f64 {
    let mut total = 0.0;
    for chunk in idx.chunks(1024) {
        let refs: Vec<&Target> = chunk.iter().map(|&i| &targets[i]).collect();
        total += net.mean_loss(d, &columns(points, chunk), &refs) * chunk.len() as f64;
    }
    total / idx.len() as f64
}

struct Prepared {
    points: Vec<Vec<f64>>,
    targets: Vec<Target>,
    skipped: usize,
    n_train: usize,
    net: Network,
}

/// Samples the region, evaluates the exact targets and builds the initial
/// network with its input and output normalisation.
fn prepare(exact: &MetricProvider, cfg: &TrainConfig) -> Result<Prepared> {
    cfg.validate()?;
    let d = exact.dim();
    if cfg.region.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cfg.region.dim(),
        });
    }

    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_rng.set_stream(0);
    let candidates: Vec<Vec<f64>> = (0..cfg.samples)
        .map(|_| {
            (0..d)
                .map(|i| sample_rng.random_range(cfg.region.lo[i]..cfg.region.hi[i]))
                .collect()
        })
        .collect();

    // Target generation may run in parallel; results stay in sample order.
    let evaluated: Vec<Option<Target>> = candidates
        .par_iter()
        .map(|z| {
            let z = DVector::from_column_slice(z);
            exact
                .metric_pair(&z)
                .ok()
                .and_then(|(g, h)| Target::new(g.into_matrix(), h.into_matrix()).ok())
        })
        .collect();
    let skipped = evaluated.iter().filter(|t| t.is_none()).count();
    if skipped * 100 > cfg.samples {
        return Err(Error::TooManyFailures {
            failed: skipped,
            total: cfg.samples,
        });
    }
    let (points, targets): (Vec<Vec<f64>>, Vec<Target>) = candidates
        .into_iter()
        .zip(evaluated)
        .filter_map(|(z, t)| t.map(|t| (z, t)))
        .unzip();

    let n = points.len();
    let n_val = (n / 10).max(1);
    let n_train = n - n_val;
    if n_train == 0 {
        return Err(Error::invalid("no training samples left after the validation split"));
    }

    let out_dim = 2 * triangle_len(d);
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(1);
    let sizes = [d, cfg.hidden[0], cfg.hidden[1], out_dim];
    let acts = [Activation::Tanh, Activation::Tanh, Activation::Identity];
    let mut net = Network::glorot(&sizes, &acts, &mut init_rng);
    for i in 0..d {
        net.in_shift[i] = 0.5 * (cfg.region.lo[i] + cfg.region.hi[i]);
        net.in_scale[i] = 0.5 * (cfg.region.hi[i] - cfg.region.lo[i]);
    }
    let flats: Vec<Vec<f64>> = targets[..n_train].iter().map(Target::flat).collect();
    for r in 0..out_dim {
        let mean = flats.iter().map(|f| f[r]).sum::<f64>() / n_train as f64;
        let var = flats.iter().map(|f| (f[r] - mean).powi(2)).sum::<f64>() / n_train as f64;
        let std = var.sqrt();
        net.out_shift[r] = mean;
        net.out_scale[r] = if std > 1e-9 * (1.0 + mean.abs()) { std } else { 1.0 };
    }

    Ok(Prepared {
        points,
        targets,
        skipped,
        n_train,
        net,
    })
}

/// Fits a two-hidden-layer tanh network to `(g, g⁻¹)` of `exact` over
/// `cfg.region` by mini-batch Adam. Deterministic for a given seed.
pub fn train(exact: &MetricProvider, cfg: &TrainConfig) -> Result<MetricNet> {
    let Prepared {
        points,
        targets,
        skipped,
        n_train,
        mut net,
    } = prepare(exact, cfg)?;
    let d = exact.dim();
    let val_idx: Vec<usize> = (n_train..points.len()).collect();
    let mut train_idx: Vec<usize> = (0..n_train).collect();

    let initial_val_loss = mean_loss_chunked(&net, d, &points, &targets, &val_idx);
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(2);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let progress = epoch as f64 / (cfg.epochs.max(2) - 1) as f64;
        adam.lr = cfg.final_learning_rate
            + 0.5 * (cfg.learning_rate - cfg.final_learning_rate) * (1.0 + (std::f64::consts::PI * progress).cos());
        train_idx.shuffle(&mut shuffle_rng);
        let mut running = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let refs: Vec<&Target> = batch.iter().map(|&i| &targets[i]).collect();
            let (l, grads) = net.loss_and_grad(d, &columns(&points, batch), &refs);
            if !l.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            running += l * batch.len() as f64;
            adam.step(&mut net, &grads);
        }
        let val_loss = mean_loss_chunked(&net, d, &points, &targets, &val_idx);
        history.push(EpochLoss {
            epoch: epoch + 1,
            train_loss: running / n_train as f64,
            val_loss,
        });
    }

    train_idx.sort_unstable();
    let train_loss = mean_loss_chunked(&net, d, &points, &targets, &train_idx);
    let val_loss = history.last().map(|h| h.val_loss).unwrap_or(initial_val_loss);
    let meta = TrainingMeta {
        samples: cfg.samples,
        skipped,
        epochs: cfg.epochs,
        train_loss,
        val_loss,
        initial_val_loss,
    };
    let mut model = MetricNet::new(net.into_mlp()?, cfg.region.clone(), meta)?;
    model.history = history;
    Ok(model)
}

/// Largest relative difference between the backpropagated gradient and a
/// central difference with step `h`, over every parameter of the initial
/// network on the first training batch.
pub fn gradient_check(exact: &MetricProvider, cfg: &TrainConfig, h: f64) -> Result<f64> {
    let Prepared {
        points,
        targets,
        n_train,
        net,
        ..
    } = prepare(exact, cfg)?;
    let d = exact.dim();
    let batch: Vec<usize> = (0..n_train.min(cfg.batch_size)).collect();
    let inputs = columns(&points, &batch);
    let refs: Vec<&Target> = batch.iter().map(|&i| &targets[i]).collect();
    let (_, grads) = net.loss_and_grad(d, &inputs, &refs);
    let mut worst = 0.0f64;
    for li in 0..net.layers.len() {
        let nw = net.layers[li].w.len();
        for k in 0..nw + net.layers[li].b.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let analytic = if k < nw {
                plus.layers[li].w.as_mut_slice()[k] += h;
                minus.layers[li].w.as_mut_slice()[k] -= h;
                grads[li].0.as_slice()[k]
            } else {
                plus.layers[li].b[k - nw] += h;
                minus.layers[li].b[k - nw] -= h;
                grads[li].1[k - nw]
            };
            let fd = (plus.mean_loss(d, &inputs, &refs) - minus.mean_loss(d, &inputs, &refs)) / (2.0 * h);
            worst = worst.max((analytic - fd).abs() / (analytic.abs() + fd.abs()).max(1e-6));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothmap::Decoder;

    fn spd(rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(2, 2) * 0.5
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for acts in [
            [Activation::Tanh, Activation::Tanh, Activation::Identity],
            [Activation::Softplus, Activation::Sigmoid, Activation::Identity],
        ] {
            let mut net = Network::glorot(&[2, 5, 4, 6], &acts, &mut rng);
            for layer in &mut net.layers {
                layer.b.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            }
            net.in_shift = DVector::from_vec(vec![0.1, -0.2]);
            net.in_scale = DVector::from_vec(vec![1.5, 0.7]);
            net.out_shift = DVector::from_vec(vec![1.0, 0.1, 1.0, 1.0, -0.1, 1.0]);
            net.out_scale = DVector::from_vec(vec![0.5, 0.2, 0.3, 0.6, 0.1, 0.4]);
            let inputs = DMatrix::from_fn(2, 7, |_, _| rng.random_range(-1.0..1.0));
            let targets: Vec<Target> = (0..7)
                .map(|_| {
                    let g = spd(&mut rng);
                    let h = g.clone().try_inverse().unwrap();
                    Target::new(g, h).unwrap()
                })
                .collect();
            let refs: Vec<&Target> = targets.iter().collect();
            let (_, grads) = net.loss_and_grad(2, &inputs, &refs);

            let h = 1e-6;
            for li in 0..net.layers.len() {
                let nw = net.layers[li].w.len();
                let nb = net.layers[li].b.len();
                for k in 0..nw + nb {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    let analytic = if k < nw {
                        plus.layers[li].w.as_mut_slice()[k] += h;
                        minus.layers[li].w.as_mut_slice()[k] -= h;
                        grads[li].0.as_slice()[k]
                    } else {
                        plus.layers[li].b[k - nw] += h;
                        minus.layers[li].b[k - nw] -= h;
                        grads[li].1[k - nw]
                    };
                    let fd = (plus.mean_loss(2, &inputs, &refs) - minus.mean_loss(2, &inputs, &refs)) / (2.0 * h);
                    let rel = (analytic - fd).abs() / (analytic.abs() + fd.abs()).max(1e-6);
                    assert!(rel < 1e-4, "layer {li} param {k}: {analytic} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn folding_preserves_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = Network::glorot(&[2, 4, 3, 6], &[Activation::Tanh, Activation::Tanh, Activation::Identity], &mut rng);
        net.in_shift = DVector::from_vec(vec![0.5, -1.0]);
        net.in_scale = DVector::from_vec(vec![2.0, 0.25]);
        net.out_shift = DVector::from_element(6, 0.3);
        net.out_scale = DVector::from_fn(6, |i, _| 1.0 + i as f64);
        let x = DMatrix::from_column_slice(2, 1, &[0.3, -0.8]);
        let (_, acts) = net.forward(&x);
        let expected = net.outputs(acts.last().unwrap());
        let mlp = net.into_mlp().unwrap();
        let got = mlp.eval(&[0.3, -0.8]);
        for (a, b) in got.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let p = MetricProvider::exact(Decoder::sphere(1.0).unwrap());
        let cfg = TrainConfig {
            samples: 400,
            epochs: 5,
            batch_size: 32,
            hidden: [8, 8],
            seed: 3,
            ..TrainConfig::new(Region::cube(2, 1.0).unwrap())
        };
        let a = train(&p, &cfg).unwrap();
        let b = train(&p, &cfg).unwrap();
        assert_eq!(a.network(), b.network());
        assert!(a.meta.val_loss < a.meta.initial_val_loss);
        assert_eq!(a.history.len(), 5);
    }

    #[test]
    fn invalid_config_rejected() {
        let p = MetricProvider::exact(Decoder::sphere(1.0).unwrap());
        let mut cfg = TrainConfig::new(Region::cube(2, 1.0).unwrap());
        cfg.samples = 3;
        assert!(train(&p, &cfg).is_err());
        let cfg = TrainConfig::new(Region::cube(3, 1.0).unwrap());
        assert!(matches!(train(&p, &cfg), Err(Error::DimensionMismatch { .. })));
    }
}
