//! One function per subcommand. Each resolves its parameters, calls a single
//! library operation and writes that operation's documented outputs.

use lms_core::geometry::{
    curvature, exp_map, log_map, parallel_transport, Curve, MetricProvider, DEFAULT_STEPS,
};
use lms_core::io::numbered;
use lms_core::metricnet::{benchmark as run_benchmark, train, GeodesicWorkload, TrainConfig};
use lms_core::smoothmap::{decode, project_to_latent, stereographic_guess, Decoder, ProjectionOptions};
use lms_core::stats::{frechet_mean, pga as run_pga, principal_curve, FrechetOptions};
use lms_core::stochastics::{
    ml_mean, simulate_bm, simulate_bridge, transition_density, Diffusion, Drift, MleOptions, PathSeed,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{sub_seed, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

fn cols(parts: &[&[String]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn diffusion(cfg: &RunConfig, horizon: f64, steps: usize) -> CliResult<Diffusion> {
    let drift = if cfg.paper_drift.unwrap_or(false) {
        Drift::Paper
    } else {
        Drift::Standard
    };
    Ok(Diffusion::new(cfg.horizon.unwrap_or(horizon), cfg.steps.unwrap_or(steps))?.with_drift(drift))
}

fn path_count(n: usize) -> CliResult<u32> {
    u32::try_from(n).map_err(|_| CliError::config(format!("path count {n} too large")))
}

pub fn gen_sphere_data(cfg: &RunConfig, seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let radius = cfg.radius.unwrap_or(1.0);
    let f = Decoder::sphere(radius)?;
    let p = MetricProvider::exact(f.clone());
    let x0 = cfg.point("start", &cfg.start, 2, Some(vec![0.0, 0.0]))?;
    let diff = diffusion(cfg, 0.5, 100)?;
    let n = path_count(cfg.samples.unwrap_or(1000))?;
    let s = sub_seed(seed, "gen-sphere-data");
    let latent: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|i| Ok(simulate_bm(&p, &x0, &diff, PathSeed::new(s, 0, i))?.endpoint().clone()))
        .collect::<CliResult<_>>()?;
    let ambient = latent.iter().map(|z| decode(&f, z)).collect::<Result<Vec<_>, _>>()?;
    out.csv("latent.csv", &numbered("z", 2), latent.iter().map(|z| z.as_slice().to_vec()))?;
    out.csv("ambient.csv", &numbered("x", 3), ambient.iter().map(|x| x.as_slice().to_vec()))?;
    Ok(json!({ "radius": radius, "start": x0.as_slice(), "diffusion": diff, "samples": n, "stream_seed": s }))
}

pub fn curvature_grid(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    if p.dim() != 2 {
        return Err(CliError::config("curvature-grid needs a two-dimensional latent space"));
    }
    let (lo, hi) = (cfg.grid_lo.unwrap_or(-2.0), cfg.grid_hi.unwrap_or(2.0));
    let n = cfg.grid_n.unwrap_or(21);
    if n < 2 || !(lo < hi) {
        return Err(CliError::config("grid needs grid_n >= 2 and grid_lo < grid_hi"));
    }
    let at = |i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let rows: Vec<Vec<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let z = DVector::from_vec(vec![at(k / n), at(k % n)]);
            let c = curvature(&p, &z)?;
            Ok(vec![z[0], z[1], c.scalar, c.ricci_min_eig])
        })
        .collect::<CliResult<_>>()?;
    out.csv("curvature.csv", &names(&["z1", "z2", "scalar", "ricci_min_eig"]), rows)?;
    Ok(json!({ "grid_lo": lo, "grid_hi": hi, "grid_n": n, "fd_step": p.fd_step() }))
}

pub fn geodesic(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let start = cfg.point("start", &cfg.start, d, None)?;
    let steps = cfg.geodesic_steps.unwrap_or(DEFAULT_STEPS);
    let velocity = match (&cfg.velocity, &cfg.target) {
        (Some(_), _) => cfg.point("velocity", &cfg.velocity, d, None)?,
        (None, Some(_)) => {
            let target = cfg.point("target", &cfg.target, d, None)?;
            let v = log_map(&p, &start, &target)?.vec;
            let dist = p.metric(&start)?.norm(&v);
            out.json("log.json", &json!({ "velocity": v.as_slice(), "distance": dist }))?;
            v
        }
        (None, None) => return Err(CliError::config("geodesic needs a velocity or a target")),
    };
    let path = exp_map(&p, &start, &velocity, steps)?;
    let rows = (0..path.len()).map(|k| {
        let mut r = vec![path.times[k]];
        r.extend(path.points[k].iter());
        r.extend(path.velocities[k].iter());
        r
    });
    out.csv("geodesic.csv", &cols(&[&names(&["t"]), &numbered("z", d), &numbered("v", d)]), rows)?;
    Ok(json!({ "start": start.as_slice(), "velocity": velocity.as_slice(), "geodesic_steps": steps }))
}

pub fn transport(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let start = cfg.point("start", &cfg.start, d, None)?;
    let velocity = cfg.point("velocity", &cfg.velocity, d, None)?;
    let vector = cfg.point("vector", &cfg.vector, d, None)?;
    let steps = cfg.geodesic_steps.unwrap_or(DEFAULT_STEPS);
    let path = exp_map(&p, &start, &velocity, steps)?;
    let moved = parallel_transport(&p, Curve::Geodesic(&path), &vector)?;
    let rows = (0..path.len()).map(|k| {
        let mut r = vec![path.times[k]];
        r.extend(path.points[k].iter());
        r.extend(moved[k].iter());
        r
    });
    out.csv("transport.csv", &cols(&[&names(&["t"]), &numbered("z", d), &numbered("v", d)]), rows)?;
    Ok(json!({ "start": start.as_slice(), "velocity": velocity.as_slice(), "vector": vector.as_slice(), "geodesic_steps": steps }))
}

fn path_rows(id: usize, times: &[f64], points: &[DVector<f64>]) -> Vec<Vec<f64>> {
    times
        .iter()
        .zip(points)
        .map(|(t, z)| {
            let mut r = vec![id as f64, *t];
            r.extend(z.iter());
            r
        })
        .collect()
}

pub fn bm(cfg: &RunConfig, seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let start = cfg.point("start", &cfg.start, d, None)?;
    let diff = diffusion(cfg, 1.0, 100)?;
    let n = path_count(cfg.n_paths.unwrap_or(10))?;
    let s = sub_seed(seed, "bm");
    let paths = (0..n)
        .into_par_iter()
        .map(|i| simulate_bm(&p, &start, &diff, PathSeed::new(s, 0, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = paths
        .iter()
        .enumerate()
        .flat_map(|(i, path)| path_rows(i, &path.times, &path.points));
    out.csv("paths.csv", &cols(&[&names(&["path_id", "t"]), &numbered("z", d)]), rows)?;
    Ok(json!({ "start": start.as_slice(), "diffusion": diff, "n_paths": n, "stream_seed": s }))
}

pub fn bridge(cfg: &RunConfig, seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let start = cfg.point("start", &cfg.start, d, None)?;
    let target = cfg.point("target", &cfg.target, d, None)?;
    let diff = diffusion(cfg, 1.0, 100)?;
    let n = path_count(cfg.n_paths.unwrap_or(10))?;
    let s = sub_seed(seed, "bridge");
    let bridges = (0..n)
        .into_par_iter()
        .map(|i| simulate_bridge(&p, &start, &target, &diff, PathSeed::new(s, 0, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = bridges
        .iter()
        .enumerate()
        .flat_map(|(i, b)| path_rows(i, &b.path.times, &b.path.points));
    out.csv("bridges.csv", &cols(&[&names(&["path_id", "t"]), &numbered("z", d)]), rows)?;
    out.csv(
        "bridge_weights.csv",
        &names(&["path_id", "log_phi", "terminal_gap"]),
        bridges.iter().enumerate().map(|(i, b)| vec![i as f64, b.log_phi, b.terminal_gap]),
    )?;
    Ok(json!({ "start": start.as_slice(), "target": target.as_slice(), "diffusion": diff, "n_paths": n, "stream_seed": s }))
}

pub fn density(cfg: &RunConfig, seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let start = cfg.point("start", &cfg.start, d, None)?;
    let target = cfg.point("target", &cfg.target, d, None)?;
    let diff = diffusion(cfg, 1.0, 100)?;
    let n = cfg.n_paths.unwrap_or(1000);
    let s = sub_seed(seed, "density");
    let est = transition_density(&p, &start, &target, &diff, n, s)?;
    out.json("density.json", &est)?;
    Ok(json!({ "start": start.as_slice(), "target": target.as_slice(), "diffusion": diff, "n_paths": n }))
}

fn frechet_options(cfg: &RunConfig) -> FrechetOptions {
    let mut opts = FrechetOptions::default();
    opts.step = cfg.frechet_step.unwrap_or(opts.step);
    opts.tol = cfg.frechet_tol.unwrap_or(opts.tol);
    opts.max_iter = cfg.frechet_max_iter.unwrap_or(opts.max_iter);
    if let Some(steps) = cfg.geodesic_steps {
        opts.log.steps = steps;
    }
    opts
}

pub fn frechet(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let data = cfg.latent_data()?;
    let opts = frechet_options(cfg);
    let r = frechet_mean(&p, &data, &opts)?;
    out.json("frechet.json", &r)?;
    Ok(json!({ "options": opts, "n_data": data.len() }))
}

pub fn mlmean(cfg: &RunConfig, seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let data = cfg.latent_data()?;
    let diff = diffusion(cfg, 1.0, 50)?;
    let n = cfg.n_paths.unwrap_or(100);
    let mut opts = MleOptions::default();
    opts.tol = cfg.ml_tol.unwrap_or(opts.tol);
    opts.max_iter = cfg.ml_max_iter.unwrap_or(opts.max_iter);
    opts.fd_step = cfg.ml_fd_step.unwrap_or(opts.fd_step);
    let x0 = match &cfg.start {
        Some(_) => Some(cfg.point("start", &cfg.start, d, None)?),
        None => None,
    };
    let s = sub_seed(seed, "mlmean");
    let r = ml_mean(&p, &data, &diff, n, &opts, s, x0.as_ref())?;
    out.json("mlmean.json", &r)?;
    let mut rows = vec![{
        let mut r0 = vec![0.0, r.initial_log_likelihood];
        r0.extend(&r.initial);
        r0
    }];
    for (i, step) in r.trace.iter().enumerate() {
        let mut row = vec![(i + 1) as f64, step.log_likelihood];
        row.extend(&step.x);
        rows.push(row);
    }
    out.csv("mlmean_trace.csv", &cols(&[&names(&["iteration", "log_likelihood"]), &numbered("z", d)]), rows)?;
    Ok(json!({ "diffusion": diff, "n_paths": n, "options": opts, "n_data": data.len() }))
}

pub fn pga(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.provider()?;
    let d = p.dim();
    let data = cfg.latent_data()?;
    let opts = frechet_options(cfg);
    let mu = match &cfg.start {
        Some(_) => Some(cfg.point("start", &cfg.start, d, None)?),
        None => None,
    };
    let r = run_pga(&p, &data, mu.as_ref(), &opts)?;
    out.json(
        "pga.json",
        &json!({
            "mu": r.mu,
            "directions": r.directions,
            "variances": r.variances,
            "total_variance": r.total_variance,
        }),
    )?;
    out.csv("pga_coords.csv", &numbered("c", d), r.coords.iter().cloned())?;
    if let Some(ts) = &cfg.curve_ts {
        let f = cfg.decoder()?;
        let k = cfg.component.unwrap_or(0);
        let curve = principal_curve(&p, &f, &r, k, ts)?;
        let n = f.ambient_dim();
        let rows = curve.iter().map(|c| {
            let mut row = vec![c.t];
            row.extend(c.latent.iter());
            row.extend(c.ambient.iter());
            row
        });
        out.csv("principal_curve.csv", &cols(&[&names(&["t"]), &numbered("z", d), &numbered("x", n)]), rows)?;
    }
    Ok(json!({ "options": opts, "n_data": data.len(), "component": cfg.component, "curve_ts": cfg.curve_ts }))
}

pub fn train_metricnet(cfg: &RunConfig, seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let p = cfg.exact_provider()?;
    let d = p.dim();
    let data = match &cfg.data {
        Some(_) => Some(cfg.latent_data()?),
        None => None,
    };
    let region = cfg.region(data.as_deref(), d)?;
    let mut tc = TrainConfig::new(region);
    tc.samples = cfg.train_samples.unwrap_or(tc.samples);
    tc.batch_size = cfg.batch_size.unwrap_or(tc.batch_size);
    tc.learning_rate = cfg.learning_rate.unwrap_or(tc.learning_rate);
    tc.final_learning_rate = cfg.final_learning_rate.unwrap_or(tc.learning_rate);
    tc.epochs = cfg.epochs.unwrap_or(tc.epochs);
    if let Some(h) = &cfg.hidden {
        tc.hidden = <[usize; 2]>::try_from(h.as_slice())
            .map_err(|_| CliError::config("hidden must list exactly two layer sizes"))?;
    }
    tc.seed = sub_seed(seed, "train-metricnet");
    let model = train(&p, &tc)?;
    out.text("metricnet.json", &model.to_json())?;
    out.csv(
        "training_log.csv",
        &names(&["epoch", "train_loss", "val_loss"]),
        model.history.iter().map(|h| vec![h.epoch as f64, h.train_loss, h.val_loss]),
    )?;
    Ok(json!({ "train": tc, "meta": model.meta }))
}

pub fn benchmark(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let exact = cfg.exact_provider()?;
    let learned = cfg.learned_provider()?;
    let d = exact.dim();
    let start = cfg.point("start", &cfg.start, d, Some(vec![0.0; d]))?;
    let velocity = cfg.point("velocity", &cfg.velocity, d, None)?;
    let mut w = GeodesicWorkload::new(start, velocity);
    w.steps = cfg.geodesic_steps.unwrap_or(DEFAULT_STEPS);
    w.repeats = cfg.repeats.unwrap_or(1);
    let report = run_benchmark(&exact, &learned, &w)?;
    out.json("benchmark.json", &report)?;
    Ok(json!({ "start": w.start.as_slice(), "velocity": w.velocity.as_slice(), "steps": w.steps, "repeats": w.repeats }))
}

pub fn project(cfg: &RunConfig, _seed: u64, out: &mut OutDir) -> CliResult<Value> {
    let f = cfg.decoder()?;
    let d = f.latent_dim();
    let path = cfg.ambient.as_ref().ok_or_else(|| CliError::config("missing ambient data file (ambient)"))?;
    let ys = lms_core::io::read_points_file(path)?;
    let fixed = match &cfg.start {
        Some(_) => Some(cfg.point("start", &cfg.start, d, None)?),
        None => None,
    };
    let opts = ProjectionOptions::default();
    let rows = ys
        .par_iter()
        .map(|y| {
            let z0 = match (&fixed, &f) {
                (Some(z), _) => z.clone(),
                (None, Decoder::Sphere { radius }) => stereographic_guess(*radius, y),
                (None, _) => DVector::zeros(d),
            };
            let r = project_to_latent(&f, y, &z0, &opts)?;
            let mut row: Vec<f64> = r.z.iter().copied().collect();
            row.push(r.residual);
            Ok(row)
        })
        .collect::<CliResult<Vec<_>>>()?;
    out.csv("projected.csv", &cols(&[&numbered("z", d), &names(&["residual"])]), rows)?;
    Ok(json!({ "n_points": ys.len() }))
}
