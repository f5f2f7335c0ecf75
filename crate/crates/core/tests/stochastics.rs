use std::f64::consts::PI;

use lms_core::geometry::MetricProvider;
use lms_core::smoothmap::{decode, Decoder};
use lms_core::stochastics::{log_likelihood, simulate_bm, simulate_bridge, transition_density, Diffusion, PathSeed};
use nalgebra::{dvector, DMatrix, DVector};

fn sphere() -> (Decoder, MetricProvider) {
    let f = Decoder::sphere(1.0).unwrap();
    (f.clone(), MetricProvider::exact(f))
}

/// Heat kernel of the unit sphere at zero angle, pushed to the chart at the
/// pole where sqrt(det g) = 4.
fn pole_kernel(t: f64) -> f64 {
    let s: f64 = (0..20).map(|l| (2 * l + 1) as f64 * (-((l * (l + 1)) as f64) * t / 2.0).exp()).sum();
    4.0 * s / (4.0 * PI)
}

#[test]
fn height_decays_like_the_first_eigenfunction() {
    // Δ cos θ = −2 cos θ, so E[cos θ_T] = exp(−T) under the generator Δ/2.
    let (f, p) = sphere();
    let t = 0.5;
    let diff = Diffusion::new(t, 100).unwrap();
    let n = 2000;
    let heights: Vec<f64> = (0..n)
        .map(|i| {
            let z = simulate_bm(&p, &dvector![0.0, 0.0], &diff, PathSeed::new(21, 0, i)).unwrap();
            decode(&f, z.endpoint()).unwrap()[2]
        })
        .collect();
    let mean = heights.iter().sum::<f64>() / n as f64;
    let var = heights.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - (-t).exp()).abs() < 4.0 * se + 5e-3, "{mean} vs {}", (-t).exp());
}

#[test]
fn density_at_the_pole_matches_the_heat_kernel() {
    let (_, p) = sphere();
    let t = 0.25;
    let z = dvector![0.0, 0.0];
    let est = transition_density(&p, &z, &z, &Diffusion::new(t, 200).unwrap(), 1000, 4).unwrap();
    let oracle = pole_kernel(t);
    assert!(((est.value - oracle) / oracle).abs() < 0.1, "{} vs {oracle}", est.value);
    assert_eq!(est.n_failed, 0);
}

#[test]
fn unforced_bridge_gap_shrinks_with_the_step() {
    let (_, p) = sphere();
    let x = dvector![0.1, -0.2];
    let v = dvector![0.4, 0.3];
    let mean_sq_gap = |steps: usize| {
        let diff = Diffusion::new(0.5, steps).unwrap();
        let n = 400;
        (0..n)
            .map(|i| simulate_bridge(&p, &x, &v, &diff, PathSeed::new(8, 0, i)).unwrap().terminal_gap.powi(2))
            .sum::<f64>()
            / n as f64
    };
    let ratio = mean_sq_gap(25) / mean_sq_gap(100);
    assert!((2.5..6.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn flat_bridge_midpoint_statistics() {
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    let p = MetricProvider::exact(Decoder::linear(a).unwrap());
    let (x, v) = (dvector![0.0, 0.0], dvector![1.0, -1.0]);
    let t = 1.0;
    let diff = Diffusion::new(t, 40).unwrap();
    let n = 3000;
    let mids: Vec<DVector<f64>> = (0..n)
        .map(|i| simulate_bridge(&p, &x, &v, &diff, PathSeed::new(2, 1, i)).unwrap().path.points[20].clone())
        .collect();
    let mean = mids.iter().fold(DVector::zeros(2), |acc, z| acc + z) / n as f64;
    // Brownian bridge at t/2 has covariance (t/4)·g⁻¹ = diag(1/4, 1/16).
    let var: Vec<f64> = (0..2).map(|k| mids.iter().map(|z| (z[k] - mean[k]).powi(2)).sum::<f64>() / n as f64).collect();
    let expected = [0.25, 0.0625];
    for k in 0..2 {
        let centre = 0.5 * (x[k] + v[k]);
        assert!((mean[k] - centre).abs() < 4.0 * (expected[k] / n as f64).sqrt());
        assert!((var[k] - expected[k]).abs() < 4.0 * (2.0 / n as f64).sqrt() * expected[k]);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (_, p) = sphere();
    let diff = Diffusion::new(0.5, 30).unwrap();
    let data = vec![dvector![0.2, 0.1], dvector![-0.3, 0.4], dvector![0.0, -0.5]];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let d = transition_density(&p, &data[0], &data[1], &diff, 64, 12).unwrap();
            let l = log_likelihood(&p, &dvector![0.05, 0.0], &data, &diff, 32, 12).unwrap();
            (d.value.to_bits(), d.stderr.to_bits(), l.to_bits())
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn path_streams_are_independent_of_order() {
    let (_, p) = sphere();
    let diff = Diffusion::new(1.0, 20).unwrap();
    let z = dvector![0.0, 0.0];
    let forward: Vec<_> = (0..5).map(|i| simulate_bm(&p, &z, &diff, PathSeed::new(1, 0, i)).unwrap().points).collect();
    let backward: Vec<_> = (0..5).rev().map(|i| simulate_bm(&p, &z, &diff, PathSeed::new(1, 0, i)).unwrap().points).collect();
    for (a, b) in forward.iter().zip(backward.iter().rev()) {
        assert_eq!(a, b);
    }
    assert_ne!(forward[0], forward[1]);
}
