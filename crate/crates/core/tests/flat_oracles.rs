//! Euclidean and linear decoders, where every quantity has a closed form.

use lms_core::geometry::{christoffel, curvature, distance, exp_map, log_map, parallel_transport, Curve, MetricProvider};
use lms_core::smoothmap::Decoder;
use lms_core::stats::{frechet_mean, pga, FrechetOptions};
use lms_core::stochastics::{ml_mean, simulate_bm, transition_density, Diffusion, MleOptions, PathSeed};
use nalgebra::{dvector, DMatrix, DVector};

/// Orthonormal 3×2 frame, rotated away from the coordinate axes.
fn rotated_plane() -> MetricProvider {
    let (c, s) = (0.6f64, 0.8f64);
    let a = DMatrix::from_row_slice(3, 2, &[c, 0.0, s * 0.6, 0.8, -s * 0.8, 0.6]);
    let gram = a.transpose() * &a;
    assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-15);
    MetricProvider::exact(Decoder::linear(a).unwrap())
}

fn skewed() -> (MetricProvider, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(3, 2, &[2.0, 0.5, 0.0, 1.0, 1.0, -1.0]);
    (MetricProvider::exact(Decoder::linear(a.clone()).unwrap()), a)
}

#[test]
fn christoffels_and_curvature_vanish() {
    let (skew, _) = skewed();
    for p in [rotated_plane(), skew] {
        for z in [dvector![0.0, 0.0], dvector![3.0, -1.5], dvector![-20.0, 7.0]] {
            let gam = christoffel(&p, &z).unwrap();
            assert!(gam.as_slice().iter().all(|v| v.abs() < 1e-8), "{:?}", gam.as_slice());
            assert!(curvature(&p, &z).unwrap().scalar.abs() < 1e-6);
        }
    }
}

#[test]
fn geodesics_are_straight_lines() {
    let p = rotated_plane();
    let z = dvector![0.3, -0.7];
    let v = dvector![1.25, 2.5];
    let path = exp_map(&p, &z, &v, 100).unwrap();
    for (t, x) in path.times.iter().zip(&path.points) {
        assert!((x - (&z + &v * *t)).amax() < 1e-8);
    }
    for w in &path.velocities {
        assert!((w - &v).amax() < 1e-8);
    }
}

#[test]
fn log_and_distance_use_the_gram_matrix() {
    let (p, a) = skewed();
    let z1 = dvector![0.5, 1.0];
    let z2 = dvector![-1.0, 2.5];
    let v = log_map(&p, &z1, &z2).unwrap().vec;
    assert!((&v - (&z2 - &z1)).amax() < 1e-8);
    let expected = (&a * (&z2 - &z1)).norm();
    assert!((distance(&p, &z1, &z2).unwrap() - expected).abs() < 1e-8);
}

#[test]
fn transport_is_the_identity() {
    let (p, _) = skewed();
    let path = exp_map(&p, &dvector![0.0, 0.0], &dvector![1.0, -2.0], 50).unwrap();
    let w = dvector![0.3, 0.4];
    for u in parallel_transport(&p, Curve::Geodesic(&path), &w).unwrap() {
        assert!((u - &w).amax() < 1e-8);
    }
}

#[test]
fn frechet_mean_is_the_arithmetic_mean() {
    let (p, _) = skewed();
    let data: Vec<DVector<f64>> = (0..12)
        .map(|i| {
            let t = i as f64;
            dvector![(1.3 * t).sin() * 2.0, (0.7 * t).cos() - 0.5 * t / 12.0]
        })
        .collect();
    let arith = data.iter().fold(DVector::zeros(2), |acc, z| acc + z) / data.len() as f64;
    let r = frechet_mean(&p, &data, &FrechetOptions::default()).unwrap();
    assert!((DVector::from_vec(r.mean) - arith).amax() < 1e-6);
}

/// Leading eigenvector of a symmetric 2×2 matrix in closed form.
fn leading_direction(m: &DMatrix<f64>) -> (f64, f64, DVector<f64>) {
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    let v = if b.abs() > 1e-15 { dvector![l1 - d, b] } else if a >= d { dvector![1.0, 0.0] } else { dvector![0.0, 1.0] };
    (l1, l2, v.normalize())
}

#[test]
fn pga_matches_pca() {
    let p = rotated_plane();
    let data: Vec<DVector<f64>> = (0..40)
        .map(|i| {
            let t = i as f64 * 0.37;
            let u = (t * 3.1).sin();
            dvector![1.0 + 2.0 * t.cos() + 0.3 * u, -0.5 + 1.0 * t.cos() - 0.4 * u]
        })
        .collect();
    let n = data.len() as f64;
    let mean = data.iter().fold(DVector::zeros(2), |acc, z| acc + z) / n;
    let cov = data.iter().fold(DMatrix::zeros(2, 2), |acc, z| acc + (z - &mean) * (z - &mean).transpose()) / n;
    let (l1, l2, v1) = leading_direction(&cov);

    let r = pga(&p, &data, None, &FrechetOptions::default()).unwrap();
    assert!((r.variances[0] - l1).abs() < 1e-8 && (r.variances[1] - l2).abs() < 1e-8);
    let got = r.direction(0).unwrap();
    let angle = got.dot(&v1).abs().min(1.0).acos();
    assert!(angle < 1e-6, "angle {angle}");
    for (c, z) in r.coords.iter().zip(&data) {
        assert!((c[0] - (z - &mean).dot(&got)).abs() < 1e-6);
    }
}

#[test]
fn density_is_the_gaussian_kernel() {
    let (p, a) = skewed();
    let g = a.transpose() * &a;
    let x = dvector![0.2, -0.1];
    let v = dvector![0.5, 0.3];
    let t = 0.7;
    let diff = Diffusion::new(t, 20).unwrap();
    let est = transition_density(&p, &x, &v, &diff, 500, 5).unwrap();
    let dz = &v - &x;
    let q = (dz.transpose() * &g * &dz)[0];
    let oracle = g.determinant().sqrt() / (2.0 * std::f64::consts::PI * t) * (-q / (2.0 * t)).exp();
    assert!((est.value - oracle).abs() < 1e-12 * oracle, "{} vs {oracle}", est.value);
}

#[test]
fn brownian_endpoints_have_covariance_t_times_cometric() {
    let (p, a) = skewed();
    let ginv = (a.transpose() * &a).try_inverse().unwrap();
    let t = 0.5;
    let diff = Diffusion::new(t, 10).unwrap();
    let x = dvector![1.0, 1.0];
    let n = 4000;
    let ends: Vec<DVector<f64>> = (0..n)
        .map(|i| simulate_bm(&p, &x, &diff, PathSeed::new(9, 0, i)).unwrap().endpoint().clone())
        .collect();
    let mean = ends.iter().fold(DVector::zeros(2), |acc, z| acc + z) / n as f64;
    let cov = ends.iter().fold(DMatrix::zeros(2, 2), |acc, z| acc + (z - &mean) * (z - &mean).transpose()) / n as f64;
    let expected = ginv * t;
    for i in 0..2 {
        let sd = (expected[(i, i)] / n as f64).sqrt();
        assert!((mean[i] - x[i]).abs() < 4.0 * sd);
    }
    // Sample-covariance entries have relative standard error about sqrt(2/n).
    let tol = 4.0 * (2.0 / n as f64).sqrt() * expected.amax();
    assert!((cov - &expected).amax() < tol);
}

#[test]
fn ml_mean_of_symmetric_points_is_the_centre() {
    let p = rotated_plane();
    let data = vec![dvector![0.5, 0.0], dvector![-0.5, 0.0], dvector![0.0, 0.5], dvector![0.0, -0.5]];
    let diff = Diffusion::new(1.0, 20).unwrap();
    let r = ml_mean(&p, &data, &diff, 50, &MleOptions::default(), 3, Some(&dvector![0.3, -0.2])).unwrap();
    assert!(DVector::from_vec(r.mean).norm() < 0.02);
}
