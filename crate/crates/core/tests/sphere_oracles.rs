//! The unit sphere through inverse stereographic projection.

use std::f64::consts::PI;

use lms_core::geometry::{curvature, distance, exp_endpoint, exp_map, log_map, parallel_transport, Curve, MetricProvider};
use lms_core::smoothmap::{decode, project_to_latent, stereographic_guess, Decoder, ProjectionOptions};
use lms_core::stats::{frechet_mean, principal_curve, pga, FrechetOptions};
use nalgebra::{dvector, DVector};

fn sphere(radius: f64) -> (Decoder, MetricProvider) {
    let f = Decoder::sphere(radius).unwrap();
    (f.clone(), MetricProvider::exact(f))
}

/// Great-circle distance between the images of two latent points.
fn arc(f: &Decoder, radius: f64, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (x, y) = (decode(f, a).unwrap(), decode(f, b).unwrap());
    radius * (x.dot(&y) / (radius * radius)).clamp(-1.0, 1.0).acos()
}

#[test]
fn conformal_factor() {
    let (_, p) = sphere(1.0);
    for z in [dvector![0.0f64, 0.0], dvector![0.4, -1.1], dvector![2.0, 2.0]] {
        let lambda = 4.0 / (1.0 + z.norm_squared()).powi(2);
        let g = p.metric(&z).unwrap();
        assert!((g.matrix()[(0, 0)] - lambda).abs() < 1e-14 && g.matrix()[(0, 1)].abs() < 1e-14);
    }
}

#[test]
fn scalar_curvature_scales_with_radius() {
    for r in [1.0, 2.0] {
        let (_, p) = sphere(r);
        for z in [dvector![0.0, 0.0], dvector![1.5, -0.5], dvector![-2.0, 2.0]] {
            let c = curvature(&p, &z).unwrap();
            assert!((c.scalar - 2.0 / (r * r)).abs() < 1e-3, "R={r} z={z}: {}", c.scalar);
            assert!((c.ricci_min_eig - 1.0 / (r * r)).abs() < 1e-3);
        }
    }
}

#[test]
fn quarter_turn_reaches_the_equator() {
    let (_, p) = sphere(1.0);
    let end = exp_endpoint(&p, &dvector![0.0, 0.0], &dvector![PI / 4.0, 0.0], 100).unwrap();
    assert!((&end - dvector![1.0, 0.0]).amax() < 1e-4, "{end}");
}

#[test]
fn geodesic_speed_is_constant() {
    let (_, p) = sphere(1.0);
    let path = exp_map(&p, &dvector![0.3, -0.2], &dvector![0.5, 0.9], 100).unwrap();
    let speeds: Vec<f64> = path
        .points
        .iter()
        .zip(&path.velocities)
        .map(|(z, v)| p.metric(z).unwrap().norm(v))
        .collect();
    let s0 = speeds[0];
    assert!(speeds.iter().all(|s| (s - s0).abs() < 1e-6 * s0));
}

#[test]
fn log_exp_round_trip_and_great_circle_distance() {
    let (f, p) = sphere(1.0);
    let pairs = [
        (dvector![0.0, 0.0], dvector![0.5, 0.2]),
        (dvector![-0.7, 0.4], dvector![0.9, 0.6]),
        (dvector![1.2, -0.3], dvector![-0.1, -1.4]),
    ];
    for (a, b) in pairs {
        let v = log_map(&p, &a, &b).unwrap().vec;
        let back = exp_endpoint(&p, &a, &v, 100).unwrap();
        assert!((back - &b).amax() < 1e-5);
        let d = distance(&p, &a, &b).unwrap();
        assert!((d - arc(&f, 1.0, &a, &b)).abs() < 1e-5, "{d} vs {}", arc(&f, 1.0, &a, &b));
    }
}

#[test]
fn transport_preserves_norm_and_angle() {
    let (_, p) = sphere(1.0);
    let path = exp_map(&p, &dvector![-0.5, 0.5], &dvector![0.8, 0.3], 100).unwrap();
    let w = dvector![0.2, -0.6];
    let moved = parallel_transport(&p, Curve::Geodesic(&path), &w).unwrap();
    let g0 = p.metric(&path.points[0]).unwrap();
    let (n0, a0) = (g0.norm(&w), g0.inner(&w, &path.velocities[0]));
    for ((z, u), v) in path.points.iter().zip(&moved).zip(&path.velocities) {
        let g = p.metric(z).unwrap();
        assert!((g.norm(u) - n0).abs() < 1e-5);
        assert!((g.inner(u, v) - a0).abs() < 1e-5);
    }
}

#[test]
fn projection_inverts_the_decoder() {
    let (f, _) = sphere(1.5);
    let opts = ProjectionOptions::default();
    for z in [dvector![0.1, 0.2], dvector![-1.3, 0.8], dvector![2.5, -3.0]] {
        let y = decode(&f, &z).unwrap();
        let r = project_to_latent(&f, &y, &stereographic_guess(1.5, &y), &opts).unwrap();
        assert!((r.z - &z).amax() < 1e-6);
    }
}

#[test]
fn frechet_mean_of_a_symmetric_cross_is_the_pole() {
    let (_, p) = sphere(1.0);
    let s = 0.4;
    let data = vec![dvector![s, 0.0], dvector![-s, 0.0], dvector![0.0, s], dvector![0.0, -s], dvector![0.05, 0.0]];
    let r = frechet_mean(&p, &data[..4], &FrechetOptions::default()).unwrap();
    assert!(DVector::from_vec(r.mean).norm() < 1e-6);
    let r = frechet_mean(&p, &data, &FrechetOptions::default()).unwrap();
    assert!(r.mean[0] > 0.0 && r.mean[1].abs() < 1e-6);
}

#[test]
fn principal_curve_follows_a_great_circle() {
    let (f, p) = sphere(1.0);
    let data: Vec<DVector<f64>> = (0..9)
        .flat_map(|i| {
            let a = -0.4 + 0.1 * i as f64;
            [dvector![a, 0.03], dvector![a, -0.03]]
        })
        .collect();
    let r = pga(&p, &data, Some(&dvector![0.0, 0.0]), &FrechetOptions::default()).unwrap();
    let dir = r.direction(0).unwrap();
    assert!(dir[0].abs() > 0.99 * dir.norm());
    let ts: Vec<f64> = (-4..=4).map(|k| 0.25 * k as f64).collect();
    let curve = principal_curve(&p, &f, &r, 0, &ts).unwrap();
    for c in &curve {
        let x = &c.ambient;
        assert!((x.norm() - 1.0).abs() < 1e-12);
        // The great circle through the pole in the z1 direction lies in x2 = 0.
        assert!(x[1].abs() < 1e-6);
        // Directions are unit g-vectors, so t is arc length.
        let along = arc(&f, 1.0, &dvector![0.0, 0.0], &c.latent);
        assert!((along - c.t.abs()).abs() < 1e-5, "{along} {}", c.t);
    }
}
