use lms_core::geometry::{distance, exp_endpoint, exp_map, log_map, parallel_transport, Curve, MetricProvider, MetricTensor};
use lms_core::io::{read_points, write_csv};
use lms_core::metricnet::{from_upper, to_upper};
use lms_core::smoothmap::{jacobian, Activation, Decoder, Mlp};
use lms_core::stats::{pga, FrechetOptions};
use lms_core::stochastics::{simulate_bm, Diffusion, PathSeed};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn point(range: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-range..range, 2).prop_map(DVector::from_vec)
}

fn sphere() -> MetricProvider {
    MetricProvider::exact(Decoder::sphere(1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pullback_metric_is_symmetric_positive_definite(seed in 0u64..1000, z in point(2.0)) {
        let f = Decoder::Mlp(Mlp::random(&[2, 12, 5], Activation::Tanh, Activation::Identity, seed).unwrap());
        let j = jacobian(&f, &z).unwrap();
        let g = MetricProvider::exact(f).metric(&z);
        // A rank-deficient Jacobian is the only legitimate reason to refuse.
        match g {
            Ok(g) => {
                prop_assert_eq!(g.matrix(), &g.matrix().transpose());
                prop_assert!(g.min_eigenvalue() > 0.0);
                prop_assert!((g.matrix() - j.transpose() * &j).amax() < 1e-12 * g.matrix().amax().max(1.0));
            }
            Err(_) => prop_assert!(j.singular_values().min() < 1e-4 * j.singular_values().max()),
        }
    }

    #[test]
    fn exp_is_reversible(z in point(1.5), v in point(0.8)) {
        let p = sphere();
        let path = exp_map(&p, &z, &v, 100).unwrap();
        let back = exp_endpoint(&p, path.endpoint(), &-path.velocities.last().unwrap(), 100).unwrap();
        prop_assert!((back - &z).amax() < 1e-6);
    }

    #[test]
    fn log_inverts_exp(z in point(1.0), v in point(0.5)) {
        let p = sphere();
        let end = exp_endpoint(&p, &z, &v, 100).unwrap();
        let w = log_map(&p, &z, &end).unwrap().vec;
        prop_assert!((exp_endpoint(&p, &z, &w, 100).unwrap() - &end).amax() < 1e-5);
        // Short geodesics are minimizing, so Log recovers the velocity itself.
        prop_assert!((w - &v).amax() < 1e-5);
    }

    #[test]
    fn distance_is_symmetric(a in point(1.5), b in point(1.5)) {
        let p = sphere();
        let (dab, dba) = (distance(&p, &a, &b).unwrap(), distance(&p, &b, &a).unwrap());
        prop_assert!((dab - dba).abs() < 1e-6);
        prop_assert!(dab >= 0.0);
    }

    #[test]
    fn linear_distance_is_the_ambient_norm(
        entries in prop::collection::vec(-2.0f64..2.0, 6),
        a in point(3.0),
        b in point(3.0),
    ) {
        let m = DMatrix::from_row_slice(3, 2, &entries);
        prop_assume!(m.singular_values().min() > 0.1);
        let p = MetricProvider::exact(Decoder::linear(m.clone()).unwrap());
        let d = distance(&p, &a, &b).unwrap();
        prop_assert!((d - (&m * (&b - &a)).norm()).abs() < 1e-7 * (1.0 + d));
    }

    #[test]
    fn transport_preserves_the_metric_norm(z in point(1.0), v in point(0.7), w in point(1.0)) {
        let p = sphere();
        let path = exp_map(&p, &z, &v, 100).unwrap();
        let moved = parallel_transport(&p, Curve::Geodesic(&path), &w).unwrap();
        let n0 = p.metric(&z).unwrap().norm(&w);
        for (x, u) in path.points.iter().zip(&moved) {
            prop_assert!((p.metric(x).unwrap().norm(u) - n0).abs() < 1e-5 * (1.0 + n0));
        }
    }

    #[test]
    fn upper_triangle_round_trip(entries in prop::collection::vec(-5.0f64..5.0, 6)) {
        let m = from_upper(3, &entries);
        prop_assert_eq!(&m, &m.transpose());
        prop_assert_eq!(to_upper(&m), entries);
    }

    #[test]
    fn metric_validation_accepts_gram_matrices(entries in prop::collection::vec(-1.0f64..1.0, 9)) {
        let b = DMatrix::from_row_slice(3, 3, &entries);
        let mut g = b.transpose() * &b + DMatrix::identity(3, 3) * 0.5;
        g = (&g + g.transpose()) * 0.5;
        let t = MetricTensor::new(g.clone()).unwrap();
        let prod = t.inverse().unwrap().matrix() * &g;
        prop_assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-10);
        prop_assert!((t.determinant() - g.determinant()).abs() < 1e-10 * g.determinant());
    }

    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 3), 0..20)) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b", "c"], rows.iter().cloned()).unwrap();
        let back = read_points(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (r, b) in rows.iter().zip(&back) {
            for (x, y) in r.iter().zip(b.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn weights_json_round_trip(sizes in prop::collection::vec(1usize..6, 2..5), seed in 0u64..100) {
        let net = Mlp::random(&sizes, Activation::Softplus, Activation::Sigmoid, seed).unwrap();
        prop_assert_eq!(Mlp::from_json(&net.to_json()).unwrap(), net);
    }

    #[test]
    fn brownian_paths_are_reproducible(seed in any::<u64>(), data in any::<u32>(), path in any::<u32>()) {
        let p = sphere();
        let diff = Diffusion::new(0.3, 10).unwrap();
        let z = DVector::zeros(2);
        let a = simulate_bm(&p, &z, &diff, PathSeed::new(seed, data, path)).unwrap();
        let b = simulate_bm(&p, &z, &diff, PathSeed::new(seed, data, path)).unwrap();
        prop_assert_eq!(a.points, b.points);
        prop_assert_eq!(a.times.last().copied(), Some(0.3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pga_variances_are_ordered_and_sum_to_the_total(pts in prop::collection::vec(point(0.6), 3..7)) {
        let p = sphere();
        let r = pga(&p, &pts, None, &FrechetOptions::default()).unwrap();
        prop_assert!(r.variances[0] >= r.variances[1] && r.variances[1] >= -1e-12);
        prop_assert!((r.variances.iter().sum::<f64>() - r.total_variance).abs() < 1e-9 * (1.0 + r.total_variance));
        let g = p.metric(&r.mean()).unwrap();
        let (u, v) = (r.direction(0).unwrap(), r.direction(1).unwrap());
        prop_assert!((g.norm(&u) - 1.0).abs() < 1e-9 && g.inner(&u, &v).abs() < 1e-9);
    }
}
