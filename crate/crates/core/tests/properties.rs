//! Randomized invariants of the geometry layer.

use horizon_walk_core::frame::{horizontal_lift_path, FramePoint};
use horizon_walk_core::manifold::{
    christoffel, christoffel_fd, exp_map, inner, integrate_geodesic, orthonormality_defect, Chart, GeodesicConfig,
    Manifold, ManifoldOptions, Point, TangentVector, CHRISTOFFEL_FD_STEP,
};
use proptest::prelude::*;

fn manifold() -> impl Strategy<Value = Manifold> {
    (0usize..4).prop_map(|i| Manifold::from_name(Manifold::NAMES[i], &ManifoldOptions::default()).unwrap())
}

fn point_in(m: &Manifold) -> impl Strategy<Value = Point<2>> {
    let [(a0, a1), (b0, b1)] = m.experiment_region();
    (a0..a1, b0..b1).prop_map(|(x, y)| Point::xy(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn christoffel_symbols_are_torsion_free_and_match_differences(
        (m, p) in manifold().prop_flat_map(|m| { let s = point_in(&m); (Just(m), s) })
    ) {
        let g = christoffel(&m, &p).unwrap();
        prop_assert!(g.asymmetry() < 1e-14);
        let fd = christoffel_fd(&m, &p.coords, CHRISTOFFEL_FD_STEP).unwrap();
        prop_assert!(g.max_abs_diff(&fd) < 1e-6);
    }

    #[test]
    fn geodesics_keep_their_speed(
        (m, p) in manifold().prop_flat_map(|m| { let s = point_in(&m); (Just(m), s) }),
        angle in 0.0..std::f64::consts::TAU,
        len in 0.05f64..0.4,
    ) {
        let u = FramePoint::rotated(&m, p, angle, false).unwrap();
        let v = u.frame.column(0) * len;
        let cfg = GeodesicConfig::default();
        let (q, w) = integrate_geodesic(&m, &p, &v, 1.0, &cfg).unwrap();
        let speed = inner(&m, &q.coords, &w.components, &w.components).sqrt();
        prop_assert!((speed - len).abs() < 1e-9);
        let closed = exp_map(&m, &p, &TangentVector::new(p, v), &cfg).unwrap();
        let d = m.geodesic_distance(&q.coords, &closed.coords).unwrap_or(0.0);
        prop_assert!(d < 1e-8);
    }

    #[test]
    fn horizontal_lifts_transport_isometrically(
        (m, p) in manifold().prop_flat_map(|m| { let s = point_in(&m); (Just(m), s) }),
        angle in 0.0..std::f64::consts::TAU,
        turn in 0.0..std::f64::consts::TAU,
        reflect in any::<bool>(),
    ) {
        let u = FramePoint::rotated(&m, p, angle, reflect).unwrap();
        let dir = FramePoint::rotated(&m, p, turn, false).unwrap().frame.column(0) * 0.3;
        let out = horizontal_lift_path(&m, &u, &TangentVector::new(p, dir), 1.0, &GeodesicConfig::default()).unwrap();
        let g = m.metric(&out.end.base.coords);
        prop_assert!(orthonormality_defect(&g, &out.end.frame) < 1e-9);
        prop_assert!(out.max_drift < 1e-9);
        prop_assert_eq!(out.end.frame.determinant().signum(), u.frame.determinant().signum());
    }
}
