use acsf_core::flow::{evolve, Cadence, EvolveOptions, Stop};
use acsf_core::invariants::{iso_ratio, ratio_sup};
use acsf_core::normalization::mvee;
use acsf_core::{AffineMap, FourierMode, Point, SupportCurve};
use nalgebra::Matrix2;
use proptest::prelude::*;

const N: usize = 64;

fn coarse() -> EvolveOptions {
    EvolveOptions {
        cadence: Cadence::AreaLoss(0.05),
        ..EvolveOptions::default()
    }
}

prop_compose! {
    fn smooth_convex()(
        amps in prop::collection::vec((-0.03f64..0.03, -0.03f64..0.03), 3),
        cx in -1.0f64..1.0,
        cy in -1.0f64..1.0,
        base in 0.5f64..2.0,
    ) -> SupportCurve {
        let modes: Vec<FourierMode> = amps
            .iter()
            .enumerate()
            .map(|(i, &(c, s))| FourierMode { k: i + 2, cos: c * base, sin: s * base })
            .collect();
        SupportCurve::from_fourier(N, base, &modes, Point::new(cx, cy)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn area_decreases(c in smooth_convex()) {
        let traj = evolve(&c, Stop::AreaFloor(0.2 * c.area()), &coarse()).unwrap();
        let areas = traj.areas();
        prop_assert!(areas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn nested_curves_stay_nested(c in smooth_convex(), gap in 0.02f64..0.3) {
        let outer = SupportCurve::new(c.h().iter().map(|h| h + gap).collect(), c.origin()).unwrap();
        let t = 0.3 * c.area().powf(2.0 / 3.0) / std::f64::consts::PI.powf(2.0 / 3.0);
        let stop = Stop::TargetTime(t);
        let a = evolve(&c, stop, &coarse()).unwrap();
        let b = evolve(&outer, stop, &coarse()).unwrap();
        for (x, y) in a.last().curve.h().iter().zip(b.last().curve.h()) {
            prop_assert!(y > x);
        }
    }

    #[test]
    fn ratio_is_affine_invariant(c in smooth_convex(), s in -0.5f64..0.5, k in 0.7f64..1.4) {
        let map = AffineMap::unimodular(Matrix2::new(k, s, 0.0, 1.0 / k), Point::new(0.3, -0.1)).unwrap();
        let fine = c.resampled(256).unwrap();
        let image = fine.apply_affine(&map, 256).unwrap();
        let (r0, r1) = (iso_ratio(&fine).unwrap(), iso_ratio(&image).unwrap());
        prop_assert!((r0 - r1).abs() < 1e-6, "{} vs {}", r0, r1);
        prop_assert!(r0 <= ratio_sup() + 1e-9);
    }

    #[test]
    fn flow_commutes_with_translation(c in smooth_convex(), dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
        let v = Point::new(dx, dy);
        let stop = Stop::TargetTime(0.05);
        let a = evolve(&c, stop, &coarse()).unwrap().last().curve.translated(v);
        let b = evolve(&c.translated(v), stop, &coarse()).unwrap().last().curve.clone();
        prop_assert!(a.hausdorff(&b) < 1e-10);
    }

    #[test]
    fn mvee_contains_and_commutes(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..30),
        s in -1.0f64..1.0,
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let Ok(e) = mvee(&pts, 1e-8) else { return Ok(()) };
        prop_assert!(pts.iter().all(|p| e.quad_form(p) <= 1.0 + 1e-6));
        let map = AffineMap::new(Matrix2::new(2.0, s, 0.0, 0.5), Point::new(1.0, 2.0)).unwrap();
        let mapped: Vec<Point> = pts.iter().map(|p| map.apply(p)).collect();
        let direct = mvee(&mapped, 1e-8).unwrap();
        let image = map.apply_ellipse(&e).unwrap();
        prop_assert!((direct.center() - image.center()).norm() < 1e-5);
        prop_assert!((direct.shape() - image.shape()).norm() < 1e-5 * image.shape().norm());
    }
}
