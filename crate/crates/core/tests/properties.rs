//! Randomised invariants.

use std::f64::consts::PI;

use hitchin_asy::cli::parse_complex;
use hitchin_asy::fourdim::{cross_ratio, torus_pullback_metric};
use hitchin_asy::specfun::{inverse_modular_lambda, modular_lambda, reduce_gamma2, HalfPlanePoint};
use hitchin_asy::Complex64;
use proptest::prelude::*;

fn complex(range: f64) -> impl Strategy<Value = Complex64> {
    (-range..range, -range..range).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #[test]
    fn torus_metric_has_unit_determinant(
        tr in -3.0..3.0f64, ti in 0.05..6.0f64, hr in -3.0..3.0f64, hi in 0.05..6.0f64,
    ) {
        let g = torus_pullback_metric(Complex64::new(tr, ti), Complex64::new(hr, hi)).unwrap();
        prop_assert!((g.determinant() - 1.0).abs() < 1e-9);
        prop_assert!(g.is_positive_definite());
    }

    #[test]
    fn cross_ratio_under_inversion(a in complex(4.0), b in complex(4.0), c in complex(4.0), d in complex(4.0)) {
        let pts = [a, b, c, d];
        for i in 0..4 {
            prop_assume!(pts[i].norm() > 0.2);
            for j in 0..i {
                prop_assume!((pts[i] - pts[j]).norm() > 0.2);
            }
        }
        let l = cross_ratio(pts.map(Some)).unwrap();
        let inv = cross_ratio(pts.map(|z| Some(1.0 / z))).unwrap();
        prop_assert!((l - inv).norm() <= 1e-10 * l.norm().max(1.0));
    }

    #[test]
    fn complex_flag_round_trip(re in -1e6..1e6f64, im in -1e6..1e6f64) {
        let z = parse_complex(&format!("{re:e}{im:+e}i")).unwrap();
        prop_assert_eq!(z, Complex64::new(re, im));
        prop_assert_eq!(parse_complex(&format!("{re}")).unwrap(), Complex64::new(re, 0.0));
    }

    #[test]
    fn lambda_round_trip_up_to_gamma2(tr in -1.0..1.0f64, ti in 0.3..3.0f64) {
        let tau = Complex64::new(tr, ti);
        let l = modular_lambda(HalfPlanePoint::new(tau).unwrap());
        prop_assume!(l.norm() > 1e-6 && (l - 1.0).norm() > 1e-6);
        let back = inverse_modular_lambda(l).unwrap();
        prop_assert!((modular_lambda(back) - l).norm() < 1e-10 * l.norm().max(1.0));
        // Same Γ(2) orbit: both reduce to the same fundamental-domain point.
        let (r1, _) = reduce_gamma2(tau);
        let (r2, _) = reduce_gamma2(back.tau());
        prop_assert!((r1 - r2).norm() < 1e-8 * (1.0 + r1.norm()), "{r1} vs {r2}");
    }

    #[test]
    fn torus_area_is_4pi2(tr in -2.0..2.0f64, ti in 0.1..4.0f64) {
        let g = torus_pullback_metric(Complex64::new(tr, ti), Complex64::new(0.0, 1.0)).unwrap();
        prop_assert!((g.area().unwrap() - 4.0 * PI * PI).abs() < 1e-9 * 4.0 * PI * PI);
    }
}
