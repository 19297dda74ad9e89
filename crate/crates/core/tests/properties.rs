use proptest::prelude::*;

use helicore::diagnostics::support_metrics;
use helicore::elliptic::{PolarGrid, ScalarField};
use helicore::evolution::{advect, default_dt, vorticity_source};
use helicore::sampling::Interp;
use helicore::selftest::legendre_scan;
use helicore::variational::{apply_profile, ProfileParams};

fn params() -> impl Strategy<Value = ProfileParams> {
    (0.3..3.0f64, 0.2..3.0f64, 0.0..1.0f64, 0.01..0.2f64, 0.0..2.0f64).prop_map(|(h, a, b, eps, alpha_bar)| {
        ProfileParams { h, a, b, eps, alpha_bar }
    })
}

fn blob(g: PolarGrid, c: [f64; 2], w: f64, amp: f64) -> ScalarField {
    ScalarField::from_xy_fn(g, |x| amp * (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (w * w)).exp())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penalty_is_the_conjugate_of_the_gain(p in params(), r in 0.0..2.0f64, s in -1.0..4.0f64) {
        let j = p.penalty(r, s);
        let scan = legendre_scan(&p, r, s, 4001);
        prop_assert!((j - scan).abs() <= 1e-9 * (1.0 + j), "J {} scan {}", j, scan);
    }

    #[test]
    fn fenchel_young_holds(p in params(), r in 0.0..2.0f64, s in -1.0..4.0f64, t in 0.0..4.0f64) {
        prop_assert!(s * t <= p.gain_primitive(r, t) + p.penalty(r, s) + 1e-12);
    }

    #[test]
    fn penalty_is_convex_and_nondecreasing(p in params(), r in 0.0..2.0f64, s in -1.0..4.0f64, d in 0.0..2.0f64) {
        let (j0, j1, j2) = (p.penalty(r, s), p.penalty(r, s + d), p.penalty(r, s + 2.0 * d));
        prop_assert!(j1 >= j0);
        prop_assert!(j0 + j2 - 2.0 * j1 >= -1e-12 * (1.0 + j2));
    }

    #[test]
    fn profile_is_monotone_in_psi(p in params(), shift in 0.0..1.0f64, cap in 1.0..1e4f64) {
        let g = PolarGrid::new(12, 16, 2.0).unwrap();
        let psi = ScalarField::from_xy_fn(g, |x| 0.5 - x[0] * x[0] + 0.3 * x[1]);
        let (z0, c0) = apply_profile(&psi, &p, cap);
        let (z1, c1) = apply_profile(&psi.map(|v| v + shift), &p, cap);
        prop_assert!(z0.data.iter().zip(&z1.data).all(|(a, b)| a <= b));
        prop_assert!(z1.max() <= cap && c0 <= c1);
    }

    #[test]
    fn metrics_are_rotation_invariant(x in -0.8..0.8f64, y in -0.8..0.8f64, rho in 0.1..0.5f64, shift in -40isize..40) {
        let g = PolarGrid::new(32, 40, 2.0).unwrap();
        let z = ScalarField::from_xy_fn(g, |q| {
            let d2 = ((q[0] - x).powi(2) + (q[1] - y).powi(2)) / (rho * rho);
            (1.0 - d2).max(0.0)
        });
        prop_assume!(z.max() > 0.0);
        let a = support_metrics(&z, 1.0).unwrap();
        let b = support_metrics(&z.rotate_cells(shift), 1.0).unwrap();
        prop_assert_eq!(a.cells, b.cells);
        prop_assert!((a.diameter - b.diameter).abs() < 1e-12);
        prop_assert!((a.inertia - b.inertia).abs() < 1e-12 * a.inertia.max(1e-300));
        prop_assert!((a.center[0].hypot(a.center[1]) - b.center[0].hypot(b.center[1])).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn advection_obeys_the_maximum_principle(
        cx in -0.8..0.8f64, cy in -0.8..0.8f64, amp in -3.0..3.0f64, limited in any::<bool>(),
    ) {
        let g = PolarGrid::new(24, 32, 2.0).unwrap();
        let phi = blob(g, [cx, cy], 0.6, amp);
        let f = blob(g, [-cy, cx], 0.4, 1.0).zip(&blob(g, [cx, -cy], 0.3, -0.5), |a, b| a + b);
        let interp = if limited { Interp::CubicLimited } else { Interp::Bilinear };
        let dt = default_dt(&phi, 0.5);
        let out = advect(&f, &phi, dt, interp).unwrap();
        prop_assert!(out.max() <= f.max() + 1e-14 && out.min() >= f.min() - 1e-14);
    }

    #[test]
    fn no_swirl_means_no_source(cx in -0.8..0.8f64, cy in -0.8..0.8f64, amp in -3.0..3.0f64, h in 0.3..3.0f64) {
        let g = PolarGrid::new(24, 32, 2.0).unwrap();
        let phi = blob(g, [cx, cy], 0.5, amp);
        prop_assert_eq!(vorticity_source(&ScalarField::zeros(g), &phi, h).max_abs(), 0.0);
    }
}

