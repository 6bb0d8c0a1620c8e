//! Invariants checked on random loops and fields.

use std::f64::consts::PI;

use hloop::area::{area_a1, area_ak_line, default_spacing, isoperimetric_check, winding_grid, winding_number};
use hloop::energy::{area_gradient, energy_value, scaling_defect};
use hloop::hardy::{hardy_ratio, ScalarGrid};
use hloop::{Complex64, CurvatureField, Loop};
use proptest::prelude::*;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn any_loop() -> impl Strategy<Value = Loop> {
    (any::<u64>(), 1usize..6, 1.0f64..2.5).prop_map(|(seed, modes, decay)| Loop::random_fourier(seed, modes, decay, 128).unwrap())
}

fn any_point() -> impl Strategy<Value = Complex64> {
    (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(x, y)| c(x, y))
}

fn mean_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum::<f64>() / a.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn length_is_rigid_motion_invariant(u in any_loop(), p in any_point(), angle in 0.0f64..6.3) {
        let l = u.seminorm_l();
        let moved = u.scale(Complex64::from_polar(1.0, angle)).translate(p);
        prop_assert!((moved.seminorm_l() - l).abs() <= 1e-12 * l.max(1.0));
    }

    #[test]
    fn flat_area_is_translation_invariant_and_isoperimetric(u in any_loop(), p in any_point()) {
        let a = area_a1(&u);
        prop_assert!((area_a1(&u.translate(p)) - a).abs() <= 1e-10 * a.abs().max(1.0));
        let l = u.seminorm_l();
        prop_assert!(2.0 * a.abs() <= l * l + 1e-12);
    }

    #[test]
    fn energy_ignores_parameter_shift(u in any_loop(), shift in 1usize..128) {
        let h = CurvatureField::beta_t(3.0, 0.2).unwrap();
        let mut pts = u.points().to_vec();
        pts.rotate_left(shift);
        let shifted = Loop::new(pts).unwrap();
        let (e0, e1) = (energy_value(&h, &u), energy_value(&h, &shifted));
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs().max(1.0));
    }

    #[test]
    fn scaling_defect_is_bounded_by_n_times_length(u in any_loop(), beta in 1.2f64..6.0, t in 0.05f64..0.9) {
        let h = CurvatureField::beta_t(beta, t).unwrap();
        let n = beta * t * (beta / (2.0 * (beta * beta - 1.0))).sqrt();
        prop_assert!(scaling_defect(&h, &u).abs() <= n * u.seminorm_l() + 1e-8);
    }

    #[test]
    fn scaling_defect_matches_pairing(u in any_loop()) {
        let h = CurvatureField::eps(0.5).unwrap();
        let da = mean_dot(&area_gradient(&h, &u), u.points());
        let a = area_ak_line(&u, &h).unwrap();
        prop_assert!((scaling_defect(&h, &u) - (da - 2.0 * a)).abs() < 1e-12);
    }

    #[test]
    fn winding_vanishes_far_away(u in any_loop(), angle in 0.0f64..6.3) {
        let far = u.mean() + Complex64::from_polar(1.01 * u.rho(), angle);
        prop_assert_eq!(winding_number(&u, far).unwrap(), 0);
    }

    #[test]
    fn winding_grid_respects_length_bound(u in any_loop()) {
        let g = winding_grid(&u, default_spacing(&u)).unwrap();
        prop_assert!(g.boundary_is_zero());
        prop_assert!(g.l2_norm() <= PI.sqrt() * u.mean_speed() * 1.02);
    }

    #[test]
    fn hardy_ratio_is_dilation_invariant(w in 0.3f64..0.6, x0 in -0.5f64..0.5, lam in 0.7f64..1.3) {
        let s = 6.0;
        let h = s / 128.0;
        let f = |x: f64, y: f64| (-((x - x0).powi(2) + y * y) / (w * w)).exp();
        let a = hardy_ratio(&ScalarGrid::from_fn(s, h, f).unwrap()).unwrap();
        let b = hardy_ratio(&ScalarGrid::from_fn(s, h, |x, y| f(x / lam, y / lam)).unwrap()).unwrap();
        prop_assert!(a < 1.0 && b < 1.0);
        prop_assert!((a - b).abs() < 2e-2, "{} vs {}", a, b);
    }

    #[test]
    fn rescaling_keeps_n(beta in 1.2f64..6.0, t in 0.05f64..0.9, lam in 0.1f64..10.0) {
        let h = CurvatureField::beta_t(beta, t).unwrap();
        let n0 = h.compute_n().unwrap();
        prop_assert!((h.rescale(lam).unwrap().compute_n().unwrap() - n0).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn isoperimetric_inequalities_hold(seed in any::<u64>(), r in 0.3f64..3.0) {
        let h = CurvatureField::beta_t(3.0, 0.2).unwrap();
        let u0 = Loop::random_fourier(seed, 4, 2.0, 128).unwrap();
        let u = u0.scale(c(r / u0.seminorm_l(), 0.0));
        let rep = isoperimetric_check(&u, &h, h.compute_n().unwrap()).unwrap();
        prop_assert!(rep.all_hold(), "{:?}", rep);
    }
}
