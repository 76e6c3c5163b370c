//! Property tests for model and chain invariants.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use u1bethe::amplitudes::Amplitudes;
use u1bethe::bethe::{build_bethe_vector, eigenvalue};
use u1bethe::chain::ChainContext;
use u1bethe::cli::config::{format_complex, parse_complex};
use u1bethe::linalg::max_abs;
use u1bethe::weights::{check_unitarity, check_yang_baxter, permutation_matrix, ModelSpec};
use u1bethe::C64;

fn model(n: usize) -> ModelSpec {
    if n == 2 {
        ModelSpec::six_vertex(C64::new(0.6, 0.0)).unwrap()
    } else {
        ModelSpec::higher_spin_xxz(n, C64::new(0.6, 0.0)).unwrap()
    }
}

fn point() -> impl Strategy<Value = C64> {
    (-1.0..1.0_f64, -0.5..0.5_f64).prop_map(|(re, im)| C64::new(re, im))
}

fn separated(points: &[C64]) -> bool {
    points.iter().enumerate().all(|(i, x)| points[i + 1..].iter().all(|y| (x - y).norm() > 0.05))
}

fn inhomogeneities(length: usize) -> Vec<C64> {
    (0..length).map(|k| C64::new(0.07 * k as f64 - 0.05, 0.03 * k as f64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn yang_baxter_and_unitarity(n in 2usize..=4, l1 in point(), l2 in point(), l3 in point()) {
        prop_assume!(separated(&[l1, l2, l3]));
        let m = model(n);
        prop_assert!(check_yang_baxter(&m, l1, l2, l3).unwrap().residual < 1e-10);
        prop_assert!(check_unitarity(&m, l1, l2).unwrap().residual < 1e-10);
    }

    #[test]
    fn regularity(n in 2usize..=4, l in point()) {
        let w = model(n).eval_r(l, l).unwrap().to_dense();
        assert_abs_diff_eq!(max_abs(&(w - permutation_matrix(n))), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn theta_is_an_involution(n in 2usize..=4, x in point(), y in point()) {
        prop_assume!(separated(&[x, y]));
        let m = model(n);
        let amp = Amplitudes::new(&m);
        let product = amp.theta(x, y).unwrap() * amp.theta(y, x).unwrap();
        assert_abs_diff_eq!((product - 1.0).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transfer_matrices_commute_and_conserve_charge(n in 2usize..=3, l in point(), mu in point()) {
        let ctx = ChainContext::new(model(n), 3, Some(inhomogeneities(3))).unwrap();
        let t1 = ctx.transfer_matrix(l).unwrap().to_dense().unwrap();
        let t2 = ctx.transfer_matrix(mu).unwrap().to_dense().unwrap();
        let sz = ctx.spin_z_total().to_dense().unwrap();
        let scale = max_abs(&t1).max(max_abs(&t2)).max(1.0);
        prop_assert!(max_abs(&(&t1 * &t2 - &t2 * &t1)) / (scale * scale) < 1e-12);
        prop_assert!(max_abs(&(&t1 * &sz - &sz * &t1)) / scale < 1e-12);
    }

    #[test]
    fn bethe_vectors_stay_in_their_sector(n in 2usize..=3, roots in proptest::collection::vec(point(), 1..=3)) {
        prop_assume!(separated(&roots));
        let m = model(n);
        let ctx = ChainContext::new(m.clone(), 3, Some(inhomogeneities(3))).unwrap();
        let amp = Amplitudes::new(&m);
        let state = build_bethe_vector(&ctx, &amp, &roots).unwrap();
        prop_assert_eq!(ctx.sector_of(&state.vector.amplitudes), Some(roots.len()));
    }

    #[test]
    fn eigenvalue_is_symmetric_in_the_roots(n in 2usize..=3, l in point(), roots in proptest::collection::vec(point(), 2..=3)) {
        let mut all = roots.clone();
        all.push(l);
        prop_assume!(separated(&all));
        let m = model(n);
        let ctx = ChainContext::new(m.clone(), 3, Some(inhomogeneities(3))).unwrap();
        let amp = Amplitudes::new(&m);
        let forward = eigenvalue(&ctx, &amp, l, &roots).unwrap();
        let reversed: Vec<C64> = roots.iter().rev().copied().collect();
        let backward = eigenvalue(&ctx, &amp, l, &reversed).unwrap();
        prop_assert!((forward - backward).norm() <= 1e-10 * forward.norm().max(1.0));
    }

    #[test]
    fn complex_numbers_round_trip_through_text(re in -1e6..1e6_f64, im in -1e6..1e6_f64) {
        let z = C64::new(re, im);
        prop_assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
    }
}
