use ctrlscore::fixtures::{random_matrix, random_skew, random_stable, rng};
use ctrlscore::linops::{
    eigenvector_condition, finite_gramian, finite_gramian_quadrature, infinite_gramian, matrix_exponential, min_eigenvalue, tail_bound,
    GramianSet, SystemMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn system_strategy(max_n: usize) -> impl Strategy<Value = (SystemMatrix, f64)> {
    (1..=max_n, any::<u64>(), 0.05f64..4.0).prop_map(|(n, seed, t)| {
        let a = random_matrix(&mut rng(seed), n, 1.0);
        (SystemMatrix::new(a).unwrap(), t)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn block_exponential_matches_quadrature((sys, t) in system_strategy(8)) {
        for i in 0..sys.n() {
            let fast = finite_gramian(&sys, i, t).unwrap();
            let slow = finite_gramian_quadrature(&sys, i, t, 2048).unwrap();
            prop_assert!(rel_frobenius(&fast, &slow) <= 1e-8);
        }
    }

    #[test]
    fn gramians_are_symmetric_psd((sys, t) in system_strategy(6)) {
        for w in GramianSet::compute(&sys, t).unwrap().iter() {
            prop_assert!((w - w.transpose()).norm() <= 1e-10 * w.norm());
            prop_assert!(min_eigenvalue(w) >= -1e-10 * w.trace());
        }
    }

    #[test]
    fn horizon_doubling_identity((sys, t) in system_strategy(6)) {
        // W(2T) = W(T) + e^{AT} W(T) e^{AᵀT}
        let e = matrix_exponential(sys.matrix(), t).unwrap();
        for i in 0..sys.n() {
            let w = finite_gramian(&sys, i, t).unwrap();
            let w2 = finite_gramian(&sys, i, 2.0 * t).unwrap();
            let composed = &w + &e * &w * e.transpose();
            prop_assert!(rel_frobenius(&composed, &w2) <= 1e-10);
        }
    }

    #[test]
    fn gramians_grow_with_horizon((sys, t) in system_strategy(6), extra in 0.01f64..3.0) {
        for i in 0..sys.n() {
            let short = finite_gramian(&sys, i, t).unwrap();
            let long = finite_gramian(&sys, i, t + extra).unwrap();
            prop_assert!(min_eigenvalue(&(&long - &short)) >= -1e-10 * long.trace());
        }
    }

    #[test]
    fn skew_traces_equal_horizon(n in 2usize..=8, seed in any::<u64>(), t in 0.1f64..20.0) {
        let sys = random_skew(&mut rng(seed), n, 1.0);
        for w in GramianSet::compute(&sys, t).unwrap().iter() {
            prop_assert!((w.trace() - t).abs() <= 1e-10 * t.max(1.0));
        }
    }
}

#[test]
fn finite_gramians_approach_infinite_limit() {
    let mut r = rng(5);
    for _ in 0..10 {
        let sys = random_stable(&mut r, 5, 0.5);
        for i in 0..5 {
            let inf = infinite_gramian(&sys, i).unwrap();
            let fin = finite_gramian(&sys, i, 80.0).unwrap();
            assert!(rel_frobenius(&fin, &inf) < 1e-10);
        }
    }
}

#[test]
fn tail_bound_holds_on_random_stable_systems() {
    let mut r = rng(17);
    for _ in 0..20 {
        let sys = random_stable(&mut r, 4, 0.3);
        let kappa = eigenvector_condition(&sys);
        let c = -kappa * kappa / (2.0 * sys.spectral_abscissa());
        let eps = c * 1e-4;
        let t_star = tail_bound(&sys, 1.0, eps).unwrap().t_star;
        for t in [t_star, 2.0 * t_star] {
            let report = tail_bound(&sys, t, eps).unwrap();
            assert!(report.holds, "residual {} above bound {}", report.residual_norm, report.bound);
        }
    }
}
