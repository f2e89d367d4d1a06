use std::sync::Arc;

use ctrlscore::certify::{r_matrix, uniqueness_certificate, Verdict};
use ctrlscore::fixtures::{random_bounded, random_connected_undirected, random_matrix, random_stable, rng};
use ctrlscore::linops::{GramianSet, SystemMatrix};
use ctrlscore::netmetrics::{build_laplacian, LaplacianMode};
use ctrlscore::objective::{evaluate, hessian_at, ObjectiveKind, ScoringProblem, StopRule, DEFAULT_TOL_PSD};
use ctrlscore::solver::{distances_to_final, kkt_residual, rate_report, solve};
use nalgebra::{DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

fn interior_point<R: Rng>(r: &mut R, n: usize) -> DVector<f64> {
    let raw = DVector::from_fn(n, |_, _| r.gen_range(0.2..1.0));
    let s = raw.sum();
    raw / s
}

fn tangent<R: Rng>(r: &mut R, n: usize) -> DVector<f64> {
    let mut u = DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
    u.add_scalar_mut(-u.mean());
    let norm = u.norm();
    u / norm
}

#[test]
fn derivatives_match_central_differences() {
    let mut r = rng(23);
    let h = 1e-5;
    for case in 0..100 {
        let n = 3 + case % 4;
        let sys = SystemMatrix::new(random_matrix(&mut r, n, 1.0)).unwrap();
        let g = GramianSet::compute(&sys, 1.0).unwrap();
        let p = interior_point(&mut r, n);
        let u = tangent(&mut r, n);
        for kind in ObjectiveKind::ALL {
            let at = |x: &DVector<f64>| evaluate(kind, &g, x, DEFAULT_TOL_PSD).unwrap();
            let (plus, minus) = (at(&(&p + &u * h)), at(&(&p - &u * h)));
            let base = at(&p);

            let fd = (plus.value - minus.value) / (2.0 * h);
            let exact = base.gradient.dot(&u);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(base.gradient.norm() * 1e-3));

            let hess = hessian_at(kind, &g, &p, DEFAULT_TOL_PSD).unwrap();
            let fd_hu = (&plus.gradient - &minus.gradient) / (2.0 * h);
            let hu = &hess * &u;
            assert!((&fd_hu - &hu).norm() <= 1e-5 * hu.norm());
            assert!(SymmetricEigen::new(hess).eigenvalues.min() >= -1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objectives_are_convex_on_segments(seed in any::<u64>(), n in 2usize..=5, lambda in 0.05f64..0.95) {
        let mut r = rng(seed);
        let sys = SystemMatrix::new(random_matrix(&mut r, n, 1.0)).unwrap();
        let g = GramianSet::compute(&sys, 1.0).unwrap();
        let a = interior_point(&mut r, n);
        let b = interior_point(&mut r, n);
        let mid = &a * lambda + &b * (1.0 - lambda);
        for kind in ObjectiveKind::ALL {
            let v = |x: &DVector<f64>| evaluate(kind, &g, x, DEFAULT_TOL_PSD).unwrap().value;
            let chord = lambda * v(&a) + (1.0 - lambda) * v(&b);
            prop_assert!(v(&mid) <= chord + 1e-10 * chord.abs().max(1.0));
        }
    }

    #[test]
    fn solver_reaches_first_order_optimality(seed in any::<u64>(), n in 2usize..=6) {
        let sys = random_stable(&mut rng(seed), n, 0.2);
        let g = Arc::new(GramianSet::compute(&sys, 2.0).unwrap());
        for kind in ObjectiveKind::ALL {
            let prob = ScoringProblem::new(kind, g.clone());
            let trace = solve(&prob).unwrap();
            prop_assert!(trace.converged);
            prop_assert!(trace.values.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(trace.step_sizes.iter().all(|a| *a > 0.0 && *a <= 1.0));
            let scale = evaluate(kind, &g, trace.final_point.as_vector(), DEFAULT_TOL_PSD).unwrap().gradient.amax();
            prop_assert!(kkt_residual(&trace.final_point, &prob).unwrap() <= 1e-6 * scale.max(1.0));
        }
    }
}

#[test]
fn undirected_laplacians_have_uniform_volumetric_scores() {
    let mut r = rng(31);
    for case in 0..10 {
        let n = 5 + case % 6;
        let c = random_connected_undirected(&mut r, n, 0.3);
        let lap = build_laplacian(&c, LaplacianMode::Undirected).unwrap();
        for t in [1.0, 100.0] {
            let g = Arc::new(GramianSet::compute(&lap.system, t).unwrap());
            let trace = solve(&ScoringProblem::new(ObjectiveKind::Vcs, g)).unwrap();
            let dev = trace.final_point.as_slice().iter().map(|x| (x - 1.0 / n as f64).abs()).fold(0.0, f64::max);
            assert!(dev <= 1e-6);
        }
    }
}

#[test]
fn short_horizon_scores_are_nearly_uniform() {
    let mut r = rng(37);
    for _ in 0..5 {
        let sys = random_bounded(&mut r, 10, 1.0);
        let g = Arc::new(GramianSet::compute(&sys, 0.01).unwrap());
        for kind in ObjectiveKind::ALL {
            let p = solve(&ScoringProblem::new(kind, g.clone())).unwrap().final_point;
            assert!(p.as_slice().iter().all(|x| (x - 0.1).abs() <= 1e-3));
        }
    }
}

#[test]
fn traces_contract_linearly() {
    let mut r = rng(41);
    for _ in 0..5 {
        let sys = random_stable(&mut r, 5, 0.2);
        let g = Arc::new(GramianSet::compute(&sys, 1.0).unwrap());
        for kind in ObjectiveKind::ALL {
            let prob = ScoringProblem::new(kind, g.clone()).with_stop(StopRule { eps_step: 1e-12, max_iter: 10_000 });
            let trace = solve(&prob).unwrap();
            let report = rate_report(&trace, &prob).unwrap();
            assert!(report.slope < 0.0 && report.fit_r2 > 0.99, "{report:?}");
            if report.r_theoretical < 1.0 {
                assert!(report.max_contraction_excess <= 1e-9);
            }
            let d = distances_to_final(&trace);
            assert!(d[0] > d[d.len() - 3]);
        }
    }
}

#[test]
fn r_matrix_behaves_like_identity_near_zero() {
    let mut r = rng(43);
    for n in 1..=3 {
        let sys = SystemMatrix::new(random_matrix(&mut r, n, 1.0)).unwrap();
        let t = 1e-6;
        let scaled = r_matrix(&sys, t).unwrap() / t;
        assert!((scaled - nalgebra::DMatrix::identity(n, n)).amax() <= 1e-4);

        // det R(T) = Tⁿ + O(Tⁿ⁺¹): the n-th forward difference recovers n!
        let h = 1e-3;
        let det = |k: usize| r_matrix(&sys, k as f64 * h).unwrap().determinant();
        let mut diff = 0.0;
        for k in 0..=n {
            let binom = (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
            let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
            let value = if k == 0 { 0.0 } else { det(k) };
            diff += sign * binom * value;
        }
        let derivative = diff / h.powi(n as i32);
        let factorial = (1..=n).product::<usize>() as f64;
        assert!((derivative - factorial).abs() <= 0.05 * factorial, "n = {n}: {derivative}");
    }
}

#[test]
fn stable_systems_are_certified_unique() {
    let mut r = rng(47);
    for _ in 0..20 {
        let sys = random_stable(&mut r, 5, 0.2);
        let cert = uniqueness_certificate(&sys, 10.0).unwrap();
        assert!(cert.unique_for_all_horizons());
        assert_eq!(cert.verdict, Verdict::CertifiedUnique);
    }
}
