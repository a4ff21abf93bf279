mod common;

use common::{random_instance, random_lp, vertex_enumeration};
use lapopt_conic::{certify, solve, ConicProblem, SolverSettings};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn random_programs_are_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..120 {
        let inst = random_instance(&mut rng, 50);
        let s = solve(&inst.problem, &settings()).unwrap();
        assert!(s.is_optimal(), "instance {k}: {}", s.status);
        let r = certify(&inst.problem, &s);
        assert!(
            r.relative_gap <= 1e-7,
            "instance {k}: gap {:e}",
            r.relative_gap
        );
        assert!(
            r.scaled_primal_residual() <= 1e-7,
            "instance {k}: {:e}",
            r.scaled_primal_residual()
        );
        assert!(
            r.scaled_dual_residual() <= 1e-7,
            "instance {k}: {:e}",
            r.scaled_dual_residual()
        );
    }
}

#[test]
fn small_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..60 {
        let inst = random_lp(&mut rng, 8);
        let brute = vertex_enumeration(&inst.problem).expect("feasible by construction");
        let s = solve(&inst.problem, &settings()).unwrap();
        assert!(s.is_optimal(), "lp {k}");
        assert!(
            (s.objective_value - brute).abs() <= 1e-6 * (1.0 + brute.abs()),
            "lp {k}: {} vs {brute}",
            s.objective_value
        );
    }
}

/// Central difference of the optimal value in `b_j`.
fn rhs_sensitivity(p: &ConicProblem, j: usize, eps: f64) -> f64 {
    let value = |d: f64| {
        let mut q = p.clone();
        q.equality_rhs[j] += d;
        let s = solve(&q, &settings()).unwrap();
        assert!(s.is_optimal());
        s.objective_value
    };
    (value(eps) - value(-eps)) / (2.0 * eps)
}

#[test]
fn equality_duals_are_value_sensitivities() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut passed, mut total) = (0, 0);
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 30);
        let s = solve(&inst.problem, &settings()).unwrap();
        let j = rng.gen_range(0..inst.problem.constraint_count());
        let y = s.dual_equality[j];
        if y.abs() < 1e-3 {
            continue;
        }
        total += 1;
        let fd = rhs_sensitivity(&inst.problem, j, 1e-4);
        if (fd - y).abs() <= 0.05 * y.abs() {
            passed += 1;
        }
    }
    assert!(total >= 80, "too few usable instances: {total}");
    assert!(passed as f64 >= 0.95 * total as f64, "{passed}/{total}");
}

#[test]
fn dual_sign_on_a_hand_solved_lp() {
    // min x1 + 2 x2  s.t. x1 + x2 = b, x ≥ 0  →  value b, dual 1.
    let a = lapopt_conic::SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
    let p = ConicProblem::new(
        vec![1.0, 2.0],
        a,
        vec![3.0],
        vec![lapopt_conic::Cone::new(
            lapopt_conic::ConeKind::Nonnegative,
            2,
        )],
    )
    .unwrap();
    let s = solve(&p, &settings()).unwrap();
    assert!((s.objective_value - 3.0).abs() < 1e-8);
    assert!((s.dual_equality[0] - 1.0).abs() < 1e-7);
    assert!((s.dual_cone[1] - 1.0).abs() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weak_duality_holds(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 40);
        let s = solve(&inst.problem, &settings()).unwrap();
        prop_assert!(s.is_optimal());
        let scale = 1.0 + s.objective_value.abs();
        prop_assert!(s.objective_value >= s.dual_objective_value - 1e-6 * scale);
        // The generating points are feasible, so they bracket the optimum.
        let cx0: f64 = inst.problem.objective.iter().zip(&inst.x0).map(|(c, x)| c * x).sum();
        let by0: f64 = inst.problem.equality_rhs.iter().zip(&inst.y0).map(|(b, y)| b * y).sum();
        prop_assert!(by0 <= s.objective_value + 1e-6 * scale);
        prop_assert!(s.objective_value <= cx0 + 1e-6 * scale);
    }

    #[test]
    fn positive_objective_scaling_keeps_the_argmin(seed in any::<u64>(), factor in 0.1..10.0f64) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 30);
        let a = solve(&inst.problem, &settings()).unwrap();
        let mut scaled = inst.problem.clone();
        scaled.objective.iter_mut().for_each(|c| *c *= factor);
        let b = solve(&scaled, &settings()).unwrap();
        prop_assert!(a.is_optimal() && b.is_optimal());
        prop_assert!((b.objective_value - factor * a.objective_value).abs() <= 1e-6 * (1.0 + b.objective_value.abs()));
        let norm = a.primal.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (x, z) in a.primal.iter().zip(&b.primal) {
            prop_assert!((x - z).abs() <= 1e-4 * norm, "{} vs {}", x, z);
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 20);
        let a = solve(&inst.problem, &settings()).unwrap();
        let b = solve(&inst.problem, &settings()).unwrap();
        prop_assert_eq!(a.primal, b.primal);
        prop_assert_eq!(a.dual_equality, b.dual_equality);
    }
}
