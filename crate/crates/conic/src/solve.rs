//! Interior-point solve.
//!
//! The numerical work is done by Clarabel (primal-dual path following on the
//! homogeneous self-dual embedding, Nesterov–Todd scaling, Mehrotra
//! correction, quasi-definite LDL with static regularization and iterative
//! refinement). This module owns the translation from the standard form used
//! throughout the workspace and the mapping of statuses and duals.
//!
//! Translation: `A x = b` becomes a zero-cone block, and every non-free cone
//! block `x_B ∈ K_B` becomes `−G x_B + s = 0, s ∈ K̂_B`. `G` is the identity
//! except for rotated cones, which use the orthogonal map
//! `(a, b, x) ↦ ((a + b)/√2, (a − b)/√2, x)` onto a second-order cone.

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::certify::certify_vectors;
use crate::error::ConicError;
use crate::problem::{ConeKind, ConicProblem};
use crate::settings::SolverSettings;
use crate::solution::{ConicSolution, SolveStatus};

struct Translated {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    n_eq: usize,
}

fn translate(problem: &ConicProblem) -> Translated {
    let n = problem.variable_count();
    let m = problem.constraint_count();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (r, c, v) in problem.equality_matrix.triplets() {
        rows.push(r);
        cols.push(c);
        vals.push(v);
    }
    let mut cones = Vec::new();
    if m > 0 {
        cones.push(SupportedConeT::ZeroConeT(m));
    }
    let mut next_row = m;
    for (start, cone) in problem.cone_blocks() {
        match cone.kind {
            ConeKind::Free => continue,
            ConeKind::Nonnegative | ConeKind::SecondOrder => {
                for k in 0..cone.dim {
                    rows.push(next_row + k);
                    cols.push(start + k);
                    vals.push(-1.0);
                }
                cones.push(if cone.kind == ConeKind::Nonnegative {
                    SupportedConeT::NonnegativeConeT(cone.dim)
                } else {
                    SupportedConeT::SecondOrderConeT(cone.dim)
                });
            }
            ConeKind::RotatedSecondOrder => {
                let (ra, rb) = (next_row, next_row + 1);
                for (r, c, v) in [
                    (ra, start, -FRAC_1_SQRT_2),
                    (ra, start + 1, -FRAC_1_SQRT_2),
                    (rb, start, -FRAC_1_SQRT_2),
                    (rb, start + 1, FRAC_1_SQRT_2),
                ] {
                    rows.push(r);
                    cols.push(c);
                    vals.push(v);
                }
                for k in 2..cone.dim {
                    rows.push(next_row + k);
                    cols.push(start + k);
                    vals.push(-1.0);
                }
                cones.push(SupportedConeT::SecondOrderConeT(cone.dim));
            }
        }
        next_row += cone.dim;
    }
    let mut b = problem.equality_rhs.clone();
    b.resize(next_row, 0.0);
    Translated {
        a: CscMatrix::new_from_triplets(next_row, n, rows, cols, vals),
        b,
        cones,
        n_eq: m,
    }
}

/// Maps the backend dual of the cone rows back to `s ∈ K*` in the original
/// coordinates (`s = Gᵀ z`, and `G` is symmetric).
fn cone_duals(problem: &ConicProblem, z: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; problem.variable_count()];
    let mut row = problem.constraint_count();
    for (start, cone) in problem.cone_blocks() {
        match cone.kind {
            ConeKind::Free => continue,
            ConeKind::Nonnegative | ConeKind::SecondOrder => {
                s[start..start + cone.dim].copy_from_slice(&z[row..row + cone.dim]);
            }
            ConeKind::RotatedSecondOrder => {
                let (za, zb) = (z[row], z[row + 1]);
                s[start] = FRAC_1_SQRT_2 * (za + zb);
                s[start + 1] = FRAC_1_SQRT_2 * (za - zb);
                s[start + 2..start + cone.dim].copy_from_slice(&z[row + 2..row + cone.dim]);
            }
        }
        row += cone.dim;
    }
    s
}

fn backend_settings(settings: &SolverSettings, regularization: f64) -> DefaultSettings<f64> {
    DefaultSettingsBuilder::default()
        .max_iter(settings.max_iterations)
        .verbose(settings.verbose)
        .tol_gap_abs(settings.tol_gap_abs)
        .tol_gap_rel(settings.tol_gap_rel)
        .tol_feas(settings.tol_feas)
        .static_regularization_constant(regularization)
        .iterative_refinement_max_iter(settings.iterative_refinement_max_iter)
        .presolve_enable(false)
        .build()
        .expect("static solver settings are valid")
}

fn empty_solution(problem: &ConicProblem, status: SolveStatus) -> ConicSolution {
    ConicSolution {
        status,
        primal: vec![f64::NAN; problem.variable_count()],
        dual_equality: vec![f64::NAN; problem.constraint_count()],
        dual_cone: vec![f64::NAN; problem.variable_count()],
        objective_value: f64::NAN,
        dual_objective_value: f64::NAN,
        duality_gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        iterations: 0,
        solve_time: 0.0,
    }
}

/// Solves `problem`. Returns `Err` only for malformed input; every solver
/// outcome, including infeasibility, is reported through
/// [`ConicSolution::status`].
///
/// A result is labelled [`SolveStatus::Optimal`] only if the independent
/// certificate in [`crate::certify`] passes at `settings.certify_tol`.
/// Numerical breakdowns are retried with the static regularization inflated
/// by 100× per retry.
pub fn solve(
    problem: &ConicProblem,
    settings: &SolverSettings,
) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    let t = translate(problem);
    let n = problem.variable_count();
    let p = CscMatrix::<f64>::zeros((n, n));
    let started = Instant::now();

    let mut regularization = settings.regularization;
    let mut total_iterations = 0;
    let mut attempt = 0;
    loop {
        let mut solver = DefaultSolver::new(
            &p,
            &problem.objective,
            &t.a,
            &t.b,
            &t.cones,
            backend_settings(settings, regularization),
        )
        .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        total_iterations += sol.iterations;

        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => None,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                Some(SolveStatus::PrimalInfeasible)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                Some(SolveStatus::DualInfeasible)
            }
            SolverStatus::MaxIterations | SolverStatus::MaxTime => {
                Some(SolveStatus::IterationLimit)
            }
            _ => Some(SolveStatus::NumericalFailure),
        };

        if status.is_none() {
            let primal = sol.x.clone();
            let dual_equality: Vec<f64> = sol.z[..t.n_eq].iter().map(|z| -z).collect();
            let dual_cone = cone_duals(problem, &sol.z);
            let report = certify_vectors(problem, &primal, &dual_equality, &dual_cone);
            if report.passes(settings.certify_tol) || attempt >= settings.regularization_retries {
                let status = if report.passes(settings.certify_tol) {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::NumericalFailure
                };
                return Ok(ConicSolution {
                    status,
                    primal,
                    dual_equality,
                    dual_cone,
                    objective_value: report.primal_objective,
                    dual_objective_value: report.dual_objective,
                    duality_gap: report.relative_gap,
                    primal_residual: report.primal_residual,
                    dual_residual: report.dual_residual,
                    iterations: total_iterations,
                    solve_time: started.elapsed().as_secs_f64(),
                });
            }
        } else if status != Some(SolveStatus::NumericalFailure)
            || attempt >= settings.regularization_retries
        {
            let mut out = empty_solution(problem, status.unwrap());
            out.iterations = total_iterations;
            out.solve_time = started.elapsed().as_secs_f64();
            return Ok(out);
        }
        attempt += 1;
        regularization *= 100.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Cone, SparseMatrix};

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn single_variable_equality() {
        // min x  s.t. x = 1, x ≥ 0
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0],
            a,
            vec![1.0],
            vec![Cone::new(ConeKind::Nonnegative, 1)],
        )
        .unwrap();
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-8);
        assert!((s.primal[0] - 1.0).abs() < 1e-8);
        // d(value)/d(rhs) = 1 = objective coefficient
        assert!((s.dual_equality[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn second_order_cone_norm() {
        // min t  s.t. (t, x, y) ∈ SOC, x = 1, y = 1  →  t = √2
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0, 0.0, 0.0],
            a,
            vec![1.0, 1.0],
            vec![Cone::new(ConeKind::SecondOrder, 3)],
        )
        .unwrap();
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.primal[0] - 2f64.sqrt()).abs() < 1e-8);
        // ∂t/∂x = x/t = 1/√2 for both equalities.
        for y in &s.dual_equality {
            assert!((y - FRAC_1_SQRT_2).abs() < 1e-6);
        }
    }

    #[test]
    fn rotated_cone_epigraph_of_square() {
        // min w  s.t. (w, h, x) ∈ RSOC, h = 1/2, x = 3  →  w ≥ x² = 9
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0, 0.0, 0.0],
            a,
            vec![0.5, 3.0],
            vec![Cone::new(ConeKind::RotatedSecondOrder, 3)],
        )
        .unwrap();
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 9.0).abs() < 1e-7);
        // ∂w/∂x = 2x = 6
        assert!((s.dual_equality[1] - 6.0).abs() < 1e-5);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        // min x  s.t. x = −1, x ≥ 0
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let p = ConicProblem::new(
            vec![1.0],
            a,
            vec![-1.0],
            vec![Cone::new(ConeKind::Nonnegative, 1)],
        )
        .unwrap();
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn unbounded_is_dual_infeasible() {
        // min −x  s.t. x ≥ 0 (no equalities)
        let p = ConicProblem::new(
            vec![-1.0],
            SparseMatrix::zeros(0, 1),
            vec![],
            vec![Cone::new(ConeKind::Nonnegative, 1)],
        )
        .unwrap();
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::DualInfeasible);
    }

    #[test]
    fn free_variables_have_zero_cone_dual() {
        // min x1 + x2  s.t. x1 − u = 0, x2 + u = 2, u free, x ≥ 0
        let a = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 0, 1.0), (0, 2, -1.0), (1, 1, 1.0), (1, 2, 1.0)],
        )
        .unwrap();
        let p = ConicProblem::new(
            vec![1.0, 1.0, 0.0],
            a,
            vec![0.0, 2.0],
            vec![
                Cone::new(ConeKind::Nonnegative, 2),
                Cone::new(ConeKind::Free, 1),
            ],
        )
        .unwrap();
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-7);
        assert!(s.dual_cone[2].abs() < 1e-8);
    }
}
