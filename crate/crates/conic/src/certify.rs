//! Independent optimality certificate.
//!
//! Everything here is recomputed from the problem data and the returned
//! primal/dual vectors; nothing is taken from the solver's own bookkeeping.

use crate::problem::{ConeKind, ConicProblem};
use crate::solution::ConicSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `‖A x − b‖∞`
    pub primal_residual: f64,
    /// `‖c − Aᵀy − s‖∞`
    pub dual_residual: f64,
    /// Largest distance-like violation of `x ∈ K`.
    pub primal_cone_violation: f64,
    /// Largest distance-like violation of `s ∈ K*`.
    pub dual_cone_violation: f64,
    /// `xᵀs`
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|cᵀx − bᵀy| / (1 + |cᵀx| + |bᵀy|)`
    pub relative_gap: f64,
    pub rhs_norm: f64,
    pub objective_norm: f64,
    pub primal_norm: f64,
    pub dual_norm: f64,
}

impl ResidualReport {
    pub fn scaled_primal_residual(&self) -> f64 {
        self.primal_residual / (1.0 + self.rhs_norm)
    }

    pub fn scaled_dual_residual(&self) -> f64 {
        self.dual_residual / (1.0 + self.objective_norm)
    }

    /// The largest of the scaled residuals, cone violations and gap.
    pub fn worst(&self) -> f64 {
        [
            self.scaled_primal_residual(),
            self.scaled_dual_residual(),
            self.relative_gap,
            self.primal_cone_violation / (1.0 + self.primal_norm),
            self.dual_cone_violation / (1.0 + self.dual_norm),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Violation of `v ∈ K` for a single block; zero when inside.
pub fn cone_violation(kind: ConeKind, v: &[f64]) -> f64 {
    match kind {
        ConeKind::Free => 0.0,
        ConeKind::Nonnegative => v.iter().fold(0.0f64, |m, &x| m.max(-x)),
        ConeKind::SecondOrder => {
            let tail = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            (tail - v[0]).max(0.0)
        }
        ConeKind::RotatedSecondOrder => {
            // 2ab ≥ ‖x‖² with a, b ≥ 0 is the second-order cone in the
            // coordinates ((a + b)/√2, (a − b)/√2, x).
            let (a, b) = (v[0], v[1]);
            let head = (a + b) / std::f64::consts::SQRT_2;
            let diff = (a - b) / std::f64::consts::SQRT_2;
            let tail = (diff * diff + v[2..].iter().map(|x| x * x).sum::<f64>()).sqrt();
            (tail - head).max(0.0)
        }
    }
}

pub fn certify_vectors(
    problem: &ConicProblem,
    primal: &[f64],
    dual_equality: &[f64],
    dual_cone: &[f64],
) -> ResidualReport {
    let a = &problem.equality_matrix;
    let ax = a.mul_vec(primal);
    let primal_residual = ax
        .iter()
        .zip(&problem.equality_rhs)
        .fold(0.0f64, |m, (l, r)| m.max((l - r).abs()));

    let aty = a.tmul_vec(dual_equality);
    let dual_residual = problem
        .objective
        .iter()
        .zip(&aty)
        .zip(dual_cone)
        .fold(0.0f64, |m, ((c, g), s)| m.max((c - g - s).abs()));

    // Every cone used here is self-dual, so K* membership uses the same test.
    let mut primal_cone_violation = 0.0f64;
    let mut dual_cone_violation = 0.0f64;
    for (start, cone) in problem.cone_blocks() {
        let range = start..start + cone.dim;
        primal_cone_violation =
            primal_cone_violation.max(cone_violation(cone.kind, &primal[range.clone()]));
        let dual_kind = match cone.kind {
            // The dual of the free cone is {0}.
            ConeKind::Free => {
                dual_cone_violation = dual_cone_violation.max(inf_norm(&dual_cone[range]));
                continue;
            }
            k => k,
        };
        dual_cone_violation = dual_cone_violation.max(cone_violation(dual_kind, &dual_cone[range]));
    }

    let primal_objective = dot(&problem.objective, primal);
    let dual_objective = dot(&problem.equality_rhs, dual_equality);
    ResidualReport {
        primal_residual,
        dual_residual,
        primal_cone_violation,
        dual_cone_violation,
        complementarity: dot(primal, dual_cone),
        primal_objective,
        dual_objective,
        relative_gap: (primal_objective - dual_objective).abs()
            / (1.0 + primal_objective.abs() + dual_objective.abs()),
        rhs_norm: inf_norm(&problem.equality_rhs),
        objective_norm: inf_norm(&problem.objective),
        primal_norm: inf_norm(primal),
        dual_norm: inf_norm(dual_cone),
    }
}

/// Recomputes residuals, cone violations and the duality gap of `solution`.
pub fn certify(problem: &ConicProblem, solution: &ConicSolution) -> ResidualReport {
    certify_vectors(
        problem,
        &solution.primal,
        &solution.dual_equality,
        &solution.dual_cone,
    )
}
