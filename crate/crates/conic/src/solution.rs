use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Primal-dual result of [`crate::solve`].
///
/// Dual convention: `dual_equality` is `y` in
/// `L(x, y, s) = cᵀx − yᵀ(A x − b) − sᵀx`, so that at an optimum
/// `c = Aᵀy + s` with `s = dual_cone ∈ K*`, and `y_j` is the derivative of the
/// optimal value with respect to `b_j`.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub dual_equality: Vec<f64>,
    pub dual_cone: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective_value: f64,
    /// Relative duality gap `|cᵀx − bᵀy| / (1 + |cᵀx| + |bᵀy|)`.
    pub duality_gap: f64,
    /// `‖A x − b‖∞`
    pub primal_residual: f64,
    /// `‖c − Aᵀy − s‖∞`
    pub dual_residual: f64,
    pub iterations: u32,
    pub solve_time: f64,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
