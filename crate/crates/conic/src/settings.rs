use serde::{Deserialize, Serialize};

/// Interior-point settings, exposed through the `[solver]` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: u32,
    /// Relative duality-gap stopping tolerance.
    pub tol_gap_rel: f64,
    /// Absolute duality-gap stopping tolerance.
    pub tol_gap_abs: f64,
    /// Primal and dual feasibility stopping tolerance.
    pub tol_feas: f64,
    /// Tolerance used when labelling a result optimal in [`crate::certify`].
    pub certify_tol: f64,
    /// Static regularization added to the quasi-definite KKT matrix.
    pub regularization: f64,
    pub iterative_refinement_max_iter: u32,
    /// Extra solves with inflated regularization after a numerical breakdown.
    pub regularization_retries: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 200,
            tol_gap_rel: 1e-10,
            tol_gap_abs: 1e-10,
            tol_feas: 1e-10,
            certify_tol: 1e-7,
            regularization: 1e-8,
            iterative_refinement_max_iter: 3,
            regularization_retries: 2,
            verbose: false,
        }
    }
}
