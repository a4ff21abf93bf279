//! Incremental construction of standard-form problems.
//!
//! Variables are allocated in blocks (free, nonnegative or a whole cone);
//! affine constraints are recorded as rows, with inequalities lowered to
//! equalities plus a nonnegative slack. [`ProblemBuilder::finish`] merges
//! adjacent free and nonnegative blocks into single cone entries.

use crate::error::ConicError;
use crate::problem::{Cone, ConeKind, ConicProblem, SparseMatrix};

/// Index of a variable in the problem being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

/// Index of an equality row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Row(pub usize);

#[derive(Debug, Default, Clone)]
pub struct ProblemBuilder {
    blocks: Vec<Cone>,
    n: usize,
    objective: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable_count(&self) -> usize {
        self.n
    }

    pub fn row_count(&self) -> usize {
        self.rhs.len()
    }

    fn alloc(&mut self, kind: ConeKind, dim: usize) -> Vec<Var> {
        let start = self.n;
        self.n += dim;
        self.objective.resize(self.n, 0.0);
        self.blocks.push(Cone::new(kind, dim));
        (start..start + dim).map(Var).collect()
    }

    pub fn free(&mut self) -> Var {
        self.alloc(ConeKind::Free, 1)[0]
    }

    pub fn nonneg(&mut self) -> Var {
        self.alloc(ConeKind::Nonnegative, 1)[0]
    }

    /// `(t, x…)` with `t ≥ ‖x‖`.
    pub fn second_order(&mut self, dim: usize) -> Vec<Var> {
        self.alloc(ConeKind::SecondOrder, dim)
    }

    /// `(a, b, x…)` with `2ab ≥ ‖x‖²`.
    pub fn rotated(&mut self, dim: usize) -> Vec<Var> {
        self.alloc(ConeKind::RotatedSecondOrder, dim)
    }

    pub fn set_cost(&mut self, v: Var, c: f64) {
        self.objective[v.0] = c;
    }

    pub fn add_cost(&mut self, v: Var, c: f64) {
        self.objective[v.0] += c;
    }

    /// `Σ coef·var = rhs`
    pub fn eq(&mut self, terms: &[(Var, f64)], rhs: f64) -> Row {
        let r = self.rhs.len();
        for &(v, c) in terms {
            debug_assert!(v.0 < self.n);
            if c != 0.0 {
                self.triplets.push((r, v.0, c));
            }
        }
        self.rhs.push(rhs);
        Row(r)
    }

    /// `Σ coef·var ≤ rhs`, via a nonnegative slack.
    pub fn le(&mut self, terms: &[(Var, f64)], rhs: f64) -> Row {
        let s = self.nonneg();
        let mut t = terms.to_vec();
        t.push((s, 1.0));
        self.eq(&t, rhs)
    }

    /// `Σ coef·var ≥ rhs`, via a nonnegative slack.
    pub fn ge(&mut self, terms: &[(Var, f64)], rhs: f64) -> Row {
        let s = self.nonneg();
        let mut t = terms.to_vec();
        t.push((s, -1.0));
        self.eq(&t, rhs)
    }

    /// Fixes `v = value`.
    pub fn fix(&mut self, v: Var, value: f64) -> Row {
        self.eq(&[(v, 1.0)], value)
    }

    pub fn finish(self) -> Result<ConicProblem, ConicError> {
        let mut cones: Vec<Cone> = Vec::with_capacity(self.blocks.len());
        for b in self.blocks {
            match cones.last_mut() {
                Some(last)
                    if last.kind == b.kind
                        && matches!(b.kind, ConeKind::Free | ConeKind::Nonnegative) =>
                {
                    last.dim += b.dim;
                }
                _ => cones.push(b),
            }
        }
        let m = self.rhs.len();
        let a = SparseMatrix::from_triplets(m, self.n, &self.triplets)?;
        ConicProblem::new(self.objective, a, self.rhs, cones)
    }
}
