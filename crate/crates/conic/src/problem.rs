//! Standard-form conic programs.
//!
//! A [`ConicProblem`] is
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x = b
//!             x ∈ K = K₁ × K₂ × … × K_p
//! ```
//!
//! where the blocks `Kᵢ` partition the variable vector contiguously, in the
//! order given by `cones`.

use std::fmt;

use crate::error::ConicError;

/// Kind of a cone block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeKind {
    /// Unconstrained variables (`ℝⁿ`).
    Free,
    /// The nonnegative orthant.
    Nonnegative,
    /// `{(t, x) : t ≥ ‖x‖₂}`.
    SecondOrder,
    /// `{(a, b, x) : 2ab ≥ ‖x‖₂², a ≥ 0, b ≥ 0}`.
    RotatedSecondOrder,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Free => "free",
            ConeKind::Nonnegative => "nonnegative",
            ConeKind::SecondOrder => "second_order",
            ConeKind::RotatedSecondOrder => "rotated_second_order",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "free" => Some(ConeKind::Free),
            "nonnegative" => Some(ConeKind::Nonnegative),
            "second_order" => Some(ConeKind::SecondOrder),
            "rotated_second_order" => Some(ConeKind::RotatedSecondOrder),
            _ => None,
        }
    }

    fn min_dim(self) -> usize {
        match self {
            ConeKind::Free | ConeKind::Nonnegative => 1,
            ConeKind::SecondOrder => 2,
            ConeKind::RotatedSecondOrder => 3,
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cone {
    pub kind: ConeKind,
    pub dim: usize,
}

impl Cone {
    pub fn new(kind: ConeKind, dim: usize) -> Self {
        Cone { kind, dim }
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowval: Vec::new(),
            nzval: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and explicit zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, ConicError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(ConicError::Invalid(format!(
                    "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(ConicError::Invalid(format!(
                    "non-finite entry at ({r}, {c})"
                )));
            }
            entries.push((c, r, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval = Vec::with_capacity(entries.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in entries {
            if last == Some((c, r)) {
                *nzval.last_mut().unwrap() += v;
                continue;
            }
            last = Some((c, r));
            rowval.push(r);
            nzval.push(v);
            colptr[c + 1] += 1;
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        let mut m = SparseMatrix {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        };
        m.drop_zeros();
        Ok(m)
    }

    fn drop_zeros(&mut self) {
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowval = Vec::with_capacity(self.rowval.len());
        let mut nzval = Vec::with_capacity(self.nzval.len());
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                if self.nzval[k] != 0.0 {
                    rowval.push(self.rowval[k]);
                    nzval.push(self.nzval[k]);
                }
            }
            colptr[c + 1] = rowval.len();
        }
        self.colptr = colptr;
        self.rowval = rowval;
        self.nzval = nzval;
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowval[k], c, self.nzval[k]))
        })
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (r, c, v) in self.triplets() {
            y[r] += v * x[c];
        }
        y
    }

    /// `y = Aᵀ x`
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (r, c, v) in self.triplets() {
            y[c] += v * x[r];
        }
        y
    }
}

/// `minimize cᵀx  s.t.  A x = b,  x ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub objective: Vec<f64>,
    pub equality_matrix: SparseMatrix,
    pub equality_rhs: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn new(
        objective: Vec<f64>,
        equality_matrix: SparseMatrix,
        equality_rhs: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Result<Self, ConicError> {
        let p = ConicProblem {
            objective,
            equality_matrix,
            equality_rhs,
            cones,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn variable_count(&self) -> usize {
        self.objective.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.equality_rhs.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.variable_count();
        let m = self.constraint_count();
        if self.equality_matrix.ncols != n || self.equality_matrix.nrows != m {
            return Err(ConicError::Invalid(format!(
                "equality matrix is {}x{}, expected {m}x{n}",
                self.equality_matrix.nrows, self.equality_matrix.ncols
            )));
        }
        if self.equality_matrix.colptr.len() != n + 1 {
            return Err(ConicError::Invalid("malformed column pointer".into()));
        }
        let total: usize = self.cones.iter().map(|c| c.dim).sum();
        if total != n {
            return Err(ConicError::Invalid(format!(
                "cone dimensions sum to {total}, expected {n}"
            )));
        }
        for (k, cone) in self.cones.iter().enumerate() {
            if cone.dim < cone.kind.min_dim() {
                return Err(ConicError::Invalid(format!(
                    "cone {k} ({}) has dimension {} < {}",
                    cone.kind,
                    cone.dim,
                    cone.kind.min_dim()
                )));
            }
        }
        if self
            .objective
            .iter()
            .chain(&self.equality_rhs)
            .any(|v| !v.is_finite())
        {
            return Err(ConicError::Invalid(
                "non-finite objective or rhs entry".into(),
            ));
        }
        Ok(())
    }

    /// Iterates cone blocks with their starting offsets.
    pub fn cone_blocks(&self) -> impl Iterator<Item = (usize, Cone)> + '_ {
        self.cones.iter().scan(0usize, |offset, &cone| {
            let start = *offset;
            *offset += cone.dim;
            Some((start, cone))
        })
    }
}
