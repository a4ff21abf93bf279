//! Plain-text problem dump for offline debugging.
//!
//! ```text
//! conic-problem v1
//! variables <n>
//! constraints <m>
//! objective <k>
//! <index> <value>          (k nonzero entries)
//! rhs <k>
//! <row> <value>            (k nonzero entries)
//! matrix <nnz>
//! <row> <col> <value>      (column-major)
//! cones <p>
//! <kind> <dim>             (kind ∈ free, nonnegative, second_order, rotated_second_order)
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! `restore(dump(p)) == p` exactly.

use std::fmt::Write as _;

use crate::error::ConicError;
use crate::problem::{Cone, ConeKind, ConicProblem, SparseMatrix};

pub fn dump(problem: &ConicProblem) -> String {
    let mut out = String::new();
    let n = problem.variable_count();
    let m = problem.constraint_count();
    let _ = writeln!(out, "conic-problem v1");
    let _ = writeln!(out, "variables {n}");
    let _ = writeln!(out, "constraints {m}");
    let nz: Vec<_> = problem
        .objective
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .collect();
    let _ = writeln!(out, "objective {}", nz.len());
    for (i, v) in nz {
        let _ = writeln!(out, "{i} {v:?}");
    }
    let nz: Vec<_> = problem
        .equality_rhs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .collect();
    let _ = writeln!(out, "rhs {}", nz.len());
    for (i, v) in nz {
        let _ = writeln!(out, "{i} {v:?}");
    }
    let _ = writeln!(out, "matrix {}", problem.equality_matrix.nnz());
    for (r, c, v) in problem.equality_matrix.triplets() {
        let _ = writeln!(out, "{r} {c} {v:?}");
    }
    let _ = writeln!(out, "cones {}", problem.cones.len());
    for cone in &problem.cones {
        let _ = writeln!(out, "{} {}", cone.kind, cone.dim);
    }
    let _ = writeln!(out, "end");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Result<Vec<&'a str>, ConicError> {
        loop {
            let (i, l) = self.inner.next().ok_or_else(|| ConicError::Parse {
                line: self.line + 1,
                msg: "unexpected end of input".into(),
            })?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l.split_whitespace().collect());
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> ConicError {
        ConicError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn header(&mut self, key: &str) -> Result<usize, ConicError> {
        let f = self.next_fields()?;
        if f.len() != 2 || f[0] != key {
            return Err(self.err(format!("expected `{key} <count>`")));
        }
        f[1].parse()
            .map_err(|_| self.err(format!("bad count `{}`", f[1])))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, ConicError> {
        s.parse()
            .map_err(|_| self.err(format!("cannot parse `{s}`")))
    }
}

pub fn restore(text: &str) -> Result<ConicProblem, ConicError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next_fields()?;
    if magic != ["conic-problem", "v1"] {
        return Err(lines.err("missing `conic-problem v1` header"));
    }
    let n = lines.header("variables")?;
    let m = lines.header("constraints")?;

    let mut objective = vec![0.0; n];
    for _ in 0..lines.header("objective")? {
        let f = lines.next_fields()?;
        if f.len() != 2 {
            return Err(lines.err("expected `<index> <value>`"));
        }
        let i: usize = lines.parse(f[0])?;
        if i >= n {
            return Err(lines.err("objective index out of range"));
        }
        objective[i] = lines.parse(f[1])?;
    }
    let mut rhs = vec![0.0; m];
    for _ in 0..lines.header("rhs")? {
        let f = lines.next_fields()?;
        if f.len() != 2 {
            return Err(lines.err("expected `<row> <value>`"));
        }
        let i: usize = lines.parse(f[0])?;
        if i >= m {
            return Err(lines.err("rhs index out of range"));
        }
        rhs[i] = lines.parse(f[1])?;
    }
    let nnz = lines.header("matrix")?;
    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let f = lines.next_fields()?;
        if f.len() != 3 {
            return Err(lines.err("expected `<row> <col> <value>`"));
        }
        triplets.push((lines.parse(f[0])?, lines.parse(f[1])?, lines.parse(f[2])?));
    }
    let a = SparseMatrix::from_triplets(m, n, &triplets).map_err(|e| lines.err(e.to_string()))?;
    let mut cones = Vec::new();
    for _ in 0..lines.header("cones")? {
        let f = lines.next_fields()?;
        if f.len() != 2 {
            return Err(lines.err("expected `<kind> <dim>`"));
        }
        let kind = ConeKind::from_name(f[0])
            .ok_or_else(|| lines.err(format!("unknown cone `{}`", f[0])))?;
        cones.push(Cone::new(kind, lines.parse(f[1])?));
    }
    if lines.next_fields()? != ["end"] {
        return Err(lines.err("expected `end`"));
    }
    ConicProblem::new(objective, a, rhs, cones)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_problem() -> impl Strategy<Value = ConicProblem> {
        (1usize..6, 0usize..5).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::vec(-1e3f64..1e3, m),
                prop::collection::vec((0..m.max(1), 0..n, -10f64..10.0), 0..12),
            )
                .prop_map(move |(c, b, t)| {
                    let t: Vec<_> = if m == 0 { vec![] } else { t };
                    let a = SparseMatrix::from_triplets(m, n, &t).unwrap();
                    ConicProblem::new(c, a, b, vec![Cone::new(ConeKind::Nonnegative, n)]).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn dump_restore_is_exact(p in arb_problem()) {
            prop_assert_eq!(restore(&dump(&p)).unwrap(), p);
        }
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let text = "conic-problem v1\nvariables 1\nconstraints 0\nobjective 1\n0 abc\n";
        match restore(text) {
            Err(ConicError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
