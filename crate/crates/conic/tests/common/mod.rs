//! Random cone programs that are feasible and bounded by construction: a
//! strictly interior primal point `x₀` fixes `b = A x₀`, and a dual pair
//! `(y₀, s₀)` with `s₀` interior to `K*` fixes `c = Aᵀy₀ + s₀`.

#![allow(dead_code)]

use lapopt_conic::{Cone, ConeKind, ConicProblem, SparseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn interior_point(rng: &mut ChaCha8Rng, kind: ConeKind, dim: usize) -> Vec<f64> {
    match kind {
        ConeKind::Free => (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        ConeKind::Nonnegative => (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect(),
        ConeKind::SecondOrder => {
            let tail: Vec<f64> = (0..dim - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = tail.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut v = vec![norm + rng.gen_range(0.5..1.5)];
            v.extend(tail);
            v
        }
        ConeKind::RotatedSecondOrder => {
            let tail: Vec<f64> = (0..dim - 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sq = tail.iter().map(|x| x * x).sum::<f64>();
            let a = rng.gen_range(0.5..1.5);
            let mut v = vec![a, sq / (2.0 * a) + rng.gen_range(0.5..1.5)];
            v.extend(tail);
            v
        }
    }
}

fn random_cones(rng: &mut ChaCha8Rng, max_vars: usize) -> Vec<Cone> {
    let mut cones = Vec::new();
    let mut n = 0;
    let target = rng.gen_range(4..=max_vars);
    while n < target {
        let room = target - n;
        let kind = match rng.gen_range(0..10) {
            0 => ConeKind::Free,
            1..=4 => ConeKind::Nonnegative,
            5..=7 => ConeKind::SecondOrder,
            _ => ConeKind::RotatedSecondOrder,
        };
        let dim = match kind {
            ConeKind::Free | ConeKind::Nonnegative => rng.gen_range(1..=room.min(4)),
            _ if room < 3 => continue,
            _ => rng.gen_range(3..=room.min(5)),
        };
        cones.push(Cone::new(kind, dim));
        n += dim;
    }
    cones
}

/// A feasible, bounded instance and the interior points it was built from.
pub struct Instance {
    pub problem: ConicProblem,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

/// `density` is the chance of each off-pivot entry of `A` being nonzero.
pub fn instance_with_cones(
    rng: &mut ChaCha8Rng,
    cones: Vec<Cone>,
    rows: usize,
    density: f64,
) -> Instance {
    let n: usize = cones.iter().map(|c| c.dim).sum();
    let mut x0 = Vec::with_capacity(n);
    let mut s0 = Vec::with_capacity(n);
    for c in &cones {
        x0.extend(interior_point(rng, c.kind, c.dim));
        if c.kind == ConeKind::Free {
            s0.extend(vec![0.0; c.dim]);
        } else {
            s0.extend(interior_point(rng, c.kind, c.dim));
        }
    }
    let mut triplets = Vec::new();
    for r in 0..rows {
        // A guaranteed entry per row keeps every row nonzero.
        let pivot = rng.gen_range(0..n);
        for j in 0..n {
            if j == pivot || rng.gen_bool(density) {
                triplets.push((r, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(rows, n, &triplets).unwrap();
    let b = a.mul_vec(&x0);
    let y0: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let aty = a.tmul_vec(&y0);
    let c: Vec<f64> = aty.iter().zip(&s0).map(|(u, s)| u + s).collect();
    Instance {
        problem: ConicProblem::new(c, a, b, cones).unwrap(),
        x0,
        y0,
    }
}

/// Mixed-cone instance with at most `max_vars` variables.
pub fn random_instance(rng: &mut ChaCha8Rng, max_vars: usize) -> Instance {
    let cones = random_cones(rng, max_vars);
    let n: usize = cones.iter().map(|c| c.dim).sum();
    let rows = rng.gen_range(1..=(n / 2).max(1));
    instance_with_cones(rng, cones, rows, 0.4)
}

/// LP in standard form over the nonnegative orthant; `A` is dense, so it has
/// full row rank.
pub fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize) -> Instance {
    let n = rng.gen_range(2..=max_vars);
    let rows = rng.gen_range(1..n);
    instance_with_cones(rng, vec![Cone::new(ConeKind::Nonnegative, n)], rows, 1.0)
}

/// Optimal value of `min cᵀx, A x = b, x ≥ 0` by visiting every basic
/// solution. `None` if no basis is feasible.
pub fn vertex_enumeration(problem: &ConicProblem) -> Option<f64> {
    use nalgebra::{DMatrix, DVector};
    let (m, n) = (problem.constraint_count(), problem.variable_count());
    let mut dense = DMatrix::<f64>::zeros(m, n);
    for (r, c, v) in problem.equality_matrix.triplets() {
        dense[(r, c)] += v;
    }
    let b = DVector::from_column_slice(&problem.equality_rhs);
    let mut best: Option<f64> = None;
    let mut basis: Vec<usize> = (0..m).collect();
    loop {
        let sub = DMatrix::from_fn(m, m, |r, k| dense[(r, basis[k])]);
        if sub.determinant().abs() > 1e-9 {
            if let Some(xb) = sub.lu().solve(&b) {
                if xb.iter().all(|&x| x >= -1e-9) {
                    let value: f64 = basis
                        .iter()
                        .zip(xb.iter())
                        .map(|(&j, x)| problem.objective[j] * x)
                        .sum();
                    best = Some(best.map_or(value, |v: f64| v.min(value)));
                }
            }
        }
        // Next m-subset of 0..n in lexicographic order.
        let Some(k) = (0..m).rev().find(|&k| basis[k] < n - m + k) else {
            break;
        };
        basis[k] += 1;
        for t in k + 1..m {
            basis[t] = basis[t - 1] + 1;
        }
    }
    best
}
