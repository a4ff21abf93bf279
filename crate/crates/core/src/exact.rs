//! Exact gear trajectories on short sections: best-first branch and bound
//! over the per-step gear choice, plus brute-force enumeration as an
//! oracle, and the exact-vs-iterative comparison report.
//!
//! A node fixes the gear at some steps; every other step is relaxed to the
//! convex hull of its gear models (simplex weights, see
//! [`crate::transcription::build_relaxed`]). The relaxation is a valid lower
//! bound because each fixed-gear problem is one of its vertices. Branching
//! picks the step whose weights are closest to uniform (lowest index on
//! ties) and creates one child per gear, in order of decreasing relaxed
//! weight. Nodes are processed in `(bound, id)` order.
//!
//! Report columns (one row per section size):
//! `n_steps,exact_solve_time,exact_section_time,exact_nodes,exact_gap,iterative_solve_time,iterative_section_time,difference_ms`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};
use std::time::Instant;

use lapopt_conic::{SolveStatus, SolverSettings};

use crate::config::AlgorithmSettings;
use crate::driver::{initial_gears, run_iterative};
use crate::error::{invalid, Error, Result};
use crate::model::LapModel;
use crate::solution::{ContinuousSolution, GearTrajectory};
use crate::transcription::{build_relaxed, hull_weights, solve_cop, solve_transcription};
use crate::vehicle::PowertrainSpec;

/// Largest number of sequences [`enumerate_exhaustive`] accepts.
pub const ENUMERATION_LIMIT: usize = 100_000;

/// Weight above which a relaxed step counts as integral.
const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    pub id: usize,
    pub fixed: Vec<Option<usize>>,
    /// Relaxation value, s.
    pub bound: f64,
    pub depth: usize,
    /// Relaxed weights per step (`None` where fixed).
    weights: Vec<Option<Vec<f64>>>,
}

impl Eq for BnbNode {}

impl Ord for BnbNode {
    // Reversed so the max-heap pops the smallest (bound, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for BnbNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub gears: GearTrajectory,
    pub solution: ContinuousSolution,
    /// Certified lower bound on the optimal section time, s.
    pub lower_bound: f64,
    /// `solution.lap_time − lower_bound`, s.
    pub gap: f64,
    /// Relaxations (branch and bound) or fixed-gear problems (enumeration)
    /// solved.
    pub nodes: usize,
    /// False when the node budget ran out before the gap closed.
    pub complete: bool,
    pub wall_time: f64,
}

fn relax(
    model: &LapModel,
    fixed: &[Option<usize>],
    solver: &SolverSettings,
) -> Result<Option<(f64, Vec<Option<Vec<f64>>>)>> {
    let t = build_relaxed(model, fixed)?;
    match solve_transcription(&t, solver, Vec::new(), model.step_length) {
        Ok((sol, raw)) => Ok(Some((sol.lap_time, hull_weights(&t, &raw)))),
        Err(Error::NotOptimal(SolveStatus::PrimalInfeasible)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn try_cop(
    model: &LapModel,
    gears: &GearTrajectory,
    solver: &SolverSettings,
) -> Result<Option<ContinuousSolution>> {
    match solve_cop(model, gears, solver) {
        Ok(s) => Ok(Some(s)),
        Err(Error::NotOptimal(SolveStatus::PrimalInfeasible)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (j, x) in w.iter().enumerate() {
        if *x > w[best] {
            best = j;
        }
    }
    best
}

/// Gears with relaxed steps rounded to their heaviest weight.
fn rounded(fixed: &[Option<usize>], weights: &[Option<Vec<f64>>]) -> GearTrajectory {
    GearTrajectory {
        active_gear: fixed
            .iter()
            .zip(weights)
            .map(|(f, w)| {
                f.unwrap_or_else(|| argmax(w.as_deref().expect("relaxed step has weights")))
            })
            .collect(),
    }
}

/// Most fractional relaxed step, or `None` if every step is integral.
fn branching_step(weights: &[Option<Vec<f64>>]) -> Option<usize> {
    let mut pick: Option<(usize, f64)> = None;
    for (i, w) in weights.iter().enumerate() {
        let Some(w) = w else { continue };
        if w.iter().cloned().fold(0.0, f64::max) >= 1.0 - INTEGRALITY_TOLERANCE {
            continue;
        }
        let u = 1.0 / w.len() as f64;
        let dist: f64 = w.iter().map(|x| (x - u) * (x - u)).sum();
        if pick.map_or(true, |(_, d)| dist < d) {
            pick = Some((i, dist));
        }
    }
    pick.map(|(i, _)| i)
}

fn check_size(model: &LapModel, alg: &AlgorithmSettings) -> Result<()> {
    if model.n_steps > alg.max_exact_steps {
        return Err(invalid(format!(
            "{} steps exceed the exact-solve limit of {}",
            model.n_steps, alg.max_exact_steps
        )));
    }
    Ok(())
}

/// Globally optimal gear trajectory by branch and bound.
pub fn solve_exact(
    model: &LapModel,
    solver: &SolverSettings,
    alg: &AlgorithmSettings,
) -> Result<ExactResult> {
    check_size(model, alg)?;
    let start = Instant::now();
    let n = model.n_steps;
    let mut nodes = 0;
    let mut next_id = 0;
    let mut incumbent: Option<(ContinuousSolution, GearTrajectory)> = None;
    let mut heap = BinaryHeap::new();

    let root_fixed = vec![None; n];
    nodes += 1;
    let Some((bound, weights)) = relax(model, &root_fixed, solver)? else {
        return Err(Error::Infeasible(
            "the relaxed section problem is infeasible".into(),
        ));
    };
    heap.push(BnbNode {
        id: next_id,
        fixed: root_fixed,
        bound,
        depth: 0,
        weights,
    });
    next_id += 1;

    let mut complete = true;
    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map_or(f64::INFINITY, |b| b.0.lap_time);
        if node.bound >= best - alg.exact_gap {
            // Best-first: nothing left can beat the incumbent.
            heap.clear();
            break;
        }
        // Round the relaxation for an incumbent (free when it is integral).
        let guess = rounded(&node.fixed, &node.weights);
        if incumbent.as_ref().map_or(true, |b| b.1 != guess) {
            if let Some(sol) = try_cop(model, &guess, solver)? {
                if sol.lap_time < best {
                    incumbent = Some((sol, guess));
                }
            }
        }
        let Some(step) = branching_step(&node.weights) else {
            continue;
        };
        let w = node.weights[step].as_ref().expect("relaxed step");
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        for j in order {
            if nodes >= alg.node_budget {
                complete = false;
                heap.push(node.clone());
                break;
            }
            let mut fixed = node.fixed.clone();
            fixed[step] = Some(j);
            nodes += 1;
            if let Some((b, weights)) = relax(model, &fixed, solver)? {
                heap.push(BnbNode {
                    id: next_id,
                    fixed,
                    // A child's feasible set is a subset of its parent's.
                    bound: b.max(node.bound),
                    depth: node.depth + 1,
                    weights,
                });
                next_id += 1;
            }
        }
        if !complete {
            break;
        }
    }
    let (solution, gears) =
        incumbent.ok_or_else(|| Error::Infeasible("no feasible gear sequence found".into()))?;
    let lower_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(solution.lap_time, f64::min);
    let gap = (solution.lap_time - lower_bound).max(0.0);
    Ok(ExactResult {
        gears,
        solution,
        lower_bound,
        gap,
        nodes,
        complete: complete && gap <= alg.exact_gap,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Solves the fixed-gear problem for every gear sequence and returns the
/// best (first in lexicographic order among equals).
pub fn enumerate_exhaustive(model: &LapModel, solver: &SolverSettings) -> Result<ExactResult> {
    let start = Instant::now();
    let (n, g) = (model.n_steps, model.n_gear());
    let total = (0..n).try_fold(1usize, |acc, _| {
        acc.checked_mul(g).filter(|&t| t <= ENUMERATION_LIMIT)
    });
    let Some(total) = total else {
        return Err(invalid(format!(
            "{g}^{n} gear sequences exceed the enumeration limit of {ENUMERATION_LIMIT}"
        )));
    };
    let mut best: Option<(ContinuousSolution, GearTrajectory)> = None;
    let mut seq = vec![0usize; n];
    for k in 0..total {
        // Step 0 is the most significant digit.
        let mut r = k;
        for i in (0..n).rev() {
            seq[i] = r % g;
            r /= g;
        }
        let gears = GearTrajectory {
            active_gear: seq.clone(),
        };
        if let Some(sol) = try_cop(model, &gears, solver)? {
            if best.as_ref().map_or(true, |b| sol.lap_time < b.0.lap_time) {
                best = Some((sol, gears));
            }
        }
    }
    let (solution, gears) = best
        .ok_or_else(|| Error::Infeasible(format!("all {total} gear sequences are infeasible")))?;
    Ok(ExactResult {
        gears,
        lower_bound: solution.lap_time,
        gap: 0.0,
        solution,
        nodes: total,
        complete: true,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub n_steps: usize,
    pub exact_solve_time: f64,
    pub exact_section_time: f64,
    pub exact_nodes: usize,
    pub exact_gap: f64,
    pub iterative_solve_time: f64,
    pub iterative_section_time: f64,
    pub iterative_converged: bool,
}

impl ValidationRow {
    /// Iterative minus exact section time, ms.
    pub fn difference_ms(&self) -> f64 {
        1e3 * (self.iterative_section_time - self.exact_section_time)
    }
}

/// Exact and iterative solves of the same section model.
pub fn compare_on_section(
    model: &LapModel,
    powertrain: &PowertrainSpec,
    solver: &SolverSettings,
    alg: &AlgorithmSettings,
) -> Result<ValidationRow> {
    let exact = solve_exact(model, solver, alg)?;
    let start = Instant::now();
    let iterative = run_iterative(model, &initial_gears(model, powertrain)?, solver, alg)?;
    Ok(ValidationRow {
        n_steps: model.n_steps,
        exact_solve_time: exact.wall_time,
        exact_section_time: exact.solution.lap_time,
        exact_nodes: exact.nodes,
        exact_gap: exact.gap,
        iterative_solve_time: start.elapsed().as_secs_f64(),
        iterative_section_time: iterative.solution.lap_time,
        iterative_converged: iterative.converged,
    })
}

pub const REPORT_COLUMNS: &str = "n_steps,exact_solve_time,exact_section_time,exact_nodes,exact_gap,iterative_solve_time,iterative_section_time,difference_ms";

pub fn write_validation_report<W: Write>(rows: &[ValidationRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{REPORT_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:?},{:?},{},{:?},{:?},{:?},{:?}",
            r.n_steps,
            r.exact_solve_time,
            r.exact_section_time,
            r.exact_nodes,
            r.exact_gap,
            r.iterative_solve_time,
            r.iterative_section_time,
            r.difference_ms()
        )?;
    }
    Ok(())
}
