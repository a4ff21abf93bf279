//! The iterative COP ↔ GOP algorithm and the outer search over gear ratios.
//!
//! Each outer iteration solves the convex problem for the current gear
//! trajectory, smooths its costates, `λ̃ = (1 − β)·λ̃_prev + β·λ`, and lets
//! the pointwise Hamiltonian minimization pick the next gear trajectory. The
//! loop stops once the gear trajectory repeats exactly and the lap time has
//! settled.
//!
//! Two safeguards:
//!
//! * **Recovery.** GOP ignores the dynamics, so its proposal may leave the
//!   convex problem infeasible. Changed steps are then reverted to the
//!   previous gear, those with the smallest Hamiltonian gain first, in
//!   batches of 1, 2, 4, … until the problem solves again (reverting all of
//!   them restores the previous, feasible trajectory).
//! * **Cycle guard.** If a proposal repeats an earlier, non-adjacent
//!   trajectory, β is halved. Once `max_beta_halvings` halvings are used up,
//!   further cycles widen the tie band of the gear choice instead: the band
//!   becomes twice the largest Hamiltonian gain among the steps that keep
//!   flipping, and the loop restarts from the best trajectory solved so far.
//!   Such steps are near-ties whose preference reverses with the costate
//!   jump that the switch itself causes, so no damping settles them.
//!   After [`MAX_TIE_WIDENINGS`] widenings the best iterate is returned
//!   flagged as not converged.

use std::io::{self, Write};
use std::time::Instant;

use lapopt_conic::SolverSettings;

use crate::config::AlgorithmSettings;
use crate::error::{invalid, Error, Result};
use crate::gop::{solve_gop, GopOptions, GopResult};
use crate::model::{Boundary, LapModel};
use crate::solution::{ContinuousSolution, GearTrajectory};
use crate::track::TrackProfile;
use crate::transcription::{solve_cop, solve_fixed_design};
use crate::vehicle::{PowertrainSpec, TransmissionKind, TransmissionSpec, VehicleSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct DampedCostates {
    pub kinetic: Vec<f64>,
    pub battery: Vec<f64>,
}

impl DampedCostates {
    pub fn from_solution(sol: &ContinuousSolution) -> Self {
        DampedCostates {
            kinetic: sol.costate_kinetic.clone(),
            battery: sol.costate_battery.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.kinetic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinetic.is_empty()
    }
}

/// Exponential smoothing of costates; with no history the fresh values are
/// returned unchanged.
pub fn damp(
    previous: Option<&DampedCostates>,
    fresh: &DampedCostates,
    beta: f64,
) -> Result<DampedCostates> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("damping factor must lie in (0, 1]"));
    }
    if fresh.kinetic.len() != fresh.battery.len() {
        return Err(invalid("costate families differ in length"));
    }
    let Some(prev) = previous else {
        return Ok(fresh.clone());
    };
    if prev.kinetic.len() != fresh.kinetic.len() || prev.battery.len() != fresh.battery.len() {
        return Err(invalid("damped and fresh costates differ in length"));
    }
    let mix = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, f)| (1.0 - beta) * p + beta * f)
            .collect()
    };
    Ok(DampedCostates {
        kinetic: mix(&prev.kinetic, &fresh.kinetic),
        battery: mix(&prev.battery, &fresh.battery),
    })
}

/// Starting gears: at every step, the gear whose machine speed on the
/// forward-backward velocity estimate is feasible and closest to the
/// machine's best-efficiency speed.
pub fn initial_gears(model: &LapModel, powertrain: &PowertrainSpec) -> Result<GearTrajectory> {
    let target = powertrain.best_efficiency_speed();
    let active_gear = model
        .reference_energy
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let v = model.speed(e);
            (0..model.n_gear())
                .filter(|&j| v <= model.gears[j].speed_max)
                .min_by(|&a, &b| {
                    let w =
                        |j: usize| (model.gears[j].ratio / model.wheel_radius * v - target).abs();
                    w(a).total_cmp(&w(b))
                })
                .ok_or_else(|| invalid(format!("step {i}: no gear can reach {v:.2} m/s")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GearTrajectory { active_gear })
}

/// Cycle-guard budget for widening the gear tie band.
pub const MAX_TIE_WIDENINGS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub lap_time: f64,
    /// Steps where GOP's proposal differs from the trajectory just solved.
    pub gear_changes: usize,
    pub beta: f64,
    /// Tie band of the gear choice, s/m.
    pub tie_tolerance: f64,
    pub solver_iterations: u32,
    /// Steps reverted by the infeasibility recovery before this solve.
    pub reverted_steps: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct IterativeResult {
    pub solution: ContinuousSolution,
    pub gears: GearTrajectory,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Damped costates that produced the final gear choice.
    pub costates: DampedCostates,
    /// Tie band in force at the end, s/m.
    pub tie_tolerance: f64,
}

impl IterativeResult {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

struct Proposal {
    gop: GopResult,
    from: GearTrajectory,
}

/// Solves the COP for `candidate`, reverting parts of a GOP proposal while it
/// stays infeasible. Returns the solution, the trajectory actually solved and
/// the number of reverted steps.
fn solve_with_recovery(
    model: &LapModel,
    candidate: GearTrajectory,
    proposal: Option<&Proposal>,
    settings: &SolverSettings,
) -> Result<(ContinuousSolution, GearTrajectory, usize)> {
    let first = solve_cop(model, &candidate, settings);
    let Some(p) = proposal else {
        return first.map(|s| (s, candidate, 0));
    };
    match first {
        Ok(s) => return Ok((s, candidate, 0)),
        Err(Error::NotOptimal(status)) => {
            log::info!("proposed gears rejected ({}); reverting", status.name())
        }
        Err(e) => return Err(e),
    }
    let gain = p.gop.improvement(&p.from);
    let mut changed: Vec<usize> = (0..candidate.len())
        .filter(|&i| candidate.active_gear[i] != p.from.active_gear[i])
        .collect();
    changed.sort_by(|&a, &b| gain[a].total_cmp(&gain[b]).then(a.cmp(&b)));
    let mut batch = 1;
    loop {
        let n = batch.min(changed.len());
        let mut trial = candidate.clone();
        for &i in &changed[..n] {
            trial.active_gear[i] = p.from.active_gear[i];
        }
        match solve_cop(model, &trial, settings) {
            Ok(s) => return Ok((s, trial, n)),
            Err(Error::NotOptimal(_)) if n < changed.len() => batch *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// The iterative algorithm on a fixed-ratio model.
pub fn run_iterative(
    model: &LapModel,
    initial: &GearTrajectory,
    solver: &SolverSettings,
    alg: &AlgorithmSettings,
) -> Result<IterativeResult> {
    alg.validate()?;
    initial.validate(model.n_steps, model.n_gear())?;
    let mut beta = alg.beta;
    let mut halvings = 0;
    let mut gop_opts = GopOptions {
        tie_tolerance: alg.tie_tolerance,
        ..GopOptions::default()
    };
    let mut widenings = 0;
    let mut gears = initial.clone();
    let mut proposal: Option<Proposal> = None;
    let mut damped: Option<DampedCostates> = None;
    let mut history: Vec<GearTrajectory> = Vec::new();
    let mut records = Vec::new();
    let mut best: Option<(ContinuousSolution, GearTrajectory, DampedCostates)> = None;
    let mut previous_time: Option<f64> = None;

    for k in 1..=alg.max_outer_iterations {
        let start = Instant::now();
        let (sol, solved, reverted) = solve_with_recovery(model, gears, proposal.as_ref(), solver)?;
        let fresh = DampedCostates::from_solution(&sol);
        let lam = damp(damped.as_ref(), &fresh, beta)?;
        let gop = solve_gop(model, &sol, &lam.kinetic, &lam.battery, &solved, &gop_opts)?;
        let changes = gop.gears.changes_from(&solved);
        records.push(IterationRecord {
            iteration: k,
            lap_time: sol.lap_time,
            gear_changes: changes,
            beta,
            tie_tolerance: gop_opts.tie_tolerance,
            solver_iterations: sol.solver.iterations,
            reverted_steps: reverted,
            wall_time: start.elapsed().as_secs_f64(),
        });
        log::debug!(
            "iteration {k}: T = {:.6} s, {changes} gear changes, β = {beta}",
            sol.lap_time
        );

        let settled =
            previous_time.is_some_and(|t| (sol.lap_time - t).abs() <= alg.lap_time_tolerance);
        if best.as_ref().map_or(true, |b| sol.lap_time < b.0.lap_time) {
            best = Some((sol.clone(), solved.clone(), lam.clone()));
        }
        if changes == 0 && settled {
            return Ok(IterativeResult {
                solution: sol,
                gears: solved,
                records,
                converged: true,
                costates: lam,
                tie_tolerance: gop_opts.tie_tolerance,
            });
        }
        previous_time = Some(sol.lap_time);

        // A proposal equal to something solved before the last iterate is a
        // limit cycle.
        let cycles = changes > 0 && history.iter().any(|h| *h == gop.gears);
        history.push(solved.clone());
        if cycles {
            if halvings < alg.max_beta_halvings {
                halvings += 1;
                beta *= 0.5;
                log::info!("gear trajectory cycles; β halved to {beta}");
            } else if widenings < MAX_TIE_WIDENINGS {
                widenings += 1;
                let gain = gop.improvement(&solved);
                let widest = (0..solved.len())
                    .filter(|&i| gop.gears.active_gear[i] != solved.active_gear[i])
                    .map(|i| gain[i])
                    .fold(0.0, f64::max);
                gop_opts.tie_tolerance = gop_opts.tie_tolerance.max(2.0 * widest);
                history.clear();
                log::info!(
                    "gear trajectory cycles; tie band widened to {:e} s/m",
                    gop_opts.tie_tolerance
                );
                // Settle on the best member of the cycle, not on whichever
                // one the cycle happened to reach.
                let (_, best_gears, best_lam) = best.as_ref().expect("at least one iteration ran");
                gears = best_gears.clone();
                damped = Some(best_lam.clone());
                proposal = None;
                continue;
            } else {
                log::warn!("gear trajectory keeps cycling; returning the best iterate");
                break;
            }
        }
        gears = gop.gears.clone();
        proposal = Some(Proposal { gop, from: solved });
        damped = Some(lam);
    }
    let (solution, gears, costates) = best.expect("at least one iteration ran");
    Ok(IterativeResult {
        solution,
        gears,
        records,
        converged: false,
        costates,
        tie_tolerance: gop_opts.tie_tolerance,
    })
}

/// Trace columns: `iteration,lap_time,lap_time_minus_final,gear_changes,beta,tie_tolerance,solver_iterations,reverted_steps,wall_time`.
/// The difference to the final lap time is signed.
pub fn write_trace_csv<W: Write>(records: &[IterationRecord], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "iteration,lap_time,lap_time_minus_final,gear_changes,beta,tie_tolerance,solver_iterations,reverted_steps,wall_time"
    )?;
    let last = records.last().map_or(0.0, |r| r.lap_time);
    for r in records {
        writeln!(
            w,
            "{},{:?},{:?},{},{:?},{:?},{},{},{:?}",
            r.iteration,
            r.lap_time,
            r.lap_time - last,
            r.gear_changes,
            r.beta,
            r.tie_tolerance,
            r.solver_iterations,
            r.reverted_steps,
            r.wall_time
        )?;
    }
    Ok(())
}

/// One lap (or section) optimization for any transmission: a convex solve
/// for FGT/CVT, the iterative algorithm for an MGT.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solution: ContinuousSolution,
    pub gears: Option<GearTrajectory>,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

pub struct Problem<'a> {
    pub track: &'a TrackProfile,
    pub vehicle: &'a VehicleSpec,
    pub powertrain: &'a PowertrainSpec,
    pub boundary: Boundary,
    pub solver: &'a SolverSettings,
    pub algorithm: &'a AlgorithmSettings,
}

impl Problem<'_> {
    pub fn model(&self, trans: &TransmissionSpec) -> Result<LapModel> {
        LapModel::new(
            self.track,
            self.vehicle,
            self.powertrain,
            trans,
            self.boundary,
        )
    }

    pub fn run(&self, trans: &TransmissionSpec) -> Result<RunOutcome> {
        let model = self.model(trans)?;
        if trans.kind != TransmissionKind::Mgt {
            return Ok(RunOutcome {
                solution: solve_fixed_design(&model, self.solver)?,
                gears: None,
                records: Vec::new(),
                converged: true,
            });
        }
        let start = initial_gears(&model, self.powertrain)?;
        let r = run_iterative(&model, &start, self.solver, self.algorithm)?;
        Ok(RunOutcome {
            solution: r.solution,
            gears: Some(r.gears),
            records: r.records,
            converged: r.converged,
        })
    }
}

/// Golden-section resolution of the design search, in ratio units.
pub const RATIO_RESOLUTION: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub transmission: TransmissionSpec,
    pub outcome: RunOutcome,
    /// Every evaluated design and its lap time (`∞` where the run failed).
    pub evaluations: Vec<(Vec<f64>, f64)>,
}

struct Evaluator<'a, 'b> {
    problem: &'a Problem<'b>,
    template: &'a TransmissionSpec,
    evaluations: Vec<(Vec<f64>, f64)>,
    best: Option<(Vec<f64>, RunOutcome)>,
}

impl Evaluator<'_, '_> {
    fn eval(&mut self, design: &[f64]) -> f64 {
        if let Some((_, t)) = self.evaluations.iter().find(|(d, _)| d == design) {
            return *t;
        }
        let t = match self.problem.run(&self.template.with_design(design)) {
            Ok(out) => {
                let t = out.solution.lap_time;
                if self
                    .best
                    .as_ref()
                    .map_or(true, |(_, b)| t < b.solution.lap_time)
                {
                    self.best = Some((design.to_vec(), out));
                }
                t
            }
            Err(e) => {
                log::info!("design {design:?} failed: {e}");
                f64::INFINITY
            }
        };
        self.evaluations.push((design.to_vec(), t));
        t
    }

    /// Golden-section search on coordinate `j` within `[lo, hi]`.
    fn line_search(&mut self, design: &mut [f64], j: usize, lo: f64, hi: f64) {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let at = |x: f64, d: &mut [f64], ev: &mut Self| {
            d[j] = x;
            ev.eval(d)
        };
        let current = design[j];
        let f_current = at(current, design, self);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = at(x1, design, self);
        let mut f2 = at(x2, design, self);
        while b - a > RATIO_RESOLUTION {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = at(x1, design, self);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = at(x2, design, self);
            }
        }
        let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        design[j] = if f < f_current { x } else { current };
    }
}

/// Coordinate-wise golden-section search over the design ratios (all gear
/// ratios for FGT/MGT, the top ratio for a CVT) within the algorithm's ratio
/// bounds, keeping MGT ratios decreasing and at least `ratio_spacing` apart.
/// Cyclic passes stop once a pass gains less than `design_tolerance`.
pub fn design_search(problem: &Problem<'_>, template: &TransmissionSpec) -> Result<DesignResult> {
    let alg = problem.algorithm;
    alg.validate()?;
    let (lower, upper) = match template.kind {
        TransmissionKind::Cvt => (template.ratio_min.max(alg.ratio_lower), alg.ratio_upper),
        _ => (alg.ratio_lower, alg.ratio_upper),
    };
    let n = template.design_ratios().len();
    let spacing = if n > 1 { alg.ratio_spacing } else { 0.0 };
    if lower > upper || (n as f64 - 1.0) * spacing > upper - lower {
        return Err(invalid(format!(
            "empty ratio box: [{lower}, {upper}] cannot hold {n} ratios {spacing} apart"
        )));
    }
    // Start from the template, pushed into the box.
    let mut design = template.design_ratios();
    for j in 0..n {
        let hi = upper - spacing * j as f64;
        let lo = lower + spacing * (n - 1 - j) as f64;
        design[j] = design[j].clamp(lo, hi);
        if j > 0 {
            design[j] = design[j].min(design[j - 1] - spacing);
        }
    }
    let mut ev = Evaluator {
        problem,
        template,
        evaluations: Vec::new(),
        best: None,
    };
    let mut incumbent = ev.eval(&design);
    if upper - lower > RATIO_RESOLUTION {
        loop {
            for j in 0..n {
                let hi = if j == 0 {
                    upper
                } else {
                    design[j - 1] - spacing
                };
                let lo = if j + 1 == n {
                    lower
                } else {
                    design[j + 1] + spacing
                };
                if hi - lo > RATIO_RESOLUTION {
                    ev.line_search(&mut design, j, lo, hi);
                }
            }
            let t = ev.eval(&design);
            let gain = incumbent - t;
            incumbent = incumbent.min(t);
            if !(gain >= alg.design_tolerance) || n == 1 {
                break;
            }
        }
    }
    let (design, outcome) = ev
        .best
        .take()
        .ok_or_else(|| Error::Validation("no design in the ratio box could be solved".into()))?;
    Ok(DesignResult {
        transmission: template.with_design(&design),
        outcome,
        evaluations: ev.evaluations,
    })
}
