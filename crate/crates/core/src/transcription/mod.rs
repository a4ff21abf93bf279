//! Space-domain conic transcription of the minimum-lap-time problem.
//!
//! States live on nodes `0..=N` (kinetic energy `E`, battery energy `E_b`);
//! inputs and algebraic variables on steps `0..N`. Forward Euler:
//!
//! ```text
//! E[i+1]   = E[i]   + Δs·(F_gb[i] − 2·c_a·E[i]/m − F_roll − F_brk,F[i] − F_brk,R[i])
//! E_b[i+1] = E_b[i] − Δs·(F_b[i] + P_aux·q[i])
//! ```
//!
//! and the objective is `T = Σ q[i]·Δs`. Per step:
//!
//! - speed cone `v² ≤ 2E/m` and lethargy cone `q·v ≥ 1`
//! - machine loss epigraph `F_ac = F_m + a0·q + c1 + c2·v + c3·2z` with
//!   `2·v·z ≥ F_m²`, where `c1 = a1·γ/r`, `c2 = a2·(γ/r)²`, `c3 = a3·(r/γ)²`
//! - inverter `F_dc ≥ F_ac/η_inv`, `F_dc ≥ η_inv·F_ac`
//! - battery `F_b = F_dc + k_b·w` with `w ≥ F_dc²`
//! - gearbox `F_gb ≤ η·F_m`, `F_gb ≤ F_m/η`
//! - power `|F_m| ≤ α[i] − β[i]·E` (see [`crate::model`]), torque
//!   `|F_m| ≤ τ_max·γ/r`, traction `F_m ≤ F_trac`, brake caps
//! - `E ≤ min(lateral/speed cap, ½·m·(ω_max·r/γ)²)`
//!
//! Internally energies are in kJ and forces in kN so the problem is well
//! scaled; everything handed back is SI.
//!
//! # Census
//!
//! A step with a fixed ratio has 31 variables (four rotated 3-cones, five
//! free, three nonnegative, eleven inequality slacks) and 22 equality rows
//! (seven cone links/fixes, eleven inequalities, the loss, battery and two
//! dynamics rows). The problem adds three variables (exit `E`, exit `E_b`,
//! budget slack) and three rows (periodicity or entry, initial `E_b`,
//! budget): `31·N + 3` variables and `22·N + 3` rows in total.
//!
//! A step relaxed over `n` gears ([`StepMode::Hull`]) replaces the single
//! loss cone by one cone per gear, adds the simplex weights and the
//! disaggregated speed/force bounds: `28 + 7·n` variables and
//! `23 + 3·n` rows. A CVT envelope step with `K` surfaces has `35 + K`
//! variables and `24 + K` rows. See [`census`].

pub mod cvt;
pub mod export;

use lapopt_conic::{solve, ConicProblem, ConicSolution, ProblemBuilder, Row, SolverSettings, Var};

use crate::error::{invalid, Error, Result};
use crate::model::{Boundary, LapModel};
use crate::solution::{ContinuousSolution, GearTrajectory, SolveStats};
use crate::track::TrackProfile;
use crate::vehicle::{PowertrainSpec, TransmissionKind, TransmissionSpec, VehicleSpec};

pub use cvt::CvtEnvelope;

/// J per internal energy unit.
pub const ENERGY_SCALE: f64 = 1e3;
/// N per internal force unit.
pub const FORCE_SCALE: f64 = 1e3;

/// How the ratio-dependent part of a step is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepMode {
    /// Fixed gear (index into the model's gear list).
    Gear(usize),
    /// Convex hull over all gears, with simplex weights.
    Hull,
    /// CVT lower envelope over the ratio interval.
    Envelope,
}

/// Solver indices of one step.
#[derive(Debug, Clone)]
pub struct StepLayout {
    pub kinetic: Var,
    pub battery: Var,
    pub speed: Var,
    pub lethargy: Var,
    pub motor_force: Var,
    pub brake_front: Var,
    pub brake_rear: Var,
    pub gearbox_force: Var,
    pub ac_force: Var,
    pub dc_force: Var,
    pub battery_force: Var,
    /// `z ≥ F_m²/(2v)` (per gear for hull steps).
    pub loss_aux: Vec<Var>,
    /// Simplex weights (hull steps only).
    pub weights: Vec<Var>,
    pub kinetic_row: Row,
    pub battery_row: Row,
    /// Kinetic-energy cap of the step's ratio (gear-weighted on hull steps).
    pub cap_row: Row,
}

#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub steps: Vec<StepLayout>,
    pub modes: Vec<StepMode>,
    pub final_kinetic: Var,
    pub final_battery: Var,
    /// Periodicity (lap) or fixed entry (section) row.
    pub boundary_row: Row,
    pub budget_row: Row,
    pub variable_count: usize,
    pub row_count: usize,
}

impl VariableLayout {
    /// Row of the kinetic-energy recursion into node `i + 1`.
    pub fn kinetic_row(&self, i: usize) -> usize {
        self.steps[i].kinetic_row.0
    }

    pub fn battery_row(&self, i: usize) -> usize {
        self.steps[i].battery_row.0
    }
}

#[derive(Debug, Clone)]
pub struct Transcription {
    pub problem: ConicProblem,
    pub layout: VariableLayout,
}

/// Variable and row counts of one step in the given mode.
pub fn census(mode: StepMode, n_gear: usize, envelope_surfaces: usize) -> (usize, usize) {
    match mode {
        StepMode::Gear(_) => (31, 22),
        StepMode::Hull => (28 + 7 * n_gear, 23 + 3 * n_gear),
        // A gear step plus ℓ, |F|, their two slacks and one slack per surface.
        StepMode::Envelope => (35 + envelope_surfaces, 24 + envelope_surfaces),
    }
}

/// Problem-wide totals for a list of modes.
pub fn total_census(modes: &[StepMode], n_gear: usize, envelope_surfaces: usize) -> (usize, usize) {
    modes.iter().fold((3, 3), |(v, r), m| {
        let (dv, dr) = census(*m, n_gear, envelope_surfaces);
        (v + dv, r + dr)
    })
}

/// Builds the conic program for the given per-step modes.
pub fn build(
    model: &LapModel,
    modes: &[StepMode],
    envelope: Option<&CvtEnvelope>,
) -> Result<Transcription> {
    let n = model.n_steps;
    if modes.len() != n {
        return Err(invalid(format!("{} step modes for {n} steps", modes.len())));
    }
    for (i, m) in modes.iter().enumerate() {
        match *m {
            StepMode::Gear(j) if j >= model.n_gear() => {
                return Err(invalid(format!(
                    "step {i}: gear {} outside 1..={}",
                    j + 1,
                    model.n_gear()
                )))
            }
            StepMode::Envelope if envelope.is_none() => {
                return Err(invalid("envelope step without a fitted envelope"))
            }
            _ => {}
        }
    }
    let es = ENERGY_SCALE;
    let fs = FORCE_SCALE;
    let ds = model.step_length;
    let eta_t = model.transmission_efficiency;
    let eta_i = model.inverter_efficiency;
    let sqrt2 = std::f64::consts::SQRT_2;

    let mut b = ProblemBuilder::new();

    // Allocate every step's cone blocks first so rows can refer to the
    // next node's kinetic energy.
    struct Blocks {
        e: Var,
        bs: Var,
        v: Var,
        q: Var,
        vl: Var,
        r: Var,
        loss: Vec<[Var; 3]>,
        w: Var,
        h: Var,
        d: Var,
    }
    let mut blocks = Vec::with_capacity(n);
    for &mode in modes {
        let spd = b.rotated(3);
        let lt = b.rotated(3);
        let n_loss = if mode == StepMode::Hull {
            model.n_gear()
        } else {
            1
        };
        let loss = (0..n_loss)
            .map(|_| {
                let c = b.rotated(3);
                [c[0], c[1], c[2]]
            })
            .collect();
        let bt = b.rotated(3);
        blocks.push(Blocks {
            e: spd[0],
            bs: spd[1],
            v: spd[2],
            q: lt[0],
            vl: lt[1],
            r: lt[2],
            loss,
            w: bt[0],
            h: bt[1],
            d: bt[2],
        });
    }
    let e_final = b.nonneg();
    let eb_nodes: Vec<Var> = (0..=n).map(|_| b.nonneg()).collect();

    let mut steps = Vec::with_capacity(n);
    for (i, (&mode, blk)) in modes.iter().zip(&blocks).enumerate() {
        let f = b.free();
        let fgb = b.free();
        let fac = b.free();
        let fdc = b.free();
        let fb = b.free();
        let bf = b.nonneg();
        let br = b.nonneg();
        let (e, v, q) = (blk.e, blk.v, blk.q);
        b.set_cost(q, ds);

        b.fix(blk.bs, es / model.dynamic_mass);
        b.eq(&[(blk.vl, 1.0), (v, -1.0)], 0.0);
        b.fix(blk.r, sqrt2);
        b.fix(blk.h, 0.5);
        b.eq(&[(blk.d, 1.0), (fdc, -1.0)], 0.0);

        let a0 = model.em_loss_a0 / fs;
        let mut weights = Vec::new();
        let mut loss_aux = Vec::new();
        let cap_row = match mode {
            StepMode::Gear(j) => {
                let g = &model.gears[j];
                let [vz, z, fz] = blk.loss[0];
                b.eq(&[(vz, 1.0), (v, -1.0)], 0.0);
                b.eq(&[(fz, 1.0), (f, -1.0)], 0.0);
                b.eq(
                    &[
                        (fac, 1.0),
                        (f, -1.0),
                        (q, -a0),
                        (v, -g.per_speed / fs),
                        (z, -2.0 * g.per_force_sq * fs),
                    ],
                    g.constant / fs,
                );
                b.le(&[(f, 1.0)], g.force_max.min(model.traction_max) / fs);
                b.le(&[(f, -1.0)], g.force_max / fs);
                let cap_row = b.le(&[(e, 1.0)], model.step_energy_cap(i, j) / es);
                loss_aux.push(z);
                cap_row
            }
            StepMode::Hull => {
                let ng = model.n_gear();
                weights = (0..ng).map(|_| b.nonneg()).collect();
                let ones: Vec<(Var, f64)> = weights.iter().map(|&w| (w, 1.0)).collect();
                b.eq(&ones, 1.0);
                let mut v_sum = vec![(v, 1.0)];
                let mut f_sum = vec![(f, 1.0)];
                let mut ac = vec![(fac, 1.0), (f, -1.0), (q, -a0)];
                let mut cap = vec![(e, 1.0)];
                for (j, g) in model.gears.iter().enumerate() {
                    let [vj, zj, fj] = blk.loss[j];
                    let wj = weights[j];
                    v_sum.push((vj, -1.0));
                    f_sum.push((fj, -1.0));
                    ac.push((wj, -g.constant / fs));
                    ac.push((vj, -g.per_speed / fs));
                    ac.push((zj, -2.0 * g.per_force_sq * fs));
                    cap.push((wj, -model.gear_energy_cap(j) / es));
                    b.le(&[(vj, 1.0), (wj, -g.speed_max)], 0.0);
                    b.le(&[(fj, 1.0), (wj, -g.force_max / fs)], 0.0);
                    b.le(&[(fj, -1.0), (wj, -g.force_max / fs)], 0.0);
                    loss_aux.push(zj);
                }
                b.eq(&v_sum, 0.0);
                b.eq(&f_sum, 0.0);
                b.eq(&ac, 0.0);
                b.le(&[(f, 1.0)], model.traction_max / fs);
                b.le(&[(e, 1.0)], model.energy_cap[i] / es);
                b.le(&cap, 0.0)
            }
            StepMode::Envelope => {
                let env = envelope.expect("checked above");
                let [vz, z, fz] = blk.loss[0];
                b.eq(&[(vz, 1.0), (v, -1.0)], 0.0);
                b.eq(&[(fz, 1.0), (f, -1.0)], 0.0);
                let ell = b.free();
                let t = b.nonneg();
                b.eq(&[(fac, 1.0), (f, -1.0), (q, -a0), (ell, -1.0)], 0.0);
                b.ge(&[(t, 1.0), (f, -1.0)], 0.0);
                b.ge(&[(t, 1.0), (f, 1.0)], 0.0);
                for s in &env.surfaces {
                    b.ge(
                        &[
                            (ell, 1.0),
                            (v, -s[1] / fs),
                            (t, -s[2]),
                            (z, -2.0 * s[3] * fs),
                        ],
                        s[0] / fs,
                    );
                }
                // Torque at the highest ratio, speed at the lowest.
                let f_max = model.gears[0].force_max;
                b.le(&[(f, 1.0)], f_max.min(model.traction_max) / fs);
                b.le(&[(f, -1.0)], f_max / fs);
                let cap_row = b.le(&[(e, 1.0)], model.best_energy_cap(i) / es);
                loss_aux.push(z);
                cap_row
            }
        };

        b.ge(&[(fdc, 1.0), (fac, -1.0 / eta_i)], 0.0);
        b.ge(&[(fdc, 1.0), (fac, -eta_i)], 0.0);
        b.eq(
            &[(fb, 1.0), (fdc, -1.0), (blk.w, -model.battery_loss * fs)],
            0.0,
        );
        b.le(&[(fgb, 1.0), (f, -eta_t)], 0.0);
        b.le(&[(fgb, 1.0), (f, -1.0 / eta_t)], 0.0);
        let slope = model.power_slope[i];
        let offset = model.power_offset[i] / fs;
        b.le(&[(f, 1.0), (e, slope)], offset);
        b.le(&[(f, -1.0), (e, slope)], offset);
        b.le(&[(bf, 1.0)], model.brake_front_max / fs);
        b.le(&[(br, 1.0)], model.brake_rear_max / fs);

        let e_next = if i + 1 < n { blocks[i + 1].e } else { e_final };
        let kinetic_row = b.eq(
            &[
                (e_next, 1.0),
                (e, -(1.0 - ds * model.aero_per_energy)),
                (fgb, -ds),
                (bf, ds),
                (br, ds),
            ],
            -ds * model.rolling_force / fs,
        );
        let battery_row = b.eq(
            &[
                (eb_nodes[i + 1], 1.0),
                (eb_nodes[i], -1.0),
                (fb, ds),
                (q, ds * model.aux_power / fs),
            ],
            0.0,
        );
        steps.push(StepLayout {
            kinetic: e,
            battery: eb_nodes[i],
            speed: v,
            lethargy: q,
            motor_force: f,
            brake_front: bf,
            brake_rear: br,
            gearbox_force: fgb,
            ac_force: fac,
            dc_force: fdc,
            battery_force: fb,
            loss_aux,
            weights,
            kinetic_row,
            battery_row,
            cap_row,
        });
    }

    let boundary_row = match model.boundary {
        Boundary::Lap => b.eq(&[(e_final, 1.0), (blocks[0].e, -1.0)], 0.0),
        Boundary::Section {
            entry_kinetic_energy,
            ..
        } => b.fix(blocks[0].e, entry_kinetic_energy / es),
    };
    b.fix(eb_nodes[0], model.battery_capacity / es);
    let budget_row = b.le(
        &[(eb_nodes[0], 1.0), (eb_nodes[n], -1.0)],
        model.battery_budget / es,
    );

    let variable_count = b.variable_count();
    let row_count = b.row_count();
    let problem = b.finish()?;
    Ok(Transcription {
        problem,
        layout: VariableLayout {
            steps,
            modes: modes.to_vec(),
            final_kinetic: e_final,
            final_battery: eb_nodes[n],
            boundary_row,
            budget_row,
            variable_count,
            row_count,
        },
    })
}

/// Fixed-gear problem (FGT or MGT with a given gear trajectory).
pub fn build_cop(model: &LapModel, gears: &GearTrajectory) -> Result<Transcription> {
    gears.validate(model.n_steps, model.n_gear())?;
    let modes: Vec<StepMode> = gears
        .active_gear
        .iter()
        .map(|&g| StepMode::Gear(g))
        .collect();
    build(model, &modes, None)
}

/// FGT: the single ratio everywhere. CVT: the fitted lower envelope, or the
/// exact fixed-ratio model when the ratio interval is a single point.
pub fn build_fgt_cvt(model: &LapModel, envelope: Option<&CvtEnvelope>) -> Result<Transcription> {
    match model.kind {
        TransmissionKind::Fgt => build(model, &vec![StepMode::Gear(0); model.n_steps], None),
        TransmissionKind::Cvt => {
            if model.ratio_min == model.ratio_max {
                build(model, &vec![StepMode::Gear(0); model.n_steps], None)
            } else {
                let env = envelope.ok_or_else(|| invalid("CVT build needs a fitted envelope"))?;
                build(model, &vec![StepMode::Envelope; model.n_steps], Some(env))
            }
        }
        TransmissionKind::Mgt => Err(invalid(
            "MGT problems need a gear trajectory; use build_cop",
        )),
    }
}

/// Every step relaxed to the convex hull of its gear models, except the
/// steps fixed in `fixed`.
pub fn build_relaxed(model: &LapModel, fixed: &[Option<usize>]) -> Result<Transcription> {
    if fixed.len() != model.n_steps {
        return Err(invalid("one entry per step required"));
    }
    let modes: Vec<StepMode> = fixed
        .iter()
        .map(|f| match f {
            Some(g) => StepMode::Gear(*g),
            None => StepMode::Hull,
        })
        .collect();
    build(model, &modes, None)
}

/// Maps an optimal solver result back to SI trajectories and costates.
pub fn extract(
    t: &Transcription,
    sol: &ConicSolution,
    design_ratios: Vec<f64>,
    step_length: f64,
) -> Result<ContinuousSolution> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal(sol.status));
    }
    let x = &sol.primal;
    let y = &sol.dual_equality;
    let es = ENERGY_SCALE;
    let fs = FORCE_SCALE;
    let l = &t.layout;
    let get = |v: Var| x[v.0];
    let pick = |f: &dyn Fn(&StepLayout) -> Var, scale: f64| -> Vec<f64> {
        l.steps.iter().map(|s| get(f(s)) * scale).collect()
    };
    let lethargy = pick(&|s| s.lethargy, 1.0);
    Ok(ContinuousSolution {
        step_length,
        kinetic_energy: pick(&|s| s.kinetic, es),
        battery_energy: pick(&|s| s.battery, es),
        velocity: pick(&|s| s.speed, 1.0),
        lap_time: lethargy.iter().sum::<f64>() * step_length,
        lethargy,
        motor_force: pick(&|s| s.motor_force, fs),
        brake_front: pick(&|s| s.brake_front, fs),
        brake_rear: pick(&|s| s.brake_rear, fs),
        gearbox_force: pick(&|s| s.gearbox_force, fs),
        battery_force: pick(&|s| s.battery_force, fs),
        cvt_ratio: None,
        costate_kinetic: l.steps.iter().map(|s| y[s.kinetic_row.0] / es).collect(),
        costate_battery: l.steps.iter().map(|s| y[s.battery_row.0] / es).collect(),
        speed_limit_multiplier: l
            .steps
            .iter()
            .map(|s| (-y[s.cap_row.0] / es).max(0.0))
            .collect(),
        final_kinetic_energy: get(l.final_kinetic) * es,
        final_battery_energy: get(l.final_battery) * es,
        design_ratios,
        solver: SolveStats {
            status: sol.status.name().to_string(),
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            duality_gap: sol.duality_gap,
            objective_value: sol.objective_value,
            solve_time: sol.solve_time,
            variables: t.problem.variable_count(),
            constraints: t.problem.constraint_count(),
        },
    })
}

/// Simplex weights of hull steps (`None` for fixed steps).
pub fn hull_weights(t: &Transcription, sol: &ConicSolution) -> Vec<Option<Vec<f64>>> {
    t.layout
        .steps
        .iter()
        .map(|s| {
            if s.weights.is_empty() {
                None
            } else {
                Some(s.weights.iter().map(|w| sol.primal[w.0]).collect())
            }
        })
        .collect()
}

/// Builds and solves, returning the extracted solution.
pub fn solve_transcription(
    t: &Transcription,
    settings: &SolverSettings,
    design_ratios: Vec<f64>,
    step_length: f64,
) -> Result<(ContinuousSolution, ConicSolution)> {
    let raw = solve(&t.problem, settings)?;
    let sol = extract(t, &raw, design_ratios, step_length)?;
    Ok((sol, raw))
}

/// Solves the fixed-gear problem for `gears`.
pub fn solve_cop(
    model: &LapModel,
    gears: &GearTrajectory,
    settings: &SolverSettings,
) -> Result<ContinuousSolution> {
    let t = build_cop(model, gears)?;
    let ratios = model.gears.iter().map(|g| g.ratio).collect();
    Ok(solve_transcription(&t, settings, ratios, model.step_length)?.0)
}

/// Convenience: model, build and solve for an FGT or CVT.
pub fn solve_fgt_cvt(
    track: &TrackProfile,
    vehicle: &VehicleSpec,
    pt: &PowertrainSpec,
    trans: &TransmissionSpec,
    boundary: Boundary,
    settings: &SolverSettings,
) -> Result<ContinuousSolution> {
    let model = LapModel::new(track, vehicle, pt, trans, boundary)?;
    solve_fixed_design(&model, settings)
}

/// FGT/CVT solve on a prepared model.
pub fn solve_fixed_design(
    model: &LapModel,
    settings: &SolverSettings,
) -> Result<ContinuousSolution> {
    let envelope = match model.kind {
        TransmissionKind::Cvt if model.ratio_min != model.ratio_max => {
            Some(CvtEnvelope::fit(model, settings)?)
        }
        _ => None,
    };
    let t = build_fgt_cvt(model, envelope.as_ref())?;
    let design = match model.kind {
        TransmissionKind::Cvt => vec![model.ratio_max],
        _ => model.gears.iter().map(|g| g.ratio).collect(),
    };
    let (mut sol, _) = solve_transcription(&t, settings, design, model.step_length)?;
    if model.kind == TransmissionKind::Cvt {
        sol.cvt_ratio = Some(cvt::recover_ratios(model, &sol));
    }
    Ok(sol)
}
