//! Gear choice by pointwise Hamiltonian minimization.
//!
//! With the states and costates fixed, each step is independent:
//!
//! `H_j = q + λ_E·(F_gb − F_aero − F_roll − F_brk) − λ_b·(F_b + P_aux·q)`
//!
//! with `q = 1/v`, `v = √(2E/m)`, and the inputs evaluated in gear `j`.
//! Brakes enter only through their sum, so they go to the cap when `λ_E > 0`
//! and to zero otherwise (split front/rear in proportion to the caps). The
//! machine force `F` is a scalar over a box; the Hamiltonian in `F` is a
//! piecewise polynomial of degree ≤ 4 with breaks at `F = 0` (gearbox
//! direction) and at the zeros of the AC force (inverter direction). Each
//! piece is split further at the inflection points of its derivative, which
//! leaves intervals where the derivative is monotone; its root there is found
//! by bisection. The minimum over the box is then the best of the endpoints,
//! breaks and roots.
//!
//! The per-gear speed limit `E ≤ cap_j` is adjoined with its multiplier
//! `μ = −∂T/∂cap` from the last convex solve: gear `j` pays
//! `μ·(E − cap_j)/Δs`. Without it a binding limit soaks up the kinetic
//! costate (`λ_E ≈ 0` there), and a gear that caps the speed looks no worse
//! than a taller one.

use std::io::{self, Write};

use crate::error::{invalid, Error, Result};
use crate::model::LapModel;
use crate::solution::{ContinuousSolution, GearTrajectory};
use crate::vehicle::GearModel;

/// Ties closer than this favor the previous gear, then the lowest index.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Relative slack on the machine speed limit for states coming from an
/// interior-point solve.
pub const SPEED_LIMIT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inputs {
    pub motor_force: f64,
    pub brake_front: f64,
    pub brake_rear: f64,
}

impl Inputs {
    pub fn brake(&self) -> f64 {
        self.brake_front + self.brake_rear
    }
}

/// Per-step result: Hamiltonian per gear (`+∞` where infeasible), the
/// chosen gear and its minimizing inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSample {
    pub step: usize,
    pub values: Vec<f64>,
    pub gear: usize,
    pub inputs: Inputs,
}

/// `q + λ_E·(dE/ds) + λ_b·(dE_b/ds)`.
pub fn hamiltonian_from_rates(
    lethargy: f64,
    lam_kinetic: f64,
    kinetic_rate: f64,
    lam_battery: f64,
    battery_rate: f64,
) -> f64 {
    lethargy + lam_kinetic * kinetic_rate + lam_battery * battery_rate
}

struct StepData<'a> {
    model: &'a LapModel,
    gear: &'a GearModel,
    v: f64,
    q: f64,
    lam_k: f64,
    lam_b: f64,
}

impl StepData<'_> {
    fn ac_constant(&self) -> f64 {
        self.model.em_loss_a0 * self.q + self.gear.constant + self.gear.per_speed * self.v
    }

    fn ac_quadratic(&self) -> f64 {
        self.gear.per_force_sq / self.v
    }

    fn ac(&self, f: f64) -> f64 {
        self.ac_quadratic() * f * f + f + self.ac_constant()
    }

    fn battery(&self, f: f64) -> f64 {
        self.model
            .battery_from_dc(self.model.dc_from_ac(self.ac(f)))
    }

    /// The part of `H` that depends on the machine force.
    fn g(&self, f: f64) -> f64 {
        self.lam_k * self.model.gearbox_from_motor(f) - self.lam_b * self.battery(f)
    }

    /// Derivative of `g` on a piece with gearbox factor `s` and inverter
    /// factor `k`.
    fn dg(&self, f: f64, s: f64, k: f64) -> f64 {
        let alpha = self.ac_quadratic();
        let cb = self.model.battery_loss;
        self.lam_k * s - self.lam_b * (k + 2.0 * cb * k * k * self.ac(f)) * (2.0 * alpha * f + 1.0)
    }

    /// Zeros of the second derivative of `g` on a piece (inflection points
    /// of the cubic derivative).
    fn inflections(&self, k: f64) -> Vec<f64> {
        let alpha = self.ac_quadratic();
        let cb = self.model.battery_loss;
        if alpha <= 0.0 || cb <= 0.0 {
            return Vec::new();
        }
        // With p = 2αF + 1: 3·c_b·k²·p² = c_b·k² − 2αk − 4α·c_b·k²·C.
        let c = self.ac_constant();
        let p2 = (cb * k * k - 2.0 * alpha * k - 4.0 * alpha * cb * k * k * c) / (3.0 * cb * k * k);
        if p2 <= 0.0 {
            return Vec::new();
        }
        let p = p2.sqrt();
        vec![(-p - 1.0) / (2.0 * alpha), (p - 1.0) / (2.0 * alpha)]
    }

    /// Zeros of the AC force.
    fn ac_roots(&self) -> Vec<f64> {
        let a = self.ac_quadratic();
        let c = self.ac_constant();
        if a <= 0.0 {
            return if c != 0.0 { vec![-c] } else { vec![0.0] };
        }
        let disc = 1.0 - 4.0 * a * c;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        // Stable form of the two roots.
        let r1 = (-1.0 - sq) / (2.0 * a);
        let r2 = if r1 != 0.0 { c / (a * r1) } else { 0.0 };
        vec![r1.min(r2), r1.max(r2)]
    }

    /// Minimizer of `g` over `[lo, hi]`.
    fn minimize(&self, lo: f64, hi: f64) -> f64 {
        let eta_t = self.model.transmission_efficiency;
        let eta_i = self.model.inverter_efficiency;
        let mut breaks = vec![lo, hi];
        for x in std::iter::once(0.0).chain(self.ac_roots()) {
            if x > lo && x < hi {
                breaks.push(x);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut candidates = breaks.clone();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let s = if mid >= 0.0 { eta_t } else { 1.0 / eta_t };
            let k = if self.ac(mid) >= 0.0 {
                1.0 / eta_i
            } else {
                eta_i
            };
            let mut sub = vec![a, b];
            sub.extend(self.inflections(k).into_iter().filter(|x| *x > a && *x < b));
            sub.sort_by(f64::total_cmp);
            for u in sub.windows(2) {
                if let Some(r) = bisect(|x| self.dg(x, s, k), u[0], u[1]) {
                    candidates.push(r);
                }
            }
        }
        let mut best = candidates[0];
        let mut best_g = self.g(best);
        for &c in &candidates[1..] {
            let gc = self.g(c);
            if gc < best_g {
                best = c;
                best_g = gc;
            }
        }
        best
    }
}

/// Sign-change root of a monotone function on `[a, b]`.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Machine-force box in gear `j` at kinetic energy `e`, or `None` if the
/// gear cannot run at this speed.
pub fn force_bounds(model: &LapModel, step: usize, e: f64, gear: usize) -> Option<(f64, f64)> {
    if e > model.gear_energy_cap(gear) * (1.0 + SPEED_LIMIT_SLACK) {
        return None;
    }
    let g = &model.gears[gear];
    let p = model.power_force_limit(step, e).max(0.0);
    let hi = g.force_max.min(model.traction_max).min(p);
    let lo = -g.force_max.min(p);
    Some((lo, hi))
}

/// Hamiltonian at given inputs, `+∞` when the inputs or gear are infeasible.
pub fn hamiltonian(
    model: &LapModel,
    step: usize,
    e: f64,
    lam_kinetic: f64,
    lam_battery: f64,
    gear: usize,
    inputs: &Inputs,
) -> f64 {
    let Some((lo, hi)) = force_bounds(model, step, e, gear) else {
        return f64::INFINITY;
    };
    let tol = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let f = inputs.motor_force;
    if f < lo - tol
        || f > hi + tol
        || inputs.brake_front < -tol
        || inputs.brake_rear < -tol
        || inputs.brake_front > model.brake_front_max + tol
        || inputs.brake_rear > model.brake_rear_max + tol
    {
        return f64::INFINITY;
    }
    let v = model.speed(e);
    let q = 1.0 / v;
    let d = StepData {
        model,
        gear: &model.gears[gear],
        v,
        q,
        lam_k: lam_kinetic,
        lam_b: lam_battery,
    };
    let kinetic_rate = model.gearbox_from_motor(f)
        - model.aero_per_energy * e
        - model.rolling_force
        - inputs.brake();
    let battery_rate = -(d.battery(f) + model.aux_power * q);
    hamiltonian_from_rates(q, lam_kinetic, kinetic_rate, lam_battery, battery_rate)
}

/// Best inputs and Hamiltonian value in one gear.
pub fn minimize_gear(
    model: &LapModel,
    step: usize,
    e: f64,
    lam_kinetic: f64,
    lam_battery: f64,
    gear: usize,
) -> Option<(f64, Inputs)> {
    let (lo, hi) = force_bounds(model, step, e, gear)?;
    if lo > hi {
        return None;
    }
    let v = model.speed(e);
    let d = StepData {
        model,
        gear: &model.gears[gear],
        v,
        q: 1.0 / v,
        lam_k: lam_kinetic,
        lam_b: lam_battery,
    };
    let f = d.minimize(lo, hi);
    let (bf, br) = if lam_kinetic > 0.0 {
        (model.brake_front_max, model.brake_rear_max)
    } else {
        (0.0, 0.0)
    };
    let inputs = Inputs {
        motor_force: f,
        brake_front: bf,
        brake_rear: br,
    };
    let h = hamiltonian(model, step, e, lam_kinetic, lam_battery, gear, &inputs);
    Some((h, inputs))
}

/// Knobs of the per-step minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GopOptions {
    /// Weight of the lethargy term (`w·q + λ_E·… + λ_b·…`). The inner
    /// minimizer does not depend on it; only the gear values scale.
    pub time_weight: f64,
    /// Gears within this band of the minimum count as tied, s/m.
    pub tie_tolerance: f64,
}

impl Default for GopOptions {
    fn default() -> Self {
        GopOptions {
            time_weight: 1.0,
            tie_tolerance: TIE_TOLERANCE,
        }
    }
}

/// Minimizes over gears and inputs at one step.
pub fn minimize_step(
    model: &LapModel,
    step: usize,
    e: f64,
    lam_kinetic: f64,
    lam_battery: f64,
    previous_gear: Option<usize>,
) -> Result<HamiltonianSample> {
    minimize_step_with(
        model,
        step,
        e,
        lam_kinetic,
        lam_battery,
        0.0,
        previous_gear,
        &GopOptions::default(),
    )
}

/// [`minimize_step`] with a speed-limit multiplier (s/J) and options.
#[allow(clippy::too_many_arguments)]
pub fn minimize_step_with(
    model: &LapModel,
    step: usize,
    e: f64,
    lam_kinetic: f64,
    lam_battery: f64,
    speed_limit_multiplier: f64,
    previous_gear: Option<usize>,
    opts: &GopOptions,
) -> Result<HamiltonianSample> {
    if !(e > 0.0) {
        return Err(invalid(format!(
            "step {step}: kinetic energy must be positive"
        )));
    }
    let mut values = vec![f64::INFINITY; model.n_gear()];
    let mut inputs = vec![None; model.n_gear()];
    for j in 0..model.n_gear() {
        if let Some((h, u)) = minimize_gear(model, step, e, lam_kinetic, lam_battery, j) {
            let limit =
                speed_limit_multiplier * (e - model.step_energy_cap(step, j)) / model.step_length;
            values[j] = h + (opts.time_weight - 1.0) / model.speed(e) + limit;
            inputs[j] = Some(u);
        }
    }
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::StepInfeasible { step });
    }
    let near = |j: usize| values[j] <= best + opts.tie_tolerance;
    let gear = match previous_gear {
        Some(p) if p < values.len() && near(p) => p,
        _ => (0..values.len())
            .find(|&j| near(j))
            .expect("a finite minimum exists"),
    };
    Ok(HamiltonianSample {
        step,
        gear,
        inputs: inputs[gear].expect("finite value has inputs"),
        values,
    })
}

/// Result of one GOP pass.
#[derive(Debug, Clone)]
pub struct GopResult {
    pub gears: GearTrajectory,
    pub samples: Vec<HamiltonianSample>,
}

impl GopResult {
    /// `H(previous gear) − H(chosen gear)` per step (`+∞` if the previous
    /// gear became infeasible).
    pub fn improvement(&self, previous: &GearTrajectory) -> Vec<f64> {
        self.samples
            .iter()
            .zip(&previous.active_gear)
            .map(|(s, &p)| s.values[p] - s.values[s.gear])
            .collect()
    }
}

/// Relative distance to the cap within which a speed limit counts as active.
pub const ACTIVE_LIMIT_TOLERANCE: f64 = 1e-6;

/// Speed-limit multiplier at step `i`, zero unless the limit of `gear` is
/// active (interior-point duals of slack rows are small but not zero).
fn active_multiplier(model: &LapModel, sol: &ContinuousSolution, i: usize, gear: usize) -> f64 {
    let mu = sol.speed_limit_multiplier.get(i).copied().unwrap_or(0.0);
    let cap = model.step_energy_cap(i, gear.min(model.n_gear() - 1));
    if sol.kinetic_energy[i] >= cap * (1.0 - ACTIVE_LIMIT_TOLERANCE) {
        mu
    } else {
        0.0
    }
}

/// Applies [`minimize_step_with`] at every step, taking the speed-limit
/// multipliers from `sol`.
pub fn solve_gop(
    model: &LapModel,
    sol: &ContinuousSolution,
    lam_kinetic: &[f64],
    lam_battery: &[f64],
    previous: &GearTrajectory,
    opts: &GopOptions,
) -> Result<GopResult> {
    let n = model.n_steps;
    if sol.n_steps() != n || lam_kinetic.len() != n || lam_battery.len() != n || previous.len() != n
    {
        return Err(invalid("GOP inputs must all have one entry per step"));
    }
    let samples = (0..n)
        .map(|i| {
            minimize_step_with(
                model,
                i,
                sol.kinetic_energy[i],
                lam_kinetic[i],
                lam_battery[i],
                active_multiplier(model, sol, i, previous.active_gear[i]),
                Some(previous.active_gear[i]),
                opts,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GopResult {
        gears: GearTrajectory {
            active_gear: samples.iter().map(|s| s.gear).collect(),
        },
        samples,
    })
}

/// Debug dump: `step,gear,H_1,…,H_n` (1-based gears, `inf` where
/// infeasible).
pub fn write_hamiltonian_dump<W: Write>(samples: &[HamiltonianSample], mut w: W) -> io::Result<()> {
    let n_gear = samples.first().map_or(0, |s| s.values.len());
    let heads: Vec<String> = (1..=n_gear).map(|j| format!("H_{j}")).collect();
    writeln!(w, "step,gear,{}", heads.join(","))?;
    for s in samples {
        let vals: Vec<String> = s.values.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{},{},{}", s.step, s.gear + 1, vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
