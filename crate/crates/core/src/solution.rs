//! Solved trajectories and the power-chain audit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::LapModel;
use crate::vehicle::GearModel;

/// Active gear per step, 0-based (`0` is the highest ratio). Reports and
/// files print gears 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GearTrajectory {
    pub active_gear: Vec<usize>,
}

impl GearTrajectory {
    pub fn constant(n_steps: usize, gear: usize) -> Self {
        GearTrajectory {
            active_gear: vec![gear; n_steps],
        }
    }

    pub fn len(&self) -> usize {
        self.active_gear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_gear.is_empty()
    }

    pub fn validate(&self, n_steps: usize, n_gear: usize) -> Result<()> {
        if self.active_gear.len() != n_steps {
            return Err(invalid(format!(
                "gear trajectory has {} entries for {n_steps} steps",
                self.active_gear.len()
            )));
        }
        if let Some(i) = self.active_gear.iter().position(|&g| g >= n_gear) {
            return Err(invalid(format!(
                "step {i}: gear {} outside 1..={n_gear}",
                self.active_gear[i] + 1
            )));
        }
        Ok(())
    }

    /// Number of steps where `self` and `other` differ.
    pub fn changes_from(&self, other: &GearTrajectory) -> usize {
        self.active_gear
            .iter()
            .zip(&other.active_gear)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// One-hot encoding, `b[i][j] = 1` iff gear `j` is active at step `i`.
    pub fn one_hot(&self, n_gear: usize) -> Vec<Vec<u8>> {
        self.active_gear
            .iter()
            .map(|&g| (0..n_gear).map(|j| u8::from(j == g)).collect())
            .collect()
    }

    pub fn shift_count(&self) -> usize {
        self.active_gear.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Solver statistics carried along with a solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: String,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub objective_value: f64,
    pub solve_time: f64,
    pub variables: usize,
    pub constraints: usize,
}

/// States, inputs and costates per step `i` (values at the start of the
/// step), plus the exit states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub step_length: f64,
    /// J
    pub kinetic_energy: Vec<f64>,
    /// J
    pub battery_energy: Vec<f64>,
    /// m/s
    pub velocity: Vec<f64>,
    /// s/m
    pub lethargy: Vec<f64>,
    /// Machine force referred to the wheels, N.
    pub motor_force: Vec<f64>,
    pub brake_front: Vec<f64>,
    pub brake_rear: Vec<f64>,
    /// Transmission output force, N.
    pub gearbox_force: Vec<f64>,
    /// Battery-side force including conversion losses (auxiliary load
    /// excluded), N.
    pub battery_force: Vec<f64>,
    /// Operating ratio per step (CVT only).
    pub cvt_ratio: Option<Vec<f64>>,
    /// `∂T/∂E_kin` after step `i`, s/J.
    pub costate_kinetic: Vec<f64>,
    /// `∂T/∂E_bat` after step `i`, s/J.
    pub costate_battery: Vec<f64>,
    /// `−∂T/∂cap` of the kinetic-energy cap at step `i`, s/J (≥ 0).
    #[serde(default)]
    pub speed_limit_multiplier: Vec<f64>,
    pub final_kinetic_energy: f64,
    pub final_battery_energy: f64,
    /// s
    pub lap_time: f64,
    pub design_ratios: Vec<f64>,
    pub solver: SolveStats,
}

impl ContinuousSolution {
    /// All-zero trajectory of `n` steps.
    pub fn empty(n: usize, step_length: f64) -> Self {
        ContinuousSolution {
            step_length,
            kinetic_energy: vec![0.0; n],
            battery_energy: vec![0.0; n],
            velocity: vec![0.0; n],
            lethargy: vec![0.0; n],
            motor_force: vec![0.0; n],
            brake_front: vec![0.0; n],
            brake_rear: vec![0.0; n],
            gearbox_force: vec![0.0; n],
            battery_force: vec![0.0; n],
            cvt_ratio: None,
            costate_kinetic: vec![0.0; n],
            costate_battery: vec![0.0; n],
            speed_limit_multiplier: vec![0.0; n],
            final_kinetic_energy: 0.0,
            final_battery_energy: 0.0,
            lap_time: 0.0,
            design_ratios: Vec::new(),
            solver: SolveStats::default(),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.lethargy.len()
    }

    /// `Σ q[i]·Δs`
    pub fn integrated_time(&self) -> f64 {
        self.lethargy.iter().sum::<f64>() * self.step_length
    }

    /// Kinetic energy at node `i` (`i = n_steps` is the exit).
    pub fn kinetic_at(&self, i: usize) -> f64 {
        if i == self.n_steps() {
            self.final_kinetic_energy
        } else {
            self.kinetic_energy[i]
        }
    }

    pub fn battery_at(&self, i: usize) -> f64 {
        if i == self.n_steps() {
            self.final_battery_energy
        } else {
            self.battery_energy[i]
        }
    }

    /// Energy used from the battery over the horizon, J.
    pub fn battery_used(&self) -> f64 {
        self.battery_energy[0] - self.final_battery_energy
    }

    /// Cumulative elapsed time at the start of each step, s.
    pub fn elapsed_time(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.lethargy
            .iter()
            .map(|q| {
                let now = t;
                t += q * self.step_length;
                now
            })
            .collect()
    }
}

/// Power flows per step, W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub battery: Vec<f64>,
    pub dc_link: Vec<f64>,
    pub ac: Vec<f64>,
    pub mechanical: Vec<f64>,
    pub gearbox_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAudit {
    pub powers: PowerBreakdown,
    /// Solver battery power minus the reconstructed one, W. Positive where
    /// a loss epigraph is not tight.
    pub slack: Vec<f64>,
    /// `max |slack| / (|P_b| + P_aux + 1 W)` over steps.
    pub max_relative_slack: f64,
}

/// Rebuilds the power chain from the solved machine force and speed.
/// `ratios[i]` is the operating ratio at step `i`.
pub fn audit_powers(
    sol: &ContinuousSolution,
    model: &LapModel,
    ratios: &[f64],
) -> Result<PowerAudit> {
    let n = sol.n_steps();
    if ratios.len() != n {
        return Err(invalid("one ratio per step required"));
    }
    let mut p = PowerBreakdown {
        battery: Vec::with_capacity(n),
        dc_link: Vec::with_capacity(n),
        ac: Vec::with_capacity(n),
        mechanical: Vec::with_capacity(n),
        gearbox_out: Vec::with_capacity(n),
    };
    let mut slack = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let v = sol.velocity[i];
        let f = sol.motor_force[i];
        let gamma = ratios[i];
        let omega = gamma * v / model.wheel_radius;
        let tau = f * model.wheel_radius / gamma;
        let loss = model.em_loss_a0
            + model.em_loss_a1 * omega.abs()
            + model.em_loss_a2 * omega * omega
            + model.em_loss_a3 * tau * tau;
        let p_m = f * v;
        let p_gb = model.gearbox_from_motor(f) * v;
        let p_ac = p_m + loss;
        let p_dc = model.dc_from_ac(p_ac);
        // Battery loss is quadratic in the per-distance DC force.
        let f_dc = p_dc / v;
        let p_b = (f_dc + model.battery_loss * f_dc * f_dc) * v + model.aux_power;
        let modeled = sol.battery_force[i] * v + model.aux_power;
        let s = modeled - p_b;
        worst = worst.max(s.abs() / (p_b.abs() + model.aux_power + 1.0));
        p.battery.push(p_b);
        p.dc_link.push(p_dc);
        p.ac.push(p_ac);
        p.mechanical.push(p_m);
        p.gearbox_out.push(p_gb);
        slack.push(s);
    }
    Ok(PowerAudit {
        powers: p,
        slack,
        max_relative_slack: worst,
    })
}

/// Operating ratio per step for a fixed-ratio solution.
pub fn gear_ratios(gears: &GearTrajectory, models: &[GearModel]) -> Vec<f64> {
    gears.active_gear.iter().map(|&g| models[g].ratio).collect()
}
