//! Forward-backward velocity estimate: accelerate at the drive limit from
//! every point, brake at the brake limit into every point, and keep the
//! pointwise minimum under the kinetic-energy caps. Uses the same
//! forward-Euler energy recursion as the transcription, so the result is a
//! feasible-looking upper envelope for the solved profile.

use crate::model::{Boundary, LapModel};

#[derive(Debug, Clone)]
pub struct ProfileLimits {
    pub step_length: f64,
    pub dynamic_mass: f64,
    /// Per-step cap on kinetic energy, J.
    pub energy_cap: Vec<f64>,
    pub aero_per_energy: f64,
    pub rolling_force: f64,
    pub brake_force: f64,
    pub traction_max: f64,
    pub power_max: f64,
    /// Largest wheel force the machine can deliver in any ratio.
    pub torque_force_max: f64,
    pub entry_energy: Option<f64>,
}

impl ProfileLimits {
    pub fn from_model(m: &LapModel) -> Self {
        ProfileLimits {
            step_length: m.step_length,
            dynamic_mass: m.dynamic_mass,
            energy_cap: (0..m.n_steps).map(|i| m.best_energy_cap(i)).collect(),
            aero_per_energy: m.aero_per_energy,
            rolling_force: m.rolling_force,
            brake_force: m.brake_front_max + m.brake_rear_max,
            traction_max: m.traction_max,
            power_max: m.em_power_max,
            torque_force_max: m.gears.iter().map(|g| g.force_max).fold(0.0, f64::max),
            entry_energy: match m.boundary {
                Boundary::Lap => None,
                Boundary::Section {
                    entry_kinetic_energy,
                    ..
                } => Some(entry_kinetic_energy),
            },
        }
    }

    fn drive_force(&self, e: f64) -> f64 {
        let v = (2.0 * e / self.dynamic_mass).sqrt().max(1e-3);
        self.traction_max
            .min(self.torque_force_max)
            .min(self.power_max / v)
    }

    fn accelerate(&self, e: f64) -> f64 {
        let ds = self.step_length;
        e + ds * (self.drive_force(e) * 0.999 - self.aero_per_energy * e - self.rolling_force)
    }

    /// Largest `E_i` from which braking reaches `e_next` at step `i + 1`.
    fn brake_from(&self, e_next: f64) -> f64 {
        let ds = self.step_length;
        let denom = 1.0 - ds * self.aero_per_energy;
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        (e_next + ds * (self.brake_force + self.rolling_force)) / denom
    }
}

/// Kinetic energy per step, J.
pub fn forward_backward(lim: &ProfileLimits) -> Vec<f64> {
    let n = lim.energy_cap.len();
    let cap = &lim.energy_cap;
    let floor = 0.5 * lim.dynamic_mass;
    match lim.entry_energy {
        Some(e0) => {
            let mut fwd = vec![0.0; n];
            fwd[0] = e0.min(cap[0]);
            for i in 1..n {
                fwd[i] = lim.accelerate(fwd[i - 1]).min(cap[i]).max(floor);
            }
            let mut e = fwd.clone();
            for i in (0..n - 1).rev() {
                e[i] = e[i].min(lim.brake_from(e[i + 1]));
            }
            e
        }
        None => {
            // Start at the tightest cap and sweep the lap twice so the
            // periodic wrap-around settles.
            let start = (0..n)
                .min_by(|&a, &b| cap[a].total_cmp(&cap[b]))
                .unwrap_or(0);
            let mut e = cap.clone();
            let mut cur = cap[start];
            for k in 1..=2 * n {
                let i = (start + k) % n;
                cur = lim.accelerate(cur).min(cap[i]).max(floor);
                e[i] = e[i].min(cur);
            }
            let mut cur = e[start];
            for k in 1..=2 * n {
                let i = (start + 2 * n - k) % n;
                cur = lim.brake_from(cur).min(e[i]);
                e[i] = cur;
            }
            e
        }
    }
}
