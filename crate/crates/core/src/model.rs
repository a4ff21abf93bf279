//! Per-step view of the car on a given grid: every constant the conic
//! transcription and the Hamiltonian minimization need, in SI units.
//!
//! The machine power limit `|F_m|·v ≤ P_max` is not convex in the states. It
//! is imposed as the tangent of `P_max/v = P_max·√(m/2E)` in the kinetic
//! energy at a reference profile `Ê` (the forward-backward estimate):
//!
//! `|F_m| ≤ P_max·√(m/2Ê)·(3/2 − E/(2Ê))`
//!
//! which is exact at `E = Ê` and conservative elsewhere (the relative error is
//! about `3/8·(E/Ê − 1)²`). Writing the limit through the lethargy instead,
//! `F_m ≤ P_max·q`, would let the optimizer buy force by inflating `q` above
//! `1/v` and break the tightness of the lethargy cone.

use crate::error::{invalid, Result};
use crate::profile::{forward_backward, ProfileLimits};
use crate::track::TrackProfile;
use crate::vehicle::{
    dynamic_mass, effective_mass, max_kinetic_energy, GearModel, PowertrainSpec, TransmissionKind,
    TransmissionSpec, VehicleSpec,
};

/// Boundary conditions of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Flying lap: exit kinetic energy equals entry, the battery starts full
    /// and may deliver at most `battery_consumption_limit`.
    Lap,
    /// Track section: fixed entry kinetic energy, free exit, and a fixed
    /// battery allotment for the section.
    Section {
        entry_kinetic_energy: f64,
        battery_allotment: f64,
    },
}

#[derive(Debug, Clone)]
pub struct LapModel {
    pub n_steps: usize,
    pub step_length: f64,
    pub kind: TransmissionKind,
    /// Translational mass (mass penalty applied).
    pub mass: f64,
    /// Mass in the kinetic energy, `mass × rotational factor`.
    pub dynamic_mass: f64,
    /// Lateral-limit and speed-cap bound on kinetic energy per step, J.
    pub energy_cap: Vec<f64>,
    /// Reference kinetic energy of the power-limit tangent, J.
    pub reference_energy: Vec<f64>,
    /// Power limit `|F_m| ≤ power_offset[i] − power_slope[i]·E[i]`.
    pub power_offset: Vec<f64>,
    pub power_slope: Vec<f64>,
    /// Drag per distance is `aero_per_energy·E`, 1/m.
    pub aero_per_energy: f64,
    pub rolling_force: f64,
    pub brake_front_max: f64,
    pub brake_rear_max: f64,
    pub traction_max: f64,
    pub aux_power: f64,
    pub em_loss_a0: f64,
    pub em_loss_a1: f64,
    pub em_loss_a2: f64,
    pub em_loss_a3: f64,
    pub em_torque_max: f64,
    pub em_speed_max: f64,
    pub em_power_max: f64,
    pub wheel_radius: f64,
    pub inverter_efficiency: f64,
    pub battery_loss: f64,
    pub transmission_efficiency: f64,
    /// Fixed ratios (FGT: one, MGT: n). For a CVT, the two interval ends.
    pub gears: Vec<GearModel>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub battery_capacity: f64,
    pub battery_budget: f64,
    pub boundary: Boundary,
}

impl LapModel {
    pub fn new(
        track: &TrackProfile,
        vehicle: &VehicleSpec,
        pt: &PowertrainSpec,
        trans: &TransmissionSpec,
        boundary: Boundary,
    ) -> Result<Self> {
        track.validate()?;
        vehicle.validate()?;
        pt.validate()?;
        trans.validate()?;
        let mass = effective_mass(vehicle, trans);
        let m_dyn = dynamic_mass(vehicle, trans);
        let energy_cap = max_kinetic_energy(&track.curvature, vehicle, m_dyn);
        let (ratio_min, ratio_max, gears) = match trans.kind {
            TransmissionKind::Cvt => (
                trans.ratio_min,
                trans.ratio_max,
                vec![
                    GearModel::new(trans.ratio_max, vehicle, pt),
                    GearModel::new(trans.ratio_min, vehicle, pt),
                ],
            ),
            _ => (
                trans.ratios[trans.ratios.len() - 1],
                trans.ratios[0],
                trans
                    .ratios
                    .iter()
                    .map(|&g| GearModel::new(g, vehicle, pt))
                    .collect(),
            ),
        };
        let battery_budget = match boundary {
            Boundary::Lap => pt.battery_consumption_limit,
            Boundary::Section {
                entry_kinetic_energy,
                battery_allotment,
            } => {
                if !(entry_kinetic_energy > 0.0 && entry_kinetic_energy.is_finite()) {
                    return Err(invalid("section entry kinetic energy must be positive"));
                }
                if !(battery_allotment >= 0.0 && battery_allotment <= pt.battery_capacity) {
                    return Err(invalid(
                        "section battery allotment must lie in [0, capacity]",
                    ));
                }
                battery_allotment
            }
        };
        let mut model = LapModel {
            n_steps: track.n_steps(),
            step_length: track.step_length,
            kind: trans.kind,
            mass,
            dynamic_mass: m_dyn,
            energy_cap,
            reference_energy: Vec::new(),
            power_offset: Vec::new(),
            power_slope: Vec::new(),
            aero_per_energy: 2.0 * vehicle.aero_coefficient / m_dyn,
            rolling_force: vehicle.rolling_force,
            brake_front_max: vehicle.brake_force_max_front,
            brake_rear_max: vehicle.brake_force_max_rear,
            traction_max: vehicle.traction_force_max,
            aux_power: vehicle.aux_power,
            em_loss_a0: pt.em_loss_a0,
            em_loss_a1: pt.em_loss_a1,
            em_loss_a2: pt.em_loss_a2,
            em_loss_a3: pt.em_loss_a3,
            em_torque_max: pt.em_torque_max,
            em_speed_max: pt.em_speed_max,
            em_power_max: pt.em_power_max,
            wheel_radius: vehicle.wheel_radius,
            inverter_efficiency: pt.inverter_efficiency,
            battery_loss: pt.battery_loss_coefficient,
            transmission_efficiency: trans.efficiency,
            gears,
            ratio_min,
            ratio_max,
            battery_capacity: pt.battery_capacity,
            battery_budget,
            boundary,
        };
        let reference = forward_backward(&ProfileLimits::from_model(&model));
        model.set_power_reference(reference);
        Ok(model)
    }

    /// Re-linearizes the power limit around another reference profile.
    pub fn set_power_reference(&mut self, reference_energy: Vec<f64>) {
        assert_eq!(reference_energy.len(), self.n_steps);
        let p = self.em_power_max;
        let m = self.dynamic_mass;
        let floor = self.energy_floor();
        self.power_offset.clear();
        self.power_slope.clear();
        for e in &reference_energy {
            let e_ref = e.max(floor);
            let f_ref = p * (m / (2.0 * e_ref)).sqrt();
            self.power_offset.push(1.5 * f_ref);
            self.power_slope.push(0.5 * f_ref / e_ref);
        }
        self.reference_energy = reference_energy;
    }

    /// Kinetic energy at 1 m/s; keeps the tangent finite near standstill.
    pub fn energy_floor(&self) -> f64 {
        0.5 * self.dynamic_mass
    }

    pub fn n_gear(&self) -> usize {
        self.gears.len()
    }

    /// Largest kinetic energy the machine speed limit allows in gear `j`.
    pub fn gear_energy_cap(&self, j: usize) -> f64 {
        let v = self.gears[j].speed_max;
        0.5 * self.dynamic_mass * v * v
    }

    /// Kinetic-energy cap at step `i` in gear `j`.
    pub fn step_energy_cap(&self, i: usize, j: usize) -> f64 {
        self.energy_cap[i].min(self.gear_energy_cap(j))
    }

    /// Cap at step `i` over every available ratio.
    pub fn best_energy_cap(&self, i: usize) -> f64 {
        let top = (0..self.n_gear())
            .map(|j| self.gear_energy_cap(j))
            .fold(0.0, f64::max);
        self.energy_cap[i].min(top)
    }

    /// Power-limited machine force bound at kinetic energy `e`.
    pub fn power_force_limit(&self, i: usize, e: f64) -> f64 {
        self.power_offset[i] - self.power_slope[i] * e
    }

    pub fn speed(&self, e: f64) -> f64 {
        (2.0 * e.max(0.0) / self.dynamic_mass).sqrt()
    }

    pub fn energy(&self, v: f64) -> f64 {
        0.5 * self.dynamic_mass * v * v
    }

    /// Inverter: AC-side to DC-side force.
    pub fn dc_from_ac(&self, ac: f64) -> f64 {
        if ac >= 0.0 {
            ac / self.inverter_efficiency
        } else {
            ac * self.inverter_efficiency
        }
    }

    /// Battery force drawn for a DC-side force.
    pub fn battery_from_dc(&self, dc: f64) -> f64 {
        dc + self.battery_loss * dc * dc
    }

    pub fn gearbox_from_motor(&self, f: f64) -> f64 {
        crate::vehicle::gearbox_output(self.transmission_efficiency, f)
    }

    /// Machine loss per distance at speed `v`, force `f` and ratio model `g`.
    pub fn em_loss_per_distance(&self, g: &GearModel, v: f64, f: f64) -> f64 {
        self.em_loss_a0 / v + g.ratio_dependent_loss(v, f)
    }

    /// Battery force for machine force `f` at speed `v` in ratio model `g`,
    /// excluding the auxiliary load.
    pub fn battery_force(&self, g: &GearModel, v: f64, f: f64) -> f64 {
        self.battery_from_dc(self.dc_from_ac(f + self.em_loss_per_distance(g, v, f)))
    }
}
