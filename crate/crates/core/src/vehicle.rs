//! Vehicle, powertrain and transmission parameters, and the convex surrogate
//! component models built on them.
//!
//! Loss models, all per unit distance (force units) so the dynamics stay
//! affine in the states:
//!
//! - aerodynamic drag `2·c_a·E_kin / m_eff`
//! - electric machine `P_loss = a0 + a1·ω + a2·ω² + a3·τ²` with `ω = γ·v/r_w`
//!   and `τ = F_m·r_w/γ`, i.e. per distance
//!   `a0/v + a1·γ/r_w + a2·(γ/r_w)²·v + a3·(r_w/γ)²·F_m²/v`
//! - inverter: constant efficiency, `F_dc = F_ac/η` in traction and `η·F_ac`
//!   when regenerating
//! - battery: `F_b = F_dc + k_b·F_dc²`
//! - transmission: constant efficiency, `F_gb = η·F_m` in traction and
//!   `F_m/η` when regenerating.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSpec {
    /// Mass of the fixed-gear car, kg.
    pub base_mass: f64,
    /// Multiplier folding rotating inertia into the translational mass.
    pub rotational_mass_factor: f64,
    /// Lumped `ρ·c_d·A/2`, kg/m.
    pub aero_coefficient: f64,
    pub rolling_force: f64,
    pub wheel_radius: f64,
    pub lateral_accel_max: f64,
    pub speed_cap: f64,
    pub brake_force_max_front: f64,
    pub brake_force_max_rear: f64,
    pub traction_force_max: f64,
    pub aux_power: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        VehicleSpec {
            base_mass: 1200.0,
            rotational_mass_factor: 1.05,
            aero_coefficient: 1.0,
            rolling_force: 140.0,
            wheel_radius: 0.33,
            lateral_accel_max: 20.0,
            speed_cap: 85.0,
            brake_force_max_front: 14_000.0,
            brake_force_max_rear: 9_000.0,
            traction_force_max: 10_000.0,
            aux_power: 2_000.0,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("base_mass", self.base_mass),
            ("aero_coefficient", self.aero_coefficient),
            ("wheel_radius", self.wheel_radius),
            ("lateral_accel_max", self.lateral_accel_max),
            ("speed_cap", self.speed_cap),
            ("brake_force_max_front", self.brake_force_max_front),
            ("brake_force_max_rear", self.brake_force_max_rear),
            ("traction_force_max", self.traction_force_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("vehicle.{name} must be positive, got {v}")));
            }
        }
        if !(self.rotational_mass_factor >= 1.0 && self.rotational_mass_factor.is_finite()) {
            return Err(invalid("vehicle.rotational_mass_factor must be >= 1"));
        }
        for (name, v) in [
            ("rolling_force", self.rolling_force),
            ("aux_power", self.aux_power),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "vehicle.{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowertrainSpec {
    /// Constant machine loss, W.
    pub em_loss_a0: f64,
    /// Loss linear in rotor speed, W·s/rad.
    pub em_loss_a1: f64,
    /// Loss quadratic in rotor speed, W·s²/rad².
    pub em_loss_a2: f64,
    /// Loss quadratic in torque, W/(N·m)².
    pub em_loss_a3: f64,
    pub em_torque_max: f64,
    pub em_speed_max: f64,
    pub em_power_max: f64,
    pub inverter_efficiency: f64,
    /// Battery energy at the start of the lap, J.
    pub battery_capacity: f64,
    /// Energy the battery may deliver over the horizon, J.
    pub battery_consumption_limit: f64,
    /// Quadratic battery loss in the force domain, 1/N.
    pub battery_loss_coefficient: f64,
}

impl Default for PowertrainSpec {
    fn default() -> Self {
        PowertrainSpec {
            em_loss_a0: 500.0,
            em_loss_a1: 0.5,
            em_loss_a2: 0.002,
            em_loss_a3: 0.0625,
            em_torque_max: 250.0,
            em_speed_max: 1000.0,
            em_power_max: 250_000.0,
            inverter_efficiency: 0.97,
            battery_capacity: 20.0e6,
            battery_consumption_limit: 10.0e6,
            battery_loss_coefficient: 3.0e-6,
        }
    }
}

impl PowertrainSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("em_loss_a0", self.em_loss_a0),
            ("em_loss_a1", self.em_loss_a1),
            ("em_loss_a2", self.em_loss_a2),
            ("em_loss_a3", self.em_loss_a3),
            ("battery_loss_coefficient", self.battery_loss_coefficient),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "powertrain.{name} must be nonnegative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("em_torque_max", self.em_torque_max),
            ("em_speed_max", self.em_speed_max),
            ("em_power_max", self.em_power_max),
            ("battery_capacity", self.battery_capacity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "powertrain.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.inverter_efficiency > 0.0 && self.inverter_efficiency <= 1.0) {
            return Err(invalid("powertrain.inverter_efficiency must lie in (0, 1]"));
        }
        if !(self.battery_consumption_limit > 0.0
            && self.battery_consumption_limit <= self.battery_capacity)
        {
            return Err(invalid(
                "powertrain.battery_consumption_limit must lie in (0, battery_capacity]",
            ));
        }
        Ok(())
    }

    /// Machine loss power at rotor speed `omega` (rad/s) and torque (N·m).
    pub fn em_loss(&self, omega: f64, torque: f64) -> f64 {
        self.em_loss_a0
            + self.em_loss_a1 * omega.abs()
            + self.em_loss_a2 * omega * omega
            + self.em_loss_a3 * torque * torque
    }

    /// Rotor speed of best efficiency at half the peak torque, where
    /// `(P_loss)/ω` is smallest: `ω* = √((a0 + a3·(τ_max/2)²)/a2)`, capped at
    /// the speed limit.
    pub fn best_efficiency_speed(&self) -> f64 {
        let tau = 0.5 * self.em_torque_max;
        if self.em_loss_a2 <= 0.0 {
            return self.em_speed_max;
        }
        ((self.em_loss_a0 + self.em_loss_a3 * tau * tau) / self.em_loss_a2)
            .sqrt()
            .min(self.em_speed_max)
    }

    /// Inverter: AC-side to DC-side power (or force).
    pub fn dc_from_ac(&self, ac: f64) -> f64 {
        if ac >= 0.0 {
            ac / self.inverter_efficiency
        } else {
            ac * self.inverter_efficiency
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionKind {
    Fgt,
    Mgt,
    Cvt,
}

impl TransmissionKind {
    pub fn name(self) -> &'static str {
        match self {
            TransmissionKind::Fgt => "fgt",
            TransmissionKind::Mgt => "mgt",
            TransmissionKind::Cvt => "cvt",
        }
    }
}

/// Default efficiencies per transmission kind.
pub const FGT_EFFICIENCY: f64 = 0.985;
pub const MGT_EFFICIENCY: f64 = 0.975;
pub const CVT_EFFICIENCY: f64 = 0.92;
/// Mass added per gear beyond the first, as a fraction of the base mass.
pub const MGT_MASS_PENALTY_PER_GEAR: f64 = 0.0037;
pub const CVT_MASS_PENALTY: f64 = 0.026;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionSpec {
    pub kind: TransmissionKind,
    /// Gear ratios, strictly decreasing (empty for a CVT).
    #[serde(default)]
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub ratio_min: f64,
    #[serde(default)]
    pub ratio_max: f64,
    pub n_gear: usize,
    pub efficiency: f64,
    #[serde(default = "default_gear_penalty")]
    pub mass_penalty_per_gear: f64,
    #[serde(default = "default_cvt_penalty")]
    pub cvt_mass_penalty: f64,
}

fn default_gear_penalty() -> f64 {
    MGT_MASS_PENALTY_PER_GEAR
}

fn default_cvt_penalty() -> f64 {
    CVT_MASS_PENALTY
}

impl TransmissionSpec {
    pub fn fgt(ratio: f64) -> Self {
        TransmissionSpec {
            kind: TransmissionKind::Fgt,
            ratios: vec![ratio],
            ratio_min: 0.0,
            ratio_max: 0.0,
            n_gear: 1,
            efficiency: FGT_EFFICIENCY,
            mass_penalty_per_gear: MGT_MASS_PENALTY_PER_GEAR,
            cvt_mass_penalty: CVT_MASS_PENALTY,
        }
    }

    pub fn mgt(ratios: Vec<f64>) -> Self {
        TransmissionSpec {
            kind: TransmissionKind::Mgt,
            n_gear: ratios.len(),
            ratios,
            ratio_min: 0.0,
            ratio_max: 0.0,
            efficiency: MGT_EFFICIENCY,
            mass_penalty_per_gear: MGT_MASS_PENALTY_PER_GEAR,
            cvt_mass_penalty: CVT_MASS_PENALTY,
        }
    }

    pub fn cvt(ratio_min: f64, ratio_max: f64) -> Self {
        TransmissionSpec {
            kind: TransmissionKind::Cvt,
            ratios: Vec::new(),
            ratio_min,
            ratio_max,
            n_gear: 0,
            efficiency: CVT_EFFICIENCY,
            mass_penalty_per_gear: MGT_MASS_PENALTY_PER_GEAR,
            cvt_mass_penalty: CVT_MASS_PENALTY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(invalid("transmission.efficiency must lie in (0, 1]"));
        }
        if !(self.mass_penalty_per_gear >= 0.0 && self.cvt_mass_penalty >= 0.0) {
            return Err(invalid("transmission mass penalties must be nonnegative"));
        }
        match self.kind {
            TransmissionKind::Fgt | TransmissionKind::Mgt => {
                if self.kind == TransmissionKind::Fgt && self.ratios.len() != 1 {
                    return Err(invalid("an FGT has exactly one ratio"));
                }
                if self.ratios.is_empty() {
                    return Err(invalid("an MGT needs at least one ratio"));
                }
                if self.n_gear != self.ratios.len() {
                    return Err(invalid(format!(
                        "transmission.n_gear = {} but {} ratios given",
                        self.n_gear,
                        self.ratios.len()
                    )));
                }
                if self.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(invalid("gear ratios must be positive"));
                }
                if self.ratios.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(invalid("gear ratios must be strictly decreasing"));
                }
            }
            TransmissionKind::Cvt => {
                if !(self.ratio_min > 0.0
                    && self.ratio_min <= self.ratio_max
                    && self.ratio_max.is_finite())
                {
                    return Err(invalid("a CVT needs 0 < ratio_min <= ratio_max"));
                }
            }
        }
        Ok(())
    }

    /// The design variables: all ratios for FGT/MGT, `ratio_max` for a CVT.
    pub fn design_ratios(&self) -> Vec<f64> {
        match self.kind {
            TransmissionKind::Cvt => vec![self.ratio_max],
            _ => self.ratios.clone(),
        }
    }

    /// Same transmission with the design variables replaced.
    pub fn with_design(&self, design: &[f64]) -> Self {
        let mut t = self.clone();
        match t.kind {
            TransmissionKind::Cvt => t.ratio_max = design[0],
            _ => {
                t.ratios = design.to_vec();
                t.n_gear = design.len();
            }
        }
        t
    }

    /// Label used on the command line and in reports (`fgt`, `mgt3`, `cvt`).
    pub fn label(&self) -> String {
        match self.kind {
            TransmissionKind::Mgt => format!("mgt{}", self.n_gear),
            k => k.name().to_string(),
        }
    }
}

/// Translational mass of the car fitted with `trans`, before the rotational
/// factor.
pub fn effective_mass(vehicle: &VehicleSpec, trans: &TransmissionSpec) -> f64 {
    let m0 = vehicle.base_mass;
    match trans.kind {
        TransmissionKind::Fgt => m0,
        TransmissionKind::Mgt => {
            m0 * (1.0 + trans.mass_penalty_per_gear * trans.n_gear.saturating_sub(1) as f64)
        }
        TransmissionKind::Cvt => m0 * (1.0 + trans.cvt_mass_penalty),
    }
}

/// Mass used in the longitudinal dynamics, `E_kin = ½·m_dyn·v²`.
pub fn dynamic_mass(vehicle: &VehicleSpec, trans: &TransmissionSpec) -> f64 {
    effective_mass(vehicle, trans) * vehicle.rotational_mass_factor
}

/// Per-step kinetic-energy cap from the speed cap and the lateral limit
/// `v² ≤ a_lat,max / |κ|`.
pub fn max_kinetic_energy(curvature: &[f64], vehicle: &VehicleSpec, mass: f64) -> Vec<f64> {
    let straight = 0.5 * mass * vehicle.speed_cap * vehicle.speed_cap;
    curvature
        .iter()
        .map(|k| {
            if *k == 0.0 {
                straight
            } else {
                straight.min(mass * vehicle.lateral_accel_max / (2.0 * k.abs()))
            }
        })
        .collect()
}

/// Per-distance machine-loss coefficients for one fixed ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GearModel {
    pub ratio: f64,
    /// `a1·γ/r_w`, N.
    pub constant: f64,
    /// `a2·(γ/r_w)²`, N·s/m.
    pub per_speed: f64,
    /// `a3·(r_w/γ)²`, multiplies `F_m²/v`, s/(kg·m)·m… i.e. 1/(N·s/m).
    pub per_force_sq: f64,
    /// Largest wheel-referred machine force at peak torque, N.
    pub force_max: f64,
    /// Road speed at the machine speed limit, m/s.
    pub speed_max: f64,
}

impl GearModel {
    pub fn new(ratio: f64, vehicle: &VehicleSpec, pt: &PowertrainSpec) -> Self {
        let r = vehicle.wheel_radius;
        let g = ratio / r;
        GearModel {
            ratio,
            constant: pt.em_loss_a1 * g,
            per_speed: pt.em_loss_a2 * g * g,
            per_force_sq: pt.em_loss_a3 / (g * g),
            force_max: pt.em_torque_max * g,
            speed_max: pt.em_speed_max / g,
        }
    }

    /// Machine loss per distance at speed `v` and wheel-referred force `f`,
    /// excluding the `a0/v` term that does not depend on the ratio.
    pub fn ratio_dependent_loss(&self, v: f64, f: f64) -> f64 {
        self.constant + self.per_speed * v + self.per_force_sq * f * f / v
    }
}

/// Gearbox output force for a machine force.
pub fn gearbox_output(efficiency: f64, motor_force: f64) -> f64 {
    if motor_force >= 0.0 {
        efficiency * motor_force
    } else {
        motor_force / efficiency
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn car(m0: f64) -> VehicleSpec {
        VehicleSpec {
            base_mass: m0,
            ..VehicleSpec::default()
        }
    }

    #[test]
    fn mass_penalties() {
        let v = car(1000.0);
        assert_eq!(effective_mass(&v, &TransmissionSpec::fgt(8.0)), 1000.0);
        let m3 = effective_mass(&v, &TransmissionSpec::mgt(vec![10.0, 8.0, 6.0]));
        assert!((m3 - 1007.4).abs() < 1e-9);
        let cvt = effective_mass(&v, &TransmissionSpec::cvt(4.0, 12.0));
        assert!((cvt - 1026.0).abs() < 1e-9);
    }

    #[test]
    fn mass_ordering_for_defaults() {
        let v = VehicleSpec::default();
        let fgt = effective_mass(&v, &TransmissionSpec::fgt(8.0));
        let mut prev = fgt;
        for n in 2..=4 {
            let ratios: Vec<f64> = (0..n).map(|i| 12.0 - i as f64).collect();
            let m = effective_mass(&v, &TransmissionSpec::mgt(ratios));
            assert!(m > prev);
            prev = m;
        }
        assert!(effective_mass(&v, &TransmissionSpec::cvt(4.0, 12.0)) > prev);
    }

    #[test]
    fn kinetic_energy_caps() {
        let v = VehicleSpec {
            lateral_accel_max: 30.0,
            speed_cap: 100.0,
            ..VehicleSpec::default()
        };
        let e = max_kinetic_energy(&[0.01, 0.0, -0.01], &v, 1000.0);
        assert!((e[0] - 1.5e6).abs() < 1e-6);
        assert!((e[1] - 5.0e6).abs() < 1e-6);
        assert_eq!(e[0], e[2]);
    }

    #[test]
    fn transmission_validation() {
        assert!(TransmissionSpec::mgt(vec![8.0, 9.0]).validate().is_err());
        assert!(TransmissionSpec::mgt(vec![9.0, 8.0]).validate().is_ok());
        assert!(TransmissionSpec::cvt(5.0, 4.0).validate().is_err());
        let mut t = TransmissionSpec::mgt(vec![9.0, 8.0]);
        t.n_gear = 3;
        assert!(t.validate().is_err());
    }

    #[test]
    fn gear_model_matches_power_form() {
        let v = VehicleSpec::default();
        let pt = PowertrainSpec::default();
        let g = GearModel::new(8.0, &v, &pt);
        let (speed, force) = (40.0, 3000.0);
        let omega = 8.0 * speed / v.wheel_radius;
        let torque = force * v.wheel_radius / 8.0;
        let per_distance = pt.em_loss_a0 / speed + g.ratio_dependent_loss(speed, force);
        assert!((per_distance * speed - pt.em_loss(omega, torque)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn energy_cap_monotone_in_curvature(k1 in 0.0f64..0.1, k2 in 0.0f64..0.1) {
            let v = VehicleSpec::default();
            let e = max_kinetic_energy(&[k1, k2, -k2], &v, 1260.0);
            if k1 <= k2 {
                prop_assert!(e[0] >= e[1]);
            } else {
                prop_assert!(e[0] <= e[1]);
            }
            prop_assert_eq!(e[1], e[2]);
        }

        #[test]
        fn mgt_mass_monotone_in_gears(n in 1usize..6, m0 in 500.0f64..2000.0) {
            let v = car(m0);
            let a = effective_mass(&v, &TransmissionSpec::mgt((0..n).map(|i| 20.0 - i as f64).collect()));
            let b = effective_mass(&v, &TransmissionSpec::mgt((0..=n).map(|i| 20.0 - i as f64).collect()));
            prop_assert!(b >= a);
        }
    }
}
