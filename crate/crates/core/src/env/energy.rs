//! Solar harvesting, rotary-wing propulsion, per-slot energy and the battery
//! queue.

use super::{EnvError, Mode, SlotTiming};

#[derive(Debug, Clone, PartialEq)]
pub struct PropulsionParams {
    /// Aircraft weight W (N).
    pub weight: f64,
    /// Air density rho (kg/m^3).
    pub air_density: f64,
    /// Rotor radius (m).
    pub rotor_radius: f64,
    /// Rotor disc area (m^2).
    pub rotor_disc_area: f64,
    pub rotor_solidity: f64,
    /// Blade angular velocity zeta (rad/s).
    pub blade_angular_velocity: f64,
    /// Fuselage drag ratio epsilon.
    pub fuselage_drag_ratio: f64,
    /// Profile drag coefficient varpi.
    pub profile_drag_coeff: f64,
    /// Incremental correction factor lambda to induced power.
    pub induced_correction: f64,
}

impl Default for PropulsionParams {
    fn default() -> Self {
        Self {
            weight: 20.0,
            air_density: 1.225,
            rotor_radius: 0.4,
            rotor_disc_area: 0.503,
            rotor_solidity: 0.05,
            blade_angular_velocity: 300.0,
            fuselage_drag_ratio: 0.6,
            profile_drag_coeff: 0.012,
            induced_correction: 0.1,
        }
    }
}

impl PropulsionParams {
    /// Blade profile power in hover.
    pub fn blade_profile_hover(&self) -> f64 {
        self.profile_drag_coeff / 8.0
            * self.air_density
            * self.rotor_solidity
            * self.rotor_disc_area
            * self.blade_angular_velocity.powi(3)
            * self.rotor_radius.powi(3)
    }

    /// Induced power in hover.
    pub fn induced_hover(&self) -> f64 {
        (1.0 + self.induced_correction) * self.weight.powf(1.5)
            / (2.0 * self.air_density * self.rotor_disc_area).sqrt()
    }

    pub fn hover_power(&self) -> f64 {
        self.blade_profile_hover() + self.induced_hover()
    }

    pub fn blade_term(&self, v: f64) -> f64 {
        let tip = self.blade_angular_velocity * self.rotor_radius;
        self.blade_profile_hover() * (1.0 + 3.0 * v * v / (tip * tip))
    }

    pub fn induced_term(&self, v: f64) -> f64 {
        let k = self.air_density * self.rotor_disc_area * v * v / self.weight;
        // sqrt(1 + k^2) - k, written to avoid cancellation at high speed.
        let inner = 1.0 / ((1.0 + k * k).sqrt() + k);
        self.induced_hover() * inner.sqrt()
    }

    pub fn parasite_term(&self, v: f64) -> f64 {
        0.5 * self.fuselage_drag_ratio
            * self.air_density
            * self.rotor_solidity
            * self.rotor_disc_area
            * v.powi(3)
    }

    /// Propulsion power at forward speed `v` (m/s).
    pub fn power(&self, v: f64) -> f64 {
        self.blade_term(v) + self.induced_term(v) + self.parasite_term(v)
    }
}

pub fn propulsion_power(v: f64, params: &PropulsionParams) -> f64 {
    params.power(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestParams {
    pub efficiency: f64,
    /// Equivalent panel area (m^2).
    pub panel_area: f64,
    /// Average solar intensity G (W/m^2).
    pub solar_intensity: f64,
    /// Cloud absorption coefficient beta (1/m).
    pub cloud_absorption: f64,
    /// Cloud thickness values (m), drawn uniformly each slot.
    pub cloud_levels: Vec<f64>,
}

impl Default for HarvestParams {
    fn default() -> Self {
        Self {
            efficiency: 0.4,
            panel_area: 1.0,
            solar_intensity: 1367.0,
            cloud_absorption: 0.01,
            cloud_levels: vec![0.0, 700.0],
        }
    }
}

pub fn harvest_energy(cloud_m: f64, params: &HarvestParams, tau: f64) -> f64 {
    params.efficiency
        * params.panel_area
        * params.solar_intensity
        * (-params.cloud_absorption * cloud_m).exp()
        * tau
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    pub harvest: HarvestParams,
    pub propulsion: PropulsionParams,
    /// Communication circuit power p^c (W).
    pub circuit_power: f64,
    /// Transmit power levels (W), ascending, first entry 0.
    pub power_levels: Vec<f64>,
    /// Battery capacity (J).
    pub e_max: f64,
    /// Energy alarm threshold (J).
    pub e_min_alarm: f64,
    /// Flight speed cap (m/s).
    pub max_speed: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            harvest: HarvestParams::default(),
            propulsion: PropulsionParams::default(),
            circuit_power: 0.01,
            power_levels: vec![0.0, 0.05, 0.10, 0.15, 0.20],
            e_max: 5.0e5,
            e_min_alarm: 5.0e4,
            max_speed: 60.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let levels = &self.power_levels;
        if levels.first() != Some(&0.0) {
            return Err(EnvError::Invalid("power levels must start at 0 W".into()));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EnvError::Invalid("power levels must be strictly ascending".into()));
        }
        if !(self.e_max > self.e_min_alarm && self.e_min_alarm > 0.0) {
            return Err(EnvError::Invalid("need e_max > e_min_alarm > 0".into()));
        }
        if self.harvest.cloud_levels.is_empty() || self.harvest.cloud_levels.iter().any(|c| *c < 0.0) {
            return Err(EnvError::Invalid("cloud levels must be non-empty and >= 0".into()));
        }
        if !(self.max_speed > 0.0) || self.circuit_power < 0.0 {
            return Err(EnvError::Invalid("bad speed cap or circuit power".into()));
        }
        Ok(())
    }
}

/// Total slot energy: flight during `tau1` in mode 1, hover plus
/// communication otherwise.
pub fn total_energy(
    mode: Mode,
    power_w: f64,
    v: f64,
    params: &EnergyParams,
    timing: &SlotTiming,
) -> f64 {
    let hover = params.propulsion.hover_power();
    let comm = hover + power_w + params.circuit_power;
    match mode {
        Mode::Fly => params.propulsion.power(v) * timing.tau1 + comm * timing.tau2,
        Mode::Hover => comm * (timing.tau1 + timing.tau2),
    }
}

/// Battery queue update `min([e - e_total]^+ + harvest, e_max)`.
pub fn step_battery(e: f64, e_total: f64, harvest: f64, e_max: f64) -> f64 {
    ((e - e_total).max(0.0) + harvest).min(e_max)
}
