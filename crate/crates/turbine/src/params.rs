//! Physical constants of the simulated machine.
//!
//! Everything downstream (plant integration, prediction model, controllers)
//! reads these numbers from one validated struct. The two derived torque
//! coefficients are computed once here so they cannot drift apart:
//! `half_rho_area = 0.5 * rho * pi * R^2` converts wind speed cubed to
//! available power, and `torque_coef = half_rho_area * R` converts
//! `V^2 * Cp / lambda` to aerodynamic torque.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{ConfigError, KvMap};

#[derive(Debug, Clone, PartialEq)]
pub struct TurbineParams {
    /// Rotor radius in m.
    pub rotor_radius: f64,
    /// Air density in kg/m^3.
    pub air_density: f64,
    /// Drivetrain inertia referred to the rotor side, kg*m^2.
    pub inertia: f64,
    /// Generator-to-rotor gear ratio (dimensionless, > 1 for a geared machine).
    pub gearbox_ratio: f64,
    /// Electrical conversion efficiency in (0, 1].
    pub efficiency: f64,
    /// Nameplate electrical power in W.
    pub rated_power: f64,
    /// 0.5 * rho * pi * R^2, in kg/m.
    pub half_rho_area: f64,
    /// half_rho_area * R, in kg.
    pub torque_coef: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    /// A physical quantity was zero, negative, or otherwise out of range.
    #[error("turbine parameter {field} = {value} is out of range")]
    Invalid { field: &'static str, value: f64 },
    #[error("turbine config: {0}")]
    Config(#[from] ConfigError),
}

fn positive(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Invalid { field, value })
    }
}

impl TurbineParams {
    pub fn new(
        rotor_radius: f64,
        air_density: f64,
        inertia: f64,
        gearbox_ratio: f64,
        efficiency: f64,
        rated_power: f64,
    ) -> Result<Self, ParamError> {
        let rotor_radius = positive("rotor_radius", rotor_radius)?;
        let air_density = positive("air_density", air_density)?;
        let inertia = positive("inertia", inertia)?;
        let gearbox_ratio = positive("gearbox_ratio", gearbox_ratio)?;
        let efficiency = positive("efficiency", efficiency)?;
        if efficiency > 1.0 {
            return Err(ParamError::Invalid {
                field: "efficiency",
                value: efficiency,
            });
        }
        let rated_power = positive("rated_power", rated_power)?;
        let half_rho_area = 0.5 * air_density * PI * rotor_radius * rotor_radius;
        let torque_coef = half_rho_area * rotor_radius;
        Ok(TurbineParams {
            rotor_radius,
            air_density,
            inertia,
            gearbox_ratio,
            efficiency,
            rated_power,
            half_rho_area,
            torque_coef,
        })
    }

    /// Loads parameters from `key=value` text (see `data/turbine_3p4mw.txt`).
    pub fn from_kv_text(text: &str) -> Result<Self, ParamError> {
        let kv = KvMap::parse(text)?;
        TurbineParams::new(
            kv.get_f64("rotor_radius_m")?,
            kv.get_f64("air_density_kgpm3")?,
            kv.get_f64("inertia_kgm2")?,
            kv.get_f64("gearbox_ratio")?,
            kv.get_f64("efficiency")?,
            kv.get_f64("rated_power_w")?,
        )
    }
}
