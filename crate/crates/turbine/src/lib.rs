//! Wind turbine plant model, power-coefficient tooling, and two generator
//! controllers built on top of it.
//!
//! The crate is organized around one physical model (`params`, `cp`,
//! `model`) shared by everything else:
//!
//! - `pwa` fits a continuous piecewise-affine surrogate to a tabulated power
//!   coefficient surface and encodes region membership as mixed-integer
//!   linear rows.
//! - `mpc` assembles and solves the receding-horizon economic controller on
//!   that encoding, with an additive disturbance observer for offset-free
//!   power tracking.
//! - `baseline` is the industry-style filtered torque schedule plus
//!   gain-scheduled PI pitch loop used for comparison.
//! - `loads` post-processes command and response series into rainflow
//!   cycles, damage-equivalent loads, and actuator travel.
//! - `config` is the shared `key=value` file format all on-disk settings
//!   use.

pub mod baseline;
pub mod config;
pub mod cp;
pub mod loads;
pub mod model;
pub mod mpc;
pub mod params;
pub mod pwa;

pub use baseline::{
    baseline_step, lp_filter, omega_g_target, pitch_target, saturate_and_slew, torque_target,
    BaselineConfig, BaselineError, BaselineState,
};
pub use config::{ConfigError, KvMap};
pub use cp::{synthetic_cp, CpError, CpSurface, BETZ_LIMIT};
pub use loads::{
    actuator_travel, damage_equivalent_load, rainflow, reversal_count, turning_points, Cycle,
};
pub use model::{
    discrete_predict, electrical_power, plant_step, rotor_torque, tip_speed_ratio, wind_power,
    ControlInput, StallError, TurbineState,
};
pub use mpc::{
    mpc_step, observer_update, MpcConfig, MpcDiagnostics, MpcError, MpcState, StepInputs,
};
pub use params::{ParamError, TurbineParams};
pub use pwa::{
    build_partition, compute_bigm, encode_bigm, fit_pwa, pwa_eval, pwa_from_text, pwa_to_text,
    BigMData, PwaError, PwaSurface, QuadPartition, Rect,
};
