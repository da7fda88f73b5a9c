//! Closed-loop simulation: one controller commanding the rotor model under
//! zero-order hold, with the plant integrated at a finer fixed step between
//! controller instants. Both controllers in `both` mode consume the same
//! wind series, so their logs differ only through the control channel.

use thiserror::Error;
use turbine::model::{electrical_power, plant_step, rotor_torque, ControlInput, TurbineState};
use turbine::mpc::{mpc_step, MpcError, MpcState};
use turbine::{baseline_step, BaselineError, BaselineState};

use crate::scenario::{ControllerChoice, Setup};
use crate::wind::{generate_wind_scheduled, WindError, WindSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Mpc,
    Baseline,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Baseline => "baseline",
        }
    }
}

/// One logged controller instant; exactly the CSV column set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub time_s: f64,
    pub wind_mps: f64,
    pub power_w: f64,
    pub rotor_speed_rpm: f64,
    pub pitch_deg: f64,
    pub gen_torque_knm: f64,
    pub solve_time_s: f64,
    pub mip_gap: f64,
    pub eps_omega: f64,
    pub d_omega: f64,
}

/// Whole-run energy bookkeeping at integrator resolution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyAudit {
    /// Electrical energy delivered, J.
    pub electrical_j: f64,
    /// Aerodynamic rotor work, J.
    pub mechanical_j: f64,
    /// Kinetic energy released by the rotor (negative when it spun up), J.
    pub inertia_released_j: f64,
}

#[derive(Debug, Clone)]
pub struct SimLog {
    pub controller: ControllerKind,
    pub rows: Vec<LogRow>,
    pub energy: EnergyAudit,
    pub fallback_steps: usize,
    pub total_steps: usize,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("wind generation: {0}")]
    Wind(#[from] WindError),
    #[error("{controller} run stalled the rotor at t = {time_s} s")]
    Stall {
        controller: &'static str,
        time_s: f64,
    },
    #[error(
        "{controller} run aborted at t = {time_s} s: {fallbacks} fallback steps in {steps} \
         ({percent:.1}% > 10%)"
    )]
    FallbackStorm {
        controller: &'static str,
        time_s: f64,
        fallbacks: usize,
        steps: usize,
        percent: f64,
    },
    #[error("controller step: {0}")]
    Mpc(#[from] MpcError),
    #[error("baseline setup: {0}")]
    Baseline(#[from] BaselineError),
}

/// Fallback fraction above which a run is abandoned as misconfigured.
pub const FALLBACK_STORM_FRACTION: f64 = 0.10;
/// Steps before the storm check engages, so one early fallback cannot trip it.
const STORM_CHECK_MIN_STEPS: usize = 30;

/// Runs every controller the scenario selects over one shared wind series.
pub fn run_closed_loop(setup: &Setup) -> Result<Vec<SimLog>, SimError> {
    let sc = &setup.scenario;
    let wind = generate_wind_scheduled(
        &sc.wind_mean,
        sc.wind_ti,
        sc.wind_seed,
        sc.dt_s,
        sc.duration_s,
    )?;
    let kinds: &[ControllerKind] = match sc.controller {
        ControllerChoice::Mpc => &[ControllerKind::Mpc],
        ControllerChoice::Baseline => &[ControllerKind::Baseline],
        ControllerChoice::Both => &[ControllerKind::Mpc, ControllerKind::Baseline],
    };
    kinds
        .iter()
        .map(|&kind| run_one(setup, kind, &wind))
        .collect()
}

enum ControllerState {
    Mpc(MpcState),
    Baseline(BaselineState),
}

/// One controller's full run over a prebuilt wind series.
pub fn run_one(setup: &Setup, kind: ControllerKind, wind: &WindSeries) -> Result<SimLog, SimError> {
    let sc = &setup.scenario;
    let params = &setup.params;
    let substeps = sc.substeps();
    let steps = sc.steps();
    let u0 = ControlInput {
        pitch_deg: sc.pitch0_deg,
        torque_nm: sc.torque0_nm,
    };
    let mut controller = match kind {
        ControllerKind::Mpc => ControllerState::Mpc(MpcState::new(u0)),
        ControllerKind::Baseline => {
            ControllerState::Baseline(BaselineState::init(&setup.baseline_cfg, u0)?)
        }
    };

    let mut state = TurbineState {
        omega: sc.omega0_radps,
    };
    let mut rows = Vec::with_capacity(steps);
    let mut energy = EnergyAudit::default();
    let omega_start = state.omega;
    let mut fallbacks = 0usize;

    for k in 0..steps {
        let t = k as f64 * sc.ts_s;
        let v_now = wind.at(k * substeps);
        let p_demand = sc.p_demand.mean_at(t);

        let (input, solve_time_s, mip_gap, eps_omega, d_omega) = match &mut controller {
            ControllerState::Mpc(mpc_state) => {
                let (input, diag) = mpc_step(
                    params,
                    &setup.mpc_cfg,
                    &setup.pwa,
                    &setup.bigm,
                    mpc_state,
                    state.omega,
                    v_now,
                    p_demand,
                )?;
                if diag.fallback {
                    fallbacks += 1;
                }
                (
                    input,
                    diag.solve_time_s,
                    diag.mip_gap,
                    diag.eps_omega_max,
                    mpc_state.d_omega,
                )
            }
            ControllerState::Baseline(bl_state) => {
                let started = std::time::Instant::now();
                let (input, next) = baseline_step(
                    params.gearbox_ratio * state.omega,
                    p_demand,
                    params.efficiency,
                    bl_state,
                    &setup.baseline_cfg,
                    sc.ts_s,
                );
                *bl_state = next;
                (input, started.elapsed().as_secs_f64(), 0.0, 0.0, 0.0)
            }
        };

        rows.push(LogRow {
            time_s: t,
            wind_mps: v_now,
            power_w: electrical_power(params, state.omega, input.torque_nm),
            rotor_speed_rpm: state.omega * 60.0 / std::f64::consts::TAU,
            pitch_deg: input.pitch_deg,
            gen_torque_knm: input.torque_nm / 1000.0,
            solve_time_s,
            mip_gap,
            eps_omega,
            d_omega,
        });

        for i in 0..substeps {
            let v = wind.at(k * substeps + i);
            let v_next = wind.at(k * substeps + i + 1);
            let before = state;
            state = plant_step(params, &setup.plant_surface, state, input, v, sc.dt_s).map_err(
                |_| SimError::Stall {
                    controller: kind.as_str(),
                    time_s: t + i as f64 * sc.dt_s,
                },
            )?;
            // Trapezoids of aerodynamic power and electrical power over the
            // substep; the endpoints see their own wind samples.
            let mech_a = rotor_torque(params, &setup.plant_surface, before.omega, v, input.pitch_deg)
                * before.omega;
            let mech_b =
                rotor_torque(params, &setup.plant_surface, state.omega, v_next, input.pitch_deg)
                    * state.omega;
            let elec_a = electrical_power(params, before.omega, input.torque_nm);
            let elec_b = electrical_power(params, state.omega, input.torque_nm);
            energy.mechanical_j += 0.5 * (mech_a + mech_b) * sc.dt_s;
            energy.electrical_j += 0.5 * (elec_a + elec_b) * sc.dt_s;
        }

        if kind == ControllerKind::Mpc && k + 1 >= STORM_CHECK_MIN_STEPS {
            let frac = fallbacks as f64 / (k + 1) as f64;
            if frac > FALLBACK_STORM_FRACTION {
                return Err(SimError::FallbackStorm {
                    controller: kind.as_str(),
                    time_s: t,
                    fallbacks,
                    steps: k + 1,
                    percent: 100.0 * frac,
                });
            }
        }
    }

    energy.inertia_released_j =
        0.5 * params.inertia * (omega_start * omega_start - state.omega * state.omega);
    rows.retain(|r| r.time_s >= sc.startup_discard_s);
    Ok(SimLog {
        controller: kind,
        rows,
        energy,
        fallback_steps: fallbacks,
        total_steps: steps,
    })
}
