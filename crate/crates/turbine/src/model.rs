//! Rigid drivetrain plant model and the controllers' one-step predictor.
//!
//! The continuous plant is J * domega/dt = M_r(omega, V, theta) - N_g * u_M
//! with the generator torque u_M commanded on the generator side. The
//! aerodynamic torque is M_r = torque_coef * V^2 * Cp / lambda; outside the
//! tabulated Cp box the operating point is clamped to the box edge for both
//! the coefficient lookup and the lambda division, so the torque map
//! saturates instead of blowing up as the rotor slows.
//!
//! `plant_step` integrates one zero-order-hold interval with classic RK4 and
//! reports a stall if the rotor speed reaches zero at any stage, since the
//! tip-speed ratio is undefined there. `discrete_predict` is the separate
//! forward-Euler model the optimizing controller and its disturbance
//! observer use; keeping the two integrators distinct is what the offset
//! estimate is for.

use thiserror::Error;

use crate::cp::CpSurface;
use crate::params::TurbineParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineState {
    /// Rotor-side angular speed in rad/s, > 0 while operating.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Collective blade pitch in degrees.
    pub pitch_deg: f64,
    /// Generator torque in N*m on the generator side.
    pub torque_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("rotor stalled: speed reached {omega} rad/s")]
pub struct StallError {
    /// Rotor speed at the integration stage that failed.
    pub omega: f64,
}

/// Kinetic power available in the wind stream, 0.5 * rho * pi * R^2 * V^3, in W.
pub fn wind_power(params: &TurbineParams, v: f64) -> f64 {
    params.half_rho_area * v * v * v
}

/// Tip-speed ratio R * omega / V. Caller guarantees v > 0.
pub fn tip_speed_ratio(params: &TurbineParams, omega: f64, v: f64) -> f64 {
    params.rotor_radius * omega / v
}

/// Electrical power eta * N_g * omega * u_M in W.
pub fn electrical_power(params: &TurbineParams, omega: f64, torque_nm: f64) -> f64 {
    params.efficiency * params.gearbox_ratio * omega * torque_nm
}

/// Aerodynamic rotor torque in N*m, clamped to the Cp table's edge behavior
/// outside the tabulated (lambda, theta) box.
pub fn rotor_torque(
    params: &TurbineParams,
    surface: &CpSurface,
    omega: f64,
    v: f64,
    pitch_deg: f64,
) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let lambda = tip_speed_ratio(params, omega, v);
    let (lmin, lmax) = surface.lambda_range();
    let (tmin, tmax) = surface.theta_range();
    let lc = lambda.clamp(lmin, lmax);
    let tc = pitch_deg.clamp(tmin, tmax);
    let cp = surface
        .eval(lc, tc)
        .expect("clamped point is inside the table");
    params.torque_coef * v * v * cp / lc
}

fn accel(
    params: &TurbineParams,
    surface: &CpSurface,
    omega: f64,
    v: f64,
    input: ControlInput,
) -> f64 {
    let mr = rotor_torque(params, surface, omega, v, input.pitch_deg);
    (mr - params.gearbox_ratio * input.torque_nm) / params.inertia
}

/// One RK4 step of length `dt` with zero-order-hold wind and inputs.
///
/// Errors if the rotor speed is nonpositive at any of the four stage
/// evaluations or at the end of the step.
pub fn plant_step(
    params: &TurbineParams,
    surface: &CpSurface,
    state: TurbineState,
    input: ControlInput,
    v: f64,
    dt: f64,
) -> Result<TurbineState, StallError> {
    let w0 = state.omega;
    let guard = |w: f64| if w > 0.0 { Ok(w) } else { Err(StallError { omega: w }) };
    guard(w0)?;
    let k1 = accel(params, surface, w0, v, input);
    let k2 = accel(params, surface, guard(w0 + 0.5 * dt * k1)?, v, input);
    let k3 = accel(params, surface, guard(w0 + 0.5 * dt * k2)?, v, input);
    let k4 = accel(params, surface, guard(w0 + dt * k3)?, v, input);
    let omega = guard(w0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))?;
    Ok(TurbineState { omega })
}

/// One forward-Euler step of the controllers' prediction model.
///
/// `cp` is the power coefficient the caller's surface assigns to the current
/// operating point; `d_omega` is the additive speed-offset estimate. Returns
/// omega + d_omega + ts * (torque_coef * V^2 * cp * V / (R * omega)
/// - N_g * u_M) / J.
pub fn discrete_predict(
    params: &TurbineParams,
    omega: f64,
    v: f64,
    cp: f64,
    torque_nm: f64,
    ts: f64,
    d_omega: f64,
) -> f64 {
    let z = v / (params.rotor_radius * omega);
    let mr = params.torque_coef * v * v * cp * z;
    omega + d_omega + ts * (mr - params.gearbox_ratio * torque_nm) / params.inertia
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::{reference_surface, synthetic_cp};

    fn demo() -> TurbineParams {
        TurbineParams::new(65.0, 1.225, 3.0e7, 97.0, 0.9, 3.4e6).unwrap()
    }

    #[test]
    fn wind_power_matches_hand_value() {
        let p = demo();
        // 0.5 * 1.225 * pi * 65^2 * 8^3, evaluated independently.
        let expect = 0.5 * 1.225 * std::f64::consts::PI * 4225.0 * 512.0;
        assert!((wind_power(&p, 8.0) - expect).abs() < 1e-6);
        assert!((wind_power(&p, 8.0) - 4.162e6).abs() < 5e3);
    }

    #[test]
    fn electrical_power_matches_hand_value() {
        let p = demo();
        let got = electrical_power(&p, 1.0, 20_000.0);
        assert!((got - 0.9 * 97.0 * 20_000.0).abs() < 1e-9);
    }

    #[test]
    fn tip_speed_ratio_is_linear_in_omega() {
        let p = demo();
        assert!((tip_speed_ratio(&p, 1.0, 8.0) - 65.0 / 8.0).abs() < 1e-12);
        assert!((tip_speed_ratio(&p, 0.5, 8.0) - 32.5 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn rotor_torque_matches_direct_formula_inside_box() {
        let p = demo();
        let s = reference_surface();
        let (omega, v, pitch) = (1.0, 8.0, 1.0);
        let lambda = 65.0 / 8.0;
        let expect = p.torque_coef * 64.0 * s.eval(lambda, pitch).unwrap() / lambda;
        let got = rotor_torque(&p, &s, omega, v, pitch);
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn rotor_torque_saturates_outside_box_and_vanishes_without_wind() {
        let p = demo();
        let s = reference_surface();
        // Very slow rotor: lambda below the table, coefficient and division
        // both clamp to the table edge, so the value is finite and continuous.
        let slow = rotor_torque(&p, &s, 1e-6, 8.0, 0.0);
        let at_edge = rotor_torque(&p, &s, 0.5 * 8.0 / 65.0, 8.0, 0.0);
        assert!(slow.is_finite());
        assert!((slow - at_edge).abs() < 1e-9);
        // Very fast rotor: runaway region of the table has Cp = 0.
        assert_eq!(rotor_torque(&p, &s, 5.0, 8.0, 0.0), 0.0);
        assert_eq!(rotor_torque(&p, &s, 1.0, 0.0, 0.0), 0.0);
    }

    /// Steady state: generator torque chosen to balance the aerodynamic
    /// torque exactly; one plant step must not move the speed.
    #[test]
    fn plant_step_holds_equilibrium() {
        let p = demo();
        let s = reference_surface();
        let (omega, v, pitch) = (1.0, 8.0, 1.0);
        let balance = rotor_torque(&p, &s, omega, v, pitch) / p.gearbox_ratio;
        let input = ControlInput {
            pitch_deg: pitch,
            torque_nm: balance,
        };
        let mut state = TurbineState { omega };
        for _ in 0..100 {
            state = plant_step(&p, &s, state, input, v, 0.05).unwrap();
        }
        // Not an exact fixed point (M_r varies with omega), but the torque
        // slope is stabilizing here, so drift stays tiny.
        assert!((state.omega - omega).abs() < 1e-3, "{}", state.omega);
    }

    #[test]
    fn plant_step_accelerates_under_torque_surplus() {
        let p = demo();
        let s = reference_surface();
        let (omega, v, pitch) = (0.9, 8.0, 1.0);
        let balance = rotor_torque(&p, &s, omega, v, pitch) / p.gearbox_ratio;
        let state = TurbineState { omega };
        let up = plant_step(
            &p,
            &s,
            state,
            ControlInput {
                pitch_deg: pitch,
                torque_nm: 0.5 * balance,
            },
            v,
            0.05,
        )
        .unwrap();
        let down = plant_step(
            &p,
            &s,
            state,
            ControlInput {
                pitch_deg: pitch,
                torque_nm: 2.0 * balance,
            },
            v,
            0.05,
        )
        .unwrap();
        assert!(up.omega > omega);
        assert!(down.omega < omega);
    }

    /// RK4 order check against step halving: the error to a much finer RK4
    /// reference must shrink by roughly 2^4 when dt is halved. The table is
    /// built from an affine function so bilinear interpolation reproduces it
    /// exactly and the right-hand side is smooth along the whole trajectory
    /// (cell-edge kinks in a generic table locally degrade the order).
    #[test]
    fn plant_step_shows_fourth_order_convergence() {
        let p = demo();
        let lambda: Vec<f64> = (0..=20).map(|i| 2.0 + 0.5 * i as f64).collect();
        let theta: Vec<f64> = (0..=10).map(|j| j as f64).collect();
        let mut values = Vec::new();
        for &l in &lambda {
            for &t in &theta {
                values.push(0.2 + 0.01 * l - 0.002 * t);
            }
        }
        let s = CpSurface::new(lambda, theta, values).unwrap();
        let input = ControlInput {
            pitch_deg: 1.0,
            torque_nm: 10_000.0,
        };
        let v = 8.0;
        let horizon = 2.0;
        let integrate = |dt: f64| -> f64 {
            let steps = (horizon / dt).round() as usize;
            let mut st = TurbineState { omega: 0.9 };
            for _ in 0..steps {
                st = plant_step(&p, &s, st, input, v, dt).unwrap();
            }
            st.omega
        };
        let truth = integrate(horizon / 4096.0);
        let err_coarse = (integrate(horizon / 8.0) - truth).abs();
        let err_fine = (integrate(horizon / 16.0) - truth).abs();
        assert!(err_coarse > 0.0 && err_fine > 0.0, "errors degenerate");
        let ratio = err_coarse / err_fine;
        assert!(
            (10.0..=24.0).contains(&ratio),
            "convergence ratio {ratio}, errors {err_coarse} {err_fine}"
        );
    }

    #[test]
    fn plant_step_reports_stall() {
        let p = demo();
        let s = reference_surface();
        let state = TurbineState { omega: 0.05 };
        // Max braking torque at a crawl: the speed crosses zero within a step.
        let input = ControlInput {
            pitch_deg: 20.0,
            torque_nm: 31_575.0,
        };
        let mut st = state;
        let mut stalled = false;
        for _ in 0..200 {
            match plant_step(&p, &s, st, input, 8.0, 0.05) {
                Ok(next) => st = next,
                Err(StallError { omega }) => {
                    assert!(omega <= 0.0);
                    stalled = true;
                    break;
                }
            }
        }
        assert!(stalled);
    }

    /// Euler predictor agrees with the defining expression term by term.
    #[test]
    fn discrete_predict_matches_hand_expansion() {
        let p = demo();
        let (omega, v, ts, d) = (1.0, 8.0, 3.0, 0.01);
        let cp = synthetic_cp(65.0 / 8.0, 1.0);
        let torque = 15_000.0;
        let z = v / (p.rotor_radius * omega);
        let expect =
            omega + d + ts * (p.torque_coef * v * v * cp * z - 97.0 * torque) / p.inertia;
        let got = discrete_predict(&p, omega, v, cp, torque, ts, d);
        assert!((got - expect).abs() < 1e-12);
    }
}
