//! Receding-horizon power-tracking controller.
//!
//! Each control step assembles one mixed-integer bilinear program over the
//! prediction horizon and solves it with `mibl`. Decision variables per
//! stage n: rotor speed, pitch, generator torque (scaled to kN*m so the
//! problem is well-conditioned), total coefficient Chat, the speed
//! reciprocal z with z*omega pinned to V/R by its product bounds, three
//! nonnegative slacks, and one selection binary per region. Products
//! w1 = z*omega, w2 = z*Chat, w3 = omega*torque linearize the model:
//! the speed update is omega(n+1) = omega(n) + d + Ts*(c*V^2*w2
//! - N_g*u_M)/J, electrical power is eta*N_g*w3 (kW with torque in kN*m),
//! and the power corridor 0 <= P_e <= P_demand is exactly the box on w3.
//! Region membership rows keep the tip-speed expression R*omega/V linear in
//! omega, with the wind forecast held at the last measurement.
//!
//! Soft speed bounds put stage-n slack on omega(n+1): the current
//! measurement needs no slack (it is data) and the terminal state gets one.
//! Rate rows are anchored at the previously applied input; the stage-0 rate
//! window is folded directly into the input variables' boxes.
//!
//! The additive speed offset d is a constant-disturbance estimate updated
//! from the one-step-ahead prediction stored with the previous solution;
//! constant model mismatch therefore causes no steady-state tracking error.
//! When the solver proves infeasibility or times out without an incumbent,
//! the controller holds the previous input (a zero move always satisfies the
//! rate bounds) and keeps the observer running on the model's prediction.

use std::time::Duration;

use mibl::{
    product_interval, solve, MiblProgram, ProgramError, Row, SolveError, SolveOptions,
    SolveStatus,
};
use thiserror::Error;

use crate::config::{ConfigError, KvMap};
use crate::model::{discrete_predict, ControlInput};
use crate::params::TurbineParams;
use crate::pwa::{
    encode_bigm, pwa_eval, BigMData, BigmHandles, LinExpr, PwaError, PwaSurface,
};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("controller config: {0}")]
    Config(#[from] ConfigError),
    /// Config values that parse but violate a structural requirement.
    #[error("controller config: {what}")]
    BadConfig { what: String },
    /// Measurement or forecast outside the representable range.
    #[error("controller input: {what}")]
    BadInput { what: String },
    #[error("problem assembly: {0}")]
    Build(#[from] ProgramError),
    #[error("region encoding: {0}")]
    Pwa(#[from] PwaError),
    #[error("solver: {0}")]
    Solver(SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Control interval in s.
    pub ts: f64,
    /// Prediction horizon in steps.
    pub np: usize,
    /// Rotor speed band in rad/s (soft, slack-priced).
    pub omega_min: f64,
    pub omega_max: f64,
    /// Pitch actuator box in deg (hard).
    pub pitch_min: f64,
    pub pitch_max: f64,
    /// Generator torque box in N*m (hard).
    pub torque_min_nm: f64,
    pub torque_max_nm: f64,
    /// Hard per-step input moves.
    pub dpitch_min: f64,
    pub dpitch_max: f64,
    pub dtorque_min_nm: f64,
    pub dtorque_max_nm: f64,
    /// Slack prices: W per rad/s, W per deg, W per kN*m.
    pub q_omega: f64,
    pub q_dpitch: f64,
    pub q_dtorque: f64,
    /// Stage discount in (0, 1].
    pub gamma: f64,
    /// Offset-observer gain, |1 - gain| < 1.
    pub observer_gain: f64,
    /// Cap on the speed-band slack, rad/s; must stay below omega_min.
    pub eps_omega_cap: f64,
    /// Solver knobs.
    pub mip_gap_tol: f64,
    pub solver_time_limit_s: f64,
    pub solver_node_limit: usize,
}

impl MpcConfig {
    pub fn from_kv_text(text: &str) -> Result<Self, MpcError> {
        let kv = KvMap::parse(text)?;
        let cfg = MpcConfig {
            ts: kv.get_f64("ts_s")?,
            np: kv.get_usize("horizon_steps")?,
            omega_min: kv.get_f64("omega_min_radps")?,
            omega_max: kv.get_f64("omega_max_radps")?,
            pitch_min: kv.get_f64("pitch_min_deg")?,
            pitch_max: kv.get_f64("pitch_max_deg")?,
            torque_min_nm: kv.get_f64("torque_min_nm")?,
            torque_max_nm: kv.get_f64("torque_max_nm")?,
            dpitch_min: kv.get_f64("dpitch_min_deg")?,
            dpitch_max: kv.get_f64("dpitch_max_deg")?,
            dtorque_min_nm: kv.get_f64("dtorque_min_nm")?,
            dtorque_max_nm: kv.get_f64("dtorque_max_nm")?,
            q_omega: kv.get_f64("q_omega_w_per_radps")?,
            q_dpitch: kv.get_f64("q_dpitch_w_per_deg")?,
            q_dtorque: kv.get_f64("q_dtorque_w_per_knm")?,
            gamma: kv.get_f64("gamma")?,
            observer_gain: kv.get_f64("observer_gain")?,
            eps_omega_cap: kv.get_f64("eps_omega_cap_radps")?,
            mip_gap_tol: kv.get_f64_opt("mip_gap_tol")?.unwrap_or(1e-4),
            solver_time_limit_s: kv.get_f64_opt("solver_time_limit_s")?.unwrap_or(2.5),
            solver_node_limit: if kv.contains("solver_node_limit") {
                kv.get_usize("solver_node_limit")?
            } else {
                200_000
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |what: &str| Err(MpcError::BadConfig { what: what.into() });
        if !(self.ts > 0.0) {
            return bad("ts_s must be positive");
        }
        if self.np == 0 {
            return bad("horizon_steps must be >= 1");
        }
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min) {
            return bad("need 0 < omega_min < omega_max");
        }
        if !(self.pitch_max > self.pitch_min) {
            return bad("pitch box is empty");
        }
        if !(self.torque_max_nm > self.torque_min_nm && self.torque_min_nm >= 0.0) {
            return bad("torque box must be nonnegative and nonempty");
        }
        if !(self.dpitch_min < 0.0 && self.dpitch_max > 0.0) {
            return bad("pitch move window must contain zero");
        }
        if !(self.dtorque_min_nm < 0.0 && self.dtorque_max_nm > 0.0) {
            return bad("torque move window must contain zero");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.observer_gain > 0.0 && self.observer_gain < 2.0) {
            return bad("observer_gain must lie in (0, 2) for convergence");
        }
        if !(self.eps_omega_cap >= 0.0 && self.eps_omega_cap < self.omega_min) {
            return bad("eps_omega_cap must be in [0, omega_min)");
        }
        if !(self.q_omega >= 0.0 && self.q_dpitch >= 0.0 && self.q_dtorque >= 0.0) {
            return bad("slack prices must be nonnegative");
        }
        if !(self.mip_gap_tol > 0.0 && self.solver_time_limit_s > 0.0) {
            return bad("solver knobs must be positive");
        }
        Ok(())
    }
}

/// Index map of the stacked decision vector.
///
/// Stage blocks of width 8 + N_R hold [omega, pitch, torque(kN*m), cp, z,
/// eps_omega, eps_dpitch, eps_dtorque, delta_0..delta_{N_R-1}] for
/// n = 0..np-1, followed by the terminal omega, then np*N_R region
/// contributions, then the three product targets per stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarLayout {
    pub np: usize,
    pub nr: usize,
}

impl VarLayout {
    fn block(&self) -> usize {
        8 + self.nr
    }

    pub fn omega(&self, n: usize) -> usize {
        debug_assert!(n <= self.np);
        n * self.block()
    }

    pub fn pitch(&self, n: usize) -> usize {
        debug_assert!(n < self.np);
        n * self.block() + 1
    }

    pub fn torque(&self, n: usize) -> usize {
        n * self.block() + 2
    }

    pub fn cp(&self, n: usize) -> usize {
        n * self.block() + 3
    }

    pub fn z(&self, n: usize) -> usize {
        n * self.block() + 4
    }

    pub fn eps_omega(&self, n: usize) -> usize {
        n * self.block() + 5
    }

    pub fn eps_dpitch(&self, n: usize) -> usize {
        n * self.block() + 6
    }

    pub fn eps_dtorque(&self, n: usize) -> usize {
        n * self.block() + 7
    }

    pub fn delta(&self, n: usize, j: usize) -> usize {
        debug_assert!(j < self.nr);
        n * self.block() + 8 + j
    }

    fn core_len(&self) -> usize {
        self.np * self.block() + 1
    }

    pub fn cp_part(&self, n: usize, j: usize) -> usize {
        self.core_len() + n * self.nr + j
    }

    pub fn w1(&self, n: usize) -> usize {
        self.core_len() + self.np * self.nr + 3 * n
    }

    pub fn w2(&self, n: usize) -> usize {
        self.w1(n) + 1
    }

    pub fn w3(&self, n: usize) -> usize {
        self.w1(n) + 2
    }

    pub fn total_vars(&self) -> usize {
        self.core_len() + self.np * self.nr + 3 * self.np
    }
}

/// Per-step measurements and references the problem is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    /// Measured rotor speed, rad/s.
    pub omega: f64,
    /// Wind speed held constant over the horizon (persistence forecast), m/s.
    pub wind: f64,
    /// Demanded electrical power, W.
    pub p_demand: f64,
    /// Previously applied input (rate anchor).
    pub u_prev: ControlInput,
    /// Current speed-offset estimate, rad/s per step.
    pub d_omega: f64,
}

/// Assembled optimization problem plus its index map.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub program: MiblProgram,
    pub layout: VarLayout,
}

pub fn build_problem(
    params: &TurbineParams,
    cfg: &MpcConfig,
    pwa: &PwaSurface,
    bigm: &BigMData,
    inputs: &StepInputs,
) -> Result<MpcProblem, MpcError> {
    if !(inputs.wind > 0.0) || !inputs.wind.is_finite() {
        return Err(MpcError::BadInput {
            what: format!("wind speed {} not usable", inputs.wind),
        });
    }
    if !(inputs.omega > 0.0) || !inputs.omega.is_finite() {
        return Err(MpcError::BadInput {
            what: format!("rotor speed {} not usable", inputs.omega),
        });
    }
    if !(inputs.p_demand >= 0.0) {
        return Err(MpcError::BadInput {
            what: format!("power demand {} negative", inputs.p_demand),
        });
    }

    let layout = VarLayout {
        np: cfg.np,
        nr: pwa.partition.num_regions(),
    };
    let v = inputs.wind;
    let r_over_v = params.rotor_radius / v;
    let v_over_r = v / params.rotor_radius;

    // Boxes. The measured speed widens the speed box if turbulence pushed it
    // past the soft band plus cap, so the z product stays representable.
    let omega_lo = cfg.omega_min - cfg.eps_omega_cap;
    let omega_hi = cfg.omega_max + cfg.eps_omega_cap;
    let omega_lo_eff = omega_lo.min(inputs.omega);
    let omega_hi_eff = omega_hi.max(inputs.omega);
    let z_lo = v_over_r / omega_hi_eff;
    let z_hi = v_over_r / omega_lo_eff;
    let tq_lo = cfg.torque_min_nm / 1000.0;
    let tq_hi = cfg.torque_max_nm / 1000.0;
    let eps_dp_cap = cfg.dpitch_max.max(-cfg.dpitch_min);
    let eps_dt_cap = (cfg.dtorque_max_nm.max(-cfg.dtorque_min_nm)) / 1000.0;
    // Corridor as a box on w3 = omega * torque(kN*m): eta*N_g*1000*w3 <= P_d.
    let w3_corridor = inputs.p_demand / (params.efficiency * params.gearbox_ratio * 1000.0);
    let (_, w3_nat_hi) = product_interval(omega_lo_eff, omega_hi_eff, tq_lo, tq_hi);
    let w3_hi = w3_corridor.min(w3_nat_hi);

    let u_prev_pitch = inputs.u_prev.pitch_deg.clamp(cfg.pitch_min, cfg.pitch_max);
    let u_prev_tq = (inputs.u_prev.torque_nm / 1000.0).clamp(tq_lo, tq_hi);

    // Selected-piece ranges. With the one-hot row active, Chat equals one
    // piece evaluated inside its own region, so its box is the corner hull
    // of piece values over region rectangles, no big-M slack needed. The
    // same corners bound w2 = Chat/lambda: the quotient is monotone in
    // lambda at fixed theta and linear in theta, so corner extremes are
    // exact. This couples the z and Chat boxes, which plain interval
    // products over independent boxes cannot see.
    let mut cp_lo = f64::INFINITY;
    let mut cp_hi = f64::NEG_INFINITY;
    let mut cq_lo = f64::INFINITY;
    let mut cq_hi = f64::NEG_INFINITY;
    for (j, rect) in pwa.partition.regions().iter().enumerate() {
        let [ca, cb, cc] = pwa.coeffs[j];
        for [l, t] in rect.vertices() {
            let cp = ca * l + cb * t + cc;
            cp_lo = cp_lo.min(cp);
            cp_hi = cp_hi.max(cp);
            if l > 0.0 {
                cq_lo = cq_lo.min(cp / l);
                cq_hi = cq_hi.max(cp / l);
            }
        }
    }
    let have_cq = pwa.partition.bounding_box().lambda_lo > 0.0;

    let mut p = MiblProgram::new();
    for n in 0..cfg.np {
        let id = p.add_var(omega_lo_eff, omega_hi_eff);
        debug_assert_eq!(id, layout.omega(n));
        if n == 0 {
            p.set_bounds(id, inputs.omega, inputs.omega);
        }
        // Stage-0 rate windows fold into the input boxes.
        let (p_lo, p_hi) = if n == 0 {
            (
                cfg.pitch_min.max(u_prev_pitch + cfg.dpitch_min),
                cfg.pitch_max.min(u_prev_pitch + cfg.dpitch_max),
            )
        } else {
            (cfg.pitch_min, cfg.pitch_max)
        };
        p.add_var(p_lo, p_hi);
        let (t_lo, t_hi) = if n == 0 {
            (
                tq_lo.max(u_prev_tq + cfg.dtorque_min_nm / 1000.0),
                tq_hi.min(u_prev_tq + cfg.dtorque_max_nm / 1000.0),
            )
        } else {
            (tq_lo, tq_hi)
        };
        p.add_var(t_lo, t_hi);
        p.add_var(cp_lo, cp_hi);
        p.add_var(z_lo, z_hi);
        p.add_var(0.0, cfg.eps_omega_cap);
        p.add_var(0.0, eps_dp_cap);
        p.add_var(0.0, eps_dt_cap);
        for _ in 0..layout.nr {
            p.add_binary();
        }
    }
    let terminal = p.add_var(omega_lo_eff, omega_hi_eff);
    debug_assert_eq!(terminal, layout.omega(cfg.np));
    for n in 0..cfg.np {
        for j in 0..layout.nr {
            let id = p.add_var(bigm.piece_min.min(0.0), bigm.piece_max.max(0.0));
            debug_assert_eq!(id, layout.cp_part(n, j));
        }
    }
    for n in 0..cfg.np {
        let (mut w2_lo, mut w2_hi) = product_interval(z_lo, z_hi, cp_lo, cp_hi);
        if have_cq {
            w2_lo = w2_lo.max(cq_lo);
            w2_hi = w2_hi.min(cq_hi);
        }
        let id = p.add_var(v_over_r, v_over_r);
        debug_assert_eq!(id, layout.w1(n));
        p.add_var(w2_lo, w2_hi);
        p.add_var(0.0, w3_hi);
    }

    for n in 0..cfg.np {
        p.add_product(layout.w1(n), layout.z(n), layout.omega(n))?;
        p.add_product(layout.w2(n), layout.z(n), layout.cp(n))?;
        p.add_product(layout.w3(n), layout.omega(n), layout.torque(n))?;
    }

    // Dynamics: omega(n+1) - omega(n) - a*w2 + b*torque = d_omega, with
    // a = Ts*c*V^2/J and b = Ts*N_g*1000/J (torque carried in kN*m).
    let a = cfg.ts * params.torque_coef * v * v / params.inertia;
    let b = cfg.ts * params.gearbox_ratio * 1000.0 / params.inertia;
    for n in 0..cfg.np {
        p.add_row(Row::eq(
            vec![
                (layout.omega(n + 1), 1.0),
                (layout.omega(n), -1.0),
                (layout.w2(n), -a),
                (layout.torque(n), b),
            ],
            inputs.d_omega,
        ))?;

        // Hard input moves for n >= 1 (stage 0 lives in the boxes).
        if n >= 1 {
            p.add_row(Row::ranged(
                vec![(layout.pitch(n), 1.0), (layout.pitch(n - 1), -1.0)],
                cfg.dpitch_min,
                cfg.dpitch_max,
            ))?;
            p.add_row(Row::ranged(
                vec![(layout.torque(n), 1.0), (layout.torque(n - 1), -1.0)],
                cfg.dtorque_min_nm / 1000.0,
                cfg.dtorque_max_nm / 1000.0,
            ))?;
        }

        // Priced input moves: |u(n) - u(n-1)| <= eps(n).
        let (pitch_anchor, torque_anchor): (Vec<(usize, f64)>, Vec<(usize, f64)>) = if n == 0 {
            (
                vec![(layout.pitch(0), 1.0)],
                vec![(layout.torque(0), 1.0)],
            )
        } else {
            (
                vec![(layout.pitch(n), 1.0), (layout.pitch(n - 1), -1.0)],
                vec![(layout.torque(n), 1.0), (layout.torque(n - 1), -1.0)],
            )
        };
        let (p_rhs, t_rhs) = if n == 0 {
            (u_prev_pitch, u_prev_tq)
        } else {
            (0.0, 0.0)
        };
        let mut up = pitch_anchor.clone();
        up.push((layout.eps_dpitch(n), -1.0));
        p.add_row(Row::le(up, p_rhs))?;
        let mut dn = pitch_anchor;
        dn.push((layout.eps_dpitch(n), 1.0));
        p.add_row(Row::ge(dn, p_rhs))?;
        let mut up = torque_anchor.clone();
        up.push((layout.eps_dtorque(n), -1.0));
        p.add_row(Row::le(up, t_rhs))?;
        let mut dn = torque_anchor;
        dn.push((layout.eps_dtorque(n), 1.0));
        p.add_row(Row::ge(dn, t_rhs))?;

        // Soft speed band on the successor state.
        p.add_row(Row::ge(
            vec![(layout.omega(n + 1), 1.0), (layout.eps_omega(n), 1.0)],
            cfg.omega_min,
        ))?;
        p.add_row(Row::le(
            vec![(layout.omega(n + 1), 1.0), (layout.eps_omega(n), -1.0)],
            cfg.omega_max,
        ))?;

        // Region selection with the tip-speed ratio linear in omega.
        let handles = BigmHandles {
            lambda: LinExpr::scaled_var(layout.omega(n), r_over_v),
            theta: LinExpr::var(layout.pitch(n)),
            cp_total: layout.cp(n),
            cp_parts: (0..layout.nr).map(|j| layout.cp_part(n, j)).collect(),
            deltas: (0..layout.nr).map(|j| layout.delta(n, j)).collect(),
        };
        for row in encode_bigm(pwa, bigm, &handles)? {
            p.add_row(Row::ranged(row.terms, row.lo, row.hi))?;
        }
    }

    // Objective in kW: -power + slack prices, discounted per stage.
    let power_coef = params.efficiency * params.gearbox_ratio;
    let mut discount = 1.0;
    for n in 0..cfg.np {
        p.add_objective(layout.w3(n), -discount * power_coef);
        p.add_objective(layout.eps_omega(n), discount * cfg.q_omega / 1000.0);
        p.add_objective(layout.eps_dpitch(n), discount * cfg.q_dpitch / 1000.0);
        p.add_objective(layout.eps_dtorque(n), discount * cfg.q_dtorque / 1000.0);
        discount *= cfg.gamma;
    }

    p.validate()?;
    Ok(MpcProblem { program: p, layout })
}

/// Rolls a candidate input trajectory through the prediction model and fills
/// a complete decision vector. Used both to warm-start the solver from the
/// shifted previous solution and as an encoding cross-check in tests: if the
/// rollout respects the hard boxes, the vector satisfies every row.
pub fn assemble_candidate(
    params: &TurbineParams,
    cfg: &MpcConfig,
    pwa: &PwaSurface,
    layout: &VarLayout,
    inputs: &StepInputs,
    u_traj: &[(f64, f64)],
) -> Vec<f64> {
    assert_eq!(u_traj.len(), cfg.np);
    let v = inputs.wind;
    let bb = pwa.partition.bounding_box();
    let mut x = vec![0.0; layout.total_vars()];
    let mut omega = inputs.omega;
    let mut prev = (
        inputs.u_prev.pitch_deg.clamp(cfg.pitch_min, cfg.pitch_max),
        (inputs.u_prev.torque_nm / 1000.0)
            .clamp(cfg.torque_min_nm / 1000.0, cfg.torque_max_nm / 1000.0),
    );
    for (n, &(pitch, tq_knm)) in u_traj.iter().enumerate() {
        x[layout.omega(n)] = omega;
        x[layout.pitch(n)] = pitch;
        x[layout.torque(n)] = tq_knm;
        let lambda = params.rotor_radius * omega / v;
        let z = 1.0 / lambda;
        let lam_c = lambda.clamp(bb.lambda_lo, bb.lambda_hi);
        let th_c = pitch.clamp(bb.theta_lo, bb.theta_hi);
        let j = pwa
            .partition
            .locate(lam_c, th_c)
            .expect("clamped point is inside the box");
        let [ca, cb, cc] = pwa.coeffs[j];
        // The piece is evaluated at the true tip-speed expression so the
        // selected-region equality holds exactly; membership rows decide
        // whether the candidate is actually feasible.
        let cp = ca * lambda + cb * pitch + cc;
        x[layout.cp(n)] = cp;
        x[layout.z(n)] = z;
        x[layout.delta(n, j)] = 1.0;
        x[layout.cp_part(n, j)] = cp;
        x[layout.w1(n)] = z * omega;
        x[layout.w2(n)] = z * cp;
        x[layout.w3(n)] = omega * tq_knm;
        let next = discrete_predict(params, omega, v, cp, tq_knm * 1000.0, cfg.ts, inputs.d_omega);
        x[layout.eps_omega(n)] = (cfg.omega_min - next)
            .max(next - cfg.omega_max)
            .max(0.0)
            .min(cfg.eps_omega_cap);
        x[layout.eps_dpitch(n)] = (pitch - prev.0).abs();
        x[layout.eps_dtorque(n)] = (tq_knm - prev.1).abs();
        prev = (pitch, tq_knm);
        omega = next;
    }
    x[layout.omega(cfg.np)] = omega;
    x
}

/// Offset-observer update: new estimate = old + gain * (measured -
/// predicted). With a constant additive disturbance the estimation error
/// contracts by |1 - gain| per step.
pub fn observer_update(d_omega: f64, gain: f64, measured: f64, predicted: f64) -> f64 {
    d_omega + gain * (measured - predicted)
}

/// Controller state carried between steps.
#[derive(Debug, Clone)]
pub struct MpcState {
    pub u_prev: ControlInput,
    pub d_omega: f64,
    /// One-step-ahead speed prediction stored for the observer.
    pub predicted_omega: f64,
    pub have_prediction: bool,
    /// Previous solution's input trajectory (pitch deg, torque kN*m).
    prev_inputs: Option<Vec<(f64, f64)>>,
}

impl MpcState {
    pub fn new(initial_input: ControlInput) -> Self {
        MpcState {
            u_prev: initial_input,
            d_omega: 0.0,
            predicted_omega: 0.0,
            have_prediction: false,
            prev_inputs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcDiagnostics {
    pub solve_time_s: f64,
    pub mip_gap: f64,
    pub nodes: usize,
    /// True when the previous input was held because no solution was usable.
    pub fallback: bool,
    /// Largest speed-band slack across the horizon, rad/s.
    pub eps_omega_max: f64,
    /// Objective of the returned plan, kW (negative of discounted power
    /// minus slack prices); NaN on fallback.
    pub objective_kw: f64,
}

/// One control step: observer update, problem assembly, solve, extraction.
pub fn mpc_step(
    params: &TurbineParams,
    cfg: &MpcConfig,
    pwa: &PwaSurface,
    bigm: &BigMData,
    state: &mut MpcState,
    omega_meas: f64,
    wind: f64,
    p_demand: f64,
) -> Result<(ControlInput, MpcDiagnostics), MpcError> {
    if state.have_prediction {
        state.d_omega = observer_update(
            state.d_omega,
            cfg.observer_gain,
            omega_meas,
            state.predicted_omega,
        );
    }

    let inputs = StepInputs {
        omega: omega_meas,
        wind,
        p_demand,
        u_prev: state.u_prev,
        d_omega: state.d_omega,
    };
    let problem = build_problem(params, cfg, pwa, bigm, &inputs)?;

    // Warm start: previous plan shifted one stage with the last input
    // repeated, or a pure hold of the previous input when no plan is
    // stored. A zero move always satisfies the rate windows, so the hold
    // is feasible whenever the speed stays inside the slack-covered band,
    // and it seeds the search with an incumbent from the first step on.
    let traj: Vec<(f64, f64)> = match &state.prev_inputs {
        Some(traj) => {
            let mut shifted: Vec<(f64, f64)> = traj.iter().skip(1).copied().collect();
            let last = *traj.last().expect("stored trajectory is nonempty");
            shifted.push(last);
            while shifted.len() < cfg.np {
                shifted.push(last);
            }
            shifted.truncate(cfg.np);
            shifted
        }
        None => {
            let held = (
                state.u_prev.pitch_deg.clamp(cfg.pitch_min, cfg.pitch_max),
                (state.u_prev.torque_nm / 1000.0)
                    .clamp(cfg.torque_min_nm / 1000.0, cfg.torque_max_nm / 1000.0),
            );
            vec![held; cfg.np]
        }
    };
    let hint = Some(assemble_candidate(
        params,
        cfg,
        pwa,
        &problem.layout,
        &inputs,
        &traj,
    ));

    let opts = SolveOptions {
        gap_tol: cfg.mip_gap_tol,
        time_limit: Some(Duration::from_secs_f64(cfg.solver_time_limit_s)),
        node_limit: cfg.solver_node_limit,
        incumbent_hint: hint,
        ..SolveOptions::default()
    };
    let started = std::time::Instant::now();
    let solution = solve(&problem.program, &opts).map_err(MpcError::Solver)?;
    let solve_time_s = started.elapsed().as_secs_f64();

    let layout = problem.layout;
    match (&solution.values, solution.status) {
        (Some(values), status) if status != SolveStatus::Infeasible => {
            // LP feasibility tolerance can leave the incumbent a hair
            // outside its own variable box; re-clamping to the stage-0
            // window keeps the published command strictly inside the
            // actuator limits.
            let pitch = values[layout.pitch(0)]
                .clamp(problem.program.lb()[layout.pitch(0)], problem.program.ub()[layout.pitch(0)]);
            let torque_nm = values[layout.torque(0)]
                .clamp(problem.program.lb()[layout.torque(0)], problem.program.ub()[layout.torque(0)])
                * 1000.0;
            let input = ControlInput {
                pitch_deg: pitch,
                torque_nm,
            };
            let eps_omega_max = (0..cfg.np)
                .map(|n| values[layout.eps_omega(n)])
                .fold(0.0, f64::max);
            state.u_prev = input;
            state.predicted_omega = values[layout.omega(1)];
            state.have_prediction = true;
            state.prev_inputs = Some(
                (0..cfg.np)
                    .map(|n| (values[layout.pitch(n)], values[layout.torque(n)]))
                    .collect(),
            );
            Ok((
                input,
                MpcDiagnostics {
                    solve_time_s,
                    mip_gap: solution.gap,
                    nodes: solution.nodes,
                    fallback: false,
                    eps_omega_max,
                    objective_kw: solution.objective,
                },
            ))
        }
        _ => {
            // Hold the previous input; zero move always satisfies the rate
            // window. Keep the observer alive with a model-based prediction.
            let input = ControlInput {
                pitch_deg: state.u_prev.pitch_deg.clamp(cfg.pitch_min, cfg.pitch_max),
                torque_nm: state
                    .u_prev
                    .torque_nm
                    .clamp(cfg.torque_min_nm, cfg.torque_max_nm),
            };
            let bb = pwa.partition.bounding_box();
            let lambda =
                (params.rotor_radius * omega_meas / wind).clamp(bb.lambda_lo, bb.lambda_hi);
            let theta = input.pitch_deg.clamp(bb.theta_lo, bb.theta_hi);
            let cp = pwa_eval(pwa, lambda, theta).expect("clamped point inside box");
            let predicted = discrete_predict(
                params,
                omega_meas,
                wind,
                cp,
                input.torque_nm,
                cfg.ts,
                state.d_omega,
            );
            state.u_prev = input;
            state.predicted_omega = predicted;
            state.have_prediction = true;
            state.prev_inputs = None;
            Ok((
                input,
                MpcDiagnostics {
                    solve_time_s,
                    mip_gap: f64::INFINITY,
                    nodes: solution.nodes,
                    fallback: true,
                    eps_omega_max: 0.0,
                    objective_kw: f64::NAN,
                },
            ))
        }
    }
}
