//! Industry-style reference controller: filtered generator speed drives a
//! four-branch torque schedule and a gain-scheduled PI pitch loop.
//!
//! All speeds in this module are generator-side rad/s. Pitch is in degrees,
//! torque in N*m. Rate limits are per-second and are scaled by the sample
//! time when applied.

use thiserror::Error;

use crate::config::KvMap;
use crate::model::ControlInput;

/// Settings for the reference controller.
///
/// `c_2` is the quadratic tracking gain (N*m*s^2/rad^2, generator side),
/// `c_12` the linear transition-strip slope (N*m*s/rad). `k_k_deg` is the
/// pitch angle at which pitch sensitivity has doubled, used for gain
/// scheduling. Filter constants must exceed twice the sample time or the
/// recursion coefficient leaves (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub t_filter_torque_s: f64,
    pub t_filter_pitch_s: f64,
    pub omega_12_radps: f64,
    pub omega_2_radps: f64,
    pub c_12_nms_per_rad: f64,
    pub c_2_nms2_per_rad2: f64,
    pub omega_g_rated_radps: f64,
    pub k_p_degs_per_rad: f64,
    pub k_i_deg_per_rad: f64,
    pub k_k_deg: f64,
    pub pitch_min_deg: f64,
    pub pitch_max_deg: f64,
    pub torque_min_nm: f64,
    pub torque_max_nm: f64,
    pub dpitch_min_degps: f64,
    pub dpitch_max_degps: f64,
    pub dtorque_min_nmps: f64,
    pub dtorque_max_nmps: f64,
    pub v_cut_in_mps: f64,
    pub v_cut_out_mps: f64,
}

/// Rejected controller settings.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("baseline config: {0}")]
    Config(String),
    #[error("baseline config field {field}: {detail}")]
    BadValue { field: &'static str, detail: String },
}

impl BaselineConfig {
    /// Checks internal consistency against the sample time `ts_s`.
    pub fn validate(&self, ts_s: f64) -> Result<(), BaselineError> {
        fn bad(field: &'static str, detail: String) -> BaselineError {
            BaselineError::BadValue { field, detail }
        }
        if !(ts_s > 0.0) {
            return Err(BaselineError::Config(format!(
                "sample time must be positive, got {ts_s}"
            )));
        }
        for (field, value) in [
            ("t_filter_torque_s", self.t_filter_torque_s),
            ("t_filter_pitch_s", self.t_filter_pitch_s),
        ] {
            if !(value > 2.0 * ts_s) {
                return Err(bad(
                    field,
                    format!("must exceed twice the sample time {ts_s}, got {value}"),
                ));
            }
        }
        if !(self.omega_12_radps > 0.0) {
            return Err(bad(
                "omega_12_radps",
                format!("must be positive, got {}", self.omega_12_radps),
            ));
        }
        if !(self.omega_12_radps < self.omega_2_radps
            && self.omega_2_radps < self.omega_g_rated_radps)
        {
            return Err(BaselineError::Config(format!(
                "speed thresholds must satisfy omega_12 < omega_2 < omega_g_rated, got {} / {} / {}",
                self.omega_12_radps, self.omega_2_radps, self.omega_g_rated_radps
            )));
        }
        for (field, value) in [
            ("c_12_nms_per_rad", self.c_12_nms_per_rad),
            ("c_2_nms2_per_rad2", self.c_2_nms2_per_rad2),
            ("k_k_deg", self.k_k_deg),
            ("k_i_deg_per_rad", self.k_i_deg_per_rad),
        ] {
            if !(value > 0.0) {
                return Err(bad(field, format!("must be positive, got {value}")));
            }
        }
        if !(self.k_p_degs_per_rad >= 0.0) {
            return Err(bad(
                "k_p_degs_per_rad",
                format!("must be nonnegative, got {}", self.k_p_degs_per_rad),
            ));
        }
        if !(self.pitch_min_deg >= 0.0 && self.pitch_min_deg < self.pitch_max_deg) {
            return Err(BaselineError::Config(format!(
                "pitch box must satisfy 0 <= min < max, got [{}, {}]",
                self.pitch_min_deg, self.pitch_max_deg
            )));
        }
        if !(self.torque_min_nm >= 0.0 && self.torque_min_nm < self.torque_max_nm) {
            return Err(BaselineError::Config(format!(
                "torque box must satisfy 0 <= min < max, got [{}, {}]",
                self.torque_min_nm, self.torque_max_nm
            )));
        }
        if !(self.dpitch_min_degps < 0.0 && self.dpitch_max_degps > 0.0) {
            return Err(BaselineError::Config(format!(
                "pitch rate window must contain zero, got [{}, {}]",
                self.dpitch_min_degps, self.dpitch_max_degps
            )));
        }
        if !(self.dtorque_min_nmps < 0.0 && self.dtorque_max_nmps > 0.0) {
            return Err(BaselineError::Config(format!(
                "torque rate window must contain zero, got [{}, {}]",
                self.dtorque_min_nmps, self.dtorque_max_nmps
            )));
        }
        if !(self.v_cut_in_mps > 0.0 && self.v_cut_in_mps < self.v_cut_out_mps) {
            return Err(BaselineError::Config(format!(
                "cut-in/cut-out must satisfy 0 < in < out, got {} / {}",
                self.v_cut_in_mps, self.v_cut_out_mps
            )));
        }
        let fields = [
            self.t_filter_torque_s,
            self.t_filter_pitch_s,
            self.omega_12_radps,
            self.omega_2_radps,
            self.c_12_nms_per_rad,
            self.c_2_nms2_per_rad2,
            self.omega_g_rated_radps,
            self.k_p_degs_per_rad,
            self.k_i_deg_per_rad,
            self.k_k_deg,
            self.pitch_min_deg,
            self.pitch_max_deg,
            self.torque_min_nm,
            self.torque_max_nm,
            self.dpitch_min_degps,
            self.dpitch_max_degps,
            self.dtorque_min_nmps,
            self.dtorque_max_nmps,
            self.v_cut_in_mps,
            self.v_cut_out_mps,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(BaselineError::Config("all fields must be finite".into()));
        }
        Ok(())
    }

    /// Parses key=value text and validates against `ts_s`.
    pub fn from_kv_text(text: &str, ts_s: f64) -> Result<Self, BaselineError> {
        let kv = KvMap::parse(text).map_err(|e| BaselineError::Config(e.to_string()))?;
        let get = |key: &str| -> Result<f64, BaselineError> {
            kv.get_f64(key).map_err(|e| BaselineError::Config(e.to_string()))
        };
        let cfg = BaselineConfig {
            t_filter_torque_s: get("t_filter_torque_s")?,
            t_filter_pitch_s: get("t_filter_pitch_s")?,
            omega_12_radps: get("omega_12_radps")?,
            omega_2_radps: get("omega_2_radps")?,
            c_12_nms_per_rad: get("c_12_nms_per_rad")?,
            c_2_nms2_per_rad2: get("c_2_nms2_per_rad2")?,
            omega_g_rated_radps: get("omega_g_rated_radps")?,
            k_p_degs_per_rad: get("k_p_degs_per_rad")?,
            k_i_deg_per_rad: get("k_i_deg_per_rad")?,
            k_k_deg: get("k_k_deg")?,
            pitch_min_deg: get("pitch_min_deg")?,
            pitch_max_deg: get("pitch_max_deg")?,
            torque_min_nm: get("torque_min_nm")?,
            torque_max_nm: get("torque_max_nm")?,
            dpitch_min_degps: get("dpitch_min_degps")?,
            dpitch_max_degps: get("dpitch_max_degps")?,
            dtorque_min_nmps: get("dtorque_min_nmps")?,
            dtorque_max_nmps: get("dtorque_max_nmps")?,
            v_cut_in_mps: get("v_cut_in_mps")?,
            v_cut_out_mps: get("v_cut_out_mps")?,
        };
        cfg.validate(ts_s)?;
        Ok(cfg)
    }
}

/// Controller memory carried between steps.
///
/// `e_integral` is stored already clamped to its anti-windup band, so the
/// pitch command recursion never sees an out-of-band integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub omega_hat_torque: f64,
    pub omega_hat_pitch: f64,
    pub e_integral: f64,
    pub u_prev: ControlInput,
    pub step: usize,
}

impl BaselineState {
    /// Seeds the controller so its first pitch command is bumpless: the
    /// integrator starts at u0.pitch / (K_I * G_K(u0.pitch)).
    pub fn init(cfg: &BaselineConfig, u0: ControlInput) -> Result<Self, BaselineError> {
        cfg.validate(f64::MIN_POSITIVE)?;
        if !(u0.pitch_deg >= cfg.pitch_min_deg && u0.pitch_deg <= cfg.pitch_max_deg) {
            return Err(BaselineError::Config(format!(
                "initial pitch {} outside [{}, {}]",
                u0.pitch_deg, cfg.pitch_min_deg, cfg.pitch_max_deg
            )));
        }
        if !(u0.torque_nm >= cfg.torque_min_nm && u0.torque_nm <= cfg.torque_max_nm) {
            return Err(BaselineError::Config(format!(
                "initial torque {} outside [{}, {}]",
                u0.torque_nm, cfg.torque_min_nm, cfg.torque_max_nm
            )));
        }
        let gk = pitch_gain_schedule(u0.pitch_deg, cfg.k_k_deg);
        Ok(BaselineState {
            omega_hat_torque: 0.0,
            omega_hat_pitch: 0.0,
            e_integral: u0.pitch_deg / (cfg.k_i_deg_per_rad * gk),
            u_prev: u0,
            step: 0,
        })
    }
}

/// One-pole low-pass recursion with unit DC gain. The first call (k = 0)
/// passes the measurement through so the filter starts on the signal.
pub fn lp_filter(omega: f64, prev: f64, t_alpha_s: f64, ts_s: f64, k: usize) -> f64 {
    if k == 0 {
        return omega;
    }
    let a = ts_s / (t_alpha_s - ts_s);
    (1.0 - a) * omega + a * prev
}

/// Speed setpoint for the current power demand: the quadratic-law speed that
/// would produce `p_demand_w`, capped at rated speed.
pub fn omega_g_target(p_demand_w: f64, efficiency: f64, cfg: &BaselineConfig) -> f64 {
    if p_demand_w <= 0.0 {
        return 0.0;
    }
    let unsat = (p_demand_w / (efficiency * cfg.c_2_nms2_per_rad2)).cbrt();
    unsat.min(cfg.omega_g_rated_radps)
}

/// Four-branch torque schedule on the filtered generator speed.
///
/// Above `omega_g_t` the command holds the demanded electrical power, so the
/// numerator carries 1/efficiency; this makes the schedule continuous at the
/// junction with the quadratic branch.
pub fn torque_target(
    omega_hat: f64,
    p_demand_w: f64,
    efficiency: f64,
    omega_g_t: f64,
    cfg: &BaselineConfig,
) -> f64 {
    if omega_hat <= cfg.omega_12_radps {
        0.0
    } else if omega_hat <= cfg.omega_2_radps {
        cfg.c_12_nms_per_rad * (omega_hat - cfg.omega_12_radps)
    } else if omega_hat <= omega_g_t {
        cfg.c_2_nms2_per_rad2 * omega_hat * omega_hat
    } else if omega_g_t > 0.0 && p_demand_w > 0.0 {
        p_demand_w / (efficiency * omega_g_t)
    } else {
        0.0
    }
}

/// Pitch-sensitivity compensation: 1 at fine pitch, halved once the blade
/// reaches `k_k_deg`. Stays in (0, 1] for nonnegative pitch.
pub fn pitch_gain_schedule(pitch_prev_deg: f64, k_k_deg: f64) -> f64 {
    1.0 / (1.0 + pitch_prev_deg / k_k_deg)
}

/// Gain-scheduled PI pitch command. Returns the unsaturated pitch target and
/// the updated, band-clamped integrator.
///
/// The integrator band is the pitch box divided by K_I * G_K, which keeps the
/// integral contribution inside the achievable pitch range (anti-windup).
pub fn pitch_target(
    omega_hat: f64,
    omega_g_t: f64,
    state: &BaselineState,
    cfg: &BaselineConfig,
    ts_s: f64,
) -> (f64, f64) {
    let e = omega_hat - omega_g_t;
    let gk = pitch_gain_schedule(state.u_prev.pitch_deg, cfg.k_k_deg);
    let e_raw = if state.step == 0 {
        state.e_integral
    } else {
        state.e_integral + ts_s * e
    };
    let band_lo = cfg.pitch_min_deg / (cfg.k_i_deg_per_rad * gk);
    let band_hi = cfg.pitch_max_deg / (cfg.k_i_deg_per_rad * gk);
    let e_sat = e_raw.clamp(band_lo, band_hi);
    let target = (cfg.k_p_degs_per_rad * e + cfg.k_i_deg_per_rad * e_sat) * gk;
    (target, e_sat)
}

/// Clamps a raw command to the actuator box, then limits its per-step change
/// to the per-second rate window scaled by `ts_s`. Because both the previous
/// command and the clamped target sit inside the box, the result does too.
pub fn saturate_and_slew(
    target: ControlInput,
    u_prev: ControlInput,
    cfg: &BaselineConfig,
    ts_s: f64,
) -> ControlInput {
    let pitch_sat = target.pitch_deg.clamp(cfg.pitch_min_deg, cfg.pitch_max_deg);
    let torque_sat = target.torque_nm.clamp(cfg.torque_min_nm, cfg.torque_max_nm);
    let dpitch = (pitch_sat - u_prev.pitch_deg)
        .clamp(cfg.dpitch_min_degps * ts_s, cfg.dpitch_max_degps * ts_s);
    let dtorque = (torque_sat - u_prev.torque_nm)
        .clamp(cfg.dtorque_min_nmps * ts_s, cfg.dtorque_max_nmps * ts_s);
    // The re-clamp removes the rounding residue of prev + (sat - prev); it
    // can only shrink the move, so the rate window still holds.
    ControlInput {
        pitch_deg: (u_prev.pitch_deg + dpitch).clamp(cfg.pitch_min_deg, cfg.pitch_max_deg),
        torque_nm: (u_prev.torque_nm + dtorque).clamp(cfg.torque_min_nm, cfg.torque_max_nm),
    }
}

/// One controller sample: filter the measured generator speed, evaluate the
/// torque schedule and the PI pitch loop, then apply saturation and slew.
///
/// `omega_g_radps` is the measured generator speed, `p_demand_w` the demanded
/// electrical power, `efficiency` the drivetrain efficiency used by the
/// power-holding torque branch and the speed setpoint.
pub fn baseline_step(
    omega_g_radps: f64,
    p_demand_w: f64,
    efficiency: f64,
    state: &BaselineState,
    cfg: &BaselineConfig,
    ts_s: f64,
) -> (ControlInput, BaselineState) {
    let k = state.step;
    let omega_hat_torque = lp_filter(
        omega_g_radps,
        state.omega_hat_torque,
        cfg.t_filter_torque_s,
        ts_s,
        k,
    );
    let omega_hat_pitch = lp_filter(
        omega_g_radps,
        state.omega_hat_pitch,
        cfg.t_filter_pitch_s,
        ts_s,
        k,
    );
    let omega_g_t = omega_g_target(p_demand_w, efficiency, cfg);
    let torque_t = torque_target(omega_hat_torque, p_demand_w, efficiency, omega_g_t, cfg);
    let (pitch_t, e_sat) = pitch_target(omega_hat_pitch, omega_g_t, state, cfg, ts_s);
    let u = saturate_and_slew(
        ControlInput {
            pitch_deg: pitch_t,
            torque_nm: torque_t,
        },
        state.u_prev,
        cfg,
        ts_s,
    );
    let next = BaselineState {
        omega_hat_torque,
        omega_hat_pitch,
        e_integral: e_sat,
        u_prev: u,
        step: k + 1,
    };
    (u, next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_config() -> BaselineConfig {
        BaselineConfig {
            t_filter_torque_s: 9.0,
            t_filter_pitch_s: 7.0,
            omega_12_radps: 38.6,
            omega_2_radps: 50.2,
            c_12_nms_per_rad: 480.0,
            c_2_nms2_per_rad2: 2.21,
            omega_g_rated_radps: 119.36,
            k_p_degs_per_rad: 0.45,
            k_i_deg_per_rad: 0.05,
            k_k_deg: 6.3,
            pitch_min_deg: 0.5263,
            pitch_max_deg: 26.0,
            torque_min_nm: 0.0,
            torque_max_nm: 31575.1,
            dpitch_min_degps: -7.0,
            dpitch_max_degps: 7.0,
            dtorque_min_nmps: -15000.0,
            dtorque_max_nmps: 15000.0,
            v_cut_in_mps: 3.0,
            v_cut_out_mps: 25.0,
        }
    }

    #[test]
    fn filter_first_sample_passes_through() {
        assert_eq!(lp_filter(1.7, 99.0, 9.0, 3.0, 0), 1.7);
    }

    #[test]
    fn filter_known_value() {
        // Ts = 1, T_alpha = 3: coefficient a = 1/2, so step from 0 toward 1
        // lands exactly halfway.
        let y = lp_filter(1.0, 0.0, 3.0, 1.0, 1);
        assert!((y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn filter_has_unit_dc_gain() {
        let mut y = lp_filter(2.5, 0.0, 9.0, 3.0, 0);
        for k in 1..200 {
            y = lp_filter(2.5, y, 9.0, 3.0, k);
        }
        assert!((y - 2.5).abs() < 1e-12);
    }

    #[test]
    fn filter_coefficient_stays_contractive() {
        // T_alpha > 2 Ts puts the recursion coefficient in (0, 1), so the
        // filter is stable and monotone toward the input.
        let cfg = test_config();
        assert!(cfg.validate(3.0).is_ok());
        let mut y = 0.0;
        let mut prev_gap = 1.0f64;
        for k in 1..20 {
            y = lp_filter(1.0, y, cfg.t_filter_pitch_s, 3.0, k);
            let gap = (1.0 - y).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
    }

    #[test]
    fn torque_branches_cover_all_regions() {
        let cfg = test_config();
        let eta = 0.9;
        let p = 3.3e6;
        let wt = omega_g_target(p, eta, &cfg);

        assert_eq!(torque_target(10.0, p, eta, wt, &cfg), 0.0);
        assert_eq!(torque_target(cfg.omega_12_radps, p, eta, wt, &cfg), 0.0);

        let strip = torque_target(45.0, p, eta, wt, &cfg);
        assert!((strip - 480.0 * (45.0 - 38.6)).abs() < 1e-9);

        let quad = torque_target(90.0, p, eta, wt, &cfg);
        assert!((quad - 2.21 * 8100.0).abs() < 1e-9);

        let hold = torque_target(wt + 1.0, p, eta, wt, &cfg);
        assert!((hold - p / (eta * wt)).abs() < 1e-9);
    }

    #[test]
    fn torque_zero_demand_gives_zero_hold_branch() {
        let cfg = test_config();
        let wt = omega_g_target(0.0, 0.9, &cfg);
        assert_eq!(wt, 0.0);
        assert_eq!(torque_target(100.0, 0.0, 0.9, wt, &cfg), 0.0);
    }

    #[test]
    fn torque_continuous_at_strip_junction() {
        // c_12 chosen as c_2 * omega_2^2 / (omega_2 - omega_12) glues the
        // strip to the quadratic branch.
        let mut cfg = test_config();
        cfg.c_12_nms_per_rad =
            cfg.c_2_nms2_per_rad2 * cfg.omega_2_radps * cfg.omega_2_radps
                / (cfg.omega_2_radps - cfg.omega_12_radps);
        let eta = 0.9;
        let p = 3.3e6;
        let wt = omega_g_target(p, eta, &cfg);
        let w = cfg.omega_2_radps;
        let below = torque_target(w, p, eta, wt, &cfg);
        let above = torque_target(w + 1e-9, p, eta, wt, &cfg);
        assert!(((below - above) / above).abs() < 1e-9);
    }

    #[test]
    fn torque_continuous_at_power_hold_junction() {
        let cfg = test_config();
        let eta = 0.9;
        let p = 3.3e6;
        let wt = omega_g_target(p, eta, &cfg);
        assert!(wt < cfg.omega_g_rated_radps, "cbrt branch must be active");
        let quad = torque_target(wt, p, eta, wt, &cfg);
        let hold = torque_target(wt * (1.0 + 1e-12), p, eta, wt, &cfg);
        assert!(
            ((quad - hold) / hold).abs() < 1e-9,
            "junction mismatch: {quad} vs {hold}"
        );
    }

    #[test]
    fn speed_target_caps_at_rated() {
        let cfg = test_config();
        // Demand so large the cbrt exceeds rated speed.
        let wt = omega_g_target(1e9, 0.9, &cfg);
        assert_eq!(wt, cfg.omega_g_rated_radps);
        // Small demand leaves the cbrt active.
        let wt2 = omega_g_target(1.0e6, 0.9, &cfg);
        let expect = (1.0e6 / (0.9 * cfg.c_2_nms2_per_rad2)).cbrt();
        assert!((wt2 - expect).abs() < 1e-9);
        assert!(wt2 < cfg.omega_g_rated_radps);
    }

    #[test]
    fn gain_schedule_range() {
        assert_eq!(pitch_gain_schedule(0.0, 6.3), 1.0);
        assert!((pitch_gain_schedule(6.3, 6.3) - 0.5).abs() < 1e-15);
        for i in 0..100 {
            let pitch = i as f64 * 0.3;
            let g = pitch_gain_schedule(pitch, 6.3);
            assert!(g > 0.0 && g <= 1.0);
        }
    }

    #[test]
    fn pitch_loop_starts_bumpless() {
        let cfg = test_config();
        let u0 = ControlInput {
            pitch_deg: 10.0,
            torque_nm: 20000.0,
        };
        let state = BaselineState::init(&cfg, u0).unwrap();
        // Zero tracking error at the first sample reproduces the initial
        // pitch exactly.
        let (target, _) = pitch_target(100.0, 100.0, &state, &cfg, 3.0);
        assert!((target - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pitch_integrator_stays_in_band() {
        let cfg = test_config();
        let u0 = ControlInput {
            pitch_deg: 5.0,
            torque_nm: 20000.0,
        };
        let mut state = BaselineState::init(&cfg, u0).unwrap();
        // Large persistent negative error tries to wind the integrator far
        // below the band; the clamp must hold it at the band edge.
        for _ in 0..200 {
            let (u, next) = baseline_step(40.0, 3.3e6, 0.9, &state, &cfg, 3.0);
            let gk = pitch_gain_schedule(state.u_prev.pitch_deg, cfg.k_k_deg);
            let lo = cfg.pitch_min_deg / (cfg.k_i_deg_per_rad * gk);
            let hi = cfg.pitch_max_deg / (cfg.k_i_deg_per_rad * gk);
            assert!(next.e_integral >= lo - 1e-9 && next.e_integral <= hi + 1e-9);
            assert!(u.pitch_deg >= cfg.pitch_min_deg && u.pitch_deg <= cfg.pitch_max_deg);
            state = next;
        }
        // After the long underspeed stretch the pitch sits at its floor.
        assert!((state.u_prev.pitch_deg - cfg.pitch_min_deg).abs() < 1e-9);
    }

    #[test]
    fn anti_windup_recovers_faster_than_unclamped() {
        let cfg = test_config();
        let u0 = ControlInput {
            pitch_deg: 5.0,
            torque_nm: 20000.0,
        };
        // Reference run with the band active.
        let mut state = BaselineState::init(&cfg, u0).unwrap();
        for _ in 0..100 {
            let (_, next) = baseline_step(40.0, 3.3e6, 0.9, &state, &cfg, 3.0);
            state = next;
        }
        // Mirror run accumulating the raw integral with no clamp.
        let mut raw = BaselineState::init(&cfg, u0).unwrap();
        let mut raw_integral = raw.e_integral;
        let wt = omega_g_target(3.3e6, 0.9, &cfg);
        for k in 0..100 {
            let hat = lp_filter(40.0, raw.omega_hat_pitch, cfg.t_filter_pitch_s, 3.0, k);
            if k > 0 {
                raw_integral += 3.0 * (hat - wt);
            }
            let (_, next) = baseline_step(40.0, 3.3e6, 0.9, &raw, &cfg, 3.0);
            raw = next;
        }
        // The clamped integrator ends far above the free-running one, so the
        // loop recovers as soon as the error changes sign.
        assert!(state.e_integral > raw_integral + 100.0);
    }

    #[test]
    fn saturate_and_slew_box_then_rate() {
        let cfg = test_config();
        let prev = ControlInput {
            pitch_deg: 10.0,
            torque_nm: 20000.0,
        };
        // Inside box, inside rate: passes through.
        let u = saturate_and_slew(
            ControlInput {
                pitch_deg: 12.0,
                torque_nm: 21000.0,
            },
            prev,
            &cfg,
            3.0,
        );
        assert!((u.pitch_deg - 12.0).abs() < 1e-12);
        assert!((u.torque_nm - 21000.0).abs() < 1e-12);

        // Target far above the box: the box edge applies first. From pitch
        // 10 the edge (26) is within one rate step (21), and the torque box
        // is narrower than one rate step, so both land on the box edge.
        let u = saturate_and_slew(
            ControlInput {
                pitch_deg: 90.0,
                torque_nm: 9.9e5,
            },
            prev,
            &cfg,
            3.0,
        );
        assert!((u.pitch_deg - cfg.pitch_max_deg).abs() < 1e-12);
        assert!((u.torque_nm - cfg.torque_max_nm).abs() < 1e-12);

        // From the pitch floor the box edge is more than one rate step away,
        // so the rate cap binds.
        let u = saturate_and_slew(
            ControlInput {
                pitch_deg: 90.0,
                torque_nm: 20000.0,
            },
            ControlInput {
                pitch_deg: 0.5263,
                torque_nm: 20000.0,
            },
            &cfg,
            3.0,
        );
        assert!((u.pitch_deg - (0.5263 + 7.0 * 3.0)).abs() < 1e-12);

        // Downward pitch move from the ceiling hits the rate floor before
        // the box floor; the torque box is narrower than one rate step, so
        // torque lands on its box floor.
        let u = saturate_and_slew(
            ControlInput {
                pitch_deg: -50.0,
                torque_nm: -1.0e6,
            },
            ControlInput {
                pitch_deg: 26.0,
                torque_nm: 20000.0,
            },
            &cfg,
            3.0,
        );
        assert!((u.pitch_deg - (26.0 - 7.0 * 3.0)).abs() < 1e-12);
        assert!((u.torque_nm - cfg.torque_min_nm).abs() < 1e-12);
    }

    #[test]
    fn slew_result_stays_in_box() {
        let cfg = test_config();
        let mut prev = ControlInput {
            pitch_deg: 0.5263,
            torque_nm: 0.0,
        };
        for i in 0..50 {
            let target = ControlInput {
                pitch_deg: if i % 2 == 0 { 200.0 } else { -200.0 },
                torque_nm: if i % 3 == 0 { 1e9 } else { -1e9 },
            };
            prev = saturate_and_slew(target, prev, &cfg, 3.0);
            assert!(prev.pitch_deg >= cfg.pitch_min_deg && prev.pitch_deg <= cfg.pitch_max_deg);
            assert!(prev.torque_nm >= cfg.torque_min_nm && prev.torque_nm <= cfg.torque_max_nm);
        }
    }

    #[test]
    fn step_converges_to_quadratic_law_on_constant_speed() {
        let cfg = test_config();
        let u0 = ControlInput {
            pitch_deg: 0.5263,
            torque_nm: 15000.0,
        };
        let mut state = BaselineState::init(&cfg, u0).unwrap();
        let omega_g = 96.7;
        let mut u = u0;
        for _ in 0..400 {
            let (ui, next) = baseline_step(omega_g, 3.3e6, 0.9, &state, &cfg, 3.0);
            u = ui;
            state = next;
        }
        // Filter settles to the constant speed, so the command settles to
        // the quadratic branch exactly.
        let expect = cfg.c_2_nms2_per_rad2 * omega_g * omega_g;
        assert!((u.torque_nm - expect).abs() / expect < 1e-9);
        assert!((u.pitch_deg - cfg.pitch_min_deg).abs() < 1e-9);
    }

    #[test]
    fn step_is_deterministic() {
        let cfg = test_config();
        let u0 = ControlInput {
            pitch_deg: 2.0,
            torque_nm: 10000.0,
        };
        let s0 = BaselineState::init(&cfg, u0).unwrap();
        let a = baseline_step(80.0, 3.3e6, 0.9, &s0, &cfg, 3.0);
        let b = baseline_step(80.0, 3.3e6, 0.9, &s0, &cfg, 3.0);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn validation_rejects_bad_settings() {
        let ok = test_config();
        assert!(ok.validate(3.0).is_ok());

        let mut c = test_config();
        c.t_filter_pitch_s = 6.0;
        assert!(c.validate(3.0).is_err(), "filter constant at 2 Ts");

        let mut c = test_config();
        c.omega_2_radps = c.omega_12_radps;
        assert!(c.validate(3.0).is_err(), "collapsed speed strip");

        let mut c = test_config();
        c.omega_g_rated_radps = c.omega_2_radps - 1.0;
        assert!(c.validate(3.0).is_err(), "rated below omega_2");

        let mut c = test_config();
        c.k_i_deg_per_rad = 0.0;
        assert!(
            c.validate(3.0).is_err(),
            "zero integral gain breaks bumpless init"
        );

        let mut c = test_config();
        c.dpitch_min_degps = 0.5;
        assert!(c.validate(3.0).is_err(), "rate window must contain zero");

        let mut c = test_config();
        c.v_cut_out_mps = c.v_cut_in_mps;
        assert!(c.validate(3.0).is_err(), "cut-in must be below cut-out");
    }

    #[test]
    fn init_rejects_out_of_box_input() {
        let cfg = test_config();
        assert!(BaselineState::init(
            &cfg,
            ControlInput {
                pitch_deg: 30.0,
                torque_nm: 0.0
            }
        )
        .is_err());
        assert!(BaselineState::init(
            &cfg,
            ControlInput {
                pitch_deg: 1.0,
                torque_nm: 4.0e4
            }
        )
        .is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // With any in-box previous command and any raw target, the
            // published command stays inside the actuator box and moves no
            // faster than the rate window allows.
            #[test]
            fn slew_keeps_commands_in_box(
                prev_pitch in 0.5263f64..26.0,
                prev_torque in 0.0f64..31575.0,
                target_pitch in -100.0f64..100.0,
                target_torque in -1.0e6f64..1.0e6,
            ) {
                let cfg = test_config();
                let prev = ControlInput { pitch_deg: prev_pitch, torque_nm: prev_torque };
                let target = ControlInput { pitch_deg: target_pitch, torque_nm: target_torque };
                let u = saturate_and_slew(target, prev, &cfg, 3.0);
                prop_assert!(u.pitch_deg >= cfg.pitch_min_deg - 1e-12);
                prop_assert!(u.pitch_deg <= cfg.pitch_max_deg + 1e-12);
                prop_assert!(u.torque_nm >= cfg.torque_min_nm - 1e-12);
                prop_assert!(u.torque_nm <= cfg.torque_max_nm + 1e-12);
                prop_assert!((u.pitch_deg - prev_pitch).abs() <= 7.0 * 3.0 + 1e-12);
                prop_assert!((u.torque_nm - prev_torque).abs() <= 15000.0 * 3.0 + 1e-9);
            }

            // The gain schedule stays in (0, 1] over the whole pitch box.
            #[test]
            fn gain_schedule_in_unit_interval(pitch in 0.0f64..90.0, kk in 0.1f64..50.0) {
                let g = pitch_gain_schedule(pitch, kk);
                prop_assert!(g > 0.0 && g <= 1.0);
            }
        }
    }

    #[test]
    fn kv_round_trip_parses() {
        let text = "\
t_filter_torque_s = 9.0
t_filter_pitch_s = 7.0
omega_12_radps = 38.6
omega_2_radps = 50.2
c_12_nms_per_rad = 480.0
c_2_nms2_per_rad2 = 2.21
omega_g_rated_radps = 119.36
k_p_degs_per_rad = 0.45
k_i_deg_per_rad = 0.05
k_k_deg = 6.3
pitch_min_deg = 0.5263
pitch_max_deg = 26.0
torque_min_nm = 0.0
torque_max_nm = 31575.1
dpitch_min_degps = -7.0
dpitch_max_degps = 7.0
dtorque_min_nmps = -15000.0
dtorque_max_nmps = 15000.0
v_cut_in_mps = 3.0
v_cut_out_mps = 25.0
";
        let cfg = BaselineConfig::from_kv_text(text, 3.0).unwrap();
        assert_eq!(cfg, test_config());
        assert!(BaselineConfig::from_kv_text("t_filter_torque_s = 9.0", 3.0).is_err());
    }
}
