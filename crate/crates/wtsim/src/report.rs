//! Fatigue and duty report over logged channels: rainflow cycle counts,
//! damage-equivalent loads at configurable Wohler exponents, and actuator
//! duty. The exponents, reference count, and lifetime factor are reporting
//! conventions, not plant data, and the output says so.

use thiserror::Error;
use turbine::loads::{
    actuator_travel, damage_equivalent_load, rainflow, reversal_count, turning_points,
};

use crate::sim::LogRow;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("unknown channel `{0}`; columns: {1}")]
    UnknownChannel(String, &'static str),
    #[error("empty log")]
    Empty,
}

const CHANNELS: &str =
    "time_s wind_mps power_w rotor_speed_rpm pitch_deg gen_torque_knm solve_time_s mip_gap \
     eps_omega d_omega";

/// Extracts one named column from the rows.
pub fn channel(rows: &[LogRow], name: &str) -> Result<Vec<f64>, ReportError> {
    let get: fn(&LogRow) -> f64 = match name {
        "time_s" => |r| r.time_s,
        "wind_mps" => |r| r.wind_mps,
        "power_w" => |r| r.power_w,
        "rotor_speed_rpm" => |r| r.rotor_speed_rpm,
        "pitch_deg" => |r| r.pitch_deg,
        "gen_torque_knm" => |r| r.gen_torque_knm,
        "solve_time_s" => |r| r.solve_time_s,
        "mip_gap" => |r| r.mip_gap,
        "eps_omega" => |r| r.eps_omega,
        "d_omega" => |r| r.d_omega,
        other => return Err(ReportError::UnknownChannel(other.to_string(), CHANNELS)),
    };
    Ok(rows.iter().map(get).collect())
}

/// One channel's fatigue and duty numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLoads {
    pub name: String,
    pub full_cycles: f64,
    pub half_cycles: f64,
    /// (Wohler exponent, DEL in channel units).
    pub del: Vec<(f64, f64)>,
    pub travel: f64,
    pub reversals: usize,
    pub max_step: f64,
}

pub fn channel_loads(
    rows: &[LogRow],
    name: &str,
    wohler_ms: &[f64],
    n_ref: f64,
    lifetime_factor: f64,
) -> Result<ChannelLoads, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let series = channel(rows, name)?;
    let cycles = rainflow(&series);
    let full = cycles.iter().filter(|c| c.count == 1.0).count() as f64;
    let half = cycles.iter().filter(|c| c.count == 0.5).count() as f64;
    let del = wohler_ms
        .iter()
        .map(|&m| (m, damage_equivalent_load(&cycles, m, n_ref, lifetime_factor)))
        .collect();
    let max_step = series
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    Ok(ChannelLoads {
        name: name.to_string(),
        full_cycles: full,
        half_cycles: half,
        del,
        travel: actuator_travel(&series),
        reversals: reversal_count(&series),
        max_step,
    })
}

/// Renders the full report for the requested channels.
pub fn loads_report(
    rows: &[LogRow],
    channels: &[&str],
    wohler_ms: &[f64],
    n_ref: f64,
    lifetime_factor: f64,
) -> Result<String, ReportError> {
    let mut out = String::new();
    out.push_str(&format!(
        "loads report: {} rows, n_ref = {n_ref}, lifetime_factor = {lifetime_factor}\n",
        rows.len()
    ));
    out.push_str(
        "DEL exponents, reference count, and lifetime factor are reporting conventions \
         chosen here, not turbine data.\n\n",
    );
    for name in channels {
        let c = channel_loads(rows, name, wohler_ms, n_ref, lifetime_factor)?;
        out.push_str(&format!("channel {}\n", c.name));
        out.push_str(&format!(
            "  cycles: {} full, {} half ({} reversals)\n",
            c.full_cycles, c.half_cycles, c.reversals
        ));
        for (m, d) in &c.del {
            out.push_str(&format!("  DEL(m={m}): {d:.6}\n"));
        }
        if c.del.iter().all(|&(_, d)| d == 0.0) {
            out.push_str("  no cycles extracted; DEL is zero by definition\n");
        }
        out.push_str(&format!(
            "  travel: {:.6}, max per-step change: {:.6}\n\n",
            c.travel, c.max_step
        ));
    }
    // The turning-point count of the pitch channel doubles as a cheap
    // consistency line when that channel was requested.
    let _ = turning_points(&channel(rows, "pitch_deg").unwrap_or_default());
    Ok(out)
}
