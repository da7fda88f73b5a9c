//! Run summaries: energy, tracking quality, actuator duty, and solver-time
//! quantiles for one log, and a side-by-side report for two runs on the
//! same time grid.

use thiserror::Error;
use turbine::loads::actuator_travel;

use crate::sim::LogRow;
use crate::wind::Schedule;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("logs disagree on the time grid at row {row}: {a} s vs {b} s")]
    GridMismatch { row: usize, a: f64, b: f64 },
    #[error("logs have different lengths: {a} vs {b} rows")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty log")]
    Empty,
}

/// Metrics of one run against the demand profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub name: String,
    pub energy_wh: f64,
    pub rms_tracking_w: f64,
    pub pitch_travel_deg: f64,
    pub torque_travel_knm: f64,
    pub solve_median_s: f64,
    pub solve_p95_s: f64,
    /// Largest relative exceedance of the demand, 0 when never above it.
    pub max_overshoot_frac: f64,
}

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    assert!(!samples.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile order out of range");
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in quantile input"));
    let pos = q * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < s.len() {
        s[i] + frac * (s[i + 1] - s[i])
    } else {
        s[i]
    }
}

/// Trapezoidal integral of the power column, converted to watt-hours.
pub fn energy_wh(rows: &[LogRow]) -> f64 {
    rows.windows(2)
        .map(|w| 0.5 * (w[0].power_w + w[1].power_w) * (w[1].time_s - w[0].time_s))
        .sum::<f64>()
        / 3600.0
}

pub fn run_metrics(name: &str, rows: &[LogRow], demand: &Schedule) -> Result<RunMetrics, CompareError> {
    if rows.is_empty() {
        return Err(CompareError::Empty);
    }
    let n = rows.len() as f64;
    let mut sq_err = 0.0;
    let mut max_overshoot: f64 = 0.0;
    for r in rows {
        let d = demand.mean_at(r.time_s);
        let err = r.power_w - d;
        sq_err += err * err;
        max_overshoot = max_overshoot.max(err / d);
    }
    let pitch: Vec<f64> = rows.iter().map(|r| r.pitch_deg).collect();
    let torque: Vec<f64> = rows.iter().map(|r| r.gen_torque_knm).collect();
    let solve: Vec<f64> = rows.iter().map(|r| r.solve_time_s).collect();
    Ok(RunMetrics {
        name: name.to_string(),
        energy_wh: energy_wh(rows),
        rms_tracking_w: (sq_err / n).sqrt(),
        pitch_travel_deg: actuator_travel(&pitch),
        torque_travel_knm: actuator_travel(&torque),
        solve_median_s: quantile(&solve, 0.5),
        solve_p95_s: quantile(&solve, 0.95),
        max_overshoot_frac: max_overshoot,
    })
}

/// Side-by-side summary of two runs sharing a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub a: RunMetrics,
    pub b: RunMetrics,
}

pub fn compare(
    name_a: &str,
    rows_a: &[LogRow],
    name_b: &str,
    rows_b: &[LogRow],
    demand: &Schedule,
) -> Result<CompareReport, CompareError> {
    if rows_a.len() != rows_b.len() {
        return Err(CompareError::LengthMismatch {
            a: rows_a.len(),
            b: rows_b.len(),
        });
    }
    for (i, (ra, rb)) in rows_a.iter().zip(rows_b).enumerate() {
        if (ra.time_s - rb.time_s).abs() > 1e-6 {
            return Err(CompareError::GridMismatch {
                row: i,
                a: ra.time_s,
                b: rb.time_s,
            });
        }
    }
    Ok(CompareReport {
        a: run_metrics(name_a, rows_a, demand)?,
        b: run_metrics(name_b, rows_b, demand)?,
    })
}

impl CompareReport {
    pub fn render(&self) -> String {
        let (a, b) = (&self.a, &self.b);
        let rel = |x: f64, y: f64| {
            if y.abs() > 0.0 {
                100.0 * (x - y) / y.abs()
            } else {
                0.0
            }
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{:<26}{:>16}{:>16}{:>12}\n",
            "metric", a.name, b.name, "delta %"
        ));
        let mut line = |label: &str, va: f64, vb: f64| {
            out.push_str(&format!(
                "{label:<26}{va:>16.3}{vb:>16.3}{:>12.2}\n",
                rel(va, vb)
            ));
        };
        line("energy_wh", a.energy_wh, b.energy_wh);
        line("rms_tracking_w", a.rms_tracking_w, b.rms_tracking_w);
        line("pitch_travel_deg", a.pitch_travel_deg, b.pitch_travel_deg);
        line("torque_travel_knm", a.torque_travel_knm, b.torque_travel_knm);
        line("solve_median_s", a.solve_median_s, b.solve_median_s);
        line("solve_p95_s", a.solve_p95_s, b.solve_p95_s);
        line(
            "max_overshoot_pct",
            100.0 * a.max_overshoot_frac,
            100.0 * b.max_overshoot_frac,
        );
        out
    }
}
