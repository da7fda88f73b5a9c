//! Closed-loop wind turbine simulation harness.
//!
//! Ties the `turbine` crate's plant model and controllers into runnable
//! scenarios: seeded turbulent wind, zero-order-hold control at the
//! controller period with fine-step plant integration in between, fixed
//! 10-column CSV logs, and side-by-side run summaries. The `wtsim` binary
//! exposes simulation, surrogate fitting, comparison, and fatigue analysis
//! as subcommands.

pub mod compare;
pub mod csvio;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod wind;

pub use compare::{compare, energy_wh, quantile, run_metrics, CompareError, CompareReport, RunMetrics};
pub use csvio::{from_csv_text, read_csv, to_csv_text, write_csv, CsvError, CSV_HEADER};
pub use report::{channel, channel_loads, loads_report, ChannelLoads, ReportError};
pub use scenario::{
    build_setup, load_setup, scale_surface, ControllerChoice, Scenario, ScenarioError, Setup,
};
pub use sim::{
    run_closed_loop, run_one, ControllerKind, EnergyAudit, LogRow, SimError, SimLog,
    FALLBACK_STORM_FRACTION,
};
pub use wind::{
    generate_wind, generate_wind_scheduled, Schedule, WindError, WindSeries, COHERENCE_TIME_S,
    WIND_FLOOR_MPS,
};
