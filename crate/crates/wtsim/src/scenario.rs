//! Scenario files: one flat key=value file names the run (grid, wind,
//! demand, initial state) and points at the turbine, controller, and
//! surface files. Relative paths resolve against the scenario file's
//! directory so scenario folders stay relocatable.

use std::path::{Path, PathBuf};

use thiserror::Error;
use turbine::config::KvMap;
use turbine::cp::CpSurface;
use turbine::mpc::MpcConfig;
use turbine::params::TurbineParams;
use turbine::pwa::{pwa_from_text, BigMData, PwaSurface};
use turbine::{BaselineConfig, ConfigError};

use crate::wind::{Schedule, WindError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario config: {0}")]
    Config(#[from] ConfigError),
    #[error("scenario field {field}: {detail}")]
    BadValue { field: &'static str, detail: String },
    #[error("wind spec: {0}")]
    Wind(#[from] WindError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("turbine parameters: {0}")]
    Params(#[from] turbine::ParamError),
    #[error("controller config: {0}")]
    Mpc(#[from] turbine::mpc::MpcError),
    #[error("baseline config: {0}")]
    Baseline(#[from] turbine::BaselineError),
    #[error("surface table: {0}")]
    Surface(#[from] turbine::CpError),
    #[error("surrogate file: {0}")]
    Pwa(#[from] turbine::PwaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerChoice {
    Mpc,
    Baseline,
    Both,
}

impl ControllerChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mpc" => Some(ControllerChoice::Mpc),
            "baseline" => Some(ControllerChoice::Baseline),
            "both" => Some(ControllerChoice::Both),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerChoice::Mpc => "mpc",
            ControllerChoice::Baseline => "baseline",
            ControllerChoice::Both => "both",
        }
    }
}

/// A parsed scenario: everything the simulator needs except the referenced
/// files' contents.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub duration_s: f64,
    pub ts_s: f64,
    pub dt_s: f64,
    pub startup_discard_s: f64,
    pub controller: ControllerChoice,
    pub wind_ti: f64,
    pub wind_seed: u64,
    /// Mean wind profile; constant scenarios carry a single knot.
    pub wind_mean: Schedule,
    /// Demanded electrical power profile, W.
    pub p_demand: Schedule,
    /// Plant-side multiplier on the true surface, for model-mismatch runs.
    pub plant_cp_scale: f64,
    pub omega0_radps: f64,
    pub pitch0_deg: f64,
    pub torque0_nm: f64,
    pub turbine_file: PathBuf,
    pub mpc_file: PathBuf,
    pub baseline_file: PathBuf,
    pub pwa_file: PathBuf,
    pub cp_file: PathBuf,
}

/// `t:v` pairs separated by whitespace, e.g. `0:6 420:6 450:16`.
fn parse_schedule(field: &'static str, text: &str) -> Result<Schedule, ScenarioError> {
    let mut knots = Vec::new();
    for tok in text.split_whitespace() {
        let (t, v) = tok.split_once(':').ok_or(ScenarioError::BadValue {
            field,
            detail: format!("expected t:v pairs, got `{tok}`"),
        })?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| ScenarioError::BadValue {
                field,
                detail: format!("`{s}` is not a number"),
            })
        };
        knots.push((parse(t)?, parse(v)?));
    }
    Ok(Schedule::new(knots)?)
}

impl Scenario {
    pub fn from_kv_text(text: &str) -> Result<Self, ScenarioError> {
        let kv = KvMap::parse(text)?;
        let bad = |field: &'static str, detail: String| ScenarioError::BadValue { field, detail };

        let duration_s = kv.get_f64("duration_s")?;
        let ts_s = kv.get_f64("ts_s")?;
        let dt_s = kv.get_f64("dt_s")?;
        let startup_discard_s = kv.get_f64_opt("startup_discard_s")?.unwrap_or(120.0);
        let controller_str = kv.get_str("controller")?;
        let controller = ControllerChoice::parse(controller_str)
            .ok_or_else(|| bad("controller", format!("unknown choice `{controller_str}`")))?;

        let wind_ti = kv.get_f64("wind_ti")?;
        let wind_seed = kv.get_f64("wind_seed")? as u64;
        let wind_mean = if kv.contains("wind_schedule") {
            parse_schedule("wind_schedule", kv.get_str("wind_schedule")?)?
        } else {
            Schedule::constant(kv.get_f64("wind_mean_mps")?)?
        };
        let p_demand = if kv.contains("p_demand_schedule") {
            parse_schedule("p_demand_schedule", kv.get_str("p_demand_schedule")?)?
        } else {
            Schedule::constant(kv.get_f64("p_demand_w")?)?
        };

        let plant_cp_scale = kv.get_f64_opt("plant_cp_scale")?.unwrap_or(1.0);
        let omega0_radps = kv.get_f64("omega0_radps")?;
        let pitch0_deg = kv.get_f64("pitch0_deg")?;
        let torque0_nm = kv.get_f64("torque0_nm")?;

        let path = |key: &'static str| -> Result<PathBuf, ScenarioError> {
            Ok(PathBuf::from(kv.get_str(key)?))
        };
        let scenario = Scenario {
            duration_s,
            ts_s,
            dt_s,
            startup_discard_s,
            controller,
            wind_ti,
            wind_seed,
            wind_mean,
            p_demand,
            plant_cp_scale,
            omega0_radps,
            pitch0_deg,
            torque0_nm,
            turbine_file: path("turbine_file")?,
            mpc_file: path("mpc_file")?,
            baseline_file: path("baseline_file")?,
            pwa_file: path("pwa_file")?,
            cp_file: path("cp_file")?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |field: &'static str, detail: String| ScenarioError::BadValue { field, detail };
        if !(self.duration_s > 0.0) {
            return Err(bad("duration_s", format!("must be positive, got {}", self.duration_s)));
        }
        if !(self.ts_s > 0.0) || !(self.dt_s > 0.0) {
            return Err(bad("ts_s", "grid steps must be positive".into()));
        }
        let ratio = self.ts_s / self.dt_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(bad(
                "dt_s",
                format!("dt must divide ts ({} / {} = {ratio})", self.ts_s, self.dt_s),
            ));
        }
        if !(self.startup_discard_s >= 0.0) || self.startup_discard_s >= self.duration_s {
            return Err(bad(
                "startup_discard_s",
                format!(
                    "discard window {} must lie inside the {} s run",
                    self.startup_discard_s, self.duration_s
                ),
            ));
        }
        if !(0.0..0.5).contains(&self.wind_ti) {
            return Err(bad("wind_ti", format!("must lie in [0, 0.5), got {}", self.wind_ti)));
        }
        if !(self.plant_cp_scale > 0.0) || !self.plant_cp_scale.is_finite() {
            return Err(bad(
                "plant_cp_scale",
                format!("must be a positive factor, got {}", self.plant_cp_scale),
            ));
        }
        if !(self.omega0_radps > 0.0) {
            return Err(bad(
                "omega0_radps",
                format!("initial speed must be positive, got {}", self.omega0_radps),
            ));
        }
        Ok(())
    }

    /// Substeps of the plant integrator per controller interval.
    pub fn substeps(&self) -> usize {
        (self.ts_s / self.dt_s).round() as usize
    }

    /// Controller steps covering the full duration.
    pub fn steps(&self) -> usize {
        (self.duration_s / self.ts_s).floor() as usize
    }
}

/// A scenario plus the contents of every file it references, ready to run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub params: TurbineParams,
    pub mpc_cfg: MpcConfig,
    pub baseline_cfg: BaselineConfig,
    pub pwa: PwaSurface,
    pub bigm: BigMData,
    /// The surface the plant integrates, after `plant_cp_scale`.
    pub plant_surface: CpSurface,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Applies the plant-side coefficient scale to a loaded surface.
pub fn scale_surface(surface: &CpSurface, scale: f64) -> Result<CpSurface, turbine::CpError> {
    let values: Vec<f64> = surface.values().iter().map(|v| v * scale).collect();
    CpSurface::new(
        surface.lambda_grid().to_vec(),
        surface.theta_grid().to_vec(),
        values,
    )
}

/// Loads a scenario file and everything it references.
pub fn load_setup(scenario_path: &Path) -> Result<Setup, ScenarioError> {
    let text = read(scenario_path)?;
    let mut scenario = Scenario::from_kv_text(&text)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    for p in [
        &mut scenario.turbine_file,
        &mut scenario.mpc_file,
        &mut scenario.baseline_file,
        &mut scenario.pwa_file,
        &mut scenario.cp_file,
    ] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    build_setup(scenario)
}

/// Resolves a scenario whose paths are already absolute or cwd-relative.
pub fn build_setup(scenario: Scenario) -> Result<Setup, ScenarioError> {
    let params = TurbineParams::from_kv_text(&read(&scenario.turbine_file)?)?;
    let mpc_cfg = MpcConfig::from_kv_text(&read(&scenario.mpc_file)?)?;
    let baseline_cfg = BaselineConfig::from_kv_text(&read(&scenario.baseline_file)?, scenario.ts_s)?;
    let (pwa, bigm) = pwa_from_text(&read(&scenario.pwa_file)?)?;
    let surface = CpSurface::from_csv_text(&read(&scenario.cp_file)?)?;
    let plant_surface = scale_surface(&surface, scenario.plant_cp_scale)?;
    Ok(Setup {
        scenario,
        params,
        mpc_cfg,
        baseline_cfg,
        pwa,
        bigm,
        plant_surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_text() -> String {
        "duration_s = 300\n\
         ts_s = 3\n\
         dt_s = 0.05\n\
         controller = both\n\
         wind_ti = 0.0\n\
         wind_seed = 7\n\
         wind_mean_mps = 8\n\
         p_demand_w = 3.3e6\n\
         omega0_radps = 1.0\n\
         pitch0_deg = 1.0\n\
         torque0_nm = 18000\n\
         turbine_file = turbine.txt\n\
         mpc_file = mpc.txt\n\
         baseline_file = baseline.txt\n\
         pwa_file = pwa.txt\n\
         cp_file = cp.csv\n"
            .to_string()
    }

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_kv_text(&minimal_text()).unwrap();
        assert_eq!(s.startup_discard_s, 120.0);
        assert_eq!(s.controller, ControllerChoice::Both);
        assert_eq!(s.plant_cp_scale, 1.0);
        assert_eq!(s.substeps(), 60);
        assert_eq!(s.steps(), 100);
        assert_eq!(s.wind_mean.mean_at(500.0), 8.0);
        assert_eq!(s.p_demand.mean_at(0.0), 3.3e6);
    }

    #[test]
    fn schedules_override_constants() {
        let text = minimal_text()
            + "wind_schedule = 0:6 420:6 450:16\n\
               p_demand_schedule = 0:2e6 100:3e6\n";
        let s = Scenario::from_kv_text(&text).unwrap();
        assert_eq!(s.wind_mean.mean_at(435.0), 11.0);
        assert_eq!(s.p_demand.mean_at(50.0), 2.5e6);
    }

    #[test]
    fn grid_and_window_violations_are_rejected() {
        let bad_dt = minimal_text().replace("dt_s = 0.05", "dt_s = 0.7");
        assert!(matches!(
            Scenario::from_kv_text(&bad_dt),
            Err(ScenarioError::BadValue { field: "dt_s", .. })
        ));
        let bad_discard = minimal_text() + "startup_discard_s = 300\n";
        assert!(matches!(
            Scenario::from_kv_text(&bad_discard),
            Err(ScenarioError::BadValue { field: "startup_discard_s", .. })
        ));
        let bad_ti = minimal_text().replace("wind_ti = 0.0", "wind_ti = 0.5");
        assert!(matches!(
            Scenario::from_kv_text(&bad_ti),
            Err(ScenarioError::BadValue { field: "wind_ti", .. })
        ));
        let bad_controller = minimal_text().replace("controller = both", "controller = manual");
        assert!(matches!(
            Scenario::from_kv_text(&bad_controller),
            Err(ScenarioError::BadValue { field: "controller", .. })
        ));
    }

    #[test]
    fn schedule_tokens_must_be_t_v_pairs() {
        let text = minimal_text() + "wind_schedule = 0:6 nonsense\n";
        assert!(matches!(
            Scenario::from_kv_text(&text),
            Err(ScenarioError::BadValue { field: "wind_schedule", .. })
        ));
    }

    #[test]
    fn surface_scaling_multiplies_values() {
        let s = turbine::cp::reference_surface();
        let scaled = scale_surface(&s, 0.9).unwrap();
        let (l, t) = (5.0, 3.0);
        let a = s.eval(l, t).unwrap();
        let b = scaled.eval(l, t).unwrap();
        assert!((b - 0.9 * a).abs() < 1e-12);
    }
}
