//! Command-line front end: simulate scenarios, fit the control-oriented
//! surface approximation, compare finished runs, and post-process logs for
//! fatigue metrics. Exit code 0 on success, 2 when a simulation aborts on a
//! controller fallback storm, 1 for every other failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use thiserror::Error;
use turbine::cp::CpSurface;
use turbine::pwa::{build_partition, compute_bigm, fit_pwa, pwa_to_text};

use wtsim::{
    compare, loads_report, read_csv, run_closed_loop, write_csv, CompareError, CsvError,
    ReportError, ScenarioError, SimError, SimLog,
};

#[derive(Parser)]
#[command(name = "wtsim", about = "Closed-loop wind turbine simulation harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write per-controller logs plus a summary.
    Simulate {
        /// Scenario key=value file.
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario's controller selection (mpc|baseline|both).
        #[arg(long)]
        controller: Option<String>,
        /// Override the scenario's wind seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit the piecewise-affine surrogate from a surface table.
    FitCp {
        /// Surface CSV (lambda rows, theta columns).
        #[arg(long)]
        surface: PathBuf,
        /// Tip-speed-ratio breakpoints, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.5,5.0,8.1,24.0")]
        lambda_breaks: Vec<f64>,
        /// Pitch breakpoints in degrees, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.0,4.0,13.0,26.0")]
        theta_breaks: Vec<f64>,
        /// Fit samples per region axis.
        #[arg(long, default_value_t = 12)]
        samples: usize,
        /// Output surrogate description file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize two run logs side by side.
    Compare {
        /// First log CSV.
        #[arg(long)]
        a: PathBuf,
        /// Second log CSV.
        #[arg(long)]
        b: PathBuf,
        /// Scenario file supplying the demand profile.
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rainflow, damage-equivalent loads, and duty metrics for a log.
    AnalyzeLoads {
        /// Input log CSV.
        #[arg(long = "in")]
        input: PathBuf,
        /// Channels to analyze, comma separated column names.
        #[arg(long, value_delimiter = ',', default_value = "pitch_deg,gen_torque_knm")]
        channels: Vec<String>,
        /// Wohler exponents, comma separated.
        #[arg(long = "m", value_delimiter = ',', default_value = "4.0,10.0")]
        wohler: Vec<f64>,
        /// Reference cycle count.
        #[arg(long, default_value_t = 1.0)]
        n_ref: f64,
        /// Cycle-count extrapolation factor.
        #[arg(long, default_value_t = 1.0)]
        lifetime_factor: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum AppError {
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Csv(#[from] CsvError),
    #[error("{0}")]
    Compare(#[from] CompareError),
    #[error("{0}")]
    Report(#[from] ReportError),
    #[error("{0}")]
    Surface(#[from] turbine::CpError),
    #[error("{0}")]
    Pwa(#[from] turbine::PwaError),
    #[error("bad argument: {0}")]
    BadArg(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, AppError::Sim(SimError::FallbackStorm { .. })) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Simulate {
            config,
            controller,
            seed,
            out,
        } => simulate(&config, controller.as_deref(), seed, &out),
        Cmd::FitCp {
            surface,
            lambda_breaks,
            theta_breaks,
            samples,
            out,
        } => fit_cp(&surface, &lambda_breaks, &theta_breaks, samples, &out),
        Cmd::Compare { a, b, config, out } => compare_cmd(&a, &b, &config, out.as_deref()),
        Cmd::AnalyzeLoads {
            input,
            channels,
            wohler,
            n_ref,
            lifetime_factor,
            out,
        } => analyze_loads(&input, &channels, &wohler, n_ref, lifetime_factor, out.as_deref()),
    }
}

fn simulate(
    config: &Path,
    controller: Option<&str>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), AppError> {
    let mut setup = wtsim::load_setup(config)?;
    if let Some(name) = controller {
        setup.scenario.controller = wtsim::ControllerChoice::parse(name)
            .ok_or_else(|| AppError::BadArg(format!("unknown controller `{name}`")))?;
    }
    if let Some(s) = seed {
        setup.scenario.wind_seed = s;
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;

    let logs = run_closed_loop(&setup)?;

    let mut summary = String::new();
    summary.push_str(&format!(
        "scenario {} seed {} controller {}\n\n",
        config.display(),
        setup.scenario.wind_seed,
        setup.scenario.controller.as_str()
    ));
    for log in &logs {
        let name = log.controller.as_str();
        let csv_path = out.join(format!("{name}.csv"));
        write_csv(&log.rows, &csv_path)?;
        summary.push_str(&render_run_summary(log, &setup));
    }
    if let [a, b] = logs.as_slice() {
        let report = compare(
            a.controller.as_str(),
            &a.rows,
            b.controller.as_str(),
            &b.rows,
            &setup.scenario.p_demand,
        )?;
        summary.push_str("\n");
        summary.push_str(&report.render());
    }
    let summary_path = out.join("summary.txt");
    std::fs::write(&summary_path, &summary).map_err(io_err(&summary_path))?;

    // Provenance echo: the scenario text and every file it referenced.
    let mut echo = String::new();
    for path in [
        config,
        setup.scenario.turbine_file.as_path(),
        setup.scenario.mpc_file.as_path(),
        setup.scenario.baseline_file.as_path(),
        setup.scenario.pwa_file.as_path(),
        setup.scenario.cp_file.as_path(),
    ] {
        echo.push_str(&format!("# --- {} ---\n", path.display()));
        echo.push_str(&std::fs::read_to_string(path).map_err(io_err(path))?);
        echo.push('\n');
    }
    let echo_path = out.join("config_echo.txt");
    std::fs::write(&echo_path, &echo).map_err(io_err(&echo_path))?;

    print!("{summary}");
    Ok(())
}

fn render_run_summary(log: &SimLog, setup: &wtsim::Setup) -> String {
    let sc = &setup.scenario;
    let eta = setup.params.efficiency;
    let e = &log.energy;
    let bound = eta * (e.mechanical_j + e.inertia_released_j);
    format!(
        "run {}: {} steps, {} logged after {}s discard, {} fallbacks\n\
         energy audit: electrical {:.4e} J, aerodynamic {:.4e} J, inertia released {:.4e} J\n\
         conversion bound: electrical <= efficiency*(aero + inertia) = {:.4e} J ({})\n",
        log.controller.as_str(),
        log.total_steps,
        log.rows.len(),
        sc.startup_discard_s,
        log.fallback_steps,
        e.electrical_j,
        e.mechanical_j,
        e.inertia_released_j,
        bound,
        if e.electrical_j <= bound * (1.0 + 1e-3) + 1.0 {
            "holds"
        } else {
            "VIOLATED"
        },
    )
}

fn fit_cp(
    surface_path: &Path,
    lambda_breaks: &[f64],
    theta_breaks: &[f64],
    samples: usize,
    out: &Path,
) -> Result<(), AppError> {
    let text = std::fs::read_to_string(surface_path).map_err(io_err(surface_path))?;
    let surface = CpSurface::from_csv_text(&text)?;
    let partition = build_partition(lambda_breaks, theta_breaks)?;
    let pwa = fit_pwa(&surface, &partition, samples)?;
    let bigm = compute_bigm(&pwa, partition.bounding_box());
    std::fs::write(out, pwa_to_text(&pwa, &bigm)).map_err(io_err(out))?;
    println!(
        "fit {} regions from {}: rms residual {:.6}, wrote {}",
        partition.num_regions(),
        surface_path.display(),
        pwa.fit_rms,
        out.display()
    );
    Ok(())
}

fn compare_cmd(a: &Path, b: &Path, config: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let rows_a = read_csv(a)?;
    let rows_b = read_csv(b)?;
    let text = std::fs::read_to_string(config).map_err(io_err(config))?;
    let scenario = wtsim::Scenario::from_kv_text(&text)?;
    let name = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string())
    };
    let report = compare(&name(a), &rows_a, &name(b), &rows_b, &scenario.p_demand)?;
    emit(report.render(), out)
}

fn analyze_loads(
    input: &Path,
    channels: &[String],
    wohler: &[f64],
    n_ref: f64,
    lifetime_factor: f64,
    out: Option<&Path>,
) -> Result<(), AppError> {
    if wohler.iter().any(|&m| !(m >= 1.0)) {
        return Err(AppError::BadArg("Wohler exponents must be >= 1".into()));
    }
    if !(n_ref > 0.0) || !(lifetime_factor >= 1.0) {
        return Err(AppError::BadArg(
            "need n_ref > 0 and lifetime_factor >= 1".into(),
        ));
    }
    let rows = read_csv(input)?;
    let names: Vec<&str> = channels.iter().map(String::as_str).collect();
    let text = loads_report(&rows, &names, wohler, n_ref, lifetime_factor)?;
    emit(text, out)
}

fn emit(text: String, out: Option<&Path>) -> Result<(), AppError> {
    match out {
        Some(path) => std::fs::write(path, &text).map_err(io_err(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
