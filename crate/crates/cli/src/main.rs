use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use serde::Serialize;

use dualcam::geometry::{CameraId, CameraIntrinsics, DevicePose, Rotation};
use dualcam::io::{load_envmap, read_pfm, read_ppm};
use dualcam::lighting::estimate_lights;
use dualcam::metrics::{coverage, psnr, ssim, Frustum, DEFAULT_SAMPLES};
use dualcam::policy::{fit_energy_model, EnergyModel, EnergyRow, MEASURED_SESSIONS};
use dualcam::scenario::{run_scenario, write_artifacts, ScenarioConfig};
use dualcam::{Error, Image};

/// Sensor resolution used for coverage frusta; only the aspect ratio matters.
const COVERAGE_WIDTH_PX: u32 = 640;
const COVERAGE_HEIGHT_PX: u32 = 480;

#[derive(Parser)]
#[command(name = "dualcam", version, about = "Dual-camera environment capture simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config end to end and write its artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sphere coverage of camera setups, with ratios against the first setup.
    ///
    /// A setup is a comma-separated list of `camera[:h_fov_deg][@yaw_deg[/pitch_deg]]`
    /// where camera is front, back_wide, back_ultrawide or back (= back_wide).
    Coverage {
        #[arg(long = "setup", required = true)]
        setups: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        dilation_deg: f64,
        #[arg(long)]
        json: bool,
    },
    /// Fit the battery model to a measurement table (builtin table by default).
    ///
    /// CSV columns: front_min, back_min, battery_pct, and optionally
    /// session_min and activations.
    Energy {
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Compare two images (PPM or PFM, chosen by extension).
    #[command(group(ArgGroup::new("metric").required(true).args(["psnr", "ssim"])))]
    Metrics {
        #[arg(long)]
        psnr: bool,
        #[arg(long)]
        ssim: bool,
        a: PathBuf,
        b: PathBuf,
    },
    /// Estimate the dominant light and SH lighting of a stitched map.
    Estimate {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Coverage { setups, samples, dilation_deg, json } => cmd_coverage(&setups, samples, dilation_deg, json),
        Command::Energy { table } => energy(table.as_deref()),
        Command::Metrics { psnr, a, b, .. } => metrics(psnr, &a, &b),
        Command::Estimate { env, mask } => estimate(&env, &mask),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for invalid configs and arguments, 3 for unreadable or unwritable files.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::RankDeficient(_)
        | Error::DimensionMismatch(_)
        | Error::InsufficientObservation { .. } => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        _ => 1,
    }
}

fn simulate(config: &Path, out: &Path) -> Result<(), Error> {
    let cfg = ScenarioConfig::load(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let run = run_scenario(&cfg, base)?;
    write_artifacts(&run, &cfg.outputs, out)?;
    let r = &run.report;
    println!(
        "{}: coverage {:.4}, {} actions, battery {:.4} %, final w {} ms",
        r.scenario_id,
        r.coverage.fraction,
        run.actions.len(),
        r.energy.ledger.battery_pct,
        r.policy.final_w_ms
    );
    Ok(())
}

/// Parses one setup into frusta. Repeated cameras share a label so that the
/// per-camera fractions report their union.
fn parse_setup(spec: &str) -> Result<Vec<Frustum<f64>>, Error> {
    let bad = |msg: String| Error::InvalidArgument(format!("setup `{spec}`: {msg}"));
    let mut frusta = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (cam_fov, orient) = match item.split_once('@') {
            Some((a, b)) => (a, Some(b)),
            None => (item, None),
        };
        let (cam, fov) = match cam_fov.split_once(':') {
            Some((c, f)) => (c, Some(f)),
            None => (cam_fov, None),
        };
        let id = match cam {
            "back" => CameraId::BackWide,
            other => other.parse().map_err(|e: Error| bad(e.to_string()))?,
        };
        let num = |s: &str, what: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("invalid {what} `{s}`")));
        let h_fov = match fov {
            Some(f) => num(f, "field of view")?,
            None => id.default_h_fov_deg(),
        };
        let (yaw, pitch) = match orient {
            Some(o) => match o.split_once('/') {
                Some((y, p)) => (num(y, "yaw")?, num(p, "pitch")?),
                None => (num(o, "yaw")?, 0.0),
            },
            None => (0.0, 0.0),
        };
        let intr = CameraIntrinsics::from_fov(h_fov, COVERAGE_WIDTH_PX, COVERAGE_HEIGHT_PX)?;
        let device = DevicePose::from_rotation(Rotation::from_yaw_pitch_roll_deg(yaw, pitch, 0.0));
        frusta.push(Frustum::new(id.as_str(), intr, device.camera_pose(id)));
    }
    if frusta.is_empty() {
        return Err(bad("no cameras".into()));
    }
    Ok(frusta)
}

#[derive(Serialize)]
struct CoverageRow<'a> {
    setup: &'a str,
    fraction: f64,
    ratio: f64,
}

fn cmd_coverage(setups: &[String], samples: usize, dilation_deg: f64, json: bool) -> Result<(), Error> {
    if samples == 0 {
        return Err(Error::InvalidArgument("--samples must be positive".into()));
    }
    if !(dilation_deg.is_finite() && dilation_deg >= 0.0) {
        return Err(Error::InvalidArgument("--dilation-deg must be finite and non-negative".into()));
    }
    let parsed = setups.iter().map(|s| parse_setup(s)).collect::<Result<Vec<_>, _>>()?;
    let fractions: Vec<f64> = parsed.iter().map(|f| coverage(f, samples, dilation_deg).fraction).collect();
    let rows: Vec<CoverageRow> = setups
        .iter()
        .zip(&fractions)
        .map(|(s, &f)| CoverageRow { setup: s, fraction: f, ratio: f / fractions[0] })
        .collect();
    if json {
        println!("{}", to_json(&rows)?);
    } else {
        println!("setup\tfraction\tratio");
        for r in &rows {
            println!("{}\t{:.6}\t{:.4}", r.setup, r.fraction, r.ratio);
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<Vec<EnergyRow>, Error> {
    let fmt = |e: csv::Error| Error::Format { format: "csv", message: format!("{}: {e}", path.display()) };
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    reader.deserialize().map(|r| r.map_err(fmt)).collect()
}

#[derive(Serialize)]
struct EnergyReport {
    model: EnergyModel,
    rows: Vec<EnergyResidual>,
    max_abs_residual_pct: f64,
}

#[derive(Serialize)]
struct EnergyResidual {
    #[serde(flatten)]
    row: EnergyRow,
    predicted_pct: f64,
    residual_pct: f64,
}

fn energy(table: Option<&Path>) -> Result<(), Error> {
    let rows = match table {
        Some(p) => read_table(p)?,
        None => MEASURED_SESSIONS.to_vec(),
    };
    let fit = fit_energy_model(&rows)?;
    let report = EnergyReport {
        model: fit.model,
        max_abs_residual_pct: fit.residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
        rows: rows
            .iter()
            .zip(&fit.residuals)
            .map(|(row, &res)| EnergyResidual { row: *row, predicted_pct: fit.model.predict(row), residual_pct: res })
            .collect(),
    };
    println!("{}", to_json(&report)?);
    Ok(())
}

fn read_image(path: &Path) -> Result<Image, Error> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pfm") => read_pfm(path),
        _ => read_ppm(path),
    }
}

fn metrics(use_psnr: bool, a: &Path, b: &Path) -> Result<(), Error> {
    let (a, b) = (read_image(a)?, read_image(b)?);
    if use_psnr {
        println!("psnr_db\t{:.6}", psnr(&a, &b, 1.0)?);
    } else {
        println!("ssim\t{:.6}", ssim(&a, &b)?);
    }
    Ok(())
}

fn estimate(env: &Path, mask: &Path) -> Result<(), Error> {
    let env = load_envmap::<f64>(env, mask)?;
    println!("{}", to_json(&estimate_lights(&env)?)?);
    Ok(())
}

fn to_json<S: Serialize>(value: &S) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format { format: "json", message: e.to_string() })
}
