use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use scalar_attitude::measurement::Preset;
use scalar_attitude::observability::{
    DEFAULT_BETA, DEFAULT_DELTA1, DEFAULT_MU, DEFAULT_N_QUAD, DEFAULT_WINDOW,
};
use scalar_attitude::observer::{DEFAULT_P0, DEFAULT_PROJECTION_INTERVAL, DEFAULT_Q, DEFAULT_V};
use scalar_attitude::sim::PresetTrajectory;

#[derive(Debug, Parser)]
#[command(
    name = "scalar-attitude",
    version,
    about = "Attitude estimation on SO(3) from scalar direction measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic IMU sequence.
    Simulate(SimulateArgs),
    /// Run an estimator over an IMU sequence.
    Estimate(EstimateArgs),
    /// Sliding-window observability analysis.
    Analyze(AnalyzeArgs),
    /// RMSE table of estimate histories against ground truth.
    Evaluate(EvaluateArgs),
    /// Re-run a manifest and check its outputs are reproduced.
    Replay(ReplayArgs),
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0f64; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

pub fn parse_config(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: scalar_attitude::Error| e.to_string())
}

pub fn parse_trajectory(s: &str) -> Result<PresetTrajectory, String> {
    s.parse().map_err(|e: scalar_attitude::Error| e.to_string())
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Named trajectory: pe_tumble, constant_omega or static.
    #[arg(long, value_parser = parse_trajectory, conflicts_with = "spec")]
    pub preset: Option<PresetTrajectory>,
    /// Trajectory spec as JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Sample rate in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// True gyro bias, rad/s.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub bias: Option<[f64; 3]>,
    /// Gyro noise sigma, rad/s.
    #[arg(long)]
    pub gyro_sigma: Option<f64>,
    /// Direction noise sigma.
    #[arg(long)]
    pub meas_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Configuration of the scalar output file.
    #[arg(long, value_parser = parse_config, default_value = "six")]
    pub config: Preset,
    /// Magnetic inclination in degrees, positive down.
    #[arg(long, default_value_t = 60.0, allow_hyphen_values = true)]
    pub inclination_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub declination_deg: f64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverKind {
    Riccati,
    RiccatiUnbiased,
    Complementary,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// IMU sequence CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "riccati")]
    pub observer: ObserverKind,
    /// Measurement configuration: six, four, three or two.
    #[arg(long, value_parser = parse_config, default_value = "six")]
    pub config: Preset,
    /// Output weight Q = q I.
    #[arg(long, default_value_t = DEFAULT_Q)]
    pub q: f64,
    /// Process weight V = v I.
    #[arg(long, default_value_t = DEFAULT_V)]
    pub v: f64,
    /// Initial Riccati matrix P0 = p0 I.
    #[arg(long, default_value_t = DEFAULT_P0)]
    pub p0: f64,
    /// Steps between re-projections onto SO(3); 0 disables.
    #[arg(long, default_value_t = DEFAULT_PROJECTION_INTERVAL)]
    pub projection_interval: u64,
    #[arg(long, default_value_t = 2.0)]
    pub k_acc: f64,
    #[arg(long, default_value_t = 2.0)]
    pub k_mag: f64,
    #[arg(long, default_value_t = 0.5)]
    pub k_bias: f64,
    /// Initial roll,pitch,yaw in degrees (ZYX).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    pub init_rot: [f64; 3],
    /// Initial bias estimate, rad/s.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    pub init_bias: [f64; 3],
    /// Magnetic inclination in degrees; m0 is derived from ground truth when absent.
    #[arg(long, requires = "declination_deg", allow_hyphen_values = true)]
    pub inclination_deg: Option<f64>,
    #[arg(long, requires = "inclination_deg", allow_hyphen_values = true)]
    pub declination_deg: Option<f64>,
    /// Samples averaged when deriving m0.
    #[arg(long, default_value_t = scalar_attitude::dataset::DEFAULT_M0_SAMPLES)]
    pub m0_samples: usize,
    /// True gyro bias, adds bias errors to the error series.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub true_bias: Option<[f64; 3]>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "preset", "spec"])))]
pub struct AnalyzeArgs {
    /// IMU sequence CSV; its ground truth and gyro define the trajectory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Named noise-free synthetic trajectory.
    #[arg(long, value_parser = parse_trajectory)]
    pub preset: Option<PresetTrajectory>,
    /// Synthetic trajectory spec as JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_parser = parse_config, default_value = "six")]
    pub config: Preset,
    /// Window length in seconds.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: f64,
    /// Sweep stride in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub stride: f64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA1)]
    pub delta1: f64,
    /// Quadrature nodes per window.
    #[arg(long, default_value_t = DEFAULT_N_QUAD)]
    pub n_quad: usize,
    #[arg(long, requires = "declination_deg", allow_hyphen_values = true)]
    pub inclination_deg: Option<f64>,
    #[arg(long, requires = "inclination_deg", allow_hyphen_values = true)]
    pub declination_deg: Option<f64>,
    #[arg(long, default_value_t = scalar_attitude::dataset::DEFAULT_M0_SAMPLES)]
    pub m0_samples: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Estimate history CSV, optionally prefixed with `label=`. Repeatable.
    #[arg(long, required = true)]
    pub estimates: Vec<String>,
    /// IMU sequence CSV with ground truth.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub true_bias: Option<[f64; 3]>,
    /// Directory for rmse.json, rmse.txt and a manifest.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the reproduced outputs.
    #[arg(long)]
    pub out: PathBuf,
}
