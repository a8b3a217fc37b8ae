//! Synthetic ground truth: angular-velocity profiles, attitude propagation and outputs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{predict_outputs, MeasurementConfig};
use crate::observability::TrueTrajectory;
use crate::observer::StepInput;
use crate::so3::{exp_so3, Rotation, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OmegaProfile {
    Static,
    Constant {
        omega: Vec3,
    },
    /// Per-axis `amplitude * sin(2π frequency t + phase)`.
    Sinusoid {
        amplitude: Vec3,
        frequency_hz: Vec3,
        phase: Vec3,
    },
}

impl OmegaProfile {
    pub fn at(&self, t: f64) -> Vec3 {
        match self {
            OmegaProfile::Static => Vec3::zeros(),
            OmegaProfile::Constant { omega } => *omega,
            OmegaProfile::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => Vec3::from_fn(|i, _| {
                amplitude[i] * (2.0 * PI * frequency_hz[i] * t + phase[i]).sin()
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub gyro_sigma: f64,
    pub meas_sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub omega_profile: OmegaProfile,
    pub r0: Rotation,
    pub d_true: Vec3,
    pub duration: f64,
    pub rate: f64,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "rate must be > 0, got {}",
                self.rate
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Invalid(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if self.d_true.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("true bias"));
        }
        if let Some(n) = &self.noise {
            if !(n.gyro_sigma >= 0.0 && n.meas_sigma >= 0.0) {
                return Err(Error::Invalid("noise sigmas must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        1.0 / self.rate
    }

    /// Number of samples, both endpoints included.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.rate).round() as usize + 1
    }
}

/// Named fixtures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetTrajectory {
    PeTumble,
    ConstantOmega,
    Static,
}

impl PresetTrajectory {
    pub const ALL: [PresetTrajectory; 3] = [
        PresetTrajectory::PeTumble,
        PresetTrajectory::ConstantOmega,
        PresetTrajectory::Static,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetTrajectory::PeTumble => "pe_tumble",
            PresetTrajectory::ConstantOmega => "constant_omega",
            PresetTrajectory::Static => "static",
        }
    }
}

impl fmt::Display for PresetTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetTrajectory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetTrajectory::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "trajectory",
                name: s.to_string(),
            })
    }
}

/// Nominal IMU rate of the fixtures.
pub const PRESET_RATE_HZ: f64 = 286.0;

/// True gyro bias of the fixtures, rad/s.
pub fn preset_bias() -> Vec3 {
    Vec3::new(0.02, -0.01, 0.03)
}

/// Fixture specs, all noise-free and starting at `R0 = I`.
///
/// | name | Ω (rad/s) | duration |
/// |---|---|---|
/// | `pe_tumble` | `sin(2π f_i t)` with `f = (0.5, 0.7, 0.3)` Hz | 60 s |
/// | `constant_omega` | `(0.3, 0, 0)` | 120 s |
/// | `static` | `0` | 30 s |
pub fn preset_trajectory(preset: PresetTrajectory) -> TrajectorySpec {
    let (omega_profile, duration) = match preset {
        PresetTrajectory::PeTumble => (
            OmegaProfile::Sinusoid {
                amplitude: Vec3::new(1.0, 1.0, 1.0),
                frequency_hz: Vec3::new(0.5, 0.7, 0.3),
                phase: Vec3::zeros(),
            },
            60.0,
        ),
        PresetTrajectory::ConstantOmega => (
            OmegaProfile::Constant {
                omega: Vec3::new(0.3, 0.0, 0.0),
            },
            120.0,
        ),
        PresetTrajectory::Static => (OmegaProfile::Static, 30.0),
    };
    TrajectorySpec {
        omega_profile,
        r0: Rotation::identity(),
        d_true: preset_bias(),
        duration,
        rate: PRESET_RATE_HZ,
        noise: None,
    }
}

/// A smooth random trajectory: per-axis sinusoids with amplitudes in `[0.2, 1.5]` rad/s,
/// frequencies in `[0.05, 0.8]` Hz, uniform phases and a random initial attitude.
pub fn random_smooth_spec(seed: u64, duration: f64, rate: f64) -> TrajectorySpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: f64, hi: f64| Vec3::from_fn(|_, _| rng.random_range(lo..hi));
    let amplitude = draw(0.2, 1.5);
    let frequency_hz = draw(0.05, 0.8);
    let phase = draw(0.0, 2.0 * PI);
    let r0 = exp_so3(&draw(-1.5, 1.5));
    let d_true = draw(-0.05, 0.05);
    TrajectorySpec {
        omega_profile: OmegaProfile::Sinusoid {
            amplitude,
            frequency_hz,
            phase,
        },
        r0,
        d_true,
        duration,
        rate,
        noise: None,
    }
}

/// Ground truth plus the sensor streams an observer consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRun {
    pub spec: TrajectorySpec,
    pub config: MeasurementConfig,
    pub truth: TrueTrajectory,
    /// `Ω(t_k + h/2) + d + noise`, the rate held over `[t_k, t_{k+1}]`.
    pub omega_y: Vec<Vec3>,
    pub y: Vec<DVector<f64>>,
}

impl SyntheticRun {
    pub fn times(&self) -> &[f64] {
        self.truth.times()
    }

    /// Observer inputs stepping from the first to the last sample.
    pub fn inputs(&self) -> Vec<StepInput> {
        let h = self.spec.step();
        let n = self.truth.len();
        (0..n.saturating_sub(1))
            .map(|k| StepInput {
                omega_y: self.omega_y[k],
                y_meas: self.y[k].clone(),
                dt: h,
                t: self.truth.times()[k],
            })
            .collect()
    }
}

/// Draws `N(0, σ²)` clipped to `±3σ`.
pub(crate) struct ClippedNormal {
    rng: ChaCha8Rng,
}

impl ClippedNormal {
    pub(crate) fn new(seed: u64) -> Self {
        ClippedNormal {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub(crate) fn sample(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        let n = Normal::new(0.0, sigma).expect("sigma checked finite and positive");
        n.sample(&mut self.rng).clamp(-3.0 * sigma, 3.0 * sigma)
    }

    pub(crate) fn vec3(&mut self, sigma: f64) -> Vec3 {
        Vec3::new(self.sample(sigma), self.sample(sigma), self.sample(sigma))
    }
}

/// Propagates `R_{k+1} = R_k exp(h Ω(t_k + h/2))` and synthesizes gyro and scalar outputs.
pub fn generate(spec: &TrajectorySpec, cfg: &MeasurementConfig) -> Result<SyntheticRun> {
    spec.validate()?;
    let n = spec.sample_count();
    let h = spec.step();
    let mut gyro_noise = spec.noise.map(|ns| ClippedNormal::new(ns.seed));
    let mut meas_noise = spec
        .noise
        .map(|ns| ClippedNormal::new(ns.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)));

    let mut times = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut omegas = Vec::with_capacity(n);
    let mut omega_y = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut r = spec.r0;
    for k in 0..n {
        let t = k as f64 * h;
        let mid = spec.omega_profile.at(t + 0.5 * h);
        let mut gyro = mid + spec.d_true;
        let mut out = predict_outputs(&r, cfg, t)?;
        if let (Some(g), Some(m), Some(ns)) = (&mut gyro_noise, &mut meas_noise, &spec.noise) {
            gyro += g.vec3(ns.gyro_sigma);
            out.iter_mut().for_each(|v| *v += m.sample(ns.meas_sigma));
        }
        times.push(t);
        rotations.push(r);
        omegas.push(spec.omega_profile.at(t));
        omega_y.push(gyro);
        y.push(out);
        r = r * exp_so3(&(mid * h));
    }
    Ok(SyntheticRun {
        spec: spec.clone(),
        config: cfg.clone(),
        truth: TrueTrajectory::new(times, rotations, omegas)?,
        omega_y,
        y,
    })
}
