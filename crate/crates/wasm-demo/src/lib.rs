//! Browser bindings: each export takes a JSON parameter object and returns a JSON string.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use scalar_attitude::measurement::{preset_config, Preset};
use scalar_attitude::observability::{
    analyze_window, pe_classify, sweep_windows, PeClass, Thresholds, Window, DEFAULT_N_QUAD,
};
use scalar_attitude::observer::{run, Estimator, Gains, ObserverState};
use scalar_attitude::series::VectorSeries;
use scalar_attitude::sim::{generate, preset_trajectory, PresetTrajectory};
use scalar_attitude::so3::{angular_distance, from_euler_zyx, Rotation, Vec3};

const MAX_POINTS: usize = 600;

fn m0() -> Vec3 {
    let i = 60f64.to_radians();
    Vec3::new(i.cos(), 0.0, i.sin())
}

fn parse<'a, T: Deserialize<'a>>(json: &'a str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn stride_for(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

#[derive(Deserialize)]
#[serde(default)]
pub struct ConvergenceParams {
    pub config: Preset,
    pub biased: bool,
    pub q: f64,
    pub v: f64,
    pub p0: f64,
    pub init_rot_deg: [f64; 3],
    pub init_bias: [f64; 3],
    pub duration: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            config: Preset::Two,
            biased: true,
            q: 0.05,
            v: 0.005,
            p0: 0.5,
            init_rot_deg: [45.0, 45.0, 45.0],
            init_bias: [0.5, 0.5, 0.5],
            duration: 60.0,
        }
    }
}

#[derive(Serialize)]
pub struct ConvergenceResult {
    pub t: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub bias_error: Vec<f64>,
    pub final_theta_deg: f64,
    pub final_bias_error: f64,
}

/// Observer run on the tumbling fixture; traces are decimated to at most 600 points.
pub fn convergence(params: &str) -> Result<String, String> {
    let p: ConvergenceParams = parse(params)?;
    if !(p.duration > 0.0 && p.duration <= 600.0) {
        return Err("duration must be in (0, 600] s".into());
    }
    let mut spec = preset_trajectory(PresetTrajectory::PeTumble);
    spec.duration = p.duration;
    let cfg = preset_config(p.config, &Rotation::identity(), &m0()).map_err(|e| e.to_string())?;
    let sim = generate(&spec, &cfg).map_err(|e| e.to_string())?;
    let [r, pi, y] = p.init_rot_deg.map(f64::to_radians);
    let r0 = from_euler_zyx(r, pi, y);
    let d0 = Vec3::from(p.init_bias);
    let m = p.config.len();
    let (estimator, init) = if p.biased {
        (
            Estimator::Riccati,
            ObserverState::biased(r0, d0, DMatrix::identity(6, 6) * p.p0, 0.0),
        )
    } else {
        (
            Estimator::RiccatiUnbiased,
            ObserverState::unbiased(r0, DMatrix::identity(3, 3) * p.p0, 0.0),
        )
    };
    let init = init.map_err(|e| e.to_string())?;
    let gains = Gains::scaled(m, p.q, p.v, p.biased).map_err(|e| e.to_string())?;
    let hist =
        run(estimator, init, &sim.inputs(), &sim.config, &gains).map_err(|e| e.to_string())?;

    let d_true = spec.d_true;
    let theta: Vec<f64> = hist
        .states
        .iter()
        .zip(sim.truth.rotations())
        .map(|(s, r)| angular_distance(&s.rhat, r).to_degrees())
        .collect();
    let bias: Vec<f64> = hist
        .states
        .iter()
        .map(|s| {
            if p.biased {
                (s.dhat - d_true).norm()
            } else {
                d_true.norm()
            }
        })
        .collect();
    let k = stride_for(theta.len());
    let pick = |v: &[f64]| v.iter().step_by(k).copied().collect::<Vec<_>>();
    to_json(&ConvergenceResult {
        t: pick(sim.times()),
        theta_deg: pick(&theta),
        bias_error: pick(&bias),
        final_theta_deg: *theta.last().unwrap_or(&f64::NAN),
        final_bias_error: *bias.last().unwrap_or(&f64::NAN),
    })
}

#[derive(Deserialize)]
#[serde(default)]
pub struct SweepParams {
    pub trajectory: PresetTrajectory,
    pub config: Preset,
    pub window: f64,
    pub stride: f64,
    pub mu: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            trajectory: PresetTrajectory::PeTumble,
            config: Preset::Two,
            window: 2.0,
            stride: 1.0,
            mu: 1e-4,
        }
    }
}

#[derive(Serialize)]
pub struct ConditionTrace {
    pub condition: String,
    pub lambda_min: Vec<Option<f64>>,
    pub passed: Vec<bool>,
}

#[derive(Serialize)]
pub struct SweepResult {
    pub t: Vec<f64>,
    pub mu: f64,
    pub conditions: Vec<ConditionTrace>,
}

/// Smallest Gramian eigenvalue of every condition over a sliding window.
pub fn sweep(params: &str) -> Result<String, String> {
    let p: SweepParams = parse(params)?;
    if p.stride.is_nan() || p.stride < 0.05 {
        return Err("stride must be at least 0.05 s".into());
    }
    let cfg = preset_config(p.config, &Rotation::identity(), &m0()).map_err(|e| e.to_string())?;
    let sim = generate(&preset_trajectory(p.trajectory), &cfg).map_err(|e| e.to_string())?;
    let windows = sweep_windows(&sim.truth, p.window, p.stride, DEFAULT_N_QUAD / 2 + 1)
        .map_err(|e| e.to_string())?;
    let thresholds = Thresholds {
        mu: p.mu,
        ..Thresholds::default()
    };
    let mut conditions: Vec<ConditionTrace> = Vec::new();
    for w in &windows {
        let a = analyze_window(&sim.truth, &cfg, w, &thresholds).map_err(|e| e.to_string())?;
        for c in a.conditions {
            let trace = match conditions
                .iter_mut()
                .position(|t| t.condition == c.condition)
            {
                Some(i) => &mut conditions[i],
                None => {
                    conditions.push(ConditionTrace {
                        condition: c.condition.clone(),
                        lambda_min: Vec::new(),
                        passed: Vec::new(),
                    });
                    conditions.last_mut().expect("just pushed")
                }
            };
            trace
                .lambda_min
                .push(c.lambda_min.is_finite().then_some(c.lambda_min));
            trace.passed.push(c.verdict.passed());
        }
    }
    to_json(&SweepResult {
        t: windows.iter().map(|w| w.t).collect(),
        mu: p.mu,
        conditions,
    })
}

#[derive(Deserialize)]
#[serde(default)]
pub struct ExcitationParams {
    /// Mean direction of the signal.
    pub center: [f64; 3],
    /// Amplitude of the wobble in the plane orthogonal to `center`.
    pub wobble: f64,
    pub frequency_hz: f64,
    pub window: f64,
    pub beta: f64,
}

impl Default for ExcitationParams {
    fn default() -> Self {
        ExcitationParams {
            center: [0.0, 0.0, 1.0],
            wobble: 0.5,
            frequency_hz: 0.5,
            window: 2.0,
            beta: 1e-3,
        }
    }
}

#[derive(Serialize)]
pub struct ExcitationResult {
    pub eigenvalues: [f64; 3],
    pub class: PeClass,
    pub beta: f64,
    /// Signal samples over the window, for plotting.
    pub t: Vec<f64>,
    pub alpha: Vec<[f64; 3]>,
}

/// Excitation class of `normalize(c + w (cos ωt e1' + sin ωt e2'))`.
pub fn excitation(params: &str) -> Result<String, String> {
    let p: ExcitationParams = parse(params)?;
    let c = Vec3::from(p.center);
    if c.norm() < 1e-9 {
        return Err("center must be non-zero".into());
    }
    let c = c.normalize();
    let helper = if c.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = c.cross(&helper).normalize();
    let e2 = c.cross(&e1);
    let n = 2001;
    let window = Window::new(0.0, p.window).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..n)
        .map(|k| p.window * k as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<Vec3> = times
        .iter()
        .map(|&t| {
            let ph = 2.0 * PI * p.frequency_hz * t;
            (c + (e1 * ph.cos() + e2 * ph.sin()) * p.wobble).normalize()
        })
        .collect();
    let series = VectorSeries::new(times.clone(), values.clone()).map_err(|e| e.to_string())?;
    let pe = pe_classify(&series, &window, p.beta).map_err(|e| e.to_string())?;
    let k = stride_for(n);
    to_json(&ExcitationResult {
        eigenvalues: pe.eigenvalues,
        class: pe.class,
        beta: pe.beta,
        t: times.iter().step_by(k).copied().collect(),
        alpha: values.iter().step_by(k).map(|v| [v.x, v.y, v.z]).collect(),
    })
}

#[wasm_bindgen]
pub fn run_convergence(params: &str) -> Result<String, JsValue> {
    convergence(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_sweep(params: &str) -> Result<String, JsValue> {
    sweep(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_excitation(params: &str) -> Result<String, JsValue> {
    excitation(params).map_err(|e| JsValue::from_str(&e))
}
