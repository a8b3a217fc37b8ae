//! Riccati observers on SO(3) (with and without bias estimation) and the complementary
//! filter baseline.
//!
//! The biased observer integrates
//!
//! ```text
//! R̂' = R̂ (Ω_y - d̂)^x + Δ_R^x R̂,    d̂' = -Δ_d,    Δ = -P C^T Q ỹ
//! P'  = A P + P A^T - P C^T Q C P + V
//! ```
//!
//! with `A = [[0, R̂], [0, 0]]` and `C = [C_i, 0]`, `C_i = a_i^T R̂^T b_i^x`. The attitude
//! update uses the split exponential `exp(dt Δ_R) R̂ exp(dt (Ω_y - d̂))`, which stays on
//! SO(3) exactly; `P` is propagated with one RK4 step per sample and re-symmetrized.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{build_c, output_error, MeasurementConfig};
use crate::so3::{angular_distance, euler_zyx, exp_so3, project_to_so3, Rotation, Vec3};

/// Initial Riccati matrix scale used in the experiments, `P(0) = 0.5 I`.
pub const DEFAULT_P0: f64 = 0.5;
/// Output weight, `Q = 0.05 I_m`.
pub const DEFAULT_Q: f64 = 0.05;
/// State weight, `V = 0.005 I`.
pub const DEFAULT_V: f64 = 0.005;
pub const DEFAULT_PROJECTION_INTERVAL: u64 = 1000;
/// Upper sanity bound on a single step.
pub const MAX_DT: f64 = 0.1;

const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric positive-definite weight, constant or a function of time.
#[derive(Clone)]
pub enum GainMatrix {
    Constant(DMatrix<f64>),
    TimeVarying(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
}

impl fmt::Debug for GainMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainMatrix::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            GainMatrix::TimeVarying(_) => f.write_str("TimeVarying(..)"),
        }
    }
}

impl GainMatrix {
    pub fn constant(m: DMatrix<f64>, what: &'static str) -> Result<Self> {
        check_spd(&m, what)?;
        Ok(GainMatrix::Constant(m))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        GainMatrix::Constant(DMatrix::identity(n, n) * s)
    }

    fn eval(&self, t: f64, what: &'static str) -> Result<DMatrix<f64>> {
        match self {
            GainMatrix::Constant(m) => Ok(m.clone()),
            GainMatrix::TimeVarying(f) => {
                let m = f(t);
                check_spd(&m, what)?;
                Ok(m)
            }
        }
    }
}

fn check_spd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if !m.is_square()
        || m.iter().any(|x| !x.is_finite())
        || (m - m.transpose()).amax() > SYMMETRY_TOL * m.amax().max(1.0)
        || m.clone().cholesky().is_none()
    {
        return Err(Error::NotSpd { what });
    }
    Ok(())
}

/// Riccati weights `Q` (m×m) and `V` (6×6 biased, 3×3 unbiased), plus the cadence of
/// SO(3) re-projection of the estimate.
#[derive(Clone, Debug)]
pub struct Gains {
    pub q: GainMatrix,
    pub v: GainMatrix,
    /// Re-project `R̂` every this many steps; 0 disables.
    pub projection_interval: u64,
}

impl Gains {
    pub fn new(q: GainMatrix, v: GainMatrix) -> Self {
        Gains {
            q,
            v,
            projection_interval: DEFAULT_PROJECTION_INTERVAL,
        }
    }

    /// `Q = q I_m`, `V = v I_n` with `n = 6` when `biased`, else 3.
    pub fn scaled(m: usize, q: f64, v: f64, biased: bool) -> Result<Self> {
        if !(q > 0.0 && v > 0.0) {
            return Err(Error::NotSpd { what: "gain" });
        }
        let n = if biased { 6 } else { 3 };
        Ok(Gains::new(
            GainMatrix::scaled_identity(m, q),
            GainMatrix::scaled_identity(n, v),
        ))
    }

    /// The experiment defaults `Q = 0.05 I_m`, `V = 0.005 I`.
    pub fn defaults(m: usize, biased: bool) -> Self {
        Gains::scaled(m, DEFAULT_Q, DEFAULT_V, biased).expect("positive defaults")
    }
}

/// Attitude estimate, bias estimate and Riccati matrix at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverState {
    pub rhat: Rotation,
    pub dhat: Vec3,
    /// 6×6 (biased), 3×3 (unbiased), or empty for the complementary filter.
    pub p: DMatrix<f64>,
    pub t: f64,
    pub steps: u64,
}

impl ObserverState {
    pub fn biased(rhat: Rotation, dhat: Vec3, p: DMatrix<f64>, t: f64) -> Result<Self> {
        if p.shape() != (6, 6) {
            return Err(Error::Dimension {
                expected: 6,
                got: p.nrows(),
            });
        }
        check_spd(&p, "P(0)")?;
        Ok(ObserverState {
            rhat,
            dhat,
            p,
            t,
            steps: 0,
        })
    }

    pub fn unbiased(rhat: Rotation, p: DMatrix<f64>, t: f64) -> Result<Self> {
        if p.shape() != (3, 3) {
            return Err(Error::Dimension {
                expected: 3,
                got: p.nrows(),
            });
        }
        check_spd(&p, "P(0)")?;
        Ok(ObserverState {
            rhat,
            dhat: Vec3::zeros(),
            p,
            t,
            steps: 0,
        })
    }

    /// State for the complementary filter, which carries no Riccati matrix.
    pub fn complementary(rhat: Rotation, dhat: Vec3, t: f64) -> Self {
        ObserverState {
            rhat,
            dhat,
            p: DMatrix::zeros(0, 0),
            t,
            steps: 0,
        }
    }
}

/// One gyro sample and one measurement vector, applied over `[t, t + dt]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInput {
    pub omega_y: Vec3,
    pub y_meas: DVector<f64>,
    pub dt: f64,
    pub t: f64,
}

impl StepInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::Invalid(format!(
                "dt = {} outside (0, {MAX_DT}]",
                self.dt
            )));
        }
        if !self.t.is_finite() || self.omega_y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gyro sample"));
        }
        if self.y_meas.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        Ok(())
    }
}

/// Correction `Δ = (Δ_R, Δ_d)`; `delta_d` is absent for the attitude-only observer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Innovation {
    pub delta_r: Vec3,
    pub delta_d: Option<Vec3>,
}

/// Result of one observer step.
#[derive(Clone, Debug)]
pub struct Step {
    pub state: ObserverState,
    pub innovation: Innovation,
    pub ytilde: DVector<f64>,
}

/// `A = [[0, R̂], [0, 0]]`.
pub fn build_a(rhat: &Rotation) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 6);
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(rhat.matrix());
    a
}

/// `Δ = -P C^T Q ỹ`, split into attitude and (when `P` is 6×6) bias parts.
pub fn innovation(
    p: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    ytilde: &DVector<f64>,
) -> Result<Innovation> {
    let n = p.nrows();
    let m = ytilde.len();
    if c.shape() != (m, n) || q.shape() != (m, m) || !p.is_square() || !(n == 3 || n == 6) {
        return Err(Error::Dimension {
            expected: n,
            got: c.ncols(),
        });
    }
    let delta = -(p * (c.transpose() * (q * ytilde)));
    Ok(Innovation {
        delta_r: Vec3::new(delta[0], delta[1], delta[2]),
        delta_d: (n == 6).then(|| Vec3::new(delta[3], delta[4], delta[5])),
    })
}

/// One RK4 step of `P' = A P + P A^T - P C^T Q C P + V`, symmetrized. `A`, `C`, `Q`, `V`
/// are held over the step. `t` only labels the error.
pub fn cre_step(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    v: &DMatrix<f64>,
    dt: f64,
    t: f64,
) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if a.shape() != (n, n) || v.shape() != (n, n) || c.ncols() != n || q.nrows() != c.nrows() {
        return Err(Error::Dimension {
            expected: n,
            got: a.nrows(),
        });
    }
    let s = c.transpose() * q * c;
    let f = |p: &DMatrix<f64>| {
        let ap = a * p;
        &ap + ap.transpose() - p * &s * p + v
    };
    let k1 = f(p);
    let k2 = f(&(p + &k1 * (dt / 2.0)));
    let k3 = f(&(p + &k2 * (dt / 2.0)));
    let k4 = f(&(p + &k3 * dt));
    let next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = (&next + next.transpose()) * 0.5;
    if next.iter().any(|x| !x.is_finite()) || next.clone().cholesky().is_none() {
        let min_eig = next
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NotPositiveDefinite { t: t + dt, min_eig });
    }
    Ok(next)
}

fn advance_rotation(
    rhat: &Rotation,
    left: &Vec3,
    right: &Vec3,
    steps: u64,
    interval: u64,
) -> Result<Rotation> {
    let next = exp_so3(left) * *rhat * exp_so3(right);
    if interval > 0 && steps.is_multiple_of(interval) {
        project_to_so3(next.matrix())
    } else {
        Ok(next)
    }
}

fn check_time(state: &ObserverState, input: &StepInput) -> Result<()> {
    input.validate()?;
    if state.rhat.matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("attitude estimate"));
    }
    Ok(())
}

/// One step of the biased observer.
pub fn riccati_step(
    state: &ObserverState,
    input: &StepInput,
    cfg: &MeasurementConfig,
    gains: &Gains,
) -> Result<Step> {
    check_time(state, input)?;
    if state.p.shape() != (6, 6) {
        return Err(Error::Dimension {
            expected: 6,
            got: state.p.nrows(),
        });
    }
    let t = input.t;
    let ytilde = output_error(&state.rhat, cfg, t, &input.y_meas)?;
    let c = build_c(&state.rhat, cfg, t, true)?;
    let q = gains.q.eval(t, "Q")?;
    let v = gains.v.eval(t, "V")?;
    let inn = innovation(&state.p, &c, &q, &ytilde)?;
    let delta_d = inn.delta_d.unwrap_or_default();

    let dt = input.dt;
    let steps = state.steps + 1;
    let rhat = advance_rotation(
        &state.rhat,
        &(inn.delta_r * dt),
        &((input.omega_y - state.dhat) * dt),
        steps,
        gains.projection_interval,
    )?;
    let p = cre_step(&state.p, &build_a(&state.rhat), &c, &q, &v, dt, t)?;
    Ok(Step {
        state: ObserverState {
            rhat,
            dhat: state.dhat - delta_d * dt,
            p,
            t: t + dt,
            steps,
        },
        innovation: inn,
        ytilde,
    })
}

/// One step of the attitude-only observer (`A = 0`, `P` 3×3, `d̂` frozen at zero).
pub fn riccati_step_unbiased(
    state: &ObserverState,
    input: &StepInput,
    cfg: &MeasurementConfig,
    gains: &Gains,
) -> Result<Step> {
    check_time(state, input)?;
    if state.p.shape() != (3, 3) {
        return Err(Error::Dimension {
            expected: 3,
            got: state.p.nrows(),
        });
    }
    let t = input.t;
    let ytilde = output_error(&state.rhat, cfg, t, &input.y_meas)?;
    let c = build_c(&state.rhat, cfg, t, false)?;
    let q = gains.q.eval(t, "Q")?;
    let v = gains.v.eval(t, "V")?;
    let inn = innovation(&state.p, &c, &q, &ytilde)?;

    let dt = input.dt;
    let steps = state.steps + 1;
    let rhat = advance_rotation(
        &state.rhat,
        &(inn.delta_r * dt),
        &(input.omega_y * dt),
        steps,
        gains.projection_interval,
    )?;
    let p = cre_step(&state.p, &DMatrix::zeros(3, 3), &c, &q, &v, dt, t)?;
    Ok(Step {
        state: ObserverState {
            rhat,
            dhat: Vec3::zeros(),
            p,
            t: t + dt,
            steps,
        },
        innovation: inn,
        ytilde,
    })
}

/// Gains of the passive complementary filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementaryGains {
    pub k_acc: f64,
    pub k_mag: f64,
    pub k_bias: f64,
}

impl Default for ComplementaryGains {
    fn default() -> Self {
        ComplementaryGains {
            k_acc: 2.0,
            k_mag: 2.0,
            k_bias: 0.5,
        }
    }
}

fn unit_measurement(v: Vec3, what: &'static str) -> Result<Vec3> {
    let n = v.norm();
    if !n.is_finite() || n < 1e-9 {
        return Err(Error::Invalid(format!("{what} measurement has zero norm")));
    }
    Ok(if (n - 1.0).abs() > 1e-3 { v / n } else { v })
}

/// One step of the passive complementary filter. `input.y_meas` holds the body-frame
/// gravity direction followed by the body-frame magnetic direction (6 values).
pub fn complementary_step(
    state: &ObserverState,
    input: &StepInput,
    gravity_dir: &Vec3,
    mag_dir: &Vec3,
    gains: &ComplementaryGains,
) -> Result<Step> {
    check_time(state, input)?;
    if input.y_meas.len() != 6 {
        return Err(Error::Dimension {
            expected: 6,
            got: input.y_meas.len(),
        });
    }
    let y = &input.y_meas;
    let v_a = unit_measurement(Vec3::new(y[0], y[1], y[2]), "accelerometer")?;
    let v_m = unit_measurement(Vec3::new(y[3], y[4], y[5]), "magnetometer")?;
    let rt = state.rhat.transpose();
    let (va_hat, vm_hat) = (rt.rotate(gravity_dir), rt.rotate(mag_dir));
    let sigma = v_a.cross(&va_hat) * gains.k_acc + v_m.cross(&vm_hat) * gains.k_mag;

    let dt = input.dt;
    let steps = state.steps + 1;
    let rhat = advance_rotation(
        &state.rhat,
        &Vec3::zeros(),
        &((input.omega_y - state.dhat + sigma) * dt),
        steps,
        DEFAULT_PROJECTION_INTERVAL,
    )?;
    let mut ytilde = DVector::zeros(6);
    ytilde.rows_mut(0, 3).copy_from(&(va_hat - v_a));
    ytilde.rows_mut(3, 3).copy_from(&(vm_hat - v_m));
    Ok(Step {
        state: ObserverState {
            rhat,
            dhat: state.dhat - sigma * (gains.k_bias * dt),
            p: DMatrix::zeros(0, 0),
            t: input.t + dt,
            steps,
        },
        innovation: Innovation {
            delta_r: sigma,
            delta_d: Some(sigma * gains.k_bias),
        },
        ytilde,
    })
}

/// Which estimator [`run`] drives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Riccati,
    RiccatiUnbiased,
    Complementary(ComplementaryGains),
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Riccati => "riccati",
            Estimator::RiccatiUnbiased => "riccati-unbiased",
            Estimator::Complementary(_) => "complementary",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riccati" => Ok(Estimator::Riccati),
            "riccati-unbiased" => Ok(Estimator::RiccatiUnbiased),
            "complementary" => Ok(Estimator::Complementary(ComplementaryGains::default())),
            _ => Err(Error::UnknownName {
                kind: "observer",
                name: s.into(),
            }),
        }
    }
}

/// Full replay record: `states[0]` is the initial state, `states[k + 1]` follows step `k`.
#[derive(Clone, Debug)]
pub struct RunHistory {
    pub estimator: Estimator,
    pub states: Vec<ObserverState>,
    pub innovations: Vec<Innovation>,
    pub ytilde: Vec<DVector<f64>>,
}

impl RunHistory {
    pub fn last(&self) -> &ObserverState {
        self.states.last().expect("history holds the initial state")
    }
}

/// Builds the body-frame vector input of the complementary filter from a six-channel
/// scalar stream (accelerometer rows then magnetometer rows).
fn complementary_input(
    cfg: &MeasurementConfig,
    input: &StepInput,
) -> Result<(StepInput, Vec3, Vec3)> {
    if cfg.len() != 6 || input.y_meas.len() != 6 {
        return Err(Error::Dimension {
            expected: 6,
            got: cfg.len(),
        });
    }
    let ch = cfg.channels();
    let mut v = DVector::zeros(6);
    for (i, c) in ch.iter().enumerate() {
        let off = if i < 3 { 0 } else { 3 };
        let part = c.a * input.y_meas[i];
        for k in 0..3 {
            v[off + k] += part[k];
        }
    }
    let g = ch[0].b.at(input.t)?;
    let m = ch[3].b.at(input.t)?;
    Ok((
        StepInput {
            y_meas: v,
            ..input.clone()
        },
        g,
        m,
    ))
}

/// Replays `inputs` through the chosen estimator. For the complementary filter, `cfg`
/// must be the six-channel configuration, whose rows are recombined into vectors.
pub fn run(
    estimator: Estimator,
    initial: ObserverState,
    inputs: &[StepInput],
    cfg: &MeasurementConfig,
    gains: &Gains,
) -> Result<RunHistory> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut innovations = Vec::with_capacity(inputs.len());
    let mut ytilde = Vec::with_capacity(inputs.len());
    states.push(initial);
    let mut prev_t = f64::NEG_INFINITY;
    for (index, input) in inputs.iter().enumerate() {
        let wrap = |e: Error| Error::Step {
            index,
            source: Box::new(e),
        };
        if input.t <= prev_t {
            return Err(wrap(Error::Invalid("timestamps are not increasing".into())));
        }
        prev_t = input.t;
        let state = states.last().expect("non-empty");
        let step = match estimator {
            Estimator::Riccati => riccati_step(state, input, cfg, gains),
            Estimator::RiccatiUnbiased => riccati_step_unbiased(state, input, cfg, gains),
            Estimator::Complementary(k) => complementary_input(cfg, input)
                .and_then(|(inp, g, m)| complementary_step(state, &inp, &g, &m, &k)),
        }
        .map_err(wrap)?;
        states.push(step.state);
        innovations.push(step.innovation);
        ytilde.push(step.ytilde);
    }
    Ok(RunHistory {
        estimator,
        states,
        innovations,
        ytilde,
    })
}

/// Writes the state history as CSV:
/// `t, q0..q3, roll, pitch, yaw (deg), dhat_x..z, [theta_err_deg], p_trace, ytilde_1..m`.
///
/// Row `k` is the state before step `k` together with that step's output error; the final
/// state has no step and its `ytilde` cells are `NaN`. `truth` supplies the reference
/// attitude at a given time for the `theta_err_deg` column.
pub fn write_history_csv<W: Write>(
    out: W,
    history: &RunHistory,
    truth: Option<&dyn Fn(f64) -> Option<Rotation>>,
) -> Result<()> {
    let m = history.ytilde.first().map_or(0, |y| y.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "t",
        "q0",
        "q1",
        "q2",
        "q3",
        "roll_deg",
        "pitch_deg",
        "yaw_deg",
        "dhat_x",
        "dhat_y",
        "dhat_z",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if truth.is_some() {
        header.push("theta_err_deg".into());
    }
    header.push("p_trace".into());
    header.extend((1..=m).map(|i| format!("ytilde_{i}")));
    w.write_record(&header)?;

    for (k, s) in history.states.iter().enumerate() {
        let q = s.rhat.to_quaternion();
        let eu = euler_zyx(&s.rhat);
        let mut row = vec![
            s.t,
            q.q0,
            q.q.x,
            q.q.y,
            q.q.z,
            eu.roll.to_degrees(),
            eu.pitch.to_degrees(),
            eu.yaw.to_degrees(),
            s.dhat.x,
            s.dhat.y,
            s.dhat.z,
        ];
        if let Some(lookup) = truth {
            row.push(lookup(s.t).map_or(f64::NAN, |r| angular_distance(&s.rhat, &r).to_degrees()));
        }
        row.push(s.p.trace());
        match history.ytilde.get(k) {
            Some(y) => row.extend(y.iter()),
            None => row.extend(std::iter::repeat_n(f64::NAN, m)),
        }
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a state-history CSV, as needed for evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatedPose {
    pub t: f64,
    pub rotation: Rotation,
    pub dhat: Vec3,
}

/// Reads `t`, the quaternion and `dhat` columns back from a state-history CSV.
pub fn read_history_csv<R: Read>(input: R) -> Result<Vec<EstimatedPose>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("state history lacks column `{name}`")))
    };
    let idx = [
        col("t")?,
        col("q0")?,
        col("q1")?,
        col("q2")?,
        col("q3")?,
        col("dhat_x")?,
        col("dhat_y")?,
        col("dhat_z")?,
    ];
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; 8];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            *slot = rec
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Row {
                    row,
                    msg: format!("bad value in column {i}"),
                })?;
        }
        let q = crate::so3::UnitQuaternion::new_normalize(v[1], v[2], v[3], v[4])?;
        out.push(EstimatedPose {
            t: v[0],
            rotation: Rotation::from_quaternion(&q),
            dhat: Vec3::new(v[5], v[6], v[7]),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{predict_outputs, preset_config, Preset};
    use crate::so3::from_euler_zyx;

    fn m0() -> Vec3 {
        Vec3::new(0.5, 0.0, 3f64.sqrt() / 2.0)
    }

    fn two() -> MeasurementConfig {
        preset_config(Preset::Two, &Rotation::identity(), &m0()).unwrap()
    }

    fn initial_biased() -> ObserverState {
        ObserverState::biased(
            Rotation::identity(),
            Vec3::zeros(),
            DMatrix::identity(6, 6) * DEFAULT_P0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn build_a_structure() {
        let a = build_a(&Rotation::identity());
        let mut expected = DMatrix::zeros(6, 6);
        expected
            .view_mut((0, 3), (3, 3))
            .copy_from(&DMatrix::identity(3, 3));
        assert_eq!(a, expected);
        let a = build_a(&exp_so3(&Vec3::new(0.3, -0.7, 1.1)));
        assert_eq!(a.rank(1e-12), 3);
        assert!((&a * &a).amax() < 1e-15);
    }

    #[test]
    fn innovation_examples() {
        let p = DMatrix::identity(6, 6);
        let q = DMatrix::identity(3, 3);
        let mut c = DMatrix::zeros(3, 6);
        c.view_mut((0, 0), (3, 3)).fill_with_identity();
        let zero = innovation(&p, &c, &q, &DVector::zeros(3)).unwrap();
        assert_eq!(zero.delta_r, Vec3::zeros());
        assert_eq!(zero.delta_d, Some(Vec3::zeros()));

        let y = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let inn = innovation(&p, &c, &q, &y).unwrap();
        assert_eq!(inn.delta_r, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(inn.delta_d, Some(Vec3::zeros()));

        let scaled = innovation(&p, &c, &(&q * 3.0), &y).unwrap();
        assert_eq!(scaled.delta_r, inn.delta_r * 3.0);

        let y = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let a = innovation(&p, &c, &q, &y).unwrap();
        let b = innovation(&p, &c, &q, &(&y * -2.5)).unwrap();
        assert!((b.delta_r - a.delta_r * -2.5).norm() < 1e-15);

        assert!(innovation(&p, &c, &q, &DVector::zeros(2)).is_err());
        let unb = innovation(&DMatrix::identity(3, 3), &DMatrix::identity(3, 3), &q, &y).unwrap();
        assert_eq!(unb.delta_d, None);
    }

    #[test]
    fn cre_stationary_without_dynamics() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let z = DMatrix::zeros(2, 2);
        let next = cre_step(
            &p,
            &z,
            &DMatrix::zeros(1, 2),
            &DMatrix::identity(1, 1),
            &z,
            0.01,
            0.0,
        )
        .unwrap();
        assert_eq!(next, p);
    }

    #[test]
    fn cre_scalar_fixed_point() {
        // p' = -q p^2 + v has the attracting root sqrt(v/q)
        let (q, v) = (0.05, 0.005);
        let mut p = DMatrix::from_element(1, 1, 0.5);
        let one = DMatrix::identity(1, 1);
        let z = DMatrix::zeros(1, 1);
        for k in 0..20_000 {
            p = cre_step(
                &p,
                &z,
                &one,
                &(&one * q),
                &(&one * v),
                0.05,
                k as f64 * 0.05,
            )
            .unwrap();
        }
        assert!((p[(0, 0)] - 0.1f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn cre_grows_without_measurements() {
        let rhat = exp_so3(&Vec3::new(0.2, 0.1, -0.4));
        let p = DMatrix::identity(6, 6) * 0.5;
        let a = build_a(&rhat);
        let v = DMatrix::identity(6, 6) * 0.005;
        let next = cre_step(
            &p,
            &a,
            &DMatrix::zeros(1, 6),
            &DMatrix::identity(1, 1),
            &v,
            0.01,
            0.0,
        )
        .unwrap();
        assert!(next.trace() > p.trace());
        // trace derivative = tr(V) + 2 tr(A P)
        let h = 1e-6;
        let next = cre_step(
            &p,
            &a,
            &DMatrix::zeros(1, 6),
            &DMatrix::identity(1, 1),
            &v,
            h,
            0.0,
        )
        .unwrap();
        let rate = (next.trace() - p.trace()) / h;
        let expected = v.trace() + 2.0 * (&a * &p).trace();
        assert!((rate - expected).abs() < 1e-5);
    }

    #[test]
    fn cre_reports_loss_of_definiteness() {
        let p = DMatrix::identity(1, 1) * 1e-3;
        let z = DMatrix::zeros(1, 1);
        let v = DMatrix::identity(1, 1) * -1.0;
        let err = cre_step(
            &p,
            &z,
            &DMatrix::zeros(1, 1),
            &DMatrix::identity(1, 1),
            &v,
            0.01,
            2.0,
        )
        .unwrap_err();
        match err {
            Error::NotPositiveDefinite { t, min_eig } => {
                assert!((t - 2.01).abs() < 1e-12);
                assert!(min_eig <= 0.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn stationary_estimate_stays_put() {
        let cfg = two();
        let rhat = exp_so3(&Vec3::new(0.4, 0.2, -0.3));
        let dhat = Vec3::new(0.01, 0.02, -0.03);
        let mut s = initial_biased();
        s.rhat = rhat;
        s.dhat = dhat;
        let input = StepInput {
            omega_y: dhat,
            y_meas: predict_outputs(&rhat, &cfg, 0.0).unwrap(),
            dt: 0.01,
            t: 0.0,
        };
        let next = riccati_step(&s, &input, &cfg, &Gains::defaults(2, true)).unwrap();
        assert!((next.state.rhat.matrix() - rhat.matrix()).norm() < 1e-15);
        assert_eq!(next.state.dhat, dhat);
        assert!((next.state.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn pure_prediction() {
        let cfg = two();
        let omega = Vec3::new(0.3, -0.2, 0.5);
        let dt = 0.01;
        // measurements consistent with the estimate give zero innovation
        let s = initial_biased();
        let input = StepInput {
            omega_y: omega,
            y_meas: predict_outputs(&s.rhat, &cfg, 0.0).unwrap(),
            dt,
            t: 0.0,
        };
        let next = riccati_step(&s, &input, &cfg, &Gains::defaults(2, true)).unwrap();
        let expected = exp_so3(&(omega * dt));
        assert!((next.state.rhat.matrix() - expected.matrix()).norm() < 1e-15);

        let s = ObserverState::unbiased(Rotation::identity(), DMatrix::identity(3, 3) * 0.5, 0.0)
            .unwrap();
        let next = riccati_step_unbiased(&s, &input, &cfg, &Gains::defaults(2, false)).unwrap();
        assert!((next.state.rhat.matrix() - expected.matrix()).norm() < 1e-15);
        assert_eq!(next.innovation.delta_d, None);
    }

    #[test]
    fn default_initialization_is_accepted() {
        let cfg = two();
        let s = initial_biased();
        let input = StepInput {
            omega_y: Vec3::new(0.1, 0.0, 0.0),
            y_meas: DVector::from_vec(vec![0.1, 0.2]),
            dt: 1.0 / 286.0,
            t: 0.0,
        };
        let step = riccati_step(&s, &input, &cfg, &Gains::defaults(2, true)).unwrap();
        assert!(step.state.p.clone().cholesky().is_some());
    }

    #[test]
    fn step_input_bounds() {
        let mut input = StepInput {
            omega_y: Vec3::zeros(),
            y_meas: DVector::zeros(2),
            dt: 0.2,
            t: 0.0,
        };
        assert!(input.validate().is_err());
        input.dt = 0.01;
        input.y_meas[0] = f64::NAN;
        assert!(matches!(input.validate(), Err(Error::NonFinite(_))));
    }

    #[test]
    fn time_varying_gain_is_checked() {
        let bad = GainMatrix::TimeVarying(Arc::new(|t| DMatrix::identity(2, 2) * (1.0 - t)));
        assert!(bad.eval(0.5, "Q").is_ok());
        assert!(matches!(
            bad.eval(2.0, "Q"),
            Err(Error::NotSpd { what: "Q" })
        ));
    }

    #[test]
    fn complementary_examples() {
        let g = Vec3::z();
        let m = m0();
        let r = from_euler_zyx(0.2, -0.1, 0.7);
        let d = Vec3::new(0.01, -0.02, 0.005);
        let omega = Vec3::new(0.1, 0.2, -0.1);
        let rt = r.transpose();
        let mut y = DVector::zeros(6);
        y.rows_mut(0, 3).copy_from(&rt.rotate(&g));
        y.rows_mut(3, 3).copy_from(&rt.rotate(&m));
        let s = ObserverState::complementary(r, d, 0.0);
        let input = StepInput {
            omega_y: omega + d,
            y_meas: y.clone(),
            dt: 0.01,
            t: 0.0,
        };
        let k = ComplementaryGains::default();
        assert_eq!((k.k_acc, k.k_mag, k.k_bias), (2.0, 2.0, 0.5));
        let step = complementary_step(&s, &input, &g, &m, &k).unwrap();
        assert!(step.innovation.delta_r.norm() < 1e-15);
        let expected = r * exp_so3(&(omega * 0.01));
        assert!((step.state.rhat.matrix() - expected.matrix()).norm() < 1e-14);

        // gravity consistent, heading wrong: the correction comes from the magnetometer only
        let rhat = r * exp_so3(&(rt.rotate(&g) * 0.2));
        let s = ObserverState::complementary(rhat, d, 0.0);
        let step = complementary_step(&s, &input, &g, &m, &k).unwrap();
        let v_m = rt.rotate(&m);
        let mag_only = v_m.cross(&rhat.transpose().rotate(&m)) * k.k_mag;
        assert!((step.innovation.delta_r - mag_only).norm() < 1e-14);
        assert!(step.innovation.delta_r.norm() > 1e-3);

        let mut zero = input.clone();
        zero.y_meas.rows_mut(0, 3).fill(0.0);
        assert!(complementary_step(&s, &zero, &g, &m, &k).is_err());
    }

    #[test]
    fn run_examples() {
        let cfg = two();
        let gains = Gains::defaults(2, true);
        let h = run(Estimator::Riccati, initial_biased(), &[], &cfg, &gains).unwrap();
        assert_eq!(h.states.len(), 1);
        assert!(h.innovations.is_empty());

        let inputs: Vec<_> = (0..50)
            .map(|k| StepInput {
                omega_y: Vec3::new(0.3, 0.1, -0.2),
                y_meas: DVector::from_vec(vec![0.05, 0.4]),
                dt: 0.01,
                t: k as f64 * 0.01,
            })
            .collect();
        let a = run(Estimator::Riccati, initial_biased(), &inputs, &cfg, &gains).unwrap();
        let b = run(Estimator::Riccati, initial_biased(), &inputs, &cfg, &gains).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.ytilde, b.ytilde);

        let mut bad = inputs.clone();
        bad[7].t = bad[6].t;
        match run(Estimator::Riccati, initial_biased(), &bad, &cfg, &gains) {
            Err(Error::Step { index, .. }) => assert_eq!(index, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn history_csv_round_trip() {
        let cfg = two();
        let inputs: Vec<_> = (0..5)
            .map(|k| StepInput {
                omega_y: Vec3::new(0.3, 0.1, -0.2),
                y_meas: DVector::from_vec(vec![0.05, 0.4]),
                dt: 0.01,
                t: k as f64 * 0.01,
            })
            .collect();
        let h = run(
            Estimator::Riccati,
            initial_biased(),
            &inputs,
            &cfg,
            &Gains::defaults(2, true),
        )
        .unwrap();
        let mut buf = Vec::new();
        let truth = |_t: f64| Some(Rotation::identity());
        write_history_csv(&mut buf, &h, Some(&truth)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "t,q0,q1,q2,q3,roll_deg,pitch_deg,yaw_deg,dhat_x,dhat_y,dhat_z,theta_err_deg,p_trace,ytilde_1,ytilde_2"
        );
        assert_eq!(text.lines().count(), 7);
        let poses = read_history_csv(buf.as_slice()).unwrap();
        assert_eq!(poses.len(), 6);
        for (p, s) in poses.iter().zip(&h.states) {
            assert!(angular_distance(&p.rotation, &s.rhat) < 1e-7);
            assert_eq!(p.dhat, s.dhat);
        }
    }
}
