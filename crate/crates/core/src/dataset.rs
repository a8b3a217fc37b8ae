//! Recorded IMU sequences: CSV ingestion, reference directions, scalar streams and RMSE.
//!
//! The CSV schema has the header
//! `t_s,gx,gy,gz,ax,ay,az,mx,my,mz,qw,qx,qy,qz` with time in seconds, gyro in rad/s,
//! specific force in m/s², magnetometer in arbitrary units and a body-to-NED unit
//! quaternion. A static accelerometer reads roughly `-g R^T e3`, so the body-frame
//! gravity direction is `normalize(-acc)`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{preset_config, MeasurementConfig, Preset};
use crate::observer::{EstimatedPose, StepInput};
use crate::sim::{ClippedNormal, SyntheticRun};
use crate::so3::{angular_distance, euler_zyx, Rotation, UnitQuaternion, Vec3};

pub const HEADER: [&str; 14] = [
    "t_s", "gx", "gy", "gz", "ax", "ay", "az", "mx", "my", "mz", "qw", "qx", "qy", "qz",
];
pub const NOMINAL_RATE_HZ: f64 = 286.0;
pub const STANDARD_GRAVITY: f64 = 9.80665;
pub const DEFAULT_M0_SAMPLES: usize = 100;

const QUATERNION_NORM_TOL: f64 = 1e-2;
const ZERO_NORM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuRecord {
    pub t: f64,
    pub gyro: Vec3,
    pub acc: Vec3,
    pub mag: Vec3,
    /// Body-to-inertial ground truth.
    pub q_gt: UnitQuaternion,
}

impl ImuRecord {
    pub fn rotation(&self) -> Rotation {
        Rotation::from_quaternion(&self.q_gt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub rate_hz: f64,
    /// Sensor-to-body alignment.
    pub r_imu: Rotation,
    /// Inertial magnetic field direction, unit norm.
    pub m0: Vec3,
    /// Inertial gravity direction, always `e3`.
    pub g0: Vec3,
}

impl SequenceMeta {
    pub fn new(rate_hz: f64, r_imu: Rotation, m0: Vec3) -> Result<Self> {
        if (m0.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!(
                "m0 must be a unit vector, |m0| = {}",
                m0.norm()
            )));
        }
        if rate_hz.is_nan() || rate_hz <= 0.0 {
            return Err(Error::Invalid(format!("rate must be > 0, got {rate_hz}")));
        }
        Ok(SequenceMeta {
            rate_hz,
            r_imu,
            m0,
            g0: Vec3::z(),
        })
    }

    pub fn config(&self, preset: Preset) -> Result<MeasurementConfig> {
        preset_config(preset, &self.r_imu, &self.m0)
    }
}

/// Records loaded from one CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub records: Vec<ImuRecord>,
    /// Rate estimated from the median sample spacing.
    pub rate_hz: f64,
    /// Indices `k` where `t[k+1] - t[k]` exceeds three nominal periods.
    pub gaps: Vec<usize>,
}

pub fn load_csv(path: &Path) -> Result<Sequence> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<Sequence> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != HEADER.len() || headers.iter().zip(HEADER).any(|(a, b)| a != b) {
        return Err(Error::Invalid(format!(
            "expected header `{}`, found `{}`",
            HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records: Vec<ImuRecord> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != HEADER.len() {
            return Err(Error::Row {
                row,
                msg: format!("expected {} fields, found {}", HEADER.len(), rec.len()),
            });
        }
        let mut v = [0.0; 14];
        for (j, (slot, field)) in v.iter_mut().zip(rec.iter()).enumerate() {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Row {
                    row,
                    msg: format!("column `{}`: `{field}` is not a finite number", HEADER[j]),
                })?;
        }
        let qn = (v[10] * v[10] + v[11] * v[11] + v[12] * v[12] + v[13] * v[13]).sqrt();
        if (qn - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(Error::Row {
                row,
                msg: format!("ground-truth quaternion norm {qn} is not close to 1"),
            });
        }
        if let Some(prev) = records.last() {
            if v[0] <= prev.t {
                return Err(Error::Row {
                    row,
                    msg: format!("time {} does not increase past {}", v[0], prev.t),
                });
            }
        }
        records.push(ImuRecord {
            t: v[0],
            gyro: Vec3::new(v[1], v[2], v[3]),
            acc: Vec3::new(v[4], v[5], v[6]),
            mag: Vec3::new(v[7], v[8], v[9]),
            q_gt: if (qn - 1.0).abs() < 1e-12 {
                UnitQuaternion {
                    q0: v[10],
                    q: Vec3::new(v[11], v[12], v[13]),
                }
            } else {
                UnitQuaternion::new_normalize(v[10], v[11], v[12], v[13])?
            },
        });
    }
    if records.is_empty() {
        return Err(Error::Invalid("sequence has no records".into()));
    }
    let rate_hz = estimate_rate(&records);
    let gaps = records
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].t - w[0].t > 3.0 / rate_hz)
        .map(|(k, _)| k)
        .collect();
    Ok(Sequence {
        records,
        rate_hz,
        gaps,
    })
}

fn median_step(times: impl Iterator<Item = f64>) -> Option<f64> {
    let t: Vec<f64> = times.collect();
    let mut dt: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if dt.is_empty() {
        return None;
    }
    dt.sort_by(f64::total_cmp);
    Some(dt[dt.len() / 2])
}

fn estimate_rate(records: &[ImuRecord]) -> f64 {
    median_step(records.iter().map(|r| r.t)).map_or(NOMINAL_RATE_HZ, |dt| 1.0 / dt)
}

pub fn write_csv<W: Write>(output: W, records: &[ImuRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(HEADER)?;
    for r in records {
        let q = &r.q_gt;
        let row = [
            r.t, r.gyro.x, r.gyro.y, r.gyro.z, r.acc.x, r.acc.y, r.acc.z, r.mag.x, r.mag.y,
            r.mag.z, q.q0, q.q.x, q.q.y, q.q.z,
        ];
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, records: &[ImuRecord]) -> Result<()> {
    write_csv(File::create(path)?, records)
}

/// Sensor records of a synthetic run: `acc = -g R_imu^T R^T e3`, `mag = R_imu^T R^T m0`.
///
/// When the run carries noise, each sensor direction gets clipped Gaussian noise of the
/// run's measurement sigma (scaled by `g` for the accelerometer).
pub fn records_from_run(run: &SyntheticRun, r_imu: &Rotation, m0: &Vec3) -> Vec<ImuRecord> {
    let mut noise = run.spec.noise.map(|n| {
        (
            ClippedNormal::new(n.seed.wrapping_add(0x5851_f42d_4c95_7f2d)),
            n.meas_sigma,
        )
    });
    run.truth
        .times()
        .iter()
        .zip(run.truth.rotations())
        .zip(&run.omega_y)
        .map(|((&t, r), gyro)| {
            let to_sensor = r_imu.transpose() * r.transpose();
            let mut acc = -to_sensor.rotate(&Vec3::z()) * STANDARD_GRAVITY;
            let mut mag = to_sensor.rotate(m0);
            if let Some((gen, sigma)) = noise.as_mut() {
                acc += gen.vec3(*sigma) * STANDARD_GRAVITY;
                mag += gen.vec3(*sigma);
            }
            ImuRecord {
                t,
                gyro: *gyro,
                acc,
                mag,
                q_gt: r.to_quaternion(),
            }
        })
        .collect()
}

/// Inertial magnetic direction `normalize(mean_k R_gt R_imu normalize(mag_k))` over the
/// first `k` records.
pub fn derive_m0(records: &[ImuRecord], k: usize, r_imu: &Rotation) -> Result<Vec3> {
    if k < 10 {
        return Err(Error::Invalid(format!(
            "m0 derivation needs K >= 10 samples, got {k}"
        )));
    }
    if records.len() < k {
        return Err(Error::Invalid(format!(
            "m0 derivation needs {k} records, sequence has {}",
            records.len()
        )));
    }
    let mut sum = Vec3::zeros();
    for r in &records[..k] {
        let n = r.mag.norm();
        if n < ZERO_NORM {
            continue;
        }
        sum += r.rotation().rotate(&r_imu.rotate(&(r.mag / n)));
    }
    let mean = sum / k as f64;
    if mean.norm() < 1e-3 {
        return Err(Error::Invalid(format!(
            "magnetometer directions are inconsistent (mean norm {:e})",
            mean.norm()
        )));
    }
    Ok(mean.normalize())
}

/// Observer inputs built from sensor records.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarStream {
    pub config: MeasurementConfig,
    pub inputs: Vec<StepInput>,
    /// Record indices whose accelerometer or magnetometer sample had zero norm and was
    /// replaced by the previous one.
    pub carried: Vec<usize>,
}

/// Gyro plus selected components of `normalize(-acc)` and `normalize(mag)`, accelerometer
/// rows first. Each record becomes one step lasting until the next timestamp, so the
/// last record only closes the final interval.
pub fn to_scalar_stream(
    records: &[ImuRecord],
    meta: &SequenceMeta,
    preset: Preset,
) -> Result<ScalarStream> {
    let config = meta.config(preset)?;
    let mut inputs = Vec::with_capacity(records.len().saturating_sub(1));
    let mut carried = Vec::new();
    let mut last_dirs: Option<(Vec3, Vec3)> = None;
    for (k, pair) in records.windows(2).enumerate() {
        let r = &pair[0];
        let (na, nm) = (r.acc.norm(), r.mag.norm());
        let dirs = if na > ZERO_NORM && nm > ZERO_NORM {
            (-r.acc / na, r.mag / nm)
        } else {
            carried.push(k);
            let prev = last_dirs.ok_or_else(|| Error::Row {
                row: k + 1,
                msg: "zero-norm accelerometer or magnetometer sample with nothing to carry".into(),
            })?;
            (
                if na > ZERO_NORM { -r.acc / na } else { prev.0 },
                if nm > ZERO_NORM { r.mag / nm } else { prev.1 },
            )
        };
        last_dirs = Some(dirs);
        let y: Vec<f64> = preset
            .acc_axes()
            .iter()
            .map(|&i| dirs.0[i])
            .chain(preset.mag_axes().iter().map(|&i| dirs.1[i]))
            .collect();
        inputs.push(StepInput {
            omega_y: r.gyro,
            y_meas: DVector::from_vec(y),
            dt: pair[1].t - r.t,
            t: r.t,
        });
    }
    Ok(ScalarStream {
        config,
        inputs,
        carried,
    })
}

/// Ground-truth attitudes of a record sequence.
pub fn reference_poses(records: &[ImuRecord]) -> Vec<(f64, Rotation)> {
    records.iter().map(|r| (r.t, r.rotation())).collect()
}

/// Per-sample attitude errors of an estimate against ground truth.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub theta_deg: Vec<f64>,
    pub roll_deg: Vec<f64>,
    pub pitch_deg: Vec<f64>,
    pub yaw_deg: Vec<f64>,
    pub dhat: Vec<Vec3>,
    /// `dhat - d` when the true bias is known.
    pub dtilde: Option<Vec<Vec3>>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(output);
        let mut header = vec![
            "t",
            "theta_deg",
            "roll_err_deg",
            "pitch_err_deg",
            "yaw_err_deg",
            "dhat_x",
            "dhat_y",
            "dhat_z",
        ];
        if self.dtilde.is_some() {
            header.extend(["dtilde_x", "dtilde_y", "dtilde_z"]);
        }
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![
                self.t[k],
                self.theta_deg[k],
                self.roll_deg[k],
                self.pitch_deg[k],
                self.yaw_deg[k],
            ];
            row.extend(self.dhat[k].iter());
            if let Some(dt) = &self.dtilde {
                row.extend(dt[k].iter());
            }
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Root-mean-square errors in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseSummary {
    pub theta: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub series: ErrorSeries,
    pub rmse: RmseSummary,
}

/// Wraps degrees into `(-180, 180]`.
pub fn wrap_deg(x: f64) -> f64 {
    let w = (x + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

fn nearest(times: &[f64], t: f64) -> usize {
    let k = times.partition_point(|&x| x < t);
    if k == 0 {
        0
    } else if k == times.len() || (t - times[k - 1]) <= (times[k] - t) {
        k - 1
    } else {
        k
    }
}

/// Index pairs `(i, j)` such that `a[i]` and `b[j]` are each other's nearest neighbour and
/// lie within `tol` of each other.
fn mutual_pairs(a: &[f64], b: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &t) in a.iter().enumerate() {
        let j = nearest(b, t);
        if nearest(a, b[j]) == i && (b[j] - t).abs() <= tol {
            out.push((i, j));
        }
    }
    out
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Aligns estimates to ground truth by mutual nearest neighbour within half a sample
/// period and computes θ and wrapped roll/pitch/yaw errors.
pub fn evaluate(
    estimates: &[EstimatedPose],
    truth: &[(f64, Rotation)],
    d_true: Option<Vec3>,
) -> Result<Evaluation> {
    if estimates.is_empty() || truth.is_empty() {
        return Err(Error::NoOverlap);
    }
    let te: Vec<f64> = estimates.iter().map(|e| e.t).collect();
    let tt: Vec<f64> = truth.iter().map(|p| p.0).collect();
    let period = match (
        median_step(te.iter().copied()),
        median_step(tt.iter().copied()),
    ) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.0,
    };
    let pairs = mutual_pairs(&te, &tt, 0.5 * period + 1e-12);
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut s = ErrorSeries {
        dtilde: d_true.map(|_| Vec::with_capacity(pairs.len())),
        ..Default::default()
    };
    for (i, j) in pairs {
        let (e, r) = (&estimates[i], &truth[j].1);
        let (ee, et) = (euler_zyx(&e.rotation), euler_zyx(r));
        s.t.push(e.t);
        s.theta_deg
            .push(angular_distance(&e.rotation, r).to_degrees());
        s.roll_deg.push(wrap_deg((ee.roll - et.roll).to_degrees()));
        s.pitch_deg
            .push(wrap_deg((ee.pitch - et.pitch).to_degrees()));
        s.yaw_deg.push(wrap_deg((ee.yaw - et.yaw).to_degrees()));
        s.dhat.push(e.dhat);
        if let (Some(v), Some(d)) = (s.dtilde.as_mut(), d_true) {
            v.push(e.dhat - d);
        }
    }
    let rmse = RmseSummary {
        theta: rms(&s.theta_deg),
        roll: rms(&s.roll_deg),
        pitch: rms(&s.pitch_deg),
        yaw: rms(&s.yaw_deg),
        samples: s.len(),
    };
    Ok(Evaluation { series: s, rmse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::predict_outputs;
    use crate::sim::{generate, preset_trajectory, NoiseSpec, PresetTrajectory};
    use crate::so3::{exp_so3, from_euler_zyx};

    fn m0() -> Vec3 {
        Vec3::new(0.4, 0.1, 0.9).normalize()
    }

    fn synthetic(duration: f64, noise: Option<NoiseSpec>) -> (SyntheticRun, Vec<ImuRecord>) {
        let mut spec = preset_trajectory(PresetTrajectory::PeTumble);
        spec.duration = duration;
        spec.noise = noise;
        let cfg = preset_config(Preset::Six, &Rotation::identity(), &m0()).unwrap();
        let run = generate(&spec, &cfg).unwrap();
        let recs = records_from_run(&run, &Rotation::identity(), &m0());
        (run, recs)
    }

    #[test]
    fn reads_handcrafted_file() {
        let text = "t_s,gx,gy,gz,ax,ay,az,mx,my,mz,qw,qx,qy,qz\n\
                    0.0,0,0,0,0,0,-9.8,0.5,0,0.8,1,0,0,0\n\
                    0.01,0,0,0.1,0,0,-9.8,0.5,0,0.8,1,0,0,0\n\
                    0.02,0,0,0.1,0,0,-9.8,0.5,0,0.8,1,0,0,0\n";
        let seq = read_csv(text.as_bytes()).unwrap();
        assert_eq!(seq.records.len(), 3);
        assert!((seq.rate_hz - 100.0).abs() < 1e-9);
        assert!(seq.gaps.is_empty());
    }

    #[test]
    fn reports_bad_rows() {
        let text = "t_s,gx,gy,gz,ax,ay,az,mx,my,mz,qw,qx,qy,qz\n\
                    0.0,0,0,0,0,0,-9.8,0.5,0,0.8,1,0,0,0\n\
                    0.01,NaN,0,0,0,0,-9.8,0.5,0,0.8,1,0,0,0\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(Error::Row { row: 2, .. })
        ));
        let text = "t_s,gx,gy,gz,ax,ay,az,mx,my,mz,qw,qx,qy,qz\n\
                    0.1,0,0,0,0,0,-9.8,0.5,0,0.8,1,0,0,0\n\
                    0.05,0,0,0,0,0,-9.8,0.5,0,0.8,1,0,0,0\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(Error::Row { row: 2, .. })
        ));
        assert!(read_csv("t,gx\n0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn flags_gaps() {
        let mut text = String::from("t_s,gx,gy,gz,ax,ay,az,mx,my,mz,qw,qx,qy,qz\n");
        for t in [0.0, 0.01, 0.02, 0.03, 0.2, 0.21] {
            text.push_str(&format!("{t},0,0,0,0,0,-9.8,1,0,0,1,0,0,0\n"));
        }
        assert_eq!(read_csv(text.as_bytes()).unwrap().gaps, vec![3]);
    }

    #[test]
    fn synthetic_export_round_trips() {
        let (_, recs) = synthetic(
            3.0,
            Some(NoiseSpec {
                gyro_sigma: 0.01,
                meas_sigma: 0.01,
                seed: 3,
            }),
        );
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records, recs);
        assert!((back.rate_hz - 286.0).abs() < 1e-6);
    }

    #[test]
    fn m0_recovered_from_synthetic_data() {
        let (_, recs) = synthetic(1.0, None);
        let m = derive_m0(&recs, DEFAULT_M0_SAMPLES, &Rotation::identity()).unwrap();
        assert!((m - m0()).norm() < 1e-6);
        assert!(derive_m0(&recs, 1, &Rotation::identity()).is_err());
    }

    #[test]
    fn m0_tolerates_magnetometer_noise() {
        let (_, recs) = synthetic(
            1.0,
            Some(NoiseSpec {
                gyro_sigma: 0.0,
                meas_sigma: 0.01,
                seed: 11,
            }),
        );
        let m = derive_m0(&recs, DEFAULT_M0_SAMPLES, &Rotation::identity()).unwrap();
        assert!(m.angle(&m0()) < 0.01);
    }

    #[test]
    fn scalar_stream_matches_predicted_outputs() {
        let (run, recs) = synthetic(1.0, None);
        let meta = SequenceMeta::new(286.0, Rotation::identity(), m0()).unwrap();
        for preset in Preset::ALL {
            let stream = to_scalar_stream(&recs, &meta, preset).unwrap();
            assert_eq!(stream.config.len(), preset.len());
            assert_eq!(stream.inputs.len(), recs.len() - 1);
            for k in [0usize, 57, 200] {
                let r = &run.truth.rotations()[k];
                let want = predict_outputs(r, &stream.config, 0.0).unwrap();
                assert!((&stream.inputs[k].y_meas - want).amax() < 1e-12);
            }
        }
        let two = to_scalar_stream(&recs, &meta, Preset::Two).unwrap();
        let dir = -recs[10].acc.normalize();
        assert_eq!(two.inputs[10].y_meas[0], dir.y);
    }

    #[test]
    fn zero_norm_samples_carry_previous() {
        let (_, mut recs) = synthetic(0.1, None);
        recs[5].mag = Vec3::zeros();
        let meta = SequenceMeta::new(286.0, Rotation::identity(), m0()).unwrap();
        let s = to_scalar_stream(&recs, &meta, Preset::Six).unwrap();
        assert_eq!(s.carried, vec![5]);
        assert_eq!(s.inputs[5].y_meas.rows(3, 3), s.inputs[4].y_meas.rows(3, 3));
        recs[0].acc = Vec3::zeros();
        assert!(to_scalar_stream(&recs, &meta, Preset::Six).is_err());
    }

    fn poses(truth: &[(f64, Rotation)], offset: &Rotation) -> Vec<EstimatedPose> {
        truth
            .iter()
            .map(|(t, r)| EstimatedPose {
                t: *t,
                rotation: *offset * *r,
                dhat: Vec3::zeros(),
            })
            .collect()
    }

    #[test]
    fn self_comparison_is_zero() {
        let (_, recs) = synthetic(2.0, None);
        let truth = reference_poses(&recs);
        let ev = evaluate(&poses(&truth, &Rotation::identity()), &truth, None).unwrap();
        assert_eq!(ev.rmse.samples, truth.len());
        assert!(ev.rmse.theta < 1e-5 && ev.rmse.roll < 1e-9 && ev.rmse.yaw < 1e-9);
    }

    #[test]
    fn pure_yaw_offset_at_level_attitude() {
        let truth: Vec<(f64, Rotation)> = (0..100)
            .map(|k| {
                (
                    k as f64 * 0.01,
                    from_euler_zyx(0.01, -0.02, 0.3 * k as f64 * 0.01),
                )
            })
            .collect();
        let est = poses(&truth, &exp_so3(&(Vec3::z() * 5f64.to_radians())));
        let ev = evaluate(&est, &truth, None).unwrap();
        assert!((ev.rmse.theta - 5.0).abs() < 1e-9);
        assert!((ev.rmse.yaw - 5.0).abs() < 0.01);
        assert!(ev.rmse.roll < 0.01 && ev.rmse.pitch < 0.01);
    }

    #[test]
    fn wrapping_and_alignment() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert!((wrap_deg(350.0) + 10.0).abs() < 1e-12);
        assert!((wrap_deg(-190.0) - 170.0).abs() < 1e-12);
        assert!((wrap_deg(370.0) - wrap_deg(10.0)).abs() < 1e-12);

        let a: Vec<(f64, Rotation)> = (0..50)
            .map(|k| {
                (
                    k as f64 * 0.01,
                    exp_so3(&Vec3::new(0.1 * k as f64, 0.0, 0.0)),
                )
            })
            .collect();
        let b: Vec<(f64, Rotation)> = (0..40)
            .map(|k| {
                (
                    0.003 + k as f64 * 0.0125,
                    exp_so3(&Vec3::new(0.0, 0.05 * k as f64, 0.0)),
                )
            })
            .collect();
        let ab = evaluate(&poses(&a, &Rotation::identity()), &b, None).unwrap();
        let ba = evaluate(&poses(&b, &Rotation::identity()), &a, None).unwrap();
        assert_eq!(ab.series.theta_deg, ba.series.theta_deg);

        let far: Vec<(f64, Rotation)> =
            vec![(100.0, Rotation::identity()), (101.0, Rotation::identity())];
        assert!(matches!(
            evaluate(&poses(&a, &Rotation::identity()), &far, None),
            Err(Error::NoOverlap)
        ));
    }
}
