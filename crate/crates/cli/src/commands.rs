use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use scalar_attitude::dataset::{
    derive_m0, evaluate, load_csv, read_csv, records_from_run, reference_poses, save_csv,
    to_scalar_stream, ImuRecord, RmseSummary, SequenceMeta, HEADER,
};
use scalar_attitude::measurement::{preset_config, Preset};
use scalar_attitude::observability::{
    analyze_window, sweep_windows, Thresholds, TrueTrajectory, Verdict, WindowAnalysis,
};
use scalar_attitude::observer::{
    read_history_csv, run, write_history_csv, ComplementaryGains, EstimatedPose, Estimator, Gains,
    ObserverState,
};
use scalar_attitude::sim::{
    generate, preset_trajectory, NoiseSpec, PresetTrajectory, TrajectorySpec,
};
use scalar_attitude::so3::{from_euler_zyx, Rotation, Vec3};

use crate::args::{
    AnalyzeArgs, EstimateArgs, EvaluateArgs, ObserverKind, ReplayArgs, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{absolute, sha256_file, RunManifest};

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Inertial field direction from inclination (positive down) and declination, in degrees.
pub fn m0_from_angles(inclination_deg: f64, declination_deg: f64) -> Vec3 {
    let (i, d) = (inclination_deg.to_radians(), declination_deg.to_radians());
    Vec3::new(i.cos() * d.cos(), i.cos() * d.sin(), i.sin())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_spec(path: &Path) -> CliResult<TrajectorySpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec: TrajectorySpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

fn load_records(path: &Path) -> CliResult<Vec<ImuRecord>> {
    let seq = load_csv(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if seq.records.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least two records",
            path.display()
        )));
    }
    Ok(seq.records)
}

fn sequence_meta(
    records: &[ImuRecord],
    angles: Option<(f64, f64)>,
    m0_samples: usize,
) -> CliResult<SequenceMeta> {
    let r_imu = Rotation::identity();
    let m0 = match angles {
        Some((i, d)) => m0_from_angles(i, d),
        None => derive_m0(records, m0_samples, &r_imu)?,
    };
    let span = records[records.len() - 1].t - records[0].t;
    let rate = (records.len() - 1) as f64 / span;
    Ok(SequenceMeta::new(rate, r_imu, m0)?)
}

fn angles(inclination: Option<f64>, declination: Option<f64>) -> Option<(f64, f64)> {
    inclination.zip(declination)
}

// simulate

pub fn simulate(mut args: SimulateArgs) -> CliResult<RunManifest> {
    let mut spec = match &args.spec {
        Some(path) => {
            let path = absolute(path)?;
            args.spec = Some(path.clone());
            read_spec(&path)?
        }
        None => {
            let preset = *args.preset.get_or_insert(PresetTrajectory::PeTumble);
            preset_trajectory(preset)
        }
    };
    if let Some(d) = args.duration {
        spec.duration = d;
    }
    if let Some(r) = args.rate {
        spec.rate = r;
    }
    if let Some(b) = args.bias {
        spec.d_true = vec3(b);
    }
    if args.gyro_sigma.is_some() || args.meas_sigma.is_some() || args.seed.is_some() {
        let base = spec.noise.unwrap_or(NoiseSpec {
            gyro_sigma: 0.0,
            meas_sigma: 0.0,
            seed: 0,
        });
        spec.noise = Some(NoiseSpec {
            gyro_sigma: args.gyro_sigma.unwrap_or(base.gyro_sigma),
            meas_sigma: args.meas_sigma.unwrap_or(base.meas_sigma),
            seed: args.seed.unwrap_or(base.seed),
        });
    }
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let m0 = m0_from_angles(args.inclination_deg, args.declination_deg);
    let cfg = preset_config(args.config, &Rotation::identity(), &m0)?;
    let sim = generate(&spec, &cfg)?;

    let out = args.out.clone();
    create_dir(&out)?;
    save_csv(
        &out.join("imu.csv"),
        &records_from_run(&sim, &Rotation::identity(), &m0),
    )?;
    write_scalars(&out.join("scalars.csv"), sim.times(), &sim.omega_y, &sim.y)?;
    write_json(&out.join("trajectory.json"), &spec)?;

    let mut manifest = RunManifest::new("simulate", &args)?;
    if let Some(path) = &args.spec {
        manifest.add_input(path)?;
    }
    if let Some(n) = spec.noise {
        manifest.seeds.insert("noise".into(), n.seed);
    }
    manifest.resolved = serde_json::json!({ "trajectory": spec, "m0": m0, "config": args.config });
    for name in ["imu.csv", "scalars.csv", "trajectory.json"] {
        manifest.add_output(&out, name)?;
    }
    manifest.write(&out)?;
    Ok(manifest)
}

fn write_scalars(
    path: &Path,
    times: &[f64],
    omega_y: &[Vec3],
    y: &[nalgebra::DVector<f64>],
) -> CliResult<()> {
    let m = y.first().map_or(0, |v| v.len());
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = ["t", "omega_x", "omega_y", "omega_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=m).map(|i| format!("y_{i}")));
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(csv_err)?;
    for ((t, om), yk) in times.iter().zip(omega_y).zip(y) {
        let row = std::iter::once(*t)
            .chain(om.iter().copied())
            .chain(yk.iter().copied());
        w.write_record(row.map(|x| x.to_string()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

// estimate

#[derive(Serialize)]
struct EstimateSummary {
    observer: String,
    config: Preset,
    steps: usize,
    final_dhat: Vec3,
    rmse: Option<RmseSummary>,
}

pub fn estimate(mut args: EstimateArgs) -> CliResult<RunManifest> {
    if args.observer == ObserverKind::Complementary && args.config != Preset::Six {
        return Err(CliError::Usage(
            "the complementary filter needs full vectors, use --config six".into(),
        ));
    }
    if args.m0_samples < 10 {
        return Err(CliError::Usage("--m0-samples must be at least 10".into()));
    }
    args.input = absolute(&args.input)?;
    let records = load_records(&args.input)?;
    let meta = sequence_meta(
        &records,
        angles(args.inclination_deg, args.declination_deg),
        args.m0_samples,
    )?;
    let stream = to_scalar_stream(&records, &meta, args.config)?;
    let m = args.config.len();

    let r0 = from_euler_zyx(
        args.init_rot[0].to_radians(),
        args.init_rot[1].to_radians(),
        args.init_rot[2].to_radians(),
    );
    let d0 = vec3(args.init_bias);
    let (estimator, initial, gains) = match args.observer {
        ObserverKind::Riccati => (
            Estimator::Riccati,
            ObserverState::biased(r0, d0, DMatrix::identity(6, 6) * args.p0, records[0].t)?,
            Gains::scaled(m, args.q, args.v, true)?,
        ),
        ObserverKind::RiccatiUnbiased => (
            Estimator::RiccatiUnbiased,
            ObserverState::unbiased(r0, DMatrix::identity(3, 3) * args.p0, records[0].t)?,
            Gains::scaled(m, args.q, args.v, false)?,
        ),
        ObserverKind::Complementary => (
            Estimator::Complementary(ComplementaryGains {
                k_acc: args.k_acc,
                k_mag: args.k_mag,
                k_bias: args.k_bias,
            }),
            ObserverState::complementary(r0, d0, records[0].t),
            Gains::defaults(m, true),
        ),
    };
    let mut gains = gains;
    gains.projection_interval = args.projection_interval;
    let history = run(estimator, initial, &stream.inputs, &stream.config, &gains)?;

    let out = args.out.clone();
    create_dir(&out)?;
    let truth = reference_poses(&records);
    let lookup = |t: f64| {
        let k = truth.partition_point(|p| p.0 < t - 1e-9);
        truth
            .get(k)
            .filter(|p| (p.0 - t).abs() <= 1e-9)
            .map(|p| p.1)
    };
    write_history_csv(create(&out.join("history.csv"))?, &history, Some(&lookup))?;

    let poses: Vec<EstimatedPose> = history
        .states
        .iter()
        .map(|s| EstimatedPose {
            t: s.t,
            rotation: s.rhat,
            dhat: s.dhat,
        })
        .collect();
    let eval = evaluate(&poses, &truth, args.true_bias.map(vec3))?;
    eval.series.write_csv(create(&out.join("errors.csv"))?)?;
    write_json(
        &out.join("summary.json"),
        &EstimateSummary {
            observer: history.estimator.name().to_string(),
            config: args.config,
            steps: stream.inputs.len(),
            final_dhat: history.last().dhat,
            rmse: Some(eval.rmse),
        },
    )?;

    let mut manifest = RunManifest::new("estimate", &args)?;
    manifest.add_input(&args.input)?;
    manifest.resolved = serde_json::json!({
        "m0": meta.m0,
        "rate_hz": meta.rate_hz,
        "carried_records": stream.carried,
        "measurement_config": args.config,
    });
    for name in ["history.csv", "errors.csv", "summary.json"] {
        manifest.add_output(&out, name)?;
    }
    manifest.write(&out)?;
    Ok(manifest)
}

// analyze

/// Per-condition verdict over the whole sweep: observable only if every window passes.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub windows: usize,
    pub passed: usize,
    pub min_lambda_min: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Serialize)]
struct AnalysisReport {
    source: String,
    config: Preset,
    m0: Vec3,
    thresholds: Thresholds,
    window: f64,
    stride: f64,
    n_quad: usize,
    summary: Vec<ConditionVerdict>,
    windows: Vec<WindowAnalysis>,
}

fn summarize(windows: &[WindowAnalysis]) -> Vec<ConditionVerdict> {
    let mut out: Vec<ConditionVerdict> = Vec::new();
    for w in windows {
        for c in &w.conditions {
            let idx = match out.iter().position(|v| v.condition == c.condition) {
                Some(i) => i,
                None => {
                    out.push(ConditionVerdict {
                        condition: c.condition.clone(),
                        windows: 0,
                        passed: 0,
                        min_lambda_min: None,
                        verdict: Verdict::Observable,
                    });
                    out.len() - 1
                }
            };
            let v = &mut out[idx];
            v.windows += 1;
            if c.verdict.passed() {
                v.passed += 1;
            }
            if c.lambda_min.is_finite() {
                v.min_lambda_min = Some(
                    v.min_lambda_min
                        .map_or(c.lambda_min, |x| x.min(c.lambda_min)),
                );
            }
        }
    }
    for v in &mut out {
        if v.passed < windows.len() {
            v.verdict = Verdict::NotObservable;
        }
    }
    out
}

pub fn analyze(mut args: AnalyzeArgs) -> CliResult<RunManifest> {
    if args.window.is_nan() || args.window <= 0.0 {
        return Err(CliError::Usage(format!(
            "--window must be > 0, got {}",
            args.window
        )));
    }
    let angles = angles(args.inclination_deg, args.declination_deg);
    let (input, spec_path, preset) = (args.input.clone(), args.spec.clone(), args.preset);
    let (source, traj, cfg, m0) = match (&input, &spec_path, preset) {
        (Some(path), _, _) => {
            let path = absolute(path)?;
            args.input = Some(path.clone());
            let records = load_records(&path)?;
            let meta = sequence_meta(&records, angles, args.m0_samples)?;
            let traj = TrueTrajectory::new(
                records.iter().map(|r| r.t).collect(),
                records.iter().map(ImuRecord::rotation).collect(),
                records.iter().map(|r| r.gyro).collect(),
            )?;
            (
                path.display().to_string(),
                traj,
                meta.config(args.config)?,
                meta.m0,
            )
        }
        (None, spec_path, preset) => {
            let spec = match (spec_path, preset) {
                (Some(p), _) => {
                    let p = absolute(p)?;
                    args.spec = Some(p.clone());
                    read_spec(&p)?
                }
                (None, Some(p)) => preset_trajectory(p),
                (None, None) => unreachable!("clap requires a source"),
            };
            let m0 = angles.map_or(m0_from_angles(60.0, 0.0), |(i, d)| m0_from_angles(i, d));
            let cfg = preset_config(args.config, &Rotation::identity(), &m0)?;
            let sim = generate(&spec, &cfg)?;
            let name = match (spec_path, preset) {
                (None, Some(p)) => format!("preset:{p}"),
                _ => format!("spec:{}", args.spec.as_ref().expect("set above").display()),
            };
            (name, sim.truth, cfg, m0)
        }
    };
    let thresholds = Thresholds {
        mu: args.mu,
        beta: args.beta,
        delta1: args.delta1,
        ..Thresholds::default()
    };
    let windows = sweep_windows(&traj, args.window, args.stride, args.n_quad)?;
    let analyses = windows
        .par_iter()
        .map(|w| analyze_window(&traj, &cfg, w, &thresholds))
        .collect::<Result<Vec<_>, _>>()?;
    let report = AnalysisReport {
        source,
        config: args.config,
        m0,
        thresholds,
        window: args.window,
        stride: args.stride,
        n_quad: args.n_quad,
        summary: summarize(&analyses),
        windows: analyses,
    };

    let out = args.out.clone();
    create_dir(&out)?;
    write_json(&out.join("analysis.json"), &report)?;
    for v in &report.summary {
        println!(
            "{:<26} {:>4}/{:<4} windows  {}",
            v.condition,
            v.passed,
            v.windows,
            verdict_name(v.verdict)
        );
    }

    let mut manifest = RunManifest::new("analyze", &args)?;
    if let Some(p) = args.input.as_ref().or(args.spec.as_ref()) {
        manifest.add_input(p)?;
    }
    manifest.resolved = serde_json::json!({ "m0": m0, "thresholds": thresholds });
    manifest.add_output(&out, "analysis.json")?;
    manifest.write(&out)?;
    Ok(manifest)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Observable => "observable",
        Verdict::NotObservable => "not_observable",
    }
}

// evaluate

#[derive(Clone, Debug, Serialize)]
pub struct RmseRow {
    pub label: String,
    #[serde(flatten)]
    pub rmse: RmseSummary,
}

fn default_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    match stem.as_deref() {
        Some("history") => path
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "history".into()),
        Some(s) => s.to_string(),
        None => path.display().to_string(),
    }
}

fn split_estimate(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            (default_label(&path), path)
        }
    }
}

/// Poses of an estimate history, or the ground truth of an IMU sequence.
fn read_poses(path: &Path) -> CliResult<Vec<EstimatedPose>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    let is_sequence = first.split(',').map(str::trim).eq(HEADER.iter().copied());
    let data = |e: scalar_attitude::Error| CliError::Data(format!("{}: {e}", path.display()));
    if is_sequence {
        let seq = read_csv(text.as_bytes()).map_err(data)?;
        Ok(seq
            .records
            .iter()
            .map(|r| EstimatedPose {
                t: r.t,
                rotation: r.rotation(),
                dhat: Vec3::zeros(),
            })
            .collect())
    } else {
        read_history_csv(text.as_bytes()).map_err(data)
    }
}

pub fn format_table(rows: &[RmseRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
    let mut s = format!(
        "{:<width$}  {:>12}  {:>12}  {:>12}  {:>12}\n",
        "estimator", "theta", "roll", "pitch", "yaw"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>12.6}  {:>12.6}  {:>12.6}  {:>12.6}",
            r.label, r.rmse.theta, r.rmse.roll, r.rmse.pitch, r.rmse.yaw
        );
    }
    s
}

pub fn evaluate_cmd(mut args: EvaluateArgs) -> CliResult<Option<RunManifest>> {
    args.truth = absolute(&args.truth)?;
    let records = load_records(&args.truth)?;
    let truth = reference_poses(&records);
    let mut rows = Vec::new();
    let mut inputs = vec![args.truth.clone()];
    let mut resolved = Vec::new();
    for spec in &args.estimates {
        let (label, path) = split_estimate(spec);
        let path = absolute(&path)?;
        let poses = read_poses(&path)?;
        let eval = evaluate(&poses, &truth, args.true_bias.map(vec3))
            .map_err(|e| CliError::Data(format!("{label}: {e}")))?;
        rows.push(RmseRow {
            label: label.clone(),
            rmse: eval.rmse,
        });
        resolved.push(format!("{label}={}", path.display()));
        inputs.push(path);
    }
    args.estimates = resolved;
    let table = format_table(&rows);
    print!("{table}");

    let Some(out) = args.out.clone() else {
        return Ok(None);
    };
    create_dir(&out)?;
    write_json(&out.join("rmse.json"), &rows)?;
    fs::write(out.join("rmse.txt"), &table).map_err(|e| CliError::io(&out, e))?;
    let mut manifest = RunManifest::new("evaluate", &args)?;
    for p in &inputs {
        manifest.add_input(p)?;
    }
    manifest.add_output(&out, "rmse.json")?;
    manifest.add_output(&out, "rmse.txt")?;
    manifest.write(&out)?;
    Ok(Some(manifest))
}

// replay

fn params<T: serde::de::DeserializeOwned>(m: &RunManifest) -> CliResult<T> {
    serde_json::from_value(m.params.clone())
        .map_err(|e| CliError::Data(format!("manifest parameters for `{}`: {e}", m.command)))
}

pub fn replay(args: ReplayArgs) -> CliResult<()> {
    let old = RunManifest::read(&args.manifest)?;
    for input in &old.inputs {
        let digest = sha256_file(Path::new(&input.path))?;
        if digest != input.sha256 {
            return Err(CliError::Data(format!(
                "input {} changed since the run",
                input.path
            )));
        }
    }
    let out = args.out.clone();
    let new = match old.command.as_str() {
        "simulate" => simulate(SimulateArgs {
            out,
            ..params(&old)?
        })?,
        "estimate" => estimate(EstimateArgs {
            out,
            ..params(&old)?
        })?,
        "analyze" => analyze(AnalyzeArgs {
            out,
            ..params(&old)?
        })?,
        "evaluate" => evaluate_cmd(EvaluateArgs {
            out: Some(out),
            ..params(&old)?
        })?
        .expect("output directory given"),
        other => {
            return Err(CliError::Data(format!(
                "unknown manifest command `{other}`"
            )))
        }
    };
    let mismatched: Vec<&str> = old
        .outputs
        .iter()
        .filter(|o| !new.outputs.iter().any(|n| n == *o))
        .map(|o| o.path.as_str())
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::Data(format!(
            "replay differs from the manifest in: {}",
            mismatched.join(", ")
        )));
    }
    println!("replay reproduced {} outputs", old.outputs.len());
    Ok(())
}
