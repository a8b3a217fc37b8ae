//! Scalar measurement channels `y_i = a_i^T R^T b_i` and their linearization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, RowVector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::VectorSeries;
use crate::so3::{skew, Rotation, Vec3};

const UNIT_TOL: f64 = 1e-6;

/// Known inertial direction `b_i(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DirectionSignal {
    Constant(Vec3),
    /// Sampled directions, linearly interpolated and renormalized.
    Sampled(VectorSeries),
}

impl DirectionSignal {
    pub fn constant(b: Vec3) -> Result<Self> {
        check_unit(&b, "inertial direction")?;
        Ok(DirectionSignal::Constant(b))
    }

    pub fn sampled(series: VectorSeries) -> Result<Self> {
        for b in series.values() {
            check_unit(b, "inertial direction sample")?;
        }
        Ok(DirectionSignal::Sampled(series))
    }

    pub fn at(&self, t: f64) -> Result<Vec3> {
        match self {
            DirectionSignal::Constant(b) => Ok(*b),
            DirectionSignal::Sampled(s) => s.sample_unit(t),
        }
    }

    pub fn as_constant(&self) -> Option<Vec3> {
        match self {
            DirectionSignal::Constant(b) => Some(*b),
            DirectionSignal::Sampled(_) => None,
        }
    }
}

fn check_unit(v: &Vec3, what: &str) -> Result<()> {
    if !v.iter().all(|x| x.is_finite()) || (v.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Invalid(format!("{what} {v:?} is not a unit vector")));
    }
    Ok(())
}

/// One scalar output: body direction `a` paired with inertial direction `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarChannel {
    pub a: Vec3,
    pub b: DirectionSignal,
}

impl ScalarChannel {
    pub fn new(a: Vec3, b: DirectionSignal) -> Result<Self> {
        check_unit(&a, "body direction")?;
        Ok(ScalarChannel { a, b })
    }

    pub fn constant(a: Vec3, b: Vec3) -> Result<Self> {
        Self::new(a, DirectionSignal::constant(b)?)
    }

    /// Skips the unit-norm check on `a`. Used for outputs expressed in sensor units
    /// (e.g. specific force in m/s²), where `|a|` carries the signal magnitude.
    pub fn scaled(a: Vec3, b: DirectionSignal) -> Self {
        ScalarChannel { a, b }
    }
}

/// The measurement configurations of the accelerometer/magnetometer study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Six,
    Four,
    Three,
    Two,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Six, Preset::Four, Preset::Three, Preset::Two];

    /// Sensor axes (0-based) of the accelerometer rows, in row order.
    pub fn acc_axes(self) -> &'static [usize] {
        match self {
            Preset::Six => &[0, 1, 2],
            Preset::Four | Preset::Three => &[1, 2],
            Preset::Two => &[1],
        }
    }

    /// Sensor axes (0-based) of the magnetometer rows, following the accelerometer rows.
    pub fn mag_axes(self) -> &'static [usize] {
        match self {
            Preset::Six => &[0, 1, 2],
            Preset::Four => &[0, 1],
            Preset::Three | Preset::Two => &[1],
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        self.acc_axes().len() + self.mag_axes().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Six => "six",
            Preset::Four => "four",
            Preset::Three => "three",
            Preset::Two => "two",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "six" | "6" => Ok(Preset::Six),
            "four" | "4" => Ok(Preset::Four),
            "three" | "3" => Ok(Preset::Three),
            "two" | "2" => Ok(Preset::Two),
            _ => Err(Error::UnknownName {
                kind: "measurement configuration",
                name: s.to_string(),
            }),
        }
    }
}

/// Ordered list of scalar channels. Row order fixes the row order of `C`, `y` and `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementConfig {
    pub name: String,
    channels: Vec<ScalarChannel>,
}

impl MeasurementConfig {
    pub fn new(name: impl Into<String>, channels: Vec<ScalarChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Invalid(
                "a measurement configuration needs m >= 1 channels".into(),
            ));
        }
        Ok(MeasurementConfig {
            name: name.into(),
            channels,
        })
    }

    pub fn channels(&self) -> &[ScalarChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Reads the JSON document format; `series` paths resolve relative to the file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: ConfigDocument = serde_json::from_str(&text)?;
        doc.into_config(path.parent().unwrap_or(Path::new(".")))
    }

    /// Writes the JSON document; sampled directions go to sibling `<stem>_b<i>.csv` files.
    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("config");
        let mut channels = Vec::with_capacity(self.len());
        for (i, ch) in self.channels.iter().enumerate() {
            let b = match &ch.b {
                DirectionSignal::Constant(b) => DirectionDoc::Const([b.x, b.y, b.z]),
                DirectionSignal::Sampled(s) => {
                    let file = format!("{stem}_b{i}.csv");
                    write_series_csv(&dir.join(&file), s)?;
                    DirectionDoc::Series(file)
                }
            };
            channels.push(ChannelDoc {
                a: [ch.a.x, ch.a.y, ch.a.z],
                b,
            });
        }
        let doc = ConfigDocument {
            name: self.name.clone(),
            channels,
        };
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

/// Serialized form: `{name, channels: [{a: [x,y,z], b: {const: [x,y,z]} | {series: file}}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigDocument {
    pub name: String,
    pub channels: Vec<ChannelDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub a: [f64; 3],
    pub b: DirectionDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum DirectionDoc {
    #[serde(rename = "const")]
    Const([f64; 3]),
    #[serde(rename = "series")]
    Series(String),
}

impl ConfigDocument {
    pub fn into_config(self, base: &Path) -> Result<MeasurementConfig> {
        let channels = self
            .channels
            .into_iter()
            .map(|c| {
                let b = match c.b {
                    DirectionDoc::Const(b) => DirectionSignal::constant(Vec3::from(b))?,
                    DirectionDoc::Series(file) => {
                        DirectionSignal::sampled(read_series_csv(&base.join(file))?)?
                    }
                };
                ScalarChannel::new(Vec3::from(c.a), b)
            })
            .collect::<Result<Vec<_>>>()?;
        MeasurementConfig::new(self.name, channels)
    }
}

fn read_series_csv(path: &Path) -> Result<VectorSeries> {
    let mut rdr = csv::Reader::from_path(path)?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.deserialize::<(f64, f64, f64, f64)>().enumerate() {
        let (t, x, y, z) = rec.map_err(|e| Error::Row {
            row,
            msg: e.to_string(),
        })?;
        times.push(t);
        values.push(Vec3::new(x, y, z));
    }
    VectorSeries::new(times, values)
}

fn write_series_csv(path: &Path, s: &VectorSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "y", "z"])?;
    for (t, v) in s.times().iter().zip(s.values()) {
        w.serialize((t, v.x, v.y, v.z))?;
    }
    w.flush()?;
    Ok(())
}

/// Accelerometer rows use gravity `e3`, magnetometer rows use `m0`; body directions are
/// `r_imu * e_k` over the preset's axis subsets.
pub fn preset_config(preset: Preset, r_imu: &Rotation, m0: &Vec3) -> Result<MeasurementConfig> {
    check_unit(m0, "magnetic reference m0")?;
    let axis = |k: usize| r_imu.matrix().column(k).into_owned();
    let gravity = DirectionSignal::Constant(Vec3::z());
    let mag = DirectionSignal::Constant(*m0);
    let channels = preset
        .acc_axes()
        .iter()
        .map(|&k| ScalarChannel::new(axis(k), gravity.clone()))
        .chain(
            preset
                .mag_axes()
                .iter()
                .map(|&k| ScalarChannel::new(axis(k), mag.clone())),
        )
        .collect::<Result<Vec<_>>>()?;
    MeasurementConfig::new(preset.name(), channels)
}

/// Stacked outputs `a_i^T R^T b_i(t)`.
pub fn predict_outputs(r: &Rotation, cfg: &MeasurementConfig, t: f64) -> Result<DVector<f64>> {
    let rt = r.matrix().transpose();
    let mut y = DVector::zeros(cfg.len());
    for (i, ch) in cfg.channels.iter().enumerate() {
        y[i] = ch.a.dot(&(rt * ch.b.at(t)?));
    }
    Ok(y)
}

/// `ŷ - y_meas`, with `ŷ` predicted from the estimate.
pub fn output_error(
    rhat: &Rotation,
    cfg: &MeasurementConfig,
    t: f64,
    y_meas: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y_meas.len() != cfg.len() {
        return Err(Error::Dimension {
            expected: cfg.len(),
            got: y_meas.len(),
        });
    }
    if y_meas.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("measurement"));
    }
    Ok(predict_outputs(rhat, cfg, t)? - y_meas)
}

/// Output row `a^T R̂^T b(t)^x`.
pub fn c_row(rhat: &Rotation, ch: &ScalarChannel, t: f64) -> Result<RowVector3<f64>> {
    // a^T R̂^T = (R̂ a)^T
    Ok((rhat.matrix() * ch.a).transpose() * skew(&ch.b.at(t)?))
}

/// Stacked output matrix, `m×3`, or `m×6` with a zero bias block when `with_bias`.
pub fn build_c(
    rhat: &Rotation,
    cfg: &MeasurementConfig,
    t: f64,
    with_bias: bool,
) -> Result<DMatrix<f64>> {
    let cols = if with_bias { 6 } else { 3 };
    let mut c = DMatrix::zeros(cfg.len(), cols);
    for (i, ch) in cfg.channels.iter().enumerate() {
        let row = c_row(rhat, ch, t)?;
        c.fixed_view_mut::<1, 3>(i, 0).copy_from(&row);
    }
    Ok(c)
}
