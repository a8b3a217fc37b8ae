use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Slack allowed at either end of a sampled series before a lookup is out of coverage.
pub const COVERAGE_SLACK: f64 = 1e-9;

/// Timestamped 3-vectors with linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorSeries {
    times: Vec<f64>,
    values: Vec<Vec3>,
}

impl VectorSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec3>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Invalid(format!(
                "series needs matching non-empty times/values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Row {
                row: k + 1,
                msg: "time is not strictly increasing".into(),
            });
        }
        if times.iter().any(|t| !t.is_finite())
            || values.iter().any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::NonFinite("vector series"));
        }
        Ok(VectorSeries { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Linear interpolation at `t`.
    pub fn sample(&self, t: f64) -> Result<Vec3> {
        let (k, frac) = locate(&self.times, t)?;
        if frac == 0.0 {
            return Ok(self.values[k]);
        }
        Ok(self.values[k] * (1.0 - frac) + self.values[k + 1] * frac)
    }

    /// Linear interpolation followed by renormalization.
    pub fn sample_unit(&self, t: f64) -> Result<Vec3> {
        let v = self.sample(t)?;
        let n = v.norm();
        if n < 1e-12 {
            return Err(Error::Invalid(format!("zero direction at t = {t}")));
        }
        Ok(v / n)
    }
}

/// Index `k` and fraction in `[0, 1)` such that `t` lies in `[times[k], times[k+1])`.
pub(crate) fn locate(times: &[f64], t: f64) -> Result<(usize, f64)> {
    let (start, end) = (times[0], times[times.len() - 1]);
    if !(t >= start - COVERAGE_SLACK && t <= end + COVERAGE_SLACK) {
        return Err(Error::OutOfCoverage { t, start, end });
    }
    if times.len() == 1 || t <= start {
        return Ok((0, 0.0));
    }
    if t >= end {
        return Ok((times.len() - 1, 0.0));
    }
    let k = times.partition_point(|&x| x <= t) - 1;
    let frac = (t - times[k]) / (times[k + 1] - times[k]);
    Ok((k, frac))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_checks_coverage() {
        let s =
            VectorSeries::new(vec![0.0, 1.0, 2.0], vec![Vec3::x(), Vec3::y(), Vec3::z()]).unwrap();
        assert_eq!(s.sample(0.0).unwrap(), Vec3::x());
        assert_eq!(s.sample(2.0).unwrap(), Vec3::z());
        assert_eq!(s.sample(0.5).unwrap(), Vec3::new(0.5, 0.5, 0.0));
        let u = s.sample_unit(1.5).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-15);
        assert!(matches!(s.sample(2.1), Err(Error::OutOfCoverage { .. })));
        assert!(s.sample(-1e-10).is_ok());
    }

    #[test]
    fn rejects_non_monotone_time() {
        let err = VectorSeries::new(vec![0.0, 1.0, 1.0], vec![Vec3::x(); 3]).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
    }
}
