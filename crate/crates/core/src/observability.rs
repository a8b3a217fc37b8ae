//! Observability conditions evaluated numerically over time windows.
//!
//! Every integral is a composite trapezoid rule on a uniform grid of `n_quad` points
//! over `[t, t + delta]`, with attitudes resampled from the trajectory by geodesic
//! interpolation. The prefix integral `X(s) = ∫_t^s R(τ) dτ` is accumulated once per
//! grid and shared by the full Gramian, the bias-subsystem Gramian and the Schur check.

use nalgebra::{DMatrix, Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{c_row, MeasurementConfig};
use crate::series::{locate, VectorSeries};
use crate::so3::{angular_distance, exp_so3, log_so3, skew, Mat3, Rotation, Vec3};

pub const DEFAULT_MU: f64 = 1e-4;
pub const DEFAULT_BETA: f64 = 1e-3;
pub const DEFAULT_DELTA1: f64 = 1e-4;
pub const DEFAULT_WINDOW: f64 = 2.0;
pub const DEFAULT_N_QUAD: usize = 513;
pub const MIN_N_QUAD: usize = 16;

/// Integration window `[t, t + delta]` with its quadrature resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t: f64,
    pub delta: f64,
    pub n_quad: usize,
}

impl Window {
    pub fn new(t: f64, delta: f64) -> Result<Self> {
        Window::with_quadrature(t, delta, DEFAULT_N_QUAD)
    }

    pub fn with_quadrature(t: f64, delta: f64, n_quad: usize) -> Result<Self> {
        let w = Window { t, delta, n_quad };
        w.validate()?;
        Ok(w)
    }

    pub fn end(&self) -> f64 {
        self.t + self.delta
    }

    fn validate(&self) -> Result<()> {
        if self.delta.is_nan()
            || self.delta <= 0.0
            || !self.t.is_finite()
            || !self.delta.is_finite()
        {
            return Err(Error::Invalid(format!(
                "window needs finite t and delta > 0 (t = {}, delta = {})",
                self.t, self.delta
            )));
        }
        if self.n_quad < MIN_N_QUAD {
            return Err(Error::Invalid(format!(
                "n_quad = {} is below the minimum of {MIN_N_QUAD}",
                self.n_quad
            )));
        }
        Ok(())
    }

    /// Grid nodes and trapezoid weights normalized by `delta` (they sum to 1).
    fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_quad;
        let h = self.delta / (n - 1) as f64;
        let s = (0..n).map(|j| self.t + h * j as f64).collect();
        let mut w = vec![h / self.delta; n];
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        (s, w)
    }
}

/// Thresholds for the verdicts. All comparisons are strict.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub mu: f64,
    pub beta: f64,
    pub delta1: f64,
    /// Magnitude a pointwise determinant must exceed to count as non-zero.
    pub det_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            mu: DEFAULT_MU,
            beta: DEFAULT_BETA,
            delta1: DEFAULT_DELTA1,
            det_tol: 1e-6,
        }
    }
}

/// Ground-truth attitude and angular velocity samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueTrajectory {
    times: Vec<f64>,
    rotations: Vec<Rotation>,
    omegas: Vec<Vec3>,
}

impl TrueTrajectory {
    pub fn new(times: Vec<f64>, rotations: Vec<Rotation>, omegas: Vec<Vec3>) -> Result<Self> {
        if times.is_empty() || rotations.len() != times.len() || omegas.len() != times.len() {
            return Err(Error::Invalid(format!(
                "trajectory needs matching non-empty samples ({} times, {} rotations, {} rates)",
                times.len(),
                rotations.len(),
                omegas.len()
            )));
        }
        // reuse the series validation for monotone time and finite rates
        VectorSeries::new(times.clone(), omegas.clone())?;
        Ok(TrueTrajectory {
            times,
            rotations,
            omegas,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn omegas(&self) -> &[Vec3] {
        &self.omegas
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Geodesic interpolation between neighbouring samples.
    pub fn rotation_at(&self, t: f64) -> Result<Rotation> {
        let (k, frac) = locate(&self.times, t)?;
        let r0 = self.rotations[k];
        if frac == 0.0 {
            return Ok(r0);
        }
        let rel = r0.transpose() * self.rotations[k + 1];
        Ok(r0 * exp_so3(&(log_so3(&rel)? * frac)))
    }

    /// Linear interpolation of the angular velocity.
    pub fn omega_at(&self, t: f64) -> Result<Vec3> {
        let (k, frac) = locate(&self.times, t)?;
        if frac == 0.0 {
            return Ok(self.omegas[k]);
        }
        Ok(self.omegas[k] * (1.0 - frac) + self.omegas[k + 1] * frac)
    }

    fn check_coverage(&self, t: f64, s: f64) -> Result<()> {
        locate(&self.times, t)?;
        locate(&self.times, s)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Observable,
    NotObservable,
}

impl Verdict {
    fn from_margin(lambda_min: f64, threshold: f64) -> Self {
        if lambda_min > threshold {
            Verdict::Observable
        } else {
            Verdict::NotObservable
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Observable
    }
}

/// A windowed Gramian, its spectrum and the verdict against `mu_threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramianReport {
    pub condition: String,
    pub window: Window,
    pub w: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub mu_threshold: f64,
    pub verdict: Verdict,
}

/// Compact JSON form of a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub window: Window,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subcase: Option<String>,
}

impl GramianReport {
    fn new(condition: &str, window: Window, w: DMatrix<f64>, mu: f64) -> Self {
        let w = symmetrize(w);
        let eigenvalues = sorted_eigenvalues(&w);
        let lambda_min = eigenvalues[0];
        let lambda_max = eigenvalues[eigenvalues.len() - 1];
        GramianReport {
            condition: condition.to_string(),
            window,
            w,
            eigenvalues,
            lambda_min,
            lambda_max,
            mu_threshold: mu,
            verdict: Verdict::from_margin(lambda_min, mu),
        }
    }

    pub fn summary(&self) -> ConditionSummary {
        ConditionSummary {
            condition: self.condition.clone(),
            window: self.window,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            threshold: self.mu_threshold,
            verdict: self.verdict,
            subcase: None,
        }
    }
}

/// The 6×6 Gramian together with its blocks `[[W3, M], [M^T, H]]`, all normalized by `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullGramian {
    pub report: GramianReport,
    pub w3: Mat3,
    pub m: Mat3,
    pub h: Mat3,
}

fn symmetrize(w: DMatrix<f64>) -> DMatrix<f64> {
    (&w + w.transpose()) * 0.5
}

fn sorted_eigenvalues(w: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(w.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn to_dmatrix(m: &Mat3) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

/// Quadrature tables shared by every Gramian over one window.
struct WindowGrid {
    weights: Vec<f64>,
    /// `Σ_i C_i^T C_i` at each node.
    g: Vec<Mat3>,
    /// Prefix integral of `R` from the window start.
    x: Vec<Mat3>,
}

impl WindowGrid {
    fn build(traj: &TrueTrajectory, cfg: &MeasurementConfig, window: &Window) -> Result<Self> {
        window.validate()?;
        traj.check_coverage(window.t, window.end())?;
        let (nodes, weights) = window.nodes();
        let h = window.delta / (window.n_quad - 1) as f64;
        let mut g = Vec::with_capacity(nodes.len());
        let mut x = Vec::with_capacity(nodes.len());
        let mut prev: Option<Mat3> = None;
        for &s in &nodes {
            let r = traj.rotation_at(s)?;
            let mut gs = Mat3::zeros();
            for ch in cfg.channels() {
                let c = c_row(&r, ch, s)?;
                gs += c.transpose() * c;
            }
            g.push(gs);
            let xs = match (prev, x.last()) {
                (Some(rp), Some(xp)) => xp + (rp + r.matrix()) * (0.5 * h),
                _ => Mat3::zeros(),
            };
            x.push(xs);
            prev = Some(*r.matrix());
        }
        Ok(WindowGrid { weights, g, x })
    }

    fn w3(&self) -> Mat3 {
        self.weights.iter().zip(&self.g).map(|(w, g)| g * *w).sum()
    }

    fn m_block(&self) -> Mat3 {
        self.weights
            .iter()
            .zip(self.g.iter().zip(&self.x))
            .map(|(w, (g, x))| g * x * *w)
            .sum()
    }

    fn h_block(&self) -> Mat3 {
        self.weights
            .iter()
            .zip(self.g.iter().zip(&self.x))
            .map(|(w, (g, x))| x.transpose() * g * x * *w)
            .sum()
    }

    fn bias_gramian(&self, rho: &Mat3) -> Mat3 {
        self.weights
            .iter()
            .zip(self.g.iter().zip(&self.x))
            .map(|(w, (g, x))| {
                let d = x - rho;
                d.transpose() * g * d * *w
            })
            .sum()
    }
}

/// Closed-form state transition `[[I, ∫_t^s R], [0, I]]` of the linearized error system.
///
/// The integral uses the trapezoid rule over the trajectory's own samples inside `[t, s]`.
pub fn transition_matrix(traj: &TrueTrajectory, t: f64, s: f64) -> Result<Matrix6<f64>> {
    if s < t {
        return Err(Error::Invalid(format!(
            "transition needs t <= s (t = {t}, s = {s})"
        )));
    }
    traj.check_coverage(t, s)?;
    let mut knots = vec![(t, traj.rotation_at(t)?)];
    let first = traj.times.partition_point(|&x| x <= t);
    let last = traj.times.partition_point(|&x| x < s);
    for k in first..last {
        knots.push((traj.times[k], traj.rotations[k]));
    }
    if s > t {
        knots.push((s, traj.rotation_at(s)?));
    }
    let mut integral = Mat3::zeros();
    for pair in knots.windows(2) {
        let ((t0, r0), (t1, r1)) = (pair[0], pair[1]);
        integral += (r0.matrix() + r1.matrix()) * (0.5 * (t1 - t0));
    }
    let mut phi = Matrix6::identity();
    phi.fixed_view_mut::<3, 3>(0, 3).copy_from(&integral);
    Ok(phi)
}

/// Attitude-error Gramian `(1/δ) ∫ Σ C_i^T C_i ds`.
pub fn gramian_attitude(
    traj: &TrueTrajectory,
    cfg: &MeasurementConfig,
    window: &Window,
    mu: f64,
) -> Result<GramianReport> {
    let grid = WindowGrid::build(traj, cfg, window)?;
    Ok(GramianReport::new(
        "attitude_gramian",
        *window,
        to_dmatrix(&grid.w3()),
        mu,
    ))
}

/// Gramian of the full attitude-and-bias error system.
pub fn gramian_full(
    traj: &TrueTrajectory,
    cfg: &MeasurementConfig,
    window: &Window,
    mu: f64,
) -> Result<FullGramian> {
    let grid = WindowGrid::build(traj, cfg, window)?;
    Ok(full_from_grid(&grid, window, mu))
}

fn full_from_grid(grid: &WindowGrid, window: &Window, mu: f64) -> FullGramian {
    let (w3, m, h) = (grid.w3(), grid.m_block(), grid.h_block());
    let mut w = DMatrix::zeros(6, 6);
    w.view_mut((0, 0), (3, 3)).copy_from(&w3);
    w.view_mut((0, 3), (3, 3)).copy_from(&m);
    w.view_mut((3, 0), (3, 3)).copy_from(&m.transpose());
    w.view_mut((3, 3), (3, 3)).copy_from(&h);
    let report = GramianReport::new("full_gramian", *window, w, mu);
    // report.w is symmetrized; keep the blocks consistent with it
    let w3 = report.w.fixed_view::<3, 3>(0, 0).into_owned();
    let h = report.w.fixed_view::<3, 3>(3, 3).into_owned();
    FullGramian { report, w3, m, h }
}

/// Excitation classes of a direction signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeClass {
    Strong,
    Weak,
    None,
}

impl PeClass {
    /// True for `Weak` or `Strong`.
    pub fn at_least_weak(self) -> bool {
        self != PeClass::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PEClassification {
    pub u: Mat3,
    /// Ascending.
    pub eigenvalues: [f64; 3],
    pub class: PeClass,
    pub beta: f64,
}

/// Averaged outer product `(1/δ) ∫ α α^T ds` of a unit-vector series and its class.
pub fn pe_classify(alpha: &VectorSeries, window: &Window, beta: f64) -> Result<PEClassification> {
    pe_classify_with(|s| alpha.sample_unit(s), window, beta)
}

fn pe_classify_with(
    alpha: impl Fn(f64) -> Result<Vec3>,
    window: &Window,
    beta: f64,
) -> Result<PEClassification> {
    window.validate()?;
    let (nodes, weights) = window.nodes();
    let mut u = Mat3::zeros();
    for (s, w) in nodes.iter().zip(&weights) {
        let a = alpha(*s)?;
        u += a * a.transpose() * *w;
    }
    let u = (u + u.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(u).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let eigenvalues = [ev[0], ev[1], ev[2]];
    let class = if eigenvalues[0] >= beta {
        PeClass::Strong
    } else if eigenvalues[1] >= beta {
        PeClass::Weak
    } else {
        PeClass::None
    };
    Ok(PEClassification {
        u,
        eigenvalues,
        class,
        beta,
    })
}

/// Bias-subsystem Gramian built from `C_i (X(s) − ρ)` with `ρ = W3^{-1} M`.
///
/// Fails with [`Error::AttitudeGramianSingular`] when the attitude Gramian does not exceed `mu`.
pub fn bias_observability(
    traj: &TrueTrajectory,
    cfg: &MeasurementConfig,
    window: &Window,
    mu: f64,
) -> Result<GramianReport> {
    let grid = WindowGrid::build(traj, cfg, window)?;
    let (report, _) = bias_report(&grid, window, mu)?;
    Ok(report)
}

fn bias_report(grid: &WindowGrid, window: &Window, mu: f64) -> Result<(GramianReport, Mat3)> {
    let w3 = grid.w3();
    let attitude = GramianReport::new("attitude_gramian", *window, to_dmatrix(&w3), mu);
    if !attitude.verdict.passed() {
        return Err(Error::AttitudeGramianSingular {
            lambda_min: attitude.lambda_min,
        });
    }
    let w3_inv = w3
        .cholesky()
        .ok_or(Error::AttitudeGramianSingular {
            lambda_min: attitude.lambda_min,
        })?
        .inverse();
    let rho = w3_inv * grid.m_block();
    let wb = grid.bias_gramian(&rho);
    Ok((
        GramianReport::new("bias_gramian", *window, to_dmatrix(&wb), mu),
        wb,
    ))
}

/// Outcome of comparing the bias-subsystem Gramian against the Schur complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurReport {
    /// `|W_bias − (H − M^T W3^{-1} M)| / |H|` in the Frobenius norm.
    pub residual: f64,
    pub det_full: f64,
    pub det_attitude: f64,
    pub det_schur: f64,
    /// `|det_full − det_attitude · det_schur| / |det_full|`.
    pub det_relative_error: f64,
}

/// Checks that the bias-subsystem Gramian equals the Schur complement of the full Gramian.
pub fn schur_check(
    traj: &TrueTrajectory,
    cfg: &MeasurementConfig,
    window: &Window,
) -> Result<SchurReport> {
    let grid = WindowGrid::build(traj, cfg, window)?;
    schur_from_grid(&grid, window)
}

fn schur_from_grid(grid: &WindowGrid, window: &Window) -> Result<SchurReport> {
    let full = full_from_grid(grid, window, 0.0);
    let (_, wb) = bias_report(grid, window, 0.0)?;
    let w3_inv = full
        .w3
        .cholesky()
        .ok_or(Error::AttitudeGramianSingular { lambda_min: 0.0 })?
        .inverse();
    let schur = full.h - full.m.transpose() * w3_inv * full.m;
    let schur = (schur + schur.transpose()) * 0.5;
    let h_norm = full.h.norm();
    let residual = if h_norm > 0.0 {
        (wb - schur).norm() / h_norm
    } else {
        (wb - schur).norm()
    };
    let det_full = full.report.w.determinant();
    let det_attitude = full.w3.determinant();
    let det_schur = schur.determinant();
    let det_relative_error = if det_full != 0.0 {
        (det_full - det_attitude * det_schur).abs() / det_full.abs()
    } else {
        (det_attitude * det_schur).abs()
    };
    Ok(SchurReport {
        residual,
        det_full,
        det_attitude,
        det_schur,
        det_relative_error,
    })
}

/// Angular-velocity excitation `λ_min((1/δ) ∫ skew(Ω)^T skew(Ω) ds) > mu`.
pub fn omega_excitation_check(
    traj: &TrueTrajectory,
    window: &Window,
    mu: f64,
) -> Result<GramianReport> {
    window.validate()?;
    traj.check_coverage(window.t, window.end())?;
    let (nodes, weights) = window.nodes();
    let mut n = Mat3::zeros();
    for (s, w) in nodes.iter().zip(&weights) {
        let k = skew(&traj.omega_at(*s)?);
        n += k.transpose() * k * *w;
    }
    Ok(GramianReport::new(
        "omega_excitation",
        *window,
        to_dmatrix(&n),
        mu,
    ))
}

/// Channel layouts covered by the sufficient conditions for constant directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantLayout {
    /// Two channels with non-collinear `b_1`, `b_2`.
    TwoChannels,
    /// Three channels with `b_1 = b_2` and `b_3` non-collinear to it.
    ThreeChannels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubcaseResult {
    /// `1.i`, `1.ii`, `1.iii`, `2.i` or `2.i*`.
    pub name: String,
    pub certified: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantDirectionReport {
    pub window: Window,
    pub layout: ConstantLayout,
    pub pe: Vec<PEClassification>,
    /// Windowed integrals of squared determinants, in the order the sub-cases list them.
    pub det_integrals: Vec<f64>,
    pub subcases: Vec<SubcaseResult>,
    /// First certifying sub-case, if any.
    pub certified_by: Option<String>,
    /// λ_min of the attitude Gramian, reported for cross-checking.
    pub gramian_lambda_min: f64,
    pub thresholds: Thresholds,
}

impl ConstantDirectionReport {
    pub fn certified(&self) -> bool {
        self.certified_by.is_some()
    }

    pub fn summary(&self) -> ConditionSummary {
        ConditionSummary {
            condition: "constant_direction_cases".into(),
            window: self.window,
            lambda_min: self.gramian_lambda_min,
            lambda_max: f64::NAN,
            threshold: self.thresholds.delta1,
            verdict: if self.certified() {
                Verdict::Observable
            } else {
                Verdict::NotObservable
            },
            subcase: self.certified_by.clone(),
        }
    }
}

const COLLINEAR_TOL: f64 = 1e-9;
const STATIC_TOL: f64 = 1e-9;

fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    a.dot(&b.cross(c))
}

/// Sufficient conditions for attitude observability with constant `a_i`, `b_i`.
pub fn constant_direction_check(
    traj: &TrueTrajectory,
    cfg: &MeasurementConfig,
    window: &Window,
    thresholds: &Thresholds,
) -> Result<ConstantDirectionReport> {
    let dirs: Vec<(Vec3, Vec3)> = cfg
        .channels()
        .iter()
        .map(|ch| ch.b.as_constant().map(|b| (ch.a, b)))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Invalid("sufficient conditions need constant b_i".into()))?;
    let layout = match dirs.len() {
        2 if dirs[0].1.cross(&dirs[1].1).norm() > COLLINEAR_TOL => ConstantLayout::TwoChannels,
        3 if (dirs[0].1 - dirs[1].1).norm() <= COLLINEAR_TOL
            && dirs[0].1.cross(&dirs[2].1).norm() > COLLINEAR_TOL =>
        {
            ConstantLayout::ThreeChannels
        }
        m => {
            return Err(Error::Invalid(format!(
                "configuration with {m} channels does not match a supported layout \
                 (two channels with non-collinear b, or three with b1 = b2 and b3 non-collinear)"
            )))
        }
    };

    let grid = WindowGrid::build(traj, cfg, window)?;
    let attitude = GramianReport::new("attitude_gramian", *window, to_dmatrix(&grid.w3()), 0.0);

    let rot = |s: f64| traj.rotation_at(s);
    let pe = dirs
        .iter()
        .map(|(a, _)| pe_classify_with(|s| Ok(rot(s)?.rotate(a)), window, thresholds.beta))
        .collect::<Result<Vec<_>>>()?;

    let (nodes, weights) = window.nodes();
    let integral = |f: &dyn Fn(&Rotation) -> f64| -> Result<f64> {
        let mut acc = 0.0;
        for (s, w) in nodes.iter().zip(&weights) {
            let d = f(&rot(*s)?);
            acc += d * d * w * window.delta;
        }
        Ok(acc)
    };

    let d1 = thresholds.delta1;
    let mut subcases = Vec::new();
    let det_integrals;
    match layout {
        ConstantLayout::TwoChannels => {
            let (b1, b2) = (dirs[0].1, dirs[1].1);
            let i1 = integral(&|r| det3(&r.rotate(&dirs[0].0), &b1, &b2))?;
            let i2 = integral(&|r| det3(&r.rotate(&dirs[1].0), &b1, &b2))?;
            det_integrals = vec![i1, i2];
            let strong = [
                pe[0].class == PeClass::Strong,
                pe[1].class == PeClass::Strong,
            ];
            subcases.push(SubcaseResult {
                name: "1.i".into(),
                certified: strong[0] && strong[1],
                detail: format!(
                    "lambda_1 of U(R a_1), U(R a_2) = {:.3e}, {:.3e} vs beta {:.1e}",
                    pe[0].eigenvalues[0], pe[1].eigenvalues[0], thresholds.beta
                ),
            });
            let ii = (strong[0] && i2 > d1) || (strong[1] && i1 > d1);
            subcases.push(SubcaseResult {
                name: "1.ii".into(),
                certified: ii,
                detail: format!(
                    "one strongly exciting axis plus the other's determinant integral \
                     ({i1:.3e}, {i2:.3e}) vs delta_1 {d1:.1e}"
                ),
            });
            let weak = pe[0].class.at_least_weak() && pe[1].class.at_least_weak();
            subcases.push(SubcaseResult {
                name: "1.iii".into(),
                certified: weak && i1 > d1 && i2 > d1,
                detail: format!(
                    "certified per stated determinant conditions plus weak excitation; \
                     direct Gramian lambda_min = {:.3e}",
                    attitude.lambda_min
                ),
            });
        }
        ConstantLayout::ThreeChannels => {
            let (bb1, bb2) = (dirs[0].1, dirs[2].1);
            let (a1, a2, a3) = (dirs[0].0, dirs[1].0, dirs[2].0);
            let f18 = |r: &Rotation| det3(&r.rotate(&a1), &r.rotate(&a2), &bb1);
            let f19 = |r: &Rotation| det3(&r.rotate(&a3), &bb1, &bb2);
            let i18 = integral(&f18)?;
            let i19 = integral(&f19)?;
            det_integrals = vec![i18, i19];
            subcases.push(SubcaseResult {
                name: "2.i".into(),
                certified: i18 > d1 && i19 > d1,
                detail: format!("determinant integrals {i18:.3e}, {i19:.3e} vs delta_1 {d1:.1e}"),
            });
            let r0 = rot(window.t)?;
            let mut is_static = true;
            for s in &nodes {
                if angular_distance(&r0, &rot(*s)?) > STATIC_TOL {
                    is_static = false;
                    break;
                }
            }
            let (p18, p19) = (f18(&r0), f19(&r0));
            subcases.push(SubcaseResult {
                name: "2.i*".into(),
                certified: is_static
                    && p18.abs() > thresholds.det_tol
                    && p19.abs() > thresholds.det_tol,
                detail: if is_static {
                    format!("constant attitude, determinants {p18:.6}, {p19:.6}")
                } else {
                    "attitude varies over the window; constant-attitude case does not apply".into()
                },
            });
        }
    }
    let certified_by = subcases
        .iter()
        .find(|c| c.certified)
        .map(|c| c.name.clone());
    Ok(ConstantDirectionReport {
        window: *window,
        layout,
        pe,
        det_integrals,
        subcases,
        certified_by,
        gramian_lambda_min: attitude.lambda_min,
        thresholds: *thresholds,
    })
}

/// Every applicable condition over one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowAnalysis {
    pub window: Window,
    pub conditions: Vec<ConditionSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schur: Option<SchurReport>,
}

/// Evaluates the attitude, full, bias and angular-velocity conditions, plus the
/// constant-direction cases when the configuration matches one.
pub fn analyze_window(
    traj: &TrueTrajectory,
    cfg: &MeasurementConfig,
    window: &Window,
    thresholds: &Thresholds,
) -> Result<WindowAnalysis> {
    let grid = WindowGrid::build(traj, cfg, window)?;
    let mu = thresholds.mu;
    let attitude = GramianReport::new("attitude_gramian", *window, to_dmatrix(&grid.w3()), mu);
    let full = full_from_grid(&grid, window, mu);
    let mut conditions = vec![attitude.summary(), full.report.summary()];
    let mut schur = None;
    match bias_report(&grid, window, mu) {
        Ok((bias, _)) => {
            conditions.push(bias.summary());
            schur = Some(schur_from_grid(&grid, window)?);
        }
        Err(Error::AttitudeGramianSingular { lambda_min }) => conditions.push(ConditionSummary {
            condition: "bias_gramian".into(),
            window: *window,
            lambda_min: f64::NAN,
            lambda_max: f64::NAN,
            threshold: mu,
            verdict: Verdict::NotObservable,
            subcase: Some(format!(
                "attitude Gramian singular (lambda_min {lambda_min:.3e})"
            )),
        }),
        Err(e) => return Err(e),
    }
    conditions.push(omega_excitation_check(traj, window, mu)?.summary());
    if let Ok(c1) = constant_direction_check(traj, cfg, window, thresholds) {
        conditions.push(c1.summary());
    }
    Ok(WindowAnalysis {
        window: *window,
        conditions,
        schur,
    })
}

/// Window start times `start, start + stride, ...` whose windows fit inside the trajectory.
pub fn sweep_windows(
    traj: &TrueTrajectory,
    delta: f64,
    stride: f64,
    n_quad: usize,
) -> Result<Vec<Window>> {
    if stride.is_nan() || stride <= 0.0 {
        return Err(Error::Invalid(format!(
            "sweep stride must be > 0, got {stride}"
        )));
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = traj.start() + stride * k as f64;
        if t + delta > traj.end() + 1e-9 {
            break;
        }
        out.push(Window::with_quadrature(t, delta, n_quad)?);
        k += 1;
    }
    if out.is_empty() {
        return Err(Error::Invalid(format!(
            "trajectory of {:.3} s is shorter than the window of {delta} s",
            traj.end() - traj.start()
        )));
    }
    Ok(out)
}
