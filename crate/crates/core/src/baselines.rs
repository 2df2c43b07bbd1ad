//! Reference methods the closed-form pipeline is checked against.
//!
//! * [`fusiello_rectify`] fixes the common orientation from camera 1 alone.
//! * [`scan_minimize`] and [`scan_full_line`] brute-force the distortion.
//! * [`degenerate_rig`] builds the configuration family on which
//!   initial-guess methods relying on positive-definite forms break down, and
//!   [`pd_probe`] detects that breakdown.
//! * [`stress`] runs everything on random rigs.

use std::time::Instant;

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::{moment_matrices, operand_matrices, DistortionOperands};
use crate::error::{Error, PipelineError, Result, Stage};
use crate::geometry::{axis_angle, skew, Camera, Intrinsics, StereoRig};
use crate::quartic::{quartic_coefficients, solve_quartic, Minimum};
use crate::rectify::{assemble, complete_rectification, CommonOrientation, RectifiedPair};
use crate::samples::default_intrinsics;

/// Minimum number of samples accepted by the scan oracles.
pub const MIN_SCAN_SAMPLES: usize = 1001;

/// Rectification whose z-axis is camera 1's optical axis made orthogonal to
/// the baseline.
pub fn fusiello_rectify(rig: &StereoRig) -> Result<RectifiedPair, PipelineError> {
    let x = rig.baseline_direction();
    let y = rig.cam1.optical_axis().cross(&x);
    if !(y.norm() > 1e-12) {
        return Err(PipelineError { stage: Stage::Orientation, source: Error::DegenerateOrientation });
    }
    let y = y.normalize();
    let z = x.cross(&y);
    complete_rectification(rig, &CommonOrientation::from_axes(&x, &z))
}

/// Dense scan of `[y_lo, y_hi]` followed by golden-section refinement.
pub fn scan_minimize(ops: &DistortionOperands, y_lo: f64, y_hi: f64, samples: usize) -> Result<Minimum> {
    if samples < MIN_SCAN_SAMPLES {
        return Err(Error::TooFewSamples(samples));
    }
    let step = (y_hi - y_lo) / (samples - 1) as f64;
    let ys: Vec<f64> = (0..samples).map(|i| y_lo + step * i as f64).collect();
    scan_points(ops, &ys)
}

/// Scan of the whole real line through `y = center + scale * tan(phi)` with
/// `phi` uniform on the open interval `(-pi/2, pi/2)`.
pub fn scan_full_line(ops: &DistortionOperands, center: f64, scale: f64, samples: usize) -> Result<Minimum> {
    if samples < MIN_SCAN_SAMPLES {
        return Err(Error::TooFewSamples(samples));
    }
    let half = std::f64::consts::FRAC_PI_2;
    let ys: Vec<f64> = (0..samples)
        .map(|i| {
            let phi = -half + std::f64::consts::PI * (i as f64 + 0.5) / samples as f64;
            center + scale * phi.tan()
        })
        .collect();
    scan_points(ops, &ys)
}

fn penalised(ops: &DistortionOperands, y: f64) -> f64 {
    ops.distortion_of_y(y).unwrap_or(f64::INFINITY)
}

/// Scan ascending `ys`, then refine between the neighbours of the best sample.
fn scan_points(ops: &DistortionOperands, ys: &[f64]) -> Result<Minimum> {
    let values: Vec<f64> = ys.par_iter().map(|&y| penalised(ops, y)).collect();
    let (best, &value) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::EmptyDomain)?;
    let lo = ys[best.saturating_sub(1)];
    let hi = ys[(best + 1).min(ys.len() - 1)];
    let refined = golden_section(|y| penalised(ops, y), lo, hi, 1e-10);
    let refined_value = penalised(ops, refined);
    Ok(if refined_value < value {
        Minimum { y1: refined, distortion: refined_value }
    } else {
        Minimum { y1: ys[best], distortion: value }
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tolerance: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (b - a).abs() <= tolerance || !(a < c && c < d && d < b) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Camera 1 at the origin with identity rotation; camera 2 rotated by
/// `theta_x` about the x-axis and placed at `(1, a, a tan(theta_x))`.
pub fn degenerate_rig(a: f64, theta_x: f64, intrinsics: &Intrinsics) -> Result<StereoRig> {
    let (s, c) = theta_x.sin_cos();
    let r2 = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c);
    let cam1 = Camera::looking_from(intrinsics, Matrix3::identity(), Vector3::zeros())?;
    let cam2 = Camera::looking_from(intrinsics, r2, Vector3::new(1.0, a, a * theta_x.tan()))?;
    StereoRig::new(cam1, cam2)
}

/// Produces the pair of 2x2 quadratic forms an initial-guess method needs to
/// be positive-definite.
pub trait FormBuilder: Sync {
    fn label(&self) -> &'static str;
    fn forms(&self, rig: &StereoRig) -> Result<(Matrix2<f64>, Matrix2<f64>)>;
}

/// Approximation of the forms of the Loop-Zhang initial guess: the upper-left
/// blocks of `[e1]x^T P1 P1^T [e1]x` and `F^T P2 P2^T F`, with `P P^T` the
/// pixel scatter matrix of each image.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoopZhangForms;

impl FormBuilder for LoopZhangForms {
    fn label(&self) -> &'static str {
        "loop-zhang-forms (approximation)"
    }

    fn forms(&self, rig: &StereoRig) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
        let f = *rig.fundamental_matrix()?.matrix();
        let (e1, _) = rig.epipoles()?;
        let ex = skew(e1.as_vector());
        let p1 = moment_matrices(rig.cam1.width(), rig.cam1.height())?.ppt;
        let p2 = moment_matrices(rig.cam2.width(), rig.cam2.height())?.ppt;
        let a = ex.transpose() * p1 * ex;
        let a_prime = f.transpose() * p2 * f;
        let block = |m: Matrix3<f64>| m.fixed_view::<2, 2>(0, 0).into_owned();
        Ok((block(a), block(a_prime)))
    }
}

/// Cholesky factorisation of a symmetric 2x2 matrix with pivots bounded away
/// from zero relative to the largest diagonal element.
pub fn is_positive_definite(m: &Matrix2<f64>) -> bool {
    let scale = m[(0, 0)].abs().max(m[(1, 1)].abs());
    if !(scale > 0.0) || !scale.is_finite() {
        return false;
    }
    let tol = 1e-12 * scale;
    let p1 = m[(0, 0)];
    if !(p1 > tol) {
        return false;
    }
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    m[(1, 1)] - off * off / p1 > tol
}

/// Whether both forms built by `builder` are positive-definite.
pub fn pd_probe_with(rig: &StereoRig, builder: &dyn FormBuilder) -> bool {
    builder.forms(rig).is_ok_and(|(a, a_prime)| is_positive_definite(&a) && is_positive_definite(&a_prime))
}

pub fn pd_probe(rig: &StereoRig) -> bool {
    pd_probe_with(rig, &LoopZhangForms)
}

/// Distribution of the baseline direction of sampled rigs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineLaw {
    /// Uniform direction on the unit sphere.
    UniformDirection,
    Fixed(Vector3<f64>),
}

/// Random rigs with fixed intrinsics: camera 1 at the origin with identity
/// rotation; camera 2 rotated by an angle-axis vector uniform in a ball and
/// offset by a unit baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigSampler {
    pub intrinsics: Intrinsics,
    /// Radius of the rotation ball, radians.
    pub max_angle: f64,
    pub baseline: BaselineLaw,
}

impl Default for RigSampler {
    fn default() -> Self {
        Self {
            intrinsics: default_intrinsics(),
            max_angle: 60f64.to_radians(),
            baseline: BaselineLaw::UniformDirection,
        }
    }
}

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

impl RigSampler {
    pub fn sample(&self, rng: &mut impl Rng) -> Result<StereoRig> {
        let angle = self.max_angle * rng.random::<f64>().cbrt();
        let axis = unit_vector(rng);
        let rotation = axis_angle(&axis, angle);
        let baseline = match self.baseline {
            BaselineLaw::UniformDirection => unit_vector(rng),
            BaselineLaw::Fixed(b) => b,
        };
        let cam1 = Camera::looking_from(&self.intrinsics, Matrix3::identity(), Vector3::zeros())?;
        let cam2 = Camera::looking_from(&self.intrinsics, rotation, baseline)?;
        StereoRig::new(cam1, cam2)
    }

    /// Rig for trial `index` of a run seeded with `seed`.
    pub fn sample_trial(&self, seed: u64, index: u64) -> Result<StereoRig> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.sample(&mut rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressConfig {
    pub sampler: RigSampler,
    /// Samples of the full-line scan oracle; 0 disables it.
    pub scan_samples: usize,
    /// Record wall-clock timings. Timings make reports non-reproducible.
    pub timings: bool,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self { sampler: RigSampler::default(), scan_samples: 20_001, timings: true }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self { min: v[0], median, max: v[n - 1] })
    }
}

/// Mean wall-clock time per trial, milliseconds.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Timings {
    pub direct_ms: f64,
    pub fusiello_ms: f64,
    pub scan_ms: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrialFailure {
    pub trial: u64,
    pub method: &'static str,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StressReport {
    pub trials: u64,
    pub seed: u64,
    pub direct_successes: u64,
    /// Trials on which the positive-definiteness probe failed.
    pub baseline_failures: u64,
    pub pd_probe_builder: &'static str,
    pub fusiello_failures: u64,
    /// Trials with `distortion(direct) > distortion(fusiello) + 1e-9 (1 + distortion(fusiello))`.
    pub fusiello_dominance_violations: u64,
    /// Trials with `distortion(direct) > scan + 1e-9 (1 + scan)`.
    pub scan_dominance_violations: u64,
    /// `distortion(fusiello) / distortion(direct)`.
    pub distortion_ratios: Option<Summary>,
    /// `distortion(scan) / distortion(direct)`.
    pub scan_ratios: Option<Summary>,
    /// Histogram of deduplicated real stationary points, indexed by count.
    pub stationary_points: [u64; 5],
    pub failures: Vec<TrialFailure>,
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, Default)]
struct Trial {
    direct: Option<f64>,
    fusiello: Option<f64>,
    scan: Option<f64>,
    pd_ok: bool,
    stationary: Option<usize>,
    failures: Vec<TrialFailure>,
    times: [f64; 3],
}

/// `1 + 1e-9` relative slack with an absolute floor at zero distortion.
pub fn dominates(direct: f64, other: f64) -> bool {
    direct <= other + 1e-9 * (1.0 + other.abs())
}

/// Distortions at or below this are treated as zero when forming ratios.
pub const NEGLIGIBLE_DISTORTION: f64 = 1e-18;

fn ratio(num: f64, den: f64) -> f64 {
    if num.abs() <= NEGLIGIBLE_DISTORTION && den.abs() <= NEGLIGIBLE_DISTORTION {
        1.0
    } else {
        num / den
    }
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn run_trial(config: &StressConfig, seed: u64, index: u64) -> Trial {
    let mut trial = Trial::default();
    let rig = match config.sampler.sample_trial(seed, index) {
        Ok(rig) => rig,
        Err(e) => {
            trial.failures.push(trial_failure(index, "sampler", e.to_string()));
            return trial;
        }
    };

    let t = Instant::now();
    let direct = assemble(&rig);
    trial.times[0] = millis(t);
    match direct {
        Ok(pair) => trial.direct = Some(pair.distortion),
        Err(e) => trial.failures.push(trial_failure(index, "direct", e.to_string())),
    }

    let t = Instant::now();
    let fus = fusiello_rectify(&rig);
    trial.times[1] = millis(t);
    match fus {
        Ok(pair) => trial.fusiello = Some(pair.distortion),
        Err(e) => trial.failures.push(trial_failure(index, "fusiello", e.to_string())),
    }

    let problem = operand_matrices(&rig).and_then(|ops| quartic_coefficients(&ops));
    if let Ok(q) = problem {
        if let (false, Ok(roots)) = (q.degenerate, solve_quartic(&q)) {
            trial.stationary = Some(roots.len());
        }
    }

    if config.scan_samples > 0 {
        let t = Instant::now();
        let scan = operand_matrices(&rig).and_then(|ops| {
            let h = f64::from(rig.cam1.height());
            scan_full_line(&ops, 0.5 * (h - 1.0), h, config.scan_samples)
        });
        trial.times[2] = millis(t);
        match scan {
            Ok(m) => trial.scan = Some(m.distortion),
            Err(e) => trial.failures.push(trial_failure(index, "scan", e.to_string())),
        }
    }

    trial.pd_ok = pd_probe(&rig);
    trial
}

fn trial_failure(trial: u64, method: &'static str, error: String) -> TrialFailure {
    TrialFailure { trial, method, error }
}

/// Trials run in parallel; aggregation is by trial index, so the report
/// depends only on `trials`, `seed` and `config` (timings aside).
pub fn stress(trials: u64, seed: u64, config: &StressConfig) -> StressReport {
    let results: Vec<Trial> = (0..trials).into_par_iter().map(|i| run_trial(config, seed, i)).collect();

    let mut report = StressReport {
        trials,
        seed,
        direct_successes: 0,
        baseline_failures: 0,
        pd_probe_builder: LoopZhangForms.label(),
        fusiello_failures: 0,
        fusiello_dominance_violations: 0,
        scan_dominance_violations: 0,
        distortion_ratios: None,
        scan_ratios: None,
        stationary_points: [0; 5],
        failures: Vec::new(),
        timings: None,
    };
    let mut fus_ratios = Vec::new();
    let mut scan_ratios = Vec::new();
    let mut totals = [0.0; 3];
    for t in &results {
        report.failures.extend(t.failures.iter().cloned());
        if !t.pd_ok {
            report.baseline_failures += 1;
        }
        if t.fusiello.is_none() {
            report.fusiello_failures += 1;
        }
        if let Some(n) = t.stationary {
            report.stationary_points[n.min(4)] += 1;
        }
        for (acc, v) in totals.iter_mut().zip(t.times) {
            *acc += v;
        }
        let Some(direct) = t.direct else { continue };
        report.direct_successes += 1;
        if let Some(f) = t.fusiello {
            fus_ratios.push(ratio(f, direct));
            if !dominates(direct, f) {
                report.fusiello_dominance_violations += 1;
            }
        }
        if let Some(s) = t.scan {
            scan_ratios.push(ratio(s, direct));
            if !dominates(direct, s) {
                report.scan_dominance_violations += 1;
            }
        }
    }
    report.distortion_ratios = Summary::of(&fus_ratios);
    report.scan_ratios = Summary::of(&scan_ratios);
    if config.timings && trials > 0 {
        let n = trials as f64;
        report.timings = Some(Timings { direct_ms: totals[0] / n, fusiello_ms: totals[1] / n, scan_ms: totals[2] / n });
    }
    report
}
