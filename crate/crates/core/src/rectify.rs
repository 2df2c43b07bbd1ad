//! Assembly of the minimal-distortion rectifying homographies.
//!
//! Every rectifying pair has the form `H_i = K_i R_new (A_i R_i)^-1` where the
//! rows of `R_new` are a common orientation whose x-axis is the baseline and
//! `K_i` are affine. The perspective part depends only on the third row of
//! `R_new`, which is fixed by the horizon intercept `y1`. The affine part is a
//! per-image shear followed by a shared scale and offsets.

use nalgebra::{Matrix3, Vector3};
use twofloat::TwoFloat;

use crate::distortion::{distortion_of_w, moment_matrices, operand_matrices};
use crate::error::{Error, PipelineError, Result, Stage, StageExt};
use crate::geometry::{projective_distance, rectified_fundamental, StereoRig};
use crate::quartic::{quartic_coefficients, select_minimum, solve_quartic};

/// Orientation shared by both virtual cameras; rows are `x^T, y^T, z^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonOrientation {
    rnew: Matrix3<f64>,
}

impl CommonOrientation {
    /// Build from the x and z axes; `y = z × x`.
    pub fn from_axes(x: &Vector3<f64>, z: &Vector3<f64>) -> Self {
        let y = z.cross(x);
        Self { rnew: Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]) }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.rnew
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.rnew.row(0).transpose()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.rnew.row(2).transpose()
    }
}

/// Orientation whose z-axis points from camera 1 toward the horizon
/// intercept `(0, y1)`, orthogonalised against the baseline.
pub fn new_orientation(rig: &StereoRig, y1: f64) -> Result<CommonOrientation> {
    let cam = &rig.cam1;
    let x_hat = rig.baseline_direction();
    // Direction from o1 to the intercept; equal to R1^-1 (A1^-1 (0, y1, 1)^T - t1) - o1.
    let d = cam.ray_direction(&Vector3::new(0.0, y1, 1.0))?;
    let z = d - x_hat * x_hat.dot(&d);
    if !(z.norm() > 1e-12 * d.norm()) {
        return Err(Error::DegenerateZ);
    }
    let mut z_hat = z.normalize();
    if z_hat.dot(&cam.optical_axis()) < 0.0 {
        z_hat = -z_hat;
    }
    Ok(CommonOrientation::from_axes(&x_hat, &z_hat))
}

/// Shear `[[sa, sb, 0], [0, 1, 0], [0, 0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shear {
    pub sa: f64,
    pub sb: f64,
}

impl Shear {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.sa, self.sb, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    }
}

fn apply(h: &Matrix3<f64>, x: f64, y: f64) -> Option<(f64, f64)> {
    let p = h * Vector3::new(x, y, 1.0);
    let (u, v) = (p.x / p.z, p.y / p.z);
    (u.is_finite() && v.is_finite() && p.z.abs() > 1e-300).then_some((u, v))
}

/// Edge midpoints `a` (top), `b` (right), `c` (bottom), `d` (left).
fn midpoints(width: u32, height: u32) -> [(f64, f64); 4] {
    let (w, h) = (f64::from(width) - 1.0, f64::from(height) - 1.0);
    [(w / 2.0, 0.0), (w, h / 2.0), (w / 2.0, h), (0.0, h / 2.0)]
}

/// Shear restoring perpendicular midlines with aspect ratio `width / height`
/// after the (row-aligned) transform `hp`. The shear leaves rows unchanged.
pub fn shear_similarity(hp: &Matrix3<f64>, width: u32, height: u32) -> Result<Shear> {
    let mapped: Vec<(f64, f64)> = midpoints(width, height)
        .iter()
        .map(|&(x, y)| apply(hp, x, y).ok_or(Error::CollapsedMidlines))
        .collect::<Result<_>>()?;
    let [a, b, c, d] = [mapped[0], mapped[1], mapped[2], mapped[3]];
    let u = (b.0 - d.0, b.1 - d.1);
    let v = (c.0 - a.0, c.1 - a.1);
    let det = u.0 * v.1 - u.1 * v.0;
    let norms = u.0.hypot(u.1) * v.0.hypot(v.1);
    if !(det.abs() > 1e-12 * norms) {
        return Err(Error::CollapsedMidlines);
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let mut sa = (h * h * u.1 * u.1 + w * w * v.1 * v.1) / (h * w * (u.1 * v.0 - u.0 * v.1));
    let mut sb = (h * h * u.0 * u.1 + w * w * v.0 * v.1) / (h * w * det);
    if sa < 0.0 {
        sa = -sa;
        sb = -sb;
    }
    Ok(Shear { sa, sb })
}

/// Shared uniform scale and row offset plus per-image column offsets that
/// place both rectified images on a common canvas starting at `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFit {
    pub scale: f64,
    pub x_offsets: [f64; 2],
    pub y_offset: f64,
    /// Canvas `[width, height]`, identical for both images.
    pub output_size: [u32; 2],
}

impl JointFit {
    pub fn identity(size: [u32; 2]) -> Self {
        Self { scale: 1.0, x_offsets: [0.0; 2], y_offset: 0.0, output_size: size }
    }

    /// Affine correction for image `index` (0 or 1).
    pub fn matrix(&self, index: usize) -> Matrix3<f64> {
        let s = self.scale;
        Matrix3::new(s, 0.0, self.x_offsets[index], 0.0, s, self.y_offset, 0.0, 0.0, 1.0)
    }
}

fn corners(width: u32, height: u32) -> [(f64, f64); 4] {
    let (w, h) = (f64::from(width) - 1.0, f64::from(height) - 1.0);
    [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
}

fn shoelace(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    0.5 * twice.abs()
}

/// The scale preserves the total pixel area of the two images.
pub fn joint_fit(h1: &Matrix3<f64>, h2: &Matrix3<f64>, size1: (u32, u32), size2: (u32, u32)) -> JointFit {
    let mapped: [Vec<(f64, f64)>; 2] = [(h1, size1), (h2, size2)]
        .map(|(h, (w, ht))| corners(w, ht).iter().filter_map(|&(x, y)| apply(h, x, y)).collect());
    if mapped.iter().any(|m| m.is_empty()) {
        return JointFit::identity([size1.0.max(size2.0), size1.1.max(size2.1)]);
    }
    let original = [size1, size2].iter().map(|&(w, h)| (f64::from(w) - 1.0) * (f64::from(h) - 1.0)).sum::<f64>();
    let warped: f64 = mapped.iter().map(|m| shoelace(m)).sum();
    let scale = if warped > 0.0 && warped.is_finite() { (original / warped).sqrt() } else { 1.0 };

    let min_x = |m: &Vec<(f64, f64)>| m.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = |m: &Vec<(f64, f64)>| m.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = mapped.iter().flatten().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = mapped.iter().flatten().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let x_offsets = [-scale * min_x(&mapped[0]), -scale * min_x(&mapped[1])];
    let y_offset = -scale * min_y;

    let extent = |v: f64| ((v - 1e-9).ceil().max(0.0) as u32).saturating_add(1);
    let width = (0..2).map(|i| extent(scale * (max_x(&mapped[i]) - min_x(&mapped[i])))).max().unwrap_or(1);
    let height = extent(scale * (max_y - min_y));
    JointFit { scale, x_offsets, y_offset, output_size: [width, height] }
}

/// A rectifying homography pair and its decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifiedPair {
    pub h1: Matrix3<f64>,
    pub h2: Matrix3<f64>,
    pub orientation: CommonOrientation,
    /// `(w_a, w_b)` of each homography.
    pub w1: [f64; 2],
    pub w2: [f64; 2],
    pub shear1: Shear,
    pub shear2: Shear,
    pub fit: JointFit,
    /// Distortion of the pair. For [`assemble`] this is the minimised value
    /// evaluated at `y1_star`; otherwise it is evaluated on `h1` and `h2`.
    pub distortion: f64,
    /// Horizon intercept on image 1 of the chosen orientation.
    pub y1_star: f64,
}

impl RectifiedPair {
    pub fn homography(&self, index: usize) -> &Matrix3<f64> {
        if index == 0 {
            &self.h1
        } else {
            &self.h2
        }
    }

    /// Rectified pixel coordinates of `(x, y)` in image `index`.
    pub fn map_point(&self, index: usize, x: f64, y: f64) -> Option<(f64, f64)> {
        apply(self.homography(index), x, y)
    }

    /// Projective distance between `H2^-T F H1^-1` and the rectified form,
    /// evaluated in double-double.
    pub fn rectified_form_residual(&self, rig: &StereoRig) -> Result<f64> {
        let f = extend(rig.fundamental_matrix()?.matrix());
        let singular = |_| Error::SingularHomography;
        let h1_inv = extended_inverse(&extend(&self.h1)).map_err(singular)?;
        let h2_inv = extended_inverse(&extend(&self.h2)).map_err(singular)?;
        let rectified = round(&(h2_inv.transpose() * f * h1_inv));
        Ok(projective_distance(&rectified, &rectified_fundamental()))
    }
}

/// Turn a common orientation into the complete homography pair: base
/// transforms `R_new (A_i R_i)^-1`, per-image shear, joint fit, and
/// normalisation to unit last element.
pub fn complete_rectification(
    rig: &StereoRig,
    orientation: &CommonOrientation,
) -> Result<RectifiedPair, PipelineError> {
    let sizes = [(rig.cam1.width(), rig.cam1.height()), (rig.cam2.width(), rig.cam2.height())];
    let rnew = extended_orientation(rig, orientation);
    let base = [
        rnew * extended_inverse(&extend(&rig.cam1.projection_rotation())).stage(Stage::Orientation)?,
        rnew * extended_inverse(&extend(&rig.cam2.projection_rotation())).stage(Stage::Orientation)?,
    ];
    let shear1 = shear_similarity(&round(&base[0]), sizes[0].0, sizes[0].1).stage(Stage::Shear)?;
    let shear2 = shear_similarity(&round(&base[1]), sizes[1].0, sizes[1].1).stage(Stage::Shear)?;
    let pre = [extend(&shear1.matrix()) * base[0], extend(&shear2.matrix()) * base[1]];
    let fit = joint_fit(&round(&pre[0]), &round(&pre[1]), sizes[0], sizes[1]);

    let normalise = |h: Matrix3<TwoFloat>| -> Result<Matrix3<f64>, PipelineError> {
        let last = h[(2, 2)];
        if !(f64::from(last).abs() > 1e-12 * round(&h).norm()) {
            return Err(PipelineError { stage: Stage::Fit, source: Error::NonNormalisable });
        }
        Ok(round(&h.map(|v| v / last)))
    };
    let h1 = normalise(extend(&fit.matrix(0)) * pre[0])?;
    let h2 = normalise(extend(&fit.matrix(1)) * pre[1])?;

    let m1 = moment_matrices(sizes[0].0, sizes[0].1).stage(Stage::Operands)?;
    let m2 = moment_matrices(sizes[1].0, sizes[1].1).stage(Stage::Operands)?;
    let row3 = |h: &Matrix3<f64>| h.row(2).transpose();
    let distortion = distortion_of_w(&row3(&h1), &row3(&h2), &m1, &m2).stage(Stage::Fit)?;

    // Horizon: the image-1 line mapped to rectified row y = 0 of the base
    // transform, intersected with the left image border x = 0.
    let horizon = round(&base[0]).row(1).into_owned();
    let y1_star = -horizon[2] / horizon[1];

    Ok(RectifiedPair {
        h1,
        h2,
        orientation: CommonOrientation { rnew: round(&rnew) },
        w1: [h1[(2, 0)], h1[(2, 1)]],
        w2: [h2[(2, 0)], h2[(2, 1)]],
        shear1,
        shear2,
        fit,
        distortion,
        y1_star,
    })
}

fn extend(m: &Matrix3<f64>) -> Matrix3<TwoFloat> {
    m.map(TwoFloat::from)
}

fn round(m: &Matrix3<TwoFloat>) -> Matrix3<f64> {
    m.map(f64::from)
}

fn extended_inverse(m: &Matrix3<TwoFloat>) -> Result<Matrix3<TwoFloat>> {
    let cofactor = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    };
    let det = m[(0, 0)] * cofactor(0, 0) + m[(0, 1)] * cofactor(0, 1) + m[(0, 2)] * cofactor(0, 2);
    if !(f64::from(det).is_finite() && f64::from(det) != 0.0) {
        return Err(Error::SingularProjection(f64::from(det)));
    }
    Ok(Matrix3::from_fn(|i, j| cofactor(j, i) / det))
}

fn extended_unit(v: [TwoFloat; 3]) -> [TwoFloat; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

/// `orientation` in double-double. An x-axis that matches the baseline to
/// 1e-12 is replaced by the baseline recomputed from the camera poses, so
/// the second and third rows are orthogonal to it well below f64 resolution.
fn extended_orientation(rig: &StereoRig, orientation: &CommonOrientation) -> Matrix3<TwoFloat> {
    let center = |cam: &crate::geometry::Camera| {
        let (r, t) = (extend(cam.rotation()), cam.translation().map(TwoFloat::from));
        [0, 1, 2].map(|i| -(r[(0, i)] * t[0] + r[(1, i)] * t[1] + r[(2, i)] * t[2]))
    };
    let given = orientation.x_axis();
    let x = if 1.0 - given.dot(&rig.baseline_direction()) <= 1e-12 {
        let (o1, o2) = (center(&rig.cam1), center(&rig.cam2));
        extended_unit([0, 1, 2].map(|i| o2[i] - o1[i]))
    } else {
        extended_unit([given.x, given.y, given.z].map(TwoFloat::from))
    };
    let z0 = orientation.z_axis().map(TwoFloat::from);
    let along = x[0] * z0[0] + x[1] * z0[1] + x[2] * z0[2];
    let z = extended_unit([0, 1, 2].map(|i| z0[i] - along * x[i]));
    let y = [z[1] * x[2] - z[2] * x[1], z[2] * x[0] - z[0] * x[2], z[0] * x[1] - z[1] * x[0]];
    Matrix3::new(x[0], x[1], x[2], y[0], y[1], y[2], z[0], z[1], z[2])
}

/// Minimal-distortion rectification of a calibrated rig.
pub fn assemble(rig: &StereoRig) -> Result<RectifiedPair, PipelineError> {
    let ops = operand_matrices(rig).stage(Stage::Operands)?;
    let problem = quartic_coefficients(&ops).stage(Stage::Coefficients)?;
    let roots = solve_quartic(&problem).stage(Stage::Roots)?;
    let best = select_minimum(&ops, &problem, &roots).stage(Stage::Selection)?;
    let orientation = new_orientation(rig, best.y1).stage(Stage::Orientation)?;
    let mut pair = complete_rectification(rig, &orientation)?;
    pair.y1_star = best.y1;
    pair.distortion = best.distortion;
    Ok(pair)
}
