//! Perspective-distortion metric.
//!
//! For a homography whose last row is `w = (w_a, w_b, 1)`, the distortion over
//! an image is the Rayleigh quotient `w^T (P P^T) w / w^T (P_c P_c^T) w`, where
//! `P P^T` is the scatter of the pixel grid about its mean `p_c`. Restricting
//! `w` to the rectifying family turns the two-image sum into a rational
//! function of the single scalar `y1`, the y-intercept on image 1 of the
//! epipolar line chosen as rectified horizon.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::StereoRig;

/// Half-width of the excluded interval around each pole of the distortion,
/// relative to `1 + |pole|`.
pub const POLE_EXCLUSION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrices {
    /// Scatter `sum (p - p_c)(p - p_c)^T` over the pixel grid.
    pub ppt: Matrix3<f64>,
    /// Mean outer product `p_c p_c^T`.
    pub pcpct: Matrix3<f64>,
    pub width: u32,
    pub height: u32,
}

pub fn moment_matrices(width: u32, height: u32) -> Result<MomentMatrices> {
    if width < 2 || height < 2 {
        return Err(Error::BadDimensions { width, height });
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let ppt = Matrix3::from_diagonal(&Vector3::new(w * w - 1.0, h * h - 1.0, 0.0)) * (w * h / 12.0);
    let pc = image_center(width, height);
    Ok(MomentMatrices { ppt, pcpct: pc * pc.transpose(), width, height })
}

/// Mean pixel position `((w-1)/2, (h-1)/2, 1)`.
pub fn image_center(width: u32, height: u32) -> Vector3<f64> {
    Vector3::new((f64::from(width) - 1.0) / 2.0, (f64::from(height) - 1.0) / 2.0, 1.0)
}

/// Perspective row `(w_a, w_b, 1)` of a homography scaled by its last element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WVector(Vector3<f64>);

impl WVector {
    /// Rescale `v` to third component 1.
    pub fn normalized(v: &Vector3<f64>) -> Option<Self> {
        if !(v.z.abs() > 1e-12 * v.norm()) {
            return None;
        }
        Some(Self(v / v.z))
    }

    pub fn new(wa: f64, wb: f64) -> Self {
        Self(Vector3::new(wa, wb, 1.0))
    }

    pub fn wa(&self) -> f64 {
        self.0.x
    }

    pub fn wb(&self) -> f64 {
        self.0.y
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Perspective rows of both rectifying homographies at one `y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerspectivePair {
    pub w1: WVector,
    pub w2: WVector,
    /// `L1 (0, y1, 1)^T` before rescaling.
    pub raw1: Vector3<f64>,
    /// `L2 (0, y1, 1)^T` before rescaling.
    pub raw2: Vector3<f64>,
}

/// Matrices reducing the distortion to a function of `y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionOperands {
    pub l1: Matrix3<f64>,
    pub l2: Matrix3<f64>,
    pub m1: Matrix3<f64>,
    pub m2: Matrix3<f64>,
    pub c1: Matrix3<f64>,
    pub c2: Matrix3<f64>,
    /// Square roots `N_i` with `N_i^T N_i = M_i`, used to evaluate the
    /// numerators as sums of squares.
    pub n1: Matrix3<f64>,
    pub n2: Matrix3<f64>,
}

/// `I - x x^T` for the unit baseline direction `x`.
pub fn baseline_projector(rig: &StereoRig) -> Matrix3<f64> {
    let x = rig.baseline_direction();
    Matrix3::identity() - x * x.transpose()
}

pub fn operand_matrices(rig: &StereoRig) -> Result<DistortionOperands> {
    let inv1 = rig.cam1.inverse_projection_rotation()?;
    let inv2 = rig.cam2.inverse_projection_rotation()?;
    let proj = baseline_projector(rig);
    let l1 = inv1.transpose() * proj * inv1;
    let l2 = inv2.transpose() * proj * inv1;
    let mm1 = moment_matrices(rig.cam1.width(), rig.cam1.height())?;
    let mm2 = moment_matrices(rig.cam2.width(), rig.cam2.height())?;
    let sandwich = |l: &Matrix3<f64>, m: &Matrix3<f64>| symmetrize(&(l.transpose() * m * l));
    // L^T p_c p_c^T L formed as an outer product stays exactly rank one.
    let outer = |l: &Matrix3<f64>, mm: &MomentMatrices| {
        let g = l.transpose() * image_center(mm.width, mm.height);
        g * g.transpose()
    };
    Ok(DistortionOperands {
        l1,
        l2,
        m1: sandwich(&l1, &mm1.ppt),
        m2: sandwich(&l2, &mm2.ppt),
        c1: outer(&l1, &mm1),
        c2: outer(&l2, &mm2),
        n1: diagonal_sqrt(&mm1.ppt) * l1,
        n2: diagonal_sqrt(&mm2.ppt) * l2,
    })
}

fn diagonal_sqrt(d: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_diagonal(&d.diagonal().map(f64::sqrt))
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

impl DistortionOperands {
    pub fn w_from_y(&self, y1: f64) -> Result<PerspectivePair> {
        let v = Vector3::new(0.0, y1, 1.0);
        let raw1 = self.l1 * v;
        let raw2 = self.l2 * v;
        let w1 = WVector::normalized(&raw1).ok_or(Error::PoleAtY(y1))?;
        let w2 = WVector::normalized(&raw2).ok_or(Error::PoleAtY(y1))?;
        Ok(PerspectivePair { w1, w2, raw1, raw2 })
    }

    /// Roots of the two denominators, `y = -[C_i]_23 / [C_i]_22`.
    ///
    /// `C_i` has rank one, so each denominator is `[C_i]_22 (y - pole_i)^2`.
    pub fn poles(&self) -> [f64; 2] {
        [-self.c1[(1, 2)] / self.c1[(1, 1)], -self.c2[(1, 2)] / self.c2[(1, 1)]]
    }

    /// Whether `y1` lies outside both pole-exclusion intervals.
    pub fn is_admissible(&self, y1: f64) -> bool {
        y1.is_finite()
            && self.poles().iter().all(|p| !p.is_finite() || (y1 - p).abs() > POLE_EXCLUSION * (1.0 + p.abs()))
    }

    /// Two-term distortion as a function of `y1`.
    pub fn distortion_of_y(&self, y1: f64) -> Result<f64> {
        if !self.is_admissible(y1) {
            return Err(Error::PoleAtY(y1));
        }
        let poles = self.poles();
        let v = Vector3::new(0.0, y1, 1.0);
        let term = |n: &Matrix3<f64>, c: &Matrix3<f64>, pole: f64| {
            let den = c[(1, 1)] * (y1 - pole) * (y1 - pole);
            if den > 0.0 {
                Ok((n * v).norm_squared() / den)
            } else {
                Err(Error::PoleAtY(y1))
            }
        };
        Ok(term(&self.n1, &self.c1, poles[0])? + term(&self.n2, &self.c2, poles[1])?)
    }
}

/// Distortion contributed by one image.
pub fn image_distortion(w: &Vector3<f64>, moments: &MomentMatrices) -> Result<f64> {
    let num = w.dot(&(moments.ppt * w));
    let pc = image_center(moments.width, moments.height);
    let den = w.dot(&pc).powi(2);
    if !(den > 1e-15 * pc.norm_squared() * w.norm_squared()) {
        return Err(Error::DegenerateCenter);
    }
    Ok(num / den)
}

/// Distortion of a homography pair given their perspective rows.
///
/// Each term is homogeneous of degree zero, so `w1` and `w2` need not be
/// normalised.
pub fn distortion_of_w(w1: &Vector3<f64>, w2: &Vector3<f64>, m1: &MomentMatrices, m2: &MomentMatrices) -> Result<f64> {
    Ok(image_distortion(w1, m1)? + image_distortion(w2, m2)?)
}

/// Reference evaluation by explicit summation over the pixel grid:
/// `sum_i (w^T (p_i - p_c))^2 / (w^T p_c)^2`. O(width * height).
pub fn pixel_sum_distortion(w: &Vector3<f64>, width: u32, height: u32) -> Result<f64> {
    if width < 2 || height < 2 {
        return Err(Error::BadDimensions { width, height });
    }
    let pc = image_center(width, height);
    let den = w.dot(&pc);
    if !(den * den > 1e-15 * pc.norm_squared() * w.norm_squared()) {
        return Err(Error::DegenerateCenter);
    }
    let mut sum = 0.0;
    for y in 0..height {
        let mut row = 0.0;
        for x in 0..width {
            let d = w.x * (f64::from(x) - pc.x) + w.y * (f64::from(y) - pc.y);
            row += d * d;
        }
        sum += row;
    }
    Ok(sum / (den * den))
}
