//! Pinhole cameras, stereo rigs and their epipolar geometry.
//!
//! Conventions: `R` maps world coordinates into camera coordinates, so a world
//! point `X` projects to `A (R X + t)`. Pixel `(0, 0)` has its center at the
//! image-coordinate origin.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Largest condition number accepted when inverting `A R`.
pub const MAX_CONDITION: f64 = 1e12;

/// Intrinsic matrix together with the pixel dimensions of the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub a: Matrix3<f64>,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// Square pixels, zero skew, principal point `(cx, cy)`.
    pub fn new(focal: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self { a: Matrix3::new(focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0), width, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    a: Matrix3<f64>,
    r: Matrix3<f64>,
    t: Vector3<f64>,
    width: u32,
    height: u32,
}

impl Camera {
    pub fn new(a: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>, width: u32, height: u32) -> Result<Self> {
        let all_finite = a.iter().chain(r.iter()).chain(t.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidCamera("non-finite entry".into()));
        }
        let lower = [a[(1, 0)], a[(2, 0)], a[(2, 1)]];
        if lower.iter().any(|v| v.abs() > 1e-12 * a[(0, 0)].abs().max(1.0)) {
            return Err(Error::InvalidCamera("A is not upper-triangular".into()));
        }
        if a[(0, 0)] <= 0.0 || a[(1, 1)] <= 0.0 {
            return Err(Error::InvalidCamera("A must have positive focal entries".into()));
        }
        if (a[(2, 2)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCamera("A[3,3] must be 1".into()));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).norm();
        if ortho > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCamera("R is not a rotation".into()));
        }
        if width < 2 || height < 2 {
            return Err(Error::InvalidCamera(format!("image must be at least 2x2, got {width}x{height}")));
        }
        Ok(Self { a, r, t, width, height })
    }

    /// Camera whose optical center sits at `center` in world coordinates.
    pub fn looking_from(intrinsics: &Intrinsics, r: Matrix3<f64>, center: Vector3<f64>) -> Result<Self> {
        Self::new(intrinsics.a, r, -(r * center), intrinsics.width, intrinsics.height)
    }

    pub fn intrinsic(&self) -> &Matrix3<f64> {
        &self.a
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics { a: self.a, width: self.width, height: self.height }
    }

    /// `A R`, the linear part of the projection.
    pub fn projection_rotation(&self) -> Matrix3<f64> {
        self.a * self.r
    }

    /// `(A R)^-1`, guarded by [`MAX_CONDITION`].
    pub fn inverse_projection_rotation(&self) -> Result<Matrix3<f64>> {
        checked_inverse(&self.projection_rotation())
    }

    /// `-R^-1 t`.
    pub fn optical_center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    /// Camera z-axis expressed in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.r.row(2).transpose()
    }

    /// Depth of a world point along the optical axis.
    pub fn depth(&self, x: &Vector3<f64>) -> f64 {
        (self.r * x + self.t).z
    }

    pub fn project(&self, x: &Vector3<f64>) -> Result<Projection> {
        let cam = self.r * x + self.t;
        let point = HomogeneousPoint2::from_vector(self.a * cam)?;
        Ok(Projection { point, in_front: cam.z > 0.0 })
    }

    /// Direction, in world coordinates, of the ray through pixel `p`.
    pub fn ray_direction(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.inverse_projection_rotation()? * p)
    }
}

/// Result of [`Camera::project`]. Points behind the camera still project, but
/// are flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: HomogeneousPoint2,
    pub in_front: bool,
}

/// Projective image point. At least one component is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousPoint2 {
    v: Vector3<f64>,
}

impl HomogeneousPoint2 {
    pub fn new(x: f64, y: f64, w: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, w))
    }

    pub fn from_pixel(x: f64, y: f64) -> Self {
        Self { v: Vector3::new(x, y, 1.0) }
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        if v.iter().all(|c| *c == 0.0) {
            return Err(Error::AtOpticalCenter);
        }
        Ok(Self { v })
    }

    pub fn x(&self) -> f64 {
        self.v.x
    }

    pub fn y(&self) -> f64 {
        self.v.y
    }

    pub fn w(&self) -> f64 {
        self.v.z
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.v
    }

    /// Euclidean pixel coordinates, `None` for points at infinity.
    pub fn to_pixel(&self) -> Option<(f64, f64)> {
        if self.v.z == 0.0 {
            None
        } else {
            Some((self.v.x / self.v.z, self.v.y / self.v.z))
        }
    }
}

/// Two cameras with distinct optical centers. Camera 1 is the reference image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub cam1: Camera,
    pub cam2: Camera,
}

impl StereoRig {
    pub fn new(cam1: Camera, cam2: Camera) -> Result<Self> {
        let b = cam2.optical_center() - cam1.optical_center();
        if b.norm() <= 1e-12 {
            return Err(Error::ZeroBaseline(b.norm()));
        }
        Ok(Self { cam1, cam2 })
    }

    /// `o2 - o1`.
    pub fn baseline(&self) -> Vector3<f64> {
        self.cam2.optical_center() - self.cam1.optical_center()
    }

    /// Unit vector along the baseline.
    pub fn baseline_direction(&self) -> Vector3<f64> {
        self.baseline().normalize()
    }

    /// The pair `(G, H)` where `G = A2 R2 b` and `H = A2 R2 (A1 R1)^-1`.
    ///
    /// `H` maps camera-1 image coordinates into camera-2 image coordinates for
    /// points at infinity; `G` is the (unnormalised) second epipole. The
    /// fundamental matrix is `[G]_x H`.
    pub fn epipolar_factors(&self) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let p2 = self.cam2.projection_rotation();
        let p1_inv = self.cam1.inverse_projection_rotation()?;
        // Only the conditioning of A2 R2 matters here; the inverse is unused.
        checked_inverse(&p2)?;
        Ok((p2 * self.baseline(), p2 * p1_inv))
    }

    pub fn fundamental_matrix(&self) -> Result<FundamentalMatrix> {
        let (g, h) = self.epipolar_factors()?;
        let rows =
            [g[1] * h.row(2) - g[2] * h.row(1), g[2] * h.row(0) - g[0] * h.row(2), g[0] * h.row(1) - g[1] * h.row(0)];
        Ok(FundamentalMatrix { f: normalize_scale_sign(&Matrix3::from_rows(&rows)) })
    }

    /// Unit-norm epipoles `(e1, e2)`: `e1 ∝ A1 R1 b` and `e2 ∝ A2 R2 b`.
    pub fn epipoles(&self) -> Result<(HomogeneousPoint2, HomogeneousPoint2)> {
        let b = self.baseline();
        let e1 = (self.cam1.projection_rotation() * b).normalize();
        let (g, _) = self.epipolar_factors()?;
        Ok((HomogeneousPoint2 { v: e1 }, HomogeneousPoint2 { v: g.normalize() }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Point in image 1, line in image 2.
    OneToTwo,
    /// Point in image 2, line in image 1.
    TwoToOne,
}

/// Rank-2 fundamental matrix satisfying `p2^T F p1 = 0`. Stored with unit
/// Frobenius norm and a positive largest-magnitude entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    f: Matrix3<f64>,
}

impl FundamentalMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.f
    }

    pub fn epipolar_line(&self, p: &HomogeneousPoint2, direction: Direction) -> Vector3<f64> {
        match direction {
            Direction::OneToTwo => self.f * p.as_vector(),
            Direction::TwoToOne => self.f.transpose() * p.as_vector(),
        }
    }

    /// `p2^T F p1`.
    pub fn residual(&self, p1: &HomogeneousPoint2, p2: &HomogeneousPoint2) -> f64 {
        p2.as_vector().dot(&(self.f * p1.as_vector()))
    }
}

/// The fundamental matrix of a rectified pair: corresponding points share `y`.
pub fn rectified_fundamental() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

/// Divide by the Frobenius norm and flip the sign so that the first
/// largest-magnitude entry (row-major) is positive.
pub fn normalize_scale_sign(m: &Matrix3<f64>) -> Matrix3<f64> {
    let n = m.norm();
    if n == 0.0 {
        return *m;
    }
    let scaled = m / n;
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for r in 0..3 {
        for c in 0..3 {
            let v = scaled[(r, c)];
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
    }
    scaled * sign
}

/// Frobenius distance between two matrices after normalising both to unit norm,
/// minimised over the global sign (projective matrices are sign-free).
pub fn projective_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let a = a / a.norm();
    let b = b / b.norm();
    (a - b).norm().min((a + b).norm())
}

pub fn condition_number(m: &Matrix3<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn checked_inverse(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let cond = condition_number(m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularProjection(cond));
    }
    m.try_inverse().ok_or(Error::SingularProjection(cond))
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation by `angle` radians about the unit axis `axis` (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(&axis.normalize());
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}
