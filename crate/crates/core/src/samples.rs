//! Fixed reference rigs used throughout the tests, the CLI and the docs.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{axis_angle, Camera, Intrinsics, StereoRig};

/// 640x480 camera with an 800 px focal length and a centered principal point.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics::new(800.0, 320.0, 240.0, 640, 480)
}

/// Two identical cameras one unit apart along x: already rectified.
pub fn frontoparallel_rig() -> StereoRig {
    let k = default_intrinsics();
    let cam1 = Camera::looking_from(&k, Matrix3::identity(), Vector3::zeros()).unwrap();
    let cam2 = Camera::looking_from(&k, Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)).unwrap();
    StereoRig::new(cam1, cam2).unwrap()
}

/// Camera 1 at the origin, camera 2 at `(1, 0, 0)` rotated 10 degrees about y
/// (verging toward camera 1).
pub fn verging_rig() -> StereoRig {
    let k = default_intrinsics();
    let cam1 = Camera::looking_from(&k, Matrix3::identity(), Vector3::zeros()).unwrap();
    let r2 = axis_angle(&Vector3::y(), 10f64.to_radians());
    let cam2 = Camera::looking_from(&k, r2, Vector3::new(1.0, 0.0, 0.0)).unwrap();
    StereoRig::new(cam1, cam2).unwrap()
}

/// Two cameras with identical intrinsics and orientation `r`, camera 2 offset
/// by `baseline` from a camera at the origin.
pub fn identical_rig(intrinsics: &Intrinsics, r: Matrix3<f64>, baseline: Vector3<f64>) -> StereoRig {
    let cam1 = Camera::looking_from(intrinsics, r, Vector3::zeros()).unwrap();
    let cam2 = Camera::looking_from(intrinsics, r, baseline).unwrap();
    StereoRig::new(cam1, cam2).unwrap()
}
