//! Synthetic stereo scene: a checkerboard plane with colored disk markers,
//! ray-cast into both cameras of a seeded, mildly non-rectified rig.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{axis_angle, Camera, StereoRig};
use crate::samples::default_intrinsics;
use crate::warp::ImageBuffer;

/// Marker colors, one disk each.
pub const MARKER_COLORS: [[u8; 3]; 6] =
    [[230, 20, 20], [20, 200, 20], [20, 40, 230], [230, 220, 20], [20, 210, 220], [220, 20, 220]];

const DARK: [u8; 3] = [35, 35, 35];
const LIGHT: [u8; 3] = [215, 215, 215];
const BACKGROUND: [u8; 3] = [90, 90, 90];

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Plane `Z = depth` in world coordinates.
    pub depth: f64,
    pub square: f64,
    /// Board extent `[x_min, x_max, y_min, y_max]`.
    pub extent: [f64; 4],
    /// Disk centers `(X, Y)` on the plane.
    pub markers: [(f64, f64); 6],
    pub marker_radius: f64,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            depth: 6.0,
            square: 0.5,
            extent: [-5.0, 6.0, -4.0, 4.0],
            markers: [(-1.2, -0.9), (0.5, -1.1), (1.9, -0.8), (-1.0, 0.9), (0.6, 1.0), (2.0, 0.7)],
            marker_radius: 0.18,
        }
    }
}

impl Scene {
    fn color(&self, x: f64, y: f64) -> [u8; 3] {
        let [x0, x1, y0, y1] = self.extent;
        if !(x >= x0 && x <= x1 && y >= y0 && y <= y1) {
            return BACKGROUND;
        }
        for (&(mx, my), color) in self.markers.iter().zip(MARKER_COLORS) {
            if (x - mx).hypot(y - my) <= self.marker_radius {
                return color;
            }
        }
        let parity = ((x / self.square).floor() + (y / self.square).floor()) as i64;
        if parity.rem_euclid(2) == 0 {
            LIGHT
        } else {
            DARK
        }
    }

    /// Inner board corners, every square.
    pub fn corners(&self) -> Vec<Vector3<f64>> {
        let [x0, x1, y0, y1] = self.extent;
        let nx = ((x1 - x0) / self.square).round() as i64;
        let ny = ((y1 - y0) / self.square).round() as i64;
        (1..ny)
            .flat_map(|j| (1..nx).map(move |i| (i, j)))
            .map(|(i, j)| Vector3::new(x0 + i as f64 * self.square, y0 + j as f64 * self.square, self.depth))
            .collect()
    }

    fn marker_points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.markers.iter().map(|&(x, y)| Vector3::new(x, y, self.depth))
    }
}

/// Camera 1 at the origin; camera 2 about one unit to the right, rotated by
/// at most 4 degrees about a random axis.
pub fn synth_rig(seed: u64) -> Result<StereoRig> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = default_intrinsics();
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() > 1e-3 { axis.normalize() } else { Vector3::y() };
    let angle = rng.random_range(1.0f64..4.0).to_radians();
    let center = Vector3::new(1.0, rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08));
    let cam1 = Camera::looking_from(&k, Matrix3::identity(), Vector3::zeros())?;
    let cam2 = Camera::looking_from(&k, axis_angle(&axis, angle), center)?;
    StereoRig::new(cam1, cam2)
}

/// Ray-cast `scene` into `cam` with `supersample^2` samples per pixel.
pub fn render(cam: &Camera, scene: &Scene, supersample: u32) -> Result<ImageBuffer> {
    let inv = cam.inverse_projection_rotation()?;
    let origin = cam.optical_center();
    let (w, h) = (cam.width(), cam.height());
    let n = supersample.max(1);
    let mut data = vec![0u8; w as usize * h as usize * 3];
    data.par_chunks_mut(w as usize * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w as usize {
            let mut acc = [0u32; 3];
            for sy in 0..n {
                for sx in 0..n {
                    let px = x as f64 + (f64::from(sx) + 0.5) / f64::from(n) - 0.5;
                    let py = y as f64 + (f64::from(sy) + 0.5) / f64::from(n) - 0.5;
                    let d = inv * Vector3::new(px, py, 1.0);
                    let t = (scene.depth - origin.z) / d.z;
                    let color = if t > 0.0 {
                        let p = origin + d * t;
                        scene.color(p.x, p.y)
                    } else {
                        BACKGROUND
                    };
                    for (a, c) in acc.iter_mut().zip(color) {
                        *a += u32::from(c);
                    }
                }
            }
            let count = n * n;
            for (k, a) in acc.iter().enumerate() {
                row[x * 3 + k] = ((a + count / 2) / count) as u8;
            }
        }
    });
    ImageBuffer::new(w, h, 3, data)
}

/// Pixel positions `(x1, y1, x2, y2)` of board corners and marker centers
/// visible in both images.
pub fn correspondences(rig: &StereoRig, scene: &Scene) -> Vec<[f64; 4]> {
    let inside = |cam: &Camera, p: (f64, f64)| {
        p.0 >= 0.0 && p.1 >= 0.0 && p.0 <= f64::from(cam.width() - 1) && p.1 <= f64::from(cam.height() - 1)
    };
    scene
        .corners()
        .into_iter()
        .chain(scene.marker_points())
        .filter_map(|x| {
            let a = rig.cam1.project(&x).ok().filter(|p| p.in_front)?.point.to_pixel()?;
            let b = rig.cam2.project(&x).ok().filter(|p| p.in_front)?.point.to_pixel()?;
            (inside(&rig.cam1, a) && inside(&rig.cam2, b)).then_some([a.0, a.1, b.0, b.1])
        })
        .collect()
}

pub fn correspondences_csv(points: &[[f64; 4]]) -> String {
    let mut out = String::from("x1,y1,x2,y2\n");
    for [a, b, c, d] in points {
        writeln!(out, "{a},{b},{c},{d}").expect("writing to a String cannot fail");
    }
    out
}

/// Everything `synth` writes, in memory.
pub struct SynthOutput {
    pub rig: StereoRig,
    pub left: ImageBuffer,
    pub right: ImageBuffer,
    pub correspondences: Vec<[f64; 4]>,
}

pub fn generate(seed: u64) -> Result<SynthOutput> {
    let rig = synth_rig(seed)?;
    let scene = Scene::default();
    Ok(SynthOutput {
        left: render(&rig.cam1, &scene, 3)?,
        right: render(&rig.cam2, &scene, 3)?,
        correspondences: correspondences(&rig, &scene),
        rig,
    })
}

/// Centroid of the pixels within `tolerance` (per channel) of `color`, and
/// their count.
pub fn color_centroid(img: &ImageBuffer, color: [u8; 3], tolerance: u8) -> Option<((f64, f64), usize)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.pixel(x, y);
            if p.len() == 3 && p.iter().zip(color).all(|(&a, b)| a.abs_diff(b) <= tolerance) {
                sx += f64::from(x);
                sy += f64::from(y);
                n += 1;
            }
        }
    }
    (n > 0).then(|| ((sx / n as f64, sy / n as f64), n))
}
