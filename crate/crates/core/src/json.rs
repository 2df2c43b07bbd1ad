//! JSON file formats: calibration input, rectification output, and a writer
//! emitting every float with 17 significant digits.

use std::io;

use nalgebra::{Matrix3, Vector3};
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as DeriveSerialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::geometry::{Camera, StereoRig};
use crate::quartic::{QuarticProblem, RootSet};
use crate::rectify::RectifiedPair;

pub type Mat3 = [[f64; 3]; 3];

pub fn to_rows(m: &Matrix3<f64>) -> Mat3 {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

pub fn from_rows(rows: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

#[derive(Debug, Clone, PartialEq, DeriveSerialize, Deserialize)]
pub struct CameraFile {
    #[serde(rename = "A")]
    pub a: Mat3,
    #[serde(rename = "R")]
    pub r: Mat3,
    pub t: [f64; 3],
    pub width: u32,
    pub height: u32,
}

impl CameraFile {
    pub fn from_camera(cam: &Camera) -> Self {
        let t = cam.translation();
        Self {
            a: to_rows(cam.intrinsic()),
            r: to_rows(cam.rotation()),
            t: [t.x, t.y, t.z],
            width: cam.width(),
            height: cam.height(),
        }
    }

    pub fn to_camera(&self) -> Result<Camera> {
        let finite = self.a.iter().chain(&self.r).flatten().chain(&self.t).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidCamera("non-finite value".into()));
        }
        Camera::new(from_rows(&self.a), from_rows(&self.r), Vector3::from(self.t), self.width, self.height)
    }
}

/// Calibration file: `{"cam1": {...}, "cam2": {...}}`.
#[derive(Debug, Clone, PartialEq, DeriveSerialize, Deserialize)]
pub struct Calibration {
    pub cam1: CameraFile,
    pub cam2: CameraFile,
}

impl Calibration {
    pub fn from_rig(rig: &StereoRig) -> Self {
        Self { cam1: CameraFile::from_camera(&rig.cam1), cam2: CameraFile::from_camera(&rig.cam2) }
    }

    pub fn to_rig(&self) -> Result<StereoRig> {
        StereoRig::new(self.cam1.to_camera()?, self.cam2.to_camera()?)
    }
}

#[derive(Debug, Clone, PartialEq, DeriveSerialize, Deserialize)]
pub struct Components {
    pub w1: [f64; 2],
    pub w2: [f64; 2],
    pub shear1: [f64; 2],
    pub shear2: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, DeriveSerialize, Deserialize)]
pub struct QuarticDump {
    pub m: [f64; 8],
    pub coeffs: [f64; 5],
    pub roots: Vec<f64>,
}

impl QuarticDump {
    pub fn new(problem: &QuarticProblem, roots: &RootSet) -> Self {
        Self { m: problem.m, coeffs: problem.coeffs, roots: roots.values() }
    }
}

/// Output of `rectify`; the `H1`/`H2` keys double as the homography file
/// read by `evaluate` and `warp`.
#[derive(Debug, Clone, PartialEq, DeriveSerialize, Deserialize)]
pub struct RectificationFile {
    #[serde(rename = "H1")]
    pub h1: Mat3,
    #[serde(rename = "H2")]
    pub h2: Mat3,
    pub y1: f64,
    pub distortion: f64,
    pub components: Components,
    pub output_size: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quartic: Option<QuarticDump>,
}

impl RectificationFile {
    pub fn new(pair: &RectifiedPair) -> Self {
        Self {
            h1: to_rows(&pair.h1),
            h2: to_rows(&pair.h2),
            y1: pair.y1_star,
            distortion: pair.distortion,
            components: Components {
                w1: pair.w1,
                w2: pair.w2,
                shear1: [pair.shear1.sa, pair.shear1.sb],
                shear2: [pair.shear2.sa, pair.shear2.sb],
            },
            output_size: pair.fit.output_size,
            quartic: None,
        }
    }
}

/// Just the homographies (and optionally the canvas) of a homography file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct HomographyFile {
    #[serde(rename = "H1")]
    pub h1: Mat3,
    #[serde(rename = "H2")]
    pub h2: Mat3,
    #[serde(default)]
    pub output_size: Option<[u32; 2]>,
}

/// Pretty printer writing floats as `d.dddddddddddddddde±x`.
pub struct FixedFloatFormatter {
    pretty: PrettyFormatter<'static>,
}

impl Default for FixedFloatFormatter {
    fn default() -> Self {
        Self { pretty: PrettyFormatter::new() }
    }
}

impl Formatter for FixedFloatFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Serialize with [`FixedFloatFormatter`], newline-terminated.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloatFormatter::default());
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}
