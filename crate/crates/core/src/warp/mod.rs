//! Raster images and homography warping.

pub mod pnm;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!("{} samples, expected {expected}", data.len())));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Black image.
    pub fn zeros(width: u32, height: u32, channels: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![0; width as usize * height as usize * channels as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels as usize]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: &[u8]) {
        let i = self.index(x, y);
        let c = self.channels as usize;
        self.data[i..i + c].copy_from_slice(&value[..c]);
    }

    /// Bilinear sample at `(x, y)` into `out`, with pixel centers on
    /// integers. Returns false outside `[0, width-1] x [0, height-1]`.
    pub fn sample(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        const EDGE: f64 = 1e-9;
        let (w, h) = (f64::from(self.width - 1), f64::from(self.height - 1));
        if !(x >= -EDGE && y >= -EDGE && x <= w + EDGE && y <= h + EDGE) {
            return false;
        }
        let (x, y) = (x.clamp(0.0, w), y.clamp(0.0, h));
        let (x0, y0) = (x.floor() as u32, y.floor() as u32);
        let (fx, fy) = (x - f64::from(x0), y - f64::from(y0));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let weights = [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (px, py, wt) in weights {
            if wt == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.pixel(px, py)) {
                *o += wt * f64::from(p);
            }
        }
        true
    }
}

/// Resample `img` onto an `out_w x out_h` canvas through `h`: output pixel
/// `q` takes the bilinear sample at `h^-1 q`, or black outside the source.
pub fn warp_image(img: &ImageBuffer, h: &Matrix3<f64>, out_w: u32, out_h: u32) -> Result<ImageBuffer> {
    let inv = h.try_inverse().filter(|m| m.iter().all(|v| v.is_finite())).ok_or(Error::SingularHomography)?;
    let mut out = ImageBuffer::zeros(out_w, out_h, img.channels)?;
    let c = img.channels as usize;
    let row_len = out_w as usize * c;
    out.data.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
        let mut acc = [0.0; 3];
        for x in 0..out_w as usize {
            let q = inv * Vector3::new(x as f64, y as f64, 1.0);
            if q.z == 0.0 {
                continue;
            }
            if img.sample(q.x / q.z, q.y / q.z, &mut acc[..c]) {
                for (k, v) in acc[..c].iter().enumerate() {
                    row[x * c + k] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    });
    Ok(out)
}
