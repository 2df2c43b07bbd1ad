//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::ImageBuffer;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}; only 255 is supported")]
    UnsupportedMaxval(u32),
    #[error("PNM data truncated: {got} of {expected} bytes")]
    Truncated { got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::MalformedHeader(format!("expected {what}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(PnmError::MalformedHeader("expected magic P5 or P6".into())),
    };
    let mut header = Header { bytes, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    if !bytes.get(header.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PnmError::MalformedHeader("missing whitespace after maxval".into()));
    }
    let data = &bytes[header.pos + 1..];
    let expected = width as usize * height as usize * channels as usize;
    if data.len() < expected {
        return Err(PnmError::Truncated { got: data.len(), expected });
    }
    ImageBuffer::new(width, height, channels, data[..expected].to_vec())
        .map_err(|e| PnmError::MalformedHeader(e.to_string()))
}

pub fn encode_pnm(img: &ImageBuffer) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<ImageBuffer, PnmError> {
    decode_pnm(&fs::read(path)?)
}

pub fn write_pnm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), PnmError> {
    Ok(fs::write(path, encode_pnm(img))?)
}
