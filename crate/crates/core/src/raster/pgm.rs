//! Binary PGM (P5) codec, 8-bit only.
//!
//! Label rasters are written with maxval 255 and one byte per pixel whose
//! value is the class code. Masks use the same container with 0/255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, LabelRaster};

/// A decoded 8-bit gray image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u8>,
}

pub fn encode(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    debug_assert_eq!(data.len(), width * height);
    let header = format!("P5\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(data);
    out
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.is_empty() {
        return Err(Error::Parse("empty file".into()));
    }
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    if magic != b"P5" {
        return Err(Error::Parse(format!(
            "bad magic {:?}, expected P5",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!(
            "maxval {maxval} unsupported, only 8-bit PGM (maxval 1..=255) is accepted"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::Parse("missing whitespace after maxval".into())),
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse(format!("{width}x{height} overflows")))?;
    let data = &bytes[cursor.pos..];
    if data.len() != expected {
        return Err(Error::Parse(format!(
            "{width}x{height} image needs {expected} data bytes, found {}",
            data.len()
        )));
    }
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        data: data.to_vec(),
    })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::Parse(format!("bad {what} {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

pub fn raster_to_bytes(raster: &LabelRaster) -> Vec<u8> {
    encode(raster.width(), raster.height(), &raster.codes())
}

pub fn raster_from_bytes(bytes: &[u8]) -> Result<LabelRaster> {
    let img = decode(bytes)?;
    LabelRaster::from_codes(img.width, img.height, &img.data)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<LabelRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    raster_from_bytes(&bytes).map_err(|e| with_path(e, path))
}

pub fn write_raster(raster: &LabelRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, raster_to_bytes(raster)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = decode(&bytes).map_err(|e| with_path(e, path))?;
    BinaryMask::from_gray(img.width, img.height, &img.data)
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(mask.width(), mask.height(), &mask.to_gray()))
        .map_err(|e| Error::io(path, e))
}

/// Prefixes parse and format errors with the file they came from.
pub fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Format { pixel_index, value } => Error::Parse(format!(
            "{}: pixel {pixel_index} has value {value}, expected a class code in 0..=6",
            path.display()
        )),
        other => other,
    }
}
