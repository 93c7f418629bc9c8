//! Label rasters: the per-pixel class maps every other stage consumes.
//!
//! A [`LabelRaster`] stores one [`ClassId`] per pixel in row-major order.
//! Rasters are exchanged as 8-bit binary PGM files whose gray values are
//! the class codes (see [`pgm`]) and are cut into fixed-size patches for
//! per-patch processing (see [`tiling`]).

pub mod manifest;
pub mod pgm;
pub mod tiling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{PatchEntry, SlideManifest, Stain};
pub use tiling::{stitch, tile, Patch, PatchGrid, DEFAULT_PATCH_SIZE};

/// Number of distinct class codes, Background included.
pub const NUM_CLASSES: usize = 7;

/// Per-class pixel counts indexed by class code.
pub type ClassCounts = [u64; NUM_CLASSES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum ClassId {
    #[default]
    Background = 0,
    Glomerulus = 1,
    Tubule = 2,
    /// Globally sclerotic glomerulus.
    Gs = 3,
    /// Fibrous crescent.
    Fc = 4,
    /// Interstitial fibrosis.
    If = 5,
    /// Tubular atrophy.
    Ta = 6,
}

impl ClassId {
    pub const ALL: [ClassId; NUM_CLASSES] = [
        ClassId::Background,
        ClassId::Glomerulus,
        ClassId::Tubule,
        ClassId::Gs,
        ClassId::Fc,
        ClassId::If,
        ClassId::Ta,
    ];

    /// The six tissue classes, in code order.
    pub const TISSUE: [ClassId; NUM_CLASSES - 1] = [
        ClassId::Glomerulus,
        ClassId::Tubule,
        ClassId::Gs,
        ClassId::Fc,
        ClassId::If,
        ClassId::Ta,
    ];

    pub fn from_code(code: u8) -> Option<ClassId> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Background => "background",
            ClassId::Glomerulus => "glomerulus",
            ClassId::Tubule => "tubule",
            ClassId::Gs => "gs",
            ClassId::Fc => "fc",
            ClassId::If => "if",
            ClassId::Ta => "ta",
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        ClassId::ALL
            .into_iter()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::Config(format!("unknown class name {s:?}")))
    }
}

/// A set of tissue classes. Background can never be a member, so padding
/// and unlabelled pixels are never treated as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ClassSet(u8);

impl ClassSet {
    pub fn new(classes: impl IntoIterator<Item = ClassId>) -> Result<ClassSet> {
        let mut bits = 0u8;
        for class in classes {
            if class == ClassId::Background {
                return Err(Error::Config("background cannot be part of a class group".into()));
            }
            bits |= 1 << class.code();
        }
        if bits == 0 {
            return Err(Error::Config("class group is empty".into()));
        }
        Ok(ClassSet(bits))
    }

    /// Glomerulus, GS and FC: every pixel that belongs to a glomerular object.
    pub fn glomerular() -> ClassSet {
        ClassSet((1 << 1) | (1 << 3) | (1 << 4))
    }

    /// All six tissue classes.
    pub fn tissue() -> ClassSet {
        ClassSet(0b0111_1110)
    }

    #[inline]
    pub fn contains(self, class: ClassId) -> bool {
        self.0 & (1 << class.code()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = ClassId> {
        ClassId::TISSUE.into_iter().filter(move |c| self.contains(*c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelRaster {
    width: usize,
    height: usize,
    data: Vec<ClassId>,
}

impl LabelRaster {
    /// An all-Background raster.
    pub fn new(width: usize, height: usize) -> LabelRaster {
        LabelRaster {
            width,
            height,
            data: vec![ClassId::Background; width * height],
        }
    }

    pub fn from_classes(width: usize, height: usize, data: Vec<ClassId>) -> Result<LabelRaster> {
        check_len(width, height, data.len())?;
        Ok(LabelRaster { width, height, data })
    }

    /// Builds a raster from raw codes, rejecting the first code outside 0..=6.
    pub fn from_codes(width: usize, height: usize, codes: &[u8]) -> Result<LabelRaster> {
        check_len(width, height, codes.len())?;
        let data = codes
            .iter()
            .enumerate()
            .map(|(pixel_index, &value)| {
                ClassId::from_code(value).ok_or(Error::Format { pixel_index, value })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelRaster { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[ClassId] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [ClassId] {
        &mut self.data
    }

    pub fn row(&self, row: usize) -> &[ClassId] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> ClassId {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, class: ClassId) {
        self.data[row * self.width + col] = class;
    }

    pub fn codes(&self) -> Vec<u8> {
        self.data.iter().map(|c| c.code()).collect()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = [0u64; NUM_CLASSES];
        for &c in &self.data {
            counts[c.index()] += 1;
        }
        counts
    }

    /// Binary mask of the pixels whose class is `class`.
    pub fn mask_of(&self, class: ClassId) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&c| c == class).collect(),
        }
    }
}

/// A binary foreground mask, as produced by a per-class segmentation model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> BinaryMask {
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_bools(width: usize, height: usize, data: Vec<bool>) -> Result<BinaryMask> {
        check_len(width, height, data.len())?;
        Ok(BinaryMask { width, height, data })
    }

    /// Any nonzero gray value is foreground.
    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Result<BinaryMask> {
        check_len(width, height, gray.len())?;
        Ok(BinaryMask {
            width,
            height,
            data: gray.iter().map(|&v| v != 0).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> u64 {
        self.data.iter().filter(|&&b| b).count() as u64
    }

    /// Gray rendering with foreground at 255.
    pub fn to_gray(&self) -> Vec<u8> {
        self.data.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Dimension(format!("{width}x{height} overflows")))?;
    if expected != len {
        return Err(Error::Dimension(format!(
            "{width}x{height} raster needs {expected} pixels, got {len}"
        )));
    }
    Ok(())
}
