//! Non-overlapping patch tiling and its inverse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{ClassId, LabelRaster};

pub const DEFAULT_PATCH_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub slide_width: usize,
    pub slide_height: usize,
}

impl PatchGrid {
    pub fn new(slide_width: usize, slide_height: usize, patch_size: usize) -> Result<PatchGrid> {
        if patch_size == 0 {
            return Err(Error::Dimension("patch size must be at least 1".into()));
        }
        if slide_width == 0 || slide_height == 0 {
            return Err(Error::Dimension(format!(
                "cannot tile a {slide_width}x{slide_height} raster"
            )));
        }
        Ok(PatchGrid {
            patch_size,
            rows: slide_height.div_ceil(patch_size),
            cols: slide_width.div_ceil(patch_size),
            slide_width,
            slide_height,
        })
    }

    /// Checks the stored row/col counts against the slide dimensions.
    pub fn validate(&self) -> Result<()> {
        let expected = PatchGrid::new(self.slide_width, self.slide_height, self.patch_size)
            .map_err(|e| Error::Manifest(e.to_string()))?;
        if expected != *self {
            return Err(Error::Manifest(format!(
                "grid {}x{} inconsistent with {}x{} slide at patch size {} (expected {}x{})",
                self.rows,
                self.cols,
                self.slide_width,
                self.slide_height,
                self.patch_size,
                expected.rows,
                expected.cols
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel offset (row, col) of a patch's top-left corner in the slide.
    pub fn origin(&self, row: usize, col: usize) -> (usize, usize) {
        (row * self.patch_size, col * self.patch_size)
    }

    /// Height and width of the part of a patch that lies inside the slide.
    pub fn valid_extent(&self, row: usize, col: usize) -> (usize, usize) {
        let (r0, c0) = self.origin(row, col);
        (
            self.patch_size.min(self.slide_height - r0),
            self.patch_size.min(self.slide_width - c0),
        )
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub raster: LabelRaster,
}

/// Cuts `raster` into `patch_size`-square patches in (row, col) order.
/// Patches on the right and bottom edges are padded with Background.
pub fn tile(raster: &LabelRaster, patch_size: usize) -> Result<(PatchGrid, Vec<Patch>)> {
    let grid = PatchGrid::new(raster.width(), raster.height(), patch_size)?;
    let coords: Vec<_> = grid.coords().collect();
    let patches = par::map(&coords, |&(row, col)| {
        let (r0, c0) = grid.origin(row, col);
        let (h, w) = grid.valid_extent(row, col);
        let mut data = vec![ClassId::Background; patch_size * patch_size];
        for r in 0..h {
            let src = &raster.row(r0 + r)[c0..c0 + w];
            data[r * patch_size..r * patch_size + w].copy_from_slice(src);
        }
        Patch {
            row,
            col,
            raster: LabelRaster::from_classes(patch_size, patch_size, data)
                .expect("patch buffer sized from grid"),
        }
    });
    Ok((grid, patches))
}

/// Checks that `patches` cover `grid` exactly once with correctly sized
/// rasters, and returns them ordered by (row, col).
pub fn order_patches<'a, P>(grid: &PatchGrid, patches: &'a [P], raster_of: impl Fn(&P) -> (usize, usize, &LabelRaster)) -> Result<Vec<&'a P>> {
    grid.validate()?;
    let mut by_coord: BTreeMap<(usize, usize), &P> = BTreeMap::new();
    for p in patches {
        let (row, col, r) = raster_of(p);
        if row >= grid.rows || col >= grid.cols {
            return Err(Error::Manifest(format!(
                "patch ({row}, {col}) outside {}x{} grid",
                grid.rows, grid.cols
            )));
        }
        if r.width() != grid.patch_size || r.height() != grid.patch_size {
            return Err(Error::Manifest(format!(
                "patch ({row}, {col}) is {}x{}, expected {}x{}",
                r.width(),
                r.height(),
                grid.patch_size,
                grid.patch_size
            )));
        }
        if by_coord.insert((row, col), p).is_some() {
            return Err(Error::Manifest(format!("duplicate patch ({row}, {col})")));
        }
    }
    if let Some((row, col)) = grid.coords().find(|rc| !by_coord.contains_key(rc)) {
        return Err(Error::Manifest(format!("missing patch ({row}, {col})")));
    }
    Ok(by_coord.into_values().collect())
}

/// Reassembles a slide from its patches, discarding padding.
pub fn stitch(grid: &PatchGrid, patches: &[Patch]) -> Result<LabelRaster> {
    let ordered = order_patches(grid, patches, |p| (p.row, p.col, &p.raster))?;
    let mut out = LabelRaster::new(grid.slide_width, grid.slide_height);
    let width = grid.slide_width;
    let ps = grid.patch_size;
    // One band of patch rows per chunk.
    par::for_each_chunk(out.pixels_mut(), width * ps, |band, dst| {
        for patch in &ordered[band * grid.cols..(band + 1) * grid.cols] {
            let (h, w) = grid.valid_extent(patch.row, patch.col);
            let (_, c0) = grid.origin(patch.row, patch.col);
            for r in 0..h {
                dst[r * width + c0..r * width + c0 + w]
                    .copy_from_slice(&patch.raster.row(r)[..w]);
            }
        }
    });
    Ok(out)
}
