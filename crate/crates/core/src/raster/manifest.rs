//! Slide manifests: JSON index of the patch files making up one slide.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::pgm;
use crate::raster::tiling::{self, Patch, PatchGrid};
use crate::raster::LabelRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stain {
    Silver,
    Trichrome,
    #[default]
    Other,
}

impl fmt::Display for Stain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stain::Silver => "silver",
            Stain::Trichrome => "trichrome",
            Stain::Other => "other",
        })
    }
}

impl FromStr for Stain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "silver" => Ok(Stain::Silver),
            "trichrome" => Ok(Stain::Trichrome),
            "other" => Ok(Stain::Other),
            _ => Err(Error::Config(format!("unknown stain {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub row: usize,
    pub col: usize,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlideManifest {
    pub slide_id: String,
    #[serde(default)]
    pub stain: Stain,
    #[serde(flatten)]
    pub grid: PatchGrid,
    pub patches: Vec<PatchEntry>,
}

impl SlideManifest {
    /// Checks that the entries cover every grid cell exactly once.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let mut seen = BTreeSet::new();
        for e in &self.patches {
            if e.row >= self.grid.rows || e.col >= self.grid.cols {
                return Err(Error::Manifest(format!(
                    "{}: patch ({}, {}) outside {}x{} grid",
                    self.slide_id, e.row, e.col, self.grid.rows, self.grid.cols
                )));
            }
            if !seen.insert((e.row, e.col)) {
                return Err(Error::Manifest(format!(
                    "{}: duplicate patch ({}, {})",
                    self.slide_id, e.row, e.col
                )));
            }
        }
        if seen.len() != self.grid.len() {
            let (row, col) = self
                .grid
                .coords()
                .find(|rc| !seen.contains(rc))
                .expect("fewer entries than cells");
            return Err(Error::Manifest(format!(
                "{}: missing patch ({row}, {col})",
                self.slide_id
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SlideManifest> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: SlideManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads every patch, resolving relative paths against `base_dir`.
    /// The result is ordered by (row, col).
    pub fn read_patches(&self, base_dir: &Path) -> Result<Vec<Patch>> {
        self.validate()?;
        let mut patches = par::map(&self.patches, |e| {
            let path = if e.path.is_absolute() {
                e.path.clone()
            } else {
                base_dir.join(&e.path)
            };
            pgm::read_raster(&path).map(|raster| Patch {
                row: e.row,
                col: e.col,
                raster,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        patches.sort_by_key(|p| (p.row, p.col));
        // Size checks.
        tiling::order_patches(&self.grid, &patches, |p| (p.row, p.col, &p.raster))?;
        Ok(patches)
    }
}

pub fn patch_file_name(row: usize, col: usize) -> String {
    format!("patch_r{row:04}_c{col:04}.pgm")
}

/// Tiles `raster` into `out_dir` and writes `manifest.json` next to the
/// patch files. Returns the manifest.
pub fn write_tiled(
    raster: &LabelRaster,
    out_dir: &Path,
    slide_id: &str,
    stain: Stain,
    patch_size: usize,
) -> Result<SlideManifest> {
    let (grid, patches) = tiling::tile(raster, patch_size)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = par::map(&patches, |p| {
        let name = patch_file_name(p.row, p.col);
        pgm::write_raster(&p.raster, out_dir.join(&name))?;
        Ok(PatchEntry {
            row: p.row,
            col: p.col,
            path: PathBuf::from(name),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let manifest = SlideManifest {
        slide_id: slide_id.to_string(),
        stain,
        grid,
        patches: entries,
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_flat() {
        let m = SlideManifest {
            slide_id: "s1".into(),
            stain: Stain::Trichrome,
            grid: PatchGrid::new(10, 5, 8).unwrap(),
            patches: vec![
                PatchEntry { row: 0, col: 0, path: "a.pgm".into() },
                PatchEntry { row: 0, col: 1, path: "b.pgm".into() },
            ],
        };
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for key in ["slide_id", "stain", "patch_size", "rows", "cols", "slide_width", "slide_height", "patches"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["stain"], "trichrome");
        assert_eq!(serde_json::from_value::<SlideManifest>(v).unwrap(), m);
    }

    #[test]
    fn coverage_is_checked() {
        let mut m = SlideManifest {
            slide_id: "s".into(),
            stain: Stain::Silver,
            grid: PatchGrid::new(10, 5, 8).unwrap(),
            patches: vec![PatchEntry { row: 0, col: 0, path: "a".into() }],
        };
        assert!(m.validate().is_err());
        m.patches.push(PatchEntry { row: 0, col: 0, path: "b".into() });
        assert!(matches!(m.validate(), Err(Error::Manifest(s)) if s.contains("duplicate")));
        m.patches[1].col = 1;
        m.validate().unwrap();
        m.grid.rows = 2;
        assert!(m.validate().is_err());
    }
}
