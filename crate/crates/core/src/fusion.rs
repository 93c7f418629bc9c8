//! Fusion of per-class binary masks into a single label raster.
//!
//! Each segmentation model contributes binary masks for the classes it
//! owns. Where masks overlap, the class ranked highest in the
//! [`PrecedenceOrder`] wins; uncovered pixels stay Background.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{pgm, BinaryMask, ClassCounts, ClassId, LabelRaster, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSource {
    pub class: ClassId,
    pub mask: BinaryMask,
}

/// Tissue classes ordered from highest to lowest precedence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassId>", into = "Vec<ClassId>")]
pub struct PrecedenceOrder {
    order: Vec<ClassId>,
    /// rank[code] = position in `order`; Background is ranked last.
    rank: [u8; NUM_CLASSES],
}

impl PrecedenceOrder {
    pub fn new(order: Vec<ClassId>) -> Result<PrecedenceOrder> {
        let mut rank = [u8::MAX; NUM_CLASSES];
        for (i, &class) in order.iter().enumerate() {
            if class == ClassId::Background {
                return Err(Error::Config("precedence order cannot contain background".into()));
            }
            if rank[class.index()] != u8::MAX {
                return Err(Error::Config(format!("{class} appears twice in precedence order")));
            }
            rank[class.index()] = i as u8;
        }
        if let Some(missing) = ClassId::TISSUE.iter().find(|c| rank[c.index()] == u8::MAX) {
            return Err(Error::Config(format!("precedence order is missing {missing}")));
        }
        Ok(PrecedenceOrder { order, rank })
    }

    /// Position of `class`, 0 being the highest precedence.
    pub fn rank(&self, class: ClassId) -> u8 {
        self.rank[class.index()]
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.order
    }

    pub fn parse_list(s: &str) -> Result<PrecedenceOrder> {
        let classes = s
            .split(|c: char| c == ',' || c == '>' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<ClassId>>>()?;
        PrecedenceOrder::new(classes)
    }
}

impl Default for PrecedenceOrder {
    /// GS > FC > TA > IF > Glomerulus > Tubule: lesions override the
    /// compartments they occur in.
    fn default() -> Self {
        PrecedenceOrder::new(vec![
            ClassId::Gs,
            ClassId::Fc,
            ClassId::Ta,
            ClassId::If,
            ClassId::Glomerulus,
            ClassId::Tubule,
        ])
        .expect("default order is complete")
    }
}

impl TryFrom<Vec<ClassId>> for PrecedenceOrder {
    type Error = Error;

    fn try_from(v: Vec<ClassId>) -> Result<Self> {
        PrecedenceOrder::new(v)
    }
}

impl From<PrecedenceOrder> for Vec<ClassId> {
    fn from(p: PrecedenceOrder) -> Self {
        p.order
    }
}

/// Fuses `sources` into a `width`×`height` label raster.
pub fn fuse(
    width: usize,
    height: usize,
    sources: &[MaskSource],
    order: &PrecedenceOrder,
) -> Result<LabelRaster> {
    check_shapes(width, height, sources)?;
    let mut out = LabelRaster::new(width, height);
    if width == 0 {
        return Ok(out);
    }
    // Scanning sources by descending precedence lets the first hit win.
    let mut ranked: Vec<&MaskSource> = sources
        .iter()
        .filter(|s| s.class != ClassId::Background)
        .collect();
    ranked.sort_by_key(|s| order.rank(s.class));
    par::for_each_chunk(out.pixels_mut(), width, |row, dst| {
        let start = row * width;
        for (col, px) in dst.iter_mut().enumerate() {
            if let Some(s) = ranked.iter().find(|s| s.mask.pixels()[start + col]) {
                *px = s.class;
            }
        }
    });
    Ok(out)
}

fn check_shapes(width: usize, height: usize, sources: &[MaskSource]) -> Result<()> {
    for s in sources {
        if s.mask.width() != width || s.mask.height() != height {
            return Err(Error::Shape(format!(
                "{} mask is {}x{}, target is {width}x{height}",
                s.class,
                s.mask.width(),
                s.mask.height()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCount {
    pub winner: ClassId,
    pub loser: ClassId,
    pub pixels: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionReport {
    pub width: usize,
    pub height: usize,
    pub class_counts: BTreeMap<ClassId, u64>,
    /// Pixels claimed by two different classes, keyed by the precedence
    /// pair that resolved them. Only non-zero pairs are listed.
    pub resolved_overlaps: Vec<OverlapCount>,
}

/// Summarizes a fused raster: per-class pixel counts and, for every pair
/// of classes whose masks overlap, how many pixels precedence resolved.
pub fn validate_fusion(raster: &LabelRaster, sources: &[MaskSource], order: &PrecedenceOrder) -> FusionReport {
    let counts: ClassCounts = raster.class_counts();
    let mut pair = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    let n = raster.len();
    let mut covering: Vec<ClassId> = Vec::with_capacity(NUM_CLASSES);
    for i in 0..n {
        covering.clear();
        for s in sources {
            if s.class != ClassId::Background
                && s.mask.pixels().get(i).copied().unwrap_or(false)
                && !covering.contains(&s.class)
            {
                covering.push(s.class);
            }
        }
        for (a, &ca) in covering.iter().enumerate() {
            for &cb in &covering[a + 1..] {
                let (w, l) = if order.rank(ca) < order.rank(cb) { (ca, cb) } else { (cb, ca) };
                pair[w.index()][l.index()] += 1;
            }
        }
    }
    let mut resolved_overlaps = Vec::new();
    for &winner in order.classes() {
        for &loser in order.classes() {
            let pixels = pair[winner.index()][loser.index()];
            if pixels > 0 {
                resolved_overlaps.push(OverlapCount { winner, loser, pixels });
            }
        }
    }
    FusionReport {
        width: raster.width(),
        height: raster.height(),
        class_counts: ClassId::ALL.iter().map(|&c| (c, counts[c.index()])).collect(),
        resolved_overlaps,
    }
}

/// On-disk fusion job: masks as 0/255 PGM files plus the precedence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSpec {
    #[serde(default = "PrecedenceOrder::default")]
    pub order: PrecedenceOrder,
    pub sources: Vec<FusionSourceEntry>,
    /// Needed only when `sources` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSourceEntry {
    pub class: ClassId,
    pub path: PathBuf,
}

impl FusionSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<FusionSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Reads the masks (relative paths resolve against `base_dir`) and fuses
    /// them.
    pub fn run(&self, base_dir: &Path) -> Result<(LabelRaster, Vec<MaskSource>)> {
        let sources = par::map(&self.sources, |e| {
            let path = if e.path.is_absolute() { e.path.clone() } else { base_dir.join(&e.path) };
            pgm::read_mask(&path).map(|mask| MaskSource { class: e.class, mask })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (width, height) = match (sources.first(), self.width, self.height) {
            (Some(s), _, _) => (s.mask.width(), s.mask.height()),
            (None, Some(w), Some(h)) => (w, h),
            (None, _, _) => {
                return Err(Error::Input("fusion spec without sources must give width and height".into()))
            }
        };
        let raster = fuse(width, height, &sources, &self.order)?;
        Ok((raster, sources))
    }
}
