//! Connected-component analysis over label rasters.
//!
//! Components are maximal connected sets of pixels whose class belongs to a
//! [`ClassSet`]. Patches are labelled independently and then merged across
//! shared patch borders with a union-find, which yields exactly the
//! components of the stitched slide without ever materializing it.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::PrecedenceOrder;
use crate::par;
use crate::raster::tiling::{order_patches, Patch, PatchGrid};
use crate::raster::{ClassCounts, ClassId, ClassSet, LabelRaster, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::Config(format!("connectivity must be 4 or 8, got {v}"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BBox {
    fn point(row: usize, col: usize) -> BBox {
        BBox { min_row: row, min_col: col, max_row: row, max_col: col }
    }

    fn include(&mut self, row: usize, col: usize) {
        self.min_row = self.min_row.min(row);
        self.min_col = self.min_col.min(col);
        self.max_row = self.max_row.max(row);
        self.max_col = self.max_col.max(col);
    }

    fn union(&mut self, other: &BBox) {
        self.include(other.min_row, other.min_col);
        self.include(other.max_row, other.max_col);
    }

    fn offset(self, dr: usize, dc: usize) -> BBox {
        BBox {
            min_row: self.min_row + dr,
            min_col: self.min_col + dc,
            max_row: self.max_row + dr,
            max_col: self.max_col + dc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    /// 1-based, assigned in raster-scan order of `anchor`.
    pub id: u32,
    /// Majority class; ties go to the more severe class.
    pub class: ClassId,
    pub area: u64,
    pub bbox: BBox,
    /// First pixel of the component in raster-scan order, as (row, col).
    pub anchor: (usize, usize),
    pub class_histogram: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InstanceSet {
    pub width: usize,
    pub height: usize,
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn total_area(&self) -> u64 {
        self.instances.iter().map(|i| i.area).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,class,area,min_row,min_col,max_row,max_col\n");
        for i in &self.instances {
            let b = &i.bbox;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i.id, i.class, i.area, b.min_row, b.min_col, b.max_row, b.max_col
            )
            .expect("write to String");
        }
        out
    }
}

/// Majority class of a histogram; ties resolved by the default fusion
/// precedence (GS > FC > TA > IF > Glomerulus > Tubule).
pub fn dominant_class(histogram: &ClassCounts) -> ClassId {
    let order = PrecedenceOrder::default();
    order
        .classes()
        .iter()
        .copied()
        .fold(None::<ClassId>, |best, c| match best {
            Some(b) if histogram[b.index()] >= histogram[c.index()] => Some(b),
            _ if histogram[c.index()] > 0 => Some(c),
            _ => best,
        })
        .unwrap_or(ClassId::Background)
}

struct Labelling {
    labels: Vec<u32>,
    instances: Vec<Instance>,
}

fn label(raster: &LabelRaster, group: ClassSet, connectivity: Connectivity) -> Labelling {
    let (width, height) = (raster.width(), raster.height());
    let pixels = raster.pixels();
    let mut labels = vec![0u32; pixels.len()];
    let mut instances = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for start in 0..pixels.len() {
        if labels[start] != 0 || !group.contains(pixels[start]) {
            continue;
        }
        let id = instances.len() as u32 + 1;
        let (r0, c0) = (start / width, start % width);
        let mut bbox = BBox::point(r0, c0);
        let mut hist = [0u64; NUM_CLASSES];
        labels[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / width, p % width);
            hist[pixels[p].index()] += 1;
            bbox.include(r, c);
            let r_lo = r.saturating_sub(1);
            let r_hi = (r + 1).min(height - 1);
            let c_lo = c.saturating_sub(1);
            let c_hi = (c + 1).min(width - 1);
            for nr in r_lo..=r_hi {
                for nc in c_lo..=c_hi {
                    if connectivity == Connectivity::Four && nr != r && nc != c {
                        continue;
                    }
                    let q = nr * width + nc;
                    if labels[q] == 0 && group.contains(pixels[q]) {
                        labels[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        instances.push(Instance {
            id,
            class: dominant_class(&hist),
            area: hist.iter().sum(),
            bbox,
            anchor: (r0, c0),
            class_histogram: hist,
        });
    }
    Labelling { labels, instances }
}

/// Labels the components of `raster` formed by pixels in `group`.
pub fn connected_components(
    raster: &LabelRaster,
    group: ClassSet,
    connectivity: Connectivity,
) -> InstanceSet {
    InstanceSet {
        width: raster.width(),
        height: raster.height(),
        instances: label(raster, group, connectivity).instances,
    }
}

/// Local component labels along the four edges of a patch (0 = not in the
/// class group).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BorderLabels {
    pub top: Vec<u32>,
    pub bottom: Vec<u32>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

/// Components of one patch in patch-local coordinates plus the border
/// labels needed to stitch them to neighbouring patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchInstances {
    pub row: usize,
    pub col: usize,
    pub set: InstanceSet,
    pub border: BorderLabels,
}

pub fn label_patch(patch: &Patch, group: ClassSet, connectivity: Connectivity) -> PatchInstances {
    let r = &patch.raster;
    let (w, h) = (r.width(), r.height());
    let Labelling { labels, instances } = label(r, group, connectivity);
    let border = if w == 0 || h == 0 {
        BorderLabels { top: vec![], bottom: vec![], left: vec![], right: vec![] }
    } else {
        BorderLabels {
            top: labels[..w].to_vec(),
            bottom: labels[(h - 1) * w..].to_vec(),
            left: (0..h).map(|i| labels[i * w]).collect(),
            right: (0..h).map(|i| labels[i * w + w - 1]).collect(),
        }
    };
    PatchInstances {
        row: patch.row,
        col: patch.col,
        set: InstanceSet { width: w, height: h, instances },
        border,
    }
}

/// Labels every patch (in parallel) and merges the results.
pub fn label_patches(
    grid: &PatchGrid,
    patches: &[Patch],
    group: ClassSet,
    connectivity: Connectivity,
) -> Result<InstanceSet> {
    let ordered = order_patches(grid, patches, |p| (p.row, p.col, &p.raster))?;
    let per_patch = par::map(&ordered, |p| label_patch(p, group, connectivity));
    merge_cross_patch(&per_patch, grid, connectivity)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Merges per-patch components into slide-level components. The result is
/// identical to [`connected_components`] on the stitched slide.
pub fn merge_cross_patch(
    per_patch: &[PatchInstances],
    grid: &PatchGrid,
    connectivity: Connectivity,
) -> Result<InstanceSet> {
    grid.validate()?;
    let ps = grid.patch_size;
    let mut cells: Vec<Option<&PatchInstances>> = vec![None; grid.len()];
    for p in per_patch {
        if p.row >= grid.rows || p.col >= grid.cols {
            return Err(Error::Manifest(format!("patch ({}, {}) outside grid", p.row, p.col)));
        }
        if p.set.width != ps || p.set.height != ps || p.border.top.len() != ps || p.border.left.len() != ps {
            return Err(Error::Manifest(format!(
                "patch ({}, {}) does not match patch size {ps}",
                p.row, p.col
            )));
        }
        let slot = &mut cells[p.row * grid.cols + p.col];
        if slot.is_some() {
            return Err(Error::Manifest(format!("duplicate patch ({}, {})", p.row, p.col)));
        }
        *slot = Some(p);
    }
    let cells: Vec<&PatchInstances> = cells
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| Error::Manifest(format!("missing patch ({}, {})", i / grid.cols, i % grid.cols)))
        })
        .collect::<Result<_>>()?;

    // Global index of local label l in cell k is base[k] + l - 1.
    let mut base = Vec::with_capacity(cells.len());
    let mut total = 0usize;
    for c in &cells {
        base.push(total as u32);
        total += c.set.len();
    }
    let mut uf = UnionFind::new(total);
    let join = |ka: usize, la: u32, kb: usize, lb: u32, uf: &mut UnionFind| {
        if la != 0 && lb != 0 {
            uf.union(base[ka] + la - 1, base[kb] + lb - 1);
        }
    };
    let reach: isize = match connectivity {
        Connectivity::Four => 0,
        Connectivity::Eight => 1,
    };
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let k = r * grid.cols + c;
            let here = &cells[k].border;
            if c + 1 < grid.cols {
                let there = &cells[k + 1].border;
                for i in 0..ps {
                    for d in -reach..=reach {
                        let j = i as isize + d;
                        if (0..ps as isize).contains(&j) {
                            join(k, here.right[i], k + 1, there.left[j as usize], &mut uf);
                        }
                    }
                }
            }
            if r + 1 < grid.rows {
                let kb = k + grid.cols;
                let there = &cells[kb].border;
                for i in 0..ps {
                    for d in -reach..=reach {
                        let j = i as isize + d;
                        if (0..ps as isize).contains(&j) {
                            join(k, here.bottom[i], kb, there.top[j as usize], &mut uf);
                        }
                    }
                }
                if connectivity == Connectivity::Eight {
                    // Diagonal contacts through patch corners.
                    if c + 1 < grid.cols {
                        join(k, here.bottom[ps - 1], kb + 1, cells[kb + 1].border.top[0], &mut uf);
                    }
                    if c > 0 {
                        join(k, here.bottom[0], kb - 1, cells[kb - 1].border.top[ps - 1], &mut uf);
                    }
                }
            }
        }
    }

    // Accumulate each merged component at its root.
    let mut merged: Vec<Option<Instance>> = vec![None; total];
    for (k, cell) in cells.iter().enumerate() {
        let (dr, dc) = grid.origin(cell.row, cell.col);
        for inst in &cell.set.instances {
            let root = uf.find(base[k] + inst.id - 1) as usize;
            let bbox = inst.bbox.offset(dr, dc);
            let anchor = (inst.anchor.0 + dr, inst.anchor.1 + dc);
            match &mut merged[root] {
                Some(m) => {
                    m.area += inst.area;
                    m.bbox.union(&bbox);
                    m.anchor = m.anchor.min(anchor);
                    for (a, b) in m.class_histogram.iter_mut().zip(inst.class_histogram) {
                        *a += b;
                    }
                }
                slot @ None => {
                    *slot = Some(Instance { id: 0, bbox, anchor, ..inst.clone() });
                }
            }
        }
    }
    let mut instances: Vec<Instance> = merged.into_iter().flatten().collect();
    instances.sort_by_key(|i| i.anchor);
    for (i, inst) in instances.iter_mut().enumerate() {
        inst.id = i as u32 + 1;
        inst.class = dominant_class(&inst.class_histogram);
    }
    Ok(InstanceSet {
        width: grid.slide_width,
        height: grid.slide_height,
        instances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GlomerularCounts {
    pub n_total: u64,
    pub n_gs: u64,
    pub n_fc: u64,
    pub n_normal: u64,
}

impl GlomerularCounts {
    /// Counts glomerular instances of at least `min_area` pixels. Each is
    /// labelled by its majority class among Glomerulus, GS and FC, with ties
    /// going to GS, then FC.
    pub fn from_instances(set: &InstanceSet, min_area: u64) -> GlomerularCounts {
        let mut counts = GlomerularCounts::default();
        for inst in set.instances.iter().filter(|i| i.area >= min_area) {
            let h = &inst.class_histogram;
            let (gs, fc, normal) = (
                h[ClassId::Gs.index()],
                h[ClassId::Fc.index()],
                h[ClassId::Glomerulus.index()],
            );
            if gs == 0 && fc == 0 && normal == 0 {
                continue;
            }
            counts.n_total += 1;
            if gs >= fc && gs >= normal {
                counts.n_gs += 1;
            } else if fc >= normal {
                counts.n_fc += 1;
            } else {
                counts.n_normal += 1;
            }
        }
        counts
    }
}

pub fn classify_glomerular_instances(
    raster: &LabelRaster,
    min_area: u64,
    connectivity: Connectivity,
) -> GlomerularCounts {
    let set = connected_components(raster, ClassSet::glomerular(), connectivity);
    GlomerularCounts::from_instances(&set, min_area)
}
