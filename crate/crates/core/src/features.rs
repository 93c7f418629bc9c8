//! Diagnostic features: the glomerular counts and tissue areas that the
//! four chronicity proportions are computed from.
//!
//! Cortex area is every non-Background pixel; tubular area is Tubule plus
//! TA. Slides of one patient are pooled by summation before proportions
//! are formed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{self, Connectivity, GlomerularCounts};
use crate::raster::tiling::{order_patches, Patch, PatchGrid};
use crate::raster::{ClassCounts, ClassId, ClassSet, LabelRaster, Stain, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiagnosticFeatures {
    pub n_glom_total: u64,
    pub n_glom_gs: u64,
    pub n_glom_fc: u64,
    pub area_tubule_total: u64,
    pub area_ta: u64,
    pub area_cortex: u64,
    pub area_if: u64,
    #[serde(default)]
    pub slide_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub min_area: u64,
    pub connectivity: Connectivity,
}

impl DiagnosticFeatures {
    pub fn from_parts(glom: GlomerularCounts, counts: &ClassCounts, slide_id: Option<&str>) -> Self {
        let px = |c: ClassId| counts[c.index()];
        DiagnosticFeatures {
            n_glom_total: glom.n_total,
            n_glom_gs: glom.n_gs,
            n_glom_fc: glom.n_fc,
            area_tubule_total: px(ClassId::Tubule) + px(ClassId::Ta),
            area_ta: px(ClassId::Ta),
            area_cortex: ClassId::TISSUE.iter().map(|&c| px(c)).sum(),
            area_if: px(ClassId::If),
            slide_ids: slide_id.map(|s| vec![s.to_string()]).unwrap_or_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_glom_gs + self.n_glom_fc > self.n_glom_total {
            return Err(Error::Input(format!(
                "GS ({}) + FC ({}) glomeruli exceed the total ({})",
                self.n_glom_gs, self.n_glom_fc, self.n_glom_total
            )));
        }
        if self.area_ta > self.area_tubule_total {
            return Err(Error::Input("TA area exceeds tubular area".into()));
        }
        if self.area_if > self.area_cortex {
            return Err(Error::Input("IF area exceeds cortex area".into()));
        }
        Ok(())
    }

    pub fn with_slide_id(mut self, id: impl Into<String>) -> Self {
        self.slide_ids = vec![id.into()];
        self
    }

    /// Multiplies every count and area by `k`.
    pub fn scaled(&self, k: u64) -> DiagnosticFeatures {
        DiagnosticFeatures {
            n_glom_total: self.n_glom_total * k,
            n_glom_gs: self.n_glom_gs * k,
            n_glom_fc: self.n_glom_fc * k,
            area_tubule_total: self.area_tubule_total * k,
            area_ta: self.area_ta * k,
            area_cortex: self.area_cortex * k,
            area_if: self.area_if * k,
            slide_ids: self.slide_ids.clone(),
        }
    }

    fn add(&mut self, other: &DiagnosticFeatures) {
        self.n_glom_total += other.n_glom_total;
        self.n_glom_gs += other.n_glom_gs;
        self.n_glom_fc += other.n_glom_fc;
        self.area_tubule_total += other.area_tubule_total;
        self.area_ta += other.area_ta;
        self.area_cortex += other.area_cortex;
        self.area_if += other.area_if;
        self.slide_ids.extend(other.slide_ids.iter().cloned());
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DiagnosticFeatures> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: DiagnosticFeatures =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        f.validate()?;
        Ok(f)
    }
}

/// Features of a whole slide.
pub fn extract_features(raster: &LabelRaster, config: &FeatureConfig) -> DiagnosticFeatures {
    let glom = instances::classify_glomerular_instances(raster, config.min_area, config.connectivity);
    DiagnosticFeatures::from_parts(glom, &raster.class_counts(), None)
}

/// Features of a slide given as patches. Glomeruli cut by patch borders are
/// merged before counting, so the result equals [`extract_features`] on the
/// stitched slide.
pub fn extract_features_tiled(
    grid: &PatchGrid,
    patches: &[Patch],
    config: &FeatureConfig,
) -> Result<DiagnosticFeatures> {
    let ordered = order_patches(grid, patches, |p| (p.row, p.col, &p.raster))?;
    let mut counts = [0u64; NUM_CLASSES];
    for p in &ordered {
        // Padding is Background, so only its count needs correcting.
        for (a, b) in counts.iter_mut().zip(p.raster.class_counts()) {
            *a += b;
        }
    }
    let padding = (grid.len() * grid.patch_size * grid.patch_size) as u64
        - (grid.slide_width * grid.slide_height) as u64;
    counts[ClassId::Background.index()] -= padding;
    let merged = instances::label_patches(grid, patches, ClassSet::glomerular(), config.connectivity)?;
    let glom = GlomerularCounts::from_instances(&merged, config.min_area);
    Ok(DiagnosticFeatures::from_parts(glom, &counts, None))
}

/// Element-wise sum of per-slide features.
pub fn aggregate_patient(per_slide: &[DiagnosticFeatures]) -> Result<DiagnosticFeatures> {
    if per_slide.is_empty() {
        return Err(Error::Input("cannot aggregate an empty list of slides".into()));
    }
    let mut total = DiagnosticFeatures::default();
    for f in per_slide {
        total.add(f);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    /// Sum everything over all slides.
    #[default]
    Pooled,
    /// Glomerular counts from silver slides, IF/TA areas from trichrome
    /// slides.
    ByStain,
}

impl std::str::FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(AggregationMode::Pooled),
            "by-stain" => Ok(AggregationMode::ByStain),
            _ => Err(Error::Config(format!("unknown aggregation mode {s:?}"))),
        }
    }
}

pub fn aggregate_with_mode(
    per_slide: &[(Stain, DiagnosticFeatures)],
    mode: AggregationMode,
) -> Result<DiagnosticFeatures> {
    let all: Vec<DiagnosticFeatures> = per_slide.iter().map(|(_, f)| f.clone()).collect();
    match mode {
        AggregationMode::Pooled => aggregate_patient(&all),
        AggregationMode::ByStain => {
            let pick = |stain: Stain| -> Result<DiagnosticFeatures> {
                let chosen: Vec<_> = per_slide
                    .iter()
                    .filter(|(s, _)| *s == stain)
                    .map(|(_, f)| f.clone())
                    .collect();
                aggregate_patient(&chosen)
                    .map_err(|_| Error::Input(format!("by-stain aggregation needs at least one {stain} slide")))
            };
            let silver = pick(Stain::Silver)?;
            let trichrome = pick(Stain::Trichrome)?;
            Ok(DiagnosticFeatures {
                n_glom_total: silver.n_glom_total,
                n_glom_gs: silver.n_glom_gs,
                n_glom_fc: silver.n_glom_fc,
                area_tubule_total: trichrome.area_tubule_total,
                area_ta: trichrome.area_ta,
                area_cortex: trichrome.area_cortex,
                area_if: trichrome.area_if,
                slide_ids: all.into_iter().flat_map(|f| f.slide_ids).collect(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(r: &mut LabelRaster, row0: usize, col0: usize, h: usize, w: usize, class: ClassId) {
        for row in row0..row0 + h {
            for col in col0..col0 + w {
                r.set(row, col, class);
            }
        }
    }

    #[test]
    fn background_only() {
        let f = extract_features(&LabelRaster::new(16, 16), &FeatureConfig::default());
        assert_eq!(f, DiagnosticFeatures::default());
    }

    #[test]
    fn pixel_arithmetic() {
        let mut r = LabelRaster::new(100, 60);
        fill(&mut r, 0, 0, 10, 10, ClassId::Glomerulus); // 100
        fill(&mut r, 0, 20, 8, 10, ClassId::Gs); // 80
        fill(&mut r, 20, 0, 10, 50, ClassId::Tubule); // 500
        fill(&mut r, 40, 0, 10, 20, ClassId::Ta); // 200
        fill(&mut r, 40, 40, 10, 30, ClassId::If); // 300
        let f = extract_features(&r, &FeatureConfig::default());
        assert_eq!(f.n_glom_total, 2);
        assert_eq!(f.n_glom_gs, 1);
        assert_eq!(f.n_glom_fc, 0);
        assert_eq!(f.area_tubule_total, 700);
        assert_eq!(f.area_ta, 200);
        assert_eq!(f.area_cortex, 1180);
        assert_eq!(f.area_if, 300);
        f.validate().unwrap();
    }

    #[test]
    fn aggregation_sums() {
        let a = DiagnosticFeatures { n_glom_total: 3, n_glom_gs: 1, n_glom_fc: 0, ..Default::default() }.with_slide_id("a");
        let b = DiagnosticFeatures { n_glom_total: 5, n_glom_gs: 0, n_glom_fc: 2, ..Default::default() }.with_slide_id("b");
        let ab = aggregate_patient(&[a.clone(), b.clone()]).unwrap();
        assert_eq!((ab.n_glom_total, ab.n_glom_gs, ab.n_glom_fc), (8, 1, 2));
        assert_eq!(ab.slide_ids, vec!["a", "b"]);
        let ba = aggregate_patient(&[b, a.clone()]).unwrap();
        assert_eq!(DiagnosticFeatures { slide_ids: vec![], ..ab }, DiagnosticFeatures { slide_ids: vec![], ..ba });
        assert_eq!(aggregate_patient(std::slice::from_ref(&a)).unwrap(), a);
        assert!(matches!(aggregate_patient(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn by_stain_takes_each_parameter_from_its_stain() {
        let silver = DiagnosticFeatures { n_glom_total: 10, n_glom_gs: 2, area_cortex: 50, area_if: 5, ..Default::default() };
        let tri = DiagnosticFeatures { n_glom_total: 4, area_cortex: 100, area_if: 30, area_tubule_total: 20, area_ta: 4, ..Default::default() };
        let f = aggregate_with_mode(&[(Stain::Silver, silver), (Stain::Trichrome, tri)], AggregationMode::ByStain).unwrap();
        assert_eq!((f.n_glom_total, f.n_glom_gs, f.area_cortex, f.area_if, f.area_ta), (10, 2, 100, 30, 4));
        assert!(aggregate_with_mode(&[(Stain::Other, DiagnosticFeatures::default())], AggregationMode::ByStain).is_err());
    }

    #[test]
    fn validate_catches_impossible_counts() {
        let f = DiagnosticFeatures { n_glom_total: 1, n_glom_gs: 1, n_glom_fc: 1, ..Default::default() };
        assert!(f.validate().is_err());
    }
}
