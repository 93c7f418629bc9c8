//! Synthetic slides and cohorts with exactly known ground truth.
//!
//! Slides are built from discs (glomeruli) and rectangles (tubules and
//! fibrotic interstitium) on a Background canvas. Every blob is separated
//! from every other by at least one Background pixel in all eight
//! directions, so component labeling recovers the placed objects one for
//! one. The returned features are tallied while placing, not measured
//! afterwards.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DiagnosticFeatures;
use crate::fusion::MaskSource;
use crate::raster::{BinaryMask, ClassId, LabelRaster};
use crate::scoring::{score_patient, ChronicityResult, ScoringRule};
use crate::survival::{Cohort, SurvivalRecord};
use crate::{par, stats};

/// Placement attempts per blob before giving up.
const RETRY_BUDGET: usize = 2000;

fn default_glom_radius() -> (usize, usize) {
    (10, 24)
}

fn default_n_tubules() -> usize {
    80
}

fn default_tubule_size() -> (usize, usize) {
    (8, 36)
}

fn default_if_block() -> (usize, usize) {
    (16, 64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub n_glomeruli: usize,
    pub n_gs: usize,
    pub n_fc: usize,
    /// Requested IF share of cortex; the realized value is exact to one
    /// pixel.
    pub p_if: f64,
    /// Requested TA share of tubular area, reached by choosing whole
    /// tubules, so the realized value can fall short by up to one tubule.
    pub p_ta: f64,
    /// Inclusive radius range of glomerular discs.
    #[serde(default = "default_glom_radius")]
    pub glomerulus_radius: (usize, usize),
    #[serde(default = "default_n_tubules")]
    pub n_tubules: usize,
    /// Inclusive side-length range of tubule rectangles.
    #[serde(default = "default_tubule_size")]
    pub tubule_size: (usize, usize),
    /// Inclusive side-length range of IF blocks.
    #[serde(default = "default_if_block")]
    pub if_block_size: (usize, usize),
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(width: usize, height: usize, n_glomeruli: usize, n_gs: usize, n_fc: usize, p_if: f64, p_ta: f64) -> Self {
        SynthSpec {
            width,
            height,
            n_glomeruli,
            n_gs,
            n_fc,
            p_if,
            p_ta,
            glomerulus_radius: default_glom_radius(),
            n_tubules: default_n_tubules(),
            tubule_size: default_tubule_size(),
            if_block_size: default_if_block(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_gs + self.n_fc > self.n_glomeruli {
            return Err(Error::Config(format!(
                "n_gs ({}) + n_fc ({}) exceeds n_glomeruli ({})",
                self.n_gs, self.n_fc, self.n_glomeruli
            )));
        }
        if self.n_glomeruli == 0 || self.n_tubules == 0 {
            return Err(Error::Config("a synthetic slide needs at least one glomerulus and one tubule".into()));
        }
        for (name, p) in [("p_if", self.p_if), ("p_ta", self.p_ta)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} must lie in [0, 1)")));
            }
        }
        for (name, (lo, hi)) in [
            ("glomerulus_radius", self.glomerulus_radius),
            ("tubule_size", self.tubule_size),
            ("if_block_size", self.if_block_size),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!("{name} range ({lo}, {hi}) is empty or starts at 0")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SynthSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SynthSpec =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSlide {
    pub raster: LabelRaster,
    pub truth: DiagnosticFeatures,
    /// Ground truth under the conventional rule.
    pub expected: ChronicityResult,
}

/// The ground-truth record written next to a generated slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub features: DiagnosticFeatures,
    pub result: ChronicityResult,
}

impl SynthSlide {
    pub fn truth_record(&self, spec: &SynthSpec) -> SynthTruth {
        SynthTruth { spec: spec.clone(), features: self.truth.clone(), result: self.expected.clone() }
    }
}

/// Pixel footprint of a blob relative to its top-left corner.
struct Shape {
    height: usize,
    width: usize,
    offsets: Vec<(usize, usize)>,
}

impl Shape {
    fn disc(radius: usize) -> Shape {
        let d = 2 * radius + 1;
        let r2 = (radius * radius) as i64;
        let mut offsets = Vec::new();
        for r in 0..d {
            for c in 0..d {
                let (dr, dc) = (r as i64 - radius as i64, c as i64 - radius as i64);
                if dr * dr + dc * dc <= r2 {
                    offsets.push((r, c));
                }
            }
        }
        Shape { height: d, width: d, offsets }
    }

    /// `area` pixels filled row by row at the given width, the last row
    /// possibly partial.
    fn block(width: usize, area: usize) -> Shape {
        let offsets: Vec<(usize, usize)> = (0..area).map(|k| (k / width, k % width)).collect();
        Shape { height: area.div_ceil(width), width: width.min(area), offsets }
    }

    fn area(&self) -> u64 {
        self.offsets.len() as u64
    }
}

struct Canvas {
    raster: LabelRaster,
    /// Pixels that are occupied or touch an occupied pixel.
    blocked: Vec<bool>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Canvas {
        Canvas { raster: LabelRaster::new(width, height), blocked: vec![false; width * height] }
    }

    fn fits(&self, shape: &Shape, top: usize, left: usize) -> bool {
        let w = self.raster.width();
        shape.offsets.iter().all(|&(r, c)| !self.blocked[(top + r) * w + left + c])
    }

    fn paint(&mut self, shape: &Shape, top: usize, left: usize, class: ClassId) {
        let (w, h) = (self.raster.width(), self.raster.height());
        for &(r, c) in &shape.offsets {
            let (row, col) = (top + r, left + c);
            self.raster.set(row, col, class);
            for nr in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for nc in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    self.blocked[nr * w + nc] = true;
                }
            }
        }
    }

    fn place(&mut self, rng: &mut ChaCha8Rng, shape: &Shape, class: ClassId, what: &str) -> Result<()> {
        let (w, h) = (self.raster.width(), self.raster.height());
        if shape.width <= w && shape.height <= h {
            for _ in 0..RETRY_BUDGET {
                let top = rng.random_range(0..=h - shape.height);
                let left = rng.random_range(0..=w - shape.width);
                if self.fits(shape, top, left) {
                    self.paint(shape, top, left, class);
                    return Ok(());
                }
            }
        }
        Err(Error::Capacity(format!(
            "could not place {what} ({}x{}) on a {w}x{h} slide after {RETRY_BUDGET} attempts",
            shape.width, shape.height
        )))
    }
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

/// Builds the slide described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthSlide> {
    spec.validate()?;
    let mut rng = stats::substream(spec.seed, 0);
    let mut canvas = Canvas::new(spec.width, spec.height);
    let mut truth = DiagnosticFeatures::default();

    for k in 0..spec.n_glomeruli {
        let class = if k < spec.n_gs {
            ClassId::Gs
        } else if k < spec.n_gs + spec.n_fc {
            ClassId::Fc
        } else {
            ClassId::Glomerulus
        };
        let shape = Shape::disc(sample_range(&mut rng, spec.glomerulus_radius));
        canvas.place(&mut rng, &shape, class, "glomerulus")?;
        truth.area_cortex += shape.area();
    }
    truth.n_glom_total = spec.n_glomeruli as u64;
    truth.n_glom_gs = spec.n_gs as u64;
    truth.n_glom_fc = spec.n_fc as u64;

    let tubules: Vec<(usize, usize)> = (0..spec.n_tubules)
        .map(|_| (sample_range(&mut rng, spec.tubule_size), sample_range(&mut rng, spec.tubule_size)))
        .collect();
    let tubule_total: u64 = tubules.iter().map(|&(h, w)| (h * w) as u64).sum();
    let ta_target = (spec.p_ta * tubule_total as f64).round() as u64;
    let mut is_ta = vec![false; tubules.len()];
    let mut ta_area = 0;
    for (k, &(h, w)) in tubules.iter().enumerate() {
        let a = (h * w) as u64;
        if ta_area + a <= ta_target {
            is_ta[k] = true;
            ta_area += a;
        }
    }
    if spec.p_ta > 0.0 && ta_area == 0 {
        // Keep a nonzero request nonzero.
        let smallest = (0..tubules.len()).min_by_key(|&k| tubules[k].0 * tubules[k].1).expect("n_tubules > 0");
        is_ta[smallest] = true;
        ta_area = (tubules[smallest].0 * tubules[smallest].1) as u64;
    }
    for (k, &(h, w)) in tubules.iter().enumerate() {
        let class = if is_ta[k] { ClassId::Ta } else { ClassId::Tubule };
        canvas.place(&mut rng, &Shape::block(w, h * w), class, "tubule")?;
    }
    truth.area_tubule_total = tubule_total;
    truth.area_ta = ta_area;
    truth.area_cortex += tubule_total;

    // IF area a solves a / (cortex + a) = p_if.
    let mut if_remaining = (spec.p_if / (1.0 - spec.p_if) * truth.area_cortex as f64).round() as u64;
    while if_remaining > 0 {
        let w = sample_range(&mut rng, spec.if_block_size);
        let h = sample_range(&mut rng, spec.if_block_size);
        let area = ((w * h) as u64).min(if_remaining);
        let shape = Shape::block(w, area as usize);
        canvas.place(&mut rng, &shape, ClassId::If, "IF block")?;
        if_remaining -= area;
        truth.area_if += area;
    }
    truth.area_cortex += truth.area_if;

    let expected = score_patient(&truth, &ScoringRule::conventional())?;
    Ok(SynthSlide { raster: canvas.raster, truth, expected })
}

/// Overlapping per-model masks that fuse back to `raster` under the default
/// precedence: the compartment masks cover whole glomeruli and tubules,
/// and lesion masks mark the affected subset on top.
pub fn masks_for(raster: &LabelRaster) -> Vec<MaskSource> {
    let union = |classes: &[ClassId]| {
        let data = raster.pixels().iter().map(|c| classes.contains(c)).collect();
        BinaryMask::from_bools(raster.width(), raster.height(), data).expect("same shape")
    };
    vec![
        MaskSource { class: ClassId::Glomerulus, mask: union(&[ClassId::Glomerulus, ClassId::Gs, ClassId::Fc]) },
        MaskSource { class: ClassId::Tubule, mask: union(&[ClassId::Tubule, ClassId::Ta]) },
        MaskSource { class: ClassId::Gs, mask: union(&[ClassId::Gs]) },
        MaskSource { class: ClassId::Fc, mask: union(&[ClassId::Fc]) },
        MaskSource { class: ClassId::If, mask: union(&[ClassId::If]) },
        MaskSource { class: ClassId::Ta, mask: union(&[ClassId::Ta]) },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateDistribution {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    /// Draws one of `values` with the given relative weights, e.g. a
    /// chronicity-index distribution over 0..=12.
    Categorical { values: Vec<f64>, weights: Vec<f64> },
}

impl CovariateDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            CovariateDistribution::Bernoulli { p } => (0.0..=1.0).contains(p),
            CovariateDistribution::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && *sd >= 0.0,
            CovariateDistribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            CovariateDistribution::Categorical { values, weights } => {
                !values.is_empty()
                    && values.len() == weights.len()
                    && values.iter().all(|v| v.is_finite())
                    && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
                    && weights.iter().sum::<f64>() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid covariate distribution {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            CovariateDistribution::Bernoulli { p } => (rng.random::<f64>() < *p) as u8 as f64,
            CovariateDistribution::Normal { mean, sd } => Normal::new(*mean, *sd).expect("validated").sample(rng),
            CovariateDistribution::Uniform { low, high } => rng.random_range(*low..*high),
            CovariateDistribution::Categorical { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (v, w) in values.iter().zip(weights) {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                *values.last().expect("validated non-empty")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub distribution: CovariateDistribution,
    /// True log hazard ratio per unit.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_patients: usize,
    pub covariates: Vec<CovariateSpec>,
    /// Exponential baseline hazard, events per year.
    pub baseline_hazard: f64,
    /// Exponential censoring hazard; 0 disables random censoring.
    #[serde(default)]
    pub censoring_hazard: f64,
    /// Administrative end of follow-up in years.
    #[serde(default)]
    pub max_follow_up: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(Error::Config("cohort needs at least one patient".into()));
        }
        if !(self.baseline_hazard > 0.0 && self.baseline_hazard.is_finite()) {
            return Err(Error::Config("baseline_hazard must be positive".into()));
        }
        if !(self.censoring_hazard >= 0.0 && self.censoring_hazard.is_finite()) {
            return Err(Error::Config("censoring_hazard must be non-negative".into()));
        }
        if let Some(t) = self.max_follow_up {
            // Negated so NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(t > 0.0) {
                return Err(Error::Config("max_follow_up must be positive".into()));
            }
        }
        for c in &self.covariates {
            if !c.beta.is_finite() {
                return Err(Error::Config(format!("{}: beta must be finite", c.name)));
            }
            c.distribution.validate()?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CohortSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: CohortSpec =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Simulates a proportional-hazards cohort: event times are exponential
/// with rate `baseline_hazard · exp(x·beta)`, then censored by an
/// independent exponential time and the administrative horizon. Patient i
/// draws from substream i of the seed.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let records = par::map_range(spec.n_patients, |i| {
        let mut rng = stats::substream(spec.seed, i as u64);
        let x: Vec<f64> = spec.covariates.iter().map(|c| c.distribution.sample(&mut rng)).collect();
        let lp: f64 = spec.covariates.iter().zip(&x).map(|(c, v)| c.beta * v).sum();
        let rate = spec.baseline_hazard * lp.exp();
        let event_time = Exp::new(rate).map_or(f64::INFINITY, |d| d.sample(&mut rng));
        let mut censor_time = if spec.censoring_hazard > 0.0 {
            Exp::new(spec.censoring_hazard).expect("validated").sample(&mut rng)
        } else {
            f64::INFINITY
        };
        if let Some(t) = spec.max_follow_up {
            censor_time = censor_time.min(t);
        }
        let event = event_time <= censor_time;
        SurvivalRecord {
            subject_id: format!("p{:05}", i + 1),
            time: if event { event_time } else { censor_time },
            event,
            covariates: x,
        }
    });
    if let Some(r) = records.iter().find(|r| !r.time.is_finite()) {
        return Err(Error::Config(format!(
            "{}: no event and no censoring; set censoring_hazard or max_follow_up",
            r.subject_id
        )));
    }
    Cohort::new(spec.covariates.iter().map(|c| c.name.clone()).collect(), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, FeatureConfig};
    use crate::fusion::{fuse, PrecedenceOrder};

    #[test]
    fn counts_and_determinism() {
        let spec = SynthSpec::new(800, 600, 10, 3, 0, 0.2, 0.3).with_seed(5);
        let a = generate(&spec).unwrap();
        assert_eq!(a.truth.n_glom_total, 10);
        assert_eq!(a.truth.n_glom_gs, 3);
        assert_eq!(a, generate(&spec).unwrap());
        let measured = extract_features(&a.raster, &FeatureConfig::default());
        assert_eq!(measured, a.truth);
    }

    #[test]
    fn masks_fuse_back() {
        let spec = SynthSpec::new(700, 600, 6, 2, 2, 0.3, 0.5).with_seed(9);
        let s = generate(&spec).unwrap();
        let fused = fuse(700, 600, &masks_for(&s.raster), &PrecedenceOrder::default()).unwrap();
        assert_eq!(fused, s.raster);
    }

    #[test]
    fn overfull_slide_is_capacity_error() {
        let spec = SynthSpec::new(60, 60, 40, 0, 0, 0.0, 0.0);
        assert!(matches!(generate(&spec), Err(Error::Capacity(_))));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec::new(100, 100, 2, 2, 1, 0.0, 0.0)).is_err());
        assert!(generate(&SynthSpec::new(100, 100, 2, 0, 0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn cohort_is_seeded() {
        let spec = CohortSpec {
            n_patients: 50,
            covariates: vec![CovariateSpec {
                name: "x".into(),
                distribution: CovariateDistribution::Bernoulli { p: 0.5 },
                beta: 0.7,
            }],
            baseline_hazard: 0.1,
            censoring_hazard: 0.05,
            max_follow_up: Some(10.0),
            seed: 3,
        };
        let a = generate_cohort(&spec).unwrap();
        assert_eq!(a, generate_cohort(&spec).unwrap());
        assert_eq!(a.len(), 50);
        assert!(a.records.iter().all(|r| r.time <= 10.0));
        assert_ne!(a, generate_cohort(&CohortSpec { seed: 4, ..spec }).unwrap());
    }
}
