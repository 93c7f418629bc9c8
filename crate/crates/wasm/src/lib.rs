//! Browser bindings for three interactive operations: render and score a
//! synthetic slide, sweep a scoring rule over all proportions, and compare
//! survival between two risk groups of a simulated cohort.
//!
//! The logic lives in plain functions returning JSON so it can be tested
//! natively; the `#[wasm_bindgen]` wrappers only convert errors.

use chronicity::features::DiagnosticFeatures;
use chronicity::raster::{ClassId, LabelRaster};
use chronicity::scoring::{score_patient, subscore, ChronicityResult, Parameter, ScoringRule};
use chronicity::survival::{cox_fit, km_estimate, logrank, CoxConfig, KmPoint};
use chronicity::synth::{generate, generate_cohort, CohortSpec, CovariateDistribution, CovariateSpec, SynthSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// RGBA colour per class code.
const PALETTE: [[u8; 4]; 7] = [
    [246, 240, 236, 255], // background
    [214, 96, 152, 255],  // glomerulus
    [246, 190, 120, 255], // tubule
    [70, 60, 150, 255],   // gs
    [40, 140, 170, 255],  // fc
    [90, 170, 90, 255],   // if
    [200, 70, 40, 255],   // ta
];

pub fn rgba(raster: &LabelRaster) -> Vec<u8> {
    raster.pixels().iter().flat_map(|c| PALETTE[c.index()]).collect()
}

#[derive(Serialize)]
pub struct SlideSummary {
    pub width: usize,
    pub height: usize,
    pub features: DiagnosticFeatures,
    pub conventional: ChronicityResult,
    pub nuanced: ChronicityResult,
    pub class_names: Vec<&'static str>,
    pub palette: Vec<[u8; 4]>,
}

/// A synthetic slide as RGBA pixels plus its measured scores.
#[allow(clippy::too_many_arguments)]
pub fn slide(
    width: usize,
    height: usize,
    n_glomeruli: usize,
    n_gs: usize,
    n_fc: usize,
    p_if: f64,
    p_ta: f64,
    seed: u64,
) -> Result<(Vec<u8>, String), String> {
    let spec = SynthSpec::new(width, height, n_glomeruli, n_gs, n_fc, p_if, p_ta).with_seed(seed);
    let slide = generate(&spec).map_err(|e| e.to_string())?;
    let score = |rule: &ScoringRule| score_patient(&slide.truth, rule).map_err(|e| e.to_string());
    let summary = SlideSummary {
        width,
        height,
        conventional: score(&ScoringRule::conventional())?,
        nuanced: score(&ScoringRule::nuanced_example())?,
        features: slide.truth,
        class_names: ClassId::ALL.iter().map(|c| c.name()).collect(),
        palette: PALETTE.to_vec(),
    };
    Ok((rgba(&slide.raster), serde_json::to_string(&summary).map_err(|e| e.to_string())?))
}

#[derive(Serialize)]
pub struct Sweep {
    pub rule: String,
    pub p: Vec<f64>,
    pub gs: Vec<u32>,
    pub fc: Vec<u32>,
    #[serde(rename = "if")]
    pub if_: Vec<u32>,
    pub ta: Vec<u32>,
}

/// Sub-scores at p = 0, 1/steps, ..., 1 for a built-in rule name or a rule
/// given as JSON.
pub fn rule_sweep(rule: &str, steps: usize) -> Result<String, String> {
    let rule = match ScoringRule::builtin(rule.trim()) {
        Some(r) => r,
        None => serde_json::from_str(rule).map_err(|e| format!("rule: {e}"))?,
    };
    let steps = steps.max(1);
    let p: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let column = |parameter| p.iter().map(|&x| subscore(x, &rule, parameter)).collect::<Result<Vec<_>, _>>();
    let sweep = Sweep {
        rule: rule.name.clone(),
        gs: column(Parameter::Gs).map_err(|e| e.to_string())?,
        fc: column(Parameter::Fc).map_err(|e| e.to_string())?,
        if_: column(Parameter::If).map_err(|e| e.to_string())?,
        ta: column(Parameter::Ta).map_err(|e| e.to_string())?,
        p,
    };
    serde_json::to_string(&sweep).map_err(|e| e.to_string())
}

#[derive(Serialize)]
pub struct Curve {
    pub label: String,
    pub n: usize,
    pub events: usize,
    pub median: Option<f64>,
    pub points: Vec<KmPoint>,
}

#[derive(Serialize)]
pub struct SurvivalDemo {
    pub curves: Vec<Curve>,
    pub logrank_chi_square: f64,
    pub logrank_p: f64,
    pub hazard_ratio: f64,
    pub hr_ci: (f64, f64),
    pub cox_p: f64,
}

/// Simulates a cohort where high-risk patients (probability 0.5) have the
/// given hazard ratio, then compares the two groups.
pub fn survival(n: usize, hazard_ratio: f64, censoring: f64, seed: u64) -> Result<String, String> {
    // Negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(hazard_ratio > 0.0) {
        return Err("hazard ratio must be positive".into());
    }
    let spec = CohortSpec {
        n_patients: n,
        covariates: vec![CovariateSpec {
            name: "high_risk".into(),
            distribution: CovariateDistribution::Bernoulli { p: 0.5 },
            beta: hazard_ratio.ln(),
        }],
        baseline_hazard: 0.1,
        censoring_hazard: censoring,
        max_follow_up: Some(15.0),
        seed,
    };
    let cohort = generate_cohort(&spec).map_err(|e| e.to_string())?;
    let groups = cohort.stratify("high_risk", None).map_err(|e| e.to_string())?;
    let mut curves = Vec::new();
    for (label, records) in &groups {
        let km = km_estimate(records).map_err(|e| e.to_string())?;
        let label = if label == "1" { "high risk" } else { "low risk" };
        curves.push(Curve { label: label.into(), n: km.n, events: km.n_events, median: km.median_survival, points: km.points });
    }
    let lr = logrank(&groups.iter().map(|(_, r)| r.as_slice()).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let fit = cox_fit(&cohort, &["high_risk"], &CoxConfig::default()).map_err(|e| e.to_string())?;
    let c = &fit.coefficients[0];
    let demo = SurvivalDemo {
        curves,
        logrank_chi_square: lr.chi_square,
        logrank_p: lr.p_value,
        hazard_ratio: c.hazard_ratio,
        hr_ci: (c.ci_low.unwrap_or(f64::NAN), c.ci_high.unwrap_or(f64::NAN)),
        cox_p: c.p_value.unwrap_or(f64::NAN),
    };
    serde_json::to_string(&demo).map_err(|e| e.to_string())
}

/// Pixels and summary JSON of one synthetic slide.
#[wasm_bindgen]
pub struct RenderedSlide {
    pixels: Vec<u8>,
    summary: String,
}

#[wasm_bindgen]
impl RenderedSlide {
    /// RGBA bytes, row-major, ready for `ImageData`.
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

#[wasm_bindgen(js_name = renderSlide)]
#[allow(clippy::too_many_arguments)]
pub fn render_slide(
    width: usize,
    height: usize,
    n_glomeruli: usize,
    n_gs: usize,
    n_fc: usize,
    p_if: f64,
    p_ta: f64,
    seed: u64,
) -> Result<RenderedSlide, JsError> {
    let (pixels, summary) = slide(width, height, n_glomeruli, n_gs, n_fc, p_if, p_ta, seed).map_err(|e| JsError::new(&e))?;
    Ok(RenderedSlide { pixels, summary })
}

#[wasm_bindgen(js_name = ruleSweep)]
pub fn rule_sweep_js(rule: &str, steps: usize) -> Result<String, JsError> {
    rule_sweep(rule, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = survivalDemo)]
pub fn survival_js(n: usize, hazard_ratio: f64, censoring: f64, seed: u64) -> Result<String, JsError> {
    survival(n, hazard_ratio, censoring, seed).map_err(|e| JsError::new(&e))
}
