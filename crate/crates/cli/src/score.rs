use std::path::{Path, PathBuf};

use chronicity::features::{
    aggregate_with_mode, extract_features, extract_features_tiled, AggregationMode, DiagnosticFeatures, FeatureConfig,
};
use chronicity::instances::Connectivity;
use chronicity::raster::manifest::Stain;
use chronicity::raster::tiling::{Patch, PatchGrid};
use chronicity::raster::LabelRaster;
use chronicity::scoring::{score_patient, ChronicityResult, ScoringRule};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::parse_connectivity;
use crate::raster::{read_fusion_spec, read_raster, read_tiled, run_fusion};
use crate::report::{envelope, Inputs, Outputs};
use crate::{Context, Failure, Outcome, EXIT_COMPUTATION};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Slides of a single patient: manifest JSON, fusion spec JSON or
    /// label raster PGM.
    pub slides: Vec<PathBuf>,
    /// Patients file: {"patients": [{"id": ..., "slides": [...]}]}.
    #[arg(long, conflicts_with = "slides")]
    pub patients: Option<PathBuf>,
    /// Patient id used with positional slides.
    #[arg(long, default_value = "patient")]
    pub patient_id: String,
    /// Built-in rule name (conventional, nuanced-example) or rule JSON path.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub min_area: Option<u64>,
    #[arg(long, value_parser = parse_connectivity)]
    pub connectivity: Option<Connectivity>,
    /// pooled or by-stain.
    #[arg(long)]
    pub aggregation: Option<AggregationMode>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SlideRef {
    Path(PathBuf),
    Detailed {
        path: PathBuf,
        #[serde(default)]
        stain: Option<Stain>,
        #[serde(default)]
        slide_id: Option<String>,
    },
}

#[derive(Debug, Deserialize)]
struct PatientEntry {
    id: String,
    slides: Vec<SlideRef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatientsFile {
    patients: Vec<PatientEntry>,
}

enum SlideData {
    Whole(LabelRaster),
    Tiled(PatchGrid, Vec<Patch>),
}

struct LoadedSlide {
    slide_id: String,
    input: String,
    stain: Stain,
    data: SlideData,
}

#[derive(Serialize)]
struct SlideOutcome {
    slide_id: String,
    input: String,
    stain: Stain,
    features: DiagnosticFeatures,
    result: Option<ChronicityResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct PatientOutcome {
    patient_id: String,
    features: Option<DiagnosticFeatures>,
    result: Option<ChronicityResult>,
    error: Option<String>,
    slides: Vec<SlideOutcome>,
}

#[derive(Serialize)]
struct ScoreResult<'a> {
    rule: &'a ScoringRule,
    n_patients: usize,
    n_failed: usize,
    patients: Vec<PatientOutcome>,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_slide(inputs: &mut Inputs, path: &Path, stain: Option<Stain>, slide_id: Option<String>) -> Result<LoadedSlide, Failure> {
    let input = path.display().to_string();
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        let raster = read_raster(inputs, path)?;
        return Ok(LoadedSlide {
            slide_id: slide_id.unwrap_or_else(|| stem(path)),
            input,
            stain: stain.unwrap_or_default(),
            data: SlideData::Whole(raster),
        });
    }
    let value: serde_json::Value = inputs.read_json(path)?;
    if value.get("patches").is_some() {
        let (manifest, patches) = read_tiled(inputs, path)?;
        Ok(LoadedSlide {
            slide_id: slide_id.unwrap_or(manifest.slide_id),
            input,
            stain: stain.unwrap_or(manifest.stain),
            data: SlideData::Tiled(manifest.grid, patches),
        })
    } else if value.get("sources").is_some() {
        let spec = read_fusion_spec(inputs, path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let (raster, _) = run_fusion(inputs, &spec, &base)?;
        let id = path.parent().map(stem).filter(|s| !s.is_empty()).unwrap_or_else(|| stem(path));
        Ok(LoadedSlide {
            slide_id: slide_id.unwrap_or(id),
            input,
            stain: stain.unwrap_or_default(),
            data: SlideData::Whole(raster),
        })
    } else {
        Err(Failure::input(format!("{input}: neither a slide manifest nor a fusion spec")))
    }
}

fn load_rule(inputs: &mut Inputs, name_or_path: &str) -> Result<ScoringRule, Failure> {
    match ScoringRule::builtin(name_or_path) {
        Some(rule) => Ok(rule),
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() {
                return Err(chronicity::Error::Config(format!(
                    "{name_or_path:?} is neither a built-in rule nor a rule file"
                ))
                .into());
            }
            inputs.read_json(path)
        }
    }
}

pub fn run(ctx: &mut Context, args: ScoreArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    if let Some(rule) = args.rule {
        ctx.config.rule = rule;
    }
    if let Some(v) = args.min_area {
        ctx.config.min_area = v;
    }
    if let Some(v) = args.connectivity {
        ctx.config.connectivity = v;
    }
    if let Some(v) = args.aggregation {
        ctx.config.aggregation = v;
    }
    let mut inputs = Inputs::new(ctx)?;
    let rule = load_rule(&mut inputs, &ctx.config.rule.clone())?;

    let mut patients: Vec<(String, Vec<LoadedSlide>)> = Vec::new();
    match &args.patients {
        Some(path) => {
            let file: PatientsFile = inputs.read_json(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            for p in file.patients {
                let mut slides = Vec::new();
                for s in p.slides {
                    let (rel, stain, id) = match s {
                        SlideRef::Path(rel) => (rel, None, None),
                        SlideRef::Detailed { path, stain, slide_id } => (path, stain, slide_id),
                    };
                    let full = if rel.is_absolute() { rel } else { base.join(rel) };
                    slides.push(load_slide(&mut inputs, &full, stain, id)?);
                }
                patients.push((p.id, slides));
            }
        }
        None => {
            if args.slides.is_empty() {
                return Err(Failure::input("give slide files or --patients"));
            }
            let slides = args
                .slides
                .iter()
                .map(|p| load_slide(&mut inputs, p, None, None))
                .collect::<Result<Vec<_>, _>>()?;
            patients.push((args.patient_id.clone(), slides));
        }
    }
    if let Some((id, _)) = patients.iter().find(|(_, s)| s.is_empty()) {
        return Err(Failure::input(format!("patient {id} has no slides")));
    }

    let features_config = FeatureConfig { min_area: ctx.config.min_area, connectivity: ctx.config.connectivity };
    let mode = ctx.config.aggregation;
    let outcomes: Vec<PatientOutcome> = patients
        .par_iter()
        .map(|(id, slides)| -> Result<PatientOutcome, Failure> {
            let mut per_slide = Vec::with_capacity(slides.len());
            for s in slides {
                let features = match &s.data {
                    SlideData::Whole(r) => extract_features(r, &features_config),
                    SlideData::Tiled(grid, patches) => extract_features_tiled(grid, patches, &features_config)?,
                }
                .with_slide_id(s.slide_id.clone());
                let (result, error) = split(score_patient(&features, &rule));
                per_slide.push(SlideOutcome {
                    slide_id: s.slide_id.clone(),
                    input: s.input.clone(),
                    stain: s.stain,
                    features,
                    result,
                    error,
                });
            }
            let pairs: Vec<_> = per_slide.iter().map(|s| (s.stain, s.features.clone())).collect();
            let (features, result, error) = match aggregate_with_mode(&pairs, mode) {
                Ok(f) => {
                    let (r, e) = split(score_patient(&f, &rule));
                    (Some(f), r, e)
                }
                Err(e) => (None, None, Some(e.to_string())),
            };
            Ok(PatientOutcome { patient_id: id.clone(), features, result, error, slides: per_slide })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n_failed = outcomes.iter().filter(|p| p.result.is_none()).count();
    let mut csv = String::from(ChronicityResult::CSV_HEADER);
    csv.push('\n');
    for p in &outcomes {
        if let Some(r) = &p.result {
            csv.push_str(&r.csv_row(&p.patient_id));
            csv.push('\n');
        }
    }
    let n_patients = outcomes.len();
    let result = ScoreResult { rule: &rule, n_patients, n_failed, patients: outcomes };
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("scores.json"), &envelope("score", ctx, &inputs, &result));
    outputs.add(out.join("scores.csv"), csv.into_bytes());
    outputs.commit()?;
    for p in &result.patients {
        if let Some(e) = &p.error {
            eprintln!("patient {}: {e}", p.patient_id);
        }
    }
    if n_failed == n_patients {
        return Err(Failure { code: EXIT_COMPUTATION, message: "no patient could be scored".into() });
    }
    Ok(n_failed > 0)
}

fn split<T>(r: chronicity::Result<T>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}
