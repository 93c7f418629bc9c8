use std::path::PathBuf;

use chronicity::fusion::{FusionSourceEntry, FusionSpec, PrecedenceOrder};
use chronicity::raster::manifest::{patch_file_name, PatchEntry, SlideManifest, Stain};
use chronicity::raster::pgm;
use chronicity::raster::tiling;
use chronicity::synth::{generate, generate_cohort, masks_for, CohortSpec, SynthSpec};
use clap::{Args, Subcommand};
use serde::Serialize;

use crate::report::{envelope, Inputs, Outputs};
use crate::{Context, Failure, Outcome};

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// A synthetic slide with ground-truth features and scores.
    Slide(SlideArgs),
    /// A synthetic proportional-hazards cohort CSV.
    Cohort(CohortArgs),
}

#[derive(Debug, Args)]
pub struct SlideArgs {
    /// SynthSpec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Patch size of the tiled copy written under patches/.
    #[arg(long)]
    pub patch: Option<usize>,
    /// Also write overlapping per-class masks and a fusion spec under masks/.
    #[arg(long)]
    pub masks: bool,
    #[arg(long, default_value = "other")]
    pub stain: Stain,
}

#[derive(Debug, Args)]
pub struct CohortArgs {
    /// CohortSpec JSON.
    #[arg(long)]
    pub spec: PathBuf,
}

pub fn run(ctx: &mut Context, cmd: SynthCommand) -> Outcome {
    match cmd {
        SynthCommand::Slide(a) => slide(ctx, a),
        SynthCommand::Cohort(a) => cohort(ctx, a),
    }
}

fn slide(ctx: &mut Context, args: SlideArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let mut spec: SynthSpec = inputs.read_json(&args.spec)?;
    if ctx.seed_flag {
        spec.seed = ctx.config.seed;
    } else {
        ctx.config.seed = spec.seed;
    }
    if let Some(p) = args.patch {
        ctx.config.patch_size = p;
    }
    let slide = generate(&spec)?;
    let truth = slide.truth_record(&spec);
    let slide_id = args.spec.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "slide".into());

    let mut outputs = Outputs::default();
    outputs.add(out.join("slide.pgm"), pgm::raster_to_bytes(&slide.raster));
    let (grid, patches) = tiling::tile(&slide.raster, ctx.config.patch_size)?;
    let mut entries = Vec::new();
    for p in &patches {
        let name = patch_file_name(p.row, p.col);
        outputs.add(out.join("patches").join(&name), pgm::raster_to_bytes(&p.raster));
        entries.push(PatchEntry { row: p.row, col: p.col, path: PathBuf::from(name) });
    }
    let manifest = SlideManifest { slide_id, stain: args.stain, grid, patches: entries };
    outputs.add_json(out.join("patches").join("manifest.json"), &manifest);
    if args.masks {
        let mut sources = Vec::new();
        for m in masks_for(&slide.raster) {
            let name = format!("{}.pgm", m.class.name());
            outputs.add(out.join("masks").join(&name), pgm::encode(m.mask.width(), m.mask.height(), &m.mask.to_gray()));
            sources.push(FusionSourceEntry { class: m.class, path: PathBuf::from(name) });
        }
        let spec = FusionSpec { order: PrecedenceOrder::default(), sources, width: None, height: None };
        outputs.add_json(out.join("masks").join("fusion.json"), &spec);
    }
    outputs.add_json(out.join("truth.json"), &truth);
    outputs.add_json(out.join("report.json"), &envelope("synth slide", ctx, &inputs, &truth));
    outputs.commit()?;
    Ok(false)
}

#[derive(Serialize)]
struct CohortReport<'a> {
    spec: &'a CohortSpec,
    n_patients: usize,
    n_events: usize,
}

fn cohort(ctx: &mut Context, args: CohortArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let mut spec: CohortSpec = inputs.read_json(&args.spec)?;
    if ctx.seed_flag {
        spec.seed = ctx.config.seed;
    } else {
        ctx.config.seed = spec.seed;
    }
    let cohort = generate_cohort(&spec).map_err(Failure::from)?;
    let report = CohortReport { spec: &spec, n_patients: cohort.len(), n_events: cohort.n_events() };
    let mut outputs = Outputs::default();
    outputs.add(out.join("cohort.csv"), cohort.to_csv_string().into_bytes());
    outputs.add_json(out.join("report.json"), &envelope("synth cohort", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}
