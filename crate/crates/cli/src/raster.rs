use std::path::{Path, PathBuf};

use chronicity::fusion::{fuse as fuse_masks, validate_fusion, FusionSpec, MaskSource, PrecedenceOrder};
use chronicity::raster::manifest::{patch_file_name, PatchEntry, SlideManifest, Stain};
use chronicity::raster::pgm;
use chronicity::raster::tiling::{self, Patch};
use chronicity::raster::{BinaryMask, ClassId, LabelRaster};
use clap::Args;
use serde::Serialize;

use crate::report::{envelope, Inputs, Outputs};
use crate::{Context, Failure, Outcome};

#[derive(Debug, Args)]
pub struct TileArgs {
    /// Label raster (PGM, class codes 0-6).
    #[arg(long)]
    pub input: PathBuf,
    /// Patch side length in pixels.
    #[arg(long)]
    pub patch: Option<usize>,
    /// Defaults to the input file stem.
    #[arg(long)]
    pub slide_id: Option<String>,
    #[arg(long, default_value = "other")]
    pub stain: Stain,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Fusion spec JSON listing mask files and an optional order.
    #[arg(long, conflicts_with = "mask")]
    pub spec: Option<PathBuf>,
    /// A mask as CLASS=PATH; repeatable.
    #[arg(long)]
    pub mask: Vec<String>,
    /// Comma-separated precedence, highest first.
    #[arg(long)]
    pub order: Option<String>,
}

pub fn read_raster(inputs: &mut Inputs, path: &Path) -> Result<LabelRaster, Failure> {
    let bytes = inputs.read(path)?;
    Ok(pgm::raster_from_bytes(&bytes).map_err(|e| pgm::with_path(e, path))?)
}

pub fn read_mask(inputs: &mut Inputs, path: &Path) -> Result<BinaryMask, Failure> {
    let bytes = inputs.read(path)?;
    let img = pgm::decode(&bytes).map_err(|e| pgm::with_path(e, path))?;
    Ok(BinaryMask::from_gray(img.width, img.height, &img.data)?)
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reads a manifest and all of its patches.
pub fn read_tiled(inputs: &mut Inputs, manifest_path: &Path) -> Result<(SlideManifest, Vec<Patch>), Failure> {
    let manifest: SlideManifest = inputs.read_json(manifest_path)?;
    manifest.validate()?;
    let base = parent_dir(manifest_path);
    let mut patches = Vec::with_capacity(manifest.patches.len());
    for e in &manifest.patches {
        let raster = read_raster(inputs, &resolve(&base, &e.path))?;
        patches.push(Patch { row: e.row, col: e.col, raster });
    }
    patches.sort_by_key(|p| (p.row, p.col));
    tiling::order_patches(&manifest.grid, &patches, |p| (p.row, p.col, &p.raster))?;
    Ok((manifest, patches))
}

/// Reads the masks of a fusion spec and fuses them.
pub fn run_fusion(
    inputs: &mut Inputs,
    spec: &FusionSpec,
    base: &Path,
) -> Result<(LabelRaster, Vec<MaskSource>), Failure> {
    let mut sources = Vec::with_capacity(spec.sources.len());
    for e in &spec.sources {
        sources.push(MaskSource { class: e.class, mask: read_mask(inputs, &resolve(base, &e.path))? });
    }
    let (width, height) = match (sources.first(), spec.width, spec.height) {
        (Some(s), _, _) => (s.mask.width(), s.mask.height()),
        (None, Some(w), Some(h)) => (w, h),
        _ => return Err(Failure::input("fusion spec without sources must give width and height")),
    };
    let raster = fuse_masks(width, height, &sources, &spec.order)?;
    Ok((raster, sources))
}

pub fn read_fusion_spec(inputs: &mut Inputs, path: &Path) -> Result<FusionSpec, Failure> {
    inputs.read_json(path)
}

#[derive(Serialize)]
struct TileResult<'a> {
    slide_id: &'a str,
    stain: Stain,
    grid: tiling::PatchGrid,
    n_patches: usize,
}

pub fn tile(ctx: &mut Context, args: TileArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let raster = read_raster(&mut inputs, &args.input)?;
    if let Some(p) = args.patch {
        ctx.config.patch_size = p;
    }
    let slide_id = args
        .slide_id
        .unwrap_or_else(|| args.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let (grid, patches) = tiling::tile(&raster, ctx.config.patch_size)?;
    let mut outputs = Outputs::default();
    let mut entries = Vec::with_capacity(patches.len());
    for p in &patches {
        let name = patch_file_name(p.row, p.col);
        outputs.add(out.join(&name), pgm::raster_to_bytes(&p.raster));
        entries.push(PatchEntry { row: p.row, col: p.col, path: PathBuf::from(name) });
    }
    let manifest = SlideManifest { slide_id: slide_id.clone(), stain: args.stain, grid, patches: entries };
    outputs.add_json(out.join("manifest.json"), &manifest);
    let result = TileResult { slide_id: &slide_id, stain: args.stain, grid, n_patches: patches.len() };
    outputs.add_json(out.join("report.json"), &envelope("tile", ctx, &inputs, result));
    outputs.commit()?;
    Ok(false)
}

pub fn stitch(ctx: &mut Context, args: StitchArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let (manifest, patches) = read_tiled(&mut inputs, &args.manifest)?;
    let raster = tiling::stitch(&manifest.grid, &patches)?;
    let mut outputs = Outputs::default();
    outputs.add(out, pgm::raster_to_bytes(&raster));
    outputs.commit()?;
    Ok(false)
}

fn parse_mask_arg(s: &str) -> Result<(ClassId, PathBuf), Failure> {
    let (class, path) = s
        .split_once('=')
        .ok_or_else(|| Failure::input(format!("--mask expects CLASS=PATH, got {s:?}")))?;
    Ok((class.parse()?, PathBuf::from(path)))
}

pub fn fuse(ctx: &mut Context, args: FuseArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let (mut spec, base) = match &args.spec {
        Some(path) => (read_fusion_spec(&mut inputs, path)?, parent_dir(path)),
        None => {
            if args.mask.is_empty() {
                return Err(Failure::input("give --spec or at least one --mask"));
            }
            let sources = args
                .mask
                .iter()
                .map(|m| parse_mask_arg(m).map(|(class, path)| chronicity::fusion::FusionSourceEntry { class, path }))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = FusionSpec { order: ctx.config.precedence.clone(), sources, width: None, height: None };
            (spec, PathBuf::new())
        }
    };
    if let Some(order) = &args.order {
        spec.order = PrecedenceOrder::parse_list(order)?;
    }
    ctx.config.precedence = spec.order.clone();
    let (raster, sources) = run_fusion(&mut inputs, &spec, &base)?;
    let report = validate_fusion(&raster, &sources, &spec.order);
    let mut outputs = Outputs::default();
    outputs.add(out.join("fused.pgm"), pgm::raster_to_bytes(&raster));
    outputs.add_json(out.join("report.json"), &envelope("fuse", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}
