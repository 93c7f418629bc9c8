use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chronicity::metrics::{
    cohens_kappa, cohens_kappa_with_categories, dice_report, spearman, BootstrapConfig, RatingVector, Weighting,
};
use chronicity::Error;
use clap::{Args, Subcommand};
use serde::Serialize;

use crate::raster::read_raster;
use crate::report::{envelope, Inputs, Outputs};
use crate::{Context, Failure, Outcome};

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Per-class Dice between predicted and reference label rasters.
    Dice(DiceArgs),
    /// Spearman correlation of two CSV columns.
    Spearman(SpearmanArgs),
    /// Cohen's kappa between two raters.
    Kappa(KappaArgs),
}

#[derive(Debug, Args)]
pub struct DiceArgs {
    /// Directory of predicted label rasters (PGM).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of reference label rasters with the same file names.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Leave out images where neither mask has the class.
    #[arg(long)]
    pub exclude_both_empty: bool,
}

#[derive(Debug, Args)]
pub struct SpearmanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// CSV with columns subject_id,rating for the first rater.
    #[arg(long)]
    pub a: PathBuf,
    /// Same for the second rater.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "none")]
    pub weighting: Weighting,
    /// Ordered category list, e.g. 0,1,2,3; defaults to the observed values.
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<i64>>,
}

pub fn run(ctx: &mut Context, cmd: EvalCommand) -> Outcome {
    match cmd {
        EvalCommand::Dice(a) => dice(ctx, a),
        EvalCommand::Spearman(a) => spearman_cmd(ctx, a),
        EvalCommand::Kappa(a) => kappa(ctx, a),
    }
}

fn pgm_names(dir: &Path) -> Result<Vec<String>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".pgm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn dice(ctx: &mut Context, args: DiceArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    if let Some(v) = args.resamples {
        ctx.config.resamples = v;
    }
    if let Some(v) = args.level {
        ctx.config.level = v;
    }
    let mut inputs = Inputs::new(ctx)?;
    let names = pgm_names(&args.truth)?;
    if names.is_empty() {
        return Err(Failure::input(format!("{}: no .pgm files", args.truth.display())));
    }
    let mut images = Vec::with_capacity(names.len());
    for name in names {
        let pred_path = args.pred.join(&name);
        if !pred_path.exists() {
            return Err(Failure::input(format!("{}: missing prediction for {name}", args.pred.display())));
        }
        let truth = read_raster(&mut inputs, &args.truth.join(&name))?;
        let pred = read_raster(&mut inputs, &pred_path)?;
        images.push((name, pred, truth));
    }
    let config = BootstrapConfig { level: ctx.config.level, n_resamples: ctx.config.resamples, seed: ctx.config.seed };
    let report = dice_report(&images, &config, args.exclude_both_empty)?;
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("dice.json"), &envelope("eval dice", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}

fn read_csv(inputs: &mut Inputs, path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), Failure> {
    let text = inputs.read_string(path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| Failure::input(format!("{}: {e}", path.display()));
    let headers = reader.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(parse_err)?.iter().map(str::to_string).collect());
    }
    Ok((headers, rows))
}

fn column<T: std::str::FromStr>(path: &Path, headers: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<T>, Failure> {
    let j = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Failure::input(format!("{}: no column {name:?}", path.display())))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r[j].parse()
                .map_err(|_| Failure::input(format!("{}: row {}: bad {name} value {:?}", path.display(), i + 2, r[j])))
        })
        .collect()
}

#[derive(Serialize)]
struct SpearmanReport {
    x: String,
    y: String,
    #[serde(flatten)]
    result: chronicity::metrics::SpearmanResult,
}

fn spearman_cmd(ctx: &mut Context, args: SpearmanArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let (headers, rows) = read_csv(&mut inputs, &args.input)?;
    let x: Vec<f64> = column(&args.input, &headers, &rows, &args.x)?;
    let y: Vec<f64> = column(&args.input, &headers, &rows, &args.y)?;
    let result = spearman(&x, &y)?;
    let report = SpearmanReport { x: args.x, y: args.y, result };
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("spearman.json"), &envelope("eval spearman", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}

fn read_ratings(inputs: &mut Inputs, path: &Path) -> Result<(String, BTreeMap<String, i64>), Failure> {
    let (headers, rows) = read_csv(inputs, path)?;
    if headers.len() != 2 || headers[0] != "subject_id" {
        return Err(Failure::input(format!("{}: expected columns subject_id,<rater>", path.display())));
    }
    let values: Vec<i64> = column(path, &headers, &rows, &headers[1])?;
    let mut map = BTreeMap::new();
    for (r, v) in rows.iter().zip(values) {
        if map.insert(r[0].clone(), v).is_some() {
            return Err(Failure::input(format!("{}: subject {} rated twice", path.display(), r[0])));
        }
    }
    Ok((headers[1].clone(), map))
}

#[derive(Serialize)]
struct KappaReport {
    rater_a: String,
    rater_b: String,
    n_subjects: usize,
    weighting: Weighting,
    categories: Option<Vec<i64>>,
    kappa: f64,
}

fn kappa(ctx: &mut Context, args: KappaArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let (name_a, a) = read_ratings(&mut inputs, &args.a)?;
    let (name_b, b) = read_ratings(&mut inputs, &args.b)?;
    if !a.keys().eq(b.keys()) {
        return Err(Failure::input("the two rating files cover different subjects"));
    }
    let va = RatingVector::new(name_a.clone(), a.values().copied().collect());
    let vb = RatingVector::new(name_b.clone(), b.values().copied().collect());
    let kappa = match &args.categories {
        Some(c) => cohens_kappa_with_categories(&va, &vb, args.weighting, c)?,
        None => cohens_kappa(&va, &vb, args.weighting)?,
    };
    let report = KappaReport {
        rater_a: name_a,
        rater_b: name_b,
        n_subjects: a.len(),
        weighting: args.weighting,
        categories: args.categories,
        kappa,
    };
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("kappa.json"), &envelope("eval kappa", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}
