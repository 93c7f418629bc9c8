use std::path::{Path, PathBuf};

use chronicity::metrics::BootstrapConfig;
use chronicity::survival::{
    auc, cox_fit, km_estimate, logrank, AucResult, Cohort, CoxConfig, CoxFit, KmEstimate, LogRankResult,
    SurvivalRecord, Ties,
};
use clap::{Args, Subcommand};
use serde::Serialize;

use crate::report::{envelope, Inputs, Outputs};
use crate::{Context, Failure, Outcome};

#[derive(Debug, Subcommand)]
pub enum SurvivalCommand {
    /// Kaplan-Meier curves, optionally per stratum with a log-rank test.
    Km(StrataArgs),
    /// Log-rank test between strata.
    Logrank(StrataArgs),
    /// Cox proportional-hazards regression.
    Cox(CoxArgs),
    /// ROC AUC of a risk score for the event outcome.
    Auc(AucArgs),
}

#[derive(Debug, Args)]
pub struct StrataArgs {
    /// Cohort CSV: subject_id,time_years,event,<covariates...>.
    #[arg(long)]
    pub cohort: PathBuf,
    /// Column to split by.
    #[arg(long)]
    pub strata: Option<String>,
    /// Cut points binning a numeric strata column, e.g. 5,9.
    #[arg(long, value_delimiter = ',', requires = "strata")]
    pub cuts: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CoxArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
    /// efron or breslow.
    #[arg(long)]
    pub ties: Option<Ties>,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AucArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    /// Column holding the risk score.
    #[arg(long, conflicts_with = "cox_covariates")]
    pub score: Option<String>,
    /// Use the linear predictor of a Cox model on these columns as score.
    #[arg(long, value_delimiter = ',')]
    pub cox_covariates: Option<Vec<String>>,
    /// Outcome = event by this many years; subjects censored earlier are
    /// dropped. Without it the outcome is the event indicator.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
}

pub fn run(ctx: &mut Context, cmd: SurvivalCommand) -> Outcome {
    match cmd {
        SurvivalCommand::Km(a) => km(ctx, a),
        SurvivalCommand::Logrank(a) => logrank_cmd(ctx, a),
        SurvivalCommand::Cox(a) => cox(ctx, a),
        SurvivalCommand::Auc(a) => auc_cmd(ctx, a),
    }
}

fn load_cohort(inputs: &mut Inputs, path: &Path) -> Result<Cohort, Failure> {
    let text = inputs.read_string(path)?;
    Cohort::from_csv_str(&text).map_err(|e| match e {
        chronicity::Error::Parse(m) => Failure::input(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn strata(cohort: &Cohort, args: &StrataArgs) -> Result<Vec<(String, Vec<SurvivalRecord>)>, Failure> {
    match &args.strata {
        Some(column) => Ok(cohort.stratify(column, args.cuts.as_deref())?),
        None => Ok(vec![("all".to_string(), cohort.records.clone())]),
    }
}

#[derive(Serialize)]
struct StratumCurve {
    stratum: String,
    #[serde(flatten)]
    estimate: KmEstimate,
}

#[derive(Serialize)]
struct KmReport {
    strata_column: Option<String>,
    cuts: Option<Vec<f64>>,
    curves: Vec<StratumCurve>,
    logrank: Option<LogRankResult>,
}

fn km(ctx: &mut Context, args: StrataArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let mut inputs = Inputs::new(ctx)?;
    let cohort = load_cohort(&mut inputs, &args.cohort)?;
    let groups = strata(&cohort, &args)?;
    let mut curves = Vec::with_capacity(groups.len());
    let mut csv = format!("stratum,{}\n", KmEstimate::CSV_HEADER);
    for (label, records) in &groups {
        let estimate = km_estimate(records)?;
        for row in estimate.csv_rows(Some(label)) {
            csv.push_str(&row);
            csv.push('\n');
        }
        curves.push(StratumCurve { stratum: label.clone(), estimate });
    }
    let logrank = if groups.len() > 1 {
        let records: Vec<&[SurvivalRecord]> = groups.iter().map(|(_, r)| r.as_slice()).collect();
        Some(logrank(&records)?)
    } else {
        None
    };
    let report = KmReport { strata_column: args.strata.clone(), cuts: args.cuts.clone(), curves, logrank };
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("km.json"), &envelope("survival km", ctx, &inputs, report));
    outputs.add(out.join("km_points.csv"), csv.into_bytes());
    outputs.commit()?;
    Ok(false)
}

#[derive(Serialize)]
struct LogRankReport {
    strata_column: String,
    cuts: Option<Vec<f64>>,
    strata: Vec<String>,
    sizes: Vec<usize>,
    #[serde(flatten)]
    result: LogRankResult,
}

fn logrank_cmd(ctx: &mut Context, args: StrataArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    let Some(column) = args.strata.clone() else {
        return Err(Failure::input("logrank needs --strata"));
    };
    let mut inputs = Inputs::new(ctx)?;
    let cohort = load_cohort(&mut inputs, &args.cohort)?;
    let groups = strata(&cohort, &args)?;
    let records: Vec<&[SurvivalRecord]> = groups.iter().map(|(_, r)| r.as_slice()).collect();
    let result = logrank(&records)?;
    let report = LogRankReport {
        strata_column: column,
        cuts: args.cuts.clone(),
        strata: groups.iter().map(|(l, _)| l.clone()).collect(),
        sizes: groups.iter().map(|(_, r)| r.len()).collect(),
        result,
    };
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("logrank.json"), &envelope("survival logrank", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}

fn fit(ctx: &Context, cohort: &Cohort, covariates: &[String]) -> Result<CoxFit, Failure> {
    let names: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let config = CoxConfig { ties: ctx.config.ties, level: ctx.config.level, ..CoxConfig::default() };
    Ok(cox_fit(cohort, &names, &config)?)
}

fn cox(ctx: &mut Context, args: CoxArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    if let Some(t) = args.ties {
        ctx.config.ties = t;
    }
    if let Some(l) = args.level {
        ctx.config.level = l;
    }
    let mut inputs = Inputs::new(ctx)?;
    let cohort = load_cohort(&mut inputs, &args.cohort)?;
    let result = fit(ctx, &cohort, &args.covariates)?;
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("cox.json"), &envelope("survival cox", ctx, &inputs, result));
    outputs.commit()?;
    Ok(false)
}

#[derive(Serialize)]
struct AucReport {
    score: String,
    horizon: Option<f64>,
    n_excluded: usize,
    cox: Option<CoxFit>,
    #[serde(flatten)]
    result: AucResult,
}

fn auc_cmd(ctx: &mut Context, args: AucArgs) -> Outcome {
    let out = ctx.out_path()?.clone();
    if let Some(v) = args.resamples {
        ctx.config.resamples = v;
    }
    if let Some(v) = args.level {
        ctx.config.level = v;
    }
    let mut inputs = Inputs::new(ctx)?;
    let cohort = load_cohort(&mut inputs, &args.cohort)?;
    let (score_name, scores, cox) = match (&args.score, &args.cox_covariates) {
        (Some(column), None) => (column.clone(), cohort.column(column)?, None),
        (None, Some(covariates)) => {
            let fit = fit(ctx, &cohort, covariates)?;
            let lp = fit.linear_predictor(&cohort)?;
            (format!("cox({})", covariates.join(",")), lp, Some(fit))
        }
        _ => return Err(Failure::input("give --score or --cox-covariates")),
    };
    let mut kept_scores = Vec::with_capacity(scores.len());
    let mut outcomes = Vec::with_capacity(scores.len());
    for (r, s) in cohort.records.iter().zip(&scores) {
        let outcome = match args.horizon {
            None => Some(r.event),
            Some(h) if r.event && r.time <= h => Some(true),
            Some(h) if r.time > h => Some(false),
            Some(_) => None,
        };
        if let Some(o) = outcome {
            kept_scores.push(*s);
            outcomes.push(o);
        }
    }
    let config = BootstrapConfig { level: ctx.config.level, n_resamples: ctx.config.resamples, seed: ctx.config.seed };
    let result = auc(&kept_scores, &outcomes, &config)?;
    let report = AucReport {
        score: score_name,
        horizon: args.horizon,
        n_excluded: scores.len() - outcomes.len(),
        cox,
        result,
    };
    let mut outputs = Outputs::default();
    outputs.add_json(out.join("auc.json"), &envelope("survival auc", ctx, &inputs, report));
    outputs.commit()?;
    Ok(false)
}
