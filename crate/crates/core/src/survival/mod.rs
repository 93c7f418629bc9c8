//! Survival and outcome statistics.
//!
//! Cohorts are read from CSV with columns `subject_id, time_years, event`
//! followed by any number of covariate columns. Times are in years.

mod auc;
mod cox;
mod km;
mod logrank;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use auc::{auc, auc_point, AucResult};
pub use cox::{cox_fit, fit_problem, partial_loglik, CoxCoefficient, CoxConfig, CoxFit, CoxProblem, PartialLikelihood, Ties};
pub use km::{km_estimate, KmEstimate, KmPoint};
pub use logrank::{logrank, LogRankResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub subject_id: String,
    /// Follow-up time in years.
    pub time: f64,
    /// True when the endpoint was reached, false when censored.
    pub event: bool,
    /// Values in the order of [`Cohort::covariate_names`].
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(subject_id: impl Into<String>, time: f64, event: bool) -> SurvivalRecord {
        SurvivalRecord { subject_id: subject_id.into(), time, event, covariates: vec![] }
    }
}

pub(crate) fn check_times(records: &[SurvivalRecord]) -> Result<()> {
    for r in records {
        if !r.time.is_finite() || r.time < 0.0 {
            return Err(Error::Input(format!("{}: time {} must be finite and non-negative", r.subject_id, r.time)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cohort {
    pub covariate_names: Vec<String>,
    pub records: Vec<SurvivalRecord>,
    /// Raw text of every column after `event`, numeric or not, used for
    /// stratification by categorical columns.
    #[serde(default)]
    pub text_columns: BTreeMap<String, Vec<String>>,
}

pub const CSV_FIXED_COLUMNS: [&str; 3] = ["subject_id", "time_years", "event"];

impl Cohort {
    pub fn new(covariate_names: Vec<String>, records: Vec<SurvivalRecord>) -> Result<Cohort> {
        check_times(&records)?;
        for r in &records {
            if r.covariates.len() != covariate_names.len() {
                return Err(Error::Input(format!(
                    "{}: {} covariates, cohort declares {}",
                    r.subject_id,
                    r.covariates.len(),
                    covariate_names.len()
                )));
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("{}: non-finite covariate", r.subject_id)));
            }
        }
        let text_columns = covariate_names
            .iter()
            .enumerate()
            .map(|(j, name)| (name.clone(), records.iter().map(|r| format_value(r.covariates[j])).collect()))
            .collect();
        Ok(Cohort { covariate_names, records, text_columns })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names.iter().position(|n| n == name).ok_or_else(|| {
            if self.text_columns.contains_key(name) {
                Error::Input(format!("column {name:?} is not numeric"))
            } else {
                Error::Input(format!("no column named {name:?}"))
            }
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.covariate_index(name)?;
        Ok(self.records.iter().map(|r| r.covariates[j]).collect())
    }

    /// Parses cohort CSV text. Columns after `event` that parse as numbers
    /// in every row become covariates; the rest are kept as text only.
    pub fn from_csv_str(text: &str) -> Result<Cohort> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse(format!("cohort header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.len() < 3 || headers[..3] != CSV_FIXED_COLUMNS {
            return Err(Error::Parse(format!(
                "cohort CSV must start with columns {}, found {:?}",
                CSV_FIXED_COLUMNS.join(","),
                headers
            )));
        }
        let extra = &headers[3..];
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("cohort row {}: {e}", line + 2)))?;
            if rec.len() != headers.len() {
                return Err(Error::Parse(format!("cohort row {} has {} fields", line + 2, rec.len())));
            }
            rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let numeric: Vec<bool> = (0..extra.len())
            .map(|j| rows.iter().all(|r| r[3 + j].parse::<f64>().map(f64::is_finite).unwrap_or(false)))
            .collect();
        let covariate_names: Vec<String> =
            extra.iter().zip(&numeric).filter(|(_, &n)| n).map(|(h, _)| h.clone()).collect();
        let mut records = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let time: f64 = row[1]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad time {:?}", i + 2, row[1])))?;
            let event = match row[2].as_str() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::Parse(format!("row {}: event must be 0 or 1, got {other:?}", i + 2))),
            };
            let covariates = (0..extra.len())
                .filter(|&j| numeric[j])
                .map(|j| row[3 + j].parse::<f64>().expect("checked numeric"))
                .collect();
            records.push(SurvivalRecord { subject_id: row[0].clone(), time, event, covariates });
        }
        let mut cohort = Cohort::new(covariate_names, records)?;
        cohort.text_columns = extra
            .iter()
            .enumerate()
            .map(|(j, h)| (h.clone(), rows.iter().map(|r| r[3 + j].clone()).collect()))
            .collect();
        Ok(cohort)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Cohort> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Cohort::from_csv_str(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = CSV_FIXED_COLUMNS.join(",");
        for name in &self.covariate_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in &self.records {
            write!(out, "{},{},{}", r.subject_id, format_value(r.time), r.event as u8).expect("write to String");
            for v in &r.covariates {
                write!(out, ",{}", format_value(*v)).expect("write to String");
            }
            out.push('\n');
        }
        out
    }

    /// Splits the cohort by the value of `column`. With `cuts`, the column
    /// must be numeric and is binned into intervals at the cut points.
    /// Strata are returned in order of their first appearance for text
    /// values, or in interval order when binning.
    pub fn stratify(&self, column: &str, cuts: Option<&[f64]>) -> Result<Vec<(String, Vec<SurvivalRecord>)>> {
        let labels: Vec<String> = match cuts {
            Some(cuts) => {
                if cuts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Input("strata cut points must be strictly increasing".into()));
                }
                self.column(column)?.iter().map(|&v| bin_label(column, v, cuts)).collect()
            }
            None => self
                .text_columns
                .get(column)
                .cloned()
                .ok_or_else(|| Error::Input(format!("no column named {column:?}")))?,
        };
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<SurvivalRecord>> = BTreeMap::new();
        for (label, rec) in labels.into_iter().zip(&self.records) {
            if !groups.contains_key(&label) {
                order.push(label.clone());
            }
            groups.entry(label).or_default().push(rec.clone());
        }
        if let Some(cuts) = cuts {
            let rank = |l: &String| (0..=cuts.len()).position(|k| bin_label_at(column, k, cuts) == *l);
            order.sort_by_key(rank);
        }
        Ok(order.into_iter().map(|l| { let g = groups.remove(&l).expect("label present"); (l, g) }).collect())
    }
}

fn bin_label(column: &str, v: f64, cuts: &[f64]) -> String {
    let k = cuts.iter().take_while(|&&c| v >= c).count();
    bin_label_at(column, k, cuts)
}

fn bin_label_at(column: &str, k: usize, cuts: &[f64]) -> String {
    match (k, cuts.len()) {
        (_, 0) => "all".to_string(),
        (0, _) => format!("{column}<{}", format_value(cuts[0])),
        (k, n) if k == n => format!("{column}>={}", format_value(cuts[n - 1])),
        (k, _) => format!("{}<={column}<{}", format_value(cuts[k - 1]), format_value(cuts[k])),
    }
}

/// Shortest decimal text that parses back to the same value.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}
