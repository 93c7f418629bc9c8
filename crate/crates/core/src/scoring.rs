//! Proportion parameters, threshold rules and the chronicity index.
//!
//! A [`ScoringRule`] maps each proportion in [0, 1] to an integer
//! sub-score through an ordered table of breakpoints. The tables are data,
//! so boundary handling is visible in the rule itself and can be replaced
//! with a JSON file.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DiagnosticFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Gs,
    Fc,
    If,
    Ta,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::Gs, Parameter::Fc, Parameter::If, Parameter::Ta];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Gs => "gs",
            Parameter::Fc => "fc",
            Parameter::If => "if",
            Parameter::Ta => "ta",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionParams {
    pub p_gs: f64,
    pub p_fc: f64,
    pub p_if: f64,
    pub p_ta: f64,
}

impl ProportionParams {
    pub fn get(&self, parameter: Parameter) -> f64 {
        match parameter {
            Parameter::Gs => self.p_gs,
            Parameter::Fc => self.p_fc,
            Parameter::If => self.p_if,
            Parameter::Ta => self.p_ta,
        }
    }
}

/// GS and FC are fractions of glomeruli, IF of cortex area, TA of tubular
/// area. A zero denominator is an error, never a silent zero.
pub fn proportions(f: &DiagnosticFeatures) -> Result<ProportionParams> {
    f.validate()?;
    let ratio = |num: u64, den: u64, parameter: Parameter, detail: &'static str| {
        if den == 0 {
            Err(Error::InsufficientTissue { parameter, detail })
        } else {
            Ok(num as f64 / den as f64)
        }
    };
    Ok(ProportionParams {
        p_gs: ratio(f.n_glom_gs, f.n_glom_total, Parameter::Gs, "no glomeruli")?,
        p_fc: ratio(f.n_glom_fc, f.n_glom_total, Parameter::Fc, "no glomeruli")?,
        p_if: ratio(f.area_if, f.area_cortex, Parameter::If, "no cortex")?,
        p_ta: ratio(f.area_ta, f.area_tubule_total, Parameter::Ta, "no tubules")?,
    })
}

/// One row of a threshold table: proportions up to `upto` (inclusive unless
/// `inclusive` is false) score `score`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub upto: f64,
    #[serde(default = "default_inclusive", skip_serializing_if = "is_true")]
    pub inclusive: bool,
    pub score: u32,
}

fn default_inclusive() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

impl Breakpoint {
    fn contains(&self, p: f64) -> bool {
        p < self.upto || (self.inclusive && p == self.upto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoints {
    pub gs: Vec<Breakpoint>,
    pub fc: Vec<Breakpoint>,
    #[serde(rename = "if")]
    pub if_: Vec<Breakpoint>,
    pub ta: Vec<Breakpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule")]
pub struct ScoringRule {
    pub name: String,
    pub breakpoints: Breakpoints,
}

#[derive(Deserialize)]
struct RawRule {
    name: String,
    breakpoints: Breakpoints,
}

impl TryFrom<RawRule> for ScoringRule {
    type Error = Error;

    fn try_from(raw: RawRule) -> Result<Self> {
        ScoringRule::new(raw.name, raw.breakpoints)
    }
}

pub const CONVENTIONAL: &str = "conventional";
pub const NUANCED_EXAMPLE: &str = "nuanced-example";

impl ScoringRule {
    pub fn new(name: impl Into<String>, breakpoints: Breakpoints) -> Result<ScoringRule> {
        let rule = ScoringRule { name: name.into(), breakpoints };
        for parameter in Parameter::ALL {
            validate_table(parameter, rule.table(parameter))?;
        }
        Ok(rule)
    }

    /// Same table for all four parameters.
    pub fn uniform(name: impl Into<String>, table: Vec<Breakpoint>) -> Result<ScoringRule> {
        ScoringRule::new(
            name,
            Breakpoints { gs: table.clone(), fc: table.clone(), if_: table.clone(), ta: table },
        )
    }

    /// 0 for none; 1 below 25%; 2 from 25% to 50% inclusive; 3 above 50%.
    pub fn conventional() -> ScoringRule {
        let bp = |upto, inclusive, score| Breakpoint { upto, inclusive, score };
        ScoringRule::uniform(
            CONVENTIONAL,
            vec![bp(0.0, true, 0), bp(0.25, false, 1), bp(0.50, true, 2), bp(1.0, true, 3)],
        )
        .expect("conventional table is valid")
    }

    /// Demonstration only: splits (0, 50%] into five 10-point bins scored
    /// 1 to 5, with 6 above 50%. Not a published rule.
    pub fn nuanced_example() -> ScoringRule {
        let mut table = vec![Breakpoint { upto: 0.0, inclusive: true, score: 0 }];
        for (i, upto) in [0.1, 0.2, 0.3, 0.4, 0.5].into_iter().enumerate() {
            table.push(Breakpoint { upto, inclusive: true, score: i as u32 + 1 });
        }
        table.push(Breakpoint { upto: 1.0, inclusive: true, score: 6 });
        ScoringRule::uniform(NUANCED_EXAMPLE, table).expect("example table is valid")
    }

    pub fn builtin(name: &str) -> Option<ScoringRule> {
        match name {
            CONVENTIONAL => Some(ScoringRule::conventional()),
            NUANCED_EXAMPLE => Some(ScoringRule::nuanced_example()),
            _ => None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScoringRule> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// A built-in rule name, or else a path to a rule JSON file.
    pub fn resolve(name_or_path: &str) -> Result<ScoringRule> {
        match ScoringRule::builtin(name_or_path) {
            Some(rule) => Ok(rule),
            None if Path::new(name_or_path).exists() => ScoringRule::load(name_or_path),
            None => Err(Error::Config(format!(
                "{name_or_path:?} is neither a built-in rule ({CONVENTIONAL}, {NUANCED_EXAMPLE}) nor a rule file"
            ))),
        }
    }

    pub fn table(&self, parameter: Parameter) -> &[Breakpoint] {
        match parameter {
            Parameter::Gs => &self.breakpoints.gs,
            Parameter::Fc => &self.breakpoints.fc,
            Parameter::If => &self.breakpoints.if_,
            Parameter::Ta => &self.breakpoints.ta,
        }
    }
}

fn validate_table(parameter: Parameter, table: &[Breakpoint]) -> Result<()> {
    let bad = |msg: String| Err(Error::Config(format!("{parameter} breakpoints: {msg}")));
    let Some(last) = table.last() else {
        return bad("table is empty".into());
    };
    for bp in table {
        if !(0.0..=1.0).contains(&bp.upto) {
            return bad(format!("bound {} outside [0, 1]", bp.upto));
        }
    }
    for w in table.windows(2) {
        if w[1].upto <= w[0].upto {
            return bad(format!("bounds not strictly increasing at {}", w[1].upto));
        }
        if w[1].score < w[0].score {
            return bad(format!("scores decrease at bound {}", w[1].upto));
        }
    }
    if last.upto != 1.0 || !last.inclusive {
        return bad("final bound must be 1.0, inclusive".into());
    }
    Ok(())
}

/// Score of the first breakpoint whose bracket contains `p`.
pub fn subscore(p: f64, rule: &ScoringRule, parameter: Parameter) -> Result<u32> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("{parameter} proportion {p} outside [0, 1]")));
    }
    let table = rule.table(parameter);
    validate_table(parameter, table)?;
    Ok(table
        .iter()
        .find(|bp| bp.contains(p))
        .expect("validated table ends at 1.0 inclusive")
        .score)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubScores {
    pub gs: u32,
    pub fc: u32,
    #[serde(rename = "if")]
    pub if_: u32,
    pub ta: u32,
}

impl SubScores {
    pub fn get(&self, parameter: Parameter) -> u32 {
        match parameter {
            Parameter::Gs => self.gs,
            Parameter::Fc => self.fc,
            Parameter::If => self.if_,
            Parameter::Ta => self.ta,
        }
    }
}

pub fn chronicity(sub_scores: &SubScores) -> u32 {
    sub_scores.gs + sub_scores.fc + sub_scores.if_ + sub_scores.ta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChronicityResult {
    pub proportions: ProportionParams,
    pub sub_scores: SubScores,
    pub total: u32,
    pub rule_name: String,
}

impl ChronicityResult {
    pub const CSV_HEADER: &'static str = "patient_id,rule,p_gs,p_fc,p_if,p_ta,gs,fc,if,ta,total";

    /// Proportions are written with the shortest representation that
    /// round-trips, so the CSV loses no precision.
    pub fn csv_row(&self, patient_id: &str) -> String {
        let p = &self.proportions;
        let s = &self.sub_scores;
        format!(
            "{},{},{:?},{:?},{:?},{:?},{},{},{},{},{}",
            patient_id, self.rule_name, p.p_gs, p.p_fc, p.p_if, p.p_ta, s.gs, s.fc, s.if_, s.ta, self.total
        )
    }
}

pub fn score_proportions(p: &ProportionParams, rule: &ScoringRule) -> Result<ChronicityResult> {
    let sub_scores = SubScores {
        gs: subscore(p.p_gs, rule, Parameter::Gs)?,
        fc: subscore(p.p_fc, rule, Parameter::Fc)?,
        if_: subscore(p.p_if, rule, Parameter::If)?,
        ta: subscore(p.p_ta, rule, Parameter::Ta)?,
    };
    Ok(ChronicityResult {
        proportions: *p,
        sub_scores,
        total: chronicity(&sub_scores),
        rule_name: rule.name.clone(),
    })
}

pub fn score_patient(f: &DiagnosticFeatures, rule: &ScoringRule) -> Result<ChronicityResult> {
    score_proportions(&proportions(f)?, rule)
}
