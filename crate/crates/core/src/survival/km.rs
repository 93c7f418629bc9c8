use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::survival::{check_times, format_value, SurvivalRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: f64,
    pub survival: f64,
    /// Subjects with follow-up ≥ `time`.
    pub at_risk: usize,
    pub events: usize,
    pub censored: usize,
    /// Greenwood standard error; undefined once survival reaches zero.
    pub greenwood_se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmEstimate {
    /// One point per distinct observed time, ascending.
    pub points: Vec<KmPoint>,
    /// First time at which survival is at most 0.5.
    pub median_survival: Option<f64>,
    pub n: usize,
    pub n_events: usize,
}

impl KmEstimate {
    /// Survival just after time `t` (right-continuous step function).
    pub fn survival_at(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time <= t)
            .last()
            .map_or(1.0, |p| p.survival)
    }

    pub const CSV_HEADER: &'static str = "time,survival,ci_low,ci_high,at_risk,events,censored";

    /// Curve points as CSV rows; undefined interval bounds are written as
    /// `NA`. `stratum`, when given, is prepended as an extra column.
    pub fn csv_rows(&self, stratum: Option<&str>) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), format_value);
        self.points
            .iter()
            .map(|p| {
                let row = format!(
                    "{},{},{},{},{},{},{}",
                    format_value(p.time),
                    format_value(p.survival),
                    opt(p.ci_low),
                    opt(p.ci_high),
                    p.at_risk,
                    p.events,
                    p.censored
                );
                match stratum {
                    Some(s) => format!("{s},{row}"),
                    None => row,
                }
            })
            .collect()
    }
}

/// Product-limit survival estimate with Greenwood standard errors and 95%
/// log-transformed pointwise intervals.
///
/// Factors (n − d)/n between censoring events telescope, so each run of
/// uncensored event times is evaluated as a single ratio. With no
/// censoring, survival at t is exactly #(T > t)/n.
pub fn km_estimate(records: &[SurvivalRecord]) -> Result<KmEstimate> {
    if records.is_empty() {
        return Err(Error::Input("Kaplan-Meier needs at least one subject".into()));
    }
    check_times(records)?;
    let mut order: Vec<&SurvivalRecord> = records.iter().collect();
    order.sort_by(|a, b| a.time.total_cmp(&b.time));

    let z = stats::normal_quantile(0.975);
    let n = records.len();
    let mut points = Vec::new();
    let mut at_risk = n;
    let mut survival = 1.0;
    // S = segment_base · (at_risk_after / segment_start) within a segment.
    let mut segment_base = 1.0;
    let mut segment_start = n;
    let mut expected_at_risk = n;
    let mut greenwood_sum = 0.0;
    let mut undefined_se = false;
    let mut median = None;
    let mut i = 0;
    while i < order.len() {
        let t = order[i].time;
        let mut j = i;
        let mut events = 0;
        while j < order.len() && order[j].time == t {
            events += order[j].event as usize;
            j += 1;
        }
        let censored = (j - i) - events;
        if events > 0 {
            if at_risk != expected_at_risk {
                segment_base = survival;
                segment_start = at_risk;
            }
            let after = at_risk - events;
            survival = segment_base * (after as f64 / segment_start as f64);
            expected_at_risk = after;
            if after == 0 {
                undefined_se = true;
            } else {
                greenwood_sum += events as f64 / (at_risk as f64 * after as f64);
            }
            if median.is_none() && survival <= 0.5 {
                median = Some(t);
            }
        }
        let (greenwood_se, ci_low, ci_high) = if undefined_se || survival == 0.0 {
            (None, None, None)
        } else {
            let log_se = greenwood_sum.sqrt();
            (
                Some(survival * log_se),
                Some((survival * (-z * log_se).exp()).clamp(0.0, 1.0)),
                Some((survival * (z * log_se).exp()).clamp(0.0, 1.0)),
            )
        };
        points.push(KmPoint { time: t, survival, at_risk, events, censored, greenwood_se, ci_low, ci_high });
        at_risk -= j - i;
        i = j;
    }
    Ok(KmEstimate {
        points,
        median_survival: median,
        n,
        n_events: records.iter().filter(|r| r.event).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(time: f64, event: bool) -> SurvivalRecord {
        SurvivalRecord::new("s", time, event)
    }

    #[test]
    fn hand_product_limit() {
        let km = km_estimate(&[rec(1.0, true), rec(2.0, false), rec(3.0, true)]).unwrap();
        assert_eq!(km.survival_at(1.0), 2.0 / 3.0);
        assert_eq!(km.survival_at(2.0), 2.0 / 3.0);
        assert_eq!(km.survival_at(3.0), 0.0);
        assert_eq!(km.survival_at(0.5), 1.0);
        assert_eq!(km.median_survival, Some(3.0));
        assert_eq!(km.points[0].at_risk, 3);
        assert_eq!(km.points[2].at_risk, 1);
        assert_eq!(km.points[2].greenwood_se, None);
        // Greenwood at t=1: S² · 1/(3·2).
        let se = km.points[0].greenwood_se.unwrap();
        assert!((se - (2.0 / 3.0) * (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_events_is_flat() {
        let km = km_estimate(&[rec(1.0, false), rec(4.0, false)]).unwrap();
        assert!(km.points.iter().all(|p| p.survival == 1.0));
        assert_eq!(km.median_survival, None);
    }

    #[test]
    fn tied_event_and_censoring() {
        // Censoring at an event time counts the censored subject at risk.
        let km = km_estimate(&[rec(1.0, true), rec(1.0, false), rec(2.0, true), rec(3.0, false)]).unwrap();
        assert_eq!(km.survival_at(1.0), 0.75);
        assert_eq!(km.survival_at(2.0), 0.75 * 0.5);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(km_estimate(&[]).is_err());
        assert!(km_estimate(&[rec(f64::NAN, true)]).is_err());
    }

    #[test]
    fn csv_rows_mark_undefined_bounds() {
        let km = km_estimate(&[rec(1.0, true)]).unwrap();
        assert_eq!(km.csv_rows(Some("all")), vec!["all,1,0,NA,NA,1,1,0"]);
    }
}
