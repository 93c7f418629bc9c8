//! Cox proportional-hazards regression by Newton-Raphson on the log
//! partial likelihood, with Efron or Breslow handling of tied event times.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::survival::{check_times, Cohort, SurvivalRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

impl std::str::FromStr for Ties {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efron" => Ok(Ties::Efron),
            "breslow" => Ok(Ties::Breslow),
            _ => Err(Error::Config(format!("unknown tie method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxConfig {
    pub ties: Ties,
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Coverage of the Wald intervals.
    pub level: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        CoxConfig { ties: Ties::Efron, tol: 1e-9, max_iter: 50, max_halvings: 20, level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialLikelihood {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major p×p.
    pub hessian: Vec<Vec<f64>>,
}

/// Design data sorted by descending time, with runs of equal times
/// delimited so each risk set is built incrementally.
#[derive(Debug, Clone)]
pub struct CoxProblem {
    names: Vec<String>,
    p: usize,
    events: Vec<bool>,
    x: Vec<f64>,
    runs: Vec<(usize, usize)>,
}

impl CoxProblem {
    pub fn new(names: Vec<String>, records: &[SurvivalRecord], columns: &[usize]) -> Result<CoxProblem> {
        check_times(records)?;
        let p = columns.len();
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));
        let mut x = Vec::with_capacity(records.len() * p);
        for &i in &order {
            for &j in columns {
                let v = *records[i]
                    .covariates
                    .get(j)
                    .ok_or_else(|| Error::Input(format!("{}: missing covariate {j}", records[i].subject_id)))?;
                if !v.is_finite() {
                    return Err(Error::Input(format!("{}: non-finite covariate", records[i].subject_id)));
                }
                x.push(v);
            }
        }
        let mut runs = Vec::new();
        let mut s = 0;
        while s < order.len() {
            let t = records[order[s]].time;
            let mut e = s + 1;
            while e < order.len() && records[order[e]].time == t {
                e += 1;
            }
            runs.push((s, e));
            s = e;
        }
        Ok(CoxProblem {
            names,
            p,
            events: order.iter().map(|&i| records[i].event).collect(),
            x,
            runs,
        })
    }

    pub fn from_cohort(cohort: &Cohort, covariates: &[&str]) -> Result<CoxProblem> {
        let columns = covariates
            .iter()
            .map(|name| cohort.covariate_index(name))
            .collect::<Result<Vec<_>>>()?;
        CoxProblem::new(covariates.iter().map(|s| s.to_string()).collect(), &cohort.records, &columns)
    }

    pub fn n(&self) -> usize {
        self.events.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.p
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn restrict(&self, keep: &[usize]) -> CoxProblem {
        let mut x = Vec::with_capacity(self.n() * keep.len());
        for i in 0..self.n() {
            let row = self.row(i);
            x.extend(keep.iter().map(|&j| row[j]));
        }
        CoxProblem {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            p: keep.len(),
            events: self.events.clone(),
            x,
            runs: self.runs.clone(),
        }
    }

    /// Log partial likelihood with its analytic gradient and Hessian.
    pub fn evaluate(&self, beta: &[f64], ties: Ties) -> PartialLikelihood {
        assert_eq!(beta.len(), self.p, "beta length");
        let p = self.p;
        let eta: Vec<f64> = (0..self.n())
            .map(|i| self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect();
        // Weights are exp(eta - shift); the shift is added back per term.
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        let mut value = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut a1 = vec![0.0; p];
        let mut a2 = vec![0.0; p * p];
        let mut num1 = vec![0.0; p];
        for &(start, end) in &self.runs {
            let mut deaths = 0usize;
            let mut a0 = 0.0;
            a1.iter_mut().for_each(|v| *v = 0.0);
            a2.iter_mut().for_each(|v| *v = 0.0);
            #[allow(clippy::needless_range_loop)]
            for i in start..end {
                let x = self.row(i);
                let w = (eta[i] - shift).exp();
                s0 += w;
                for a in 0..p {
                    s1[a] += w * x[a];
                    for b in 0..p {
                        s2[a * p + b] += w * x[a] * x[b];
                    }
                }
                if self.events[i] {
                    deaths += 1;
                    a0 += w;
                    value += eta[i];
                    for a in 0..p {
                        grad[a] += x[a];
                        a1[a] += w * x[a];
                        for b in 0..p {
                            a2[a * p + b] += w * x[a] * x[b];
                        }
                    }
                }
            }
            for l in 0..deaths {
                let f = match ties {
                    Ties::Efron => l as f64 / deaths as f64,
                    Ties::Breslow => 0.0,
                };
                let den = s0 - f * a0;
                value -= den.ln() + shift;
                for a in 0..p {
                    num1[a] = (s1[a] - f * a1[a]) / den;
                    grad[a] -= num1[a];
                }
                for a in 0..p {
                    for b in 0..p {
                        let second = (s2[a * p + b] - f * a2[a * p + b]) / den;
                        hess[a * p + b] -= second - num1[a] * num1[b];
                    }
                }
            }
        }
        PartialLikelihood {
            value,
            gradient: grad,
            hessian: hess.chunks(p.max(1)).take(p).map(<[f64]>::to_vec).collect(),
        }
    }
}

pub fn partial_loglik(cohort: &Cohort, covariates: &[&str], beta: &[f64], ties: Ties) -> Result<PartialLikelihood> {
    let problem = CoxProblem::from_cohort(cohort, covariates)?;
    if beta.len() != problem.n_covariates() {
        return Err(Error::Input(format!("{} coefficients for {} covariates", beta.len(), problem.n_covariates())));
    }
    Ok(problem.evaluate(beta, ties))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxCoefficient {
    pub name: String,
    pub beta: f64,
    pub hazard_ratio: f64,
    /// The remaining fields are absent for a covariate that is constant
    /// across the cohort: it carries no information and its coefficient is
    /// fixed at 0.
    pub se: Option<f64>,
    pub wald_z: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub estimable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub coefficients: Vec<CoxCoefficient>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    /// Likelihood-ratio test of the whole model against beta = 0.
    pub lr_statistic: f64,
    pub lr_df: usize,
    pub lr_p_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n: usize,
    pub n_events: usize,
    pub ties: Ties,
    pub level: f64,
}

impl CoxFit {
    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.beta).collect()
    }

    /// x·beta for every record of `cohort`, matching covariates by name.
    pub fn linear_predictor(&self, cohort: &Cohort) -> Result<Vec<f64>> {
        let idx = self
            .coefficients
            .iter()
            .map(|c| cohort.covariate_index(&c.name))
            .collect::<Result<Vec<_>>>()?;
        Ok(cohort
            .records
            .iter()
            .map(|r| idx.iter().zip(&self.coefficients).map(|(&j, c)| r.covariates[j] * c.beta).sum())
            .collect())
    }
}

/// Eigenvalue ratio below which the information matrix is treated as
/// singular (collinear covariates).
const CONDITION_FLOOR: f64 = 1e-10;

/// Fits a Cox model on the named covariates of `cohort`.
pub fn cox_fit(cohort: &Cohort, covariates: &[&str], config: &CoxConfig) -> Result<CoxFit> {
    stats::check_level(config.level)?;
    let full = CoxProblem::from_cohort(cohort, covariates)?;
    fit_problem(&full, config)
}

pub fn fit_problem(full: &CoxProblem, config: &CoxConfig) -> Result<CoxFit> {
    if full.n_events() == 0 {
        return Err(Error::Input("Cox regression needs at least one event".into()));
    }
    let p_full = full.n_covariates();
    let informative: Vec<usize> = (0..p_full)
        .filter(|&j| {
            let first = full.row(0)[j];
            (0..full.n()).any(|i| full.row(i)[j] != first)
        })
        .collect();
    let problem = full.restrict(&informative);
    let p = problem.n_covariates();

    let mut beta = vec![0.0; p];
    let null = problem.evaluate(&beta, config.ties);
    let mut current = null.clone();
    let mut iterations = 0;
    let mut converged = p == 0;
    if p > 0 {
        check_conditioning(&current.hessian, problem.names())?;
    }
    while !converged && iterations < config.max_iter {
        // The information can vanish numerically as |beta| runs off to
        // infinity under a monotone likelihood; that is reported below.
        let Ok(step) = newton_step(&current) else {
            break;
        };
        if is_stationary(&current, &step, &beta, config.tol) {
            converged = true;
            break;
        }
        iterations += 1;
        // Rounding in a sum of many terms can hide a true ascent of a
        // few ulps near the optimum, so equal-within-rounding is accepted.
        let floor = current.value - 1e-12 * (1.0 + current.value.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let eval = problem.evaluate(&trial, config.ties);
            if eval.value.is_finite() && eval.value >= floor {
                accepted = Some((trial, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((b, eval)) = accepted else {
            break;
        };
        beta = b;
        current = eval;
    }
    if !converged {
        converged = newton_step(&current).is_ok_and(|s| is_stationary(&current, &s, &beta, config.tol));
    }
    if !converged {
        return Err(Error::Divergence {
            iterations,
            diagnostic: format!(
                "max |beta| = {:.3e}, gradient max-norm = {:.3e}; the likelihood may be monotone (perfect separation)",
                max_abs(&beta),
                max_abs(&current.gradient)
            ),
        });
    }

    let covariance = if p > 0 {
        let info = DMatrix::from_fn(p, p, |a, b| -current.hessian[a][b]);
        Some(
            info.cholesky()
                .ok_or_else(|| Error::Conditioning("information matrix is not positive definite at the optimum".into()))?
                .inverse(),
        )
    } else {
        None
    };
    let z = stats::normal_quantile(1.0 - (1.0 - config.level) / 2.0);
    let mut coefficients = Vec::with_capacity(p_full);
    for j in 0..p_full {
        let name = full.names()[j].clone();
        match informative.iter().position(|&k| k == j) {
            Some(k) => {
                let b = beta[k];
                let se = covariance.as_ref().expect("p > 0")[(k, k)].sqrt();
                let wald = b / se;
                coefficients.push(CoxCoefficient {
                    name,
                    beta: b,
                    hazard_ratio: b.exp(),
                    se: Some(se),
                    wald_z: Some(wald),
                    p_value: Some(stats::normal_two_sided_p(wald)),
                    ci_low: Some((b - z * se).exp()),
                    ci_high: Some((b + z * se).exp()),
                    estimable: true,
                });
            }
            None => coefficients.push(CoxCoefficient {
                name,
                beta: 0.0,
                hazard_ratio: 1.0,
                se: None,
                wald_z: None,
                p_value: None,
                ci_low: None,
                ci_high: None,
                estimable: false,
            }),
        }
    }
    let lr_statistic = (2.0 * (current.value - null.value)).max(0.0);
    Ok(CoxFit {
        coefficients,
        log_likelihood: current.value,
        null_log_likelihood: null.value,
        lr_statistic,
        lr_df: p,
        lr_p_value: if p == 0 { 1.0 } else { stats::chi_square_sf(lr_statistic, p) },
        iterations,
        converged,
        n: full.n(),
        n_events: full.n_events(),
        ties: config.ties,
        level: config.level,
    })
}

/// The gradient is below `tol` and the Newton step is small relative to
/// beta, or the step is below what rounding can resolve. Requiring a small
/// step keeps a monotone likelihood, whose gradient also vanishes as beta
/// diverges, from passing as converged.
fn is_stationary(eval: &PartialLikelihood, step: &[f64], beta: &[f64], tol: f64) -> bool {
    let step_norm = max_abs(step);
    let scale = 1.0 + max_abs(beta);
    (max_abs(&eval.gradient) < tol && step_norm <= 1e-6 * scale) || step_norm <= 1e-12 * scale
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton_step(eval: &PartialLikelihood) -> Result<Vec<f64>> {
    let p = eval.gradient.len();
    let info = DMatrix::from_fn(p, p, |a, b| -eval.hessian[a][b]);
    let chol = info
        .cholesky()
        .ok_or_else(|| Error::Conditioning("information matrix lost positive definiteness".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(&eval.gradient)).iter().copied().collect())
}

fn check_conditioning(hessian: &[Vec<f64>], names: &[String]) -> Result<()> {
    let p = hessian.len();
    let info = DMatrix::from_fn(p, p, |a, b| -hessian[a][b]);
    let eig = info.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    // Negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(max > 0.0) || min / max < CONDITION_FLOOR {
        let k = eig.eigenvalues.imin();
        let involved: Vec<&str> = (0..p)
            .filter(|&j| eig.eigenvectors[(j, k)].abs() > 1e-3)
            .map(|j| names[j].as_str())
            .collect();
        return Err(Error::Conditioning(format!(
            "information matrix condition ratio {:.3e} below {CONDITION_FLOOR:e}; near-collinear covariates: {}",
            if max > 0.0 { min / max } else { 0.0 },
            involved.join(", ")
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(rows: &[(f64, bool, &[f64])], names: &[&str]) -> Cohort {
        Cohort::new(
            names.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .enumerate()
                .map(|(i, &(t, e, x))| SurvivalRecord {
                    subject_id: format!("s{i}"),
                    time: t,
                    event: e,
                    covariates: x.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn null_value_breslow_no_ties() {
        // beta = 0: -Σ_events log |risk set|.
        let c = cohort(
            &[(1.0, true, &[1.0]), (2.0, false, &[0.0]), (3.0, true, &[1.0]), (4.0, true, &[0.0])],
            &["x"],
        );
        let pl = partial_loglik(&c, &["x"], &[0.0], Ties::Breslow).unwrap();
        let expected = -(4.0f64.ln() + 2.0f64.ln() + 1.0f64.ln());
        assert!((pl.value - expected).abs() < 1e-14);
    }

    #[test]
    fn efron_tie_by_hand() {
        // Two tied deaths at t=1 among {a: x=1, b: x=0, c: x=0 censored at 2}.
        // Efron: log L = β - [log(e^β + 2) + log((e^β + 2) - (e^β + 1)/2)].
        let c = cohort(&[(1.0, true, &[1.0]), (1.0, true, &[0.0]), (2.0, false, &[0.0])], &["x"]);
        let b: f64 = 0.7;
        let eb = b.exp();
        let expected = b - ((eb + 2.0).ln() + ((eb + 2.0) - (eb + 1.0) / 2.0).ln());
        let pl = partial_loglik(&c, &["x"], &[b], Ties::Efron).unwrap();
        assert!((pl.value - expected).abs() < 1e-14);
        let breslow = b - 2.0 * (eb + 2.0).ln();
        let pl = partial_loglik(&c, &["x"], &[b], Ties::Breslow).unwrap();
        assert!((pl.value - breslow).abs() < 1e-14);
    }

    #[test]
    fn zero_covariate_is_not_estimable() {
        let c = cohort(
            &[(1.0, true, &[0.0, 1.0]), (2.0, true, &[0.0, 0.0]), (3.0, false, &[0.0, 1.0]), (4.0, true, &[0.0, 0.0])],
            &["zero", "x"],
        );
        let fit = cox_fit(&c, &["zero", "x"], &CoxConfig::default()).unwrap();
        assert_eq!(fit.coefficients[0].beta, 0.0);
        assert_eq!(fit.coefficients[0].hazard_ratio, 1.0);
        assert!(!fit.coefficients[0].estimable);
        assert!(fit.coefficients[1].estimable);
        let only_zero = cox_fit(&c, &["zero"], &CoxConfig::default()).unwrap();
        assert_eq!(only_zero.coefficients[0].hazard_ratio, 1.0);
        assert_eq!(only_zero.lr_df, 0);
    }

    #[test]
    fn collinear_covariates() {
        let rows: Vec<(f64, bool, Vec<f64>)> = (0..12)
            .map(|i| (i as f64 + 1.0, i % 3 != 0, vec![(i % 4) as f64, 2.0 * (i % 4) as f64 + 1.0]))
            .collect();
        let refs: Vec<(f64, bool, &[f64])> = rows.iter().map(|(t, e, x)| (*t, *e, x.as_slice())).collect();
        let c = cohort(&refs, &["a", "b"]);
        assert!(matches!(cox_fit(&c, &["a", "b"], &CoxConfig::default()), Err(Error::Conditioning(_))));
    }

    #[test]
    fn separation_diverges() {
        // Every x=1 subject fails before every x=0 subject.
        let c = cohort(
            &[
                (1.0, true, &[1.0]),
                (2.0, true, &[1.0]),
                (3.0, true, &[1.0]),
                (4.0, true, &[0.0]),
                (5.0, true, &[0.0]),
                (6.0, false, &[0.0]),
            ],
            &["x"],
        );
        let err = cox_fit(&c, &["x"], &CoxConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn no_events_is_input_error() {
        let c = cohort(&[(1.0, false, &[1.0]), (2.0, false, &[0.0])], &["x"]);
        assert!(matches!(cox_fit(&c, &["x"], &CoxConfig::default()), Err(Error::Input(_))));
    }
}
