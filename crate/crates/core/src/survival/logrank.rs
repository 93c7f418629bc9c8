use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::survival::{check_times, SurvivalRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

/// K-sample log-rank test. The statistic is U'V⁻¹U over the first k − 1
/// groups, where U is observed minus expected events and V its
/// hypergeometric covariance, referred to chi-square with k − 1 df.
pub fn logrank<G: AsRef<[SurvivalRecord]>>(groups: &[G]) -> Result<LogRankResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::Input(format!("log-rank needs at least two groups, got {k}")));
    }
    let mut all: Vec<(f64, bool, usize)> = Vec::new();
    for (g, records) in groups.iter().enumerate() {
        let records = records.as_ref();
        if records.is_empty() {
            return Err(Error::Input(format!("log-rank group {g} is empty")));
        }
        check_times(records)?;
        all.extend(records.iter().map(|r| (r.time, r.event, g)));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut at_risk: Vec<f64> = (0..k).map(|g| groups[g].as_ref().len() as f64).collect();
    let mut observed = vec![0.0; k];
    let mut expected = vec![0.0; k];
    let mut v = DMatrix::<f64>::zeros(k, k);
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let mut j = i;
        let mut deaths = vec![0.0; k];
        let mut leaving = vec![0.0; k];
        while j < all.len() && all[j].0 == t {
            let (_, event, g) = all[j];
            leaving[g] += 1.0;
            if event {
                deaths[g] += 1.0;
            }
            j += 1;
        }
        let d: f64 = deaths.iter().sum();
        if d > 0.0 {
            let n: f64 = at_risk.iter().sum();
            for g in 0..k {
                observed[g] += deaths[g];
                expected[g] += d * at_risk[g] / n;
            }
            if n > 1.0 {
                let factor = d * (n - d) / (n * n * (n - 1.0));
                for a in 0..k {
                    for b in 0..k {
                        let delta = if a == b { n } else { 0.0 };
                        v[(a, b)] += factor * at_risk[a] * (delta - at_risk[b]);
                    }
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
        i = j;
    }

    let m = k - 1;
    let u = DVector::from_iterator(m, (0..m).map(|g| observed[g] - expected[g]));
    let chi_square = if u.iter().all(|&x| x == 0.0) {
        0.0
    } else {
        let vm = v.view((0, 0), (m, m)).into_owned();
        let chol = vm
            .cholesky()
            .ok_or_else(|| Error::Statistics("log-rank variance matrix is singular (too few events?)".into()))?;
        u.dot(&chol.solve(&u)).max(0.0)
    };
    Ok(LogRankResult {
        chi_square,
        df: m,
        p_value: stats::chi_square_sf(chi_square, m),
        observed,
        expected,
    })
}
