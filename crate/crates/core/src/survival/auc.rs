use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BootstrapConfig;
use crate::{par, stats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

fn split(scores: &[f64], outcomes: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != outcomes.len() {
        return Err(Error::Input(format!("{} scores for {} outcomes", scores.len(), outcomes.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("scores must be finite".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(outcomes).filter(|(_, &o)| o).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(outcomes).filter(|(_, &o)| !o).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Input(format!(
            "AUC needs both outcome classes ({} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    Ok((pos, neg))
}

/// Mann-Whitney estimate: the probability that a positive outranks a
/// negative, ties counting one half. Computed from mid-ranks, whose sums
/// are exact multiples of 1/2.
fn mann_whitney(pos: &[f64], neg: &[f64]) -> f64 {
    let all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let ranks = stats::mid_ranks(&all);
    let n1 = pos.len() as f64;
    let rank_sum: f64 = ranks[..pos.len()].iter().sum();
    (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * neg.len() as f64)
}

/// Area under the ROC curve of `scores` for predicting `outcomes`.
pub fn auc_point(scores: &[f64], outcomes: &[bool]) -> Result<f64> {
    let (pos, neg) = split(scores, outcomes)?;
    Ok(mann_whitney(&pos, &neg))
}

/// AUC with a percentile bootstrap interval. Positives and negatives are
/// resampled separately so every resample keeps both classes.
pub fn auc(scores: &[f64], outcomes: &[bool], config: &BootstrapConfig) -> Result<AucResult> {
    stats::check_level(config.level)?;
    if config.n_resamples == 0 {
        return Err(Error::Input("bootstrap needs at least one resample".into()));
    }
    let (pos, neg) = split(scores, outcomes)?;
    let point = mann_whitney(&pos, &neg);
    let draws = par::map_range(config.n_resamples, |i| {
        let mut rng = stats::substream(config.seed, i as u64);
        let mut idx = Vec::new();
        stats::resample_indices(&mut rng, pos.len(), &mut idx);
        let p: Vec<f64> = idx.iter().map(|&k| pos[k]).collect();
        stats::resample_indices(&mut rng, neg.len(), &mut idx);
        let n: Vec<f64> = idx.iter().map(|&k| neg[k]).collect();
        mann_whitney(&p, &n)
    });
    let (ci_low, ci_high) = stats::percentile_interval(draws, config.level);
    Ok(AucResult {
        auc: point,
        ci_low,
        ci_high,
        n_positive: pos.len(),
        n_negative: neg.len(),
        level: config.level,
        n_resamples: config.n_resamples,
        seed: config.seed,
    })
}
