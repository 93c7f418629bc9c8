//! Segmentation and agreement statistics: Dice with bootstrap confidence
//! intervals, Spearman rank correlation, and Cohen's kappa.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{BinaryMask, ClassId, LabelRaster};
use crate::stats;

/// 2|A∩B| / (|A|+|B|). Two empty masks score 1.
pub fn dice(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, truth is {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let (mut both, mut a, mut b) = (0u64, 0u64, 0u64);
    for (&p, &t) in pred.pixels().iter().zip(truth.pixels()) {
        a += p as u64;
        b += t as u64;
        both += (p && t) as u64;
    }
    Ok(dice_from_counts(both, a, b))
}

fn dice_from_counts(intersection: u64, a: u64, b: u64) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        (2 * intersection) as f64 / (a + b) as f64
    }
}

/// Percentile bootstrap interval for the mean of `samples`. Each resample
/// draws from its own substream of `seed`, so the interval is reproducible
/// regardless of thread count.
pub fn bootstrap_ci(samples: &[f64], level: f64, n_resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Input("bootstrap needs at least one sample".into()));
    }
    if n_resamples == 0 {
        return Err(Error::Input("bootstrap needs at least one resample".into()));
    }
    stats::check_level(level)?;
    let n = samples.len();
    let means = par::map_range(n_resamples, |i| {
        let mut rng = stats::substream(seed, i as u64);
        let mut idx = Vec::with_capacity(n);
        stats::resample_indices(&mut rng, n, &mut idx);
        let draw: Vec<f64> = idx.iter().map(|&k| samples[k]).collect();
        stats::mean(&draw)
    });
    Ok(stats::percentile_interval(means, level))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDice {
    pub image: String,
    pub class: ClassId,
    pub dice: f64,
    /// Neither mask contains the class; the score of 1 is by convention.
    pub both_empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDice {
    pub dice: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_images: usize,
    pub n_both_empty: usize,
}

/// Per-class mean Dice over images with bootstrap intervals, plus the
/// average over classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    pub per_class: BTreeMap<ClassId, ClassDice>,
    pub average: f64,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub per_image: Vec<ImageDice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { level: 0.95, n_resamples: stats::DEFAULT_RESAMPLES, seed: 0 }
    }
}

/// Dice per tissue class for each (name, prediction, truth) image, then
/// per-class means and bootstrap intervals with the image as resampling
/// unit.
pub fn dice_report(
    images: &[(String, LabelRaster, LabelRaster)],
    config: &BootstrapConfig,
    exclude_both_empty: bool,
) -> Result<DiceReport> {
    if images.is_empty() {
        return Err(Error::Input("no images to evaluate".into()));
    }
    let per_image_rows = par::map(images, |(name, pred, truth)| -> Result<Vec<ImageDice>> {
        if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
            return Err(Error::Shape(format!(
                "{name}: prediction is {}x{}, truth is {}x{}",
                pred.width(),
                pred.height(),
                truth.width(),
                truth.height()
            )));
        }
        let mut inter = [0u64; 7];
        let mut pc = [0u64; 7];
        let mut tc = [0u64; 7];
        for (&p, &t) in pred.pixels().iter().zip(truth.pixels()) {
            pc[p.index()] += 1;
            tc[t.index()] += 1;
            if p == t {
                inter[p.index()] += 1;
            }
        }
        Ok(ClassId::TISSUE
            .iter()
            .map(|&c| {
                let i = c.index();
                ImageDice {
                    image: name.clone(),
                    class: c,
                    dice: dice_from_counts(inter[i], pc[i], tc[i]),
                    both_empty: pc[i] + tc[i] == 0,
                }
            })
            .collect())
    });
    let per_image: Vec<ImageDice> = per_image_rows
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut per_class = BTreeMap::new();
    for (k, &class) in ClassId::TISSUE.iter().enumerate() {
        let rows: Vec<&ImageDice> = per_image.iter().filter(|d| d.class == class).collect();
        let n_both_empty = rows.iter().filter(|d| d.both_empty).count();
        let values: Vec<f64> = rows
            .iter()
            .filter(|d| !(exclude_both_empty && d.both_empty))
            .map(|d| d.dice)
            .collect();
        if values.is_empty() {
            continue;
        }
        // Each class gets its own seed stream so intervals do not share draws.
        let (ci_low, ci_high) = bootstrap_ci(
            &values,
            config.level,
            config.n_resamples,
            config.seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )?;
        per_class.insert(
            class,
            ClassDice { dice: stats::mean(&values), ci_low, ci_high, n_images: values.len(), n_both_empty },
        );
    }
    let class_means: Vec<f64> = per_class.values().map(|c| c.dice).collect();
    Ok(DiceReport {
        average: if class_means.is_empty() { f64::NAN } else { stats::mean(&class_means) },
        per_class,
        level: config.level,
        n_resamples: config.n_resamples,
        seed: config.seed,
        per_image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    /// Full permutation distribution (n ≤ 9).
    ExactPermutation,
    /// Student t with n − 2 degrees of freedom.
    TApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: PValueMethod,
}

/// Largest n for which the p-value comes from full enumeration.
pub const SPEARMAN_EXACT_MAX_N: usize = 9;

/// Spearman's rho (Pearson correlation of mid-ranks) with a two-sided
/// p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(Error::Statistics(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Statistics(format!("need at least 3 pairs, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Statistics("non-finite value".into()));
    }
    // Doubled, centred mid-ranks are integers, which keeps the permutation
    // comparison exact.
    let centred = |v: &[f64]| -> Vec<i64> {
        stats::mid_ranks(v).iter().map(|&r| (2.0 * r) as i64 - (n as i64 + 1)).collect()
    };
    let a = centred(x);
    let b = centred(y);
    let saa: i64 = a.iter().map(|v| v * v).sum();
    let sbb: i64 = b.iter().map(|v| v * v).sum();
    if saa == 0 || sbb == 0 {
        return Err(Error::Statistics("constant input, correlation undefined".into()));
    }
    let sab: i64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let rho = (sab as f64 / ((saa as f64) * (sbb as f64)).sqrt()).clamp(-1.0, 1.0);
    let (p_value, method) = if n <= SPEARMAN_EXACT_MAX_N {
        (exact_permutation_p(&a, &b, sab), PValueMethod::ExactPermutation)
    } else if rho.abs() == 1.0 {
        (0.0, PValueMethod::TApproximation)
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        (stats::students_t_two_sided_p(t, df), PValueMethod::TApproximation)
    };
    Ok(SpearmanResult { rho, p_value, n, method })
}

/// Fraction of the n! pairings of `b` against `a` whose cross-product sum is
/// at least as extreme as `observed`. Permutations come from Heap's
/// algorithm; each swap updates the sum in O(1).
fn exact_permutation_p(a: &[i64], b: &[i64], observed: i64) -> f64 {
    let n = b.len();
    let mut b = b.to_vec();
    let mut sum: i64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let threshold = observed.abs();
    let mut hits: u64 = (sum.abs() >= threshold) as u64;
    let mut total: u64 = 1;
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            sum += (a[i] - a[j]) * (b[j] - b[i]);
            b.swap(i, j);
            total += 1;
            hits += (sum.abs() >= threshold) as u64;
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingVector {
    pub rater_id: String,
    pub values: Vec<i64>,
}

impl RatingVector {
    pub fn new(rater_id: impl Into<String>, values: Vec<i64>) -> Self {
        RatingVector { rater_id: rater_id.into(), values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    None,
    Linear,
    Quadratic,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "unweighted" => Ok(Weighting::None),
            "linear" => Ok(Weighting::Linear),
            "quadratic" => Ok(Weighting::Quadratic),
            _ => Err(Error::Config(format!("unknown kappa weighting {s:?}"))),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::None => "none",
            Weighting::Linear => "linear",
            Weighting::Quadratic => "quadratic",
        })
    }
}

/// Cohen's kappa over the categories observed in either vector.
pub fn cohens_kappa(a: &RatingVector, b: &RatingVector, weighting: Weighting) -> Result<f64> {
    let categories: BTreeSet<i64> = a.values.iter().chain(&b.values).copied().collect();
    let categories: Vec<i64> = categories.into_iter().collect();
    cohens_kappa_with_categories(a, b, weighting, &categories)
}

/// Cohen's kappa over a declared ordered category set. Weighted variants
/// use agreement weights 1 − |i−j|/(k−1) (linear) or 1 − ((i−j)/(k−1))²
/// (quadratic) on category positions.
pub fn cohens_kappa_with_categories(
    a: &RatingVector,
    b: &RatingVector,
    weighting: Weighting,
    categories: &[i64],
) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::Statistics(format!(
            "raters {} and {} rated {} and {} subjects",
            a.rater_id,
            b.rater_id,
            a.values.len(),
            b.values.len()
        )));
    }
    if a.values.is_empty() {
        return Err(Error::Statistics("no ratings".into()));
    }
    let position = |v: i64, who: &str| {
        categories
            .iter()
            .position(|&c| c == v)
            .ok_or_else(|| Error::Statistics(format!("rating {v} from {who} is not a declared category")))
    };
    let k = categories.len();
    let mut table = vec![vec![0u64; k]; k];
    for (&va, &vb) in a.values.iter().zip(&b.values) {
        table[position(va, &a.rater_id)?][position(vb, &b.rater_id)?] += 1;
    }
    if k < 2 {
        return Err(Error::DegenerateAgreement);
    }
    let n = a.values.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64 / n).collect();
    let cols: Vec<f64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64 / n).collect();
    let weight = |i: usize, j: usize| -> f64 {
        let d = i.abs_diff(j) as f64 / (k - 1) as f64;
        match weighting {
            Weighting::None => (i == j) as u8 as f64,
            Weighting::Linear => 1.0 - d,
            Weighting::Quadratic => 1.0 - d * d,
        }
    };
    let (mut p_o, mut p_e) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = weight(i, j);
            p_o += w * table[i][j] as f64 / n;
            p_e += w * rows[i] * cols[j];
        }
    }
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(Error::DegenerateAgreement);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
