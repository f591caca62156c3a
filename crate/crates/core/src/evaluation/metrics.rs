//! Per-episode metrics, relativized comparisons, and correlation with human
//! ratings.

use crate::assistance::Episode;
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

/// Precision and recall of one set of assistance options against the
/// annotated ones. No options with a non-empty annotation scores precision 0;
/// an empty annotation is always fully recalled.
pub fn precision_recall(options: &[String], annotated: &[String]) -> (f64, f64) {
    let got: BTreeSet<&String> = options.iter().collect();
    let want: BTreeSet<&String> = annotated.iter().collect();
    let hit = got.intersection(&want).count() as f64;
    let precision = match (got.is_empty(), want.is_empty()) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        _ => hit / got.len() as f64,
    };
    let recall = if want.is_empty() { 1.0 } else { hit / want.len() as f64 };
    (precision, recall)
}

/// Run-weighted precision and recall of an episode.
pub fn episode_precision_recall(ep: &Episode, annotated: &[String]) -> (f64, f64) {
    let z: f64 = ep.runs.iter().map(|r| r.weight).sum();
    ep.runs.iter().fold((0.0, 0.0), |(p, r), run| {
        let (pi, ri) = precision_recall(&run.robot_options, annotated);
        (p + run.weight * pi / z, r + run.weight * ri / z)
    })
}

/// Metrics of one episode on one scenario, relative to a reference episode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub p_true_goal: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub plan_length: f64,
    pub human_cost: f64,
    pub success: f64,
    pub rel_plan_length: Option<f64>,
    pub rel_human_cost: Option<f64>,
}

fn ratio(x: f64, y: f64) -> Option<f64> {
    (y > 0.0).then(|| x / y)
}

pub fn compute_metrics(ep: &Episode, annotated: &[String], reference: Option<&Episode>) -> EpisodeMetrics {
    let (precision, recall) = episode_precision_recall(ep, annotated);
    let plan_length = ep.mean_length();
    let human_cost = ep.mean_human_cost();
    EpisodeMetrics {
        p_true_goal: ep.p_true_goal,
        precision,
        recall,
        plan_length,
        human_cost,
        success: ep.success_rate(),
        rel_plan_length: reference.and_then(|r| ratio(plan_length, r.mean_length())),
        rel_human_cost: reference.and_then(|r| ratio(human_cost, r.mean_human_cost())),
    }
}

/// Mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> Option<MeanSe> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSe { mean, se, n })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("vectors differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least 3 values, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("no ratings")]
    NoRatings,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::Length(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(CorrelationError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Pearson r between model values and per-item mean ratings, with a 95%
/// percentile interval from resampling raters. `ratings[i][j]` is rater `i`'s
/// rating of item `j`, `None` where the rater did not see the item. Resamples
/// whose correlation is undefined are skipped.
pub fn pearson_bootstrap<R: Rng>(
    model: &[f64],
    ratings: &[Vec<Option<f64>>],
    n_boot: usize,
    rng: &mut R,
) -> Result<Correlation, CorrelationError> {
    if ratings.is_empty() {
        return Err(CorrelationError::NoRatings);
    }
    let all: Vec<usize> = (0..ratings.len()).collect();
    let r = pearson(model, &item_means(ratings, &all, model.len())?)?;
    let mut rs = Vec::with_capacity(n_boot);
    let mut pick = vec![0; ratings.len()];
    for _ in 0..n_boot {
        for p in pick.iter_mut() {
            *p = rng.random_range(0..ratings.len());
        }
        if let Ok(r) = item_means(ratings, &pick, model.len()).and_then(|m| pearson(model, &m)) {
            rs.push(r);
        }
    }
    if rs.is_empty() {
        return Ok(Correlation { r, lo: r, hi: r });
    }
    rs.sort_by(f64::total_cmp);
    Ok(Correlation {
        r,
        lo: percentile(&rs, 0.025),
        hi: percentile(&rs, 0.975),
    })
}

fn item_means(ratings: &[Vec<Option<f64>>], raters: &[usize], n: usize) -> Result<Vec<f64>, CorrelationError> {
    let mut sum = vec![0.0; n];
    let mut cnt = vec![0usize; n];
    for &i in raters {
        let row = &ratings[i];
        if row.len() != n {
            return Err(CorrelationError::Length(row.len(), n));
        }
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                sum[j] += v;
                cnt[j] += 1;
            }
        }
    }
    if cnt.contains(&0) {
        return Err(CorrelationError::NoRatings);
    }
    Ok(sum.iter().zip(&cnt).map(|(s, c)| s / *c as f64).collect())
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
