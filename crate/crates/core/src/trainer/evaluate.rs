use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::{logit, sigmoid, Covariates, ModelCard};
use crate::stats::mann_whitney_u;

/// Default classification threshold on p_ed.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// ROC curve from a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false positive rate, true positive rate), from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// Cumulative (false positives, true positives) behind each point.
    pub counts: Vec<(u64, u64)>,
    pub auc: f64,
    pub positives: u64,
    pub negatives: u64,
}

impl RocCurve {
    /// Trapezoidal area under `points`, accumulated in integer counts so the
    /// result is the exact rational area rounded once.
    pub fn trapezoid_area(&self) -> f64 {
        let twice: u128 = self
            .counts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) as u128 * (w[1].1 + w[0].1) as u128)
            .sum();
        twice as f64 / (2 * self.positives as u128 * self.negatives as u128) as f64
    }
}

fn check_classes(labels: &[bool]) -> Result<(u64, u64), TrainError> {
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(TrainError::SingleClass);
    }
    Ok((pos, neg))
}

/// ROC points and AUC for `scores` where `labels[i]` marks the positive class.
///
/// AUC is the Mann–Whitney probability that a positive outscores a negative,
/// ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve, TrainError> {
    if scores.len() != labels.len() {
        return Err(TrainError::DimensionMismatch("scores and labels differ in length".into()));
    }
    let (positives, negatives) = check_classes(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut counts = vec![(0u64, 0u64)];
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        counts.push((fp, tp));
    }
    let points = counts
        .iter()
        .map(|&(f, t)| (f as f64 / negatives as f64, t as f64 / positives as f64))
        .collect();

    let pos_scores: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg_scores: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let u = mann_whitney_u(&pos_scores, &neg_scores);
    let auc = u / (positives as f64 * negatives as f64);

    Ok(RocCurve { points, counts, auc, positives, negatives })
}

/// Confusion table and derived rates at one threshold. Positive class is ED.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Classifies `p_ed >= threshold` as ED and tallies against `is_ed`.
pub fn confusion_at(p_ed: &[f64], is_ed: &[bool], threshold: f64) -> Result<Confusion, TrainError> {
    if p_ed.len() != is_ed.len() {
        return Err(TrainError::DimensionMismatch("scores and labels differ in length".into()));
    }
    check_classes(is_ed)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &ed) in p_ed.iter().zip(is_ed) {
        match (p >= threshold, ed) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: u64, b: u64| a as f64 / b as f64;
    Ok(Confusion {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: ratio(tp + tn, tp + fp + tn + fn_),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub n: usize,
}

/// Equal-count calibration bins of predicted retention probability against
/// observed retention. Runs of identical predictions are never split.
pub fn calibration_curve(
    p_retained: &[f64],
    retained: &[bool],
    bins: usize,
) -> Result<Vec<CalibrationBin>, TrainError> {
    let n = p_retained.len();
    if n != retained.len() {
        return Err(TrainError::DimensionMismatch("predictions and labels differ in length".into()));
    }
    if bins == 0 || n < bins {
        return Err(TrainError::TooFewRecords { needed: bins.max(1), got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p_retained[a].total_cmp(&p_retained[b]));

    let mut out = Vec::with_capacity(bins);
    let (mut sum_p, mut events, mut count) = (0.0, 0usize, 0usize);
    let mut next_edge = 1usize;
    let mut i = 0;
    while i < n {
        // take a whole run of equal predictions
        let v = p_retained[order[i]];
        while i < n && p_retained[order[i]] == v {
            sum_p += v;
            events += usize::from(retained[order[i]]);
            count += 1;
            i += 1;
        }
        if i * bins >= next_edge * n || i == n {
            out.push(CalibrationBin {
                mean_predicted: sum_p / count as f64,
                observed_rate: events as f64 / count as f64,
                n: count,
            });
            (sum_p, events, count) = (0.0, 0, 0);
            while next_edge * n <= i * bins {
                next_edge += 1;
            }
        }
    }
    Ok(out)
}

/// Maximum-likelihood intercept shift δ for fixed linear predictors `etas`:
/// the root of Σ (y − σ(η + δ)) = 0.
pub fn calibrate_offset(etas: &[f64], retained: &[bool]) -> Result<f64, TrainError> {
    if etas.len() != retained.len() {
        return Err(TrainError::DimensionMismatch("predictions and labels differ in length".into()));
    }
    check_classes(retained)?;
    let observed = retained.iter().filter(|&&r| r).count() as f64;
    let n = etas.len() as f64;
    let score = |d: f64| observed - etas.iter().map(|&e| sigmoid(e + d)).sum::<f64>();
    let info = |d: f64| {
        etas.iter()
            .map(|&e| {
                let p = sigmoid(e + d);
                p * (1.0 - p)
            })
            .sum::<f64>()
    };

    // the score is strictly decreasing in δ; keep a bracket so Newton cannot wander
    let mean_eta = etas.iter().sum::<f64>() / n;
    let mut delta = logit(observed / n) - mean_eta;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while score(delta + lo) < 0.0 {
        lo *= 2.0;
    }
    while score(delta + hi) > 0.0 {
        hi *= 2.0;
    }
    let (mut lo, mut hi) = (delta + lo, delta + hi);
    for _ in 0..100 {
        let g = score(delta);
        if g.abs() <= 1e-12 * n {
            return Ok(delta);
        }
        if g > 0.0 {
            lo = delta;
        } else {
            hi = delta;
        }
        let h = info(delta);
        let newton = delta + g / h;
        delta = if h > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * (1.0 + delta.abs()) {
            return Ok(delta);
        }
    }
    Err(TrainError::NonConvergence("calibration offset".into()))
}

/// Recalibration in the large of `card` on `records`: the intercept shift that
/// makes mean predicted retention equal the observed retention rate.
pub fn calibrate_in_the_large<R: Covariates>(
    card: &ModelCard,
    records: &[R],
    retained: &[bool],
) -> Result<f64, TrainError> {
    let etas = records
        .iter()
        .map(|r| card.linear_predictor(r))
        .collect::<Result<Vec<_>, _>>()?;
    calibrate_offset(&etas, retained)
}

/// Discrimination and calibration summary for one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub calibration_bins: Vec<CalibrationBin>,
}

/// Evaluates predicted retention probabilities against observed retention.
///
/// ED is the positive class: scores are p_ed = 1 − p_retained.
pub fn evaluate_predictions(
    p_retained: &[f64],
    retained: &[bool],
    threshold: f64,
    calibration_bins: usize,
) -> Result<EvalReport, TrainError> {
    let p_ed: Vec<f64> = p_retained.iter().map(|p| 1.0 - p).collect();
    let is_ed: Vec<bool> = retained.iter().map(|r| !r).collect();
    let confusion = confusion_at(&p_ed, &is_ed, threshold)?;
    let roc = roc_auc(&p_ed, &is_ed)?;
    let bins = calibration_curve(p_retained, retained, calibration_bins.min(p_retained.len()))?;
    Ok(EvalReport {
        n: p_retained.len(),
        threshold,
        tp: confusion.tp,
        fp: confusion.fp,
        tn: confusion.tn,
        fn_: confusion.fn_,
        sensitivity: confusion.sensitivity,
        specificity: confusion.specificity,
        accuracy: confusion.accuracy,
        auc: roc.auc,
        roc_points: roc.points,
        calibration_bins: bins,
    })
}
