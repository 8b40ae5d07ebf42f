use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_design, FitConfig, FitResult};
use super::TrainError;
use crate::model::sigmoid;

/// Share of replicates allowed to fail before the run is aborted.
pub const MAX_SKIPPED_FRACTION: f64 = 0.2;

/// Named feature columns, one row per patient.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, TrainError> {
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(TrainError::DimensionMismatch("row width differs from feature count".into()));
        }
        Ok(FeatureMatrix { names, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Rows restricted to the given column indices.
    pub fn select(&self, columns: &[usize]) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Consensus ranking, most important first (the last one eliminated).
    pub ranking: Vec<String>,
    pub selected_size: usize,
    pub selected: Vec<String>,
    /// Mean out-of-bag accuracy at threshold 0.5, by subset size.
    pub oob_accuracy_by_size: BTreeMap<usize, f64>,
    pub final_model: FitResult,
    pub replicates_used: usize,
    pub replicates_skipped: usize,
}

struct Replicate {
    /// Feature indices in elimination order, the survivor last.
    elimination: Vec<usize>,
    /// OOB accuracy by subset size (index = size).
    accuracy: Vec<Option<f64>>,
}

/// Design matrix (with intercept) for the given rows and columns.
fn design(features: &FeatureMatrix, rows: &[usize], columns: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), columns.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            features.rows[rows[i]][columns[j - 1]]
        }
    })
}

fn column_sd(features: &FeatureMatrix, rows: &[usize], column: usize) -> f64 {
    let values: Vec<f64> = rows.iter().map(|&r| features.rows[r][column]).collect();
    crate::stats::mean_var(&values).1.sqrt()
}

/// Deterministic RNG for one bootstrap replicate.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn run_replicate(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &FitConfig,
    replicate: usize,
) -> Result<Replicate, TrainError> {
    let n = features.n_rows();
    let p = features.names.len();
    let mut rng = replicate_rng(config.rng_seed, replicate);
    let mut in_bag = vec![false; n];
    let boot: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            i
        })
        .collect();
    let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
    let boot_labels: Vec<bool> = boot.iter().map(|&i| labels[i]).collect();
    if !boot_labels.iter().any(|&l| l) || boot_labels.iter().all(|&l| l) {
        return Err(TrainError::SingleClass);
    }

    let mut current: Vec<usize> = (0..p).collect();
    let mut elimination = Vec::with_capacity(p);
    let mut accuracy = vec![None; p + 1];
    while !current.is_empty() {
        let x = design(features, &boot, &current);
        let fit = fit_design(&x, &boot_labels, config)?;

        if !oob.is_empty() {
            let correct = oob
                .iter()
                .filter(|&&i| {
                    let row: Vec<f64> = current.iter().map(|&c| features.rows[i][c]).collect();
                    let retained = sigmoid(fit.eta(&row)) >= 0.5;
                    retained == labels[i]
                })
                .count();
            accuracy[current.len()] = Some(correct as f64 / oob.len() as f64);
        }

        // drop the feature with the smallest standardized coefficient magnitude
        let weakest = current
            .iter()
            .enumerate()
            .map(|(k, &c)| (k, fit.coefficients[k].abs() * column_sd(features, &boot, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
            .expect("non-empty feature set");
        elimination.push(current.remove(weakest));
    }
    Ok(Replicate { elimination, accuracy })
}

#[cfg(feature = "parallel")]
fn run_all(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &FitConfig,
) -> Vec<Result<Replicate, TrainError>> {
    use rayon::prelude::*;
    (0..config.bootstrap_replicates)
        .into_par_iter()
        .map(|r| run_replicate(features, labels, config, r))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &FitConfig,
) -> Vec<Result<Replicate, TrainError>> {
    (0..config.bootstrap_replicates)
        .map(|r| run_replicate(features, labels, config, r))
        .collect()
}

/// Bootstrapped logistic regression with recursive feature elimination.
///
/// Each replicate fits on a bootstrap resample, repeatedly drops the feature
/// with the smallest |β|·sd and scores every subset size on its out-of-bag
/// rows. Replicates are reduced in index order, so results do not depend on
/// scheduling.
pub fn bootstrap_rfe(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &FitConfig,
) -> Result<RfeResult, TrainError> {
    config.validate()?;
    let p = features.names.len();
    if p == 0 {
        return Err(TrainError::DimensionMismatch("no candidate features".into()));
    }
    if features.n_rows() != labels.len() {
        return Err(TrainError::DimensionMismatch("rows and labels differ in length".into()));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(TrainError::SingleClass);
    }

    let outcomes = run_all(features, labels, config);
    let total = outcomes.len();
    let replicates: Vec<Replicate> = outcomes.into_iter().filter_map(Result::ok).collect();
    let skipped = total - replicates.len();
    if skipped as f64 > MAX_SKIPPED_FRACTION * total as f64 {
        return Err(TrainError::TooManySkipped { skipped, total });
    }

    // consensus rank: mean elimination position, later = more important
    let mut position_sum = vec![0.0; p];
    for rep in &replicates {
        for (pos, &f) in rep.elimination.iter().enumerate() {
            position_sum[f] += pos as f64;
        }
    }
    let mut ranking: Vec<usize> = (0..p).collect();
    ranking.sort_by(|&a, &b| position_sum[b].total_cmp(&position_sum[a]).then(a.cmp(&b)));

    let mut oob_accuracy_by_size = BTreeMap::new();
    for size in 1..=p {
        let values: Vec<f64> = replicates.iter().filter_map(|r| r.accuracy[size]).collect();
        if !values.is_empty() {
            oob_accuracy_by_size.insert(size, values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    let selected_size = oob_accuracy_by_size
        .iter()
        .fold(None::<(usize, f64)>, |best, (&size, &acc)| match best {
            Some((_, b)) if acc <= b => best,
            _ => Some((size, acc)),
        })
        .map_or(p, |(size, _)| size);

    let mut chosen: Vec<usize> = ranking[..selected_size].to_vec();
    chosen.sort_unstable();
    let all_rows: Vec<usize> = (0..features.n_rows()).collect();
    let final_model = fit_design(&design(features, &all_rows, &chosen), labels, config)?;

    Ok(RfeResult {
        ranking: ranking.iter().map(|&i| features.names[i].clone()).collect(),
        selected_size,
        selected: chosen.iter().map(|&i| features.names[i].clone()).collect(),
        oob_accuracy_by_size,
        final_model,
        replicates_used: replicates.len(),
        replicates_skipped: skipped,
    })
}
