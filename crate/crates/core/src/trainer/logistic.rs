use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TrainError;

/// Coefficient magnitude beyond which a fit is reported as (quasi-)separated.
pub const SEPARATION_LIMIT: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop when the log-likelihood changes by less than this.
    pub convergence_tol: f64,
    /// Added to the diagonal of the information matrix before each solve.
    pub ridge_epsilon: f64,
    pub rng_seed: u64,
    pub bootstrap_replicates: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 50,
            convergence_tol: 1e-8,
            ridge_epsilon: 1e-6,
            rng_seed: 0,
            bootstrap_replicates: 200,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.max_iterations > 0
            && self.convergence_tol > 0.0
            && self.ridge_epsilon > 0.0
            && self.bootstrap_replicates > 0;
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig("all FitConfig values must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    /// One coefficient per design column, in column order.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub separation_flag: bool,
}

impl FitResult {
    /// Linear predictor for one row of covariates.
    pub fn eta(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Parameter vector with the intercept first.
    pub fn beta(&self) -> Vec<f64> {
        std::iter::once(self.intercept).chain(self.coefficients.iter().copied()).collect()
    }
}

/// Design matrix with an intercept column prepended.
pub fn with_intercept(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, TrainError> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(TrainError::DimensionMismatch("ragged design matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] }))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of `beta` (intercept first) on a design with intercept.
pub fn log_likelihood(x: &DMatrix<f64>, y: &[bool], beta: &[f64]) -> f64 {
    let b = DVector::from_column_slice(beta);
    let eta = x * b;
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| if yi { e } else { 0.0 } - softplus(e))
        .sum()
}

/// Gradient of [`log_likelihood`]: Xᵀ(y − p).
pub fn score(x: &DMatrix<f64>, y: &[bool], beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    let eta = x * b;
    let resid = DVector::from_iterator(
        y.len(),
        eta.iter().zip(y).map(|(&e, &yi)| f64::from(yi) - crate::model::sigmoid(e)),
    );
    (x.transpose() * resid).iter().copied().collect()
}

/// Fits a binomial logistic regression by iteratively reweighted least squares.
///
/// `rows` are the covariates without an intercept column; the intercept is
/// added internally and reported separately.
pub fn fit_logistic(rows: &[Vec<f64>], y: &[bool], config: &FitConfig) -> Result<FitResult, TrainError> {
    config.validate()?;
    if rows.len() != y.len() {
        return Err(TrainError::DimensionMismatch(format!(
            "{} rows but {} labels",
            rows.len(),
            y.len()
        )));
    }
    if !y.iter().any(|&v| v) || y.iter().all(|&v| v) {
        return Err(TrainError::SingleClass);
    }
    let x = with_intercept(rows)?;
    fit_design(&x, y, config)
}

pub(crate) fn fit_design(x: &DMatrix<f64>, y: &[bool], config: &FitConfig) -> Result<FitResult, TrainError> {
    let (n, p) = x.shape();
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));

    // start at the intercept-only solution
    let rate = yv.mean();
    let mut beta = DVector::zeros(p);
    beta[0] = (rate / (1.0 - rate)).ln();
    let mut ll = log_likelihood(x, y, beta.as_slice());
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;
        let eta = x * &beta;
        let prob = eta.map(crate::model::sigmoid);
        let weights = prob.map(|v| v * (1.0 - v));
        let gradient = x.transpose() * (&yv - &prob);

        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= weights[i];
        }
        let mut info = x.transpose() * weighted;
        for d in 0..p {
            info[(d, d)] += config.ridge_epsilon;
        }
        let step = info
            .cholesky()
            .map(|c| c.solve(&gradient))
            .ok_or(TrainError::RankDeficientDesign)?;

        let candidate = &beta + &step;
        if candidate.iter().any(|b| !b.is_finite()) {
            break;
        }
        let new_ll = log_likelihood(x, y, candidate.as_slice());
        let change = (new_ll - ll).abs();
        beta = candidate;
        ll = new_ll;
        if change < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let separation_flag = beta.iter().any(|b| b.abs() > SEPARATION_LIMIT);
    Ok(FitResult {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        converged: converged && !separation_flag,
        iterations,
        log_likelihood: ll,
        separation_flag,
    })
}
