use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Cohort, CohortError};
use crate::model::{Coding, Variable};
use crate::stats::{bh_fdr, kruskal_wallis};

/// A component must explain more than this share of variance to be flagged.
pub const VARIANCE_FLOOR: f64 = 0.10;

const MIN_RECORDS: usize = 10;

/// Principal components of a standardized matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Column-standardized data (n × p).
    pub standardized: DMatrix<f64>,
    /// Loadings (p × k), one column per component.
    pub loadings: DMatrix<f64>,
    /// Scores (n × k).
    pub scores: DMatrix<f64>,
    /// Eigenvalues of the covariance matrix, descending (all p of them).
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    /// Centers and unit-scales `data` column-wise, then keeps the top `k`
    /// eigenvectors of the covariance matrix. Constant columns must be
    /// removed beforehand. Each loading vector is signed so its
    /// largest-magnitude entry is positive.
    pub fn fit(data: &DMatrix<f64>, k: usize) -> Pca {
        let (n, p) = data.shape();
        let mut standardized = data.clone();
        for mut col in standardized.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
        let cov = standardized.transpose() * &standardized / (n as f64 - 1.0);
        let eigen = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
        let k = k.min(p);
        let mut loadings = DMatrix::zeros(p, k);
        for (j, &src) in order.iter().take(k).enumerate() {
            let mut v = eigen.eigenvectors.column(src).clone_owned();
            let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.neg_mut();
            }
            loadings.set_column(j, &v);
        }
        let scores = &standardized * &loadings;
        let eigenvalues = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
        Pca { standardized, loadings, scores, eigenvalues }
    }

    /// Share of total variance explained by component `j`.
    pub fn explained_ratio(&self, j: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total > 0.0 {
            self.eigenvalues.get(j).copied().unwrap_or(0.0) / total
        } else {
            0.0
        }
    }

    /// Standardized data rebuilt from the kept components.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.scores * self.loadings.transpose()
    }
}

/// A grouping to test for batch structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BatchCandidate {
    Hospital,
    Variable(Variable),
}

impl BatchCandidate {
    /// The candidates screened by default: hospital, age, T stage, PSA,
    /// treatment, diabetes, CVD, alcohol and smoking.
    pub fn defaults() -> Vec<BatchCandidate> {
        use Variable::*;
        std::iter::once(BatchCandidate::Hospital)
            .chain(
                [AgeYears, TumorTStage, PsaAtDiagnosis, TreatmentGroup, Diabetes, Cvd, Alcohol, Smoking]
                    .into_iter()
                    .map(BatchCandidate::Variable),
            )
            .collect()
    }
}

impl fmt::Display for BatchCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchCandidate::Hospital => f.write_str("hospital_id"),
            BatchCandidate::Variable(v) => f.write_str(v.name()),
        }
    }
}

impl FromStr for BatchCandidate {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "hospital_id" {
            return Ok(BatchCandidate::Hospital);
        }
        Ok(BatchCandidate::Variable(s.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCandidateResult {
    pub candidate: String,
    pub n_groups: usize,
    /// Variance explained by each kept component.
    pub variance_explained: Vec<f64>,
    /// Kruskal–Wallis p of group labels against each component's scores.
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub flagged: bool,
    /// Components (1-based) responsible for the flag.
    pub flagged_components: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchScreenReport {
    pub components: usize,
    pub alpha: f64,
    pub results: Vec<BatchCandidateResult>,
    pub warnings: Vec<String>,
}

impl BatchScreenReport {
    pub fn any_flagged(&self) -> bool {
        self.results.iter().any(|r| r.flagged)
    }
}

/// Screens labelled groupings against the principal components of `features`.
///
/// `features` are named columns of equal length; `candidates` are named group
/// labellings of the same rows together with the feature columns to leave
/// out for that candidate (its own column). Components must explain more
/// than [`VARIANCE_FLOOR`] of the variance and have BH q < `alpha` to flag.
pub fn screen_features(
    features: &[(String, Vec<f64>)],
    candidates: &[(String, Vec<usize>, Vec<String>)],
    k: usize,
    alpha: f64,
) -> Result<BatchScreenReport, CohortError> {
    let n = features.first().map_or(0, |f| f.1.len());
    if n < MIN_RECORDS {
        return Err(CohortError::TooFewRecords { needed: MIN_RECORDS, got: n });
    }
    let mut warnings = Vec::new();
    let varying: Vec<&(String, Vec<f64>)> = features
        .iter()
        .filter(|(name, col)| {
            let constant = col.iter().all(|v| *v == col[0]);
            if constant {
                warnings.push(format!("constant feature `{name}` dropped"));
            }
            !constant
        })
        .collect();

    let mut results = Vec::with_capacity(candidates.len());
    let mut all_p = Vec::new();
    for (name, groups, exclude) in candidates {
        let cols: Vec<&&(String, Vec<f64>)> =
            varying.iter().filter(|(f, _)| !exclude.contains(f)).collect();
        let n_groups = groups.iter().collect::<std::collections::BTreeSet<_>>().len();
        let (variance_explained, p_values) = if cols.len() < 2 {
            warnings.push(format!("`{name}`: fewer than two non-constant features, not screened"));
            (Vec::new(), Vec::new())
        } else {
            let data = DMatrix::from_fn(n, cols.len(), |i, j| cols[j].1[i]);
            let pca = Pca::fit(&data, k);
            let kept = pca.loadings.ncols();
            let ve: Vec<f64> = (0..kept).map(|j| pca.explained_ratio(j)).collect();
            let ps: Vec<f64> = (0..kept)
                .map(|j| kruskal_wallis(pca.scores.column(j).as_slice(), groups).1)
                .collect();
            (ve, ps)
        };
        all_p.extend(p_values.iter().copied());
        results.push(BatchCandidateResult {
            candidate: name.clone(),
            n_groups,
            variance_explained,
            p_values,
            q_values: Vec::new(),
            flagged: false,
            flagged_components: Vec::new(),
        });
    }

    let q = bh_fdr(&all_p)?;
    let mut q_iter = q.into_iter();
    for r in &mut results {
        r.q_values = q_iter.by_ref().take(r.p_values.len()).collect();
        r.flagged_components = r
            .q_values
            .iter()
            .zip(&r.variance_explained)
            .enumerate()
            .filter(|(_, (&q, &ve))| q < alpha && ve > VARIANCE_FLOOR)
            .map(|(j, _)| j + 1)
            .collect();
        r.flagged = !r.flagged_components.is_empty();
    }
    Ok(BatchScreenReport { components: k, alpha, results, warnings })
}

/// Group index per record for a candidate; continuous variables are cut at quartiles.
fn group_labels(cohort: &Cohort, rows: &[usize], candidate: BatchCandidate) -> Vec<usize> {
    match candidate {
        BatchCandidate::Hospital => {
            let mut ids = BTreeMap::new();
            for &i in rows {
                let next = ids.len();
                ids.entry(cohort.records[i].hospital_id.as_str()).or_insert(next);
            }
            rows.iter().map(|&i| ids[cohort.records[i].hospital_id.as_str()]).collect()
        }
        BatchCandidate::Variable(v) => {
            let values: Vec<f64> = rows.iter().map(|&i| cohort.records[i].get(v).unwrap_or(0.0)).collect();
            match v.coding() {
                Coding::Ordinal { .. } => values.iter().map(|&x| x as usize).collect(),
                Coding::Continuous { .. } => {
                    let mut sorted = values.clone();
                    sorted.sort_by(f64::total_cmp);
                    let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
                    let cuts = [q(0.25), q(0.5), q(0.75)];
                    values.iter().map(|&x| cuts.iter().filter(|&&c| x > c).count()).collect()
                }
            }
        }
    }
}

/// Batch-effect screen on a cohort.
///
/// The features are every active patient variable; rows missing age or PSA
/// are left out of the screen.
pub fn pca_batch_screen(
    cohort: &Cohort,
    candidates: &[BatchCandidate],
    k: usize,
    alpha: f64,
) -> Result<BatchScreenReport, CohortError> {
    let variables = cohort.active_variables();
    let rows: Vec<usize> = (0..cohort.records.len())
        .filter(|&i| variables.iter().all(|&v| cohort.records[i].get(v).is_some()))
        .collect();
    if rows.len() < MIN_RECORDS {
        return Err(CohortError::TooFewRecords { needed: MIN_RECORDS, got: rows.len() });
    }
    let features: Vec<(String, Vec<f64>)> = variables
        .iter()
        .map(|&v| {
            let col = rows.iter().map(|&i| cohort.records[i].get(v).unwrap_or(0.0)).collect();
            (v.name().to_string(), col)
        })
        .collect();
    let labelled: Vec<(String, Vec<usize>, Vec<String>)> = candidates
        .iter()
        .map(|&c| {
            let exclude = match c {
                BatchCandidate::Hospital => Vec::new(),
                BatchCandidate::Variable(v) => vec![v.name().to_string()],
            };
            (c.to_string(), group_labels(cohort, &rows, c), exclude)
        })
        .collect();
    let mut report = screen_features(&features, &labelled, k, alpha)?;
    let skipped = cohort.records.len() - rows.len();
    if skipped > 0 {
        report.warnings.push(format!("{skipped} records with missing age or PSA left out"));
    }
    Ok(report)
}
