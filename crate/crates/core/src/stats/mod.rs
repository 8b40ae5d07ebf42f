//! Univariate screening statistics.

mod rank;
mod hypothesis;

pub use rank::{midranks, tie_groups};
pub use hypothesis::{
    bh_fdr, kruskal_wallis, mann_whitney_u, normality_gate, welch_t, wilcoxon_rank_sum,
    Normality, NormalityVerdict, RankSumMethod, RankSumOutcome, WelchOutcome,
    DEFAULT_EXACT_THRESHOLD, NORMALITY_MIN_N,
};
pub(crate) use hypothesis::mean_var;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("p-value {0} outside [0, 1]")]
    PValueOutOfRange(f64),
    #[error("distribution error: {0}")]
    Distribution(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestUsed {
    WelchT,
    Wilcoxon,
}

/// One variable's univariate comparison between two outcome groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateResult {
    pub variable: String,
    pub test_used: TestUsed,
    pub statistic: f64,
    pub p_value: f64,
    pub q_value: f64,
}

/// Compares each variable between two groups, choosing Welch's t when both
/// groups pass the normality gate and the rank-sum test otherwise, then
/// BH-adjusts across variables.
///
/// `samples` holds (name, group A values, group B values).
pub fn univariate_screen(
    samples: &[(String, Vec<f64>, Vec<f64>)],
    alpha: f64,
) -> Result<Vec<UnivariateResult>, StatError> {
    let mut rows = Vec::with_capacity(samples.len());
    for (name, a, b) in samples {
        let both_normal = [a, b]
            .iter()
            .all(|s| normality_gate(s, alpha).verdict == Normality::Normal);
        let (test_used, statistic, p_value) = if both_normal {
            let r = welch_t(a, b)?;
            (TestUsed::WelchT, r.statistic, r.p_value)
        } else {
            let r = wilcoxon_rank_sum(a, b, DEFAULT_EXACT_THRESHOLD)?;
            (TestUsed::Wilcoxon, r.statistic, r.p_value)
        };
        rows.push(UnivariateResult {
            variable: name.clone(),
            test_used,
            statistic,
            p_value,
            q_value: f64::NAN,
        });
    }
    let q = bh_fdr(&rows.iter().map(|r| r.p_value).collect::<Vec<_>>())?;
    for (row, q) in rows.iter_mut().zip(q) {
        row.q_value = q;
    }
    Ok(rows)
}
