use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use super::rank::{midranks, tie_groups};
use super::StatError;

/// Default total sample size up to which the rank-sum p-value is exact.
pub const DEFAULT_EXACT_THRESHOLD: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOutcome {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// Both samples constant; statistic and p follow the degenerate convention.
    pub zero_variance: bool,
}

/// Two-sided Welch (unequal-variance) t-test of `a` against `b`.
///
/// When both samples are constant the test is undefined: equal constants give
/// t = 0, p = 1 and different constants give t = ±∞, p = 0, and the outcome is
/// flagged with `zero_variance`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchOutcome, StatError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatError::SampleTooSmall { needed: 2, got: a.len().min(b.len()) });
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        let (statistic, p_value) = if ma == mb {
            (0.0, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, 0.0)
        };
        return Ok(WelchOutcome { statistic, df: f64::NAN, p_value, zero_variance: true });
    }
    let statistic = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| StatError::Distribution(e.to_string()))?;
    let p_value = (2.0 * dist.sf(statistic.abs())).min(1.0);
    Ok(WelchOutcome { statistic, df, p_value, zero_variance: false })
}

pub(crate) fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let var = if x.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumOutcome {
    /// Mann–Whitney U of the first sample (midranks for ties).
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Mann–Whitney U of `a` versus `b`: the number of pairs with a > b plus half the ties.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let na = a.len() as f64;
    rank_sum_a - na * (na + 1.0) / 2.0
}

/// Two-sided Wilcoxon rank-sum (Mann–Whitney) test.
///
/// Exact when `|a| + |b| <= exact_threshold` and there are no ties; otherwise
/// the normal approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum(
    a: &[f64],
    b: &[f64],
    exact_threshold: usize,
) -> Result<RankSumOutcome, StatError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatError::EmptySample);
    }
    let u = mann_whitney_u(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ties = tie_groups(&pooled);
    let has_ties = ties.iter().any(|&t| t > 1);
    let (m, n) = (a.len(), b.len());

    if m + n <= exact_threshold && !has_ties {
        let p_value = exact_two_sided_p(u, m, n);
        return Ok(RankSumOutcome { statistic: u, p_value, method: RankSumMethod::Exact });
    }

    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mu = mf * nf / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(RankSumOutcome { statistic: u, p_value, method: RankSumMethod::NormalApproximation })
}

/// Null distribution of U for sample sizes (m, n): counts[u] = #arrangements with U = u.
fn u_distribution(m: usize, n: usize) -> Vec<u128> {
    // table[i][j] is the distribution for sizes (i, j)
    let mut table: Vec<Vec<Vec<u128>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            table[i][j] = if i == 0 || j == 0 {
                vec![1]
            } else {
                // the largest observation belongs to the first sample (adds j to U)
                // or to the second sample (adds nothing)
                let mut dist = vec![0u128; i * j + 1];
                for (u, &c) in table[i - 1][j].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, &c) in table[i][j - 1].iter().enumerate() {
                    dist[u] += c;
                }
                dist
            };
        }
    }
    std::mem::take(&mut table[m][n])
}

fn exact_two_sided_p(u: f64, m: usize, n: usize) -> f64 {
    let dist = u_distribution(m, n);
    let total: u128 = dist.iter().sum();
    let k = u.round() as usize;
    let lower: u128 = dist[..=k].iter().sum();
    let upper: u128 = dist[k..].iter().sum();
    let tail = lower.min(upper) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// Benjamini–Hochberg adjusted p-values (q-values), in input order.
pub fn bh_fdr(p_values: &[f64]) -> Result<Vec<f64>, StatError> {
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatError::PValueOutOfRange(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &idx) in order.iter().enumerate().rev() {
        let rank = (pos + 1) as f64;
        running = running.min(p_values[idx] * m as f64 / rank);
        q[idx] = running;
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normality {
    Normal,
    NonNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityVerdict {
    pub verdict: Normality,
    /// Jarque–Bera statistic (NaN when not computed).
    pub statistic: f64,
    /// Set when the sample was too small to test.
    pub too_small: bool,
}

/// Minimum sample size for the normality gate.
pub const NORMALITY_MIN_N: usize = 8;

/// Jarque–Bera normality check against the chi-square(2) critical value.
pub fn normality_gate(x: &[f64], alpha: f64) -> NormalityVerdict {
    if x.len() < NORMALITY_MIN_N {
        return NormalityVerdict {
            verdict: Normality::NonNormal,
            statistic: f64::NAN,
            too_small: true,
        };
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if m2 == 0.0 {
        // a constant sample is not normally distributed in any useful sense
        return NormalityVerdict { verdict: Normality::NonNormal, statistic: f64::INFINITY, too_small: false };
    }
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    let critical = ChiSquared::new(2.0).expect("valid df").inverse_cdf(1.0 - alpha);
    let verdict = if jb <= critical { Normality::Normal } else { Normality::NonNormal };
    NormalityVerdict { verdict, statistic: jb, too_small: false }
}

/// Kruskal–Wallis H test with tie correction; p from chi-square(k-1).
///
/// Returns (H, p). Fewer than two non-empty groups gives (0, 1).
pub fn kruskal_wallis(values: &[f64], groups: &[usize]) -> (f64, f64) {
    assert_eq!(values.len(), groups.len());
    let k = groups.iter().copied().max().map_or(0, |g| g + 1);
    let ranks = midranks(values);
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&g, r) in groups.iter().zip(&ranks) {
        sums[g] += r;
        counts[g] += 1;
    }
    let nonempty = counts.iter().filter(|&&c| c > 0).count();
    let n = values.len() as f64;
    if nonempty < 2 || n < 2.0 {
        return (0.0, 1.0);
    }
    let h_raw = 12.0 / (n * (n + 1.0))
        * sums
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s * s / c as f64)
            .sum::<f64>()
        - 3.0 * (n + 1.0);
    let tie_term: f64 = tie_groups(values).iter().map(|&t| (t * t * t - t) as f64).sum();
    let correction = 1.0 - tie_term / (n * n * n - n);
    if correction <= 0.0 {
        return (0.0, 1.0);
    }
    let h = (h_raw / correction).max(0.0);
    let dist = ChiSquared::new((nonempty - 1) as f64).expect("valid df");
    (h, dist.sf(h))
}
