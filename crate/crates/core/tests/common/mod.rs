//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// ln Γ(x) by the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Welch's t-test as in a statistics textbook: (t, df, two-sided p).
pub fn welch_textbook(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
    };
    let (va, vb) = (var(a) / a.len() as f64, var(b) / b.len() as f64);
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2)
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let p = inc_beta(df / 2.0, 0.5, df / (df + t * t));
    (t, df, p)
}

/// Mann–Whitney U by counting pairs (ties count one half), doubled to stay integral.
pub fn pairwise_u2(a: &[f64], b: &[f64]) -> u64 {
    let mut twice = 0;
    for x in a {
        for y in b {
            if x > y {
                twice += 2;
            } else if x == y {
                twice += 1;
            }
        }
    }
    twice
}

/// Exact two-sided rank-sum p by enumerating every way to choose which
/// pooled observations belong to the first sample.
pub fn permutation_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let m = a.len();
    let observed = pairwise_u2(a, b);
    let (mut total, mut le, mut ge) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (i, &v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    x.push(v);
                } else {
                    y.push(v);
                }
            }
            (x, y)
        };
        let u = pairwise_u2(&x, &y);
        total += 1;
        le += u64::from(u <= observed);
        ge += u64::from(u >= observed);
    }
    let tail = le.min(ge) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// BH q-values from the definition: q_i = min over p_j >= p_i of m·p_j / rank_j,
/// where rank_j counts the p-values at or below p_j; capped at 1.
pub fn bh_definition(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| {
                    let rank = p.iter().filter(|&&pk| pk <= pj).count() as f64;
                    pj * m / rank
                })
                .fold(1.0, f64::min)
        })
        .collect()
}

/// AUC by exhaustive positive–negative pairs, ties one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    pairwise_u2(&pos, &neg) as f64 / (2 * pos.len() * neg.len()) as f64
}

/// Logistic log-likelihood written out directly, for finite differences.
pub fn loglik(rows: &[Vec<f64>], y: &[bool], beta: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(r, &yi)| {
            let eta = beta[0] + r.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>();
            let log1pexp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            if yi {
                eta - log1pexp
            } else {
                -log1pexp
            }
        })
        .sum()
}

/// Central-difference gradient of [`loglik`].
pub fn numeric_gradient(rows: &[Vec<f64>], y: &[bool], beta: &[f64], h: f64) -> Vec<f64> {
    (0..beta.len())
        .map(|j| {
            let mut up = beta.to_vec();
            let mut down = beta.to_vec();
            up[j] += h;
            down[j] -= h;
            (loglik(rows, y, &up) - loglik(rows, y, &down)) / (2.0 * h)
        })
        .collect()
}

/// Bernoulli labels for logistic data with the given coefficients (intercept first).
pub fn logistic_sample(rng: &mut ChaCha8Rng, rows: &[Vec<f64>], beta: &[f64]) -> Vec<bool> {
    rows.iter()
        .map(|r| {
            let eta = beta[0] + r.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>();
            rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
        })
        .collect()
}

/// (card, term, printed coefficient) rows of the checked-in transcription.
pub fn transcription() -> Vec<(String, String, String)> {
    include_str!("../fixtures/published_coefficients.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string(), f[2].to_string())
        })
        .collect()
}

/// Coefficient tokens exactly as written in a card's JSON source.
pub fn source_tokens(source: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for line in source.lines() {
        let token_after = |key: &str| {
            line.find(key).map(|i| {
                line[i + key.len()..]
                    .trim_start()
                    .chars()
                    .take_while(|c| c.is_ascii_digit() || *c == '-' || *c == '.')
                    .collect::<String>()
            })
        };
        if let Some(t) = token_after("\"intercept\":") {
            out.insert("(intercept)".to_string(), t);
        }
        if let (Some(v), Some(t)) = (line.find("\"variable\": \""), token_after("\"coefficient\":")) {
            let name: String = line[v + 13..].chars().take_while(|&c| c != '"').collect();
            out.insert(name, t);
        }
    }
    out
}

/// Whether any assignment with the largest hospital in train and the second
/// largest in test reaches the band, by enumerating reachable train totals.
pub fn band_reachable(sizes: &[(String, usize)], lo: f64, hi: f64) -> bool {
    let mut order: Vec<&(String, usize)> = sizes.iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total: usize = sizes.iter().map(|s| s.1).sum();
    let mut sums = BTreeSet::from([order[0].1]);
    for h in &order[2..] {
        let next: Vec<usize> = sums.iter().map(|s| s + h.1).collect();
        sums.extend(next);
    }
    sums.iter().any(|&s| {
        let f = s as f64 / total as f64;
        f >= lo - 1e-12 && f <= hi + 1e-12
    })
}
