//! Significance tests for comparing systems over repeated runs.
//!
//! A difference counts as significant only when the Wilcoxon rank-sum test
//! rejects at level α *and* the percentile bootstrap interval on the mean
//! difference excludes zero on the hypothesized side.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `x` tends to be larger than `y`.
    Greater,
    Less,
    TwoSided,
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::Greater => "greater",
            Alternative::Less => "less",
            Alternative::TwoSided => "two-sided",
        })
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            _ => Err(Error::Config(format!("unknown alternative `{s}`"))),
        }
    }
}

/// Largest combined sample for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 12;

fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Count subsets of size `k` of `1..=n` by their rank sum.
fn rank_sum_counts(n: usize, k: usize) -> Vec<u64> {
    let max_sum = (n * (n + 1)) / 2;
    // counts[j][s]: subsets of size j with sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; k + 1];
    counts[0][0] = 1;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                counts[j][s] += counts[j - 1][s - r];
            }
        }
    }
    counts.swap_remove(k)
}

fn combine_one_sided(upper: f64, lower: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Rank-sum (Mann-Whitney) p value for `x` against `y`.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], alt: Alternative) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Data("rank-sum test needs two non-empty samples".into()));
    }
    let (n, m) = (x.len(), y.len());
    let big_n = n + m;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n].iter().sum();

    if big_n <= EXACT_LIMIT && ties.is_empty() {
        let counts = rank_sum_counts(big_n, n);
        let total: u64 = counts.iter().sum();
        let w = w.round() as usize;
        let upper: u64 = counts[w..].iter().sum();
        let lower: u64 = counts[..=w].iter().sum();
        return Ok(combine_one_sided(
            upper as f64 / total as f64,
            lower as f64 / total as f64,
            alt,
        ));
    }

    let mean = n as f64 * (big_n + 1) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>()
        / (big_n as f64 * (big_n as f64 - 1.0));
    let var = n as f64 * m as f64 / 12.0 * ((big_n + 1) as f64 - tie_term);
    if var <= 0.0 {
        return Ok(1.0);
    }
    let sd = var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let upper = normal.sf((w - mean - 0.5) / sd).min(1.0);
    let lower = normal.cdf((w - mean + 0.5) / sd).min(1.0);
    Ok(combine_one_sided(upper, lower, alt))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub const MIN_RESAMPLES: usize = 1000;
pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Percentile bootstrap interval for `mean(x) - mean(y)`, resampling each
/// group independently with replacement.
pub fn bootstrap_ci(x: &[f64], y: &[f64], n_resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Data("bootstrap needs two non-empty samples".into()));
    }
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::Config(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {n_resamples}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |v: &[f64], rng: &mut ChaCha8Rng| {
        (0..v.len()).map(|_| v[rng.gen_range(0..v.len())]).sum::<f64>() / v.len() as f64
    };
    let mut diffs: Vec<f64> = (0..n_resamples)
        .map(|_| draw(x, &mut rng) - draw(y, &mut rng))
        .collect();
    diffs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&diffs, tail), quantile(&diffs, 1.0 - tail)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_diff: f64,
    pub n_resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub alternative: Alternative,
}

pub fn compare(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<ComparisonResult> {
    let p_value = wilcoxon_rank_sum(x, y, alternative)?;
    let (ci_low, ci_high) = bootstrap_ci(x, y, n_resamples, level, seed)?;
    Ok(ComparisonResult {
        p_value,
        ci_low,
        ci_high,
        mean_diff: mean(x) - mean(y),
        n_resamples,
        level,
        seed,
        alternative,
    })
}

/// Both tests must agree: `p < alpha` and the interval excludes zero on the
/// hypothesized side.
pub fn significant(c: &ComparisonResult, alpha: f64) -> bool {
    let ci_ok = match c.alternative {
        Alternative::Greater => c.ci_low > 0.0,
        Alternative::Less => c.ci_high < 0.0,
        Alternative::TwoSided => c.ci_low > 0.0 || c.ci_high < 0.0,
    };
    c.p_value < alpha && ci_ok
}

/// Sample Pearson correlation coefficient.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data(format!(
            "correlation needs two equal samples of size >= 2 (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Data("correlation undefined for zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmp(p: f64, lo: f64, hi: f64) -> ComparisonResult {
        ComparisonResult {
            p_value: p,
            ci_low: lo,
            ci_high: hi,
            mean_diff: (lo + hi) / 2.0,
            n_resamples: 10_000,
            level: 0.99,
            seed: 0,
            alternative: Alternative::Greater,
        }
    }

    #[test]
    fn exact_small_samples() {
        let p = wilcoxon_rank_sum(&[1., 2., 3.], &[4., 5., 6.], Alternative::Less).unwrap();
        assert!((p - 0.05).abs() < 1e-15);
        let p = wilcoxon_rank_sum(&[4., 5., 6.], &[1., 2., 3.], Alternative::Greater).unwrap();
        assert!((p - 0.05).abs() < 1e-15);
        let p = wilcoxon_rank_sum(&[1., 2., 3.], &[4., 5., 6.], Alternative::TwoSided).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_multisets_two_sided() {
        let x = [0.3, 0.5, 0.9];
        let p = wilcoxon_rank_sum(&x, &x, Alternative::TwoSided).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn exact_distribution_sums_to_one() {
        for n in 2..=6 {
            for k in 1..n {
                let counts = rank_sum_counts(n, k);
                let total: u64 = counts.iter().sum();
                let binom: u64 = (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64);
                assert_eq!(total, binom);
            }
        }
    }

    #[test]
    fn normal_approximation_is_used_for_large_samples() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = (10..30).map(|i| i as f64).collect();
        let p = wilcoxon_rank_sum(&x, &y, Alternative::Less).unwrap();
        assert!(p > 0.0 && p < 0.01);
    }

    #[test]
    fn bootstrap_degenerate_and_seeded() {
        let (lo, hi) = bootstrap_ci(&[0.5; 5], &[0.5; 5], 1000, 0.99, 1).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
        let (lo, hi) = bootstrap_ci(&[2.0; 4], &[0.5; 7], 1000, 0.99, 1).unwrap();
        assert_eq!((lo, hi), (1.5, 1.5));
        let x = [0.1, 0.4, 0.35, 0.8];
        let y = [0.2, 0.1, 0.3];
        assert_eq!(
            bootstrap_ci(&x, &y, 2000, 0.99, 9).unwrap(),
            bootstrap_ci(&x, &y, 2000, 0.99, 9).unwrap()
        );
        assert!(bootstrap_ci(&x, &y, 10, 0.99, 9).is_err());
    }

    #[test]
    fn significance_rule() {
        assert!(significant(&cmp(0.005, 0.01, 0.02), 0.01));
        assert!(!significant(&cmp(0.005, -0.01, 0.02), 0.01));
        assert!(!significant(&cmp(0.02, 0.01, 0.02), 0.01));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_correlation(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_correlation(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson_correlation(&x, &[1.0; 4]).is_err());
    }
}
