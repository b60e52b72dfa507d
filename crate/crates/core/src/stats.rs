//! Rank statistics, bootstrap intervals, box summaries and positional
//! entropy used to compare replicated runs.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

/// Combined sample size at or below which the rank-sum test enumerates the
/// exact permutation distribution.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Alternative {
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankSumTest {
    /// Mann-Whitney U of sample `a`: pairs (x in a, y in b) with x > y, ties counting ½.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn check_sample(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name));
    }
    Ok(())
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    rank_sum_test(a, b, Alternative::TwoSided)
}

/// Wilcoxon rank-sum test with a chosen alternative. Exact enumeration over
/// all splits of the pooled midranks when `a.len() + b.len() <= EXACT_LIMIT`,
/// otherwise the normal approximation with tie and continuity corrections.
pub fn rank_sum_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<RankSumTest> {
    check_sample("sample a", a)?;
    check_sample("sample b", b)?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let offset = (na * (na + 1)) as f64 / 2.0;
    let u = ranks[..na].iter().sum::<f64>() - offset;
    let mean = (na * nb) as f64 / 2.0;
    if na + nb <= EXACT_LIMIT {
        let p = exact_p(&ranks, na, u, mean, alternative, offset);
        return Ok(RankSumTest {
            u,
            p_value: p,
            exact: true,
        });
    }
    let n = (na + nb) as f64;
    let ties: f64 = tie_groups(&pooled).iter().map(|&t| t * t * t - t).sum();
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let sd = math::sqrt(var);
        let d = u - mean;
        match alternative {
            Alternative::TwoSided => {
                let z = (d.abs() - 0.5).max(0.0) / sd;
                (2.0 * (1.0 - math::normal_cdf(z))).min(1.0)
            }
            Alternative::Greater => 1.0 - math::normal_cdf((d - 0.5) / sd),
            Alternative::Less => math::normal_cdf((d + 0.5) / sd),
        }
    };
    Ok(RankSumTest {
        u,
        p_value: p,
        exact: false,
    })
}

fn tie_groups(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        groups.push((end - start) as f64);
        start = end;
    }
    groups
}

fn exact_p(
    ranks: &[f64],
    na: usize,
    u: f64,
    mean: f64,
    alternative: Alternative,
    offset: f64,
) -> f64 {
    // Tolerance absorbs midrank rounding when comparing permuted statistics.
    let tol = 1e-9;
    let n = ranks.len();
    let mut hits = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let sum: f64 = (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| ranks[k])
            .sum();
        let v = sum - offset;
        total += 1;
        let extreme = match alternative {
            Alternative::TwoSided => (v - mean).abs() >= (u - mean).abs() - tol,
            Alternative::Greater => v >= u - tol,
            Alternative::Less => v <= u + tol,
        };
        if extreme {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// One-sided non-inferiority test of `a` against `b`: the null is that `a`
/// falls short of `b` by at least `margin`. Small p supports `a ≥ b − margin`.
pub fn non_inferiority(a: &[f64], b: &[f64], margin: f64) -> Result<RankSumTest> {
    let shifted: Vec<f64> = a.iter().map(|x| x + margin).collect();
    rank_sum_test(&shifted, b, Alternative::Greater)
}

/// Sample quantile by linear interpolation between order statistics
/// (position `(n − 1)·q` on the sorted sample).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> Result<f64> {
    check_sample("median input", xs)?;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile(&sorted, 0.5))
}

/// Percentile bootstrap interval for the mean at the given two-sided level.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    samples: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_sample("bootstrap input", samples)?;
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "bootstrap needs 0 < level < 1 and resamples > 0, got {level} and {resamples}"
        )));
    }
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&means, tail), quantile(&means, 1.0 - tail)))
}

/// Box-plot summary with whiskers at the most extreme points within
/// 1.5·IQR of the quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

impl BoxStats {
    pub fn new(xs: &[f64]) -> Result<Self> {
        check_sample("box input", xs)?;
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        let q1 = quantile(&s, 0.25);
        let q3 = quantile(&s, 0.75);
        let reach = 1.5 * (q3 - q1);
        let whisker_low = s.iter().copied().find(|&x| x >= q1 - reach).unwrap_or(q1);
        let whisker_high = s
            .iter()
            .rev()
            .copied()
            .find(|&x| x <= q3 + reach)
            .unwrap_or(q3);
        Ok(Self {
            n: s.len(),
            mean: math::mean(&s),
            min: s[0],
            q1,
            median: quantile(&s, 0.5),
            q3,
            max: s[s.len() - 1],
            whisker_low,
            whisker_high,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Two result sets on one metric: box summaries and the two-sided rank-sum p.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Comparison {
    pub a: BoxStats,
    pub b: BoxStats,
    pub test: RankSumTest,
}

pub fn compare(a: &[f64], b: &[f64]) -> Result<Comparison> {
    Ok(Comparison {
        a: BoxStats::new(a)?,
        b: BoxStats::new(b)?,
        test: wilcoxon_rank_sum(a, b)?,
    })
}

/// Occupancy counts of 2-D positions on a regular grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Heatmap {
    pub cols: usize,
    pub rows: usize,
    pub low: [f64; 2],
    pub high: [f64; 2],
    /// Row-major counts, row 0 at `low[1]`.
    pub counts: Vec<u64>,
}

impl Heatmap {
    pub fn new(cols: usize, rows: usize, low: [f64; 2], high: [f64; 2]) -> Result<Self> {
        if cols == 0 || rows == 0 || !(high[0] > low[0]) || !(high[1] > low[1]) {
            return Err(Error::InvalidConfig(alloc::format!(
                "heatmap needs a positive grid and non-empty bounds, got {cols}x{rows}"
            )));
        }
        Ok(Self {
            cols,
            rows,
            low,
            high,
            counts: vec![0; cols * rows],
        })
    }

    /// Record one position; positions outside the bounds land in the edge cells.
    pub fn add(&mut self, pos: [f64; 2]) {
        let cell = |v: f64, lo: f64, hi: f64, n: usize| -> usize {
            let t = (v - lo) / (hi - lo);
            let k = math::floor(t * n as f64);
            if k.is_nan() || k < 0.0 {
                0
            } else {
                (k as usize).min(n - 1)
            }
        };
        let c = cell(pos[0], self.low[0], self.high[0], self.cols);
        let r = cell(pos[1], self.low[1], self.high[1], self.rows);
        self.counts[r * self.cols + c] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Normalized occupancy; all zeros when nothing was recorded.
    pub fn occupancy(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.occupancy())
    }
}

/// Shannon entropy `−Σ p ln p` over the cells with positive mass.
pub fn entropy(probs: &[f64]) -> f64 {
    // Subtracting from zero keeps a single occupied cell at +0.
    0.0 - probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * math::ln(p))
        .sum::<f64>()
}
