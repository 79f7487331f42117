//! By-item statistics: within-item confidence intervals and paired sign-flip
//! permutation tests.
//!
//! Intervals follow Masson & Loftus (2003): every cell is shifted by
//! `grand_mean − item_mean` before a per-condition t interval is taken, which
//! removes between-item variance from the error bars. A matrix with a single
//! condition has nothing to adjust against and gets an ordinary t interval.
//!
//! The permutation test flips the sign of each by-item difference. With `n`
//! items and `2ⁿ ≤ n_perm` every assignment is enumerated and the p-value is
//! exact; otherwise `n_perm` assignments are drawn, assignment `i` from its
//! own generator stream, and `p = (1 + hits) / (1 + n_perm)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::metrics::MetricResult;
use crate::rng::SplitMix64;

/// Relative slack when comparing permuted statistics with the observed one,
/// so that assignments equal to it up to rounding count as at least as
/// extreme.
const TIE_TOLERANCE: f64 = 1e-9;

/// Items × conditions table of values in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMatrix {
    pub conditions: Vec<String>,
    pub items: Vec<u64>,
    /// One row per item, one column per condition.
    pub values: Vec<Vec<f64>>,
}

impl ConditionMatrix {
    pub fn new(conditions: Vec<String>, items: Vec<u64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self {
            conditions,
            items,
            values,
        };
        m.check()?;
        Ok(m)
    }

    /// Build from per-condition metric results, keeping items present in all.
    pub fn from_metrics(metrics: &[&MetricResult]) -> Result<Self> {
        let conditions = metrics.iter().map(|m| m.id()).collect();
        let Some(first) = metrics.first() else {
            return Err(Error::Stats("no conditions".into()));
        };
        let mut items = Vec::new();
        let mut values = Vec::new();
        for id in first.per_item.keys() {
            let row: Option<Vec<f64>> = metrics
                .iter()
                .map(|m| m.per_item.get(id).copied())
                .collect();
            match row {
                Some(row) => {
                    items.push(*id);
                    values.push(row);
                }
                None => {
                    return Err(Error::Stats(format!(
                        "item {id} is missing from some conditions"
                    )))
                }
            }
        }
        if metrics.iter().any(|m| m.per_item.len() != items.len()) {
            return Err(Error::Stats("conditions cover different items".into()));
        }
        Self::new(conditions, items, values)
    }

    fn check(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::Stats("matrix has no conditions".into()));
        }
        if self.items.len() != self.values.len() {
            return Err(Error::Stats("item ids and rows differ in number".into()));
        }
        for (id, row) in self.items.iter().zip(&self.values) {
            if row.len() != self.conditions.len() {
                return Err(Error::Stats(format!(
                    "item {id} has {} values for {} conditions",
                    row.len(),
                    self.conditions.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Stats(format!(
                    "item {id} has a missing or non-finite value"
                )));
            }
        }
        Ok(())
    }

    pub fn grand_mean(&self) -> f64 {
        let n = (self.items.len() * self.conditions.len()) as f64;
        self.values.iter().flatten().sum::<f64>() / n
    }

    /// Cells shifted by `grand_mean − item_mean`.
    pub fn adjusted(&self) -> Vec<Vec<f64>> {
        let grand = self.grand_mean();
        self.values
            .iter()
            .map(|row| {
                let item_mean = row.iter().sum::<f64>() / row.len() as f64;
                row.iter().map(|v| v - item_mean + grand).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub condition: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub level: f64,
    pub intervals: Vec<Interval>,
}

impl IntervalEstimate {
    pub fn get(&self, condition: &str) -> Option<&Interval> {
        self.intervals.iter().find(|i| i.condition == condition)
    }
}

/// The `q` quantile of Student's t with `df` degrees of freedom.
///
/// The incomplete-beta inversion loses accuracy for very large `df`, where
/// a Cornish-Fisher expansion around the normal quantile is used instead.
pub fn t_quantile(q: f64, df: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Stats(format!("quantile {q} is not in (0, 1)")));
    }
    if df > 1e5 {
        let z = Normal::standard().inverse_cdf(q);
        let (z2, v) = (z * z, df);
        return Ok(z
            + z * (z2 + 1.0) / (4.0 * v)
            + z * (5.0 * z2 * z2 + 16.0 * z2 + 3.0) / (96.0 * v * v)
            + z * (3.0 * z2.powi(3) + 19.0 * z2 * z2 + 17.0 * z2 - 15.0) / (384.0 * v.powi(3)));
    }
    let t =
        StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Stats(format!("t distribution: {e}")))?;
    Ok(t.inverse_cdf(q))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Stats(format!(
            "confidence level {level} is not in (0, 1)"
        )))
    }
}

fn interval_of(condition: String, column: &[f64], t: f64) -> Interval {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = t * var.sqrt() / n.sqrt();
    Interval {
        condition,
        mean,
        lower: mean - half,
        upper: mean + half,
    }
}

/// Within-item adjusted intervals, one per condition. A single-condition
/// matrix falls back to [`t_interval`].
pub fn within_item_ci(matrix: &ConditionMatrix, level: f64) -> Result<IntervalEstimate> {
    matrix.check()?;
    check_level(level)?;
    let n = matrix.items.len();
    if n < 2 {
        return Err(Error::Stats(format!(
            "need at least 2 items for an interval, have {n}"
        )));
    }
    let t = t_quantile((1.0 + level) / 2.0, (n - 1) as f64)?;
    let data = if matrix.conditions.len() == 1 {
        matrix.values.clone()
    } else {
        matrix.adjusted()
    };
    let intervals = matrix
        .conditions
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let column: Vec<f64> = data.iter().map(|row| row[j]).collect();
            interval_of(c.clone(), &column, t)
        })
        .collect();
    Ok(IntervalEstimate { level, intervals })
}

/// Ordinary t interval of the mean of `values`.
pub fn t_interval(values: &[f64], level: f64) -> Result<Interval> {
    check_level(level)?;
    if values.len() < 2 {
        return Err(Error::Stats(format!(
            "need at least 2 values for an interval, have {}",
            values.len()
        )));
    }
    let t = t_quantile((1.0 + level) / 2.0, (values.len() - 1) as f64)?;
    Ok(interval_of(String::new(), values, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    /// Mean of the unpermuted differences.
    pub observed: f64,
    pub p_value: f64,
    /// Number of sign assignments evaluated.
    pub permutations: u64,
    pub seed: u64,
    pub exhaustive: bool,
}

/// Two-sided paired sign-flip test of `mean(diffs) = 0`.
pub fn paired_permutation(diffs: &[f64], n_perm: u64, seed: u64) -> Result<PermutationResult> {
    let n = diffs.len();
    if n == 0 {
        return Err(Error::Stats("no differences to test".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Stats("differences must be finite".into()));
    }
    let observed_sum: f64 = diffs.iter().sum();
    let scale: f64 = diffs.iter().map(|d| d.abs()).sum();
    let threshold = observed_sum.abs() - TIE_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let extreme = |sum: f64| sum.abs() >= threshold;
    let observed = observed_sum / n as f64;

    if n < 63 && (1u64 << n) <= n_perm {
        let total = 1u64 << n;
        let hits: u64 = (0..total)
            .into_par_iter()
            .filter(|&mask| {
                let s: f64 = diffs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                    .sum();
                extreme(s)
            })
            .count() as u64;
        return Ok(PermutationResult {
            observed,
            p_value: hits as f64 / total as f64,
            permutations: total,
            seed,
            exhaustive: true,
        });
    }

    if n_perm == 0 {
        return Err(Error::Stats("n_perm must be positive".into()));
    }
    let hits: u64 = (0..n_perm)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = SplitMix64::for_stream(seed, i);
            let mut bits = 0u64;
            let mut s = 0.0;
            for (k, d) in diffs.iter().enumerate() {
                if k % 64 == 0 {
                    bits = rng.next_u64();
                }
                s += if bits >> (k % 64) & 1 == 1 { -d } else { *d };
            }
            extreme(s)
        })
        .count() as u64;
    Ok(PermutationResult {
        observed,
        p_value: (1 + hits) as f64 / (1 + n_perm) as f64,
        permutations: n_perm,
        seed,
        exhaustive: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// `None` when fewer than two items make the interval undefined.
    pub ci: Option<(f64, f64)>,
    pub ci_level: f64,
    pub permutation: PermutationResult,
    pub n_items: usize,
}

/// Mean, t interval and permutation p against zero for one metric.
pub fn summarize(metric: &MetricResult, ci_level: f64, n_perm: u64, seed: u64) -> Result<Summary> {
    let values = metric.values();
    if values.is_empty() {
        return Err(Error::Stats(format!("metric {} has no items", metric.id())));
    }
    check_level(ci_level)?;
    let ci = if values.len() >= 2 {
        let i = t_interval(&values, ci_level)?;
        Some((i.lower, i.upper))
    } else {
        None
    };
    let permutation = paired_permutation(&values, n_perm, seed)?;
    Ok(Summary {
        mean: permutation.observed,
        ci,
        ci_level,
        permutation,
        n_items: values.len(),
    })
}
