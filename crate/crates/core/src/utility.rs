//! Utility statistics for comparing synthetic data against the original:
//! confidence-interval overlap, conditional MLEs, the chi-square
//! independence test, and the five-dataset combining rule used by the
//! multiple-imputation baseline.

use serde::Serialize;

use crate::dag::Dag;
use crate::dataset::{event_counts, BinaryDataset, ParentConfig};
use crate::error::{Error, Result};
use crate::exact::ExactPosterior;
use crate::mcmc::ChainOutput;
use crate::rng::{stream_rng, streams};
use crate::special::{normal_quantile, t4_quantile};
use crate::synth::{ancestral_sample, mle_theta, StatisticSpec};

/// A real interval with its nominal coverage level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
}

impl Interval {
    pub fn new(low: f64, high: f64, level: f64) -> Result<Self> {
        if low.is_nan() || high.is_nan() || low > high {
            return Err(Error::InvalidConfig(format!(
                "interval bounds out of order: ({low}, {high})"
            )));
        }
        Ok(Interval { low, high, level })
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Maximum-likelihood estimate of P(node = 1 | conditioning event): the
/// share of ones among the rows matching the event.
pub fn conditional_mle(
    data: &BinaryDataset,
    node: usize,
    config: &ParentConfig,
) -> Result<f64> {
    let counts = event_counts(data, node, config)?;
    if counts.count == 0 {
        return Err(Error::UndefinedStatistic {
            reason: format!("conditioning event for node {node} matches no rows"),
        });
    }
    Ok(counts.ones as f64 / counts.count as f64)
}

/// Wald confidence interval for a binomial proportion, clamped to [0, 1]:
/// `p ± q * sqrt(p(1-p)/n)` with `q` the standard-normal quantile at
/// `(1 + level) / 2`.
pub fn wald_ci(successes: u64, trials: u64, level: f64) -> Result<Interval> {
    if trials == 0 {
        return Err(Error::UndefinedStatistic {
            reason: "confidence interval over zero trials".into(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let q = normal_quantile(0.5 * (1.0 + level));
    let half = q * (p * (1.0 - p) / n).sqrt();
    Interval::new((p - half).max(0.0), (p + half).min(1.0), level)
}

/// Normalized interval overlap in [0, 1]:
/// `2 (min(u1,u2) - max(l1,l2)) / ((u1-l1) + (u2-l2))` when the intervals
/// overlap, zero otherwise. Undefined when both intervals are degenerate.
pub fn overlap_measure(a: &Interval, b: &Interval) -> Result<f64> {
    let width_sum = a.width() + b.width();
    if width_sum <= 0.0 {
        return Err(Error::UndefinedStatistic {
            reason: "overlap of two degenerate intervals".into(),
        });
    }
    let inner = a.high.min(b.high) - a.low.max(b.low);
    if inner <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * inner / width_sum)
}

/// P-value of the Pearson chi-square test of independence between binary
/// columns `i` and `j` (2x2 table, one degree of freedom, no continuity
/// correction). Undefined when any marginal of the table is zero.
pub fn chi2_independence(data: &BinaryDataset, i: usize, j: usize) -> Result<f64> {
    let d = data.d();
    if i >= d {
        return Err(Error::IndexOutOfRange { index: i, d });
    }
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, d });
    }
    if i == j {
        return Err(Error::InvalidConfig(
            "chi-square independence test needs two distinct columns".into(),
        ));
    }
    // table[a][b] = #{rows: X_i = a, X_j = b}
    let mut table = [[0u64; 2]; 2];
    for row in 0..data.n() {
        table[data.value(row, i) as usize][data.value(row, j) as usize] += 1;
    }
    let row0 = table[0][0] + table[0][1];
    let row1 = table[1][0] + table[1][1];
    let col0 = table[0][0] + table[1][0];
    let col1 = table[0][1] + table[1][1];
    if row0 == 0 || row1 == 0 || col0 == 0 || col1 == 0 {
        return Err(Error::UndefinedStatistic {
            reason: format!("degenerate 2x2 margin for columns ({i}, {j})"),
        });
    }
    let n = data.n() as f64;
    let det = table[0][0] as f64 * table[1][1] as f64 - table[0][1] as f64 * table[1][0] as f64;
    let statistic = n * det * det / (row0 as f64 * row1 as f64 * col0 as f64 * col1 as f64);
    Ok(crate::special::chi2_sf_1df(statistic))
}

/// Combine exactly five imputed values of one statistic into a point and
/// interval estimate: mean plus `t_{4, alpha/2} * s / sqrt(5)` with `s` the
/// sample standard deviation (divisor 4).
pub fn s2_combine(values: &[f64], level: f64) -> Result<(f64, Interval)> {
    if values.len() != 5 {
        return Err(Error::InvalidConfig(format!(
            "the combining rule takes exactly 5 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::UndefinedStatistic {
            reason: "non-finite value among the 5 imputed statistics".into(),
        });
    }
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must be in [0, 1), got {level}"
        )));
    }
    let mean = values.iter().sum::<f64>() / 5.0;
    let s = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0).sqrt();
    let half = if level == 0.0 {
        0.0
    } else {
        t4_quantile(1.0 - 0.5 * (1.0 - level)) * s / 5.0_f64.sqrt()
    };
    Ok((mean, Interval::new(mean - half, mean + half, level)?))
}

/// Where the top structure for the S2 baseline comes from.
pub enum PosteriorSource<'a> {
    Chain(&'a ChainOutput),
    Exact(&'a ExactPosterior),
}

impl PosteriorSource<'_> {
    /// Highest-posterior DAG; ties broken by lexicographic encoding.
    pub fn top_dag(&self) -> Result<Dag> {
        match self {
            PosteriorSource::Exact(post) => Ok(post.top_dag().clone()),
            PosteriorSource::Chain(chain) => {
                let freqs = chain.empirical();
                freqs
                    .iter()
                    .max_by(|a, b| {
                        a.1.partial_cmp(b.1)
                            .unwrap()
                            .then_with(|| b.0.cmp(a.0))
                    })
                    .map(|(dag, _)| dag.clone())
                    .ok_or_else(|| Error::InvalidConfig("empty chain".into()))
            }
        }
    }
}

/// One statistic's S2 estimate.
#[derive(Clone, Debug, Serialize)]
pub struct S2Estimate {
    pub spec: StatisticSpec,
    pub point: f64,
    pub interval: Interval,
}

/// The multiple-imputation baseline: fit the MLE of the conditional
/// parameters under the highest-posterior structure, draw five synthetic
/// datasets from it, evaluate every statistic on each, and combine with the
/// five-value t rule at `level`.
///
/// A statistic that is undefined on any of the five datasets propagates as
/// an error.
pub fn s2_pipeline(
    data: &BinaryDataset,
    source: PosteriorSource<'_>,
    specs: &[StatisticSpec],
    level: f64,
    seed: u64,
) -> Result<Vec<S2Estimate>> {
    for spec in specs {
        spec.validate(data.d())?;
    }
    let top = source.top_dag()?;
    if top.d() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            actual: top.d(),
        });
    }
    let theta = mle_theta(&top, data)?;
    let baselines = crate::synth::baselines(specs, data)?;

    let mut rng = stream_rng(seed, streams::S2_BASE);
    let mut per_spec: Vec<Vec<f64>> = vec![Vec::with_capacity(5); specs.len()];
    for _ in 0..5 {
        let synthetic = ancestral_sample(&theta, data.n(), &mut rng);
        for (k, spec) in specs.iter().enumerate() {
            match crate::synth::evaluate_statistic(spec, &baselines[k], &synthetic)? {
                Some(v) => per_spec[k].push(v),
                None => {
                    return Err(Error::UndefinedStatistic {
                        reason: format!(
                            "{} undefined on an imputed dataset",
                            spec.label()
                        ),
                    })
                }
            }
        }
    }

    specs
        .iter()
        .zip(per_spec)
        .map(|(spec, values)| {
            let (point, interval) = s2_combine(&values, level)?;
            Ok(S2Estimate {
                spec: spec.clone(),
                point,
                interval,
            })
        })
        .collect()
}
