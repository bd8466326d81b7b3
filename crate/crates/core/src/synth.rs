//! Posterior draws of the conditional parameters, ancestral sampling of
//! synthetic datasets, and the driver that turns a structure chain into
//! posterior-predictive samples of statistics.
//!
//! For each retained structure G, the conditional Bernoulli parameters are
//! independent a posteriori with `theta_j | G, X ~ Beta(alpha + z_j,
//! beta + n_j - z_j)`; a synthetic dataset of the same size as the original
//! is then drawn by sampling nodes in topological order. Statistics are
//! computed per synthetic dataset and the dataset is discarded immediately
//! unless explicitly retained, so memory stays bounded by a single dataset
//! regardless of the chain length.
//!
//! Five release outputs of increasing complexity are supported: the
//! empirical posterior of G, all synthetic datasets, a small subset of
//! them, the raw statistic samples, and their summaries (predictive mean
//! plus highest-density interval).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::NodeSet;
use crate::dag::Dag;
use crate::dataset::{sufficient_stats, BinaryDataset, ParentConfig};
use crate::error::{Error, Result};
use crate::mcmc::{effective_sample_size, ChainOutput};
use crate::rng::{stream_rng, streams};
use crate::score::HyperParams;
use crate::utility::{chi2_independence, conditional_mle, overlap_measure, wald_ci, Interval};

/// Conditional success probabilities for every node of one structure:
/// `tables[node][config]` is P(node = 1 | parent configuration).
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaAssignment {
    dag: Dag,
    tables: Vec<Vec<f64>>,
}

impl ThetaAssignment {
    pub fn new(dag: Dag, tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.len() != dag.d() {
            return Err(Error::DimensionMismatch {
                expected: dag.d(),
                actual: tables.len(),
            });
        }
        for (node, table) in tables.iter().enumerate() {
            let expected = 1usize << dag.parents(node).len();
            if table.len() != expected {
                return Err(Error::InvalidConfig(format!(
                    "theta table for node {node} has {} entries, expected {expected}",
                    table.len()
                )));
            }
            if let Some(bad) = table.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidConfig(format!(
                    "theta value {bad} for node {node} outside [0, 1]"
                )));
            }
        }
        Ok(ThetaAssignment { dag, tables })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn table(&self, node: usize) -> &[f64] {
        &self.tables[node]
    }

    /// Every conditional probability set to the same constant.
    pub fn constant(dag: Dag, p: f64) -> Result<Self> {
        let tables = (0..dag.d())
            .map(|node| vec![p; 1usize << dag.parents(node).len()])
            .collect();
        ThetaAssignment::new(dag, tables)
    }
}

/// Beta(a, b) draw via two gamma variates, `X / (X + Y)` with
/// `X ~ Gamma(a, 1)`, `Y ~ Gamma(b, 1)`.
fn beta_draw(a: f64, b: f64, rng: &mut ChaCha8Rng) -> f64 {
    let x = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
    let y = Gamma::new(b, 1.0).expect("positive shape").sample(rng);
    if x + y == 0.0 {
        // both shapes tiny and both draws underflowed
        0.5
    } else {
        x / (x + y)
    }
}

/// One draw of all conditional parameters from their posterior given the
/// structure: independent `Beta(alpha + z_j, beta + n_j - z_j)` per parent
/// configuration. Configurations unseen in the data draw from the prior.
pub fn sample_theta(
    dag: &Dag,
    data: &BinaryDataset,
    hyper: &HyperParams,
    rng: &mut ChaCha8Rng,
) -> Result<ThetaAssignment> {
    if dag.d() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            actual: dag.d(),
        });
    }
    let mut tables = Vec::with_capacity(dag.d());
    for node in 0..dag.d() {
        let stats = sufficient_stats(data, node, dag.parents(node))?;
        let table: Vec<f64> = stats
            .table
            .iter()
            .map(|cell| {
                beta_draw(
                    hyper.alpha + cell.ones as f64,
                    hyper.beta + (cell.count - cell.ones) as f64,
                    rng,
                )
            })
            .collect();
        tables.push(table);
    }
    ThetaAssignment::new(dag.clone(), tables)
}

/// Maximum-likelihood conditional parameters under a structure:
/// `z_j / n_j` per configuration, falling back to 1/2 for configurations
/// with no matching rows.
pub fn mle_theta(dag: &Dag, data: &BinaryDataset) -> Result<ThetaAssignment> {
    if dag.d() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            actual: dag.d(),
        });
    }
    let mut tables = Vec::with_capacity(dag.d());
    for node in 0..dag.d() {
        let stats = sufficient_stats(data, node, dag.parents(node))?;
        let table: Vec<f64> = stats
            .table
            .iter()
            .map(|cell| {
                if cell.count == 0 {
                    0.5
                } else {
                    cell.ones as f64 / cell.count as f64
                }
            })
            .collect();
        tables.push(table);
    }
    ThetaAssignment::new(dag.clone(), tables)
}

/// Draw `n` i.i.d. rows from the factorized joint: nodes sampled in
/// topological order, each from its conditional given the already-sampled
/// parents. Columns are named `x1..xd`.
pub fn ancestral_sample(theta: &ThetaAssignment, n: usize, rng: &mut ChaCha8Rng) -> BinaryDataset {
    assert!(n >= 1, "synthetic sample size must be at least 1");
    let dag = theta.dag();
    let d = dag.d();
    let order = dag.topological_order();
    let mut rows = vec![vec![0u8; d]; n];
    for row in rows.iter_mut() {
        for &node in &order {
            let mut idx = 0usize;
            for (t, p) in dag.parents(node).iter().enumerate() {
                idx |= (row[p] as usize) << t;
            }
            let p_one = theta.tables[node][idx];
            row[node] = u8::from(rng.random::<f64>() < p_one);
        }
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    BinaryDataset::new(names, rows).expect("generated rows are binary by construction")
}

/// A statistic of a synthetic dataset, evaluated once per posterior draw.
///
/// Node and pair indices are zero-based; `parents`/`assignment` describe
/// the conditioning event of the targeted conditional parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    /// Overlap between the Wald interval computed on the original data and
    /// the one computed on the synthetic data, both at `level`.
    CiOverlap {
        node: usize,
        parents: Vec<usize>,
        assignment: Vec<u8>,
        #[serde(default = "default_ci_level")]
        level: f64,
    },
    /// Conditional MLE of P(node = 1 | parents = assignment).
    ConditionalMle {
        node: usize,
        parents: Vec<usize>,
        assignment: Vec<u8>,
    },
    /// P-value of the chi-square independence test between columns i and j.
    Chi2Pvalue { i: usize, j: usize },
}

fn default_ci_level() -> f64 {
    0.95
}

impl StatisticSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            StatisticSpec::CiOverlap {
                node,
                parents,
                assignment,
                level,
            } => {
                if !(*level > 0.0 && *level < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "ci_overlap level must be in (0, 1), got {level}"
                    )));
                }
                validate_event(d, *node, parents, assignment)
            }
            StatisticSpec::ConditionalMle {
                node,
                parents,
                assignment,
            } => validate_event(d, *node, parents, assignment),
            StatisticSpec::Chi2Pvalue { i, j } => {
                for &ix in [i, j].into_iter() {
                    if ix >= d {
                        return Err(Error::IndexOutOfRange { index: ix, d });
                    }
                }
                if i == j {
                    return Err(Error::InvalidConfig(
                        "chi2_pvalue needs two distinct columns".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Short human-readable tag used in reports and CSV columns.
    pub fn label(&self) -> String {
        let event = |node: &usize, parents: &[usize], assignment: &[u8]| {
            if parents.is_empty() {
                format!("x{node}")
            } else {
                let cond = parents
                    .iter()
                    .zip(assignment)
                    .map(|(p, v)| format!("x{p}={v}"))
                    .collect::<Vec<_>>()
                    .join(",");
                format!("x{node}|{cond}")
            }
        };
        match self {
            StatisticSpec::CiOverlap {
                node,
                parents,
                assignment,
                ..
            } => format!("ci_overlap[{}]", event(node, parents, assignment)),
            StatisticSpec::ConditionalMle {
                node,
                parents,
                assignment,
            } => format!("mle[{}]", event(node, parents, assignment)),
            StatisticSpec::Chi2Pvalue { i, j } => format!("chi2_pvalue[x{i},x{j}]"),
        }
    }

    fn event(&self) -> Option<(usize, ParentConfig)> {
        match self {
            StatisticSpec::CiOverlap {
                node,
                parents,
                assignment,
                ..
            }
            | StatisticSpec::ConditionalMle {
                node,
                parents,
                assignment,
            } => Some((
                *node,
                ParentConfig::from_values(parents, assignment)
                    .expect("validated event"),
            )),
            StatisticSpec::Chi2Pvalue { .. } => None,
        }
    }
}

fn validate_event(d: usize, node: usize, parents: &[usize], assignment: &[u8]) -> Result<()> {
    if node >= d {
        return Err(Error::IndexOutOfRange { index: node, d });
    }
    if let Some(&bad) = parents.iter().find(|&&p| p >= d) {
        return Err(Error::IndexOutOfRange { index: bad, d });
    }
    if parents.contains(&node) {
        return Err(Error::NodeInParentSet { node });
    }
    // delegates duplicate/shape/value checks
    ParentConfig::from_values(parents, assignment)?;
    Ok(())
}

/// Per-spec context precomputed on the original data.
pub(crate) enum Baseline {
    /// Original-data Wald interval for the overlap statistic.
    Interval(Interval),
    None,
}

/// Precompute baselines on the original data; the overlap statistic needs
/// the original-data interval and is ill-posed when its conditioning event
/// never occurs in the original data.
pub(crate) fn baselines(specs: &[StatisticSpec], data: &BinaryDataset) -> Result<Vec<Baseline>> {
    specs
        .iter()
        .map(|spec| match spec {
            StatisticSpec::CiOverlap { level, .. } => {
                let (node, config) = spec.event().expect("overlap has an event");
                let counts = crate::dataset::event_counts(data, node, &config)?;
                if counts.count == 0 {
                    return Err(Error::UndefinedStatistic {
                        reason: format!(
                            "{}: conditioning event never occurs in the original data",
                            spec.label()
                        ),
                    });
                }
                Ok(Baseline::Interval(wald_ci(
                    counts.ones,
                    counts.count,
                    *level,
                )?))
            }
            _ => Ok(Baseline::None),
        })
        .collect()
}

/// Evaluate one statistic on a synthetic dataset. `Ok(None)` flags an
/// undefined value (empty conditioning event, degenerate table, degenerate
/// interval pair); structural errors propagate.
pub(crate) fn evaluate_statistic(
    spec: &StatisticSpec,
    baseline: &Baseline,
    synthetic: &BinaryDataset,
) -> Result<Option<f64>> {
    let undefined_to_none = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedStatistic { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    match spec {
        StatisticSpec::CiOverlap { level, .. } => {
            let original = match baseline {
                Baseline::Interval(interval) => interval,
                Baseline::None => unreachable!("overlap baseline is always an interval"),
            };
            let (node, config) = spec.event().expect("overlap has an event");
            let counts = crate::dataset::event_counts(synthetic, node, &config)?;
            if counts.count == 0 {
                return Ok(None);
            }
            let synthetic_interval = wald_ci(counts.ones, counts.count, *level)?;
            undefined_to_none(overlap_measure(original, &synthetic_interval))
        }
        StatisticSpec::ConditionalMle { node, .. } => {
            let (_, config) = spec.event().expect("mle has an event");
            undefined_to_none(conditional_mle(synthetic, *node, &config))
        }
        StatisticSpec::Chi2Pvalue { i, j } => {
            undefined_to_none(chi2_independence(synthetic, *i, *j))
        }
    }
}

/// Shortest contiguous window of the sorted values containing
/// `ceil(level * len)` of them.
pub fn hpd_interval(values: &[f64], level: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let len = sorted.len();
    let window = ((level * len as f64).ceil() as usize).clamp(1, len);
    let mut best_start = 0;
    let mut best_width = f64::INFINITY;
    for start in 0..=(len - window) {
        let width = sorted[start + window - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best_start = start;
        }
    }
    Some((sorted[best_start], sorted[best_start + window - 1]))
}

/// Posterior-predictive sample of one statistic with its summary.
#[derive(Clone, Debug, Serialize)]
pub struct StatisticSeries {
    pub spec: StatisticSpec,
    /// Defined draws, in chain order; draws where the statistic was
    /// undefined are counted in `undefined` instead.
    pub values: Vec<f64>,
    pub undefined: usize,
    pub mean: f64,
    pub hpd_low: f64,
    pub hpd_high: f64,
    pub hpd_level: f64,
    /// Effective sample size of the defined draws; absent for very short or
    /// degenerate series.
    pub ess: Option<f64>,
}

impl StatisticSeries {
    fn from_draws(spec: StatisticSpec, draws: Vec<Option<f64>>, hpd_level: f64) -> Self {
        let values: Vec<f64> = draws.iter().filter_map(|v| *v).collect();
        let undefined = draws.len() - values.len();
        let mean = if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        let (hpd_low, hpd_high) = hpd_interval(&values, hpd_level).unwrap_or((f64::NAN, f64::NAN));
        let ess = effective_sample_size(&values).ok();
        StatisticSeries {
            spec,
            values,
            undefined,
            mean,
            hpd_low,
            hpd_high,
            hpd_level,
            ess,
        }
    }
}

/// Options for the posterior-predictive driver.
#[derive(Clone, Copy, Debug)]
pub struct Algorithm1Config {
    /// How many synthetic datasets (the first ones, in chain order) to keep
    /// in memory for release; 0 streams through all of them.
    pub keep_datasets: usize,
    /// Rows per synthetic dataset; defaults to the original sample size.
    pub synth_n: Option<usize>,
    /// Base seed; draw `m` uses the stream `(seed, ALG1_BASE + m)`.
    pub seed: u64,
    /// Level of the reported highest-density intervals.
    pub hpd_level: f64,
}

impl Default for Algorithm1Config {
    fn default() -> Self {
        Algorithm1Config {
            keep_datasets: 0,
            synth_n: None,
            seed: 0,
            hpd_level: 0.98,
        }
    }
}

/// Output of the posterior-predictive driver.
pub struct Algorithm1Output {
    pub series: Vec<StatisticSeries>,
    /// The first `keep_datasets` synthetic datasets, renamed to the original
    /// columns.
    pub retained: Vec<BinaryDataset>,
    /// Number of posterior draws (chain length).
    pub draws: usize,
}

/// For each retained structure: draw the conditional parameters from their
/// posterior, draw one synthetic dataset, evaluate every statistic, and
/// discard the dataset unless retained.
///
/// Draws are independent across `m` given the chain, so they run in
/// parallel; results are identical for any worker count because draw `m`
/// owns the random stream `(seed, ALG1_BASE + m)`.
pub fn run_algorithm1(
    data: &BinaryDataset,
    chain: &ChainOutput,
    hyper: &HyperParams,
    specs: &[StatisticSpec],
    config: &Algorithm1Config,
) -> Result<Algorithm1Output> {
    if chain.samples.is_empty() {
        return Err(Error::InvalidConfig("chain holds no samples".into()));
    }
    if chain.d() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            actual: chain.d(),
        });
    }
    for spec in specs {
        spec.validate(data.d())?;
    }
    let baselines = baselines(specs, data)?;
    let n_synth = config.synth_n.unwrap_or(data.n());
    if n_synth == 0 {
        return Err(Error::InvalidConfig(
            "synthetic sample size must be at least 1".into(),
        ));
    }

    // Posterior Beta parameters per (node, parent set) are shared across
    // draws of the same structure; memoize them.
    type ParamMemo = std::collections::HashMap<(u8, u32), Vec<(f64, f64)>>;
    let posterior_params: RwLock<ParamMemo> = RwLock::new(ParamMemo::new());
    let params_for = |node: usize, parents: NodeSet| -> Result<Vec<(f64, f64)>> {
        let key = (node as u8, parents.bits());
        if let Some(p) = posterior_params.read().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let stats = sufficient_stats(data, node, parents)?;
        let params: Vec<(f64, f64)> = stats
            .table
            .iter()
            .map(|cell| {
                (
                    hyper.alpha + cell.ones as f64,
                    hyper.beta + (cell.count - cell.ones) as f64,
                )
            })
            .collect();
        posterior_params
            .write()
            .unwrap()
            .insert(key, params.clone());
        Ok(params)
    };

    struct DrawResult {
        values: Vec<Option<f64>>,
        dataset: Option<BinaryDataset>,
    }

    let results: Vec<DrawResult> = chain
        .samples
        .par_iter()
        .enumerate()
        .map(|(m, dag)| -> Result<DrawResult> {
            let mut rng = stream_rng(config.seed, streams::ALG1_BASE + m as u64);
            let mut tables = Vec::with_capacity(dag.d());
            for node in 0..dag.d() {
                let params = params_for(node, dag.parents(node))?;
                let table: Vec<f64> = params
                    .iter()
                    .map(|&(a, b)| beta_draw(a, b, &mut rng))
                    .collect();
                tables.push(table);
            }
            let theta = ThetaAssignment::new(dag.clone(), tables)?;
            let synthetic = ancestral_sample(&theta, n_synth, &mut rng);
            let values = specs
                .iter()
                .zip(&baselines)
                .map(|(spec, baseline)| evaluate_statistic(spec, baseline, &synthetic))
                .collect::<Result<Vec<_>>>()?;
            let dataset = if m < config.keep_datasets {
                Some(synthetic.renamed(data.names())?)
            } else {
                None
            };
            Ok(DrawResult { values, dataset })
        })
        .collect::<Result<_>>()?;

    let draws = results.len();
    let mut retained = Vec::new();
    let mut per_spec: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(draws); specs.len()];
    for result in results {
        for (k, v) in result.values.into_iter().enumerate() {
            per_spec[k].push(v);
        }
        if let Some(ds) = result.dataset {
            retained.push(ds);
        }
    }
    let series = specs
        .iter()
        .zip(per_spec)
        .map(|(spec, draws)| StatisticSeries::from_draws(spec.clone(), draws, config.hpd_level))
        .collect();

    Ok(Algorithm1Output {
        series,
        retained,
        draws,
    })
}

/// The five release outputs, in the order of increasing complexity used
/// throughout the reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReleaseMode {
    /// 1: empirical posterior of the structure.
    EmpiricalPosterior,
    /// 2: every synthetic dataset.
    AllDatasets,
    /// 3: a small subset (5 to 10) of the synthetic datasets.
    DatasetSubset(usize),
    /// 4: raw statistic samples.
    StatisticSamples,
    /// 5: statistic summaries (mean and highest-density interval).
    Summaries,
}

impl ReleaseMode {
    /// Parse the numeric mode (1-5); `subset` sizes mode 3 (default 5).
    pub fn from_code(mode: u8, subset: Option<usize>) -> Result<Self> {
        match mode {
            1 => Ok(ReleaseMode::EmpiricalPosterior),
            2 => Ok(ReleaseMode::AllDatasets),
            3 => {
                let size = subset.unwrap_or(5);
                if !(5..=10).contains(&size) {
                    return Err(Error::InvalidConfig(format!(
                        "release mode 3 subsets hold 5 to 10 datasets, got {size}"
                    )));
                }
                Ok(ReleaseMode::DatasetSubset(size))
            }
            4 => Ok(ReleaseMode::StatisticSamples),
            5 => Ok(ReleaseMode::Summaries),
            other => Err(Error::InvalidConfig(format!(
                "release mode must be 1-5, got {other}"
            ))),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            ReleaseMode::EmpiricalPosterior => 1,
            ReleaseMode::AllDatasets => 2,
            ReleaseMode::DatasetSubset(_) => 3,
            ReleaseMode::StatisticSamples => 4,
            ReleaseMode::Summaries => 5,
        }
    }
}

/// Files produced by one release.
#[derive(Clone, Debug, Serialize)]
pub struct ReleaseManifest {
    pub mode: u8,
    pub files: Vec<String>,
}

/// Write the requested release artifact into `dir` and return the file
/// inventory. Modes 2 and 3 require the corresponding number of retained
/// datasets in `output`.
pub fn release_output(
    mode: ReleaseMode,
    chain: &ChainOutput,
    output: &Algorithm1Output,
    dir: &Path,
) -> Result<ReleaseManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    match mode {
        ReleaseMode::EmpiricalPosterior => {
            let freqs: BTreeMap<String, f64> = chain
                .empirical()
                .into_iter()
                .map(|(dag, f)| (dag.encode(), f))
                .collect();
            let value = serde_json::json!({
                "d": chain.d(),
                "draws": chain.samples.len(),
                "frequencies": freqs,
            });
            let name = "posterior_g.json";
            std::fs::write(dir.join(name), pretty(&value)?)?;
            files.push(name.to_string());
        }
        ReleaseMode::AllDatasets | ReleaseMode::DatasetSubset(_) => {
            let needed = match mode {
                ReleaseMode::AllDatasets => output.draws,
                ReleaseMode::DatasetSubset(size) => size,
                _ => unreachable!(),
            };
            if output.retained.len() < needed {
                return Err(Error::DatasetsNotRetained {
                    mode: mode.code(),
                    needed,
                    available: output.retained.len(),
                });
            }
            let width = needed.to_string().len().max(4);
            for (k, dataset) in output.retained.iter().take(needed).enumerate() {
                let name = format!("synthetic_{:0width$}.csv", k + 1, width = width);
                dataset.write_csv(dir.join(&name))?;
                files.push(name);
            }
        }
        ReleaseMode::StatisticSamples => {
            let value = serde_json::json!({
                "draws": output.draws,
                "statistics": output.series.iter().map(|s| {
                    serde_json::json!({
                        "spec": s.spec,
                        "label": s.spec.label(),
                        "values": s.values,
                        "undefined": s.undefined,
                    })
                }).collect::<Vec<_>>(),
            });
            let name = "statistic_samples.json";
            std::fs::write(dir.join(name), pretty(&value)?)?;
            files.push(name.to_string());
        }
        ReleaseMode::Summaries => {
            let value = serde_json::json!({
                "draws": output.draws,
                "statistics": output.series.iter().map(|s| {
                    serde_json::json!({
                        "spec": s.spec,
                        "label": s.spec.label(),
                        "mean": s.mean,
                        "hpd_low": s.hpd_low,
                        "hpd_high": s.hpd_high,
                        "hpd_level": s.hpd_level,
                        "ess": s.ess,
                        "undefined": s.undefined,
                    })
                }).collect::<Vec<_>>(),
            });
            let name = "statistic_summaries.json";
            std::fs::write(dir.join(name), pretty(&value)?)?;
            files.push(name.to_string());
        }
    }
    Ok(ReleaseManifest {
        mode: mode.code(),
        files,
    })
}

fn pretty(value: &serde_json::Value) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

/// Reconstruct a pseudo-chain by i.i.d. resampling from a released
/// empirical posterior (release mode 1). The resample deliberately has no
/// autocorrelation structure.
pub fn resample_empirical(
    frequencies: &BTreeMap<String, f64>,
    d: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<Dag>> {
    if frequencies.is_empty() || draws == 0 {
        return Err(Error::InvalidConfig(
            "resampling needs a nonempty distribution and at least one draw".into(),
        ));
    }
    let decoded: Vec<(Dag, f64)> = frequencies
        .iter()
        .map(|(text, &f)| Ok((Dag::decode(text, d)?, f)))
        .collect::<Result<_>>()?;
    let total: f64 = decoded.iter().map(|(_, f)| f).sum();
    let mut rng = stream_rng(seed, streams::RESAMPLE);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = decoded.len() - 1;
        for (k, (_, f)) in decoded.iter().enumerate() {
            acc += f;
            if u < acc {
                chosen = k;
                break;
            }
        }
        out.push(decoded[chosen].0.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::McmcConfig;
    use approx::assert_relative_eq;

    fn dataset(rows: Vec<Vec<u8>>) -> BinaryDataset {
        let d = rows[0].len();
        let names = (0..d).map(|j| format!("x{j}")).collect();
        BinaryDataset::new(names, rows).unwrap()
    }

    fn degenerate_chain(dag: Dag, draws: usize) -> ChainOutput {
        ChainOutput {
            config: McmcConfig::default(),
            samples: vec![dag; draws],
            log_posterior: vec![0.0; draws],
            block_log: Vec::new(),
        }
    }

    #[test]
    fn beta_posterior_mean_matches_theory() {
        // configuration with (n_j = 10, z_j = 3) under hyper (1, 1):
        // posterior Beta(4, 8), mean 1/3, sd of the mean over 100k draws
        // is sqrt(var/100k) with var = 4*8/(12^2*13)
        let mut rows = vec![vec![1u8]; 3];
        rows.extend(vec![vec![0u8]; 7]);
        let data = dataset(rows);
        let dag = Dag::empty(1).unwrap();
        let mut rng = stream_rng(41, 0);
        let draws = 100_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let theta = sample_theta(&dag, &data, &HyperParams::default(), &mut rng).unwrap();
            total += theta.table(0)[0];
        }
        let mean = total / draws as f64;
        let var = 4.0 * 8.0 / (144.0 * 13.0);
        let se = (var / draws as f64).sqrt();
        assert!(
            (mean - 4.0 / 12.0).abs() < 3.0 * se,
            "mean = {mean}, expected 1/3 within {}",
            3.0 * se
        );
    }

    #[test]
    fn unseen_configuration_draws_from_the_prior() {
        // X0 constant 1, node 1 has parent 0: configuration X0 = 0 unseen,
        // so theta draws for it are uniform: mean 1/2, variance 1/12.
        let data = dataset(vec![vec![1, 1], vec![1, 0], vec![1, 1], vec![1, 0]]);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let mut rng = stream_rng(43, 0);
        let draws = 50_000;
        let (mut total, mut total_sq) = (0.0, 0.0);
        for _ in 0..draws {
            let theta = sample_theta(&dag, &data, &HyperParams::default(), &mut rng).unwrap();
            let v = theta.table(1)[0]; // config X0 = 0
            total += v;
            total_sq += v * v;
        }
        let mean = total / draws as f64;
        let var = total_sq / draws as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.01, "mean = {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.005, "var = {var}");
    }

    #[test]
    fn theta_draws_are_deterministic_given_seed() {
        let data = dataset(vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let a = sample_theta(&dag, &data, &HyperParams::default(), &mut stream_rng(7, 2)).unwrap();
        let b = sample_theta(&dag, &data, &HyperParams::default(), &mut stream_rng(7, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_theta_gives_constant_datasets() {
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut rng = stream_rng(3, 0);
        let zeros = ancestral_sample(
            &ThetaAssignment::constant(dag.clone(), 0.0).unwrap(),
            50,
            &mut rng,
        );
        assert!((0..50).all(|i| (0..3).all(|j| zeros.value(i, j) == 0)));
        let ones = ancestral_sample(
            &ThetaAssignment::constant(dag, 1.0).unwrap(),
            50,
            &mut rng,
        );
        assert!((0..50).all(|i| (0..3).all(|j| ones.value(i, j) == 1)));
    }

    #[test]
    fn ancestral_sampling_obeys_total_probability() {
        // chain X0 -> X1 with P(X0=1) = 0.5, P(X1=1|X0=0) = 0.1,
        // P(X1=1|X0=1) = 0.9: P(X1=1) = 0.5*0.1 + 0.5*0.9 = 0.5
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let theta =
            ThetaAssignment::new(dag, vec![vec![0.5], vec![0.1, 0.9]]).unwrap();
        let n = 100_000;
        let mut rng = stream_rng(47, 0);
        let sample = ancestral_sample(&theta, n, &mut rng);
        let p1 = sample.column_sum(1) as f64 / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((p1 - 0.5).abs() < 3.0 * se, "P(X1=1) = {p1}");
    }

    #[test]
    fn hpd_window_examples() {
        let values: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let (low, high) = hpd_interval(&values, 0.98).unwrap();
        // window of 98 values, all windows tie at width 97; lowest start wins
        assert_eq!((low, high), (1.0, 98.0));

        // mass concentrated around zero picks the tight window
        let mut values = vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07];
        values.push(100.0);
        values.push(200.0);
        let (low, high) = hpd_interval(&values, 0.8).unwrap();
        assert_eq!((low, high), (0.0, 0.07));

        assert_eq!(hpd_interval(&[], 0.9), None);
        assert_eq!(hpd_interval(&[2.5], 0.9), Some((2.5, 2.5)));
    }

    #[test]
    fn algorithm1_streams_without_retention() {
        let rows: Vec<Vec<u8>> = (0..40)
            .map(|i| vec![(i % 2) as u8, ((i / 2) % 2) as u8])
            .collect();
        let data = dataset(rows);
        let chain = degenerate_chain(Dag::from_edges(2, &[(0, 1)]).unwrap(), 25);
        let specs = vec![StatisticSpec::ConditionalMle {
            node: 1,
            parents: vec![0],
            assignment: vec![0],
        }];
        let out = run_algorithm1(
            &data,
            &chain,
            &HyperParams::default(),
            &specs,
            &Algorithm1Config::default(),
        )
        .unwrap();
        assert!(out.retained.is_empty());
        assert_eq!(out.draws, 25);
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series[0].values.len() + out.series[0].undefined, 25);
    }

    #[test]
    fn algorithm1_is_deterministic_for_fixed_seed() {
        let rows: Vec<Vec<u8>> = (0..30)
            .map(|i| vec![(i % 2) as u8, ((i / 3) % 2) as u8])
            .collect();
        let data = dataset(rows);
        let chain = degenerate_chain(Dag::from_edges(2, &[(0, 1)]).unwrap(), 40);
        let specs = vec![
            StatisticSpec::ConditionalMle {
                node: 1,
                parents: vec![0],
                assignment: vec![1],
            },
            StatisticSpec::Chi2Pvalue { i: 0, j: 1 },
        ];
        let cfg = Algorithm1Config {
            keep_datasets: 3,
            seed: 11,
            ..Algorithm1Config::default()
        };
        let a = run_algorithm1(&data, &chain, &HyperParams::default(), &specs, &cfg).unwrap();
        let b = run_algorithm1(&data, &chain, &HyperParams::default(), &specs, &cfg).unwrap();
        assert_eq!(a.series[0].values, b.series[0].values);
        assert_eq!(a.series[1].values, b.series[1].values);
        assert_eq!(a.retained.len(), 3);
        assert_eq!(a.retained[0].names(), data.names());
        for (x, y) in a.retained.iter().zip(&b.retained) {
            assert_eq!(x.fingerprint(), y.fingerprint());
        }
    }

    #[test]
    fn overlap_statistic_flags_undefined_instead_of_dropping() {
        // Original data has both X0 values, but theta forces X0 = 1 in
        // synthetic data, so conditioning on X0 = 0 is undefined there.
        let data = dataset(vec![vec![0, 0], vec![1, 1], vec![0, 1], vec![1, 0]]);
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let specs = vec![StatisticSpec::CiOverlap {
            node: 1,
            parents: vec![0],
            assignment: vec![0],
            level: 0.95,
        }];
        let baseline = baselines(&specs, &data).unwrap();
        let theta = ThetaAssignment::new(
            dag,
            vec![vec![1.0], vec![0.5, 0.5]],
        )
        .unwrap();
        let synthetic = ancestral_sample(&theta, 50, &mut stream_rng(1, 1));
        let value = evaluate_statistic(&specs[0], &baseline[0], &synthetic).unwrap();
        assert_eq!(value, None);
    }

    #[test]
    fn overlap_baseline_requires_the_event_in_original_data() {
        let data = dataset(vec![vec![1, 1], vec![1, 0]]);
        let specs = vec![StatisticSpec::CiOverlap {
            node: 1,
            parents: vec![0],
            assignment: vec![0],
            level: 0.95,
        }];
        assert!(matches!(
            baselines(&specs, &data),
            Err(Error::UndefinedStatistic { .. })
        ));
    }

    #[test]
    fn spec_validation_catches_bad_targets() {
        assert!(StatisticSpec::ConditionalMle {
            node: 3,
            parents: vec![],
            assignment: vec![],
        }
        .validate(3)
        .is_err());
        assert!(StatisticSpec::ConditionalMle {
            node: 0,
            parents: vec![0],
            assignment: vec![1],
        }
        .validate(3)
        .is_err());
        assert!(StatisticSpec::Chi2Pvalue { i: 1, j: 1 }.validate(3).is_err());
        assert!(StatisticSpec::CiOverlap {
            node: 0,
            parents: vec![1],
            assignment: vec![0],
            level: 1.0,
        }
        .validate(3)
        .is_err());
        assert!(StatisticSpec::Chi2Pvalue { i: 0, j: 1 }.validate(3).is_ok());
    }

    #[test]
    fn release_modes_write_expected_files() {
        let rows: Vec<Vec<u8>> = (0..30)
            .map(|i| vec![(i % 2) as u8, ((i / 2) % 2) as u8])
            .collect();
        let data = dataset(rows);
        let chain = degenerate_chain(Dag::from_edges(2, &[(0, 1)]).unwrap(), 12);
        let specs = vec![StatisticSpec::Chi2Pvalue { i: 0, j: 1 }];
        let cfg = Algorithm1Config {
            keep_datasets: 12,
            seed: 2,
            ..Algorithm1Config::default()
        };
        let out = run_algorithm1(&data, &chain, &HyperParams::default(), &specs, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let m1 = release_output(
            ReleaseMode::EmpiricalPosterior,
            &chain,
            &out,
            dir.path(),
        )
        .unwrap();
        assert_eq!(m1.files, vec!["posterior_g.json"]);
        let text = std::fs::read_to_string(dir.path().join("posterior_g.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let total: f64 = parsed["frequencies"]
            .as_object()
            .unwrap()
            .values()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);

        let m2 = release_output(ReleaseMode::AllDatasets, &chain, &out, dir.path()).unwrap();
        assert_eq!(m2.files.len(), 12);

        let m3 =
            release_output(ReleaseMode::DatasetSubset(5), &chain, &out, dir.path()).unwrap();
        assert_eq!(m3.files.len(), 5);
        for name in &m3.files {
            assert!(dir.path().join(name).exists());
        }

        let m4 =
            release_output(ReleaseMode::StatisticSamples, &chain, &out, dir.path()).unwrap();
        assert_eq!(m4.files, vec!["statistic_samples.json"]);

        let m5 = release_output(ReleaseMode::Summaries, &chain, &out, dir.path()).unwrap();
        assert_eq!(m5.files, vec!["statistic_summaries.json"]);
        let text = std::fs::read_to_string(dir.path().join("statistic_summaries.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(parsed["statistics"][0]["mean"].is_number());
    }

    #[test]
    fn release_without_retention_fails_for_dataset_modes() {
        let rows: Vec<Vec<u8>> = (0..20)
            .map(|i| vec![(i % 2) as u8, ((i / 2) % 2) as u8])
            .collect();
        let data = dataset(rows);
        let chain = degenerate_chain(Dag::empty(2).unwrap(), 8);
        let out = run_algorithm1(
            &data,
            &chain,
            &HyperParams::default(),
            &[],
            &Algorithm1Config::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            release_output(ReleaseMode::AllDatasets, &chain, &out, dir.path()),
            Err(Error::DatasetsNotRetained { mode: 2, .. })
        ));
        assert!(matches!(
            release_output(ReleaseMode::DatasetSubset(5), &chain, &out, dir.path()),
            Err(Error::DatasetsNotRetained { mode: 3, .. })
        ));
    }

    #[test]
    fn release_mode_codes_validate() {
        assert!(ReleaseMode::from_code(0, None).is_err());
        assert!(ReleaseMode::from_code(6, None).is_err());
        assert!(ReleaseMode::from_code(3, Some(4)).is_err());
        assert!(ReleaseMode::from_code(3, Some(11)).is_err());
        assert_eq!(
            ReleaseMode::from_code(3, None).unwrap(),
            ReleaseMode::DatasetSubset(5)
        );
    }

    #[test]
    fn resampling_reproduces_the_empirical_distribution() {
        let g0 = Dag::empty(2).unwrap();
        let g1 = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let mut freqs = BTreeMap::new();
        freqs.insert(g0.encode(), 0.25);
        freqs.insert(g1.encode(), 0.75);
        let draws = resample_empirical(&freqs, 2, 20_000, 9).unwrap();
        let share_g1 =
            draws.iter().filter(|g| **g == g1).count() as f64 / draws.len() as f64;
        assert!((share_g1 - 0.75).abs() < 0.02, "share = {share_g1}");
    }
}
