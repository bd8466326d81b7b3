//! Simulation scenarios, the replication runner, and the prior-calibration
//! study.
//!
//! The built-in scenarios use three generating networks (at three, four and
//! seven variables) at the sample sizes studied alongside them, with
//! ground-truth conditional probabilities drawn once per scenario uniformly
//! in [0.2, 0.8]. Each replication simulates a dataset from the truth, runs
//! the sampler (and, for up to five variables, the exact oracle), and
//! evaluates the synthetic-data methods on the scenario's designated
//! statistics. Replication r depends only on (scenario seed, r), never on
//! execution order or worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::dag::Dag;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::exact::{chain_total_variation, exact_posterior, score_space, true_network_posterior};
use crate::mcmc::{run_chain, McmcConfig};
use crate::rng::{mix, stream_rng, streams};
use crate::score::{HyperParams, PriorSpec};
use crate::synth::{
    ancestral_sample, run_algorithm1, Algorithm1Config, StatisticSpec, ThetaAssignment,
};
use crate::utility::{
    chi2_independence, conditional_mle, s2_pipeline, wald_ci, Interval, PosteriorSource,
};

/// One simulation setting: a generating network with fixed conditional
/// probabilities, a sample size, and a replication budget.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub d: usize,
    pub n: usize,
    pub truth: Dag,
    pub theta_truth: ThetaAssignment,
    pub replications: usize,
    pub seed: u64,
}

impl Scenario {
    fn build(id: &str, n: usize, truth: Dag, replications: usize, seed: u64) -> Scenario {
        let mut rng = stream_rng(seed, streams::THETA_TRUTH);
        let d = truth.d();
        let tables: Vec<Vec<f64>> = (0..d)
            .map(|node| {
                (0..(1usize << truth.parents(node).len()))
                    .map(|_| 0.2 + 0.6 * rand::Rng::random::<f64>(&mut rng))
                    .collect()
            })
            .collect();
        let theta_truth = ThetaAssignment::new(truth.clone(), tables).unwrap();
        Scenario {
            id: id.to_string(),
            d,
            n,
            truth,
            theta_truth,
            replications,
            seed,
        }
    }

    /// The dataset of one replication: `n` ancestral draws from the truth,
    /// on the stream `(seed, DATA_BASE + replication)`.
    pub fn simulate_data(&self, replication: usize) -> BinaryDataset {
        let mut rng = stream_rng(self.seed, streams::DATA_BASE + replication as u64);
        ancestral_sample(&self.theta_truth, self.n, &mut rng)
    }

    /// The scenario's designated statistics: interval overlap and MLE of
    /// one conditional parameter, and one independence p-value.
    pub fn statistics(&self) -> Vec<StatisticSpec> {
        let (node, parents, assignment, pair) = match self.d {
            // P(X2=1 | X1=0), independence of (X1, X2)
            3 => (1usize, vec![0usize], vec![0u8], (0usize, 1usize)),
            // P(X3=1 | X4=1), independence of (X1, X2)
            4 => (2, vec![3], vec![1], (0, 1)),
            // P(X4=1 | X3=1, X5=1), independence of (X1, X5)
            7 => (3, vec![2, 4], vec![1, 1], (0, 4)),
            // fallback: first column's marginal and the first pair
            _ => (0, vec![], vec![], (0, 1.min(self.d - 1))),
        };
        vec![
            StatisticSpec::CiOverlap {
                node,
                parents: parents.clone(),
                assignment: assignment.clone(),
                level: 0.95,
            },
            StatisticSpec::ConditionalMle {
                node,
                parents,
                assignment,
            },
            StatisticSpec::Chi2Pvalue {
                i: pair.0,
                j: pair.1,
            },
        ]
    }
}

/// The built-in scenario grid: three generating networks at their studied
/// sample sizes, ten replications each.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let d3 = Dag::from_edges(3, &[(0, 1)]).unwrap();
    let d4 = Dag::from_edges(4, &[(0, 1), (3, 2)]).unwrap();
    let d7 = Dag::from_edges(7, &[(0, 1), (5, 4), (6, 4), (2, 3), (4, 3)]).unwrap();
    vec![
        Scenario::build("d3_n500", 500, d3.clone(), 10, 2001),
        Scenario::build("d3_n1000", 1000, d3.clone(), 10, 3067),
        Scenario::build("d3_n5000", 5000, d3, 10, 3007),
        Scenario::build("d4_n1000", 1000, d4.clone(), 10, 2004),
        Scenario::build("d4_n5000", 5000, d4, 10, 4004),
        Scenario::build("d7_n2000", 2000, d7.clone(), 10, 2006),
        Scenario::build("d7_n5000", 5000, d7, 10, 2007),
    ]
}

/// Look up one built-in scenario by id.
pub fn builtin_scenario(id: &str) -> Result<Scenario> {
    let all = builtin_scenarios();
    let valid = all
        .iter()
        .map(|s| s.id.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    all.into_iter()
        .find(|s| s.id == id)
        .ok_or(Error::UnknownScenario {
            id: id.to_string(),
            valid,
        })
}

/// Which synthetic-data methods a scenario run evaluates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MethodSet {
    /// Full posterior-predictive pipeline.
    pub s1: bool,
    /// Top-network multiple-imputation baseline.
    pub s2: bool,
}

impl MethodSet {
    pub fn all() -> Self {
        MethodSet { s1: true, s2: true }
    }

    pub fn none() -> Self {
        MethodSet::default()
    }
}

/// Validation of one replication's chain against the exact posterior
/// (available for d <= 5).
#[derive(Clone, Debug, Serialize)]
pub struct ExactCheck {
    pub truth_probability: f64,
    pub truth_rank: usize,
    pub truth_class_probability: f64,
    pub tv_dag: f64,
    pub tv_class: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct S1Summary {
    pub mean: f64,
    pub hpd_low: f64,
    pub hpd_high: f64,
    pub hpd_level: f64,
    pub ess: Option<f64>,
    pub undefined: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct S2Summary {
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub level: f64,
}

/// One statistic's results for one replication.
#[derive(Clone, Debug, Serialize)]
pub struct StatRow {
    pub label: String,
    pub spec: StatisticSpec,
    /// The statistic evaluated on the original data; for the overlap
    /// statistic this is 1 by definition.
    pub original: f64,
    /// Original-data interval behind the overlap statistic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_interval: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1: Option<S1Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<S2Summary>,
    /// Failure reason when the S2 baseline could not produce this statistic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2_error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub chain_seed: u64,
    /// Chain-estimated posterior probability of the truth's equivalence
    /// class.
    pub truth_class_probability: f64,
    /// Is the truth's class the chain's modal class?
    pub truth_is_mode: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactCheck>,
    pub statistics: Vec<StatRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    /// Replications whose chain mode is the truth's class.
    pub wins: usize,
    /// Mean truth-class probability among winning replications.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_probability_winners: Option<f64>,
    /// Mean truth-class probability among the remaining replications.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_probability_others: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioEcho {
    pub id: String,
    pub d: usize,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub truth: String,
    pub truth_class: String,
    pub theta_truth: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: ScenarioEcho,
    pub hyper: HyperParams,
    pub prior: PriorSpec,
    pub mcmc: McmcConfig,
    pub methods: Vec<String>,
    pub replications: Vec<ReplicationRecord>,
    pub aggregate: Aggregate,
}

impl ScenarioReport {
    /// Flat CSV companion: one row per replication and statistic.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,replication,statistic,original,s1_mean,s1_hpd_low,s1_hpd_high,s1_ess,s1_undefined,s2_point,s2_low,s2_high\n",
        );
        let fmt = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v}")
            }
        };
        for rep in &self.replications {
            for row in &rep.statistics {
                let (s1_mean, s1_lo, s1_hi, s1_ess, s1_undef) = match &row.s1 {
                    Some(s1) => (
                        fmt(s1.mean),
                        fmt(s1.hpd_low),
                        fmt(s1.hpd_high),
                        s1.ess.map(fmt).unwrap_or_default(),
                        s1.undefined.to_string(),
                    ),
                    None => Default::default(),
                };
                let (s2_point, s2_lo, s2_hi) = match &row.s2 {
                    Some(s2) => (fmt(s2.point), fmt(s2.low), fmt(s2.high)),
                    None => Default::default(),
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    self.scenario.id,
                    rep.replication,
                    row.label,
                    fmt(row.original),
                    s1_mean,
                    s1_lo,
                    s1_hi,
                    s1_ess,
                    s1_undef,
                    s2_point,
                    s2_lo,
                    s2_hi,
                ));
            }
        }
        out
    }
}

/// Run every replication of a scenario: simulate data, fit the chain,
/// validate against the exact posterior when feasible, and evaluate the
/// requested synthetic-data methods on the scenario's statistics.
pub fn run_scenario(
    scenario: &Scenario,
    hyper: &HyperParams,
    prior: &PriorSpec,
    mcmc_template: &McmcConfig,
    methods: MethodSet,
) -> Result<ScenarioReport> {
    let truth_class = scenario.truth.equivalence_key();
    let specs = scenario.statistics();
    for spec in &specs {
        spec.validate(scenario.d)?;
    }

    let records: Vec<ReplicationRecord> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| -> Result<ReplicationRecord> {
            let data = scenario.simulate_data(r);
            let mut chain_config = *mcmc_template;
            chain_config.seed = mix(scenario.seed, streams::CHAIN_SEED_BASE + r as u64);
            let chain = run_chain(&data, hyper, prior, &chain_config)?;

            let class_freq = chain.class_empirical();
            let truth_class_probability =
                class_freq.get(&truth_class).copied().unwrap_or(0.0);
            let mode = class_freq
                .iter()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then_with(|| b.0.cmp(a.0)))
                .map(|(k, _)| k.clone())
                .expect("chain retains at least one sample");
            let truth_is_mode = mode == truth_class;

            let exact = if scenario.d <= crate::dag::MAX_ENUMERATION_NODES {
                let post = exact_posterior(&data, hyper, prior, chain_config.max_parents)?;
                let summary = true_network_posterior(&post, &scenario.truth)?;
                let tv = chain_total_variation(&chain, &post)?;
                Some(ExactCheck {
                    truth_probability: summary.probability,
                    truth_rank: summary.rank,
                    truth_class_probability: summary.class_probability,
                    tv_dag: tv.dag,
                    tv_class: tv.class,
                })
            } else {
                None
            };

            // statistics on the original data
            let mut rows: Vec<StatRow> = specs
                .iter()
                .map(|spec| -> Result<StatRow> {
                    let (original, original_interval) = match spec {
                        StatisticSpec::CiOverlap { level, .. } => {
                            let (node, config) = match spec {
                                StatisticSpec::CiOverlap {
                                    node,
                                    parents,
                                    assignment,
                                    ..
                                } => (
                                    *node,
                                    crate::dataset::ParentConfig::from_values(
                                        parents, assignment,
                                    )?,
                                ),
                                _ => unreachable!(),
                            };
                            let counts =
                                crate::dataset::event_counts(&data, node, &config)?;
                            if counts.count == 0 {
                                return Err(Error::UndefinedStatistic {
                                    reason: format!(
                                        "{}: event absent from simulated data",
                                        spec.label()
                                    ),
                                });
                            }
                            (1.0, Some(wald_ci(counts.ones, counts.count, *level)?))
                        }
                        StatisticSpec::ConditionalMle {
                            node,
                            parents,
                            assignment,
                        } => {
                            let config = crate::dataset::ParentConfig::from_values(
                                parents, assignment,
                            )?;
                            (conditional_mle(&data, *node, &config)?, None)
                        }
                        StatisticSpec::Chi2Pvalue { i, j } => {
                            (chi2_independence(&data, *i, *j)?, None)
                        }
                    };
                    Ok(StatRow {
                        label: spec.label(),
                        spec: spec.clone(),
                        original,
                        original_interval,
                        s1: None,
                        s2: None,
                        s2_error: None,
                    })
                })
                .collect::<Result<_>>()?;

            if methods.s1 {
                let config = Algorithm1Config {
                    keep_datasets: 0,
                    synth_n: None,
                    seed: mix(scenario.seed, streams::ALG1_SEED_BASE + r as u64),
                    hpd_level: 0.98,
                };
                let out = run_algorithm1(&data, &chain, hyper, &specs, &config)?;
                for (row, series) in rows.iter_mut().zip(out.series) {
                    row.s1 = Some(S1Summary {
                        mean: series.mean,
                        hpd_low: series.hpd_low,
                        hpd_high: series.hpd_high,
                        hpd_level: series.hpd_level,
                        ess: series.ess,
                        undefined: series.undefined,
                    });
                }
            }

            if methods.s2 {
                let seed = mix(scenario.seed, streams::S2_BASE + r as u64);
                match s2_pipeline(&data, PosteriorSource::Chain(&chain), &specs, 0.98, seed) {
                    Ok(estimates) => {
                        for (row, est) in rows.iter_mut().zip(estimates) {
                            row.s2 = Some(S2Summary {
                                point: est.point,
                                low: est.interval.low,
                                high: est.interval.high,
                                level: est.interval.level,
                            });
                        }
                    }
                    Err(Error::UndefinedStatistic { reason }) => {
                        for row in rows.iter_mut() {
                            row.s2_error = Some(reason.clone());
                        }
                    }
                    Err(other) => return Err(other),
                }
            }

            Ok(ReplicationRecord {
                replication: r,
                chain_seed: chain_config.seed,
                truth_class_probability,
                truth_is_mode,
                exact,
                statistics: rows,
            })
        })
        .collect::<Result<_>>()?;

    let winners: Vec<f64> = records
        .iter()
        .filter(|r| r.truth_is_mode)
        .map(|r| r.truth_class_probability)
        .collect();
    let others: Vec<f64> = records
        .iter()
        .filter(|r| !r.truth_is_mode)
        .map(|r| r.truth_class_probability)
        .collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let aggregate = Aggregate {
        wins: winners.len(),
        mean_probability_winners: mean(&winners),
        mean_probability_others: mean(&others),
    };

    let mut methods_list = Vec::new();
    if methods.s1 {
        methods_list.push("s1".to_string());
    }
    if methods.s2 {
        methods_list.push("s2".to_string());
    }

    Ok(ScenarioReport {
        scenario: ScenarioEcho {
            id: scenario.id.clone(),
            d: scenario.d,
            n: scenario.n,
            replications: scenario.replications,
            seed: scenario.seed,
            truth: scenario.truth.encode(),
            truth_class: truth_class.label(),
            theta_truth: (0..scenario.d)
                .map(|node| scenario.theta_truth.table(node).to_vec())
                .collect(),
        },
        hyper: *hyper,
        prior: *prior,
        mcmc: *mcmc_template,
        methods: methods_list,
        replications: records,
        aggregate,
    })
}

/// Calibration curve of the penalty weight.
#[derive(Clone, Debug, Serialize)]
pub struct CalibrationResult {
    pub scenario: String,
    pub threshold: f64,
    pub replications: usize,
    /// Ascending penalty weights.
    pub grid: Vec<f64>,
    /// Mean (over replications) posterior probability of the truth's class
    /// at each grid point.
    pub probabilities: Vec<f64>,
    /// Sample standard deviation across replications at each grid point.
    pub spread: Vec<f64>,
    /// Smallest grid weight whose mean probability exceeds the threshold.
    pub gamma_star: Option<f64>,
    /// Per-replication curves, row per replication.
    pub replication_curves: Vec<Vec<f64>>,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("calibration grid is empty".into()));
    }
    if grid[0] < 0.0 {
        return Err(Error::InvalidConfig(
            "calibration grid starts below zero".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "calibration grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

fn summarize_curves(
    scenario: &Scenario,
    grid: &[f64],
    threshold: f64,
    curves: Vec<Vec<f64>>,
) -> CalibrationResult {
    let reps = curves.len();
    let mut probabilities = Vec::with_capacity(grid.len());
    let mut spread = Vec::with_capacity(grid.len());
    for gi in 0..grid.len() {
        let column: Vec<f64> = curves.iter().map(|row| row[gi]).collect();
        let mean = column.iter().sum::<f64>() / reps as f64;
        let sd = if reps > 1 {
            (column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        probabilities.push(mean);
        spread.push(sd);
    }
    let gamma_star = grid
        .iter()
        .zip(&probabilities)
        .find(|(_, &p)| p > threshold)
        .map(|(&g, _)| g);
    CalibrationResult {
        scenario: scenario.id.clone(),
        threshold,
        replications: reps,
        grid: grid.to_vec(),
        probabilities,
        spread,
        gamma_star,
        replication_curves: curves,
    }
}

/// Exact-oracle calibration of the penalty weight (d <= 5): for each grid
/// value, the posterior probability of the truth's equivalence class,
/// averaged over the scenario's replications. The marginal likelihoods are
/// scored once per replication and reweighted across the grid.
pub fn calibrate_gamma(
    scenario: &Scenario,
    grid: &[f64],
    threshold: f64,
    hyper: &HyperParams,
    max_parents: usize,
) -> Result<CalibrationResult> {
    validate_grid(grid)?;
    if scenario.d > crate::dag::MAX_ENUMERATION_NODES {
        return Err(Error::EnumerationTooLarge {
            d: scenario.d,
            max: crate::dag::MAX_ENUMERATION_NODES,
        });
    }
    let truth_class = scenario.truth.equivalence_key();
    let curves: Vec<Vec<f64>> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let data = scenario.simulate_data(r);
            let space = score_space(&data, hyper, 1.0, max_parents)?;
            Ok(grid
                .iter()
                .map(|&gamma| space.class_probability(gamma, &truth_class))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(summarize_curves(scenario, grid, threshold, curves))
}

/// Sampler-based calibration for scenarios beyond the enumeration limit:
/// one chain per (replication, grid point), with the truth-class
/// probability estimated from chain occupancy.
pub fn calibrate_gamma_mcmc(
    scenario: &Scenario,
    grid: &[f64],
    threshold: f64,
    hyper: &HyperParams,
    mcmc_template: &McmcConfig,
) -> Result<CalibrationResult> {
    validate_grid(grid)?;
    if grid.len() >= 1024 {
        return Err(Error::InvalidConfig(
            "sampler-based calibration supports at most 1023 grid points".into(),
        ));
    }
    let truth_class = scenario.truth.equivalence_key();
    let cells: Vec<(usize, usize)> = (0..scenario.replications)
        .flat_map(|r| (0..grid.len()).map(move |gi| (r, gi)))
        .collect();
    let estimates: Vec<f64> = cells
        .par_iter()
        .map(|&(r, gi)| -> Result<f64> {
            let data = scenario.simulate_data(r);
            let prior = PriorSpec::new(grid[gi], 1.0)?;
            let mut config = *mcmc_template;
            config.seed = mix(
                scenario.seed,
                streams::CALIBRATION_BASE + (r as u64) * 1024 + gi as u64,
            );
            let chain = run_chain(&data, hyper, &prior, &config)?;
            Ok(chain
                .class_empirical()
                .get(&truth_class)
                .copied()
                .unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    let curves: Vec<Vec<f64>> = estimates
        .chunks_exact(grid.len())
        .map(|row| row.to_vec())
        .collect();
    Ok(summarize_curves(scenario, grid, threshold, curves))
}
