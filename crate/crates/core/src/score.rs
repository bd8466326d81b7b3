//! The network score: modular penalizing prior and the closed-form
//! Beta-Bernoulli marginal likelihood, with per-(node, parent-set) caching.
//!
//! With independent Beta(alpha, beta) priors on every conditional Bernoulli
//! parameter, the marginal likelihood of a structure factorizes over nodes
//! and parent configurations:
//!
//! ```text
//! p(X | G) = prod_j  G(a+b)/(G(a)G(b)) * G(a+z_j)G(b+n_j-z_j)/G(a+b+n_j)
//! ```
//!
//! with one factor per parent configuration of each node, where n_j counts
//! the rows matching the configuration and z_j the ones among them. All
//! arithmetic is carried out in natural-log space; the gamma function
//! itself overflows beyond arguments of about 170.
//!
//! The prior is the modular family `p(G) ∝ exp(-gamma * sum_j
//! |pa(X_j)|^exponent)`; `gamma = 0` recovers the uniform prior over
//! structures.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::bits::NodeSet;
use crate::dag::Dag;
use crate::dataset::{sufficient_stats, BinaryDataset, SufficientStats};
use crate::error::{Error, Result};
use crate::rng::fnv1a64;
use crate::special::ln_gamma;

/// Beta prior parameters applied uniformly to every conditional Bernoulli
/// parameter. The default (1, 1) is the uniform prior.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
}

impl HyperParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        // NaN must fail too
        if alpha.is_nan() || beta.is_nan() || alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "hyper.alpha and hyper.beta must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(HyperParams { alpha, beta })
    }

    fn fingerprint(&self) -> u64 {
        fnv1a64(
            self.alpha
                .to_bits()
                .to_le_bytes()
                .into_iter()
                .chain(self.beta.to_bits().to_le_bytes()),
        )
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

/// Parameters of the penalizing network prior
/// `p(G) ∝ exp(-gamma * sum_j |pa(X_j)|^exponent)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorSpec {
    /// Penalty weight; 0 gives the uniform prior.
    pub gamma: f64,
    /// Penalty exponent; 1 penalizes the total edge count.
    pub exponent: f64,
}

impl PriorSpec {
    pub fn new(gamma: f64, exponent: f64) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "prior.gamma must be nonnegative, got {gamma}"
            )));
        }
        if exponent.is_nan() || exponent <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "prior.exponent must be positive, got {exponent}"
            )));
        }
        Ok(PriorSpec { gamma, exponent })
    }

    /// The uniform prior over structures (gamma = 0).
    pub fn uniform() -> Self {
        PriorSpec {
            gamma: 0.0,
            exponent: 1.0,
        }
    }

    /// Penalty contributed by one node with `parent_count` parents.
    pub fn node_penalty(&self, parent_count: usize) -> f64 {
        if parent_count == 0 {
            0.0
        } else {
            self.gamma * (parent_count as f64).powf(self.exponent)
        }
    }
}

impl Default for PriorSpec {
    /// A mild edge-count penalty; pass [`PriorSpec::uniform`] for the flat
    /// prior.
    fn default() -> Self {
        PriorSpec {
            gamma: 1.0,
            exponent: 1.0,
        }
    }
}

/// Log local marginal likelihood of one (node, parent set) from its
/// sufficient statistics: the sum over parent configurations of
/// `lnG(a+b) - lnG(a) - lnG(b) + lnG(a+z) + lnG(b+n-z) - lnG(a+b+n)`.
///
/// Configurations with no matching rows contribute exactly zero.
pub fn log_local_score(stats: &SufficientStats, hyper: &HyperParams) -> f64 {
    let a = hyper.alpha;
    let b = hyper.beta;
    let base = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let mut total = 0.0;
    for cell in &stats.table {
        if cell.count == 0 {
            continue;
        }
        let n = cell.count as f64;
        let z = cell.ones as f64;
        total += base + ln_gamma(a + z) + ln_gamma(b + (n - z)) - ln_gamma(a + b + n);
    }
    total
}

/// Log of the unnormalized modular prior weight:
/// `-gamma * sum_j |pa(X_j)|^exponent`.
pub fn log_prior(dag: &Dag, prior: &PriorSpec) -> f64 {
    -(0..dag.d())
        .map(|j| prior.node_penalty(dag.parents(j).len()))
        .sum::<f64>()
}

/// Memo of log local scores keyed by (node, parent bitmask), valid for one
/// (dataset, hyperparameter) pair.
///
/// Readers never block readers; a racing duplicate computation writes the
/// identical value, so last-write-wins is benign. Lookups against a
/// different dataset or hyperparameters are a hard error rather than a
/// silent wrong answer.
pub struct ScoreCache {
    data_fingerprint: u64,
    hyper: HyperParams,
    hyper_fingerprint: u64,
    map: RwLock<HashMap<(u8, u32), f64>>,
}

impl ScoreCache {
    pub fn new(data: &BinaryDataset, hyper: &HyperParams) -> Self {
        ScoreCache {
            data_fingerprint: data.fingerprint(),
            hyper: *hyper,
            hyper_fingerprint: hyper.fingerprint(),
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    /// Reject use with a dataset or hyperparameters other than the ones the
    /// cache was built for.
    pub fn check(&self, data: &BinaryDataset, hyper: &HyperParams) -> Result<()> {
        if data.fingerprint() != self.data_fingerprint
            || hyper.fingerprint() != self.hyper_fingerprint
        {
            return Err(Error::StaleCache);
        }
        Ok(())
    }

    /// Cached log local score for (node, parents); computes and stores it on
    /// a miss. A hit returns the bit-identical stored value.
    pub fn local_score(
        &self,
        data: &BinaryDataset,
        node: usize,
        parents: NodeSet,
    ) -> Result<f64> {
        if data.fingerprint() != self.data_fingerprint {
            return Err(Error::StaleCache);
        }
        let key = (node as u8, parents.bits());
        if let Some(&v) = self.map.read().unwrap().get(&key) {
            return Ok(v);
        }
        let stats = sufficient_stats(data, node, parents)?;
        let value = log_local_score(&stats, &self.hyper);
        debug_assert!(value.is_finite());
        self.map.write().unwrap().insert(key, value);
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Log marginal likelihood of a structure: the sum of its nodes' local
/// scores, served through the cache.
pub fn log_marginal_likelihood(
    dag: &Dag,
    data: &BinaryDataset,
    hyper: &HyperParams,
    cache: &ScoreCache,
) -> Result<f64> {
    if dag.d() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            actual: dag.d(),
        });
    }
    cache.check(data, hyper)?;
    let mut total = 0.0;
    for node in 0..dag.d() {
        total += cache.local_score(data, node, dag.parents(node))?;
    }
    Ok(total)
}

/// Log unnormalized posterior: marginal likelihood plus log prior.
pub fn log_posterior_unnorm(
    dag: &Dag,
    data: &BinaryDataset,
    hyper: &HyperParams,
    prior: &PriorSpec,
    cache: &ScoreCache,
) -> Result<f64> {
    Ok(log_marginal_likelihood(dag, data, hyper, cache)? + log_prior(dag, prior))
}
