//! Run configuration: a TOML file of record plus per-key flag overrides.
//!
//! Every key lives in a flat section (`[mcmc]`, `[prior]`, ...) and can be
//! overridden on the command line by a flag of the same dotted name
//! (`--mcmc.seed 7`). Statistics are the one structured exception: they are
//! configured as `[[statistics]]` tables in the file only.

use std::path::{Path, PathBuf};

use bnsd::mcmc::McmcConfig;
use bnsd::score::{HyperParams, PriorSpec};
use bnsd::synth::StatisticSpec;
use clap::Args;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub statistics: Vec<StatisticSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub gamma: Option<f64>,
    pub exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub lag: Option<usize>,
    pub block_size: Option<usize>,
    pub max_parents: Option<usize>,
    pub seed: Option<u64>,
    pub max_block_candidates: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub keep_datasets: Option<usize>,
    pub release_mode: Option<u8>,
    pub subset: Option<usize>,
    pub hpd_level: Option<f64>,
    pub synth_n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Flag overrides; each long flag matches its config key's dotted name.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long = "data.path", value_name = "FILE")]
    pub data_path: Option<PathBuf>,

    #[arg(long = "hyper.alpha", value_name = "A")]
    pub hyper_alpha: Option<f64>,
    #[arg(long = "hyper.beta", value_name = "B")]
    pub hyper_beta: Option<f64>,

    #[arg(long = "prior.gamma", value_name = "G")]
    pub prior_gamma: Option<f64>,
    #[arg(long = "prior.exponent", value_name = "E")]
    pub prior_exponent: Option<f64>,

    #[arg(long = "mcmc.iterations", value_name = "N")]
    pub mcmc_iterations: Option<usize>,
    #[arg(long = "mcmc.burn_in", value_name = "N")]
    pub mcmc_burn_in: Option<usize>,
    #[arg(long = "mcmc.lag", value_name = "N")]
    pub mcmc_lag: Option<usize>,
    #[arg(long = "mcmc.block_size", value_name = "M")]
    pub mcmc_block_size: Option<usize>,
    #[arg(long = "mcmc.max_parents", value_name = "K")]
    pub mcmc_max_parents: Option<usize>,
    #[arg(long = "mcmc.seed", value_name = "SEED")]
    pub mcmc_seed: Option<u64>,
    #[arg(long = "mcmc.max_block_candidates", value_name = "N")]
    pub mcmc_max_block_candidates: Option<usize>,

    #[arg(long = "synth.keep_datasets", value_name = "N")]
    pub synth_keep_datasets: Option<usize>,
    #[arg(long = "synth.release_mode", value_name = "1-5")]
    pub synth_release_mode: Option<u8>,
    #[arg(long = "synth.subset", value_name = "N")]
    pub synth_subset: Option<usize>,
    #[arg(long = "synth.hpd_level", value_name = "L")]
    pub synth_hpd_level: Option<f64>,
    #[arg(long = "synth.synth_n", value_name = "N")]
    pub synth_n: Option<usize>,

    #[arg(long = "output.dir", value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved configuration: file values, flag overrides, defaults.
#[derive(Debug)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub hyper: HyperParams,
    pub prior: PriorSpec,
    pub mcmc: McmcConfig,
    /// Was `mcmc.max_parents` given explicitly? When absent, commands pick a
    /// dimension-appropriate cap.
    pub max_parents_explicit: bool,
    pub keep_datasets: usize,
    pub release_mode: u8,
    pub subset: Option<usize>,
    pub hpd_level: f64,
    pub synth_n: Option<usize>,
    pub statistics: Vec<StatisticSpec>,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(overrides: &Overrides) -> Result<RunConfig, CliError> {
        let file: FileConfig = match &overrides.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => FileConfig::default(),
        };

        let hyper = HyperParams::new(
            overrides.hyper_alpha.or(file.hyper.alpha).unwrap_or(1.0),
            overrides.hyper_beta.or(file.hyper.beta).unwrap_or(1.0),
        )
        .map_err(|e| CliError::Usage(e.to_string()))?;

        let prior = PriorSpec::new(
            overrides.prior_gamma.or(file.prior.gamma).unwrap_or(1.0),
            overrides
                .prior_exponent
                .or(file.prior.exponent)
                .unwrap_or(1.0),
        )
        .map_err(|e| CliError::Usage(e.to_string()))?;

        let defaults = McmcConfig::default();
        let max_parents_override = overrides.mcmc_max_parents.or(file.mcmc.max_parents);
        let mcmc = McmcConfig {
            iterations: overrides
                .mcmc_iterations
                .or(file.mcmc.iterations)
                .unwrap_or(defaults.iterations),
            burn_in: overrides
                .mcmc_burn_in
                .or(file.mcmc.burn_in)
                .unwrap_or(defaults.burn_in),
            lag: overrides.mcmc_lag.or(file.mcmc.lag).unwrap_or(defaults.lag),
            block_size: overrides
                .mcmc_block_size
                .or(file.mcmc.block_size)
                .unwrap_or(defaults.block_size),
            max_parents: max_parents_override.unwrap_or(defaults.max_parents),
            seed: overrides.mcmc_seed.or(file.mcmc.seed).unwrap_or(0),
            max_block_candidates: overrides
                .mcmc_max_block_candidates
                .or(file.mcmc.max_block_candidates)
                .unwrap_or(defaults.max_block_candidates),
        };

        let hpd_level = overrides
            .synth_hpd_level
            .or(file.synth.hpd_level)
            .unwrap_or(0.98);
        if !(hpd_level > 0.0 && hpd_level < 1.0) {
            return Err(CliError::Usage(format!(
                "synth.hpd_level must be in (0, 1), got {hpd_level}"
            )));
        }

        Ok(RunConfig {
            data_path: overrides.data_path.clone().or(file.data.path),
            hyper,
            prior,
            mcmc,
            max_parents_explicit: max_parents_override.is_some(),
            keep_datasets: overrides
                .synth_keep_datasets
                .or(file.synth.keep_datasets)
                .unwrap_or(0),
            release_mode: overrides
                .synth_release_mode
                .or(file.synth.release_mode)
                .unwrap_or(5),
            subset: overrides.synth_subset.or(file.synth.subset),
            hpd_level,
            synth_n: overrides.synth_n.or(file.synth.synth_n),
            statistics: file.statistics,
            output_dir: overrides
                .output_dir
                .clone()
                .or(file.output.dir)
                .unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    /// The data file, required by commands that consume observations.
    pub fn require_data(&self) -> Result<&Path, CliError> {
        self.data_path
            .as_deref()
            .ok_or_else(|| CliError::Usage("no data file: set data.path or --data.path".into()))
    }

    /// Parent cap for a dataset of dimension `d`: the configured value when
    /// explicit, otherwise `min(3, d - 2)` (clamped to at least 1), matching
    /// the recommendation that the cap stay below d - 1.
    pub fn cap_for(&self, d: usize) -> usize {
        if self.max_parents_explicit {
            self.mcmc.max_parents
        } else {
            3.min(d.saturating_sub(2)).max(1)
        }
    }
}

/// Parse a `start:stop:step` grid specification (inclusive endpoints).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "grid must be start:stop:step, got {text:?}"
        )));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("invalid grid number {s:?}")))
    };
    let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step <= 0.0 || stop < start {
        return Err(CliError::Usage(format!(
            "grid needs stop >= start and step > 0, got {text:?}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        assert_eq!(parse_grid("0:10:0.5").unwrap().len(), 21);
        assert_eq!(parse_grid("0:0:1").unwrap(), vec![0.0]);
        let g = parse_grid("1:2:0.25").unwrap();
        assert_eq!(g, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.hyper.alpha, 1.0);
        assert_eq!(cfg.prior.gamma, 1.0);
        assert_eq!(cfg.mcmc.iterations, 20_000);
        assert_eq!(cfg.release_mode, 5);
        assert!(!cfg.max_parents_explicit);
        assert_eq!(cfg.cap_for(3), 1);
        assert_eq!(cfg.cap_for(4), 2);
        assert_eq!(cfg.cap_for(7), 3);
        assert_eq!(cfg.cap_for(2), 1);
    }
}
