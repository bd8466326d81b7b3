//! Command-line pipeline for Bayesian-network synthetic data.
//!
//! Subcommands: `fit` (structure MCMC), `synth` (posterior-predictive
//! release outputs), `exact` (enumeration posterior for d <= 5), `simulate`
//! and `calibrate` (built-in scenario studies), and `count-dags`. Exit
//! status is 0 on success, 1 on a computation error, 2 on a usage or I/O
//! error. All randomness derives from the single `mcmc.seed` key; reruns
//! with the same seed produce byte-identical reports for any thread count.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bnsd::dag::count_dags;
use bnsd::dataset::BinaryDataset;
use bnsd::exact::exact_posterior;
use bnsd::experiments::{
    builtin_scenario, builtin_scenarios, calibrate_gamma, calibrate_gamma_mcmc, run_scenario,
    MethodSet,
};
use bnsd::mcmc::{effective_sample_size, run_chain, ChainOutput};
use bnsd::rng::mix;
use bnsd::synth::{release_output, resample_empirical, run_algorithm1, Algorithm1Config, ReleaseMode};
use clap::{Args, Parser, Subcommand};

use config::{parse_grid, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "bnsd",
    version,
    about = "Bayesian-network synthetic data for binary datasets: posterior structure MCMC, predictive generation, utility evaluation"
)]
struct Cli {
    /// Worker threads (0 = number of cores). Results are identical for any
    /// value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior over structures for a binary CSV dataset.
    Fit(FitArgs),
    /// Generate synthetic data from a fitted chain and emit a release output.
    Synth(SynthArgs),
    /// Exact posterior over structures by enumeration (d <= 5).
    Exact(ExactArgs),
    /// Run a built-in simulation scenario with replications.
    Simulate(SimulateArgs),
    /// Calibrate the network-prior penalty weight on a scenario.
    Calibrate(CalibrateArgs),
    /// Exact count of labeled DAGs on d nodes.
    CountDags(CountDagsArgs),
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Chain JSON produced by `fit`.
    #[arg(long, value_name = "FILE", required_unless_present = "resample_from")]
    chain: Option<PathBuf>,
    /// Instead of a chain, resample structures i.i.d. from a released
    /// empirical posterior (release mode 1 file).
    #[arg(long, value_name = "FILE")]
    resample_from: Option<PathBuf>,
    /// Number of i.i.d. draws when resampling (default: the release's draw
    /// count).
    #[arg(long, value_name = "N")]
    resample_draws: Option<usize>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Built-in scenario id (see `simulate --list`).
    #[arg(long, value_name = "ID", required_unless_present = "list")]
    scenario: Option<String>,
    /// Synthetic-data methods to evaluate: "s1,s2", "s1", "s2", or "none".
    #[arg(long, default_value = "s1,s2")]
    methods: String,
    /// Override the scenario's replication count.
    #[arg(long, value_name = "N")]
    replications: Option<usize>,
    /// List available scenario ids and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Built-in scenario id.
    #[arg(long, value_name = "ID")]
    scenario: String,
    /// Penalty grid as start:stop:step (inclusive).
    #[arg(long, default_value = "0:10:0.5")]
    grid: String,
    /// Calibration threshold on the truth-class posterior probability.
    #[arg(long, default_value_t = 0.85)]
    threshold: f64,
    /// Estimate the curve with the sampler instead of the exact oracle
    /// (required beyond d = 5).
    #[arg(long)]
    mcmc: bool,
    /// Override the scenario's replication count.
    #[arg(long, value_name = "N")]
    replications: Option<usize>,
}

#[derive(Args)]
struct CountDagsArgs {
    /// Number of nodes.
    #[arg(long)]
    d: usize,
    /// Print the whole column 1..=d instead of a single count.
    #[arg(long)]
    table: bool,
}

/// Errors carrying their exit status: usage/I/O problems exit 2,
/// computation failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(bnsd::Error),
}

impl From<bnsd::Error> for CliError {
    fn from(e: bnsd::Error) -> Self {
        match e {
            bnsd::Error::File { .. }
            | bnsd::Error::Io(_)
            | bnsd::Error::UnknownScenario { .. }
            | bnsd::Error::EnumerationTooLarge { .. } => CliError::Usage(e.to_string()),
            other => CliError::Compute(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Compute(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // ignore the error if a pool already exists (tests call main-like
        // flows repeatedly)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::CountDags(args) => cmd_count_dags(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Compute(bnsd::Error::Json(e)))?;
    write_text(path, &format!("{text}\n"))
}

fn load_data(config: &RunConfig) -> Result<BinaryDataset, CliError> {
    Ok(BinaryDataset::load_csv(config.require_data()?)?)
}

/// Chain summary: top equivalence classes and the log-posterior trace's
/// effective sample size.
fn summarize_chain(chain: &ChainOutput, data: &BinaryDataset) -> serde_json::Value {
    let mut classes: Vec<(String, f64)> = chain
        .class_empirical()
        .into_iter()
        .map(|(k, v)| (k.label(), v))
        .collect();
    classes.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    classes.truncate(10);

    let mut dags: Vec<(String, f64)> = chain
        .empirical()
        .into_iter()
        .map(|(dag, f)| (dag.encode(), f))
        .collect();
    dags.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    dags.truncate(10);

    serde_json::json!({
        "d": data.d(),
        "n": data.n(),
        "names": data.names(),
        "retained": chain.samples.len(),
        "ess_log_posterior": effective_sample_size(&chain.log_posterior).ok(),
        "top_classes": classes.iter().map(|(k, v)| serde_json::json!({
            "class": k, "probability": v,
        })).collect::<Vec<_>>(),
        "top_dags": dags.iter().map(|(k, v)| serde_json::json!({
            "dag": k, "frequency": v,
        })).collect::<Vec<_>>(),
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let mut config = RunConfig::resolve(&args.overrides)?;
    let data = load_data(&config)?;
    config.mcmc.max_parents = config.cap_for(data.d());
    let chain = run_chain(&data, &config.hyper, &config.prior, &config.mcmc)?;
    write_text(
        &config.output_dir.join("chain.json"),
        &format!("{}\n", chain.to_json_string()?),
    )?;
    write_json(
        &config.output_dir.join("summary.json"),
        &summarize_chain(&chain, &data),
    )?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(&args.overrides)?;
    let data = load_data(&config)?;

    let chain = match (&args.chain, &args.resample_from) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read chain {}: {e}", path.display()))
            })?;
            ChainOutput::from_json_str(&text)?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read release {}: {e}", path.display()))
            })?;
            let parsed: serde_json::Value =
                serde_json::from_str(&text).map_err(bnsd::Error::Json)?;
            let d = parsed["d"].as_u64().ok_or_else(|| {
                CliError::Usage("release file lacks the \"d\" field".into())
            })? as usize;
            let draws = args
                .resample_draws
                .or_else(|| parsed["draws"].as_u64().map(|x| x as usize))
                .unwrap_or(1000);
            let freqs: BTreeMap<String, f64> = parsed["frequencies"]
                .as_object()
                .ok_or_else(|| {
                    CliError::Usage("release file lacks the \"frequencies\" map".into())
                })?
                .iter()
                .map(|(k, v)| (k.clone(), v.as_f64().unwrap_or(0.0)))
                .collect();
            let samples = resample_empirical(
                &freqs,
                d,
                draws,
                mix(config.mcmc.seed, bnsd::rng::streams::RESAMPLE),
            )?;
            let log_posterior = vec![0.0; samples.len()];
            let mut echo = config.mcmc;
            echo.max_parents = samples
                .iter()
                .map(|g| g.max_parent_count())
                .max()
                .unwrap_or(1)
                .max(1);
            ChainOutput {
                config: echo,
                samples,
                log_posterior,
                block_log: Vec::new(),
            }
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --chain or --resample-from".into(),
            ))
        }
    };

    if chain.d() != data.d() {
        return Err(CliError::Usage(format!(
            "chain has d = {} but the data has d = {}",
            chain.d(),
            data.d()
        )));
    }

    let mode = ReleaseMode::from_code(config.release_mode, config.subset)?;
    // dataset-producing modes need retention configured up front
    let keep = config.keep_datasets;
    match mode {
        ReleaseMode::AllDatasets if keep < chain.samples.len() => {
            return Err(CliError::Usage(format!(
                "release mode 2 needs synth.keep_datasets = {} (all draws), got {keep}",
                chain.samples.len()
            )));
        }
        ReleaseMode::DatasetSubset(s) if keep < s => {
            return Err(CliError::Usage(format!(
                "release mode 3 with a subset of {s} needs synth.keep_datasets >= {s}, got {keep}"
            )));
        }
        _ => {}
    }
    let alg_config = Algorithm1Config {
        keep_datasets: keep,
        synth_n: config.synth_n,
        seed: config.mcmc.seed,
        hpd_level: config.hpd_level,
    };
    if config.statistics.is_empty()
        && matches!(
            mode,
            ReleaseMode::StatisticSamples | ReleaseMode::Summaries
        )
    {
        return Err(CliError::Usage(
            "release modes 4 and 5 need at least one [[statistics]] entry".into(),
        ));
    }
    let out = run_algorithm1(&data, &chain, &config.hyper, &config.statistics, &alg_config)?;
    let manifest = release_output(mode, &chain, &out, &config.output_dir)?;
    println!("release mode {}", manifest.mode);
    for file in &manifest.files {
        println!("wrote {}", config.output_dir.join(file).display());
    }
    write_json(
        &config.output_dir.join("release_manifest.json"),
        &serde_json::json!({
            "mode": manifest.mode,
            "files": manifest.files,
            "draws": out.draws,
        }),
    )?;
    Ok(())
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(&args.overrides)?;
    let data = load_data(&config)?;
    let cap = config.cap_for(data.d());
    let post = exact_posterior(&data, &config.hyper, &config.prior, cap)?;
    write_json(&config.output_dir.join("exact.json"), &post.to_json_value())?;
    Ok(())
}

fn parse_methods(text: &str) -> Result<MethodSet, CliError> {
    let mut methods = MethodSet::none();
    if text.trim() == "none" || text.trim().is_empty() {
        return Ok(methods);
    }
    for part in text.split(',') {
        match part.trim() {
            "s1" => methods.s1 = true,
            "s2" => methods.s2 = true,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown method {other:?}; valid: s1, s2, none"
                )))
            }
        }
    }
    Ok(methods)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.list {
        for s in builtin_scenarios() {
            println!("{} (d={}, n={}, {} replications)", s.id, s.d, s.n, s.replications);
        }
        return Ok(());
    }
    let config = RunConfig::resolve(&args.overrides)?;
    let id = args.scenario.as_deref().expect("clap enforces presence");
    let mut scenario = builtin_scenario(id)?;
    if let Some(reps) = args.replications {
        if reps == 0 {
            return Err(CliError::Usage("replications must be at least 1".into()));
        }
        scenario.replications = reps;
    }
    let methods = parse_methods(&args.methods)?;
    let mut mcmc = config.mcmc;
    mcmc.max_parents = config.cap_for(scenario.d);
    let report = run_scenario(&scenario, &config.hyper, &config.prior, &mcmc, methods)?;
    let json_path = config.output_dir.join(format!("scenario_{id}.json"));
    let value = serde_json::to_value(&report).map_err(bnsd::Error::Json)?;
    write_json(&json_path, &value)?;
    write_text(
        &config.output_dir.join(format!("scenario_{id}.csv")),
        &report.to_csv(),
    )?;
    println!(
        "{}: truth class is the mode in {}/{} replications",
        id, report.aggregate.wins, report.scenario.replications
    );
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let config = RunConfig::resolve(&args.overrides)?;
    let mut scenario = builtin_scenario(&args.scenario)?;
    if let Some(reps) = args.replications {
        if reps == 0 {
            return Err(CliError::Usage("replications must be at least 1".into()));
        }
        scenario.replications = reps;
    }
    let grid = parse_grid(&args.grid)?;
    let result = if args.mcmc {
        let mut mcmc = config.mcmc;
        mcmc.max_parents = config.cap_for(scenario.d);
        calibrate_gamma_mcmc(&scenario, &grid, args.threshold, &config.hyper, &mcmc)?
    } else {
        let cap = config.cap_for(scenario.d);
        calibrate_gamma(&scenario, &grid, args.threshold, &config.hyper, cap)?
    };
    let value = serde_json::to_value(&result).map_err(bnsd::Error::Json)?;
    write_json(
        &config
            .output_dir
            .join(format!("calibration_{}.json", scenario.id)),
        &value,
    )?;
    let mut csv = String::from("gamma,probability,spread\n");
    for ((g, p), s) in result
        .grid
        .iter()
        .zip(&result.probabilities)
        .zip(&result.spread)
    {
        csv.push_str(&format!("{g},{p},{s}\n"));
    }
    write_text(
        &config
            .output_dir
            .join(format!("calibration_{}.csv", scenario.id)),
        &csv,
    )?;
    match result.gamma_star {
        Some(g) => println!("gamma_star = {g}"),
        None => println!("gamma_star absent: curve never exceeds {}", args.threshold),
    }
    Ok(())
}

fn cmd_count_dags(args: CountDagsArgs) -> Result<(), CliError> {
    if args.d == 0 {
        return Err(CliError::Usage("node count must be at least 1".into()));
    }
    if args.d > 200 {
        return Err(CliError::Usage(
            "node counts above 200 are unsupported".into(),
        ));
    }
    if args.table {
        for d in 1..=args.d {
            println!("{d} {}", count_dags(d));
        }
    } else {
        println!("{}", count_dags(args.d));
    }
    Ok(())
}
