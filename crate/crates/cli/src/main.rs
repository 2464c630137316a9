use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mcpd_core::io::{
    load_model, read_samples, read_series_csv, write_json, write_mc_report, write_outputs,
    write_simulation,
};
use mcpd_core::rng::chain_rng;
use mcpd_core::{
    generate_series, run_replications, scenario, Error, FitModel, InitMode, McmcConfig, ModelKind,
    SummaryOptions, SummaryReport,
};

const RUN_FILE: &str = "run.json";

#[derive(Parser)]
#[command(
    name = "mcpd",
    version,
    about = "Bayesian change point detection in the mean and variance of Normal sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to one series and write its posterior summaries.
    Fit(FitArgs),
    /// Generate one synthetic series from a scenario, with its truth.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study over a scenario.
    Replicate(ReplicateArgs),
    /// Recompute summaries from a saved samples file.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Bmcp,
    Lcia05,
    Bh93,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Bmcp => ModelKind::Bmcp,
            ModelArg::Lcia05 => ModelKind::Lcia05,
            ModelArg::Bh93 => ModelKind::Bh93,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    /// one block per parameter
    None,
    /// every instant its own block
    All,
}

#[derive(Args)]
struct ModelOpts {
    #[arg(long, value_enum, default_value = "bmcp")]
    model: ModelArg,
    /// `key = value` hyperparameter file, or `preset:C1`..`preset:C4`
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct ChainOpts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// retained-phase sweeps
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 5000)]
    warmup: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, value_enum, default_value = "none")]
    init: InitArg,
}

impl ChainOpts {
    fn config(&self) -> Result<McmcConfig, Error> {
        let mut cfg = McmcConfig::new(self.iters, self.warmup, self.thin, self.seed)?;
        cfg.init = match self.init {
            InitArg::None => InitMode::NoneChanged,
            InitArg::All => InitMode::AllChanged,
        };
        Ok(cfg)
    }
}

#[derive(Args)]
struct SummaryOpts {
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// change probability above which an instant is reported as a change
    #[arg(long, default_value_t = 0.5)]
    prob_threshold: f64,
    #[arg(long, default_value_t = 0.9)]
    hpd_level: f64,
}

impl SummaryOpts {
    fn options(&self) -> Result<SummaryOptions, Error> {
        if self.top_k == 0 {
            return Err(Error::Config("--top-k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.prob_threshold) {
            return Err(Error::Config(format!(
                "--prob-threshold must lie in [0, 1], got {}",
                self.prob_threshold
            )));
        }
        if !(self.hpd_level > 0.0 && self.hpd_level < 1.0) {
            return Err(Error::Config(format!(
                "--hpd-level must lie in (0, 1), got {}",
                self.hpd_level
            )));
        }
        Ok(SummaryOptions {
            top_k: self.top_k,
            hpd_level: self.hpd_level,
            prob_threshold: self.prob_threshold,
        })
    }
}

#[derive(Args)]
struct FitArgs {
    /// one observation per line, optional header
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    chain: ChainOpts,
    #[command(flatten)]
    summary: SummaryOpts,
    /// also write every retained draw to samples.csv.gz
    #[arg(long)]
    keep_samples: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelOpts,
    #[command(flatten)]
    chain: ChainOpts,
}

#[derive(Args)]
struct SummarizeArgs {
    /// samples file written by `fit --keep-samples`
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    summary: SummaryOpts,
}

/// Settings of a run, written next to its outputs.
#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    input: Option<&'a Path>,
    scenario: Option<&'a str>,
    replications: Option<usize>,
    model: &'a FitModel,
    mcmc: &'a McmcConfig,
    summary: Option<&'a SummaryOptions>,
}

struct Failure {
    code: u8,
    error: Error,
}

fn usage(error: Error) -> Failure {
    Failure { code: 1, error }
}

fn data(error: Error) -> Failure {
    let code = if error.is_data_error() { 2 } else { 3 };
    Failure { code, error }
}

/// Problems in a configuration file are data errors; bad values are usage errors.
fn config(error: Error) -> Failure {
    let code = if error.is_data_error() { 2 } else { 1 };
    Failure { code, error }
}

fn runtime(error: Error) -> Failure {
    Failure { code: 3, error }
}

fn fit(args: &FitArgs) -> Result<(), Failure> {
    let model =
        load_model(args.model.model.into(), args.model.config.as_deref()).map_err(config)?;
    let cfg = args.chain.config().map_err(usage)?;
    let opts = args.summary.options().map_err(usage)?;
    let x = read_series_csv(&args.input).map_err(data)?;
    let samples = model.fit(&x, &cfg).map_err(data)?;
    let report = SummaryReport::from_samples(&samples, &opts).map_err(runtime)?;
    let kept = args.keep_samples.then_some(&samples);
    write_outputs(&report, kept, &args.out).map_err(runtime)?;
    let record = RunRecord {
        command: "fit",
        input: Some(&args.input),
        scenario: None,
        replications: None,
        model: &model,
        mcmc: &cfg,
        summary: Some(&opts),
    };
    write_json(&args.out.join(RUN_FILE), &record).map_err(runtime)?;

    println!("n = {}, retained draws = {}", report.n, report.draws);
    for (label, s) in [("mean", &report.mean), ("variance", &report.variance)] {
        let top = &s.top_partitions[0];
        println!(
            "{label}: modal number of changes {}, top partition {:?} ({:.4}), changes above {}: {:?}",
            s.n_changes_mode, top.endpoints, top.probability, opts.prob_threshold, s.declared_changes
        );
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let spec = scenario(&args.scenario).map_err(usage)?;
    let mut rng = chain_rng(args.seed);
    let series = generate_series(&spec, &mut rng).map_err(runtime)?;
    let files = write_simulation(&spec, &series, &args.out).map_err(runtime)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn replicate(args: &ReplicateArgs) -> Result<(), Failure> {
    let spec = scenario(&args.scenario).map_err(usage)?;
    let model =
        load_model(args.model.model.into(), args.model.config.as_deref()).map_err(config)?;
    let cfg = args.chain.config().map_err(usage)?;
    if args.reps == 0 {
        return Err(usage(Error::Config("--reps must be at least 1".into())));
    }
    mcpd_core::sim::thread_cap().map_err(usage)?;
    let report = run_replications(&model, &spec, args.reps, &cfg).map_err(runtime)?;
    write_mc_report(&report, &args.out).map_err(runtime)?;
    let record = RunRecord {
        command: "replicate",
        input: None,
        scenario: Some(&spec.name),
        replications: Some(args.reps),
        model: &model,
        mcmc: &cfg,
        summary: None,
    };
    write_json(&args.out.join(RUN_FILE), &record).map_err(runtime)?;

    println!(
        "{} replications of {} with {}",
        args.reps, spec.name, report.model
    );
    for (label, counts) in [
        ("mean", &report.n_mode_counts_mean),
        ("variance", &report.n_mode_counts_var),
    ] {
        let shown: Vec<String> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(n, c)| format!("{n}:{c}"))
            .collect();
        println!(
            "{label}: modal number of changes (value:count) {}",
            shown.join(" ")
        );
    }
    Ok(())
}

fn summarize(args: &SummarizeArgs) -> Result<(), Failure> {
    let opts = args.summary.options().map_err(usage)?;
    let samples = read_samples(&args.input).map_err(data)?;
    let report = SummaryReport::from_samples(&samples, &opts).map_err(data)?;
    write_outputs(&report, None, &args.out).map_err(runtime)?;
    println!("n = {}, retained draws = {}", report.n, report.draws);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Replicate(a) => replicate(a),
        Command::Summarize(a) => summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
