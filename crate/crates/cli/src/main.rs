//! `lips`: exact enumeration, LIPS and MC³ for Bayesian variable selection
//! in linear regression, plus simulation and split-comparison harnesses.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{PriorSetting, RunConfig};
use lips_core::LipsError;

#[derive(Parser, Debug)]
#[command(name = "lips", version, about = "Forward-stepwise priors and LIPS sampling for Bayesian model averaging")]
struct Cli {
    /// Worker threads; falls back to the config file, then LIPS_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Response column by name or 0-based index (default: last column).
    #[arg(long)]
    response: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model-space prior, e.g. `beta-binomial:1,1`, `symmetric:0.2,0.3,0.5`, `dilution:0.9`.
    #[arg(long)]
    prior: Option<String>,
    /// `g-prior[:g]` or `hyper-g[:a]`.
    #[arg(long)]
    coef_prior: Option<String>,
    /// Largest model size considered.
    #[arg(long)]
    max_size: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct LipsArgs {
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    islands: Option<usize>,
    /// Look-ahead depth k (default 3, or 2 when p > 500).
    #[arg(long)]
    lookahead: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct Mc3Args {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact posterior over all 2^p models (p <= 20).
    Enumerate {
        #[command(flatten)]
        common: Common,
    },
    /// LIPS sampling; writes pips.csv and, with --predict, predictions.csv.
    Lips {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lips: LipsArgs,
        /// Write pips.csv even when predicting.
        #[arg(long)]
        pips: bool,
        /// CSV of new rows to predict.
        #[arg(long)]
        predict: Option<PathBuf>,
    },
    /// MC³ baseline sampler.
    Mc3 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc3: Mc3Args,
    },
    /// Simulated correlated-design data set.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `ex3`, `ex4`, or `custom:<intercept>:<sigma>:<j>=<beta>,...`.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
    },
    /// BMA predictions for held-out rows; reports ASE when they carry the response.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lips: LipsArgs,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Repeated train/test splits; per-split ASE for each method.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lips: LipsArgs,
        #[command(flatten)]
        mc3: Mc3Args,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        /// Comma-separated subset of lips, mc3, null.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

impl Common {
    fn flags(&self) -> RunConfig {
        RunConfig {
            data: self.data.clone(),
            response: self.response.clone(),
            out: self.out.clone(),
            seed: self.seed,
            prior: self.prior.clone().map(PriorSetting::Spec),
            coef_prior: self.coef_prior.clone(),
            max_size: self.max_size,
            ..Default::default()
        }
    }
}

impl LipsArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.particles = self.particles;
        cfg.islands = self.islands;
        cfg.lookahead = self.lookahead;
    }
}

impl Mc3Args {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.iterations = self.iterations;
        cfg.burnin = self.burnin;
    }
}

/// Config file (if any) overlaid with the command-line flags.
fn effective(common: &Common, flags: RunConfig) -> Result<RunConfig, LipsError> {
    let base = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    Ok(base.overlay(flags))
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, LipsError> {
    if cli.threads.is_some() {
        return Ok(cli.threads);
    }
    let common = match &cli.command {
        Command::Enumerate { common }
        | Command::Lips { common, .. }
        | Command::Mc3 { common, .. }
        | Command::Simulate { common, .. }
        | Command::Predict { common, .. }
        | Command::Compare { common, .. } => common,
    };
    if let Some(path) = &common.config {
        if let Some(t) = RunConfig::from_file(path)?.threads {
            return Ok(Some(t));
        }
    }
    match std::env::var("LIPS_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| LipsError::Config(format!("LIPS_THREADS=`{v}` is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli) -> Result<(), LipsError> {
    if let Some(t) = thread_count(&cli)? {
        if t == 0 {
            return Err(LipsError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| LipsError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Enumerate { common } => commands::enumerate(effective(&common, common.flags())?),
        Command::Lips {
            common,
            lips,
            pips,
            predict,
        } => {
            let mut flags = common.flags();
            lips.apply(&mut flags);
            flags.predict = predict;
            let cfg = effective(&common, flags)?;
            let pips = pips || cfg.predict.is_none();
            commands::lips(cfg, pips)
        }
        Command::Mc3 { common, mc3 } => {
            let mut flags = common.flags();
            mc3.apply(&mut flags);
            commands::mc3(effective(&common, flags)?)
        }
        Command::Simulate { common, variant, n, p } => {
            let flags = RunConfig {
                variant,
                n,
                p,
                ..common.flags()
            };
            commands::simulate(effective(&common, flags)?)
        }
        Command::Predict { common, lips, test } => {
            let mut flags = common.flags();
            lips.apply(&mut flags);
            flags.predict = test;
            commands::predict(effective(&common, flags)?)
        }
        Command::Compare {
            common,
            lips,
            mc3,
            splits,
            n_train,
            n_test,
            methods,
        } => {
            let mut flags = RunConfig {
                splits,
                n_train,
                n_test,
                methods,
                ..common.flags()
            };
            lips.apply(&mut flags);
            mc3.apply(&mut flags);
            commands::compare_cmd(effective(&common, flags)?)
        }
    }
}

fn exit_code(e: &LipsError) -> u8 {
    match e {
        LipsError::Config(_) | LipsError::Capacity { .. } => 2,
        LipsError::Parse { .. }
        | LipsError::Io(_)
        | LipsError::Csv(_)
        | LipsError::Domain(_)
        | LipsError::Collinear { .. } => 3,
        LipsError::Numeric(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
