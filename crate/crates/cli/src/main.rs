mod config;
mod fit;
mod output;
mod replicate;
mod simulate;
mod summarize;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use brecs::Parametrization;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::SamplerOverrides;
use replicate::{ParamChoice, Scale, TableId};

#[derive(Parser)]
#[command(
    name = "brecs",
    version,
    about = "Bayesian rank estimation and covariate selection for reduced-rank regression"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to CSV data and write the selection report.
    Fit(FitArgs),
    /// Generate a synthetic data set with known coefficients.
    Simulate(SimulateArgs),
    /// Run one of the simulation experiments and write its tables.
    Replicate(ReplicateArgs),
    /// Print the report of a previous fit, optionally with new thresholds.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamArg {
    Rrn,
    Rrcs,
}

impl From<ParamArg> for Parametrization {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Rrn => Parametrization::Naive,
            ParamArg::Rrcs => Parametrization::ColumnSharing,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every other seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SamplerArgs {
    /// Iterations per chain, burn-in included.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Responses, n x q numeric CSV.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Covariates, n x p numeric CSV.
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long, value_enum)]
    param: Option<ParamArg>,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    chains: Option<usize>,
    /// Share threshold of the rule of thumb.
    #[arg(long)]
    sr_bar: Option<f64>,
    /// Probability threshold of the rule of thumb.
    #[arg(long)]
    p_bar: Option<f64>,
    /// Subtract the column means of Y.
    #[arg(long)]
    center: bool,
    /// Append a column of ones to X.
    #[arg(long)]
    intercept: bool,
    /// Keep a random subset of this many rows.
    #[arg(long)]
    subsample: Option<usize>,
    /// Also write every retained coefficient draw to draws_c.csv.
    #[arg(long)]
    save_draws: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// True rank.
    #[arg(long)]
    r0: Option<usize>,
    /// non-sparse, sparse or zeros.
    #[arg(long)]
    dgp: Option<String>,
    /// Nonzero rows for the sparse design.
    #[arg(long)]
    p_star: Option<usize>,
    /// Fraction of zero entries for the random-zeros design.
    #[arg(long)]
    z: Option<f64>,
    /// Compound-symmetric covariates.
    #[arg(long)]
    x_corr: bool,
    /// Compound-symmetric errors.
    #[arg(long)]
    e_corr: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(value_enum)]
    table: TableId,
    #[arg(long, value_enum, default_value = "desk")]
    scale: Scale,
    #[arg(long, value_enum)]
    param: Option<ParamChoice>,
    /// Replications per cell (overrides the scale default).
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Output directory of a previous fit.
    dir: PathBuf,
    #[arg(long)]
    sr_bar: Option<f64>,
    #[arg(long)]
    p_bar: Option<f64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn overrides(s: &SamplerArgs, param: Option<Parametrization>) -> SamplerOverrides {
    SamplerOverrides {
        param,
        iters: s.iters,
        burnin: s.burnin,
        thin: s.thin,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => fit::run(fit::FitRequest {
            config: a.common.config,
            y: a.y,
            x: a.x,
            center: a.center,
            intercept: a.intercept,
            subsample: a.subsample,
            seed: a.common.seed,
            out: a.common.out,
            chains: a.chains,
            sr_bar: a.sr_bar,
            p_bar: a.p_bar,
            sampler: overrides(&a.sampler, a.param.map(Into::into)),
            save_draws: a.save_draws,
            jobs: a.common.jobs,
        }),
        Command::Simulate(a) => simulate::run(simulate::SimulateRequest {
            config: a.common.config,
            dgp: simulate::DgpOverrides {
                n: a.n,
                q: a.q,
                p: a.p,
                r0: a.r0,
                kind: a.dgp,
                p_star: a.p_star,
                z: a.z,
                x_corr: a.x_corr,
                e_corr: a.e_corr,
            },
            seed: a.common.seed,
            out: a.common.out,
        }),
        Command::Replicate(a) => replicate::run(replicate::ReplicateRequest {
            table: a.table,
            scale: a.scale,
            config: a.common.config,
            seed: a.common.seed,
            out: a.common.out,
            replications: a.reps,
            param: a.param,
            sampler: overrides(&a.sampler, None),
            jobs: a.common.jobs,
        }),
        Command::Summarize(a) => summarize::run(summarize::SummarizeRequest {
            dir: a.dir,
            sr_bar: a.sr_bar,
            p_bar: a.p_bar,
            json: a.json,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
