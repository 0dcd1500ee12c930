//! `tcausal`: tempered Bayesian causal inference from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Design, RunConfig, TauKind};
use output::OutputDir;

#[derive(Parser)]
#[command(name = "tcausal", version, about = "Tempered Bayesian causal inference for panels and cross-sections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Input panel (or table for fit-regression).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Outcome column(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    outcome: Option<Vec<String>>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    burnin: Option<usize>,
    /// ω grid, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    omega_grid: Option<Vec<f64>>,
    /// Candidate factor counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pseudo_fraction: Option<f64>,
    #[arg(long, global = true)]
    tune_fraction: Option<f64>,
    /// Bootstrap replicates `B`.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Fixed factor count; with `--omega` skips selection.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    omega: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel or cross-sectional data set with its truth.
    Simulate(SimulateArgs),
    /// Placebo-masked selection of (K, ω) with the full score surface.
    Select,
    /// Tempered regression fits over a list of ω values.
    FitRegression(RegressionArgs),
    /// ATT curves for the treated cells at a fixed (K, ω).
    FitPanel,
    /// Per-outcome placebo evaluation of RBCI and the matrix-completion baseline.
    Evaluate,
    /// Paired RBCI vs matrix-completion report on shared placebo cells.
    Compare,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: Option<DesignArg>,
    #[arg(long)]
    n_units: Option<usize>,
    #[arg(long)]
    n_times: Option<usize>,
    /// True number of factors.
    #[arg(long)]
    true_k: Option<usize>,
    #[arg(long)]
    beta_u: Option<f64>,
    #[arg(long)]
    never_treated: Option<usize>,
    #[arg(long)]
    tau_slope: Option<f64>,
    /// Cross-sectional sample size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DesignArg {
    Panel,
    CrossSection,
}

#[derive(Args)]
struct RegressionArgs {
    /// ω values to fit, comma separated.
    #[arg(long, value_delimiter = ',')]
    omegas: Option<Vec<f64>>,
    /// Known true effect; enables scoring and ω selection.
    #[arg(long)]
    tau_true: Option<f64>,
    /// Known noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = match &cli.command {
        Command::Simulate(_) => "simulate",
        Command::Select => "select",
        Command::FitRegression(_) => "fit-regression",
        Command::FitPanel => "fit-panel",
        Command::Evaluate => "evaluate",
        Command::Compare => "compare",
    }
    .into();
    set(&mut cfg.seed, c.seed);
    set(&mut cfg.alpha, c.alpha);
    if c.input.is_some() {
        cfg.input.path = c.input.clone();
    }
    if let Some(o) = &c.outcome {
        cfg.input.schema.outcome = o[0].clone();
        cfg.input.outcomes = if o.len() > 1 { o.clone() } else { Vec::new() };
    }
    set(&mut cfg.chain.iterations, c.iterations);
    set(&mut cfg.chain.burnin, c.burnin);
    set(&mut cfg.selection.omega_grid, c.omega_grid.clone());
    set(&mut cfg.selection.ks, c.ks.clone());
    set(&mut cfg.selection.pseudo_fraction, c.pseudo_fraction);
    set(&mut cfg.selection.tune_fraction, c.tune_fraction);
    set(&mut cfg.baseline.replicates, c.replicates);
    if c.k.is_some() {
        cfg.fit.k = c.k;
    }
    if c.omega.is_some() {
        cfg.fit.omega = c.omega;
    }
    match &cli.command {
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            set(
                &mut s.design,
                a.design.map(|d| match d {
                    DesignArg::Panel => Design::Panel,
                    DesignArg::CrossSection => Design::CrossSection,
                }),
            );
            set(&mut s.n_units, a.n_units);
            set(&mut s.n_times, a.n_times);
            set(&mut s.k, a.true_k);
            set(&mut s.beta_u, a.beta_u);
            set(&mut s.never_treated, a.never_treated);
            if a.tau_slope.is_some() {
                s.tau = TauKind::Ramp;
            }
            set(&mut s.tau_slope, a.tau_slope);
            set(&mut s.n, a.n);
            set(&mut s.gamma, a.gamma);
        }
        Command::FitRegression(a) => {
            let r = &mut cfg.regression;
            set(&mut r.omegas, a.omegas.clone());
            if a.tau_true.is_some() {
                r.tau_true = a.tau_true;
            }
            if a.sigma2.is_some() {
                r.sigma2 = a.sigma2;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let cfg = resolve(&cli)?;
    let out = OutputDir::open(&cli.common.out, &cfg)?;
    match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg, &out),
        Command::Select => commands::select(&cfg, &out),
        Command::FitRegression(_) => commands::fit_regression(&cfg, &out),
        Command::FitPanel => commands::fit_panel(&cfg, &out),
        Command::Evaluate => commands::evaluate(&cfg, &out),
        Command::Compare => commands::compare(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
