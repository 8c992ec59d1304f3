//! Command-line front end: evaluate, sweep, tune, offsets, synth, folds.
//!
//! Every subcommand writes its outputs plus a `manifest.json` into `--out`.
//! Exit codes: 0 success, 1 input or parse error, 2 infeasible constraints.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_evaluate, cmd_folds, cmd_offsets, cmd_sweep, cmd_synth, cmd_tune, exit_code, Outcome,
};
pub use config::{RangeSpec, RunConfig};

pub const THREADS_ENV: &str = "ALARM_PIPELINE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "alarm-pipeline",
    version,
    about = "Fall-alarm filtering, evaluation and tuning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Filter, threshold and score a corpus (or alarm counts) at one configuration.
    Evaluate,
    /// Evaluate every (W, T_pred) grid cell and write plot-ready CSV.
    Sweep,
    /// Constrained per-database argmax of F_beta, averaged into one configuration.
    Tune,
    /// Duration and offset of every false alarm.
    Offsets,
    /// Generate a synthetic corpus with planted falls and false dips.
    Synth,
    /// Assign videos to folds, keeping parent groups together.
    Folds,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evaluate => "evaluate",
            Command::Sweep => "sweep",
            Command::Tune => "tune",
            Command::Offsets => "offsets",
            Command::Synth => "synth",
            Command::Folds => "folds",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated beta values, e.g. `0.5,2`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    /// Filter widths in seconds as start:stop:step.
    #[arg(long = "w-grid", global = true)]
    pub w_grid: Option<RangeSpec>,
    /// Thresholds as start:stop:step.
    #[arg(long = "t-grid", global = true)]
    pub t_grid: Option<RangeSpec>,
    /// CSV of database_id,TP_a,FP_a,FN_a; evaluate from counts alone.
    #[arg(long = "counts-only", global = true)]
    pub counts_only: Option<PathBuf>,
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
    /// Number of folds for `folds`.
    #[arg(long, global = true)]
    pub k: Option<usize>,
}

impl Flags {
    pub fn resolve(&self) -> alarm_pipeline::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            if let Some(spec) = cfg.synth.as_mut() {
                spec.reseed(seed);
            }
        }
        if let Some(beta) = &self.beta {
            cfg.betas = beta.clone();
            if let Some(&first) = beta.first() {
                cfg.tuning_beta = first;
            }
        }
        if let Some(w) = self.w_grid {
            cfg.w_grid = w;
        }
        if let Some(t) = self.t_grid {
            cfg.t_grid = t;
        }
        if let Some(p) = &self.counts_only {
            cfg.counts_only = Some(p.clone());
        }
        if let Some(p) = &self.annotations {
            cfg.annotations = Some(p.clone());
        }
        if let Some(p) = &self.predictions {
            cfg.predictions = Some(p.clone());
        }
        if let Some(k) = self.k {
            cfg.folds = k;
        }
        Ok(cfg)
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig) -> alarm_pipeline::Result<Outcome> {
    match command {
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Tune => cmd_tune(cfg),
        Command::Offsets => cmd_offsets(cfg),
        Command::Synth => cmd_synth(cfg),
        Command::Folds => cmd_folds(cfg),
    }
}

/// Caps rayon's global pool from `ALARM_PIPELINE_THREADS` when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Parses nothing; runs an already parsed command line and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match cli.flags.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match dispatch(cli.command, &cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
