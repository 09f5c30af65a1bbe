//! `mwdp` command-line front end.
//!
//! Each subcommand writes its artifacts plus a `manifest.json` into the output
//! directory (`--out-dir`, or `MWDP_OUT_DIR`). All randomness comes from
//! `--seed`.

mod aggregate;
mod analyze;
mod manifest;
mod simulate;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mwdp::{ClipNorm, MechanismConfig, MechanismKind, OrderGrid, PrivacyBudget};
use serde::Serialize;

pub use manifest::{Artifact, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "mwdp", version, about = "Differentially private multi-winner voting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Aggregate a ballot CSV under a privacy budget.
    Aggregate(aggregate::AggregateArgs),
    /// Run budgeted labelling on a synthetic teacher ensemble.
    Simulate(simulate::SimulateArgs),
    /// Gap CDFs, dependency matrices and sensitivity reports.
    Analyze(analyze::AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MechanismFlag {
    Binary,
    Tau,
    Powerset,
}

impl From<MechanismFlag> for MechanismKind {
    fn from(m: MechanismFlag) -> Self {
        match m {
            MechanismFlag::Binary => MechanismKind::Binary,
            MechanismFlag::Tau => MechanismKind::Tau,
            MechanismFlag::Powerset => MechanismKind::Powerset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormFlag {
    L1,
    L2,
}

impl From<NormFlag> for ClipNorm {
    fn from(n: NormFlag) -> Self {
        match n {
            NormFlag::L1 => ClipNorm::L1,
            NormFlag::L2 => ClipNorm::L2,
        }
    }
}

/// Noise, gate and clipping flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct NoiseArgs {
    /// Std of the release noise. 0 needs --oracle-mode.
    #[arg(long)]
    pub sigma_gnmax: Option<f64>,
    /// Std of the consensus-check noise (0 disables the check).
    #[arg(long, default_value_t = 0.0)]
    pub sigma_threshold: f64,
    /// Consensus threshold T (0 disables the check).
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Clip bound for tau voting.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "l2")]
    pub clip_norm: NormFlag,
    /// Allow --sigma-gnmax 0: releases the exact election with no privacy.
    #[arg(long)]
    pub oracle_mode: bool,
}

impl NoiseArgs {
    pub fn config(&self, kind: MechanismKind, default_sigma: Option<f64>) -> Result<MechanismConfig> {
        let Some(sigma_g) = self.sigma_gnmax.or(default_sigma) else {
            bail!("--sigma-gnmax is required");
        };
        if sigma_g == 0.0 && !self.oracle_mode {
            bail!(
                "--sigma-gnmax 0 releases the exact vote outcome with no privacy guarantee; \
                 pass --oracle-mode to do this deliberately"
            );
        }
        if self.oracle_mode && sigma_g != 0.0 {
            bail!("--oracle-mode requires --sigma-gnmax 0");
        }
        let cfg = MechanismConfig {
            kind,
            sigma_g,
            sigma_t: self.sigma_threshold,
            threshold_t: self.threshold,
            tau: self.tau,
            clip_norm: self.clip_norm.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone, Debug)]
pub struct BudgetArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Target δ. There is no default.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma separated Rényi orders; defaults to 1.25, 1.5, 2..=64.
    #[arg(long)]
    pub orders: Option<String>,
}

impl BudgetArgs {
    pub fn grid(&self) -> Result<OrderGrid> {
        Ok(match &self.orders {
            Some(s) => OrderGrid::parse_list(s)?,
            None => OrderGrid::default(),
        })
    }

    pub fn delta(&self, default: Option<f64>) -> Result<f64> {
        self.delta.or(default).ok_or_else(|| anyhow::anyhow!("--delta is required"))
    }

    pub fn budget(&self, default: Option<(f64, f64)>) -> Result<PrivacyBudget> {
        let epsilon = self.epsilon.or(default.map(|d| d.0)).ok_or_else(|| anyhow::anyhow!("--epsilon is required"))?;
        Ok(PrivacyBudget::new(epsilon, self.delta(default.map(|d| d.1))?)?)
    }
}

#[derive(Args, Clone, Debug)]
pub struct OutputArgs {
    #[arg(long, env = "MWDP_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct BudgetRecord {
    epsilon: f64,
    delta: f64,
    orders: Vec<f64>,
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Aggregate(a) => aggregate::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Analyze(a) => analyze::run(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}
