//! Command-line harness: `qmc qht | dqht | detect | verify | bounds`.
//!
//! Every command resolves an [`ExperimentConfig`] (JSON file, then flag
//! overrides), runs, and writes CSV/JSON artifacts into `--out`. JSON
//! artifacts embed the resolved config and the schema version.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qmc_core::graph::GraphFamily;
use qmc_core::Variant;

pub use commands::{run_command, CommandOutput};
pub use config::{ExperimentConfig, MarkedSpec, ModeKind, PGrid};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qmc_core::Error),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration problems, 1 for failures found while running.
    pub fn exit_code(&self) -> u8 {
        use qmc_core::Error as E;
        match self {
            Self::Config(_) | Self::Io { .. } => 2,
            Self::Core(e) => match e {
                E::InvalidGraph(_)
                | E::Parse(_)
                | E::VertexOutOfRange { .. }
                | E::EmptyMarkedSet
                | E::AllMarked
                | E::EnumerationCap { .. }
                | E::InvalidArgument(_)
                | E::NotSubgraph
                | E::Io(_)
                | E::Json(_) => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qmc", version, about = "Szegedy quantum walks under percolation decoherence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coherent hitting time and the Szegedy bound.
    Qht(CommonArgs),
    /// Decoherent hitting time, one row per percolation probability.
    Dqht(CommonArgs),
    /// Monte Carlo campaign of the detection circuit.
    Detect(CommonArgs),
    /// Invariant suite on small fixtures; exit 1 on any violation.
    Verify(VerifyArgs),
    /// Closed-form spectral bounds.
    Bounds(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// complete:N | cycle:N | file:PATH
    #[arg(long)]
    pub graph: Option<GraphFamily>,
    /// Comma-separated vertices, first:M, or none.
    #[arg(long)]
    pub marked: Option<MarkedSpec>,
    #[arg(long)]
    pub p: Option<f64>,
    /// A:STEP:B, inclusive.
    #[arg(long = "p-grid")]
    pub p_grid: Option<PGrid>,
    /// Probabilities as fractions of the threshold, e.g. 0,0.5,1.
    #[arg(long = "p-frac", value_delimiter = ',')]
    pub p_frac: Option<Vec<f64>>,
    /// bond-flip | removal
    #[arg(long)]
    pub variant: Option<Variant>,
    /// exact | mc
    #[arg(long)]
    pub mode: Option<ModeKind>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tcap: Option<usize>,
    /// Largest number of candidate graphs enumerated exactly.
    #[arg(long = "enum-cap")]
    pub enum_cap: Option<u64>,
    /// Largest number of step sequences enumerated exactly.
    #[arg(long = "sequence-budget")]
    pub sequence_budget: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Detection horizon T.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Check each detection trial against the full control-register state.
    #[arg(long = "check-reference")]
    pub check_reference: bool,
    /// Write the averaged operator and its provenance.
    #[arg(long = "dump-operator")]
    pub dump_operator: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSON transition matrix to check instead of the default fixtures.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(g) = &self.graph {
            c.graph = g.clone();
        }
        if let Some(m) = &self.marked {
            c.marked = m.clone();
        }
        if self.p.is_some() || self.p_grid.is_some() || self.p_frac.is_some() {
            c.percolation.p = self.p;
            c.percolation.p_grid = self.p_grid;
            c.percolation.p_threshold_fractions = self.p_frac.clone();
        }
        if let Some(v) = self.variant {
            c.percolation.variant = v;
        }
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if let Some(s) = self.samples {
            c.samples = s;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.tcap {
            c.caps.t_cap = Some(t);
        }
        if let Some(e) = self.enum_cap {
            c.caps.enumeration_cap = e;
        }
        if let Some(b) = self.sequence_budget {
            c.caps.sequence_budget = b;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if let Some(h) = self.horizon {
            c.horizon = Some(h);
        }
        c.check_reference |= self.check_reference;
        c.dump_operator |= self.dump_operator;
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs the parsed command.
pub fn run(cli: Cli) -> Result<CommandOutput, CliError> {
    run_command(&cli.command)
}
