//! Experiment configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qmc_core::graph::GraphFamily;
use qmc_core::percolation::{DEFAULT_ENUMERATION_CAP, DEFAULT_SAMPLES, DEFAULT_SEQUENCE_BUDGET};
use qmc_core::{MarkedSet, Variant};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

/// `none`, `first:M`, or a comma-separated vertex list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MarkedSpec {
    List(Vec<usize>),
    First(usize),
}

impl MarkedSpec {
    pub fn resolve(&self, n: usize) -> Result<MarkedSet, CliError> {
        let set = match self {
            Self::List(v) => MarkedSet::new(n, v.iter().copied()),
            Self::First(m) => MarkedSet::first(n, *m),
        };
        set.map_err(|e| CliError::Config(format!("marked set `{self}`: {e}")))
    }
}

impl FromStr for MarkedSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::List(Vec::new()));
        }
        if let Some(m) = s.strip_prefix("first:") {
            return m.parse().map(Self::First).map_err(|_| format!("`{m}` is not a count"));
        }
        s.split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a vertex index")))
            .collect::<Result<_, _>>()
            .map(Self::List)
    }
}

impl fmt::Display for MarkedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::List(v) if v.is_empty() => f.write_str("none"),
            Self::List(v) => {
                let parts: Vec<String> = v.iter().map(usize::to_string).collect();
                f.write_str(&parts.join(","))
            }
            Self::First(m) => write!(f, "first:{m}"),
        }
    }
}

/// `A:STEP:B`, inclusive of both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PGrid {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl PGrid {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl FromStr for PGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, step, b] = parts[..] else {
            return Err(format!("p grid `{s}` must look like A:STEP:B"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        let grid = Self { start: num(a)?, step: num(step)?, stop: num(b)? };
        if !(grid.step > 0.0) || grid.stop < grid.start {
            return Err(format!("p grid `{s}` needs STEP > 0 and A <= B"));
        }
        Ok(grid)
    }
}

impl fmt::Display for PGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.step, self.stop)
    }
}

macro_rules! string_serde {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}
string_serde!(MarkedSpec, PGrid);

mod graph_spec {
    use super::*;

    pub fn serialize<S: Serializer>(g: &GraphFamily, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(g)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GraphFamily, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Exact,
    Mc,
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "mc" => Ok(Self::Mc),
            _ => Err(format!("unknown mode `{s}` (exact|mc)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolationConfig {
    /// Single percolation probability.
    pub p: Option<f64>,
    pub p_grid: Option<PGrid>,
    /// Probabilities given as fractions of the threshold `p_th`.
    pub p_threshold_fractions: Option<Vec<f64>>,
    pub variant: Variant,
}

impl Default for PercolationConfig {
    fn default() -> Self {
        Self { p: None, p_grid: None, p_threshold_fractions: None, variant: Variant::BondFlip }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    pub t_cap: Option<usize>,
    pub enumeration_cap: u64,
    pub sequence_budget: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Self { t_cap: None, enumeration_cap: DEFAULT_ENUMERATION_CAP, sequence_budget: DEFAULT_SEQUENCE_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "graph_spec")]
    pub graph: GraphFamily,
    pub marked: MarkedSpec,
    pub percolation: PercolationConfig,
    pub mode: ModeKind,
    pub samples: u64,
    pub seed: u64,
    pub caps: Caps,
    /// Detection trials per campaign.
    pub trials: u64,
    /// Detection horizon `T`; defaults to the detection bound.
    pub horizon: Option<usize>,
    /// Cross-check every detection trial against the full control-register
    /// simulation.
    pub check_reference: bool,
    /// Also write `Ū_dec` and its provenance.
    pub dump_operator: bool,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphFamily::Complete(3),
            marked: MarkedSpec::First(1),
            percolation: PercolationConfig::default(),
            mode: ModeKind::Exact,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            caps: Caps::default(),
            trials: 10_000,
            horizon: None,
            check_reference: false,
            dump_operator: false,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Accepts a bare config or a command artifact, whose `config` field is
    /// the resolved config of that run.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).or_else(|e| {
            #[derive(Deserialize)]
            struct Artifact {
                #[allow(dead_code)]
                schema_version: u32,
                config: ExperimentConfig,
            }
            serde_json::from_str::<Artifact>(text)
                .map(|a| a.config)
                .map_err(|_| CliError::Config(format!("config: {e}")))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that do not need the graph itself.
    pub fn validate(&self) -> Result<(), CliError> {
        if let GraphFamily::FromFile(path) = &self.graph {
            if !path.exists() {
                return Err(CliError::Config(format!("graph file {} does not exist", path.display())));
            }
        }
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if let Some(p) = self.percolation.p {
            if !in_unit(p) {
                return Err(CliError::Config(format!("p = {p} is outside [0, 1]")));
            }
        }
        if let Some(grid) = self.percolation.p_grid {
            if !in_unit(grid.start) || !in_unit(grid.stop) {
                return Err(CliError::Config(format!("p grid {grid} leaves [0, 1]")));
            }
        }
        if let Some(f) = &self.percolation.p_threshold_fractions {
            if f.iter().any(|x| !(*x >= 0.0)) {
                return Err(CliError::Config("threshold fractions must be non-negative".into()));
            }
        }
        if self.mode == ModeKind::Mc && self.samples == 0 {
            return Err(CliError::Config("--samples must be positive in mc mode".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Config("--trials must be positive".into()));
        }
        Ok(())
    }
}
