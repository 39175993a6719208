//! Strict experiment configuration. A config file is a JSON object with a
//! `kind` field selecting the experiment; the remaining keys are parsed
//! into the kind-specific struct with unknown keys rejected by name.

use crate::engine::StartSpec;
use crate::models::{build_model, make_needle, TargetModel};
use crate::state::StateVector;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

/// Schema version written to every summary sidecar.
pub const SCHEMA_VERSION: u32 = 1;

fn one() -> u64 {
    1
}

/// Starting distribution, as written in config files.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartConfig {
    /// Every coordinate uniform on the state space, independently.
    UniformProduct,
    /// All coordinates at the monochromatic state of this symbol.
    Monochromatic(u8),
    /// All coordinates at this explicit state.
    Single(Vec<u8>),
}

impl StartConfig {
    pub fn to_spec(&self) -> StartSpec {
        match self {
            StartConfig::UniformProduct => StartSpec::UniformProduct,
            StartConfig::Monochromatic(s) => StartSpec::Monochromatic(*s),
            StartConfig::Single(coords) => {
                StartSpec::Single(StateVector::new(coords.clone()))
            }
        }
    }
}

fn default_start() -> StartConfig {
    StartConfig::UniformProduct
}

/// Model block: a `name` plus the model's own parameters.
#[derive(Clone, Debug, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(flatten)]
    pub params: serde_json::Value,
}

impl ModelConfig {
    pub fn build(&self) -> Result<TargetModel> {
        build_model(&self.name, &self.params)
    }
}

/// Schedule parameters shared by most experiment kinds.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epsilon: f64,
    pub v: f64,
    #[serde(default)]
    pub c_override: Option<f64>,
}

/// Plain replica runs recording statistic trajectories.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    /// Steps per replica; defaults to the forgetting horizon `t_n`.
    #[serde(default)]
    pub steps: Option<u64>,
    pub replicas: u64,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: StartConfig,
    /// Record full states instead of statistics (memory-guarded).
    #[serde(default)]
    pub observe_states: bool,
    #[serde(default = "one")]
    pub stride: u64,
}

/// Coupled pairs from two starts, run to the horizon.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub replicas: u64,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_x: StartConfig,
    #[serde(default = "default_start")]
    pub start_y: StartConfig,
}

fn default_groups() -> usize {
    8
}

fn default_window() -> [u64; 2] {
    [1000, 5000]
}

fn default_needle_steps() -> u64 {
    5000
}

/// The torpid-mixing demonstration: near-point-mass target, hit counting,
/// a total-variation lower bound, and the between-process diagnostic.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeedleConfig {
    pub n: usize,
    pub delta: f64,
    /// Distinguished state; defaults to all-ones.
    #[serde(default)]
    pub z: Option<Vec<u8>>,
    pub schedule: ScheduleConfig,
    #[serde(default = "default_needle_steps")]
    pub steps: u64,
    pub replicas: u64,
    pub seed: u64,
    /// Number of process groups for the scale-reduction diagnostic.
    #[serde(default = "default_groups")]
    pub groups: usize,
    /// Diagnostic time window `[from, to]`, inclusive.
    #[serde(default = "default_window")]
    pub window: [u64; 2],
    #[serde(default = "one")]
    pub stride: u64,
}

impl NeedleConfig {
    pub fn build_model(&self) -> Result<TargetModel> {
        let z = match &self.z {
            Some(coords) => StateVector::new(coords.clone()),
            None => StateVector::constant(self.n, 1),
        };
        make_needle(self.n, self.delta, z)
    }
}

/// Per-coordinate marginal uniformity at fixed times (flat-target check).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformityConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub replicas: u64,
    pub times: Vec<u64>,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: StartConfig,
}

/// Scale-reduction diagnostic over several independent processes.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub steps: Option<u64>,
    /// Number of independent processes (>= 2).
    pub replicas: u64,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: StartConfig,
    /// Observed coordinate; defaults to the coldest (`n`).
    #[serde(default)]
    pub coordinate: Option<usize>,
    #[serde(default = "default_window")]
    pub window: [u64; 2],
}

/// Which explicit transition matrix to analyze.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// The coordinate-0 uniform Gibbs kernel.
    Gibbs,
    /// The lazy Metropolis kernel at this temperature level.
    Metropolis(usize),
}

/// Exact worst-case distance curves d(t) and d-bar(t) for one kernel.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbarConfig {
    pub model: ModelConfig,
    pub kernel: KernelChoice,
    pub t_max: usize,
}

/// A fully parsed experiment configuration.
#[derive(Clone, Debug)]
pub enum ExperimentConfig {
    Run(RunConfig),
    Couple(CoupleConfig),
    Forget(CoupleConfig),
    Needle(NeedleConfig),
    LemmaUniform(UniformityConfig),
    Diag(DiagConfig),
    DbarCheck(DbarConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Run(_) => "run",
            ExperimentConfig::Couple(_) => "couple",
            ExperimentConfig::Forget(_) => "forget",
            ExperimentConfig::Needle(_) => "needle",
            ExperimentConfig::LemmaUniform(_) => "lemma-uniform",
            ExperimentConfig::Diag(_) => "diag",
            ExperimentConfig::DbarCheck(_) => "dbar-check",
        }
    }
}

fn parse_kind<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Parse a config from JSON text; `kind` selects the experiment and every
/// other key must belong to that kind's schema.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let kind = obj
        .remove("kind")
        .ok_or_else(|| Error::Config("missing required key `kind`".into()))?;
    let kind = kind
        .as_str()
        .ok_or_else(|| Error::Config("`kind` must be a string".into()))?
        .to_owned();
    match kind.as_str() {
        "run" => Ok(ExperimentConfig::Run(parse_kind(value)?)),
        "couple" => Ok(ExperimentConfig::Couple(parse_kind(value)?)),
        "forget" => Ok(ExperimentConfig::Forget(parse_kind(value)?)),
        "needle" => Ok(ExperimentConfig::Needle(parse_kind(value)?)),
        "lemma-uniform" => Ok(ExperimentConfig::LemmaUniform(parse_kind(value)?)),
        "diag" => Ok(ExperimentConfig::Diag(parse_kind(value)?)),
        "dbar-check" => Ok(ExperimentConfig::DbarCheck(parse_kind(value)?)),
        other => Err(Error::Config(format!(
            "unknown experiment kind `{other}` (expected run, couple, forget, needle, \
             lemma-uniform, diag, or dbar-check)"
        ))),
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Command-line overrides applied after parsing.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, over: &Overrides) {
        let (seed, replicas): (&mut u64, Option<&mut u64>) = match self {
            ExperimentConfig::Run(c) => (&mut c.seed, Some(&mut c.replicas)),
            ExperimentConfig::Couple(c) | ExperimentConfig::Forget(c) => {
                (&mut c.seed, Some(&mut c.replicas))
            }
            ExperimentConfig::Needle(c) => (&mut c.seed, Some(&mut c.replicas)),
            ExperimentConfig::LemmaUniform(c) => (&mut c.seed, Some(&mut c.replicas)),
            ExperimentConfig::Diag(c) => (&mut c.seed, Some(&mut c.replicas)),
            ExperimentConfig::DbarCheck(_) => return,
        };
        if let Some(s) = over.seed {
            *seed = s;
        }
        if let (Some(r), Some(slot)) = (over.replicas, replicas) {
            *slot = r;
        }
    }
}
