//! Name-keyed model registry: each model family registers a builder that
//! constructs a [`TargetModel`] from its own strictly-parsed parameter
//! block. The experiment config selects a model by name at runtime.

use super::{Graph, TargetModel};
use crate::state::StateVector;
use crate::{Error, Result};
use serde::Deserialize;
use std::sync::OnceLock;

/// Graph input: an edge-list file ("u v" per line, 0-indexed) or a named
/// generator.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    File {
        path: String,
        n: Option<usize>,
    },
    Cycle {
        n: usize,
    },
    Complete {
        n: usize,
    },
    Path {
        n: usize,
    },
    Edges {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphSpec::File { path, n } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("graph file {path}: {e}"))
                })?;
                Graph::from_edge_list_text(&text, *n)
            }
            GraphSpec::Cycle { n } => Ok(Graph::cycle(*n)),
            GraphSpec::Complete { n } => Ok(Graph::complete(*n)),
            GraphSpec::Path { n } => Ok(Graph::path(*n)),
            GraphSpec::Edges { n, edges } => Graph::new(*n, edges.clone()),
        }
    }
}

/// Model block of the experiment config: a name plus the parameters of the
/// selected family.
#[derive(Clone, Debug, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: serde_json::Value,
}

impl ModelSpec {
    pub fn build(&self) -> Result<TargetModel> {
        build_model(&self.name, &self.params)
    }
}

trait ModelBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel>;
}

fn parse_params<T: serde::de::DeserializeOwned>(name: &str, params: &serde_json::Value) -> Result<T> {
    serde_json::from_value::<T>(params.clone())
        .map_err(|e| Error::Config(format!("model '{name}': {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IsingParams {
    graph: GraphSpec,
    beta: f64,
    #[serde(default)]
    field: f64,
}

struct IsingBuilder;

impl ModelBuilder for IsingBuilder {
    fn name(&self) -> &'static str {
        "ising"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: IsingParams = parse_params(self.name(), params)?;
        super::make_ising(&p.graph.build()?, p.beta, p.field)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PottsParams {
    graph: GraphSpec,
    q: u8,
    beta: f64,
}

struct PottsBuilder;

impl ModelBuilder for PottsBuilder {
    fn name(&self) -> &'static str {
        "potts"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: PottsParams = parse_params(self.name(), params)?;
        super::make_potts(&p.graph.build()?, p.q, p.beta)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurieWeissPottsParams {
    n: usize,
    q: u8,
    beta: f64,
}

struct CurieWeissPottsBuilder;

impl ModelBuilder for CurieWeissPottsBuilder {
    fn name(&self) -> &'static str {
        "curie-weiss-potts"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: CurieWeissPottsParams = parse_params(self.name(), params)?;
        super::make_curie_weiss_potts(p.n, p.q, p.beta)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinGlassParams {
    graph: GraphSpec,
    beta: f64,
    disorder_seed: u64,
}

struct SpinGlassBuilder;

impl ModelBuilder for SpinGlassBuilder {
    fn name(&self) -> &'static str {
        "spin-glass"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: SpinGlassParams = parse_params(self.name(), params)?;
        super::make_spin_glass(&p.graph.build()?, p.beta, p.disorder_seed)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ErgmParams {
    nu: usize,
    beta1: f64,
    beta2: f64,
}

struct ErgmBuilder;

impl ModelBuilder for ErgmBuilder {
    fn name(&self) -> &'static str {
        "ergm"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: ErgmParams = parse_params(self.name(), params)?;
        super::make_ergm_edge_triangle(p.nu, p.beta1, p.beta2)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NeedleParams {
    n: usize,
    delta: f64,
    /// Needle state as a bit vector; defaults to all-ones.
    z: Option<Vec<u8>>,
}

struct NeedleBuilder;

impl ModelBuilder for NeedleBuilder {
    fn name(&self) -> &'static str {
        "needle"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: NeedleParams = parse_params(self.name(), params)?;
        let z = p
            .z
            .map(StateVector::new)
            .unwrap_or_else(|| StateVector::constant(p.n, 1));
        super::make_needle(p.n, p.delta, z)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformParams {
    n: usize,
    q: u8,
}

struct UniformBuilder;

impl ModelBuilder for UniformBuilder {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn build(&self, params: &serde_json::Value) -> Result<TargetModel> {
        let p: UniformParams = parse_params(self.name(), params)?;
        super::make_uniform(p.n, p.q)
    }
}

fn registry() -> &'static [Box<dyn ModelBuilder>] {
    static REGISTRY: OnceLock<Vec<Box<dyn ModelBuilder>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        vec![
            Box::new(IsingBuilder),
            Box::new(PottsBuilder),
            Box::new(CurieWeissPottsBuilder),
            Box::new(SpinGlassBuilder),
            Box::new(ErgmBuilder),
            Box::new(NeedleBuilder),
            Box::new(UniformBuilder),
        ]
    })
}

/// Registered model names.
pub fn model_names() -> Vec<&'static str> {
    registry().iter().map(|b| b.name()).collect()
}

/// Build a model by registered name from its parameter block.
pub fn build_model(name: &str, params: &serde_json::Value) -> Result<TargetModel> {
    registry()
        .iter()
        .find(|b| b.name() == name)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown model '{}', expected one of: {}",
                name,
                model_names().join(", ")
            ))
        })?
        .build(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn builds_by_name() {
        let m = build_model("needle", &json!({"n": 5, "delta": 0.5})).unwrap();
        assert_eq!(m.name(), "needle");
        assert_eq!(m.n(), 5);
    }

    #[test]
    fn unknown_model_rejected() {
        let err = build_model("nope", &json!({})).unwrap_err();
        assert!(err.to_string().contains("unknown model"));
    }

    #[test]
    fn unknown_param_key_rejected() {
        let err = build_model("needle", &json!({"n": 5, "delta": 0.5, "bogus": 1})).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn graph_from_text() {
        let g = crate::models::Graph::from_edge_list_text("0 1\n1 2\n# comment\n2 0\n", None)
            .unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges().len(), 3);
    }
}
