//! Target distributions behind a single interface: every model exposes its
//! dimension `n`, alphabet size `q`, inverse-temperature scale `beta`, the
//! bound `D`, and a sufficient statistic `S: X -> [0, D]` such that
//! `pi(x) = exp(n * beta * S(x)) / Z`. All engine arithmetic works with
//! statistic differences, so normalizing constants never appear.

mod registry;

pub use registry::{build_model, model_names, GraphSpec, ModelSpec};

use crate::state::StateVector;
use crate::{Error, Result};
use rand::Rng;
use std::sync::Arc;

/// Sufficient statistic of a target model. Implementations are immutable
/// and shared across engines.
pub trait SufficientStatistic: Send + Sync {
    fn eval(&self, coords: &[u8]) -> f64;
}

/// A target distribution `pi(x) = exp(n * beta * S(x)) / Z` on the product
/// space `{0,...,q-1}^n`.
#[derive(Clone)]
pub struct TargetModel {
    name: String,
    n: usize,
    q: u8,
    beta: f64,
    d: f64,
    /// Additive shift applied to the raw (unscaled) Hamiltonian so that the
    /// statistic is nonnegative. Recorded for inspection; it multiplies
    /// `pi` by a constant and cancels in every ratio.
    shift: f64,
    stat: Arc<dyn SufficientStatistic>,
    /// Distinguished state used for hit-flag observation (the needle).
    distinguished: Option<StateVector>,
}

impl std::fmt::Debug for TargetModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("q", &self.q)
            .field("beta", &self.beta)
            .field("d", &self.d)
            .field("shift", &self.shift)
            .finish_non_exhaustive()
    }
}

impl TargetModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The bound `D` with `0 <= S(x) <= D`.
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn distinguished(&self) -> Option<&StateVector> {
        self.distinguished.as_ref()
    }

    /// `S(x)`.
    pub fn statistic(&self, x: &StateVector) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        self.stat.eval(x.coords())
    }

    /// Number of states `q^n`, if it fits in a `usize`.
    pub fn space_size(&self) -> Option<usize> {
        (self.q as usize).checked_pow(self.n as u32)
    }
}

/// Undirected simple graph given as an explicit edge list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("graph: empty vertex set".into()));
        }
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::Config(format!(
                    "graph: edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::Config(format!("graph: self-loop at {u}")));
            }
        }
        Ok(Graph { n, edges })
    }

    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph { n, edges }
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Graph { n, edges }
    }

    pub fn path(n: usize) -> Self {
        let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Graph { n, edges }
    }

    /// Parse "u v" pairs, one per line, 0-indexed. Blank lines and `#`
    /// comments are skipped. `n` defaults to `max vertex + 1`.
    pub fn from_edge_list_text(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_v = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok()).ok_or_else(|| {
                    Error::Config(format!("graph file line {}: expected 'u v'", lineno + 1))
                })
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            max_v = max_v.max(u).max(v);
            edges.push((u, v));
        }
        Graph::new(n.unwrap_or(max_v + 1), edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

fn spin(c: u8) -> f64 {
    2.0 * c as f64 - 1.0
}

struct IsingStat {
    edges: Vec<(usize, usize)>,
    field: f64,
    offset: f64,
    n: f64,
}

impl SufficientStatistic for IsingStat {
    fn eval(&self, coords: &[u8]) -> f64 {
        let mut raw = 0.0;
        for &(u, v) in &self.edges {
            raw += spin(coords[u]) * spin(coords[v]);
        }
        if self.field != 0.0 {
            raw += self.field * coords.iter().map(|&c| spin(c)).sum::<f64>();
        }
        (raw + self.offset) / self.n
    }
}

/// Ising model with optional external field `h`:
/// `pi(sigma) ∝ exp(beta * (sum_{v~w} sigma_v sigma_w + h * sum_v sigma_v))`.
///
/// The statistic is the raw Hamiltonian shifted by `|E| + n|h|` (its lower
/// bound) and divided by `n`, so `D = (2|E| + 2n|h|) / n`.
pub fn make_ising(graph: &Graph, beta: f64, field: f64) -> Result<TargetModel> {
    if beta < 0.0 {
        return Err(Error::Config("ising: beta must be >= 0".into()));
    }
    let n = graph.n();
    let offset = graph.edges().len() as f64 + n as f64 * field.abs();
    Ok(TargetModel {
        name: "ising".into(),
        n,
        q: 2,
        beta,
        d: 2.0 * offset / n as f64,
        shift: offset,
        stat: Arc::new(IsingStat {
            edges: graph.edges().to_vec(),
            field,
            offset,
            n: n as f64,
        }),
        distinguished: None,
    })
}

struct PottsStat {
    edges: Vec<(usize, usize)>,
    n: f64,
}

impl SufficientStatistic for PottsStat {
    fn eval(&self, coords: &[u8]) -> f64 {
        let agree = self
            .edges
            .iter()
            .filter(|&&(u, v)| coords[u] == coords[v])
            .count();
        agree as f64 / self.n
    }
}

/// Potts model with `q >= 2` colors on a bounded-degree graph:
/// `S(sigma) = n^{-1} sum_{u~v} 1{sigma_u = sigma_v}`, `D = d/2` where `d`
/// is the max degree.
pub fn make_potts(graph: &Graph, q: u8, beta: f64) -> Result<TargetModel> {
    if q < 2 {
        return Err(Error::Config("potts: q must be >= 2".into()));
    }
    if beta < 0.0 {
        return Err(Error::Config("potts: beta must be >= 0".into()));
    }
    let n = graph.n();
    Ok(TargetModel {
        name: "potts".into(),
        n,
        q,
        beta,
        d: graph.max_degree() as f64 / 2.0,
        shift: 0.0,
        stat: Arc::new(PottsStat {
            edges: graph.edges().to_vec(),
            n: n as f64,
        }),
        distinguished: None,
    })
}

struct CurieWeissPottsStat {
    q: usize,
    n: f64,
}

impl SufficientStatistic for CurieWeissPottsStat {
    fn eval(&self, coords: &[u8]) -> f64 {
        // sum over ordered pairs (v, w) including v = w equals
        // sum_k count_k^2.
        let mut counts = vec![0usize; self.q];
        for &c in coords {
            counts[c as usize] += 1;
        }
        counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / (self.n * self.n)
    }
}

/// Mean-field (Curie-Weiss) Potts model with the `beta/n` scaling:
/// `S(sigma) = n^{-2} sum_{v,w} 1{sigma_v = sigma_w}`, `D = 1`.
pub fn make_curie_weiss_potts(n: usize, q: u8, beta: f64) -> Result<TargetModel> {
    if q < 2 {
        return Err(Error::Config("curie-weiss-potts: q must be >= 2".into()));
    }
    if n == 0 {
        return Err(Error::Config("curie-weiss-potts: n must be >= 1".into()));
    }
    if beta < 0.0 {
        return Err(Error::Config("curie-weiss-potts: beta must be >= 0".into()));
    }
    Ok(TargetModel {
        name: "curie-weiss-potts".into(),
        n,
        q,
        beta,
        d: 1.0,
        shift: 0.0,
        stat: Arc::new(CurieWeissPottsStat {
            q: q as usize,
            n: n as f64,
        }),
        distinguished: None,
    })
}

/// Quenched Rademacher couplings of an Edwards-Anderson spin glass, one
/// `+1/-1` constant per edge, reproducible from the disorder seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinGlassCouplings {
    values: Vec<i8>,
    seed: u64,
}

impl SpinGlassCouplings {
    /// Draw iid Rademacher couplings for `edge_count` edges. The disorder
    /// seed is separate from all simulation seeds.
    pub fn from_seed(edge_count: usize, seed: u64) -> Self {
        let mut rng = crate::streams::substream(seed, 0, 0, 0);
        let values = (0..edge_count)
            .map(|_| if rng.gen::<bool>() { 1i8 } else { -1i8 })
            .collect();
        SpinGlassCouplings { values, seed }
    }

    /// Explicit couplings, for tests that force a disorder realization.
    pub fn explicit(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Config("spin-glass couplings must be +1/-1".into()));
        }
        Ok(SpinGlassCouplings { values, seed: 0 })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

struct SpinGlassStat {
    edges: Vec<(usize, usize)>,
    couplings: Vec<i8>,
    offset: f64,
    n: f64,
}

impl SufficientStatistic for SpinGlassStat {
    fn eval(&self, coords: &[u8]) -> f64 {
        let mut raw = 0.0;
        for (&(u, v), &j) in self.edges.iter().zip(&self.couplings) {
            raw += j as f64 * spin(coords[u]) * spin(coords[v]);
        }
        (raw + self.offset) / self.n
    }
}

/// Edwards-Anderson spin glass with quenched Rademacher disorder fixed by
/// `disorder_seed`: `S(sigma) = (sum J_vw sigma_v sigma_w + |E|) / n`,
/// `D = 2|E|/n`.
pub fn make_spin_glass(graph: &Graph, beta: f64, disorder_seed: u64) -> Result<TargetModel> {
    let couplings = SpinGlassCouplings::from_seed(graph.edges().len(), disorder_seed);
    make_spin_glass_with_couplings(graph, beta, couplings)
}

/// Spin glass with explicitly supplied couplings (test hook for forcing a
/// disorder realization).
pub fn make_spin_glass_with_couplings(
    graph: &Graph,
    beta: f64,
    couplings: SpinGlassCouplings,
) -> Result<TargetModel> {
    if beta < 0.0 {
        return Err(Error::Config("spin-glass: beta must be >= 0".into()));
    }
    if couplings.values().len() != graph.edges().len() {
        return Err(Error::Config(
            "spin-glass: one coupling per edge required".into(),
        ));
    }
    let n = graph.n();
    let e = graph.edges().len() as f64;
    Ok(TargetModel {
        name: "spin-glass".into(),
        n,
        q: 2,
        beta,
        d: 2.0 * e / n as f64,
        shift: e,
        stat: Arc::new(SpinGlassStat {
            edges: graph.edges().to_vec(),
            couplings: couplings.values().to_vec(),
            offset: e,
            n: n as f64,
        }),
        distinguished: None,
    })
}

/// Lexicographic index of the vertex pair `(i, j)` with `i < j` among the
/// `nu*(nu-1)/2` potential edges of a graph on `nu` vertices.
pub fn ergm_edge_index(i: usize, j: usize, nu: usize) -> usize {
    debug_assert!(i < j && j < nu);
    // pairs (0,1), (0,2), ..., (0,nu-1), (1,2), ...
    i * nu - i * (i + 1) / 2 + (j - i - 1)
}

/// Decode a bit-vector into the edge list of the graph it encodes.
pub fn ergm_decode(coords: &[u8], nu: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..nu {
        for j in (i + 1)..nu {
            if coords[k] == 1 {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    edges
}

/// Encode an edge list on `nu` vertices into the bit-vector representation.
pub fn ergm_encode(edges: &[(usize, usize)], nu: usize) -> StateVector {
    let n = nu * (nu - 1) / 2;
    let mut coords = vec![0u8; n];
    for &(i, j) in edges {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        coords[ergm_edge_index(i, j, nu)] = 1;
    }
    StateVector::new(coords)
}

/// Triangle count via per-vertex adjacency bitmasks.
fn triangle_count(coords: &[u8], nu: usize) -> usize {
    let words = nu.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; nu];
    let mut k = 0;
    for i in 0..nu {
        for j in (i + 1)..nu {
            if coords[k] == 1 {
                adj[i][j / 64] |= 1 << (j % 64);
                adj[j][i / 64] |= 1 << (i % 64);
            }
            k += 1;
        }
    }
    let mut triangles = 0usize;
    let mut k = 0;
    for i in 0..nu {
        for j in (i + 1)..nu {
            if coords[k] == 1 {
                for w in 0..words {
                    triangles += (adj[i][w] & adj[j][w]).count_ones() as usize;
                }
            }
            k += 1;
        }
    }
    // each triangle counted once per edge, with the third vertex on either
    // side of the pair ordering; edges (i,j) with i<j see each triangle once
    // per edge, so divide by 3.
    triangles / 3
}

struct ErgmStat {
    nu: usize,
    beta1: f64,
    beta2: f64,
    offset: f64,
    n: f64,
}

impl SufficientStatistic for ErgmStat {
    fn eval(&self, coords: &[u8]) -> f64 {
        let e = coords.iter().filter(|&&c| c == 1).count() as f64;
        let tri = triangle_count(coords, self.nu) as f64;
        (2.0 * self.beta1 * e + 6.0 * self.beta2 * tri / self.nu as f64 + self.offset) / self.n
    }
}

/// Edge-triangle ERGM on simple graphs with `nu` vertices, encoded as
/// `{0,1}^n` with `n = nu*(nu-1)/2` edges in lexicographic pair order:
/// `pi(x) ∝ exp(2*beta1*E + 6*beta2*Delta/nu)`.
///
/// Arranged into the standard form with `beta = 1`: the exponent is shifted
/// by its lower bound over all graphs and divided by `n`, so
/// `S(x) = (2*beta1*E + 6*beta2*Delta/nu + offset) / n` and `D` is the
/// resulting upper bound.
pub fn make_ergm_edge_triangle(nu: usize, beta1: f64, beta2: f64) -> Result<TargetModel> {
    if nu < 3 {
        return Err(Error::Config("ergm: nu must be >= 3".into()));
    }
    let n = nu * (nu - 1) / 2;
    let max_tri = nu * (nu - 1) * (nu - 2) / 6;
    let e_term = |b1: f64| 2.0 * b1 * n as f64;
    let t_term = |b2: f64| 6.0 * b2 * max_tri as f64 / nu as f64;
    let offset = -(e_term(beta1.min(0.0)) + t_term(beta2.min(0.0)));
    let d = (e_term(beta1.max(0.0)) + t_term(beta2.max(0.0)) + offset) / n as f64;
    Ok(TargetModel {
        name: "ergm".into(),
        n,
        q: 2,
        beta: 1.0,
        d,
        shift: offset,
        stat: Arc::new(ErgmStat {
            nu,
            beta1,
            beta2,
            offset,
            n: n as f64,
        }),
        distinguished: None,
    })
}

struct NeedleStat {
    z: Vec<u8>,
    value: f64,
}

impl SufficientStatistic for NeedleStat {
    fn eval(&self, coords: &[u8]) -> f64 {
        if coords == self.z.as_slice() {
            self.value
        } else {
            0.0
        }
    }
}

/// Needle-in-a-haystack distribution on `{0,1}^n`: unnormalized mass
/// `2^n / delta` at the needle `z` and `1` elsewhere. In standard form:
/// `S(x) = 1{x=z} * (ln 2 + ln(1/delta)/n)`, `beta = 1`, `D = ln(2/delta)`.
pub fn make_needle(n: usize, delta: f64, z: StateVector) -> Result<TargetModel> {
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Config("needle: delta must be in (0, 1)".into()));
    }
    if z.len() != n || !z.in_alphabet(2) {
        return Err(Error::Config("needle: z must be a {0,1}^n state".into()));
    }
    let value = std::f64::consts::LN_2 + (1.0 / delta).ln() / n as f64;
    Ok(TargetModel {
        name: "needle".into(),
        n,
        q: 2,
        beta: 1.0,
        d: (2.0 / delta).ln(),
        shift: 0.0,
        stat: Arc::new(NeedleStat {
            z: z.coords().to_vec(),
            value,
        }),
        distinguished: Some(z),
    })
}

struct UniformStat;

impl SufficientStatistic for UniformStat {
    fn eval(&self, _coords: &[u8]) -> f64 {
        0.0
    }
}

/// Uniform distribution on `{0,...,q-1}^n` (`S` identically zero,
/// `beta = 0`). The flat target used by the uniformity experiments.
pub fn make_uniform(n: usize, q: u8) -> Result<TargetModel> {
    if n == 0 || q < 2 {
        return Err(Error::Config("uniform: need n >= 1 and q >= 2".into()));
    }
    Ok(TargetModel {
        name: "uniform".into(),
        n,
        q,
        beta: 0.0,
        d: 0.0,
        shift: 0.0,
        stat: Arc::new(UniformStat),
        distinguished: None,
    })
}

/// Guard for exhaustive enumeration: at most `2^24` states.
pub const ENUMERATION_CAP: usize = 1 << 24;

/// Exact probability table `pi(x) = exp(n*beta*S(x)) / Z` over the full
/// state space, indexed by [`StateVector::index`]. Oracle for small-space
/// validation only.
pub fn exact_distribution(model: &TargetModel) -> Result<Vec<f64>> {
    let size = model
        .space_size()
        .filter(|&s| s <= ENUMERATION_CAP)
        .ok_or_else(|| {
            Error::Guard(format!(
                "state space {}^{} exceeds enumeration cap",
                model.q(),
                model.n()
            ))
        })?;
    let table = exact_tempered_distribution(model, model.n())?;
    debug_assert_eq!(table.len(), size);
    Ok(table)
}

/// Exact tempered table `pi_j(x) ∝ exp(j*beta*S(x))` for level `j` in
/// `0..=n`; `j = n` recovers the target.
pub fn exact_tempered_distribution(model: &TargetModel, level: usize) -> Result<Vec<f64>> {
    let size = model
        .space_size()
        .filter(|&s| s <= ENUMERATION_CAP)
        .ok_or_else(|| {
            Error::Guard(format!(
                "state space {}^{} exceeds enumeration cap",
                model.q(),
                model.n()
            ))
        })?;
    let scale = level as f64 * model.beta();
    let mut logw = Vec::with_capacity(size);
    for idx in 0..size {
        let x = StateVector::from_index(idx, model.n(), model.q());
        logw.push(scale * model.statistic(&x));
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut table: Vec<f64> = logw.into_iter().map(|w| (w - max).exp()).collect();
    let z: f64 = table.iter().sum();
    for p in &mut table {
        *p /= z;
    }
    Ok(table)
}
