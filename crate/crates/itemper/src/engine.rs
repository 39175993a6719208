//! The interacting tempering process: an `(n+1)`-coordinate state where
//! coordinate 0 runs the uniform Gibbs sampler and coordinate `j >= 1`
//! alternates (by an interaction coin) between a lazy Metropolis move at
//! temperature level `j` and a cross-temperature proposal drawn from the
//! recorded history of coordinate `j - 1`.
//!
//! Coordinates update in the fixed order `0, 1, ..., n` within one step;
//! each coordinate owns an independent random substream, so the transition
//! of coordinates `0..=j` never reads the streams (or states) of
//! coordinates above `j`.

use crate::kernels::{c_of_epsilon, MetropolisKernel, UniformGibbsKernel};
use crate::models::TargetModel;
use crate::state::{PackedState, StateVector};
use crate::streams::{regime, substream};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Activation/collection schedule: coordinate `j` starts evolving at
/// `s_j` and its history is collected from `t_j` on, with
/// `s_0 = 0, t_0 = G_0, s_j = G_0 + (j-1) G, t_j = G_0 + j G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub n: usize,
    pub epsilon: f64,
    pub v: f64,
    pub lambda: f64,
    pub g0: u64,
    pub g: u64,
}

impl Schedule {
    /// Time when coordinate `j` starts evolving.
    pub fn s(&self, j: usize) -> u64 {
        if j == 0 {
            0
        } else {
            self.g0 + (j as u64 - 1) * self.g
        }
    }

    /// Time from which coordinate `j`'s history is collected.
    pub fn t(&self, j: usize) -> u64 {
        self.g0 + j as u64 * self.g
    }

    /// The forgetting horizon `t_n = G_0 + n G`.
    pub fn horizon(&self) -> u64 {
        self.t(self.n)
    }

    /// True when `epsilon >= 1`, making the total-variation guarantee
    /// vacuous (the schedule is still valid).
    pub fn is_vacuous(&self) -> bool {
        self.epsilon >= 1.0
    }
}

/// Build the schedule from the model constants: `lambda = v e^{-beta D}`,
/// `G = ceil(ln((n+1)/eps) / ln(1/(1-lambda)))`, and
/// `G_0 = ceil(C(eps) n ln n)` with `C(eps) = 3 + 2 ln(1/eps)` unless
/// overridden.
pub fn make_schedule(
    model: &TargetModel,
    epsilon: f64,
    v: f64,
    c_override: Option<f64>,
) -> Result<Schedule> {
    let n = model.n();
    if n < 2 {
        return Err(Error::Config("schedule: model dimension must be >= 2".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config("schedule: epsilon must be > 0".into()));
    }
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Config("schedule: v must be in (0, 1)".into()));
    }
    if epsilon >= (n + 1) as f64 {
        return Err(Error::Config(format!(
            "schedule: epsilon = {epsilon} >= n + 1 makes G nonpositive"
        )));
    }
    let lambda = v * (-model.beta() * model.d()).exp();
    let g = (((n + 1) as f64 / epsilon).ln() / (1.0 / (1.0 - lambda)).ln()).ceil() as u64;
    let c = c_override.unwrap_or_else(|| c_of_epsilon(epsilon));
    let g0 = (c * n as f64 * (n as f64).ln()).ceil() as u64;
    Ok(Schedule {
        n,
        epsilon,
        v,
        lambda,
        g0,
        g,
    })
}

/// Cross-temperature acceptance ratio `a_j(x, y) = exp(beta [S(y) - S(x)])`;
/// independent of the level `j` and bounded in `[e^{-beta D}, e^{beta D}]`.
pub fn cross_accept_ratio(model: &TargetModel, x: &StateVector, y: &StateVector) -> f64 {
    (model.beta() * (model.statistic(y) - model.statistic(x))).exp()
}

/// Starting distribution for one engine.
#[derive(Clone, Debug)]
pub enum StartSpec {
    /// Each coordinate drawn independently and uniformly on the state
    /// space (draws consumed from the coordinate's own stream before the
    /// first step).
    UniformProduct,
    /// All `n + 1` coordinates set to the same state.
    Single(StateVector),
    /// All coordinates set to the monochromatic state of this symbol.
    Monochromatic(u8),
    /// One explicit state per coordinate (`n + 1` entries).
    PerCoordinate(Vec<StateVector>),
}

impl StartSpec {
    pub(crate) fn draw(
        &self,
        model: &TargetModel,
        rngs: &mut [ChaCha8Rng],
    ) -> Result<Vec<StateVector>> {
        let n = model.n();
        let q = model.q();
        let validate = |s: &StateVector| -> Result<()> {
            if s.len() != n || !s.in_alphabet(q) {
                return Err(Error::Config(format!(
                    "start state must have {n} symbols in 0..{q}"
                )));
            }
            Ok(())
        };
        match self {
            StartSpec::UniformProduct => Ok(rngs
                .iter_mut()
                .map(|rng| {
                    StateVector::new((0..n).map(|_| rng.gen_range(0..q)).collect())
                })
                .collect()),
            StartSpec::Single(s) => {
                validate(s)?;
                Ok(vec![s.clone(); n + 1])
            }
            StartSpec::Monochromatic(symbol) => {
                if *symbol >= q {
                    return Err(Error::Config(format!(
                        "monochromatic symbol {symbol} outside alphabet 0..{q}"
                    )));
                }
                Ok(vec![StateVector::constant(n, *symbol); n + 1])
            }
            StartSpec::PerCoordinate(states) => {
                if states.len() != n + 1 {
                    return Err(Error::Config(format!(
                        "per-coordinate start needs {} states",
                        n + 1
                    )));
                }
                for s in states {
                    validate(s)?;
                }
                Ok(states.clone())
            }
        }
    }
}

/// Outcome of one cross-temperature attempt, for instrumentation.
#[derive(Clone, Copy, Debug)]
pub struct CrossMove {
    /// Index into the history buffer of coordinate `j - 1` (0 = the state
    /// at time `t_{j-1}`).
    pub history_index: usize,
    pub accepted: bool,
}

/// Per-step trace: for each coordinate `1..=n`, the cross move attempted
/// at this step, if any.
#[derive(Clone, Debug, Default)]
pub struct StepTrace {
    pub cross: Vec<Option<CrossMove>>,
}

/// One cross-temperature move for coordinate `j`: draw a proposal uniformly
/// from the history window of coordinate `j - 1`, accept with
/// `min(1, a_j)`. Consumes two draws: proposal index, acceptance uniform.
pub(crate) fn cross_move<R: Rng>(
    model: &TargetModel,
    current: &mut StateVector,
    history: &[PackedState],
    rng: &mut R,
) -> CrossMove {
    assert!(
        !history.is_empty(),
        "cross move attempted with empty history window (violates s_j = t_(j-1))"
    );
    let idx = rng.gen_range(0..history.len());
    let proposal = history[idx].unpack(model.n(), model.q());
    let log_accept = (model.beta() * (model.statistic(&proposal) - model.statistic(current)))
        .min(0.0);
    let u: f64 = rng.gen();
    let accepted = u.ln() < log_accept;
    if accepted {
        *current = proposal;
    }
    CrossMove {
        history_index: idx,
        accepted,
    }
}

/// The `(n+1)`-coordinate interacting tempering process.
pub struct Engine {
    model: TargetModel,
    schedule: Schedule,
    t: u64,
    coords: Vec<StateVector>,
    /// `histories[j]` holds the packed states of coordinate `j` at times
    /// `t_j, t_j + 1, ..., t` (never trimmed).
    histories: Vec<Vec<PackedState>>,
    rngs: Vec<ChaCha8Rng>,
    cross_attempts: Vec<u64>,
    cross_accepts: Vec<u64>,
}

impl Engine {
    /// Engine for replica `r` of a run rooted at `seed`: coordinate `j`
    /// owns the substream `(r, j, SOLO)`.
    pub fn new(
        model: &TargetModel,
        schedule: Schedule,
        start: &StartSpec,
        seed: u64,
        replica: u64,
    ) -> Result<Self> {
        let rngs = (0..=model.n())
            .map(|j| substream(seed, replica, j as u64, regime::SOLO))
            .collect();
        Engine::with_rngs(model, schedule, start, rngs)
    }

    /// Engine with explicitly supplied per-coordinate streams (test hook
    /// for the conditional-independence structure).
    pub fn with_rngs(
        model: &TargetModel,
        schedule: Schedule,
        start: &StartSpec,
        mut rngs: Vec<ChaCha8Rng>,
    ) -> Result<Self> {
        let n = model.n();
        assert_eq!(rngs.len(), n + 1);
        let coords = start.draw(model, &mut rngs)?;
        let mut engine = Engine {
            model: model.clone(),
            schedule,
            t: 0,
            coords,
            histories: vec![Vec::new(); n + 1],
            rngs,
            cross_attempts: vec![0; n + 1],
            cross_accepts: vec![0; n + 1],
        };
        engine.collect_histories();
        Ok(engine)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    pub fn coord(&self, j: usize) -> &StateVector {
        &self.coords[j]
    }

    pub fn coords(&self) -> &[StateVector] {
        &self.coords
    }

    pub fn history(&self, j: usize) -> &[PackedState] {
        &self.histories[j]
    }

    pub fn cross_attempts(&self) -> &[u64] {
        &self.cross_attempts
    }

    pub fn cross_accepts(&self) -> &[u64] {
        &self.cross_accepts
    }

    fn collect_histories(&mut self) {
        for j in 0..=self.model.n() {
            if self.t >= self.schedule.t(j) {
                self.histories[j].push(self.coords[j].pack(self.model.q()));
                debug_assert_eq!(
                    self.histories[j].len() as u64,
                    self.t - self.schedule.t(j) + 1
                );
            }
        }
    }

    /// Advance one step `t -> t + 1`.
    pub fn step(&mut self) {
        self.step_traced();
    }

    /// Advance one step, reporting the cross moves attempted.
    pub fn step_traced(&mut self) -> StepTrace {
        let n = self.model.n();
        let t = self.t;
        let mut trace = StepTrace {
            cross: vec![None; n + 1],
        };
        let gibbs = UniformGibbsKernel::new(n, self.model.q());
        gibbs.step(&mut self.coords[0], &mut self.rngs[0]);
        for j in 1..=n {
            if t < self.schedule.s(j) {
                continue; // frozen until s_j
            }
            let coin: f64 = self.rngs[j].gen();
            if coin < self.schedule.v {
                let (before, _) = self.histories.split_at(j);
                let mv = cross_move(
                    &self.model,
                    &mut self.coords[j],
                    &before[j - 1],
                    &mut self.rngs[j],
                );
                self.cross_attempts[j] += 1;
                if mv.accepted {
                    self.cross_accepts[j] += 1;
                }
                trace.cross[j] = Some(mv);
            } else {
                MetropolisKernel::new(&self.model, j).step(&mut self.coords[j], &mut self.rngs[j]);
            }
        }
        self.t = t + 1;
        self.collect_histories();
        trace
    }

    /// Number of coordinates currently equal to the model's distinguished
    /// state (0 when the model has none).
    pub fn distinguished_hits(&self) -> u64 {
        match self.model.distinguished() {
            Some(z) => self.coords.iter().filter(|c| *c == z).count() as u64,
            None => 0,
        }
    }
}

/// What to record along a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationMode {
    /// Statistic values and distinguished-state hit flags per coordinate.
    Statistic,
    /// Full states (memory-guarded), plus everything `Statistic` records.
    States,
}

#[derive(Clone, Copy, Debug)]
pub struct ObservationPlan {
    pub mode: ObservationMode,
    /// Record every `stride`-th time (time 0 and the final time always
    /// included).
    pub stride: u64,
}

impl Default for ObservationPlan {
    fn default() -> Self {
        ObservationPlan {
            mode: ObservationMode::Statistic,
            stride: 1,
        }
    }
}

/// Memory cap for full-state observation, in bytes.
pub const STATE_OBSERVATION_BYTE_CAP: usize = 1 << 28;

/// Time-indexed observations of one replica, reproducible bit-for-bit from
/// `(seed, replica)`.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub seed: u64,
    pub replica: u64,
    pub schedule: Schedule,
    /// Observed times, ascending.
    pub times: Vec<u64>,
    /// `stats[k][j]` = `S` of coordinate `j` at `times[k]`.
    pub stats: Vec<Vec<f64>>,
    /// `hits[k][j]` = coordinate `j` equals the distinguished state at
    /// `times[k]`.
    pub hits: Vec<Vec<bool>>,
    /// Cumulative cross-move accept counts per coordinate at each observed
    /// time.
    pub cross_accepts: Vec<Vec<u64>>,
    /// Full states, when requested.
    pub states: Option<Vec<Vec<StateVector>>>,
    /// Distinguished-state hits summed over all coordinates and *all*
    /// times `0..=T`, independent of the observation stride.
    pub total_hits: u64,
    pub final_cross_attempts: Vec<u64>,
    pub final_cross_accepts: Vec<u64>,
}

impl RunRecord {
    /// The coordinate-`j` statistic trajectory over the observed times.
    pub fn stat_series(&self, j: usize) -> Vec<f64> {
        self.stats.iter().map(|row| row[j]).collect()
    }
}

/// Run one replica for `steps` steps, recording per the observation plan.
/// The record covers times `0..=steps` and is deterministic in
/// `(seed, replica)`.
pub fn run(
    model: &TargetModel,
    schedule: Schedule,
    start: &StartSpec,
    steps: u64,
    observe: ObservationPlan,
    seed: u64,
    replica: u64,
) -> Result<RunRecord> {
    let n = model.n();
    let stride = observe.stride.max(1);
    let obs_count = steps / stride + 2;
    if observe.mode == ObservationMode::States {
        let bytes = obs_count as usize * (n + 1) * n;
        if bytes > STATE_OBSERVATION_BYTE_CAP {
            return Err(Error::Guard(format!(
                "full-state observation needs ~{bytes} bytes (cap {STATE_OBSERVATION_BYTE_CAP}); \
                 use statistic observation"
            )));
        }
    }
    let mut engine = Engine::new(model, schedule, start, seed, replica)?;
    let mut record = RunRecord {
        seed,
        replica,
        schedule,
        times: Vec::new(),
        stats: Vec::new(),
        hits: Vec::new(),
        cross_accepts: Vec::new(),
        states: (observe.mode == ObservationMode::States).then(Vec::new),
        total_hits: 0,
        final_cross_attempts: vec![0; n + 1],
        final_cross_accepts: vec![0; n + 1],
    };
    let observe_now = |engine: &Engine, record: &mut RunRecord| {
        record.times.push(engine.t());
        record.stats.push(
            engine
                .coords()
                .iter()
                .map(|c| model.statistic(c))
                .collect(),
        );
        let z = model.distinguished();
        record.hits.push(
            engine
                .coords()
                .iter()
                .map(|c| z.map(|z| c == z).unwrap_or(false))
                .collect(),
        );
        record.cross_accepts.push(engine.cross_accepts().to_vec());
        if let Some(states) = record.states.as_mut() {
            states.push(engine.coords().to_vec());
        }
    };
    record.total_hits += engine.distinguished_hits();
    observe_now(&engine, &mut record);
    for t in 1..=steps {
        engine.step();
        record.total_hits += engine.distinguished_hits();
        if t % stride == 0 || t == steps {
            observe_now(&engine, &mut record);
        }
    }
    record.final_cross_attempts = engine.cross_attempts().to_vec();
    record.final_cross_accepts = engine.cross_accepts().to_vec();
    Ok(record)
}

#[cfg(test)]
mod tests;
