//! A coupled pair of interacting tempering processes advancing in
//! lock-step. Coordinate 0 uses the shared-update Gibbs coupling. For
//! coordinate `j >= 1`, once all lower coordinates have coalesced (the
//! latched event `B_{j-1}`), both sides share the interaction coin and, on
//! cross moves, one common history proposal and one common acceptance
//! uniform; local moves from an agreeing pair are generated once and
//! copied. Off `B_{j-1}` the two sides evolve as fully independent
//! processes on disjoint substreams.

use crate::engine::{cross_move, Schedule, StartSpec};
use crate::kernels::{MetropolisKernel, UniformGibbsKernel};
use crate::models::TargetModel;
use crate::state::{PackedState, StateVector};
use crate::streams::{regime, substream};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Side {
    coords: Vec<StateVector>,
    histories: Vec<Vec<PackedState>>,
    cross_attempts: Vec<u64>,
    cross_accepts: Vec<u64>,
}

impl Side {
    fn new(coords: Vec<StateVector>, n: usize) -> Self {
        Side {
            coords,
            histories: vec![Vec::new(); n + 1],
            cross_attempts: vec![0; n + 1],
            cross_accepts: vec![0; n + 1],
        }
    }

    fn collect_histories(&mut self, t: u64, schedule: &Schedule, q: u8) {
        for j in 0..self.histories.len() {
            if t >= schedule.t(j) {
                self.histories[j].push(self.coords[j].pack(q));
            }
        }
    }
}

/// Two engines in lock-step with the coupling of the forgetting argument.
pub struct CoupledEngine {
    model: TargetModel,
    schedule: Schedule,
    t: u64,
    x: Side,
    y: Side,
    rng_x: Vec<ChaCha8Rng>,
    rng_y: Vec<ChaCha8Rng>,
    rng_shared: Vec<ChaCha8Rng>,
    /// `A_j = {X at t_j == Y at t_j}` for coordinate `j`, latched at `t_j`.
    a_flags: Vec<Option<bool>>,
    /// `B_j = A_0 and ... and A_j`, latched with `A_j`.
    b_flags: Vec<Option<bool>>,
    first_agreement: Vec<Option<u64>>,
}

impl CoupledEngine {
    pub fn new(
        model: &TargetModel,
        schedule: Schedule,
        start_x: &StartSpec,
        start_y: &StartSpec,
        seed: u64,
        replica: u64,
    ) -> Result<Self> {
        let n = model.n();
        let mut rng_x: Vec<_> = (0..=n)
            .map(|j| substream(seed, replica, j as u64, regime::SOLO))
            .collect();
        let mut rng_y: Vec<_> = (0..=n)
            .map(|j| substream(seed, replica, j as u64, regime::PAIR_Y))
            .collect();
        let rng_shared: Vec<_> = (0..=n)
            .map(|j| substream(seed, replica, j as u64, regime::SHARED))
            .collect();
        let x = Side::new(start_x.draw(model, &mut rng_x)?, n);
        let y = Side::new(start_y.draw(model, &mut rng_y)?, n);
        let mut pair = CoupledEngine {
            model: model.clone(),
            schedule,
            t: 0,
            x,
            y,
            rng_x,
            rng_y,
            rng_shared,
            a_flags: vec![None; n + 1],
            b_flags: vec![None; n + 1],
            first_agreement: vec![None; n + 1],
        };
        pair.x.collect_histories(0, &schedule, model.q());
        pair.y.collect_histories(0, &schedule, model.q());
        pair.note_agreements();
        pair.latch_flags();
        Ok(pair)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn coord_x(&self, j: usize) -> &StateVector {
        &self.x.coords[j]
    }

    pub fn coord_y(&self, j: usize) -> &StateVector {
        &self.y.coords[j]
    }

    pub fn a_flag(&self, j: usize) -> Option<bool> {
        self.a_flags[j]
    }

    pub fn b_flag(&self, j: usize) -> Option<bool> {
        self.b_flags[j]
    }

    pub fn first_agreement(&self, j: usize) -> Option<u64> {
        self.first_agreement[j]
    }

    /// True when the full `(n+1)`-coordinate vectors agree.
    pub fn fully_coalesced(&self) -> bool {
        self.x.coords == self.y.coords
    }

    fn on_b(&self, j: usize) -> bool {
        self.b_flags[j] == Some(true)
    }

    fn note_agreements(&mut self) {
        for j in 0..self.first_agreement.len() {
            if self.first_agreement[j].is_none() && self.x.coords[j] == self.y.coords[j] {
                self.first_agreement[j] = Some(self.t);
            }
        }
    }

    fn latch_flags(&mut self) {
        for j in 0..self.a_flags.len() {
            if self.a_flags[j].is_none() && self.t == self.schedule.t(j) {
                let agree = self.x.coords[j] == self.y.coords[j];
                self.a_flags[j] = Some(agree);
                let b_prev = j == 0 || self.b_flags[j - 1] == Some(true);
                self.b_flags[j] = Some(agree && b_prev);
            }
        }
    }

    /// One independent (uncoupled) transition of coordinate `j` for one
    /// side, identical in law to the solo engine's.
    fn independent_transition(
        model: &TargetModel,
        schedule: &Schedule,
        side: &mut Side,
        j: usize,
        rng: &mut ChaCha8Rng,
    ) {
        let coin: f64 = rng.gen();
        if coin < schedule.v {
            let mv = cross_move(model, &mut side.coords[j], &side.histories[j - 1], rng);
            side.cross_attempts[j] += 1;
            if mv.accepted {
                side.cross_accepts[j] += 1;
            }
        } else {
            MetropolisKernel::new(model, j).step(&mut side.coords[j], rng);
        }
    }

    /// Advance both sides one step `t -> t + 1`.
    pub fn step(&mut self) {
        let n = self.model.n();
        let t = self.t;
        let gibbs = UniformGibbsKernel::new(n, self.model.q());
        gibbs.coupled_step(
            &mut self.x.coords[0],
            &mut self.y.coords[0],
            &mut self.rng_shared[0],
        );
        for j in 1..=n {
            if t < self.schedule.s(j) {
                continue;
            }
            if self.on_b(j - 1) {
                // on B the joint histories of coordinate j-1 must agree
                assert_eq!(
                    self.x.histories[j - 1].len(),
                    self.y.histories[j - 1].len(),
                    "histories of coordinate {} diverged on B",
                    j - 1
                );
                debug_assert_eq!(self.x.histories[j - 1], self.y.histories[j - 1]);
                let was_equal = self.x.coords[j] == self.y.coords[j];
                let coin: f64 = self.rng_shared[j].gen();
                if coin < self.schedule.v {
                    // one shared proposal and one shared uniform
                    let hist = &self.x.histories[j - 1];
                    assert!(!hist.is_empty());
                    let idx = self.rng_shared[j].gen_range(0..hist.len());
                    let proposal = hist[idx].unpack(n, self.model.q());
                    let u: f64 = self.rng_shared[j].gen();
                    for side in [&mut self.x, &mut self.y] {
                        let log_accept = (self.model.beta()
                            * (self.model.statistic(&proposal)
                                - self.model.statistic(&side.coords[j])))
                        .min(0.0);
                        side.cross_attempts[j] += 1;
                        if u.ln() < log_accept {
                            side.coords[j] = proposal.clone();
                            side.cross_accepts[j] += 1;
                        }
                    }
                } else if was_equal {
                    // generate the local move once, apply to both
                    let mut moved = self.x.coords[j].clone();
                    MetropolisKernel::new(&self.model, j)
                        .step(&mut moved, &mut self.rng_shared[j]);
                    self.x.coords[j] = moved.clone();
                    self.y.coords[j] = moved;
                } else {
                    MetropolisKernel::new(&self.model, j)
                        .step(&mut self.x.coords[j], &mut self.rng_x[j]);
                    MetropolisKernel::new(&self.model, j)
                        .step(&mut self.y.coords[j], &mut self.rng_y[j]);
                }
                if was_equal {
                    assert_eq!(
                        self.x.coords[j], self.y.coords[j],
                        "agreement of coordinate {j} not absorbing on B"
                    );
                }
            } else {
                Self::independent_transition(
                    &self.model,
                    &self.schedule,
                    &mut self.x,
                    j,
                    &mut self.rng_x[j],
                );
                Self::independent_transition(
                    &self.model,
                    &self.schedule,
                    &mut self.y,
                    j,
                    &mut self.rng_y[j],
                );
            }
        }
        self.t = t + 1;
        self.x.collect_histories(self.t, &self.schedule, self.model.q());
        self.y.collect_histories(self.t, &self.schedule, self.model.q());
        self.note_agreements();
        self.latch_flags();
    }

    /// Run to the forgetting horizon `t_n`.
    pub fn run_to_horizon(&mut self) {
        while self.t < self.schedule.horizon() {
            self.step();
        }
    }
}

/// Per-pair coalescence outcome.
#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub replica: u64,
    pub a_flags: Vec<bool>,
    pub b_flags: Vec<bool>,
    pub first_agreement: Vec<Option<u64>>,
    pub equal_at_horizon: bool,
}

/// Conditional coalescence-failure counts for one coordinate: among pairs
/// with `B_{j-1}` (all pairs for `j = 0`), how many failed `A_j`.
#[derive(Clone, Debug)]
pub struct ConditionalRate {
    pub conditioning: u64,
    pub failures: u64,
}

impl ConditionalRate {
    pub fn rate(&self) -> f64 {
        if self.conditioning == 0 {
            0.0
        } else {
            self.failures as f64 / self.conditioning as f64
        }
    }
}

/// Aggregated coalescence report over all replicas.
#[derive(Clone, Debug)]
pub struct CoalescenceReport {
    pub outcomes: Vec<PairOutcome>,
    pub uncoalesced_fraction: f64,
    pub conditional_failures: Vec<ConditionalRate>,
}

/// Run `replicas` coupled pairs from the two starts to the horizon `t_n`
/// and report per-coordinate coalescence. Pairs run in parallel; the
/// report is ordered by replica index and deterministic in the seed.
pub fn forgetting_experiment(
    model: &TargetModel,
    schedule: Schedule,
    starts: (&StartSpec, &StartSpec),
    replicas: u64,
    seed: u64,
) -> Result<CoalescenceReport> {
    let n = model.n();
    let outcomes: Vec<PairOutcome> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let mut pair =
                CoupledEngine::new(model, schedule, starts.0, starts.1, seed, replica)?;
            pair.run_to_horizon();
            Ok(PairOutcome {
                replica,
                a_flags: (0..=n).map(|j| pair.a_flag(j) == Some(true)).collect(),
                b_flags: (0..=n).map(|j| pair.b_flag(j) == Some(true)).collect(),
                first_agreement: (0..=n).map(|j| pair.first_agreement(j)).collect(),
                equal_at_horizon: pair.fully_coalesced(),
            })
        })
        .collect::<Result<_>>()?;
    let uncoalesced = outcomes.iter().filter(|o| !o.equal_at_horizon).count();
    let conditional_failures = (0..=n)
        .map(|j| {
            let conditioning = outcomes
                .iter()
                .filter(|o| j == 0 || o.b_flags[j - 1])
                .count() as u64;
            let failures = outcomes
                .iter()
                .filter(|o| (j == 0 || o.b_flags[j - 1]) && !o.a_flags[j])
                .count() as u64;
            ConditionalRate {
                conditioning,
                failures,
            }
        })
        .collect();
    Ok(CoalescenceReport {
        outcomes,
        uncoalesced_fraction: uncoalesced as f64 / replicas as f64,
        conditional_failures,
    })
}

#[cfg(test)]
mod tests;
