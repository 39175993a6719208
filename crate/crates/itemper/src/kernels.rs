//! Local-move transition kernels: the Gibbs sampler for the uniform
//! distribution (with its coordinate-wise Markovian coupling) and the lazy
//! random-walk Metropolis chain for the tempered targets.
//!
//! Random-draw order is part of each kernel's contract so that coupled and
//! replayed runs are well defined:
//! - Gibbs step: coordinate index, then symbol.
//! - Metropolis step: laziness coin, neighbor coordinate, neighbor symbol,
//!   acceptance uniform (always consumed).

use crate::models::TargetModel;
use crate::state::StateVector;
use rand::Rng;

/// `C(eps) = 3 + 2 ln(1/eps)`, the coupon-collector constant in the
/// coordinate-zero burn-in. Natural log throughout.
pub fn c_of_epsilon(epsilon: f64) -> f64 {
    3.0 + 2.0 * (1.0 / epsilon).ln()
}

/// Gibbs sampler for `Uniform({0,...,q-1}^n)`: resample one uniformly
/// chosen coordinate to a uniformly chosen symbol.
#[derive(Clone, Copy, Debug)]
pub struct UniformGibbsKernel {
    n: usize,
    q: u8,
}

impl UniformGibbsKernel {
    pub fn new(n: usize, q: u8) -> Self {
        UniformGibbsKernel { n, q }
    }

    /// One step in place. Consumes exactly two draws: index, then symbol.
    pub fn step<R: Rng>(&self, state: &mut StateVector, rng: &mut R) {
        let i = rng.gen_range(0..self.n);
        let b = rng.gen_range(0..self.q);
        state.set(i, b);
    }

    /// Coupled step: the same `(i, B)` applied to both states, so
    /// coordinate agreement is absorbing. Marginally each component is a
    /// plain Gibbs step.
    pub fn coupled_step<R: Rng>(
        &self,
        a: &mut StateVector,
        b_state: &mut StateVector,
        rng: &mut R,
    ) -> usize {
        let i = rng.gen_range(0..self.n);
        let b = rng.gen_range(0..self.q);
        a.set(i, b);
        b_state.set(i, b);
        i
    }
}

/// Lazy random-walk Metropolis kernel for the tempered distribution
/// `pi_j(x) ∝ exp(j * beta * S(x))`. The neighbor graph is the Hamming
/// graph (single-coordinate replacement), which is regular, so the degree
/// terms of the acceptance ratio cancel.
pub struct MetropolisKernel<'a> {
    model: &'a TargetModel,
    level: usize,
}

impl<'a> MetropolisKernel<'a> {
    pub fn new(model: &'a TargetModel, level: usize) -> Self {
        debug_assert!(level >= 1 && level <= model.n());
        MetropolisKernel { model, level }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// One step in place. Acceptance is computed in log space:
    /// accept iff `ln U < min(0, j * beta * (S(Y) - S(x)))`.
    pub fn step<R: Rng>(&self, state: &mut StateVector, rng: &mut R) {
        if rng.gen::<f64>() < 0.5 {
            return; // laziness
        }
        let n = self.model.n();
        let q = self.model.q();
        let i = rng.gen_range(0..n);
        let current = state.get(i);
        // exclude the current symbol: q - 1 candidates
        let mut proposal_sym = rng.gen_range(0..q - 1);
        if proposal_sym >= current {
            proposal_sym += 1;
        }
        let s_old = self.model.statistic(state);
        state.set(i, proposal_sym);
        let s_new = self.model.statistic(state);
        let log_accept = (self.level as f64 * self.model.beta() * (s_new - s_old)).min(0.0);
        let u: f64 = rng.gen();
        if u.ln() >= log_accept {
            state.set(i, current); // reject
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{metropolis_transition_matrix, uniform_gibbs_matrix};
    use crate::models::{make_needle, make_uniform};
    use crate::streams::substream;

    #[test]
    fn single_coordinate_chain_mixes_in_one_step() {
        let kernel = UniformGibbsKernel::new(1, 2);
        let mut rng = substream(1, 0, 0, 0);
        let mut ones = 0u32;
        let trials = 20_000;
        for _ in 0..trials {
            let mut s = StateVector::constant(1, 0);
            kernel.step(&mut s, &mut rng);
            ones += s.get(0) as u32;
        }
        let freq = ones as f64 / trials as f64;
        let sigma = (0.25f64 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * sigma);
    }

    #[test]
    fn uniform_is_exact_fixed_point_of_gibbs_matrix() {
        let p = uniform_gibbs_matrix(4, 2);
        let size = p.len();
        let u = 1.0 / size as f64;
        for y in 0..size {
            let mass: f64 = (0..size).map(|x| u * p[x][y]).sum();
            assert!((mass - u).abs() < 1e-14);
        }
    }

    #[test]
    fn gibbs_empirical_distribution_is_uniform() {
        // 200 steps on {0,1}^4 over many replicas; chi-squared against the
        // exact uniform stationary law.
        let kernel = UniformGibbsKernel::new(4, 2);
        let replicas = 50_000;
        let mut counts = vec![0u64; 16];
        for r in 0..replicas {
            let mut rng = substream(2, r, 0, 0);
            let mut s = StateVector::constant(4, 0);
            for _ in 0..200 {
                kernel.step(&mut s, &mut rng);
            }
            counts[s.index(2)] += 1;
        }
        let p = crate::analysis::chi_squared_uniform_p_value(&counts, replicas);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn gibbs_replay_is_deterministic() {
        let kernel = UniformGibbsKernel::new(6, 3);
        let run = |seed| {
            let mut rng = substream(seed, 0, 0, 0);
            let mut s = StateVector::constant(6, 0);
            let mut trace = Vec::new();
            for _ in 0..100 {
                kernel.step(&mut s, &mut rng);
                trace.push(s.clone());
            }
            trace
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn coupled_agreement_is_absorbing() {
        let kernel = UniformGibbsKernel::new(5, 2);
        let mut rng = substream(3, 0, 0, 0);
        let mut a = StateVector::constant(5, 0);
        let mut b = StateVector::constant(5, 1);
        let mut agreed = vec![false; 5];
        for _ in 0..500 {
            for i in 0..5 {
                if a.get(i) == b.get(i) {
                    agreed[i] = true;
                }
            }
            kernel.coupled_step(&mut a, &mut b, &mut rng);
            for i in 0..5 {
                if agreed[i] {
                    assert_eq!(a.get(i), b.get(i));
                }
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_equal_inputs_stay_equal() {
        let kernel = UniformGibbsKernel::new(4, 3);
        let mut rng = substream(4, 0, 0, 0);
        let mut a = StateVector::constant(4, 2);
        let mut b = a.clone();
        for _ in 0..200 {
            kernel.coupled_step(&mut a, &mut b, &mut rng);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn coupon_collector_tail_bound() {
        // P{tau_0 > ceil(n ln n + c n)} <= e^{-c}; quick check at n = 16.
        let n = 16usize;
        let kernel = UniformGibbsKernel::new(n, 2);
        let pairs = 2000u64;
        for c in [1.0f64, 2.0] {
            let threshold = (n as f64 * (n as f64).ln() + c * n as f64).ceil() as u64;
            let mut exceeded = 0u64;
            for r in 0..pairs {
                let mut rng = substream(5, r, 0, 0);
                let mut a = StateVector::constant(n, 0);
                let mut b = StateVector::constant(n, 1);
                let mut touched = vec![false; n];
                let mut tau0 = None;
                for t in 1..=threshold {
                    let i = kernel.coupled_step(&mut a, &mut b, &mut rng);
                    touched[i] = true;
                    if touched.iter().all(|&x| x) {
                        tau0 = Some(t);
                        break;
                    }
                }
                if tau0.is_none() {
                    exceeded += 1;
                }
            }
            let bound = (-c).exp();
            let slack = 3.0 * (bound * (1.0 - bound) / pairs as f64).sqrt();
            assert!(
                (exceeded as f64 / pairs as f64) <= bound + slack,
                "c = {c}: {exceeded}/{pairs}"
            );
        }
    }

    #[test]
    fn coupled_marginal_matches_single_step_law() {
        // One coupled step from a fixed pair: the first component's law must
        // match the exact single-step Gibbs law on {0,1}^3.
        let kernel = UniformGibbsKernel::new(3, 2);
        let start = StateVector::new(vec![0, 1, 0]);
        let other = StateVector::new(vec![1, 1, 1]);
        let p = uniform_gibbs_matrix(3, 2);
        let exact_row = &p[start.index(2)];
        let trials = 50_000u64;
        let mut counts = vec![0u64; 8];
        for r in 0..trials {
            let mut rng = substream(6, r, 0, 0);
            let mut a = start.clone();
            let mut b = other.clone();
            kernel.coupled_step(&mut a, &mut b, &mut rng);
            counts[a.index(2)] += 1;
        }
        let p_val = crate::analysis::chi_squared_p_value(&counts, exact_row, trials);
        assert!(p_val > 0.001, "p = {p_val}");
    }

    #[test]
    fn flat_target_accepts_every_proposal() {
        // Uniform target: the Metropolis chain is lazy simple random walk,
        // so its analytic transition matrix has off-diagonal mass exactly
        // 1/(2 n (q-1)) on neighbors.
        let model = make_uniform(3, 2).unwrap();
        let p = metropolis_transition_matrix(&model, 2).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                let hamming = (x ^ y as usize).count_ones();
                let expected = match hamming {
                    0 => 0.5,
                    1 => 0.5 / 3.0,
                    _ => 0.0,
                };
                assert!((p[x][y] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn proposal_into_needle_always_accepted() {
        // From any non-needle state, the acceptance ratio toward z is
        // exp(j * beta * S(z)) >= 1: the matrix entry equals the full
        // proposal probability.
        let z = StateVector::constant(4, 1);
        let model = make_needle(4, 0.5, z.clone()).unwrap();
        let p = metropolis_transition_matrix(&model, 2).unwrap();
        let zi = z.index(2);
        for x in 0..16usize {
            if (x ^ zi).count_ones() == 1 {
                assert!((p[x][zi] - 0.5 / 4.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn metropolis_satisfies_detailed_balance() {
        // n = 4 needle at level j = 2: pi_j(x) P(x,y) = pi_j(y) P(y,x).
        let z = StateVector::constant(4, 1);
        let model = make_needle(4, 0.5, z).unwrap();
        let level = 2;
        let p = metropolis_transition_matrix(&model, level).unwrap();
        let pi = crate::models::exact_tempered_distribution(&model, level).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                assert!((pi[x] * p[x][y] - pi[y] * p[y][x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metropolis_sampler_matches_analytic_matrix() {
        let z = StateVector::constant(3, 1);
        let model = make_needle(3, 0.5, z).unwrap();
        let level = 2;
        let kernel = MetropolisKernel::new(&model, level);
        let p = metropolis_transition_matrix(&model, level).unwrap();
        let start = StateVector::new(vec![1, 1, 0]); // adjacent to the needle
        let trials = 50_000u64;
        let mut counts = vec![0u64; 8];
        for r in 0..trials {
            let mut rng = substream(8, r, 0, 0);
            let mut s = start.clone();
            kernel.step(&mut s, &mut rng);
            counts[s.index(2)] += 1;
        }
        let p_val = crate::analysis::chi_squared_p_value(&counts, &p[start.index(2)], trials);
        assert!(p_val > 0.001, "p = {p_val}");
    }

    #[test]
    fn holding_frequency_is_at_least_half() {
        let z = StateVector::constant(5, 1);
        let model = make_needle(5, 0.5, z).unwrap();
        let kernel = MetropolisKernel::new(&model, 3);
        let mut rng = substream(9, 0, 0, 0);
        let mut s = StateVector::constant(5, 0);
        let trials = 20_000u64;
        let mut held = 0u64;
        for _ in 0..trials {
            let before = s.clone();
            kernel.step(&mut s, &mut rng);
            if s == before {
                held += 1;
            }
        }
        let freq = held as f64 / trials as f64;
        let sigma = (0.25f64 / trials as f64).sqrt();
        assert!(freq >= 0.5 - 3.0 * sigma, "holding frequency {freq}");
    }

    #[test]
    fn c_epsilon_dominates_coupon_collector_requirement() {
        // C(eps) n ln n >= ceil(n [ln n + ln((n+1)/eps)]) for n >= 2.
        for &eps in &[0.01f64, 0.1, 0.5, 1.0] {
            let c = c_of_epsilon(eps);
            let check = |n: f64| {
                let lhs = c * n * n.ln();
                let rhs = (n * (n.ln() + ((n + 1.0) / eps).ln())).ceil();
                assert!(lhs >= rhs, "eps = {eps}, n = {n}: {lhs} < {rhs}");
            };
            for n in 2..=10_000u64 {
                check(n as f64);
            }
            let mut n = 10_000f64;
            while n <= 1_000_000.0 {
                check(n.round());
                n *= 1.01;
            }
            check(1_000_000.0);
        }
    }
}
