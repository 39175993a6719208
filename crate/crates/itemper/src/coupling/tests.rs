use super::*;
use crate::engine::{make_schedule, Engine, StartSpec};
use crate::models::{make_needle, make_uniform};
use crate::state::StateVector;

#[test]
fn identical_starts_stay_coalesced() {
    // Diagonal absorption: coordinate 0 shares its (index, symbol) draws,
    // frozen coordinates cannot move, and on B the local-move copy rule
    // keeps an agreeing pair agreeing.
    let z = StateVector::new(vec![1, 0, 1, 1, 0]);
    let model = make_needle(5, 0.5, z).unwrap();
    let sched = make_schedule(&model, 0.25, 0.5, None).unwrap();
    let start = StartSpec::Single(StateVector::constant(5, 0));
    let mut pair = CoupledEngine::new(&model, sched, &start, &start, 5, 0).unwrap();
    pair.run_to_horizon();
    assert!(pair.fully_coalesced());
    for j in 0..=5 {
        assert_eq!(pair.a_flag(j), Some(true));
        assert_eq!(pair.b_flag(j), Some(true));
        assert_eq!(pair.first_agreement(j), Some(0));
    }
}

#[test]
fn coalescence_failure_rates_dominated_by_geometric_bound() {
    // Needle, n = 6, delta = 0.5, eps = 0.25, v = 0.5: lambda = 1/8, so the
    // per-coordinate conditional failure rate given B_{j-1} is at most
    // (1 - lambda)^G, and the overall failure fraction is at most eps.
    let n = 6;
    let z = StateVector::new(vec![1, 0, 1, 1, 0, 1]);
    let model = make_needle(n, 0.5, z).unwrap();
    let sched = make_schedule(&model, 0.25, 0.5, None).unwrap();
    assert!((sched.lambda - 0.125).abs() < 1e-12);
    let starts = (
        &StartSpec::Monochromatic(0),
        &StartSpec::UniformProduct,
    );
    let replicas = 400u64;
    let report = forgetting_experiment(&model, sched, starts, replicas, 271).unwrap();

    let per_level = (1.0 - sched.lambda).powi(sched.g as i32);
    for j in 1..=n {
        let cr = &report.conditional_failures[j];
        assert!(cr.conditioning > 0, "no pairs reached B_{}", j - 1);
        let sigma = (per_level * (1.0 - per_level) / cr.conditioning as f64).sqrt();
        assert!(
            cr.rate() <= per_level + 3.0 * sigma,
            "coordinate {j}: failure rate {} above bound {per_level}",
            cr.rate()
        );
    }
    // coordinate 0 coalesces with overwhelming probability over G0 steps
    assert!(report.conditional_failures[0].rate() < 0.01);

    let eps = sched.epsilon;
    let sigma = (eps * (1.0 - eps) / replicas as f64).sqrt();
    assert!(
        report.uncoalesced_fraction <= eps + 3.0 * sigma,
        "uncoalesced fraction {} above eps = {eps}",
        report.uncoalesced_fraction
    );
}

#[test]
fn b_events_are_nested() {
    let n = 5;
    let z = StateVector::new(vec![0, 1, 0, 1, 0]);
    let model = make_needle(n, 0.5, z).unwrap();
    let sched = make_schedule(&model, 0.5, 0.5, Some(0.3)).unwrap();
    let starts = (
        &StartSpec::Monochromatic(0),
        &StartSpec::Monochromatic(1),
    );
    let report = forgetting_experiment(&model, sched, starts, 300, 99).unwrap();
    for o in &report.outcomes {
        for j in 1..=n {
            assert!(
                !o.b_flags[j] || o.b_flags[j - 1],
                "replica {}: B_{j} without B_{}",
                o.replica,
                j - 1
            );
            assert!(!o.b_flags[j] || o.a_flags[j]);
        }
        assert_eq!(o.b_flags[0], o.a_flags[0]);
    }
}

#[test]
fn coupled_side_has_the_uncoupled_marginal_law() {
    // Each side of the pair, viewed alone, is an ordinary interacting
    // tempering process: compare per-coordinate state counts at the horizon
    // against an independently seeded uncoupled engine.
    let model = make_uniform(3, 2).unwrap();
    let sched = make_schedule(&model, 0.5, 0.5, Some(0.2)).unwrap();
    let replicas = 20_000u64;
    let mut coupled_counts = vec![vec![0u64; 8]; 4];
    let mut solo_counts = vec![vec![0u64; 8]; 4];
    let starts = (&StartSpec::UniformProduct, &StartSpec::Monochromatic(0));
    for r in 0..replicas {
        let mut pair =
            CoupledEngine::new(&model, sched, starts.0, starts.1, 1717, r).unwrap();
        pair.run_to_horizon();
        let mut solo = Engine::new(&model, sched, &StartSpec::UniformProduct, 2929, r).unwrap();
        while solo.t() < sched.horizon() {
            solo.step();
        }
        for j in 0..=3 {
            coupled_counts[j][pair.coord_x(j).index(2)] += 1;
            solo_counts[j][solo.coord(j).index(2)] += 1;
        }
    }
    for j in 0..=3 {
        let p = crate::analysis::chi_squared_two_sample_p_value(
            &coupled_counts[j],
            &solo_counts[j],
        );
        assert!(p > 0.001, "coordinate {j}: two-sample p = {p}");
    }
}

#[test]
fn product_bound_implies_total_guarantee() {
    // (1 - eps / (n + 1))^(n + 1) >= 1 - eps for eps in (0, 1]: the
    // per-coordinate budget eps / (n + 1) is enough for the whole vector.
    for n in [2usize, 5, 10, 100, 10_000] {
        for eps in [1e-3, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let per = 1.0 - eps / (n + 1) as f64;
            assert!(per.powi((n + 1) as i32) >= 1.0 - eps);
        }
    }
}
