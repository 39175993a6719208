use super::*;
use crate::models::{
    exact_tempered_distribution, make_curie_weiss_potts, make_needle, make_uniform,
};
use crate::state::StateVector;

#[test]
fn schedule_closed_form_values() {
    // n = 9, eps = 0.1, v = 0.5, beta * D = ln 2: lambda = 0.25,
    // G = ceil(ln 100 / ln(4/3)) = 17, G0 = ceil((3 + 2 ln 10) * 9 * ln 9) = 151.
    let model = make_curie_weiss_potts(9, 3, std::f64::consts::LN_2).unwrap();
    let sched = make_schedule(&model, 0.1, 0.5, None).unwrap();
    assert!((sched.lambda - 0.25).abs() < 1e-12);
    assert_eq!(sched.g, 17);
    assert_eq!(sched.g0, 151);
    assert_eq!(sched.s(1), sched.g0);
    assert_eq!(sched.t(1), sched.g0 + sched.g);
    for j in 1..=9 {
        assert_eq!(sched.s(j), sched.t(j - 1));
    }
    assert_eq!(sched.horizon(), sched.g0 + 9 * sched.g);
}

#[test]
fn schedule_rejects_bad_parameters() {
    let model = make_uniform(4, 2).unwrap();
    assert!(make_schedule(&model, 0.0, 0.5, None).is_err());
    assert!(make_schedule(&model, 5.0, 0.5, None).is_err()); // eps >= n + 1
    assert!(make_schedule(&model, 0.1, 0.0, None).is_err());
    assert!(make_schedule(&model, 0.1, 1.0, None).is_err());
}

#[test]
fn vacuous_epsilon_still_yields_schedule() {
    let model = make_uniform(4, 2).unwrap();
    let sched = make_schedule(&model, 2.0, 0.5, None).unwrap();
    assert!(sched.is_vacuous());
    assert!(sched.g >= 1);
}

#[test]
fn cross_ratio_identity_and_needle_values() {
    let z = StateVector::new(vec![1, 0, 1]);
    let model = make_needle(3, 0.5, z.clone()).unwrap();
    let x = StateVector::new(vec![0, 0, 0]);
    assert!((cross_accept_ratio(&model, &x, &x) - 1.0).abs() < 1e-15);
    let forward = cross_accept_ratio(&model, &x, &z);
    let backward = cross_accept_ratio(&model, &z, &x);
    assert!((forward - 2f64.powf(4.0 / 3.0)).abs() < 1e-12);
    assert!((backward - 2f64.powf(-4.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn cross_ratio_matches_tempered_distribution_ratio() {
    // a_j(x, y) = pi_j(y) pi_{j-1}(x) / (pi_j(x) pi_{j-1}(y)) at every
    // level, via enumerated tempered tables; the ratio has no j dependence.
    let z = StateVector::new(vec![1, 0, 1]);
    let model = make_needle(3, 0.5, z).unwrap();
    for j in 1..=3usize {
        let pi_j = exact_tempered_distribution(&model, j).unwrap();
        let pi_jm1 = exact_tempered_distribution(&model, j - 1).unwrap();
        for xi in 0..8 {
            for yi in 0..8 {
                let x = StateVector::from_index(xi, 3, 2);
                let y = StateVector::from_index(yi, 3, 2);
                let oracle = pi_j[yi] * pi_jm1[xi] / (pi_j[xi] * pi_jm1[yi]);
                assert!((cross_accept_ratio(&model, &x, &y) - oracle).abs() < 1e-12);
            }
        }
    }
}

fn small_uniform_setup() -> (crate::models::TargetModel, Schedule) {
    let model = make_uniform(4, 2).unwrap();
    // c_override keeps G0 tiny so every coordinate activates quickly.
    let sched = make_schedule(&model, 0.1, 0.5, Some(0.1)).unwrap();
    (model, sched)
}

#[test]
fn frozen_coordinates_do_not_move() {
    let model = make_curie_weiss_potts(6, 3, 0.5).unwrap();
    let sched = make_schedule(&model, 0.25, 0.5, None).unwrap();
    let start = StartSpec::Monochromatic(1);
    let mut engine = Engine::new(&model, sched, &start, 77, 0).unwrap();
    let frozen = StateVector::constant(6, 1);
    for _ in 0..200 {
        let t = engine.t();
        engine.step();
        for j in 1..=6 {
            if t < sched.s(j) {
                assert_eq!(engine.coord(j), &frozen, "coordinate {j} moved at t = {t}");
            }
        }
    }
}

#[test]
fn histories_start_at_collection_time() {
    let (model, sched) = small_uniform_setup();
    let mut engine =
        Engine::new(&model, sched, &StartSpec::Monochromatic(0), 3, 0).unwrap();
    for _ in 0..(sched.horizon() + 10) {
        engine.step();
        for j in 0..=4 {
            let expected = (engine.t() + 1).saturating_sub(sched.t(j));
            assert_eq!(engine.history(j).len() as u64, expected.min(engine.t() + 1));
        }
    }
}

#[test]
fn run_at_t_zero_contains_exactly_the_start() {
    let (model, sched) = small_uniform_setup();
    let record = run(
        &model,
        sched,
        &StartSpec::Monochromatic(1),
        0,
        ObservationPlan {
            mode: ObservationMode::States,
            stride: 1,
        },
        9,
        0,
    )
    .unwrap();
    assert_eq!(record.times, vec![0]);
    let states = record.states.unwrap();
    assert_eq!(states.len(), 1);
    for s in &states[0] {
        assert_eq!(s, &StateVector::constant(4, 1));
    }
}

#[test]
fn runs_are_deterministic_in_seed() {
    let (model, sched) = small_uniform_setup();
    let go = |seed| {
        run(
            &model,
            sched,
            &StartSpec::UniformProduct,
            100,
            ObservationPlan {
                mode: ObservationMode::States,
                stride: 1,
            },
            seed,
            0,
        )
        .unwrap()
    };
    let (a, b, c) = (go(1), go(1), go(2));
    assert_eq!(a.states, b.states);
    assert_eq!(a.cross_accepts, b.cross_accepts);
    assert_ne!(a.states, c.states);
}

#[test]
fn state_observation_guard_trips() {
    let model = make_uniform(40, 2).unwrap();
    let sched = make_schedule(&model, 0.5, 0.5, Some(0.1)).unwrap();
    let err = run(
        &model,
        sched,
        &StartSpec::Monochromatic(0),
        10_000_000,
        ObservationPlan {
            mode: ObservationMode::States,
            stride: 1,
        },
        1,
        0,
    )
    .unwrap_err();
    assert!(matches!(err, crate::Error::Guard(_)));
    assert!(err.to_string().contains("statistic observation"));
}

#[test]
fn uniform_target_marginals_stay_uniform() {
    // Flat target, uniform product start: every coordinate's marginal at a
    // fixed time stays uniform (quick version of the uniformity criterion).
    let (model, sched) = small_uniform_setup();
    let replicas = 8_000u64;
    let t_check = 25u64;
    let mut counts = vec![vec![0u64; 16]; 5];
    for r in 0..replicas {
        let mut engine =
            Engine::new(&model, sched, &StartSpec::UniformProduct, 42, r).unwrap();
        for _ in 0..t_check {
            engine.step();
        }
        for j in 0..=4 {
            counts[j][engine.coord(j).index(2)] += 1;
        }
    }
    for j in 0..=4 {
        let p = crate::analysis::chi_squared_uniform_p_value(&counts[j], replicas);
        assert!(p > 0.001, "coordinate {j}: p = {p}");
    }
}

#[test]
fn cross_acceptance_from_worst_state_bounded_below() {
    // Needle n = 6, current state z: acceptance frequency of cross moves
    // proposed from a z-free history is >= e^{-beta D} - 3 sigma.
    let n = 6;
    let z = StateVector::constant(n, 1);
    let model = make_needle(n, 0.5, z.clone()).unwrap();
    let mut rng = crate::streams::substream(13, 0, 0, 0);
    use rand::Rng;
    let history: Vec<_> = (0..50)
        .map(|_| {
            let mut coords: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            coords[0] = 0; // never the all-ones needle
            StateVector::new(coords).pack(2)
        })
        .collect();
    let attempts = 10_000;
    let mut accepted = 0u64;
    for _ in 0..attempts {
        let mut current = z.clone();
        if cross_move(&model, &mut current, &history, &mut rng).accepted {
            accepted += 1;
        }
    }
    let floor = (-model.beta() * model.d()).exp();
    let sigma = (floor * (1.0 - floor) / attempts as f64).sqrt();
    assert!(
        accepted as f64 / attempts as f64 >= floor - 3.0 * sigma,
        "acceptance {accepted}/{attempts} below e^(-beta D) = {floor}"
    );
}

#[test]
fn history_window_proposal_index_is_uniform() {
    // At a fixed step t -> t + 1, the cross proposal index for coordinate 1
    // is uniform over the history window {t_0, ..., t}.
    let (model, sched) = small_uniform_setup();
    let t_fix = sched.t(0) + 19; // window size 20
    let window = (t_fix - sched.t(0) + 1) as usize;
    let mut counts = vec![0u64; window];
    let mut total = 0u64;
    for r in 0..30_000u64 {
        let mut engine =
            Engine::new(&model, sched, &StartSpec::UniformProduct, 21, r).unwrap();
        while engine.t() < t_fix {
            engine.step();
        }
        let trace = engine.step_traced();
        if let Some(mv) = trace.cross[1] {
            counts[mv.history_index] += 1;
            total += 1;
        }
    }
    let p = crate::analysis::chi_squared_uniform_p_value(&counts, total);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn lower_coordinates_ignore_upper_streams() {
    // Re-run with different streams for coordinates above k: coordinates
    // 0..=k must reproduce identical trajectories.
    let model = make_needle(5, 0.5, StateVector::constant(5, 1)).unwrap();
    let sched = make_schedule(&model, 0.5, 0.5, Some(0.2)).unwrap();
    let k = 2usize;
    let streams = |upper_seed: u64| {
        (0..=5)
            .map(|j| {
                let seed = if j <= k { 100 } else { upper_seed };
                crate::streams::substream(seed, 0, j as u64, crate::streams::regime::SOLO)
            })
            .collect::<Vec<_>>()
    };
    let start = StartSpec::Monochromatic(0);
    let mut a = Engine::with_rngs(&model, sched, &start, streams(200)).unwrap();
    let mut b = Engine::with_rngs(&model, sched, &start, streams(300)).unwrap();
    for _ in 0..(sched.horizon() + 50) {
        a.step();
        b.step();
        for j in 0..=k {
            assert_eq!(a.coord(j), b.coord(j), "coordinate {j} diverged at t = {}", a.t());
        }
    }
}
