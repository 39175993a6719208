//! Config-driven experiment runners. Every experiment writes three files
//! into the output directory — `records.csv` (raw per-replica data),
//! `report.csv` (aggregates), `summary.json` (schedule, seeds, model echo,
//! headline numbers) — and returns a one-line summary. Replicas run in
//! parallel; all output is assembled in replica order, so file bytes are a
//! pure function of the config.

use crate::analysis::{
    self, chi_squared_uniform_p_value, d_and_dbar, metropolis_transition_matrix, psrf,
    tv_lower_bound_event, uniform_gibbs_matrix,
};
use crate::config::{
    CoupleConfig, DbarConfig, DiagConfig, ExperimentConfig, KernelChoice, NeedleConfig,
    RunConfig, UniformityConfig, SCHEMA_VERSION,
};
use crate::coupling::{forgetting_experiment, CoalescenceReport};
use crate::engine::{
    make_schedule, run, Engine, ObservationMode, ObservationPlan, RunRecord, Schedule,
};
use crate::models::{exact_tempered_distribution, TargetModel};
use crate::{Error, Result};
use rayon::prelude::*;
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

pub struct ExperimentOutcome {
    pub summary: String,
}

pub fn execute(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    std::fs::create_dir_all(out_dir)?;
    match config {
        ExperimentConfig::Run(c) => run_experiment(c, out_dir),
        ExperimentConfig::Couple(c) => couple_experiment(c, out_dir, false),
        ExperimentConfig::Forget(c) => couple_experiment(c, out_dir, true),
        ExperimentConfig::Needle(c) => needle_experiment(c, out_dir),
        ExperimentConfig::LemmaUniform(c) => uniformity_experiment(c, out_dir),
        ExperimentConfig::Diag(c) => diag_experiment(c, out_dir),
        ExperimentConfig::DbarCheck(c) => dbar_experiment(c, out_dir),
    }
}

fn model_echo(model: &TargetModel) -> serde_json::Value {
    json!({
        "name": model.name(),
        "n": model.n(),
        "q": model.q(),
        "beta": model.beta(),
        "d": model.d(),
        "shift": model.shift(),
    })
}

fn write_out(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(out_dir.join(name), contents)?;
    Ok(())
}

fn write_summary(out_dir: &Path, summary: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    text.push('\n');
    write_out(out_dir, "summary.json", &text)
}

/// Cap on the estimated memory held by all replica records together.
const RECORD_MEMORY_BYTE_CAP: usize = 1 << 32;

fn run_replicas(
    model: &TargetModel,
    schedule: Schedule,
    start: &crate::engine::StartSpec,
    steps: u64,
    plan: ObservationPlan,
    seed: u64,
    replicas: u64,
) -> Result<Vec<RunRecord>> {
    if replicas == 0 {
        return Err(Error::Config("replicas must be >= 1".into()));
    }
    let obs_count = (steps / plan.stride.max(1) + 2) as usize;
    let per_record = obs_count.saturating_mul(model.n() + 1).saturating_mul(24);
    if per_record.saturating_mul(replicas as usize) > RECORD_MEMORY_BYTE_CAP {
        return Err(Error::Guard(format!(
            "{replicas} replicas x {obs_count} observations would exceed the record \
             memory cap; increase the stride or reduce the replica count"
        )));
    }
    (0..replicas)
        .into_par_iter()
        .map(|r| run(model, schedule, start, steps, plan, seed, r))
        .collect()
}

/// The frozen records.csv schema: one row per (replica, observed time,
/// coordinate).
fn records_csv(records: &[RunRecord]) -> String {
    let mut csv = String::from("replica,t,j,s_value,needle_hit,cross_accepts\n");
    for rec in records {
        for (k, &t) in rec.times.iter().enumerate() {
            for j in 0..rec.stats[k].len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    rec.replica,
                    t,
                    j,
                    rec.stats[k][j],
                    rec.hits[k][j] as u8,
                    rec.cross_accepts[k][j],
                );
            }
        }
    }
    csv
}

fn mean(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    values.sum::<f64>() / count as f64
}

fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let model = config.model.build()?;
    let schedule = make_schedule(
        &model,
        config.schedule.epsilon,
        config.schedule.v,
        config.schedule.c_override,
    )?;
    let steps = config.steps.unwrap_or_else(|| schedule.horizon());
    let plan = ObservationPlan {
        mode: if config.observe_states {
            ObservationMode::States
        } else {
            ObservationMode::Statistic
        },
        stride: config.stride,
    };
    let records = run_replicas(
        &model,
        schedule,
        &config.start.to_spec(),
        steps,
        plan,
        config.seed,
        config.replicas,
    )?;
    write_out(out_dir, "records.csv", &records_csv(&records))?;

    // aggregate: mean coldest-coordinate statistic per observed time
    let n = model.n();
    let mut report = String::from("t,mean_s_cold\n");
    for (k, &t) in records[0].times.iter().enumerate() {
        let m = mean(records.iter().map(|r| r.stats[k][n]), records.len());
        let _ = writeln!(report, "{t},{m}");
    }
    write_out(out_dir, "report.csv", &report)?;

    let total_hits: u64 = records.iter().map(|r| r.total_hits).sum();
    write_summary(
        out_dir,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "run",
            "seed": config.seed,
            "replicas": config.replicas,
            "steps": steps,
            "schedule": schedule,
            "model": model_echo(&model),
            "total_hits": total_hits,
        }),
    )?;
    Ok(ExperimentOutcome {
        summary: format!(
            "replicas={} steps={} horizon={} total_hits={}",
            config.replicas,
            steps,
            schedule.horizon(),
            total_hits
        ),
    })
}

fn coalescence_csvs(report: &CoalescenceReport, n: usize) -> (String, String) {
    let mut records = String::from("replica,j,a_flag,b_flag,first_agreement\n");
    for o in &report.outcomes {
        for j in 0..=n {
            let first = o.first_agreement[j]
                .map(|t| t.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                records,
                "{},{},{},{},{}",
                o.replica, j, o.a_flags[j] as u8, o.b_flags[j] as u8, first
            );
        }
    }
    let mut agg = String::from("j,conditioning,failures,rate\n");
    for (j, cr) in report.conditional_failures.iter().enumerate() {
        let _ = writeln!(agg, "{},{},{},{}", j, cr.conditioning, cr.failures, cr.rate());
    }
    (records, agg)
}

fn couple_experiment(
    config: &CoupleConfig,
    out_dir: &Path,
    with_bound: bool,
) -> Result<ExperimentOutcome> {
    let model = config.model.build()?;
    let schedule = make_schedule(
        &model,
        config.schedule.epsilon,
        config.schedule.v,
        config.schedule.c_override,
    )?;
    let report = forgetting_experiment(
        &model,
        schedule,
        (&config.start_x.to_spec(), &config.start_y.to_spec()),
        config.replicas,
        config.seed,
    )?;
    let (records, agg) = coalescence_csvs(&report, model.n());
    write_out(out_dir, "records.csv", &records)?;
    write_out(out_dir, "report.csv", &agg)?;
    write_summary(
        out_dir,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": if with_bound { "forget" } else { "couple" },
            "seed": config.seed,
            "replicas": config.replicas,
            "schedule": schedule,
            "model": model_echo(&model),
            "uncoalesced_fraction": report.uncoalesced_fraction,
            "epsilon_bound": schedule.epsilon,
        }),
    )?;
    let summary = if with_bound {
        format!(
            "uncoalesced@t_n={:.2} (bound {:.2})",
            report.uncoalesced_fraction, schedule.epsilon
        )
    } else {
        format!(
            "pairs={} uncoalesced@t_n={:.2} horizon={}",
            config.replicas,
            report.uncoalesced_fraction,
            schedule.horizon()
        )
    };
    Ok(ExperimentOutcome { summary })
}

/// Exact target mass of the distinguished state of the near-point-mass
/// model: weight `2^n / delta` against `2^n - 1` unit weights.
fn needle_pi_z(n: usize, delta: f64) -> f64 {
    let bulk = 2f64.powi(n as i32);
    (bulk / delta) / (bulk / delta + bulk - 1.0)
}

fn window_indices(times: &[u64], window: [u64; 2]) -> Result<(usize, usize)> {
    let start = times.partition_point(|&t| t < window[0]);
    let end = times.partition_point(|&t| t <= window[1]);
    if end < start + 2 {
        return Err(Error::Config(format!(
            "window [{}, {}] covers fewer than 2 observed times",
            window[0], window[1]
        )));
    }
    Ok((start, end))
}

fn needle_experiment(config: &NeedleConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let model = config.build_model()?;
    let schedule = make_schedule(
        &model,
        config.schedule.epsilon,
        config.schedule.v,
        config.schedule.c_override,
    )?;
    if config.groups < 2 || config.groups as u64 > config.replicas {
        return Err(Error::Config(format!(
            "groups = {} must be in 2..=replicas ({})",
            config.groups, config.replicas
        )));
    }
    let plan = ObservationPlan {
        mode: ObservationMode::Statistic,
        stride: config.stride,
    };
    let records = run_replicas(
        &model,
        schedule,
        &crate::engine::StartSpec::UniformProduct,
        config.steps,
        plan,
        config.seed,
        config.replicas,
    )?;
    write_out(out_dir, "records.csv", &records_csv(&records))?;

    let n = model.n();
    let pi_z = needle_pi_z(n, config.delta);
    let times = &records[0].times;
    let mut report = String::from("t,mean_s_cold,hit_rate_cold,tv_lower_bound\n");
    for (k, &t) in times.iter().enumerate() {
        let m = mean(records.iter().map(|r| r.stats[k][n]), records.len());
        let hit_rate = records.iter().filter(|r| r.hits[k][n]).count() as f64
            / records.len() as f64;
        let _ = writeln!(
            report,
            "{t},{m},{hit_rate},{}",
            tv_lower_bound_event(hit_rate, pi_z)
        );
    }
    write_out(out_dir, "report.csv", &report)?;

    let total_hits: u64 = records.iter().map(|r| r.total_hits).sum();
    let last = times.len() - 1;
    let final_hit_rate =
        records.iter().filter(|r| r.hits[last][n]).count() as f64 / records.len() as f64;
    let tv_bound = tv_lower_bound_event(final_hit_rate, pi_z);

    let (w_start, w_end) = window_indices(times, config.window)?;
    let processes: Vec<Vec<f64>> = records[..config.groups]
        .iter()
        .map(|r| r.stat_series(n))
        .collect();
    let diag = psrf(&processes, (w_start, w_end))?;

    write_summary(
        out_dir,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "needle",
            "seed": config.seed,
            "replicas": config.replicas,
            "steps": config.steps,
            "schedule": schedule,
            "model": model_echo(&model),
            "pi_z": pi_z,
            "total_hits": total_hits,
            "final_hit_rate_cold": final_hit_rate,
            "tv_lower_bound": tv_bound,
            "psrf": diag.psrf,
            "psrf_degenerate": diag.degenerate,
            "psrf_window": config.window,
        }),
    )?;
    Ok(ExperimentOutcome {
        summary: format!(
            "hits={}/{}\u{d7}{}, TV\u{2265}{:.2}, PSRF={:.2}",
            total_hits,
            config.replicas,
            config.steps + 1,
            tv_bound,
            diag.psrf
        ),
    })
}

const UNIFORMITY_STATE_CAP: usize = 1 << 16;

fn uniformity_experiment(
    config: &UniformityConfig,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    let model = config.model.build()?;
    let schedule = make_schedule(
        &model,
        config.schedule.epsilon,
        config.schedule.v,
        config.schedule.c_override,
    )?;
    let size = model
        .space_size()
        .filter(|&s| s <= UNIFORMITY_STATE_CAP)
        .ok_or_else(|| Error::Guard("uniformity experiment: space too large".into()))?;
    if config.times.is_empty() {
        return Err(Error::Config("`times` must be non-empty".into()));
    }
    let mut times = config.times.clone();
    times.sort_unstable();
    times.dedup();
    let n = model.n();
    let q = model.q();
    let start = config.start.to_spec();

    // per replica: the state index of every coordinate at every requested time
    let samples: Vec<Vec<Vec<usize>>> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut engine = Engine::new(&model, schedule, &start, config.seed, r)?;
            let mut per_time = Vec::with_capacity(times.len());
            for &t in &times {
                while engine.t() < t {
                    engine.step();
                }
                per_time.push((0..=n).map(|j| engine.coord(j).index(q)).collect());
            }
            Ok(per_time)
        })
        .collect::<Result<_>>()?;

    let mut records = String::from("replica,t,j,state_index\n");
    for (r, per_time) in samples.iter().enumerate() {
        for (k, row) in per_time.iter().enumerate() {
            for (j, idx) in row.iter().enumerate() {
                let _ = writeln!(records, "{},{},{},{}", r, times[k], j, idx);
            }
        }
    }
    write_out(out_dir, "records.csv", &records)?;

    let too_few = (config.replicas as usize) < 100 * size;
    let mut report = String::from("t,j,p_value,too_few_samples\n");
    let mut min_p = f64::INFINITY;
    for (k, &t) in times.iter().enumerate() {
        for j in 0..=n {
            let mut counts = vec![0u64; size];
            for per_time in &samples {
                counts[per_time[k][j]] += 1;
            }
            let p = chi_squared_uniform_p_value(&counts, config.replicas);
            min_p = min_p.min(p);
            let _ = writeln!(report, "{},{},{},{}", t, j, p, too_few as u8);
        }
    }
    write_out(out_dir, "report.csv", &report)?;
    write_summary(
        out_dir,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "lemma-uniform",
            "seed": config.seed,
            "replicas": config.replicas,
            "times": times,
            "schedule": schedule,
            "model": model_echo(&model),
            "min_p_value": min_p,
            "too_few_samples": too_few,
        }),
    )?;
    Ok(ExperimentOutcome {
        summary: format!(
            "min p={min_p:.4} over {} cells{}",
            times.len() * (n + 1),
            if too_few { " (underpowered)" } else { "" }
        ),
    })
}

fn diag_experiment(config: &DiagConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let model = config.model.build()?;
    let schedule = make_schedule(
        &model,
        config.schedule.epsilon,
        config.schedule.v,
        config.schedule.c_override,
    )?;
    let steps = config
        .steps
        .unwrap_or_else(|| schedule.horizon().max(config.window[1]));
    let coordinate = config.coordinate.unwrap_or(model.n());
    if coordinate > model.n() {
        return Err(Error::Config(format!(
            "coordinate {} out of range 0..={}",
            coordinate,
            model.n()
        )));
    }
    let records = run_replicas(
        &model,
        schedule,
        &config.start.to_spec(),
        steps,
        ObservationPlan::default(),
        config.seed,
        config.replicas,
    )?;
    write_out(out_dir, "records.csv", &records_csv(&records))?;

    let (w_start, w_end) = window_indices(&records[0].times, config.window)?;
    let processes: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.stat_series(coordinate))
        .collect();
    let diag = psrf(&processes, (w_start, w_end))?;
    let mut report = String::from("process,mean,variance\n");
    for (i, (m, v)) in diag
        .process_means
        .iter()
        .zip(&diag.process_variances)
        .enumerate()
    {
        let _ = writeln!(report, "{i},{m},{v}");
    }
    write_out(out_dir, "report.csv", &report)?;
    write_summary(
        out_dir,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "diag",
            "seed": config.seed,
            "replicas": config.replicas,
            "steps": steps,
            "coordinate": coordinate,
            "schedule": schedule,
            "model": model_echo(&model),
            "psrf": diag.psrf,
            "within": diag.within,
            "between": diag.between,
            "degenerate": diag.degenerate,
            "window": config.window,
        }),
    )?;
    Ok(ExperimentOutcome {
        summary: format!(
            "PSRF={:.4} (within={:.4e}, between={:.4e}{})",
            diag.psrf,
            diag.within,
            diag.between,
            if diag.degenerate { ", degenerate" } else { "" }
        ),
    })
}

fn dbar_experiment(config: &DbarConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let model = config.model.build()?;
    let (kernel, pi) = match &config.kernel {
        KernelChoice::Gibbs => {
            let size = model
                .space_size()
                .filter(|&s| s <= analysis::MATRIX_CAP)
                .ok_or_else(|| Error::Guard("dbar-check: space too large".into()))?;
            (
                uniform_gibbs_matrix(model.n(), model.q()),
                vec![1.0 / size as f64; size],
            )
        }
        KernelChoice::Metropolis(level) => {
            if *level > model.n() {
                return Err(Error::Config(format!(
                    "metropolis level {} out of range 0..={}",
                    level,
                    model.n()
                )));
            }
            (
                metropolis_transition_matrix(&model, *level)?,
                exact_tempered_distribution(&model, *level)?,
            )
        }
    };
    let curves = d_and_dbar(&kernel, &pi, config.t_max)?;
    let mut report = String::from("t,d,dbar\n");
    for (t, (d, dbar)) in curves.iter().enumerate() {
        let _ = writeln!(report, "{t},{d},{dbar}");
    }
    write_out(out_dir, "records.csv", &report)?;
    write_out(out_dir, "report.csv", &report)?;
    let (d_final, dbar_final) = *curves.last().unwrap();
    write_summary(
        out_dir,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "dbar-check",
            "t_max": config.t_max,
            "model": model_echo(&model),
            "d_final": d_final,
            "dbar_final": dbar_final,
        }),
    )?;
    Ok(ExperimentOutcome {
        summary: format!(
            "d({t})={d_final:.3e}, dbar({t})={dbar_final:.3e}",
            t = config.t_max
        ),
    })
}
