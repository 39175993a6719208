//! Estimators, oracles and diagnostics over completed runs: exact total
//! variation on enumerable spaces, event-based TV lower bounds for large
//! ones, d(t)/d-bar(t) matrix computations, the burn-in Monte Carlo
//! estimator, PSRF, and chi-squared uniformity testing.

use crate::models::{TargetModel, ENUMERATION_CAP};
use crate::state::StateVector;
use crate::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Exact total variation distance `(1/2) sum |p - q|` between two tables
/// on the same support.
pub fn tv_exact(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Config(format!(
            "tv_exact: mismatched supports ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Total variation via the maximizing event `A = {x : p(x) > q(x)}`:
/// `sum_{p>q} (p - q)`. Algebraically equal to [`tv_exact`]; kept as an
/// independent route for cross-checking.
pub fn tv_max_event(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Config("tv_max_event: mismatched supports".into()));
    }
    Ok(p.iter()
        .zip(q)
        .filter(|(a, b)| a > b)
        .map(|(a, b)| a - b)
        .sum())
}

/// TV lower bound from the event `A = X \ {z}`: if the process visits `z`
/// with frequency `hit_rate` while `pi(z) = pi_z`, then
/// `TV >= pi_z - hit_rate` (clamped at 0).
pub fn tv_lower_bound_event(hit_rate: f64, pi_z: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&hit_rate) && (0.0..=1.0).contains(&pi_z));
    (pi_z - hit_rate).max(0.0)
}

/// Guard for explicit transition-matrix work.
pub const MATRIX_CAP: usize = 1 << 12;

/// Explicit transition matrix of the uniform Gibbs sampler on
/// `{0,...,q-1}^n`, indexed by [`StateVector::index`].
pub fn uniform_gibbs_matrix(n: usize, q: u8) -> Vec<Vec<f64>> {
    let size = (q as usize).pow(n as u32);
    assert!(size <= MATRIX_CAP);
    let mut p = vec![vec![0.0; size]; size];
    let w = 1.0 / (n as f64 * q as f64);
    for x in 0..size {
        let sx = StateVector::from_index(x, n, q);
        for i in 0..n {
            for b in 0..q {
                let mut sy = sx.clone();
                sy.set(i, b);
                p[x][sy.index(q)] += w;
            }
        }
    }
    p
}

/// Explicit transition matrix of the lazy random-walk Metropolis kernel at
/// tempering level `level`, built from the same acceptance formula the
/// sampler uses.
pub fn metropolis_transition_matrix(model: &TargetModel, level: usize) -> Result<Vec<Vec<f64>>> {
    let n = model.n();
    let q = model.q();
    let size = model
        .space_size()
        .filter(|&s| s <= MATRIX_CAP)
        .ok_or_else(|| Error::Guard("metropolis matrix: space too large".into()))?;
    let proposal_w = 0.5 / (n as f64 * (q as f64 - 1.0));
    let mut p = vec![vec![0.0; size]; size];
    for x in 0..size {
        let sx = StateVector::from_index(x, n, q);
        let s_old = model.statistic(&sx);
        let mut off_diagonal = 0.0;
        for i in 0..n {
            for b in 0..q {
                if b == sx.get(i) {
                    continue;
                }
                let mut sy = sx.clone();
                sy.set(i, b);
                let accept = (level as f64 * model.beta() * (model.statistic(&sy) - s_old))
                    .exp()
                    .min(1.0);
                let mass = proposal_w * accept;
                p[x][sy.index(q)] += mass;
                off_diagonal += mass;
            }
        }
        p[x][x] = 1.0 - off_diagonal;
    }
    Ok(p)
}

/// Worst-case distances to stationarity and between starting states:
/// `d(t) = max_x TV(P^t(x, .), pi)` and
/// `d_bar(t) = max_{x,y} TV(P^t(x, .), P^t(y, .))`, for `t = 0..=t_max`.
pub fn d_and_dbar(kernel: &[Vec<f64>], pi: &[f64], t_max: usize) -> Result<Vec<(f64, f64)>> {
    let size = kernel.len();
    if size > MATRIX_CAP {
        return Err(Error::Guard("d_and_dbar: space too large".into()));
    }
    if pi.len() != size {
        return Err(Error::Config("d_and_dbar: pi does not match kernel".into()));
    }
    // rows[x] = distribution of X_t started at x
    let mut rows: Vec<Vec<f64>> = (0..size)
        .map(|x| {
            let mut row = vec![0.0; size];
            row[x] = 1.0;
            row
        })
        .collect();
    let mut out = Vec::with_capacity(t_max + 1);
    for _ in 0..=t_max {
        let d = rows
            .iter()
            .map(|row| tv_exact(row, pi).unwrap())
            .fold(0.0f64, f64::max);
        let mut dbar = 0.0f64;
        for x in 0..size {
            for y in (x + 1)..size {
                dbar = dbar.max(tv_exact(&rows[x], &rows[y]).unwrap());
            }
        }
        out.push((d, dbar));
        for row in &mut rows {
            let mut next = vec![0.0; size];
            for (x, &mass) in row.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for (y, &pxy) in kernel[x].iter().enumerate() {
                    next[y] += mass * pxy;
                }
            }
            *row = next;
        }
    }
    Ok(out)
}

/// Monte Carlo estimator with burn-in: `(1/t) sum_{s=B+1}^{B+t} h(Y_s)`
/// where `series[s] = h(Y_s)` for times `s = 0..len-1` and
/// `t = len - 1 - burnin` (the full remainder is consumed).
pub fn mc_estimate(series: &[f64], burnin: usize) -> Result<f64> {
    if burnin + 1 >= series.len() {
        return Err(Error::Config(format!(
            "mc_estimate: burn-in {burnin} leaves no samples in a record of length {}",
            series.len()
        )));
    }
    let tail = &series[burnin + 1..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Gelman-Rubin style report over `m` processes on a common window.
#[derive(Clone, Debug)]
pub struct DiagnosticReport {
    pub process_means: Vec<f64>,
    pub process_variances: Vec<f64>,
    /// Average within-process variance.
    pub within: f64,
    /// Between-process variance component `B = L * var(means)`.
    pub between: f64,
    pub psrf: f64,
    /// Set when within-variance is zero with unequal process means.
    pub degenerate: bool,
    pub window: (usize, usize),
}

fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = sample_mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Potential scale reduction factor of `m >= 2` processes over the window
/// `[start, end)` (indices into each series):
/// `PSRF = sqrt(V / W)` with `V = ((L-1)/L) W + B/L`. When the between
/// component is exactly zero the processes are indistinguishable and the
/// factor is reported as 1. Zero within-variance with unequal means is
/// flagged as degenerate (PSRF = +inf).
pub fn psrf(processes: &[Vec<f64>], window: (usize, usize)) -> Result<DiagnosticReport> {
    let (start, end) = window;
    if processes.len() < 2 {
        return Err(Error::Config("psrf: need at least 2 processes".into()));
    }
    if end <= start + 1 {
        return Err(Error::Config("psrf: window length must be >= 2".into()));
    }
    for p in processes {
        if p.len() < end {
            return Err(Error::Config(format!(
                "psrf: window end {end} exceeds series length {}",
                p.len()
            )));
        }
    }
    let len = end - start;
    let means: Vec<f64> = processes.iter().map(|p| sample_mean(&p[start..end])).collect();
    let vars: Vec<f64> = processes
        .iter()
        .map(|p| sample_variance(&p[start..end]))
        .collect();
    let within = sample_mean(&vars);
    // identical means must give exactly B = 0 (the grand mean sum/m can
    // round away from the common value, leaving a spurious tiny variance)
    let between = if means.windows(2).all(|w| w[0] == w[1]) {
        0.0
    } else {
        len as f64 * sample_variance(&means)
    };
    let (value, degenerate) = if between == 0.0 {
        (1.0, false)
    } else if within == 0.0 {
        (f64::INFINITY, true)
    } else {
        let v_hat = (len as f64 - 1.0) / len as f64 * within + between / len as f64;
        ((v_hat / within).sqrt(), false)
    };
    Ok(DiagnosticReport {
        process_means: means,
        process_variances: vars,
        within,
        between,
        psrf: value,
        degenerate,
        window,
    })
}

/// Empirical distribution over an enumerated state space (or any indexed
/// cell set).
#[derive(Clone, Debug)]
pub struct EmpiricalDistribution {
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn new(cells: usize) -> Self {
        EmpiricalDistribution {
            counts: vec![0; cells],
            total: 0,
        }
    }

    pub fn from_states<'a>(samples: impl IntoIterator<Item = &'a StateVector>, n: usize, q: u8) -> Self {
        let mut dist = EmpiricalDistribution::new((q as usize).pow(n as u32));
        for s in samples {
            dist.record(s.index(q));
        }
        dist
    }

    pub fn record(&mut self, cell: usize) {
        self.counts[cell] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }
}

/// Chi-squared goodness-of-fit p-value of observed counts against expected
/// cell probabilities. Cells with (near-)zero expectation are excluded from
/// the statistic; observed mass there makes the fit fail outright.
pub fn chi_squared_p_value(counts: &[u64], expected: &[f64], total: u64) -> f64 {
    assert_eq!(counts.len(), expected.len());
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    for (&obs, &p) in counts.iter().zip(expected) {
        if p < 1e-12 {
            if obs > 0 {
                return 0.0;
            }
            continue;
        }
        let exp = p * total as f64;
        chi2 += (obs as f64 - exp).powi(2) / exp;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("valid dof");
    1.0 - dist.cdf(chi2)
}

/// Chi-squared p-value against the uniform distribution over the cells.
pub fn chi_squared_uniform_p_value(counts: &[u64], total: u64) -> f64 {
    let p = 1.0 / counts.len() as f64;
    chi_squared_p_value(counts, &vec![p; counts.len()], total)
}

/// Two-sample chi-squared homogeneity test: are `a` and `b` draws from the
/// same distribution over the cells?
pub fn chi_squared_two_sample_p_value(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        if ca + cb == 0 {
            continue;
        }
        chi2 += (ka * ca as f64 - kb * cb as f64).powi(2) / (ca + cb) as f64;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("valid dof");
    1.0 - dist.cdf(chi2)
}

/// Uniformity test outcome for a time-t marginal.
#[derive(Clone, Debug)]
pub struct UniformityReport {
    pub chi2_p_value: f64,
    /// Fewer than `100 * q^n` samples: the test is underpowered.
    pub too_few_samples: bool,
}

/// Goodness-of-fit of a sample of states against `Uniform(X)`.
pub fn uniformity_test(samples: &[StateVector], n: usize, q: u8) -> Result<UniformityReport> {
    let size = (q as usize)
        .checked_pow(n as u32)
        .filter(|&s| s <= ENUMERATION_CAP)
        .ok_or_else(|| Error::Guard("uniformity test: space too large".into()))?;
    let dist = EmpiricalDistribution::from_states(samples, n, q);
    Ok(UniformityReport {
        chi2_p_value: chi_squared_uniform_p_value(dist.counts(), dist.total()),
        too_few_samples: samples.len() < 100 * size,
    })
}
