//! The round loop and replication batches.
//!
//! Round `n` asks the policy for an arm, then draws one reward for that arm
//! only, so a replication's stream is consumed strictly in round order.
//! Replication `r` of a batch always runs on `derive_stream(base_seed, r)` and
//! results are collated by replication index, so the worker count never
//! changes the output.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::{derive_stream, sample, RngStream};
use crate::model::BanditInstance;
use crate::oracle::{penalized_regret, OracleError, RegretReport};
use crate::policies::{select_arm, Policy, PolicyState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("horizon {horizon} is shorter than the number of arms {k}")]
    HorizonTooShort { horizon: u64, k: usize },
    #[error("a batch needs at least one replication")]
    NoReplications,
    #[error("cannot build a worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub choices: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `N_k(T)`.
    pub counts: Vec<u64>,
    /// Row `t - 1` holds `(tau_k t - N_k(t))_+` for every arm; row-major `T x K`.
    pub deficit_trace: Option<Vec<f64>>,
    /// `max_t (tau_k t - N_k(t))_+`.
    pub max_deficits: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.choices.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Deficits after round `t` (1-based), when tracing was enabled.
    pub fn deficits_at(&self, t: usize) -> Option<&[f64]> {
        let k = self.counts.len();
        self.deficit_trace
            .as_ref()
            .map(|trace| &trace[(t - 1) * k..t * k])
    }
}

/// Plays `policy` on `instance` for `horizon` rounds.
pub fn run(
    instance: &BanditInstance,
    policy: &Policy,
    horizon: u64,
    rng: &mut RngStream,
    trace_deficits: bool,
) -> Result<Trajectory, EngineError> {
    let k = instance.k();
    if horizon < k as u64 {
        return Err(EngineError::HorizonTooShort { horizon, k });
    }
    let arms = instance.arms();
    let taus = instance.taus();
    let mut state = PolicyState::new(instance);
    let mut choices = Vec::with_capacity(horizon as usize);
    let mut rewards = Vec::with_capacity(horizon as usize);
    let mut max_deficits = vec![0.0; k];
    let mut trace = trace_deficits.then(|| Vec::with_capacity(horizon as usize * k));

    for t in 1..=horizon {
        let arm = select_arm(policy, &state).arm;
        let reward = sample(&arms[arm].dist, rng);
        state.observe(arm, reward);
        choices.push(arm);
        rewards.push(reward);

        let counts = state.counts();
        for j in 0..k {
            let deficit = (taus[j] * t as f64 - counts[j] as f64).max(0.0);
            if deficit > max_deficits[j] {
                max_deficits[j] = deficit;
            }
            if let Some(trace) = trace.as_mut() {
                trace.push(deficit);
            }
        }
    }

    Ok(Trajectory {
        choices,
        rewards,
        counts: state.counts().to_vec(),
        deficit_trace: trace,
        max_deficits,
    })
}

/// Summary of one trajectory against the prophet.
pub fn report(
    instance: &BanditInstance,
    trajectory: &Trajectory,
) -> Result<RegretReport, EngineError> {
    Ok(penalized_regret(
        instance,
        trajectory.horizon() as u64,
        &trajectory.counts,
        trajectory.total_reward(),
        Some(trajectory.max_deficits.clone()),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanWithError {
    pub mean: f64,
    pub std_err: f64,
}

impl MeanWithError {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MeanWithError { mean, std_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchResult {
    pub reports: Vec<RegretReport>,
    pub penalized_regret: MeanWithError,
    pub total_reward: MeanWithError,
    pub expected_reward: MeanWithError,
    pub total_unfairness: MeanWithError,
    /// Per-arm mean of `N_k(T)`.
    pub mean_counts: Vec<f64>,
    /// Per-arm mean of `(tau_k T - N_k(T))_+`.
    pub mean_unfairness: Vec<f64>,
    /// Per-arm mean of `max_t (tau_k t - N_k(t))_+`.
    pub mean_max_deficit: Vec<f64>,
}

impl BatchResult {
    pub fn from_reports(reports: Vec<RegretReport>) -> Self {
        let pick =
            |f: &dyn Fn(&RegretReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
        let k = reports[0].counts.len();
        let n = reports.len() as f64;
        let per_arm = |f: &dyn Fn(&RegretReport, usize) -> f64| -> Vec<f64> {
            (0..k)
                .map(|j| reports.iter().map(|r| f(r, j)).sum::<f64>() / n)
                .collect()
        };
        BatchResult {
            penalized_regret: MeanWithError::of(&pick(&|r| r.penalized_regret)),
            total_reward: MeanWithError::of(&pick(&|r| r.total_reward)),
            expected_reward: MeanWithError::of(&pick(&|r| r.expected_reward)),
            total_unfairness: MeanWithError::of(&pick(&|r| r.total_unfairness())),
            mean_counts: per_arm(&|r, j| r.counts[j] as f64),
            mean_unfairness: per_arm(&|r, j| r.per_arm_unfairness[j]),
            mean_max_deficit: per_arm(&|r, j| r.max_deficit.as_ref().map_or(0.0, |m| m[j])),
            reports,
        }
    }
}

/// Runs `replications` independent replications on the global rayon pool.
pub fn run_batch(
    instance: &BanditInstance,
    policy: &Policy,
    horizon: u64,
    base_seed: u64,
    replications: u64,
) -> Result<BatchResult, EngineError> {
    if replications == 0 {
        return Err(EngineError::NoReplications);
    }
    let reports = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_stream(base_seed, r);
            let trajectory = run(instance, policy, horizon, &mut rng, false)?;
            report(instance, &trajectory)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchResult::from_reports(reports))
}

/// [`run_batch`] on a dedicated pool of `workers` threads.
pub fn run_batch_with_workers(
    instance: &BanditInstance,
    policy: &Policy,
    horizon: u64,
    base_seed: u64,
    replications: u64,
    workers: usize,
) -> Result<BatchResult, EngineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    pool.install(|| run_batch(instance, policy, horizon, base_seed, replications))
}
