//! Arm-selection rules: hard-threshold UCB, its soft-threshold ablation,
//! classical UCB1, and the LFG and Flearn fairness baselines.
//!
//! All policies pull arm `n - 1` in rounds `n <= K`. Afterwards every argmax
//! breaks ties toward the lowest arm id. Logarithms are natural.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BanditInstance;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("arm {0} has never been pulled; indices are undefined before initialization ends")]
    DivisionByZeroCount(usize),
    #[error("unknown policy {0:?}; expected one of ht-ucb, soft-ucb, ucb1, lfg, flearn")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    HtUcb,
    SoftUcb,
    Ucb1,
    Lfg,
    Flearn,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::HtUcb,
        PolicyKind::SoftUcb,
        PolicyKind::Ucb1,
        PolicyKind::Lfg,
        PolicyKind::Flearn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::HtUcb => "ht-ucb",
            PolicyKind::SoftUcb => "soft-ucb",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::Lfg => "lfg",
            PolicyKind::Flearn => "flearn",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

/// A fully parameterized decision rule. Stateless; share freely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum Policy {
    HtUcb,
    SoftUcb,
    Ucb1,
    /// Queue plus `eta0` times the capped UCB index (unit weights).
    Lfg {
        eta0: f64,
    },
    /// Forced pulls of the most deficient arm once a deficit exceeds `alpha`.
    Flearn {
        alpha: f64,
    },
}

impl Policy {
    /// Baseline defaults for horizon `horizon`: LFG `eta0 = sqrt(T)`, Flearn `alpha = 0`.
    pub fn with_defaults(kind: PolicyKind, horizon: u64) -> Policy {
        match kind {
            PolicyKind::HtUcb => Policy::HtUcb,
            PolicyKind::SoftUcb => Policy::SoftUcb,
            PolicyKind::Ucb1 => Policy::Ucb1,
            PolicyKind::Lfg => Policy::Lfg {
                eta0: (horizon as f64).sqrt(),
            },
            PolicyKind::Flearn => Policy::Flearn { alpha: 0.0 },
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::HtUcb => PolicyKind::HtUcb,
            Policy::SoftUcb => PolicyKind::SoftUcb,
            Policy::Ucb1 => PolicyKind::Ucb1,
            Policy::Lfg { .. } => PolicyKind::Lfg,
            Policy::Flearn { .. } => PolicyKind::Flearn,
        }
    }
}

/// Mutable per-replication learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    round: u64,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    queues: Vec<f64>,
    taus: Vec<f64>,
    penalties: Vec<f64>,
}

impl PolicyState {
    pub fn new(instance: &BanditInstance) -> Self {
        Self::from_parts(instance.taus(), instance.penalties())
    }

    pub fn from_parts(taus: Vec<f64>, penalties: Vec<f64>) -> Self {
        assert_eq!(taus.len(), penalties.len());
        let k = taus.len();
        PolicyState {
            round: 1,
            counts: vec![0; k],
            reward_sums: vec![0.0; k],
            queues: vec![0.0; k],
            taus,
            penalties,
        }
    }

    /// Builds a state as it stands at the start of round `round`. Test helper
    /// for evaluating indices at hand-picked points.
    pub fn at_round(
        round: u64,
        counts: Vec<u64>,
        reward_sums: Vec<f64>,
        taus: Vec<f64>,
        penalties: Vec<f64>,
    ) -> Self {
        let mut s = Self::from_parts(taus, penalties);
        assert_eq!(counts.len(), s.k());
        assert_eq!(reward_sums.len(), s.k());
        s.round = round;
        s.counts = counts;
        s.reward_sums = reward_sums;
        s
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Current 1-based round `n` (the round about to be played).
    pub fn round(&self) -> u64 {
        self.round
    }

    /// `N_k(n - 1)`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    pub fn queues(&self) -> &[f64] {
        &self.queues
    }

    pub fn set_queues(&mut self, queues: Vec<f64>) {
        assert_eq!(queues.len(), self.k());
        assert!(queues.iter().all(|q| *q >= 0.0));
        self.queues = queues;
    }

    pub fn empirical_mean(&self, k: usize) -> Result<f64, PolicyError> {
        match self.counts[k] {
            0 => Err(PolicyError::DivisionByZeroCount(k)),
            n => Ok(self.reward_sums[k] / n as f64),
        }
    }

    fn bonus(&self, k: usize) -> f64 {
        (2.0 * (self.round as f64).ln() / self.counts[k] as f64).sqrt()
    }

    /// `tau_k (n - 1) - N_k(n - 1)`.
    pub fn deficit(&self, k: usize) -> f64 {
        self.taus[k] * (self.round - 1) as f64 - self.counts[k] as f64
    }

    /// Records the reward of `arm` for the current round and advances it.
    /// LFG queues are updated for every arm whatever the policy.
    pub fn observe(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.reward_sums[arm] += reward;
        for (k, (q, tau)) in self.queues.iter_mut().zip(&self.taus).enumerate() {
            let served = if k == arm { 1.0 } else { 0.0 };
            *q = (*q + tau - served).max(0.0);
        }
        self.round += 1;
        debug_assert_eq!(self.counts.iter().sum::<u64>(), self.round - 1);
    }
}

/// Classical UCB1 index `m_k + sqrt(2 ln n / N_k)`.
pub fn ucb1_index(k: usize, state: &PolicyState) -> Result<f64, PolicyError> {
    Ok(state.empirical_mean(k)? + state.bonus(k))
}

/// Hard-threshold index: UCB1 plus `A_k` whenever `N_k(n-1) < tau_k n`.
pub fn ht_ucb_index(k: usize, state: &PolicyState) -> Result<f64, PolicyError> {
    let mean = state.empirical_mean(k)?;
    let below = (state.counts[k] as f64) < state.taus[k] * state.round as f64;
    let lift = if below { state.penalties[k] } else { 0.0 };
    Ok(mean + lift + state.bonus(k))
}

/// Soft-threshold index: the lift is `A_k` scaled by the relative shortfall
/// `(tau_k n - N_k)_+ / (tau_k n)`, zero when `tau_k = 0`.
pub fn soft_ucb_index(k: usize, state: &PolicyState) -> Result<f64, PolicyError> {
    let mean = state.empirical_mean(k)?;
    let target = state.taus[k] * state.round as f64;
    let lift = if target > 0.0 {
        state.penalties[k] * (target - state.counts[k] as f64).max(0.0) / target
    } else {
        0.0
    };
    Ok(mean + lift + state.bonus(k))
}

/// LFG's capped index `min(m_k + sqrt(2 ln n / N_k), 1)`.
pub fn capped_ucb_index(k: usize, state: &PolicyState) -> Result<f64, PolicyError> {
    Ok(ucb1_index(k, state)?.min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub arm: usize,
    /// Score of every arm under the rule that made the decision. Empty during
    /// initialization.
    pub index_values: Vec<f64>,
}

/// First index attaining the maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

fn scores(
    state: &PolicyState,
    index: impl Fn(usize, &PolicyState) -> Result<f64, PolicyError>,
) -> Vec<f64> {
    (0..state.k())
        .map(|k| index(k, state).expect("every arm is pulled during initialization"))
        .collect()
}

/// Chooses the arm for the current round of `state`.
pub fn select_arm(policy: &Policy, state: &PolicyState) -> PolicyDecision {
    let n = state.round;
    if n as usize <= state.k() {
        return PolicyDecision {
            arm: n as usize - 1,
            index_values: Vec::new(),
        };
    }
    let values = match policy {
        Policy::HtUcb => scores(state, ht_ucb_index),
        Policy::SoftUcb => scores(state, soft_ucb_index),
        Policy::Ucb1 => scores(state, ucb1_index),
        Policy::Lfg { eta0 } => scores(state, |k, s| {
            Ok(s.queues[k] + eta0 * capped_ucb_index(k, s)?)
        }),
        Policy::Flearn { alpha } => {
            let deficits: Vec<f64> = (0..state.k()).map(|k| state.deficit(k)).collect();
            if deficits.iter().any(|d| d > alpha) {
                deficits
            } else {
                scores(state, ucb1_index)
            }
        }
    };
    PolicyDecision {
        arm: argmax(&values),
        index_values: values,
    }
}
