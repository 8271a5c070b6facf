//! Domain types shared by every other module: arms, reward distributions,
//! validated bandit instances and the opt / critical / non-critical split.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PROB_SUM_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("a bandit instance needs at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("fairness fractions sum to {sum}, which must be strictly below 1")]
    FairnessInfeasible { sum: f64 },
    #[error("arm {arm}: bad reward distribution: {reason}")]
    BadDistribution { arm: usize, reason: String },
    #[error("arm {arm}: {reason}")]
    InvalidArm { arm: usize, reason: String },
    #[error("arm {arm}: declared mean {mu} differs from the distribution mean {analytic}")]
    MeanMismatch { arm: usize, mu: f64, analytic: f64 },
    #[error("cannot read instance config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse instance config: {0}")]
    Parse(String),
}

/// Reward law of one arm.
///
/// Serialized adjacently tagged, e.g.
/// `{"kind": "gaussian", "params": {"mean": 0.5, "variance": 0.04}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum RewardDist {
    Gaussian { mean: f64, variance: f64 },
    Beta { alpha: f64, beta: f64 },
    Bernoulli { p: f64 },
    Categorical { values: Vec<f64>, probs: Vec<f64> },
    Deterministic { value: f64 },
}

impl RewardDist {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            RewardDist::Gaussian { mean, variance } => {
                if !mean.is_finite() {
                    return Err(format!("gaussian mean {mean} is not finite"));
                }
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(format!("gaussian variance {variance} must be > 0"));
                }
            }
            RewardDist::Beta { alpha, beta } => {
                if !(alpha.is_finite() && *alpha > 0.0 && beta.is_finite() && *beta > 0.0) {
                    return Err(format!("beta parameters ({alpha}, {beta}) must be > 0"));
                }
            }
            RewardDist::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(format!("bernoulli p = {p} outside [0, 1]"));
                }
            }
            RewardDist::Categorical { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(format!(
                        "categorical needs matching non-empty support and probabilities ({} vs {})",
                        values.len(),
                        probs.len()
                    ));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(format!("categorical support value {v} is not finite"));
                }
                if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                    return Err(format!(
                        "categorical probability {p} is negative or not finite"
                    ));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(format!("categorical probabilities sum to {total}"));
                }
            }
            RewardDist::Deterministic { value } => {
                if !value.is_finite() {
                    return Err(format!("deterministic value {value} is not finite"));
                }
            }
        }
        Ok(())
    }

    /// Analytic mean.
    pub fn mean(&self) -> f64 {
        match self {
            RewardDist::Gaussian { mean, .. } => *mean,
            RewardDist::Beta { alpha, beta } => alpha / (alpha + beta),
            RewardDist::Bernoulli { p } => *p,
            RewardDist::Categorical { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
            RewardDist::Deterministic { value } => *value,
        }
    }

    /// Analytic variance.
    pub fn variance(&self) -> f64 {
        match self {
            RewardDist::Gaussian { variance, .. } => *variance,
            RewardDist::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
            RewardDist::Bernoulli { p } => p * (1.0 - p),
            RewardDist::Categorical { values, probs } => {
                let m = self.mean();
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v - m) * (v - m))
                    .sum()
            }
            RewardDist::Deterministic { .. } => 0.0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RewardDist::Gaussian { .. } => "gaussian",
            RewardDist::Beta { .. } => "beta",
            RewardDist::Bernoulli { .. } => "bernoulli",
            RewardDist::Categorical { .. } => "categorical",
            RewardDist::Deterministic { .. } => "deterministic",
        }
    }
}

/// One arm: true mean, fairness fraction `tau`, penalty rate and reward law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub id: usize,
    pub mu: f64,
    pub tau: f64,
    pub penalty: f64,
    pub dist: RewardDist,
}

/// Arm as written in a config file. `mu` may be omitted, in which case it is
/// taken from the distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub penalty: f64,
    pub dist: RewardDist,
}

impl ArmConfig {
    pub fn new(dist: RewardDist, tau: f64, penalty: f64) -> Self {
        ArmConfig {
            mu: None,
            tau,
            penalty,
            dist,
        }
    }
}

/// Instance config file schema (JSON or TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub arms: Vec<ArmConfig>,
}

impl InstanceConfig {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    /// Reads a config, choosing TOML for `.toml` files and JSON otherwise.
    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    pub fn into_instance(self) -> Result<BanditInstance, ModelError> {
        validate_instance(self.arms)
    }
}

/// A validated set of arms. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    arms: Vec<ArmSpec>,
    slack: f64,
}

/// Validates arm configs and builds an instance with ids `0..K`.
pub fn validate_instance(arms: Vec<ArmConfig>) -> Result<BanditInstance, ModelError> {
    if arms.len() < 2 {
        return Err(ModelError::TooFewArms(arms.len()));
    }
    let mut specs = Vec::with_capacity(arms.len());
    for (id, arm) in arms.into_iter().enumerate() {
        arm.dist
            .validate()
            .map_err(|reason| ModelError::BadDistribution { arm: id, reason })?;
        if !(arm.tau.is_finite() && (0.0..1.0).contains(&arm.tau)) {
            return Err(ModelError::InvalidArm {
                arm: id,
                reason: format!("tau = {} outside [0, 1)", arm.tau),
            });
        }
        if !(arm.penalty.is_finite() && arm.penalty >= 0.0) {
            return Err(ModelError::InvalidArm {
                arm: id,
                reason: format!("penalty = {} must be >= 0", arm.penalty),
            });
        }
        let analytic = arm.dist.mean();
        let mu = arm.mu.unwrap_or(analytic);
        if (mu - analytic).abs() > MEAN_TOL * mu.abs().max(1.0) {
            return Err(ModelError::MeanMismatch {
                arm: id,
                mu,
                analytic,
            });
        }
        if !(0.0..=1.0).contains(&mu) {
            log::warn!("arm {id}: mean {mu} lies outside [0, 1]");
        }
        specs.push(ArmSpec {
            id,
            mu,
            tau: arm.tau,
            penalty: arm.penalty,
            dist: arm.dist,
        });
    }
    let sum: f64 = specs.iter().map(|a| a.tau).sum();
    if sum >= 1.0 {
        return Err(ModelError::FairnessInfeasible { sum });
    }
    Ok(BanditInstance {
        arms: specs,
        slack: 1.0 - sum,
    })
}

impl BanditInstance {
    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    /// `1 - sum(tau)`, strictly positive.
    pub fn slack(&self) -> f64 {
        self.slack
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.mu).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.tau).collect()
    }

    pub fn penalties(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.penalty).collect()
    }

    pub fn to_config(&self) -> InstanceConfig {
        InstanceConfig {
            arms: self
                .arms
                .iter()
                .map(|a| ArmConfig {
                    mu: Some(a.mu),
                    tau: a.tau,
                    penalty: a.penalty,
                    dist: a.dist.clone(),
                })
                .collect(),
        }
    }

    /// Same arms with every penalty rate replaced by `penalty`.
    pub fn with_uniform_penalty(&self, penalty: f64) -> Result<BanditInstance, ModelError> {
        let mut cfg = self.to_config();
        for arm in &mut cfg.arms {
            arm.penalty = penalty;
        }
        cfg.into_instance()
    }

    /// Same arms with fairness fractions replaced.
    pub fn with_taus(&self, taus: &[f64]) -> Result<BanditInstance, ModelError> {
        assert_eq!(taus.len(), self.k(), "one tau per arm");
        let mut cfg = self.to_config();
        for (arm, &tau) in cfg.arms.iter_mut().zip(taus) {
            arm.tau = tau;
        }
        cfg.into_instance()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmClass {
    Optimal,
    Critical,
    NonCritical,
}

impl fmt::Display for ArmClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArmClass::Optimal => "opt",
            ArmClass::Critical => "cr",
            ArmClass::NonCritical => "non-cr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmClassification {
    pub mu_star: f64,
    pub gaps: Vec<f64>,
    pub opt: Vec<usize>,
    pub cr: Vec<usize>,
    pub non_cr: Vec<usize>,
}

impl ArmClassification {
    pub fn class_of(&self, arm: usize) -> ArmClass {
        let gap = self.gaps[arm];
        if gap == 0.0 {
            ArmClass::Optimal
        } else if self.cr.binary_search(&arm).is_ok() {
            ArmClass::Critical
        } else {
            ArmClass::NonCritical
        }
    }
}

/// Splits arms into optimal (zero gap), critical (`A_k >= gap > 0`) and
/// non-critical (`gap > A_k`). Optimality is exact float equality with the max.
pub fn classify_arms(instance: &BanditInstance) -> ArmClassification {
    let mu_star = instance
        .arms()
        .iter()
        .map(|a| a.mu)
        .fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<f64> = instance.arms().iter().map(|a| mu_star - a.mu).collect();
    let mut opt = Vec::new();
    let mut cr = Vec::new();
    let mut non_cr = Vec::new();
    for (arm, &gap) in instance.arms().iter().zip(&gaps) {
        if gap == 0.0 {
            opt.push(arm.id);
        } else if arm.penalty >= gap {
            cr.push(arm.id);
        } else {
            non_cr.push(arm.id);
        }
    }
    ArmClassification {
        mu_star,
        gaps,
        opt,
        cr,
        non_cr,
    }
}

/// Convenience builder for tests and presets: deterministic arms.
pub fn point_mass_arms(mus: &[f64], taus: &[f64], penalties: &[f64]) -> Vec<ArmConfig> {
    mus.iter()
        .zip(taus)
        .zip(penalties)
        .map(|((&mu, &tau), &penalty)| {
            ArmConfig::new(RewardDist::Deterministic { value: mu }, tau, penalty)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn instance(mus: &[f64], taus: &[f64], penalties: &[f64]) -> BanditInstance {
        validate_instance(point_mass_arms(mus, taus, penalties)).unwrap()
    }

    #[test]
    fn slack_is_one_minus_tau_sum() {
        let inst = instance(&[0.1, 0.2, 0.3], &[0.1, 0.1, 0.1], &[0.0; 3]);
        assert_abs_diff_eq!(inst.slack(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn rejects_infeasible_fairness() {
        let err = validate_instance(point_mass_arms(&[0.1, 0.2], &[0.6, 0.5], &[0.0; 2]));
        assert!(matches!(err, Err(ModelError::FairnessInfeasible { .. })));
        // exactly 1 is infeasible too
        let err = validate_instance(point_mass_arms(&[0.1, 0.2], &[0.5, 0.5], &[0.0; 2]));
        assert!(matches!(err, Err(ModelError::FairnessInfeasible { .. })));
    }

    #[test]
    fn rejects_single_arm() {
        let err = validate_instance(point_mass_arms(&[0.5], &[0.1], &[0.0]));
        assert!(matches!(err, Err(ModelError::TooFewArms(1))));
    }

    #[test]
    fn rejects_bad_distributions() {
        let bad = [
            RewardDist::Gaussian {
                mean: 0.5,
                variance: 0.0,
            },
            RewardDist::Beta {
                alpha: 0.0,
                beta: 1.0,
            },
            RewardDist::Bernoulli { p: 1.2 },
            RewardDist::Categorical {
                values: vec![0.0, 1.0],
                probs: vec![0.5, 0.4],
            },
            RewardDist::Categorical {
                values: vec![f64::NAN, 1.0],
                probs: vec![0.5, 0.5],
            },
        ];
        for dist in bad {
            let arms = vec![
                ArmConfig::new(dist, 0.1, 0.0),
                ArmConfig::new(RewardDist::Deterministic { value: 0.5 }, 0.1, 0.0),
            ];
            assert!(matches!(
                validate_instance(arms),
                Err(ModelError::BadDistribution { arm: 0, .. })
            ));
        }
    }

    #[test]
    fn rejects_mean_mismatch_and_bad_tau() {
        let mut arms = point_mass_arms(&[0.5, 0.4], &[0.1, 0.1], &[0.0; 2]);
        arms[1].mu = Some(0.41);
        assert!(matches!(
            validate_instance(arms),
            Err(ModelError::MeanMismatch { arm: 1, .. })
        ));
        let arms = point_mass_arms(&[0.5, 0.4], &[-0.1, 0.1], &[0.0; 2]);
        assert!(matches!(
            validate_instance(arms),
            Err(ModelError::InvalidArm { arm: 0, .. })
        ));
        let arms = point_mass_arms(&[0.5, 0.4], &[0.1, 0.1], &[0.0, -1.0]);
        assert!(matches!(
            validate_instance(arms),
            Err(ModelError::InvalidArm { arm: 1, .. })
        ));
    }

    #[test]
    fn out_of_unit_interval_mean_is_allowed() {
        let arms = vec![
            ArmConfig::new(
                RewardDist::Gaussian {
                    mean: 1.3,
                    variance: 0.1,
                },
                0.1,
                0.0,
            ),
            ArmConfig::new(
                RewardDist::Gaussian {
                    mean: -0.2,
                    variance: 0.1,
                },
                0.1,
                0.0,
            ),
        ];
        assert!(validate_instance(arms).is_ok());
    }

    #[test]
    fn classification_examples() {
        let c = classify_arms(&instance(&[0.9, 0.5, 0.2], &[0.1; 3], &[0.3; 3]));
        assert_eq!((c.opt, c.cr, c.non_cr), (vec![0], vec![], vec![1, 2]));

        let c = classify_arms(&instance(&[0.9, 0.5, 0.2], &[0.1; 3], &[0.5; 3]));
        assert_eq!(
            (c.opt.clone(), c.cr.clone(), c.non_cr.clone()),
            (vec![0], vec![1], vec![2])
        );
        assert_eq!(c.class_of(1), ArmClass::Critical);
        assert_eq!(c.class_of(2), ArmClass::NonCritical);

        let c = classify_arms(&instance(&[0.5, 0.5, 0.5], &[0.1; 3], &[0.7, 0.0, 0.2]));
        assert_eq!((c.opt, c.cr, c.non_cr), (vec![0, 1, 2], vec![], vec![]));
    }

    #[test]
    fn penalty_equal_to_gap_is_critical() {
        // 0.75 - 0.25 is exact in binary
        let c = classify_arms(&instance(&[0.75, 0.25], &[0.1; 2], &[0.5, 0.5]));
        assert_eq!(c.cr, vec![1]);
    }

    #[test]
    fn config_formats_agree() {
        let json = r#"{"arms": [
            {"mu": 0.5, "tau": 0.1, "penalty": 0.3, "dist": {"kind": "gaussian", "params": {"mean": 0.5, "variance": 0.04}}},
            {"tau": 0.2, "dist": {"kind": "categorical", "params": {"values": [0.0, 1.0], "probs": [0.25, 0.75]}}}
        ]}"#;
        let toml = r#"
            [[arms]]
            mu = 0.5
            tau = 0.1
            penalty = 0.3
            dist = { kind = "gaussian", params = { mean = 0.5, variance = 0.04 } }
            [[arms]]
            tau = 0.2
            dist = { kind = "categorical", params = { values = [0.0, 1.0], probs = [0.25, 0.75] } }
        "#;
        let a = InstanceConfig::from_json(json)
            .unwrap()
            .into_instance()
            .unwrap();
        let b = InstanceConfig::from_toml(toml)
            .unwrap()
            .into_instance()
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.arms()[1].mu, 0.75);
        assert_eq!(a.arms()[1].penalty, 0.0);
    }

    fn arbitrary_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..8).prop_flat_map(|k| {
            (
                prop::collection::vec(0.0f64..1.0, k),
                prop::collection::vec(0.0f64..0.1, k),
                prop::collection::vec(0.0f64..1.0, k),
            )
        })
    }

    proptest! {
        #[test]
        fn classification_partitions_arms((mus, taus, pens) in arbitrary_instance()) {
            let inst = instance(&mus, &taus, &pens);
            let c = classify_arms(&inst);
            let mut all: Vec<usize> = c.opt.iter().chain(&c.cr).chain(&c.non_cr).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..inst.k()).collect::<Vec<_>>());
            prop_assert!(!c.opt.is_empty());
            for &k in &c.cr {
                prop_assert!(pens[k] >= c.gaps[k] && c.gaps[k] > 0.0);
            }
            for &k in &c.non_cr {
                prop_assert!(c.gaps[k] > pens[k]);
            }
        }

        #[test]
        fn classification_ignores_common_shift(
            (mus, taus, pens) in arbitrary_instance(),
            shift in prop::sample::select(vec![0.5f64, 1.0, 2.0, -0.25]),
        ) {
            // dyadic shifts keep gaps exact for dyadic means
            let mus: Vec<f64> = mus.iter().map(|m| (m * 1024.0).round() / 1024.0).collect();
            let shifted: Vec<f64> = mus.iter().map(|m| m + shift).collect();
            let a = classify_arms(&instance(&mus, &taus, &pens));
            let b = classify_arms(&instance(&shifted, &taus, &pens));
            prop_assert_eq!((a.opt, a.cr, a.non_cr), (b.opt, b.cr, b.non_cr));
        }
    }
}
