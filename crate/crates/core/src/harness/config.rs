//! Experiment configs and the built-in presets for the five experiment
//! settings.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::distributions::instance_stream;
use crate::ingest::{build_instance, parse_ratings, CountFilter, TauRule};
use crate::model::{ArmConfig, BanditInstance, InstanceConfig, RewardDist};
use crate::policies::PolicyKind;

pub const DEFAULT_ETA_GRID_POINTS: usize = 21;
const DEFAULT_REPLICATIONS: u64 = 50;
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "1")]
    RegretVsHorizon,
    #[serde(rename = "2a")]
    UnfairnessPathCase1,
    #[serde(rename = "2b")]
    UnfairnessPathCase2,
    #[serde(rename = "3")]
    MovieLens,
    #[serde(rename = "4a")]
    NonCriticalCounts,
    #[serde(rename = "4b")]
    CriticalCounts,
    #[serde(rename = "5")]
    RewardDistributions,
}

impl Setting {
    pub fn id(self) -> &'static str {
        match self {
            Setting::RegretVsHorizon => "1",
            Setting::UnfairnessPathCase1 => "2a",
            Setting::UnfairnessPathCase2 => "2b",
            Setting::MovieLens => "3",
            Setting::NonCriticalCounts => "4a",
            Setting::CriticalCounts => "4b",
            Setting::RewardDistributions => "5",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Setting {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "1" => Setting::RegretVsHorizon,
            "2a" => Setting::UnfairnessPathCase1,
            "2b" => Setting::UnfairnessPathCase2,
            "3" => Setting::MovieLens,
            "4a" => Setting::NonCriticalCounts,
            "4b" => Setting::CriticalCounts,
            "5" => Setting::RewardDistributions,
            other => return Err(HarnessError::UnknownSetting(other.to_string())),
        })
    }
}

/// Which CSV a sweep produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    /// One row per (cell, policy, T, replication).
    Regret,
    /// One row per (cell, policy, eta, replication, arm).
    Unfairness,
    /// One row per (cell, policy, eta, replication).
    Tradeoff,
    /// One row per (cell, policy, T, replication, arm).
    Counts,
}

impl OutputKind {
    pub fn file_name(self) -> &'static str {
        match self {
            OutputKind::Regret => "regret.csv",
            OutputKind::Unfairness => "unfairness.csv",
            OutputKind::Tradeoff => "tradeoff.csv",
            OutputKind::Counts => "counts.csv",
        }
    }
}

/// How baseline tuning parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BaselineRule {
    /// LFG `eta0 = sqrt(T)` and Flearn `alpha = 0` unless overridden.
    Defaults {
        eta0: Option<f64>,
        alpha: Option<f64>,
    },
    /// Scale sweep: penalties `A_k = eta`, Flearn `alpha = (1 - eta) tau_1 T`,
    /// LFG `eta0 = (1 - eta) T`.
    EtaMapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InstanceSource {
    Inline,
    RandomMeans { stream_index: u64 },
    Ingested { path: String, min_count: u64 },
}

/// One instance of a sweep, with the realized arms stored inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCell {
    pub label: String,
    pub source: InstanceSource,
    pub instance: InstanceConfig,
}

impl InstanceCell {
    pub fn build(&self) -> Result<BanditInstance, HarnessError> {
        Ok(self.instance.clone().into_instance()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Option<Setting>,
    pub output: OutputKind,
    pub cells: Vec<InstanceCell>,
    pub policies: Vec<PolicyKind>,
    pub horizons: Vec<u64>,
    pub replications: u64,
    pub base_seed: u64,
    pub eta_grid: Option<Vec<f64>>,
    pub baselines: BaselineRule,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.policies.is_empty() {
            return invalid("no policies selected".into());
        }
        if self.cells.is_empty() {
            return invalid("no instances".into());
        }
        if self.horizons.is_empty() {
            return invalid("no horizons".into());
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1".into());
        }
        if let Some(grid) = &self.eta_grid {
            if grid.is_empty() {
                return invalid("empty eta grid".into());
            }
            if let Some(eta) = grid.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                return invalid(format!("eta {eta} outside (0, 1]"));
            }
        }
        if self.baselines == BaselineRule::EtaMapped && self.eta_grid.is_none() {
            return invalid("eta-mapped baselines need an eta grid".into());
        }
        for cell in &self.cells {
            let inst = cell.build()?;
            if let Some(&t) = self.horizons.iter().find(|&&t| t < inst.k() as u64) {
                return invalid(format!(
                    "horizon {t} shorter than K = {} in {}",
                    inst.k(),
                    cell.label
                ));
            }
        }
        Ok(())
    }

    /// Config for an explicit instance (no preset).
    pub fn inline(
        instance: &BanditInstance,
        policies: Vec<PolicyKind>,
        horizons: Vec<u64>,
    ) -> Self {
        ExperimentConfig {
            setting: None,
            output: OutputKind::Regret,
            cells: vec![InstanceCell {
                label: "inline".into(),
                source: InstanceSource::Inline,
                instance: instance.to_config(),
            }],
            policies,
            horizons,
            replications: 1,
            base_seed: DEFAULT_SEED,
            eta_grid: None,
            baselines: BaselineRule::Defaults {
                eta0: None,
                alpha: None,
            },
        }
    }
}

/// Knobs that replace preset defaults. `None` keeps the preset value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PresetOverrides {
    pub ks: Option<Vec<usize>>,
    pub taus: Option<Vec<f64>>,
    pub horizons: Option<Vec<u64>>,
    pub replications: Option<u64>,
    pub base_seed: Option<u64>,
    pub eta_grid: Option<Vec<f64>>,
    pub policies: Option<Vec<PolicyKind>>,
    /// 1-based case numbers for settings with several cases.
    pub cases: Option<Vec<usize>>,
    pub ratings: Option<PathBuf>,
    pub min_counts: Option<Vec<u64>>,
    pub count_filter: Option<CountFilter>,
    pub dists: Option<Vec<String>>,
    pub eta0: Option<f64>,
    pub alpha: Option<f64>,
}

/// `DEFAULT_ETA_GRID_POINTS` evenly spaced values `1/21, 2/21, ..., 1`.
pub fn default_eta_grid() -> Vec<f64> {
    let n = DEFAULT_ETA_GRID_POINTS;
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn gaussian_arms(mus: &[f64], taus: &[f64], penalty: f64) -> InstanceConfig {
    let var = 1.0 / (mus.len() * mus.len()) as f64;
    InstanceConfig {
        arms: mus
            .iter()
            .zip(taus)
            .map(|(&mean, &tau)| {
                ArmConfig::new(
                    RewardDist::Gaussian {
                        mean,
                        variance: var,
                    },
                    tau,
                    penalty,
                )
            })
            .collect(),
    }
}

/// Uniform means on (0, 1) from the instance stream `index` of `seed`.
fn random_means(seed: u64, index: u64, k: usize) -> Vec<f64> {
    let mut rng = instance_stream(seed, index);
    (0..k).map(|_| rng.uniform()).collect()
}

pub const SETTING2_CASE1_MEANS: [f64; 8] = [0.9, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
pub const SETTING2_CASE2_MEANS: [f64; 8] = [0.95, 0.7, 0.65, 0.6, 0.2, 0.15, 0.1, 0.05];

const SETTING4_NON_CRITICAL: [([f64; 9], f64); 3] = [
    ([0.9, 0.8, 0.7, 0.6, 0.6, 0.4, 0.3, 0.2, 0.1], 0.45),
    ([0.95, 0.8, 0.7, 0.6, 0.6, 0.4, 0.3, 0.2, 0.1], 0.41),
    ([0.9, 0.8, 0.7, 0.6, 0.6, 0.425, 0.4, 0.375, 0.35], 0.45),
];
const SETTING4_CRITICAL: [([f64; 9], f64); 3] = [
    ([0.9, 0.86, 0.84, 0.82, 0.6, 0.4, 0.3, 0.2, 0.1], 0.45),
    ([0.9, 0.85, 0.84, 0.83, 0.82, 0.4, 0.3, 0.2, 0.1], 0.45),
    ([0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1], 0.45),
];

fn pick_cases<T: Clone>(
    all: &[T],
    cases: &Option<Vec<usize>>,
) -> Result<Vec<(usize, T)>, HarnessError> {
    let wanted: Vec<usize> = cases.clone().unwrap_or_else(|| (1..=all.len()).collect());
    wanted
        .into_iter()
        .map(|c| {
            all.get(c.wrapping_sub(1))
                .cloned()
                .map(|v| (c, v))
                .ok_or_else(|| HarnessError::InvalidConfig(format!("no case {c}")))
        })
        .collect()
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::HtUcb, PolicyKind::Lfg, PolicyKind::Flearn]
}

/// Materializes a preset. Random means are drawn from the seed's instance
/// streams and stored in the config.
pub fn preset(setting: Setting, o: &PresetOverrides) -> Result<ExperimentConfig, HarnessError> {
    let seed = o.base_seed.unwrap_or(DEFAULT_SEED);
    let defaults = BaselineRule::Defaults {
        eta0: o.eta0,
        alpha: o.alpha,
    };
    let (output, cells, horizons, policies, eta_grid, baselines) = match setting {
        Setting::RegretVsHorizon => {
            let mut cells = Vec::new();
            for &k in o.ks.as_deref().unwrap_or(&[5, 20]) {
                let mus = random_means(seed, k as u64, k);
                let (lo, hi) = mus
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
                        (lo.min(m), hi.max(m))
                    });
                let penalty = (hi - lo) / 2.0;
                for &tau in o.taus.as_deref().unwrap_or(&[0.2, 0.4, 0.8]) {
                    cells.push(InstanceCell {
                        label: format!("K{k}-tau{tau}"),
                        source: InstanceSource::RandomMeans {
                            stream_index: k as u64,
                        },
                        instance: gaussian_arms(&mus, &vec![tau / k as f64; k], penalty),
                    });
                }
            }
            let horizons = (1..=32).map(|i| 500 * i).collect();
            (
                OutputKind::Regret,
                cells,
                horizons,
                default_policies(),
                None,
                defaults,
            )
        }
        Setting::UnfairnessPathCase1 | Setting::UnfairnessPathCase2 => {
            let (mus, taus): (&[f64], Vec<f64>) = if setting == Setting::UnfairnessPathCase1 {
                (&SETTING2_CASE1_MEANS, vec![1.0 / 16.0; 8])
            } else {
                let t1 = 0.8 / 8.0;
                let mut taus = vec![t1; 4];
                taus.extend([0.4 * t1; 4]);
                (&SETTING2_CASE2_MEANS, taus)
            };
            let cells = vec![InstanceCell {
                label: format!("setting{}", setting.id()),
                source: InstanceSource::Inline,
                instance: gaussian_arms(mus, &taus, 0.0),
            }];
            (
                OutputKind::Unfairness,
                cells,
                vec![10_000],
                default_policies(),
                Some(default_eta_grid()),
                BaselineRule::EtaMapped,
            )
        }
        Setting::MovieLens => {
            let path = o.ratings.clone().ok_or_else(|| {
                HarnessError::InvalidConfig("setting 3 needs a ratings.dat path".into())
            })?;
            let parsed = parse_ratings(&path)?;
            let tau_total = o
                .taus
                .as_ref()
                .and_then(|t| t.first().copied())
                .unwrap_or(0.5);
            let mut cells = Vec::new();
            for &m0 in o.min_counts.as_deref().unwrap_or(&[2500, 2000, 1250]) {
                let (inst, _) = build_instance(
                    &parsed.records,
                    m0,
                    o.count_filter.unwrap_or_default(),
                    0.0,
                    &TauRule::Uniform { total: tau_total },
                )?;
                cells.push(InstanceCell {
                    label: format!("m0-{m0}"),
                    source: InstanceSource::Ingested {
                        path: path.display().to_string(),
                        min_count: m0,
                    },
                    instance: inst.to_config(),
                });
            }
            (
                OutputKind::Tradeoff,
                cells,
                vec![10_000],
                default_policies(),
                Some(default_eta_grid()),
                BaselineRule::EtaMapped,
            )
        }
        Setting::NonCriticalCounts | Setting::CriticalCounts => {
            let table = if setting == Setting::NonCriticalCounts {
                &SETTING4_NON_CRITICAL
            } else {
                &SETTING4_CRITICAL
            };
            let cells = pick_cases(table, &o.cases)?
                .into_iter()
                .map(|(case, (mus, penalty))| InstanceCell {
                    label: format!("case{case}"),
                    source: InstanceSource::Inline,
                    instance: gaussian_arms(&mus, &[1.0 / 20.0; 9], penalty),
                })
                .collect();
            (
                OutputKind::Counts,
                cells,
                vec![20_000],
                vec![PolicyKind::HtUcb],
                None,
                defaults,
            )
        }
        Setting::RewardDistributions => {
            let dists: Vec<String> = o
                .dists
                .clone()
                .unwrap_or_else(|| vec!["gaussian".into(), "beta".into(), "bernoulli".into()]);
            let mut cells = Vec::new();
            for &k in o.ks.as_deref().unwrap_or(&[5, 20]) {
                let index = 1000 + k as u64;
                let mus = random_means(seed, index, k);
                for &tau in o.taus.as_deref().unwrap_or(&[0.2, 0.5]) {
                    for dist in &dists {
                        let arms = mus
                            .iter()
                            .map(|&mu| {
                                let d = match dist.as_str() {
                                    "gaussian" => RewardDist::Gaussian {
                                        mean: mu,
                                        variance: 1.0 / (k * k) as f64,
                                    },
                                    "beta" => RewardDist::Beta {
                                        alpha: mu,
                                        beta: 1.0 - mu,
                                    },
                                    "bernoulli" => RewardDist::Bernoulli { p: mu },
                                    other => {
                                        return Err(HarnessError::InvalidConfig(format!(
                                            "unknown reward kind {other}"
                                        )))
                                    }
                                };
                                Ok(ArmConfig::new(d, tau / k as f64, 0.0))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        cells.push(InstanceCell {
                            label: format!("K{k}-tau{tau}-{dist}"),
                            source: InstanceSource::RandomMeans {
                                stream_index: index,
                            },
                            instance: InstanceConfig { arms },
                        });
                    }
                }
            }
            (
                OutputKind::Tradeoff,
                cells,
                vec![10_000],
                default_policies(),
                Some(default_eta_grid()),
                BaselineRule::EtaMapped,
            )
        }
    };
    let config = ExperimentConfig {
        setting: Some(setting),
        output,
        cells,
        policies: o.policies.clone().unwrap_or(policies),
        horizons: o.horizons.clone().unwrap_or(horizons),
        replications: o.replications.unwrap_or(DEFAULT_REPLICATIONS),
        base_seed: seed,
        eta_grid: o.eta_grid.clone().or(eta_grid),
        baselines,
    };
    config.validate()?;
    Ok(config)
}
