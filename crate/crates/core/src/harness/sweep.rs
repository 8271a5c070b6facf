use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{BaselineRule, ExperimentConfig, OutputKind};
use super::output::{config_hash, format_float, write_atomic};
use super::HarnessError;
use crate::engine::{run_batch, run_batch_with_workers, BatchResult, Trajectory};
use crate::model::{classify_arms, ArmClass, BanditInstance};
use crate::policies::{Policy, PolicyKind};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Bumped whenever a CSV header changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Parameterizes `kind` for one sweep point.
pub fn resolve_policy(
    kind: PolicyKind,
    rule: &BaselineRule,
    eta: Option<f64>,
    horizon: u64,
    instance: &BanditInstance,
) -> Policy {
    let t = horizon as f64;
    match (rule, eta) {
        (BaselineRule::EtaMapped, Some(eta)) => match kind {
            PolicyKind::Lfg => Policy::Lfg {
                eta0: (1.0 - eta) * t,
            },
            PolicyKind::Flearn => Policy::Flearn {
                alpha: (1.0 - eta) * instance.taus()[0] * t,
            },
            other => Policy::with_defaults(other, horizon),
        },
        (BaselineRule::Defaults { eta0, alpha }, _) => match kind {
            PolicyKind::Lfg => Policy::Lfg {
                eta0: eta0.unwrap_or_else(|| t.sqrt()),
            },
            PolicyKind::Flearn => Policy::Flearn {
                alpha: alpha.unwrap_or(0.0),
            },
            other => Policy::with_defaults(other, horizon),
        },
        (BaselineRule::EtaMapped, None) => Policy::with_defaults(kind, horizon),
    }
}

#[derive(Debug, Clone, Serialize)]
struct ManifestFile {
    name: String,
    config_hash: String,
    rows: usize,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestCell {
    label: String,
    mu: Vec<f64>,
    tau: Vec<f64>,
    penalty: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    schema_version: u32,
    config_hash: String,
    setting: Option<String>,
    base_seed: u64,
    replications: u64,
    files: Vec<ManifestFile>,
    cells: Vec<ManifestCell>,
}

/// Files produced by a sweep, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub config_hash: String,
    /// `(file name, contents)`; the manifest comes last.
    pub files: Vec<(String, Vec<u8>)>,
}

impl SweepOutput {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

fn header(kind: OutputKind) -> &'static [&'static str] {
    match kind {
        OutputKind::Regret => &[
            "config_hash",
            "seed",
            "cell",
            "K",
            "tau_total",
            "policy",
            "eta",
            "T",
            "replication",
            "penalized_regret",
            "total_reward",
            "expected_reward",
            "total_unfairness",
        ],
        OutputKind::Unfairness => &[
            "config_hash",
            "seed",
            "cell",
            "policy",
            "eta",
            "T",
            "replication",
            "arm",
            "mu",
            "tau",
            "final_unfairness",
            "count",
        ],
        OutputKind::Tradeoff => &[
            "config_hash",
            "seed",
            "cell",
            "K",
            "tau_total",
            "policy",
            "eta",
            "T",
            "replication",
            "expected_reward",
            "total_reward",
            "total_unfairness",
            "penalized_regret",
        ],
        OutputKind::Counts => &[
            "config_hash",
            "seed",
            "cell",
            "policy",
            "T",
            "replication",
            "arm",
            "mu",
            "gap",
            "penalty",
            "class",
            "inverse_gap",
            "count",
            "fairness_level",
        ],
    }
}

fn eta_field(eta: Option<f64>) -> String {
    eta.map(format_float).unwrap_or_default()
}

struct Point<'a> {
    hash: &'a str,
    seed: u64,
    cell: &'a str,
    instance: &'a BanditInstance,
    policy: PolicyKind,
    eta: Option<f64>,
    horizon: u64,
}

fn push_rows(
    w: &mut csv::Writer<Vec<u8>>,
    kind: OutputKind,
    p: &Point<'_>,
    batch: &BatchResult,
) -> Result<usize, HarnessError> {
    let inst = p.instance;
    let tau_total: f64 = inst.taus().iter().sum();
    let classes = classify_arms(inst);
    let mut rows = 0;
    for (r, rep) in batch.reports.iter().enumerate() {
        let lead = [p.hash.to_string(), p.seed.to_string(), p.cell.to_string()];
        match kind {
            OutputKind::Regret | OutputKind::Tradeoff => {
                let mut rec: Vec<String> = lead.to_vec();
                rec.extend([
                    inst.k().to_string(),
                    format_float(tau_total),
                    p.policy.name().to_string(),
                    eta_field(p.eta),
                    p.horizon.to_string(),
                    r.to_string(),
                ]);
                let metrics = if kind == OutputKind::Regret {
                    [
                        rep.penalized_regret,
                        rep.total_reward,
                        rep.expected_reward,
                        rep.total_unfairness(),
                    ]
                } else {
                    [
                        rep.expected_reward,
                        rep.total_reward,
                        rep.total_unfairness(),
                        rep.penalized_regret,
                    ]
                };
                rec.extend(metrics.iter().map(|&x| format_float(x)));
                w.write_record(&rec)?;
                rows += 1;
            }
            OutputKind::Unfairness => {
                for (j, arm) in inst.arms().iter().enumerate() {
                    let mut rec: Vec<String> = lead.to_vec();
                    rec.extend([
                        p.policy.name().to_string(),
                        eta_field(p.eta),
                        p.horizon.to_string(),
                        r.to_string(),
                        j.to_string(),
                        format_float(arm.mu),
                        format_float(arm.tau),
                        format_float(rep.per_arm_unfairness[j]),
                        rep.counts[j].to_string(),
                    ]);
                    w.write_record(&rec)?;
                    rows += 1;
                }
            }
            OutputKind::Counts => {
                for (j, arm) in inst.arms().iter().enumerate() {
                    let gap = classes.gaps[j];
                    let class = classes.class_of(j);
                    let inverse_gap = match class {
                        ArmClass::Optimal => f64::NAN,
                        ArmClass::Critical => gap.powi(-2),
                        ArmClass::NonCritical => (gap - arm.penalty).powi(-2),
                    };
                    let mut rec: Vec<String> = lead.to_vec();
                    rec.extend([
                        p.policy.name().to_string(),
                        p.horizon.to_string(),
                        r.to_string(),
                        j.to_string(),
                        format_float(arm.mu),
                        format_float(gap),
                        format_float(arm.penalty),
                        class.to_string(),
                        format_float(inverse_gap),
                        rep.counts[j].to_string(),
                        format_float(arm.tau * p.horizon as f64),
                    ]);
                    w.write_record(&rec)?;
                    rows += 1;
                }
            }
        }
    }
    Ok(rows)
}

/// Runs every sweep point and renders the CSV and manifest in memory.
/// `workers = None` uses the global rayon pool.
pub fn run_outputs(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<SweepOutput, HarnessError> {
    config.validate()?;
    let hash = config_hash(config)?;
    let seed = config.base_seed;
    let etas: Vec<Option<f64>> = match &config.eta_grid {
        Some(grid) => grid.iter().map(|&e| Some(e)).collect(),
        None => vec![None],
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(config.output))?;
    let mut rows = 0;
    let mut cells = Vec::new();
    for cell in &config.cells {
        let base = cell.build()?;
        cells.push(ManifestCell {
            label: cell.label.clone(),
            mu: base.means(),
            tau: base.taus(),
            penalty: base.penalties(),
        });
        for &kind in &config.policies {
            for &eta in &etas {
                let instance = match eta {
                    Some(e) if config.baselines == BaselineRule::EtaMapped => {
                        base.with_uniform_penalty(e)?
                    }
                    _ => base.clone(),
                };
                for &horizon in &config.horizons {
                    let policy = resolve_policy(kind, &config.baselines, eta, horizon, &instance);
                    let batch = match workers {
                        Some(n) => run_batch_with_workers(
                            &instance,
                            &policy,
                            horizon,
                            seed,
                            config.replications,
                            n,
                        )?,
                        None => run_batch(&instance, &policy, horizon, seed, config.replications)?,
                    };
                    log::debug!(
                        "{} {} eta={eta:?} T={horizon}: regret {:.3}",
                        cell.label,
                        kind,
                        batch.penalized_regret.mean
                    );
                    let point = Point {
                        hash: &hash,
                        seed,
                        cell: &cell.label,
                        instance: &instance,
                        policy: kind,
                        eta,
                        horizon,
                    };
                    rows += push_rows(&mut w, config.output, &point, &batch)?;
                }
            }
        }
    }
    let csv_bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    let csv_name = config.output.file_name().to_string();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.clone(),
        setting: config.setting.map(|s| s.id().to_string()),
        base_seed: seed,
        replications: config.replications,
        files: vec![ManifestFile {
            name: csv_name.clone(),
            config_hash: hash.clone(),
            rows,
        }],
        cells,
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    Ok(SweepOutput {
        config_hash: hash,
        files: vec![
            (csv_name, csv_bytes),
            (MANIFEST_FILE.to_string(), manifest_bytes),
        ],
    })
}

/// Runs the sweep and writes its files into `out_dir`. Nothing is written if a
/// run fails; files already written are removed if a later write fails.
pub fn run_sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>, HarnessError> {
    let output = run_outputs(config, workers)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, bytes) in &output.files {
        let path = out_dir.join(name);
        if let Err(e) = write_atomic(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

/// Per-round CSV of one trajectory; with a deficit trace, one
/// `deficit_<arm>` column per arm.
pub fn trajectory_csv(
    hash: &str,
    seed: u64,
    trajectory: &Trajectory,
) -> Result<Vec<u8>, HarnessError> {
    let k = trajectory.counts.len();
    let traced = trajectory.deficit_trace.is_some();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head: Vec<String> = ["config_hash", "seed", "replication", "t", "arm", "reward"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if traced {
        head.extend((0..k).map(|j| format!("deficit_{j}")));
    }
    w.write_record(&head)?;
    for (i, (&arm, &reward)) in trajectory
        .choices
        .iter()
        .zip(&trajectory.rewards)
        .enumerate()
    {
        let t = i + 1;
        let mut rec = vec![
            hash.to_string(),
            seed.to_string(),
            "0".to_string(),
            t.to_string(),
            arm.to_string(),
            format_float(reward),
        ];
        if let Some(d) = trajectory.deficits_at(t) {
            rec.extend(d.iter().map(|&x| format_float(x)));
        }
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Csv(e.into_error().into()))
}

/// One row per replication of a batch.
pub fn summary_csv(
    hash: &str,
    seed: u64,
    policy: &Policy,
    batch: &BatchResult,
) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "config_hash",
        "seed",
        "policy",
        "T",
        "replication",
        "penalized_regret",
        "total_reward",
        "expected_reward",
        "total_unfairness",
        "realized_loss",
        "l_star",
        "counts",
    ])?;
    for (r, rep) in batch.reports.iter().enumerate() {
        let counts: Vec<String> = rep.counts.iter().map(|c| c.to_string()).collect();
        w.write_record([
            hash.to_string(),
            seed.to_string(),
            policy.kind().name().to_string(),
            rep.horizon.to_string(),
            r.to_string(),
            format_float(rep.penalized_regret),
            format_float(rep.total_reward),
            format_float(rep.expected_reward),
            format_float(rep.total_unfairness()),
            format_float(rep.realized_loss),
            format_float(rep.l_star),
            counts.join(" "),
        ])?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Csv(e.into_error().into()))
}
