use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use penband::distributions::derive_stream;
use penband::engine::{report, run, run_batch_with_workers, BatchResult};
use penband::harness::{
    config_hash, emit_plot, preset, run_sweep, summary_csv, trajectory_csv, write_atomic, PlotKind,
    PresetOverrides, Setting,
};
use penband::ingest::{build_instance, parse_ratings, CountFilter, TauRule};
use penband::model::{classify_arms, BanditInstance, InstanceConfig};
use penband::oracle::{
    gap_dependent_bound, gap_independent_bound, l_star, maximal_deficit_coefficients,
    prophet_allocation,
};
use penband::policies::{Policy, PolicyKind};

#[derive(Parser, Debug)]
#[command(
    name = "penband",
    version,
    about = "Penalized multi-armed bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Prophet allocation and optimal loss rate of an instance, as JSON.
    Prophet {
        #[arg(long)]
        config: PathBuf,
        /// Also report L*(T) at this horizon.
        #[arg(long = "T")]
        horizon: Option<u64>,
    },
    /// Regret and maximal-deficit bounds of an instance, as JSON.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "T")]
        horizon: u64,
        /// Universal constant of the gap-independent bound.
        #[arg(long = "C", default_value_t = 1.0)]
        universal_constant: f64,
        /// Per-arm constant of the gap-dependent bound.
        #[arg(long, default_value_t = 0.0)]
        per_arm_constant: f64,
    },
    /// Play one policy on one instance.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long = "T")]
        horizon: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Record the per-round deficit of every arm in trajectory.csv.
        #[arg(long)]
        trace_deficits: bool,
        #[arg(long, default_value_t = 1)]
        replications: u64,
        #[arg(long, env = "PENBAND_OUT", default_value = "results")]
        out: PathBuf,
        /// LFG weight on the capped UCB index (default sqrt(T)).
        #[arg(long)]
        eta0: Option<f64>,
        /// Flearn deficit tolerance (default 0).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Run one of the built-in experiment settings.
    Sweep {
        /// One of 1, 2a, 2b, 3, 4a, 4b, 5.
        #[arg(long)]
        setting: String,
        #[arg(long, env = "PENBAND_OUT", default_value = "results")]
        out: PathBuf,
        #[arg(long = "K", value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        /// Total fairness fraction(s), split evenly across arms.
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
        #[arg(long = "T", value_delimiter = ',')]
        horizons: Option<Vec<u64>>,
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        eta_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<PolicyKind>>,
        /// 1-based case numbers (settings 4a and 4b).
        #[arg(long, value_delimiter = ',')]
        cases: Option<Vec<usize>>,
        #[arg(long, env = "PENBAND_MOVIELENS_RATINGS")]
        ratings: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        min_count: Option<Vec<u64>>,
        /// Keep movies with at least (not more than) min-count ratings.
        #[arg(long)]
        at_least: bool,
        /// Reward kinds for setting 5: gaussian, beta, bernoulli.
        #[arg(long, value_delimiter = ',')]
        dists: Option<Vec<String>>,
        #[arg(long)]
        eta0: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Dedicated worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Build an instance config from a MovieLens ratings.dat file.
    IngestMovielens {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        penalty: f64,
        /// Total fairness fraction, split evenly across arms.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long)]
        at_least: bool,
    },
    /// Render a sweep CSV as an SVG plot.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// regret-vs-T, unfairness-path, reward-vs-unfairness or count-vs-inverse-gap.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_instance(path: &Path) -> Result<BanditInstance> {
    let config = InstanceConfig::from_path(path)?;
    Ok(config.into_instance()?)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn prophet(config: &Path, horizon: Option<u64>) -> Result<()> {
    let inst = load_instance(config)?;
    let p = prophet_allocation(&inst);
    let classes = classify_arms(&inst);
    let class: Vec<String> = (0..inst.k())
        .map(|k| classes.class_of(k).to_string())
        .collect();
    print_json(&json!({
        "k": inst.k(),
        "mu_star": classes.mu_star,
        "gaps": classes.gaps,
        "class": class,
        "y": p.y,
        "reference_opt_arm": p.reference_opt_arm,
        "l_star_rate": p.l_star_rate,
        "l_star": horizon.map(|t| l_star(&inst, t)),
        "T": horizon,
    }))
}

fn bounds(config: &Path, horizon: u64, universal: f64, per_arm: f64) -> Result<()> {
    let inst = load_instance(config)?;
    let dependent = gap_dependent_bound(&inst, horizon, per_arm);
    let independent = gap_independent_bound(&inst, horizon, universal)?;
    let deficit = match maximal_deficit_coefficients(&inst) {
        Ok(c) => json!(c),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let dependent = match dependent {
        Ok(b) => json!({ "value": b.value, "additive": b.additive }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    print_json(&json!({
        "T": horizon,
        "gap_dependent": dependent,
        "gap_independent": independent,
        "universal_constant": universal,
        "maximal_deficit": deficit,
        "ln_T": (horizon as f64).ln(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    config: &Path,
    kind: PolicyKind,
    horizon: u64,
    seed: u64,
    trace: bool,
    replications: u64,
    out: &Path,
    eta0: Option<f64>,
    alpha: Option<f64>,
    workers: usize,
) -> Result<()> {
    let inst = load_instance(config)?;
    let policy = match (kind, eta0, alpha) {
        (PolicyKind::Lfg, Some(eta0), _) => Policy::Lfg { eta0 },
        (PolicyKind::Flearn, _, Some(alpha)) => Policy::Flearn { alpha },
        _ => Policy::with_defaults(kind, horizon),
    };
    let hash = config_hash(&json!({
        "instance": inst.to_config(),
        "policy": policy,
        "T": horizon,
        "seed": seed,
        "replications": replications,
        "trace_deficits": trace,
    }))?;
    let mut rng = derive_stream(seed, 0);
    let trajectory = run(&inst, &policy, horizon, &mut rng, trace)?;
    let batch = if replications > 1 {
        run_batch_with_workers(&inst, &policy, horizon, seed, replications, workers)?
    } else {
        BatchResult::from_reports(vec![report(&inst, &trajectory)?])
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(
        &out.join("trajectory.csv"),
        &trajectory_csv(&hash, seed, &trajectory)?,
    )?;
    write_atomic(
        &out.join("summary.csv"),
        &summary_csv(&hash, seed, &policy, &batch)?,
    )?;
    print_json(&json!({
        "config_hash": hash,
        "policy": kind.name(),
        "T": horizon,
        "seed": seed,
        "replications": replications,
        "penalized_regret": batch.penalized_regret,
        "total_reward": batch.total_reward,
        "total_unfairness": batch.total_unfairness,
        "mean_counts": batch.mean_counts,
        "mean_max_deficit": batch.mean_max_deficit,
    }))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Prophet { config, horizon } => prophet(&config, horizon),
        Command::Bounds {
            config,
            horizon,
            universal_constant,
            per_arm_constant,
        } => bounds(&config, horizon, universal_constant, per_arm_constant),
        Command::Run {
            config,
            policy,
            horizon,
            seed,
            trace_deficits,
            replications,
            out,
            eta0,
            alpha,
            workers,
        } => run_one(
            &config,
            policy,
            horizon,
            seed,
            trace_deficits,
            replications,
            &out,
            eta0,
            alpha,
            workers,
        ),
        Command::Sweep {
            setting,
            out,
            ks,
            tau,
            horizons,
            replications,
            seed,
            eta_grid,
            policies,
            cases,
            ratings,
            min_count,
            at_least,
            dists,
            eta0,
            alpha,
            workers,
        } => {
            let setting: Setting = setting.parse()?;
            let overrides = PresetOverrides {
                ks,
                taus: tau,
                horizons,
                replications,
                base_seed: seed,
                eta_grid,
                policies,
                cases,
                ratings,
                min_counts: min_count,
                count_filter: at_least.then_some(CountFilter::AtLeast),
                dists,
                eta0,
                alpha,
            };
            let config = preset(setting, &overrides)?;
            let files = run_sweep(&config, &out, workers)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::IngestMovielens {
            ratings,
            min_count,
            out,
            penalty,
            tau,
            at_least,
        } => {
            let parsed = parse_ratings(&ratings)?;
            let filter = if at_least {
                CountFilter::AtLeast
            } else {
                CountFilter::Greater
            };
            let (inst, movies) = build_instance(
                &parsed.records,
                min_count,
                filter,
                penalty,
                &TauRule::Uniform { total: tau },
            )?;
            let mut text = serde_json::to_string_pretty(&inst.to_config())?;
            text.push('\n');
            write_atomic(&out, text.as_bytes())?;
            print_json(&json!({
                "arms": inst.k(),
                "movie_ids": movies,
                "records": parsed.records.len(),
                "malformed": parsed.malformed,
                "out": out.display().to_string(),
            }))
        }
        Command::Plot { csv, kind, out } => {
            let kind: PlotKind = kind.parse()?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let n = emit_plot(&csv, kind, &out)?;
            if n == 0 {
                bail!("no series to plot in {}", csv.display());
            }
            eprintln!("{}: {n} series", out.display());
            Ok(())
        }
    }
}
