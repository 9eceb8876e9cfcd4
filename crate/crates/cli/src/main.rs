//! Command-line front end: train, evaluate, sweep and plot.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use usvmec::autodiff::Checkpoint;
use usvmec::env::EnvConfig;
use usvmec::experiments::{
    check_actors, emit_plot, evaluate, metrics_path, run_experiment, run_training, ExperimentSpec,
    GreedyActors, Heuristic, HeuristicPolicy, JointPolicy, MetricsAppender, PlotSpec, XAxis, YAxis,
};
use usvmec::trainer::{TrainConfig, Trainer, Variant};

#[derive(Parser)]
#[command(name = "usvmec", version, about = "USV/UAV/GS edge-computing simulator and trainer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one variant and write metrics plus checkpoints.
    Train {
        /// JSON run config; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, env = "USVMEC_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Override the number of iterations.
        #[arg(long)]
        iterations: Option<usize>,
        /// Record elapsed seconds in the metrics file.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Greedy evaluation of a checkpoint, or of a baseline policy.
    Eval {
        #[arg(long, conflicts_with = "policy", required_unless_present = "policy")]
        checkpoint: Option<PathBuf>,
        /// random, all-local or greedy-nearest.
        #[arg(long)]
        policy: Option<String>,
        /// Scenario JSON; defaults to the checkpoint's own (or the standard one).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        episodes: usize,
        #[arg(long, env = "USVMEC_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Run every cell, variant and seed of an experiment spec.
    Sweep {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Render a metrics file as SVG.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        /// iteration, usv-count or uav-count.
        #[arg(long, default_value = "iteration")]
        x: String,
        /// reward or delay.
        #[arg(long, default_value = "reward")]
        y: String,
        #[arg(long)]
        out: PathBuf,
        /// Keep only rows with this many USVs.
        #[arg(long)]
        usvs: Option<usize>,
        /// Keep only rows with this many UAVs.
        #[arg(long)]
        uavs: Option<usize>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train { config, variant, seed, out, iterations, wall_clock } => {
            let mut cfg = match &config {
                Some(p) => TrainConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => TrainConfig::default(),
            };
            if let Some(v) = variant {
                cfg.variant = v.parse::<Variant>()?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = iterations {
                cfg.train.iterations = k;
            }
            cfg.validate()?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
            let mut metrics = MetricsAppender::open(metrics_path(&out))?;
            let t = run_training(cfg, &mut metrics, Some(&out), wall_clock)?;
            println!(
                "trained {} for {} iterations; metrics in {}",
                t.config().variant,
                t.iteration(),
                metrics.path().display()
            );
        }
        Cmd::Eval { checkpoint, policy, scenario, episodes, seed } => {
            let scenario_cfg = scenario
                .as_ref()
                .map(|p| EnvConfig::load(p).with_context(|| format!("loading {}", p.display())))
                .transpose()?;
            let (result, label) = if let Some(p) = checkpoint {
                let ck = Checkpoint::load(&p).with_context(|| format!("loading {}", p.display()))?;
                let t = Trainer::from_checkpoint(&ck)?;
                let env = scenario_cfg.unwrap_or_else(|| t.config().env.clone());
                check_actors(t.actors(), &env)?;
                let mut pol = GreedyActors::new(t.actors());
                (evaluate(&mut pol, &env, episodes, seed)?, t.config().variant.to_string())
            } else {
                let name = policy.unwrap_or_default();
                let Some(h) = HeuristicPolicy::parse(&name) else {
                    bail!("unknown policy `{name}` (random, all-local, greedy-nearest)");
                };
                let env = scenario_cfg.unwrap_or_else(EnvConfig::standard);
                let mut pol: Box<dyn JointPolicy> = Box::new(Heuristic::new(h, seed));
                (evaluate(pol.as_mut(), &env, episodes, seed)?, name)
            };
            println!(
                "{}",
                serde_json::json!({
                    "policy": label,
                    "episodes": result.episodes,
                    "seed": seed,
                    "mean_reward": result.mean_reward,
                    "mean_delay_s": result.mean_delay,
                })
            );
        }
        Cmd::Sweep { spec, out } => {
            let spec = match &spec {
                Some(p) => ExperimentSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => ExperimentSpec::default(),
            };
            let summary = run_experiment(&spec, &out)?;
            println!("{} runs, {} failed; results in {}", summary.runs, summary.failures.len(), out.display());
            for f in &summary.failures {
                eprintln!("failed: {f}");
            }
        }
        Cmd::Plot { metrics, x, y, out, usvs, uavs } => {
            let spec = PlotSpec { x: XAxis::parse(&x)?, y: YAxis::parse(&y)?, usvs, uavs };
            emit_plot(&metrics, &spec, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
