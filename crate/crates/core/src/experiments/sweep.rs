use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, GreedyActors};
use super::metrics::{MetricsAppender, MetricsRow};
use crate::env::{Counts, EnvConfig};
use crate::error::{Error, Result};
use crate::nets::NetConfig;
use crate::trainer::{HappoConfig, TrainConfig, Trainer, Variant};

/// A rectangular block of scenario cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub usvs: Vec<usize>,
    pub uavs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub grid: Vec<GridBlock>,
    pub gss: usize,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub eval_episodes: usize,
    /// Base scenario; counts are replaced per cell.
    pub env: EnvConfig,
    /// `iterations` here is ignored in favour of the field above.
    pub train: HappoConfig,
    pub nets: NetConfig,
    pub checkpoint_every: usize,
    /// Record elapsed seconds per row. Off by default so reruns are
    /// byte-identical.
    pub record_wall_clock: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            grid: vec![
                GridBlock { usvs: vec![4, 5, 6, 7, 8], uavs: vec![4] },
                GridBlock { usvs: vec![6], uavs: vec![2, 3, 4, 5, 6] },
            ],
            gss: 2,
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            iterations: 100,
            eval_episodes: 32,
            env: EnvConfig::standard(),
            train: HappoConfig::default(),
            nets: NetConfig::default(),
            checkpoint_every: 0,
            record_wall_clock: false,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells().is_empty() {
            return Err(Error::config("grid", "needs at least one USV count and one UAV count"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "must not be empty"));
        }
        if self.iterations == 0 || self.eval_episodes == 0 {
            return Err(Error::config("iterations", "iterations and eval_episodes must be positive"));
        }
        for c in self.cells() {
            self.train_config(c, self.variants[0], self.seeds[0]).validate()?;
        }
        Ok(())
    }

    /// Distinct scenario cells in first-seen order.
    pub fn cells(&self) -> Vec<Counts> {
        let mut out: Vec<Counts> = Vec::new();
        for b in &self.grid {
            for &i in &b.usvs {
                for &j in &b.uavs {
                    let c = Counts::new(i, j, self.gss);
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    pub fn train_config(&self, counts: Counts, variant: Variant, seed: u64) -> TrainConfig {
        let mut env = self.env.clone();
        env.counts = counts;
        // Custom placements only fit the base counts.
        if env.uav_spawn.as_ref().is_some_and(|s| s.len() != counts.uavs) {
            env.uav_spawn = None;
        }
        if env.gs_positions.as_ref().is_some_and(|s| s.len() != counts.gss) {
            env.gs_positions = None;
        }
        TrainConfig {
            variant,
            seed,
            env,
            train: HappoConfig { iterations: self.iterations, ..self.train.clone() },
            nets: self.nets.clone(),
            actor_override: None,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSummary {
    pub runs: usize,
    pub failures: Vec<String>,
}

/// File layout under an output directory.
pub fn metrics_path(out: &Path) -> PathBuf {
    out.join("metrics.csv")
}

pub fn eval_path(out: &Path) -> PathBuf {
    out.join("eval.csv")
}

pub fn checkpoint_path(out: &Path, cfg: &TrainConfig, iteration: usize) -> PathBuf {
    let c = cfg.env.counts;
    out.join("checkpoints").join(format!(
        "{}_{}x{}x{}_s{}_it{}.ckpt",
        cfg.variant, c.usvs, c.uavs, c.gss, cfg.seed, iteration
    ))
}

fn row(cfg: &TrainConfig, iteration: usize, reward: f64, delay: f64, wall: f64) -> MetricsRow {
    let c = cfg.env.counts;
    MetricsRow {
        variant: cfg.variant.name().to_string(),
        usvs: c.usvs,
        uavs: c.uavs,
        gss: c.gss,
        seed: cfg.seed,
        iteration,
        mean_reward: reward,
        mean_delay_s: delay,
        wall_clock_s: wall,
    }
}

/// Train one configuration, streaming a row per iteration to `metrics` and
/// writing checkpoints under `out`.
pub fn run_training(
    cfg: TrainConfig,
    metrics: &mut MetricsAppender,
    out: Option<&Path>,
    record_wall_clock: bool,
) -> Result<Trainer> {
    let start = Instant::now();
    let every = cfg.checkpoint_every;
    let mut trainer = Trainer::new(cfg)?;
    trainer.train(|s, t| {
        let wall = if record_wall_clock { start.elapsed().as_secs_f64() } else { 0.0 };
        metrics.append(&row(t.config(), s.iteration, s.mean_reward, s.mean_delay, wall))?;
        if let Some(dir) = out {
            if every > 0 && s.iteration % every == 0 {
                t.checkpoint()?.save(checkpoint_path(dir, t.config(), s.iteration))?;
            }
        }
        Ok(())
    })?;
    if let Some(dir) = out {
        trainer.checkpoint()?.save(checkpoint_path(dir, trainer.config(), trainer.iteration()))?;
    }
    Ok(trainer)
}

/// Every cell × variant × seed in order. A failing run is logged to
/// `failures.log` and skipped.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<SweepSummary> {
    spec.validate()?;
    std::fs::create_dir_all(out)?;
    let mut metrics = MetricsAppender::open(metrics_path(out))?;
    let mut evals = MetricsAppender::open(eval_path(out))?;
    let mut summary = SweepSummary::default();
    for counts in spec.cells() {
        for &variant in &spec.variants {
            for &seed in &spec.seeds {
                let cfg = spec.train_config(counts, variant, seed);
                let start = Instant::now();
                let result = run_training(cfg.clone(), &mut metrics, Some(out), spec.record_wall_clock)
                    .and_then(|t| {
                        let e = evaluate(&mut GreedyActors::new(t.actors()), &cfg.env, spec.eval_episodes, seed)?;
                        let wall = if spec.record_wall_clock { start.elapsed().as_secs_f64() } else { 0.0 };
                        evals.append(&row(&cfg, t.iteration(), e.mean_reward, e.mean_delay, wall))
                    });
                summary.runs += 1;
                if let Err(e) = result {
                    let msg = format!(
                        "{variant} {}x{}x{} seed {seed}: {e}",
                        counts.usvs, counts.uavs, counts.gss
                    );
                    let mut log = std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(out.join("failures.log"))?;
                    writeln!(log, "{msg}")?;
                    summary.failures.push(msg);
                }
            }
        }
    }
    Ok(summary)
}
