//! Heterogeneous-agent PPO with a GAN critic, and its ablations.
//!
//! One iteration: collect `B` episodes with the current joint policy, score
//! them with the generator, compute GAE, then update agents one at a time in
//! a random order. Each agent maximises its clipped surrogate weighted by the
//! M-factor, which starts at the normalised advantage and picks up the
//! new/old probability ratio of every agent updated before it. The critic is
//! updated last.

mod algo;
mod config;
mod rollout;
mod update;

pub use algo::{
    clip_objective_value, compute_gae, happo_clip_objective, normalize_advantages,
    permute_agents, pg_objective, update_m_factor,
};
pub use config::{CriticKind, HappoConfig, Objective, TrainConfig, Variant, Wiring};
pub use rollout::{
    act, collect_rollouts, ActionMode, AgentRecord, Episode, RolloutBuffer, StepRecord,
};
pub use update::{
    discriminator_step, generator_step, happo_agent_update, surrogate, update_critic, Adversary,
    CriticStats,
};

use crate::autodiff::{Adam, Checkpoint};
use crate::env::AgentId;
use crate::error::{Error, Result};
use crate::nets::{ActorNet, DiscriminatorNet, GeneratorNet};
use crate::rng::{derive_seed, stream, tags, SimRng};

/// Per-iteration summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    /// 1-based.
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_delay: f64,
    pub critic: CriticStats,
}

/// Detail of the sequential update, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTrace {
    pub order: Vec<usize>,
    /// Normalised advantages, one per transition.
    pub advantages: Vec<f64>,
    /// M-factor each agent was trained with, in update order.
    pub m_factors: Vec<Vec<f64>>,
    /// Log-probs of the stored actions before and after each agent's update,
    /// in update order.
    pub old_log_probs: Vec<Vec<f64>>,
    pub new_log_probs: Vec<Vec<f64>>,
}

pub struct Trainer {
    cfg: TrainConfig,
    wiring: Wiring,
    actors: Vec<ActorNet>,
    actor_opts: Vec<Adam>,
    generator: GeneratorNet,
    g_opt: Adam,
    adversary: Option<(DiscriminatorNet, Adam)>,
    rng: SimRng,
    iteration: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let wiring = cfg.wiring();
        let counts = cfg.env.counts;
        let actors = (0..counts.agents())
            .map(|a| {
                ActorNet::new(wiring.actor, counts, AgentId(a), cfg.env.area.k_max, &cfg.nets, cfg.seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let actor_opts = actors.iter().map(|_| Adam::new(cfg.train.actor_lr)).collect();
        let generator = GeneratorNet::new(counts.state_len(), &cfg.nets, cfg.seed)?;
        let adversary = match wiring.critic {
            CriticKind::Gan => Some((
                DiscriminatorNet::new(counts.state_len(), &cfg.nets, cfg.seed)?,
                Adam::new(cfg.train.critic_lr),
            )),
            CriticKind::Plain => None,
        };
        Ok(Self {
            wiring,
            actors,
            actor_opts,
            generator,
            g_opt: Adam::new(cfg.train.critic_lr),
            adversary,
            rng: stream(cfg.seed, &[tags::TRAIN]),
            iteration: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn wiring(&self) -> Wiring {
        self.wiring
    }

    pub fn actors(&self) -> &[ActorNet] {
        &self.actors
    }

    pub fn generator(&self) -> &GeneratorNet {
        &self.generator
    }

    pub fn discriminator(&self) -> Option<&DiscriminatorNet> {
        self.adversary.as_ref().map(|(d, _)| d)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn episode_seeds(&self) -> Vec<u64> {
        (0..self.cfg.train.episodes_per_iteration)
            .map(|b| derive_seed(self.cfg.seed, &[tags::ROLLOUT_ENV, self.iteration as u64, b as u64]))
            .collect()
    }

    /// Sample this iteration's episodes with the current policy.
    pub fn collect(&mut self) -> Result<RolloutBuffer> {
        let seeds = self.episode_seeds();
        collect_rollouts(&self.cfg.env, &self.actors, &seeds, ActionMode::Sample, &mut self.rng)
    }

    /// Fill `advantages` (raw) and `returns` from the generator's values.
    pub fn score(&self, buf: &mut RolloutBuffer) -> Result<()> {
        let t = &self.cfg.train;
        buf.advantages.clear();
        buf.returns.clear();
        for ep in &buf.episodes {
            let mut states: Vec<Vec<f64>> = ep.steps.iter().map(|s| s.state.clone()).collect();
            states.push(ep.final_state.clone());
            let values = self.generator.values(&states)?;
            let rewards: Vec<f64> = ep.steps.iter().map(|s| s.reward * t.reward_scale).collect();
            let dones: Vec<bool> = ep.steps.iter().map(|s| s.done).collect();
            let (adv, ret) = compute_gae(&rewards, &values, &dones, t.discount, t.gae_lambda)?;
            buf.advantages.extend(adv);
            buf.returns.extend(ret);
        }
        Ok(())
    }

    /// Sequential actor updates in a random order, then the critic.
    pub fn update(&mut self, buf: &RolloutBuffer) -> Result<(CriticStats, UpdateTrace)> {
        if buf.advantages.len() != buf.transitions() {
            return Err(Error::Contract("advantages must be computed before actor updates".into()));
        }
        let adv = normalize_advantages(&buf.advantages);
        let order = permute_agents(self.actors.len(), &mut self.rng);
        let mut m = adv.clone();
        let mut trace = UpdateTrace {
            order: order.clone(),
            advantages: adv,
            m_factors: Vec::new(),
            old_log_probs: Vec::new(),
            new_log_probs: Vec::new(),
        };
        for &a in &order {
            let samples = buf.agent_samples(a);
            let old: Vec<f64> = samples.iter().map(|s| s.log_prob).collect();
            happo_agent_update(
                &mut self.actors[a],
                &mut self.actor_opts[a],
                &samples,
                &m,
                &self.cfg.train,
                self.wiring.objective,
                &mut self.rng,
            )?;
            let new = samples
                .iter()
                .map(|s| self.actors[a].log_prob(&s.obs, &s.latent))
                .collect::<Result<Vec<_>>>()?;
            trace.m_factors.push(m.clone());
            m = update_m_factor(&m, &new, &old)?;
            trace.old_log_probs.push(old);
            trace.new_log_probs.push(new);
        }
        let states = buf.states();
        let adversary = self.adversary.as_mut().map(|(disc, opt)| Adversary { disc, opt });
        let critic = update_critic(
            &mut self.generator,
            &mut self.g_opt,
            adversary,
            &states,
            &buf.returns,
            &self.cfg.train,
            &mut self.rng,
        )?;
        Ok((critic, trace))
    }

    /// Collect, score and update once.
    pub fn step(&mut self) -> Result<(IterationStats, UpdateTrace)> {
        let mut buf = self.collect()?;
        self.score(&mut buf)?;
        let (critic, trace) = self.update(&buf)?;
        self.iteration += 1;
        let stats = IterationStats {
            iteration: self.iteration,
            mean_reward: buf.mean_episode_reward(),
            mean_delay: buf.mean_delay(),
            critic,
        };
        Ok((stats, trace))
    }

    /// Run the configured number of iterations, handing each summary to
    /// `on_iteration`.
    pub fn train(&mut self, mut on_iteration: impl FnMut(&IterationStats, &Trainer) -> Result<()>) -> Result<()> {
        while self.iteration < self.cfg.train.iterations {
            let (stats, _) = self.step()?;
            on_iteration(&stats, self)?;
        }
        Ok(())
    }

    /// All network parameters plus the run config.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::json!({ "config": self.cfg, "iteration": self.iteration });
        let mut tensors = Vec::new();
        for (i, a) in self.actors.iter().enumerate() {
            tensors.extend(a.params().named(&format!("actor{i}.")));
        }
        tensors.extend(self.generator.params().named("generator."));
        if let Some((d, _)) = &self.adversary {
            tensors.extend(d.params().named("discriminator."));
        }
        Ok(Checkpoint { meta: serde_json::to_string(&meta)?, tensors })
    }

    /// Rebuild networks from a checkpoint. Optimizer state starts fresh.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: serde_json::Value = serde_json::from_str(&ck.meta)?;
        let cfg: TrainConfig = serde_json::from_value(
            meta.get("config").cloned().ok_or_else(|| Error::Checkpoint("meta has no config".into()))?,
        )?;
        let iteration = meta.get("iteration").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
        let mut t = Trainer::new(cfg)?;
        for (i, a) in t.actors.iter_mut().enumerate() {
            a.params_mut().load_named(&format!("actor{i}."), &ck.tensors)?;
        }
        t.generator.params_mut().load_named("generator.", &ck.tensors)?;
        if let Some((d, _)) = t.adversary.as_mut() {
            d.params_mut().load_named("discriminator.", &ck.tensors)?;
        }
        t.iteration = iteration;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    fn tiny(variant: Variant) -> TrainConfig {
        let mut env = EnvConfig::with_counts(2, 1, 1);
        env.horizon = 5;
        TrainConfig {
            variant,
            seed: 3,
            env,
            train: HappoConfig {
                iterations: 1,
                episodes_per_iteration: 1,
                epochs: 2,
                minibatches: 2,
                ..HappoConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn smoke_run_gives_one_row() {
        for v in Variant::ALL {
            let mut t = Trainer::new(tiny(v)).unwrap();
            let mut rows = 0;
            t.train(|s, _| {
                rows += 1;
                assert!(s.mean_reward.is_finite() && s.mean_delay.is_finite());
                Ok(())
            })
            .unwrap();
            assert_eq!(rows, 1);
        }
    }

    #[test]
    fn buffer_shape_and_stored_log_probs() {
        let mut t = Trainer::new(tiny(Variant::GaiHappo)).unwrap();
        let buf = t.collect().unwrap();
        assert_eq!(buf.transitions(), 5);
        assert!(buf.steps().all(|s| s.agents.len() == 3));
        for a in 0..3 {
            for s in buf.agent_samples(a) {
                let again = t.actors()[a].log_prob(&s.obs, &s.latent).unwrap();
                assert!((again - s.log_prob).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn first_m_is_the_advantage() {
        let mut t = Trainer::new(tiny(Variant::Happo)).unwrap();
        let (_, trace) = t.step().unwrap();
        assert_eq!(trace.m_factors[0], trace.advantages);
        assert_eq!(trace.order.len(), 3);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("ppo".parse::<Variant>().is_err());
        let w = Variant::GaiHappo.wiring();
        assert_eq!((w.actor, w.critic), (crate::nets::ActorArch::Attention, CriticKind::Gan));
        let w = Variant::Happo.wiring();
        assert_eq!((w.actor, w.critic), (crate::nets::ActorArch::Mlp, CriticKind::Plain));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut t = Trainer::new(tiny(Variant::GaiHappo)).unwrap();
        t.step().unwrap();
        let ck = t.checkpoint().unwrap();
        let back = Trainer::from_checkpoint(&Checkpoint::from_text(&ck.to_text().unwrap()).unwrap()).unwrap();
        assert_eq!(back.actors(), t.actors());
        assert_eq!(back.generator(), t.generator());
        assert_eq!(back.iteration(), 1);
    }
}
