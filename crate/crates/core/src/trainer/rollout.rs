use rand::Rng;

use crate::autodiff::Tape;
use crate::env::{AgentAction, Env, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::nets::{ActorNet, LatentAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from each policy.
    Sample,
    /// Argmax categories, Gaussian means.
    Greedy,
}

/// What one agent saw and did in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub obs: Observation,
    pub latent: LatentAction,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Critic input before the step.
    pub state: Vec<f64>,
    pub agents: Vec<AgentRecord>,
    /// Unscaled team reward.
    pub reward: f64,
    pub done: bool,
    /// Tasks with positive size this slot.
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
    /// Critic input after the last step.
    pub final_state: Vec<f64>,
    /// Cumulative delay of the episode.
    pub phi: f64,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn tasks(&self) -> usize {
        self.steps.iter().map(|s| s.tasks).sum()
    }
}

/// Transitions of `B` episodes of `T` slots, stored episode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub episodes: Vec<Episode>,
    /// Filled by the trainer before any actor update; flat, episode-major.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn transitions(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }

    pub fn states(&self) -> Vec<Vec<f64>> {
        self.steps().map(|s| s.state.clone()).collect()
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.episodes.iter().flat_map(|e| e.steps.iter())
    }

    /// `(observation, latent, stored log-prob)` of one agent, flat order.
    pub fn agent_samples(&self, agent: usize) -> Vec<&AgentRecord> {
        self.steps().map(|s| &s.agents[agent]).collect()
    }

    /// Mean undiscounted, unscaled return per episode.
    pub fn mean_episode_reward(&self) -> f64 {
        self.episodes.iter().map(Episode::total_reward).sum::<f64>() / self.episodes.len() as f64
    }

    /// Φ summed over episodes divided by the number of non-empty tasks.
    pub fn mean_delay(&self) -> f64 {
        let tasks: usize = self.episodes.iter().map(Episode::tasks).sum();
        if tasks == 0 {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.phi).sum::<f64>() / tasks as f64
    }
}

/// One joint action from the actors, with what each agent recorded.
pub fn act<R: Rng + ?Sized>(
    actors: &[ActorNet],
    obs: &[Observation],
    mode: ActionMode,
    rng: &mut R,
) -> Result<(Vec<AgentAction>, Vec<AgentRecord>)> {
    if actors.len() != obs.len() {
        return Err(Error::Contract(format!("{} actors for {} observations", actors.len(), obs.len())));
    }
    let mut actions = Vec::with_capacity(actors.len());
    let mut records = Vec::with_capacity(actors.len());
    for (actor, o) in actors.iter().zip(obs) {
        let mut tape = Tape::new();
        let bound = actor.params().bind(&mut tape, false);
        let heads = actor.heads(&mut tape, &bound, o)?;
        let dist = heads.distribution(&tape);
        let latent = match mode {
            ActionMode::Sample => dist.sample(rng),
            ActionMode::Greedy => dist.mode(),
        };
        let lp = heads.log_prob(&mut tape, &latent)?;
        actions.push(dist.to_action(&latent)?);
        records.push(AgentRecord { obs: o.clone(), latent, log_prob: tape.item(lp) });
    }
    Ok((actions, records))
}

/// Run one episode per seed with the given actors, in seed order.
pub fn collect_rollouts<R: Rng + ?Sized>(
    env_cfg: &EnvConfig,
    actors: &[ActorNet],
    episode_seeds: &[u64],
    mode: ActionMode,
    rng: &mut R,
) -> Result<RolloutBuffer> {
    let mut env = Env::new(env_cfg.clone())?;
    if actors.len() != env.counts().agents() {
        return Err(Error::Contract(format!(
            "{} actors for a scenario of {} agents",
            actors.len(),
            env.counts().agents()
        )));
    }
    let mut episodes = Vec::with_capacity(episode_seeds.len());
    for &seed in episode_seeds {
        let mut obs = env.reset_with_seed(seed);
        let mut steps = Vec::with_capacity(env_cfg.horizon);
        while !env.is_done() {
            let state = env.state_features();
            let (actions, agents) = act(actors, &obs, mode, rng)?;
            let out = env.step(&actions)?;
            steps.push(StepRecord {
                state,
                agents,
                reward: out.reward,
                done: out.done,
                tasks: out.info.tasks.iter().filter(|t| t.data_size > 0.0).count(),
            });
            obs = out.observations;
        }
        episodes.push(Episode { steps, final_state: env.state_features(), phi: env.phi() });
    }
    Ok(RolloutBuffer { episodes, advantages: Vec::new(), returns: Vec::new() })
}
