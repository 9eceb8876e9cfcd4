use serde::{Deserialize, Serialize};

use super::heuristics::{heuristic_joint, HeuristicPolicy};
use crate::env::{AgentAction, Env, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::nets::ActorNet;
use crate::rng::{derive_seed, stream, tags, SimRng};
use crate::trainer::{act, ActionMode};

/// Anything that can drive a whole scenario for one slot.
pub trait JointPolicy {
    fn act(&mut self, env: &Env, obs: &[Observation]) -> Result<Vec<AgentAction>>;
}

/// Trained actors acting greedily.
pub struct GreedyActors<'a> {
    actors: &'a [ActorNet],
    rng: SimRng,
}

impl<'a> GreedyActors<'a> {
    pub fn new(actors: &'a [ActorNet]) -> Self {
        // Greedy actions draw nothing; the stream only satisfies `act`.
        Self { actors, rng: stream(0, &[tags::EVAL_POLICY]) }
    }
}

impl JointPolicy for GreedyActors<'_> {
    fn act(&mut self, _env: &Env, obs: &[Observation]) -> Result<Vec<AgentAction>> {
        Ok(act(self.actors, obs, ActionMode::Greedy, &mut self.rng)?.0)
    }
}

/// A fixed rule with its own random stream.
pub struct Heuristic {
    pub policy: HeuristicPolicy,
    rng: SimRng,
}

impl Heuristic {
    pub fn new(policy: HeuristicPolicy, seed: u64) -> Self {
        Self { policy, rng: stream(seed, &[tags::EVAL_POLICY]) }
    }
}

impl JointPolicy for Heuristic {
    fn act(&mut self, env: &Env, _obs: &[Observation]) -> Result<Vec<AgentAction>> {
        heuristic_joint(self.policy, env, &mut self.rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean over episodes of the summed slot rewards.
    pub mean_reward: f64,
    /// Φ summed over episodes divided by the number of non-empty tasks.
    pub mean_delay: f64,
    pub episodes: usize,
}

/// Seeds of the evaluation episodes; shared by every policy evaluated with
/// the same `seed`.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    (0..episodes).map(|e| derive_seed(seed, &[tags::EVAL_ENV, e as u64])).collect()
}

pub fn evaluate(
    policy: &mut dyn JointPolicy,
    scenario: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::config("episodes", "must be positive"));
    }
    let mut env = Env::new(scenario.clone())?;
    let (mut reward, mut phi, mut tasks) = (0.0, 0.0, 0usize);
    for s in eval_seeds(seed, episodes) {
        let mut obs = env.reset_with_seed(s);
        while !env.is_done() {
            let actions = policy.act(&env, &obs)?;
            let out = env.step(&actions)?;
            reward += out.reward;
            tasks += out.info.tasks.iter().filter(|t| t.data_size > 0.0).count();
            obs = out.observations;
        }
        phi += env.phi();
    }
    Ok(EvalResult {
        mean_reward: reward / episodes as f64,
        mean_delay: if tasks == 0 { 0.0 } else { phi / tasks as f64 },
        episodes,
    })
}

/// Check that `actors` were built for `scenario`.
pub fn check_actors(actors: &[ActorNet], scenario: &EnvConfig) -> Result<()> {
    let want = scenario.counts.observation_len();
    let agents = scenario.counts.agents();
    if actors.len() != agents {
        return Err(Error::Contract(format!(
            "checkpoint has {} actors, scenario needs {agents}",
            actors.len()
        )));
    }
    let probe = Observation(vec![0.0; want]);
    for a in actors {
        a.distribution(&probe).map_err(|e| {
            Error::Contract(format!("checkpoint does not fit scenario: {e}"))
        })?;
    }
    Ok(())
}
