//! The cooperative offloading Markov game.
//!
//! Agents are indexed USVs first (`0..I`), then UAVs (`I..I+J`). Every agent
//! receives the same team reward: bits processed per second of delay, summed
//! over USVs.
//!
//! Observation layout (all agents share the body, then an identity one-hot):
//!
//! | block            | per entity                      | width  |
//! |------------------|---------------------------------|--------|
//! | USV `i`          | x/x_max, y/y_max, Q/q_s, d/d_s  | 4·I    |
//! | UAV `j`          | x/x_max, y/y_max, Q/q_s         | 3·J    |
//! | GS `k`           | x/x_max, y/y_max, Q/q_s         | 3·K    |
//! | agent identity   | one-hot                         | I + J  |
//!
//! `q_s` and `d_s` are `observation.queue_scale_bits` and
//! `observation.task_scale_bits`. Altitudes are constant and omitted.

mod config;

pub use config::{Counts, EnvConfig, ObsNormalization};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{rate_u2g, rate_u2u};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::workload::{
    delay_gs, delay_local, delay_uav, project_decision, sample_task, slot_reward, update_queues,
    DelayBreakdown, OffloadDecision, QueueState, RawDecision, Split, Task,
};
use crate::world::{apply_uav_action, gauss_markov_step, UavKinematics, UsvKinematics, Vec3};
use rand::SeedableRng;

pub const USV_FEATURES: usize = 4;
pub const NODE_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Usv(usize),
    Uav(usize),
}

impl Counts {
    pub fn kind(&self, id: AgentId) -> Result<AgentKind> {
        if id.0 < self.usvs {
            Ok(AgentKind::Usv(id.0))
        } else if id.0 < self.agents() {
            Ok(AgentKind::Uav(id.0 - self.usvs))
        } else {
            Err(Error::Contract(format!(
                "unknown agent {} (scenario has {} agents)",
                id.0,
                self.agents()
            )))
        }
    }

    /// Length of the shared state body.
    pub fn state_len(&self) -> usize {
        USV_FEATURES * self.usvs + NODE_FEATURES * (self.uavs + self.gss)
    }

    pub fn observation_len(&self) -> usize {
        self.state_len() + self.agents()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    pub usvs: Vec<UsvKinematics>,
    pub uavs: Vec<UavKinematics>,
    pub gss: Vec<Vec3>,
    pub queues: QueueState,
    /// Tasks generated at the start of the current slot.
    pub tasks: Vec<Task>,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// USV offloading action. Choices are zero-based node indices; the split is
/// any nonnegative triple and is projected onto the simplex by the
/// environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvAction {
    pub uav_choice: Option<usize>,
    pub gs_choice: Option<usize>,
    pub split: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavAction {
    /// Radians in [0, 2π].
    pub azimuth: f64,
    /// Meters in [0, k_max].
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentAction {
    Usv(UsvAction),
    Uav(UavAction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub tasks: Vec<Task>,
    pub decisions: Vec<OffloadDecision>,
    pub delays: Vec<DelayBreakdown>,
    /// Per-USV total delay of this slot.
    pub total_delays: Vec<f64>,
    /// Cumulative delay of the episode including this slot.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub struct Env {
    cfg: EnvConfig,
    state: GlobalState,
    rng: SimRng,
    phi: f64,
}

impl Env {
    /// Build an environment and reset it with the configured seed.
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let mut env = Env {
            state: GlobalState {
                usvs: Vec::new(),
                uavs: Vec::new(),
                gss: Vec::new(),
                queues: QueueState::default(),
                tasks: Vec::new(),
                slot: 0,
            },
            rng: SimRng::seed_from_u64(seed),
            phi: 0.0,
            cfg,
        };
        env.reset_with_seed(seed);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn counts(&self) -> Counts {
        self.cfg.counts
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.cfg.horizon
    }

    pub fn reset(&mut self) -> Vec<Observation> {
        self.reset_with_seed(self.cfg.seed)
    }

    /// Start a fresh episode: USVs uniform in the area moving at the
    /// asymptotic mean velocity, UAVs at their spawn points, empty queues,
    /// and the first slot's tasks drawn.
    pub fn reset_with_seed(&mut self, seed: u64) -> Vec<Observation> {
        self.rng = SimRng::seed_from_u64(seed);
        let c = self.cfg.counts;
        let area = &self.cfg.area;
        let mean = self.cfg.mobility.asymptotic_mean;
        let usvs = (0..c.usvs)
            .map(|_| {
                let x = self.rng.random_range(0.0..=area.x_max);
                let y = self.rng.random_range(0.0..=area.y_max);
                UsvKinematics {
                    position: Vec3::new(x, y, 0.0),
                    velocity: mean,
                }
            })
            .collect();
        let uavs = self
            .cfg
            .uav_start_positions()
            .into_iter()
            .map(|position| UavKinematics { position })
            .collect();
        self.state = GlobalState {
            usvs,
            uavs,
            gss: self.cfg.gs_sites(),
            queues: QueueState::zeros(c.usvs, c.uavs, c.gss),
            tasks: Vec::new(),
            slot: 0,
        };
        self.state.tasks = self.draw_tasks();
        self.phi = 0.0;
        self.observe_all()
    }

    fn draw_tasks(&mut self) -> Vec<Task> {
        (0..self.cfg.counts.usvs)
            .map(|i| sample_task(&self.cfg.compute, i, &mut self.rng))
            .collect()
    }

    /// Normalized global state: the observation body without identity.
    pub fn state_features(&self) -> Vec<f64> {
        state_features(&self.cfg, &self.state)
    }

    pub fn observe(&self, id: AgentId) -> Result<Observation> {
        observe(&self.cfg, &self.state, id)
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        let body = self.state_features();
        (0..self.cfg.counts.agents())
            .map(|a| with_identity(&body, a, self.cfg.counts.agents()))
            .collect()
    }

    fn decision_for(&self, action: &AgentAction, i: usize) -> Result<OffloadDecision> {
        let c = self.cfg.counts;
        let AgentAction::Usv(a) = action else {
            return Err(Error::Contract(format!("agent {i} is a USV but got a UAV action")));
        };
        if a.split.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("split of USV {i}: {:?}", a.split)));
        }
        if let Some(j) = a.uav_choice {
            if j >= c.uavs {
                return Err(Error::Contract(format!("USV {i} selected UAV {j} of {}", c.uavs)));
            }
        }
        if let Some(k) = a.gs_choice {
            if k >= c.gss {
                return Err(Error::Contract(format!("USV {i} selected GS {k} of {}", c.gss)));
            }
        }
        project_decision(&RawDecision {
            uav_choice: a.uav_choice,
            gs_choice: a.gs_choice,
            split: Split::new(a.split[0], a.split[1], a.split[2]),
        })
    }

    /// Advance one slot. Effects, in order: project USV decisions, compute link
    /// rates on the current geometry, delays, reward, queue update, motion,
    /// then draw the next slot's tasks.
    pub fn step(&mut self, joint: &[AgentAction]) -> Result<StepOutcome> {
        let c = self.cfg.counts;
        if self.is_done() {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if joint.len() != c.agents() {
            return Err(Error::Contract(format!(
                "expected {} actions, got {}",
                c.agents(),
                joint.len()
            )));
        }

        let decisions = (0..c.usvs)
            .map(|i| self.decision_for(&joint[i], i))
            .collect::<Result<Vec<_>>>()?;
        let mut moves = Vec::with_capacity(c.uavs);
        for j in 0..c.uavs {
            match joint[c.usvs + j] {
                AgentAction::Uav(a) => {
                    if !(a.azimuth.is_finite() && a.distance.is_finite()) {
                        return Err(Error::NonFinite(format!("action of UAV {j}: {a:?}")));
                    }
                    moves.push(a);
                }
                AgentAction::Usv(_) => {
                    return Err(Error::Contract(format!(
                        "agent {} is a UAV but got a USV action",
                        c.usvs + j
                    )))
                }
            }
        }
        // Validate all motion before mutating anything.
        let next_uavs = self
            .state
            .uavs
            .iter()
            .zip(&moves)
            .map(|(u, a)| apply_uav_action(u, a.azimuth, a.distance, &self.cfg.area))
            .collect::<Result<Vec<_>>>()?;

        let compute = &self.cfg.compute;
        let st = &self.state;
        let mut delays = Vec::with_capacity(c.usvs);
        for (i, (dec, task)) in decisions.iter().zip(&st.tasks).enumerate() {
            let pos = st.usvs[i].position;
            let local = delay_local(st.queues.usv[i], dec, task, compute.usv_capacity(i));
            let uav = match dec.uav_choice {
                Some(j) => {
                    let rate = rate_u2u(&pos, &st.uavs[j].position, &self.cfg.channel)?;
                    delay_uav(st.queues.uav[j], dec, task, rate, compute.uav_capacity(j))?
                }
                None => 0.0,
            };
            let gs = match dec.gs_choice {
                Some(k) => {
                    let rate = rate_u2g(&pos, &st.gss[k], &self.cfg.channel)?;
                    delay_gs(st.queues.gs[k], dec, task, rate, compute.gs_capacity(k))?
                }
                None => 0.0,
            };
            delays.push(DelayBreakdown { local, uav, gs });
        }
        let total_delays: Vec<f64> = delays.iter().map(DelayBreakdown::total).collect();
        let reward = slot_reward(&st.tasks, &total_delays)?;
        let queues = update_queues(&st.queues, &decisions, &st.tasks, compute);

        let usvs: Vec<UsvKinematics> = st
            .usvs
            .iter()
            .map(|u| gauss_markov_step(u, &self.cfg.mobility, &self.cfg.area, &mut self.rng))
            .collect();

        let tasks = std::mem::take(&mut self.state.tasks);
        self.phi += total_delays.iter().sum::<f64>();
        self.state.queues = queues;
        self.state.usvs = usvs;
        self.state.uavs = next_uavs;
        self.state.slot += 1;
        let done = self.is_done();
        if !done {
            self.state.tasks = self.draw_tasks();
        }

        Ok(StepOutcome {
            observations: self.observe_all(),
            reward,
            done,
            info: StepInfo {
                tasks,
                decisions,
                delays,
                total_delays,
                phi: self.phi,
            },
        })
    }
}

pub fn state_features(cfg: &EnvConfig, st: &GlobalState) -> Vec<f64> {
    let (xm, ym) = (cfg.area.x_max, cfg.area.y_max);
    let qs = cfg.observation.queue_scale_bits;
    let ds = cfg.observation.task_scale_bits;
    let mut out = Vec::with_capacity(cfg.counts.state_len());
    for (i, u) in st.usvs.iter().enumerate() {
        let d = st.tasks.get(i).map_or(0.0, |t| t.data_size);
        out.extend([u.position.x / xm, u.position.y / ym, st.queues.usv[i] / qs, d / ds]);
    }
    for (j, u) in st.uavs.iter().enumerate() {
        out.extend([u.position.x / xm, u.position.y / ym, st.queues.uav[j] / qs]);
    }
    for (k, g) in st.gss.iter().enumerate() {
        out.extend([g.x / xm, g.y / ym, st.queues.gs[k] / qs]);
    }
    out
}

fn with_identity(body: &[f64], agent: usize, agents: usize) -> Observation {
    let mut v = Vec::with_capacity(body.len() + agents);
    v.extend_from_slice(body);
    v.extend((0..agents).map(|a| if a == agent { 1.0 } else { 0.0 }));
    Observation(v)
}

pub fn observe(cfg: &EnvConfig, st: &GlobalState, id: AgentId) -> Result<Observation> {
    cfg.counts.kind(id)?;
    Ok(with_identity(&state_features(cfg, st), id.0, cfg.counts.agents()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_actions(c: Counts) -> Vec<AgentAction> {
        let mut v: Vec<AgentAction> = (0..c.usvs)
            .map(|_| {
                AgentAction::Usv(UsvAction {
                    uav_choice: None,
                    gs_choice: None,
                    split: [1.0, 0.0, 0.0],
                })
            })
            .collect();
        v.extend((0..c.uavs).map(|_| AgentAction::Uav(UavAction { azimuth: 0.0, distance: 0.0 })));
        v
    }

    #[test]
    fn reset_is_seeded_and_empty() {
        let a = Env::new(EnvConfig::standard()).unwrap();
        let b = Env::new(EnvConfig::standard()).unwrap();
        assert_eq!(a.state(), b.state());
        assert!(a.state().queues.usv.iter().all(|q| *q == 0.0));
        assert!(a.state().queues.uav.iter().all(|q| *q == 0.0));
        assert!(a.state().queues.gs.iter().all(|q| *q == 0.0));
        assert_eq!(a.state().slot, 0);
        let other = Env::new(EnvConfig {
            seed: 1,
            ..EnvConfig::standard()
        })
        .unwrap();
        assert_ne!(a.state().usvs, other.state().usvs);
    }

    #[test]
    fn observation_length_for_standard_scenario() {
        let env = Env::new(EnvConfig::standard()).unwrap();
        // 6 USVs x 4 + 4 UAVs x 3 + 2 GSs x 3 + 10 identity bits
        let expected = 6 * 4 + 4 * 3 + 2 * 3 + 10;
        assert_eq!(expected, 52);
        assert_eq!(env.counts().observation_len(), expected);
        for obs in env.observe_all() {
            assert_eq!(obs.len(), expected);
        }
    }

    #[test]
    fn same_class_agents_differ_only_in_identity() {
        let env = Env::new(EnvConfig::standard()).unwrap();
        let a = env.observe(AgentId(0)).unwrap();
        let b = env.observe(AgentId(1)).unwrap();
        let body = env.counts().state_len();
        assert_eq!(a.0[..body], b.0[..body]);
        assert_ne!(a.0[body..], b.0[body..]);
        assert_eq!(a.0[body], 1.0);
        assert_eq!(b.0[body + 1], 1.0);
        assert!(env.observe(AgentId(10)).is_err());
    }

    #[test]
    fn positions_normalize_into_unit_square() {
        let mut cfg = EnvConfig::standard();
        cfg.uav_spawn = Some(vec![[1000.0, 1000.0], [0.0, 0.0], [1000.0, 0.0], [0.0, 1000.0]]);
        let env = Env::new(cfg).unwrap();
        let c = env.counts();
        let obs = env.observe(AgentId(0)).unwrap();
        assert!(obs.0.iter().all(|v| v.is_finite()));
        for i in 0..c.usvs {
            let base = i * USV_FEATURES;
            assert!((0.0..=1.0).contains(&obs.0[base]) && (0.0..=1.0).contains(&obs.0[base + 1]));
        }
        let uav0 = c.usvs * USV_FEATURES;
        assert_eq!(&obs.0[uav0..uav0 + 2], &[1.0, 1.0]);
    }

    #[test]
    fn all_local_reward_matches_formula() {
        let mut env = Env::new(EnvConfig::standard()).unwrap();
        let c = env.counts();
        let tasks = env.state().tasks.clone();
        let out = env.step(&local_actions(c)).unwrap();
        let f = env.config().compute.f_usv;
        // Empty queues: delay is d·c/f per USV.
        let expected: f64 = tasks
            .iter()
            .filter(|t| t.data_size > 0.0)
            .map(|t| t.data_size / (t.data_size * t.cycles_per_bit / f))
            .sum();
        assert!((out.reward - expected).abs() <= 1e-9 * expected);
        assert!(env.state().queues.uav.iter().all(|q| *q == 0.0));
        assert!(env.state().queues.gs.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn zero_tasks_give_zero_reward() {
        let mut cfg = EnvConfig::standard();
        cfg.compute.mean_arrival_mbit = 0.0;
        cfg.horizon = 3;
        let mut env = Env::new(cfg).unwrap();
        let c = env.counts();
        for t in 0..3 {
            let out = env.step(&local_actions(c)).unwrap();
            assert_eq!(out.reward, 0.0);
            assert_eq!(out.done, t == 2);
        }
        assert!(env.step(&local_actions(c)).is_err());
    }

    #[test]
    fn malformed_actions_are_rejected() {
        let mut env = Env::new(EnvConfig::standard()).unwrap();
        let c = env.counts();
        let mut acts = local_actions(c);
        assert!(env.step(&acts[1..]).is_err());
        acts[0] = AgentAction::Usv(UsvAction {
            uav_choice: None,
            gs_choice: None,
            split: [f64::NAN, 0.0, 0.0],
        });
        assert!(env.step(&acts).is_err());
        let mut acts = local_actions(c);
        acts[c.usvs] = AgentAction::Uav(UavAction {
            azimuth: 1.0,
            distance: 31.0,
        });
        assert!(env.step(&acts).is_err());
        let mut acts = local_actions(c);
        acts[0] = AgentAction::Usv(UsvAction {
            uav_choice: Some(4),
            gs_choice: None,
            split: [0.0, 1.0, 0.0],
        });
        assert!(env.step(&acts).is_err());
        acts.swap(0, c.usvs);
        assert!(env.step(&acts).is_err());
        // Nothing above advanced the slot.
        assert_eq!(env.state().slot, 0);
    }
}
