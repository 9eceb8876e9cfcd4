use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::env::{AgentAction, AgentId, AgentKind, Env, UavAction, UsvAction};
use crate::error::Result;
use crate::world::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicPolicy {
    Random,
    AllLocal,
    GreedyNearest,
}

impl HeuristicPolicy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::AllLocal => "all-local",
            Self::GreedyNearest => "greedy-nearest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Random, Self::AllLocal, Self::GreedyNearest].into_iter().find(|p| p.name() == s)
    }
}

/// Split used by the greedy baseline: local, UAV, GS.
pub const GREEDY_SPLIT: [f64; 3] = [0.2, 0.5, 0.3];

fn nearest(from: Vec3, sites: impl Iterator<Item = Vec3>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in sites.enumerate() {
        let d = from.horizontal_distance(&p);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Action of one agent under a fixed rule.
pub fn heuristic_action<R: Rng + ?Sized>(
    policy: HeuristicPolicy,
    env: &Env,
    agent: AgentId,
    rng: &mut R,
) -> Result<AgentAction> {
    let c = env.counts();
    let st = env.state();
    let k_max = env.config().area.k_max;
    Ok(match (policy, c.kind(agent)?) {
        (HeuristicPolicy::Random, AgentKind::Usv(_)) => {
            let pick = |rng: &mut R, n: usize| rng.random_range(0..=n).checked_sub(1);
            let uav_choice = pick(rng, c.uavs);
            let gs_choice = pick(rng, c.gss);
            // Uniform on the simplex: normalised exponentials.
            let e: [f64; 3] = std::array::from_fn(|_| Exp1.sample(rng));
            let s = e.iter().sum::<f64>();
            AgentAction::Usv(UsvAction { uav_choice, gs_choice, split: e.map(|v| v / s) })
        }
        (HeuristicPolicy::Random, AgentKind::Uav(_)) => AgentAction::Uav(UavAction {
            azimuth: rng.random_range(0.0..=TAU),
            distance: rng.random_range(0.0..=k_max),
        }),
        (HeuristicPolicy::AllLocal, AgentKind::Usv(_)) => AgentAction::Usv(UsvAction {
            uav_choice: None,
            gs_choice: None,
            split: [1.0, 0.0, 0.0],
        }),
        (HeuristicPolicy::AllLocal, AgentKind::Uav(_)) => {
            AgentAction::Uav(UavAction { azimuth: 0.0, distance: 0.0 })
        }
        (HeuristicPolicy::GreedyNearest, AgentKind::Usv(i)) => {
            let me = st.usvs[i].position;
            AgentAction::Usv(UsvAction {
                uav_choice: nearest(me, st.uavs.iter().map(|u| u.position)),
                gs_choice: nearest(me, st.gss.iter().copied()),
                split: GREEDY_SPLIT,
            })
        }
        (HeuristicPolicy::GreedyNearest, AgentKind::Uav(j)) => {
            let n = st.usvs.len() as f64;
            let cx = st.usvs.iter().map(|u| u.position.x).sum::<f64>() / n;
            let cy = st.usvs.iter().map(|u| u.position.y).sum::<f64>() / n;
            let p = st.uavs[j].position;
            let (dx, dy) = (cx - p.x, cy - p.y);
            let azimuth = dy.atan2(dx).rem_euclid(TAU);
            AgentAction::Uav(UavAction { azimuth, distance: k_max.min(dx.hypot(dy)) })
        }
    })
}

pub fn heuristic_joint<R: Rng + ?Sized>(
    policy: HeuristicPolicy,
    env: &Env,
    rng: &mut R,
) -> Result<Vec<AgentAction>> {
    (0..env.counts().agents())
        .map(|a| heuristic_action(policy, env, AgentId(a), rng))
        .collect()
}
