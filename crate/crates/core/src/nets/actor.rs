use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{ActionDistribution, HeadVars, LatentAction};
use super::params::{Linear, ParamSet, TanhMlp};
use super::NetConfig;
use crate::autodiff::{Tape, Tensor, Var};
use crate::env::{AgentId, AgentKind, Counts, Observation, NODE_FEATURES, USV_FEATURES};
use crate::error::{Error, Result};
use crate::rng::{stream, tags};

/// Width of one entity token: x, y, queue, task, three type flags, self flag.
pub const TOKEN_FEATURES: usize = 8;

/// Scale on freshly initialised output layers, so first policies are close to
/// uniform.
const HEAD_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorArch {
    Attention,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
struct HeadBlock {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone, PartialEq)]
struct AttentionBody {
    embed: Linear,
    blocks: Vec<HeadBlock>,
    d_head: usize,
    ff: Linear,
    trunk: Linear,
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Mlp(TanhMlp),
    Attention(AttentionBody),
}

#[derive(Debug, Clone, PartialEq)]
enum Heads {
    Usv { uav: Linear, gs: Linear, split: Linear, log_std: usize },
    Uav { mean: Linear, log_std: usize },
}

/// Policy network of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorNet {
    arch: ActorArch,
    counts: Counts,
    agent: AgentId,
    kind: AgentKind,
    k_max: f64,
    params: ParamSet,
    body: Body,
    heads: Heads,
}

impl ActorNet {
    /// Initialise from the actor stream of `seed` for this agent.
    pub fn new(
        arch: ActorArch,
        counts: Counts,
        agent: AgentId,
        k_max: f64,
        cfg: &NetConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let kind = counts.kind(agent)?;
        let mut rng = stream(seed, &[tags::ACTOR_INIT, agent.0 as u64]);
        let mut ps = ParamSet::new();
        let body = match arch {
            ActorArch::Mlp => Body::Mlp(TanhMlp::new(
                &mut ps,
                "mlp",
                &[counts.observation_len(), cfg.hidden, cfg.hidden],
                &mut rng,
            )),
            ActorArch::Attention => Body::Attention(attention_body(&mut ps, cfg, &mut rng)),
        };
        let h = cfg.hidden;
        let heads = match kind {
            AgentKind::Usv(_) => Heads::Usv {
                uav: Linear::new(&mut ps, "head.uav", h, counts.uavs + 1, HEAD_GAIN, &mut rng),
                gs: Linear::new(&mut ps, "head.gs", h, counts.gss + 1, HEAD_GAIN, &mut rng),
                split: Linear::new(&mut ps, "head.split", h, 3, HEAD_GAIN, &mut rng),
                log_std: ps.add("head.split_log_std", Tensor::full(&[1, 3], cfg.init_log_std)),
            },
            AgentKind::Uav(_) => Heads::Uav {
                mean: Linear::new(&mut ps, "head.move", h, 2, HEAD_GAIN, &mut rng),
                log_std: ps.add("head.move_log_std", Tensor::full(&[1, 2], cfg.init_log_std)),
            },
        };
        Ok(Self { arch, counts, agent, kind, k_max, params: ps, body, heads })
    }

    pub fn arch(&self) -> ActorArch {
        self.arch
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_obs(&self, obs: &Observation) -> Result<()> {
        let want = self.counts.observation_len();
        if obs.len() != want {
            return Err(Error::Shape { op: "actor observation", lhs: vec![obs.len()], rhs: vec![want] });
        }
        Ok(())
    }

    /// One row per entity: USVs, then UAVs, then GSs.
    pub fn tokens(&self, obs: &Observation) -> Result<Tensor> {
        self.check_obs(obs)?;
        let c = self.counts;
        let o = obs.as_slice();
        let me = self.agent.0;
        let mut rows = Vec::with_capacity(c.usvs + c.uavs + c.gss);
        for i in 0..c.usvs {
            let f = &o[i * USV_FEATURES..(i + 1) * USV_FEATURES];
            rows.push(vec![f[0], f[1], f[2], f[3], 1.0, 0.0, 0.0, flag(i == me)]);
        }
        let base = c.usvs * USV_FEATURES;
        for j in 0..c.uavs + c.gss {
            let f = &o[base + j * NODE_FEATURES..base + (j + 1) * NODE_FEATURES];
            let uav = j < c.uavs;
            let me_here = uav && c.usvs + j == me;
            rows.push(vec![f[0], f[1], f[2], 0.0, 0.0, flag(uav), flag(!uav), flag(me_here)]);
        }
        Tensor::from_rows(&rows)
    }

    fn attention_pool(
        &self,
        body: &AttentionBody,
        tape: &mut Tape,
        bound: &[Var],
        tokens: Tensor,
    ) -> Result<(Var, Var)> {
        let n = tokens.shape()[0];
        let self_row = self.self_token_index();
        let x = tape.constant(tokens);
        let e = body.embed.forward(tape, bound, x)?;
        let mut outs = Vec::with_capacity(body.blocks.len());
        for b in &body.blocks {
            let q = b.q.forward(tape, bound, e)?;
            let k = b.k.forward(tape, bound, e)?;
            let v = b.v.forward(tape, bound, e)?;
            let a = tape.scaled_dot_attention(q, k, v, body.d_head)?;
            outs.push(b.o.forward(tape, bound, a)?);
        }
        let attn = tape.add_n(&outs)?;
        let r = tape.add(e, attn)?;
        let f = body.ff.forward(tape, bound, r)?;
        let h = tape.tanh(f);
        let mean_row = tape.constant(Tensor::full(&[1, n], 1.0 / n as f64));
        let pooled = tape.matmul(mean_row, h)?;
        let mut pick = vec![0.0; n];
        pick[self_row] = 1.0;
        let pick = tape.constant(Tensor::row(&pick));
        let own = tape.matmul(pick, h)?;
        Ok((pooled, own))
    }

    fn self_token_index(&self) -> usize {
        self.agent.0
    }

    /// Mean-pooled entity features after attention, as a plain row.
    pub fn pooled_features(&self, tokens: &Tensor) -> Result<Vec<f64>> {
        let Body::Attention(body) = &self.body else {
            return Err(Error::Contract("pooled features need the attention actor".into()));
        };
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let (pooled, _) = self.attention_pool(body, &mut tape, &bound, tokens.clone())?;
        Ok(tape.value(pooled).data().to_vec())
    }

    /// Forward pass on `tape` with parameters already bound there.
    pub fn heads(&self, tape: &mut Tape, bound: &[Var], obs: &Observation) -> Result<HeadVars> {
        self.check_obs(obs)?;
        let feat = match &self.body {
            Body::Mlp(mlp) => {
                let x = tape.constant(Tensor::row(obs.as_slice()));
                mlp.forward(tape, bound, x)?
            }
            Body::Attention(body) => {
                let tokens = self.tokens(obs)?;
                let (pooled, own) = self.attention_pool(body, tape, bound, tokens)?;
                let z = tape.concat_cols(pooled, own)?;
                let t = body.trunk.forward(tape, bound, z)?;
                tape.tanh(t)
            }
        };
        Ok(match &self.heads {
            Heads::Usv { uav, gs, split, log_std } => HeadVars::Usv {
                uav_logits: uav.forward(tape, bound, feat)?,
                gs_logits: gs.forward(tape, bound, feat)?,
                split_mean: split.forward(tape, bound, feat)?,
                split_log_std: bound[*log_std],
            },
            Heads::Uav { mean, log_std } => HeadVars::Uav {
                mean: mean.forward(tape, bound, feat)?,
                log_std: bound[*log_std],
                k_max: self.k_max,
            },
        })
    }

    pub fn distribution(&self, obs: &Observation) -> Result<ActionDistribution> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let h = self.heads(&mut tape, &bound, obs)?;
        Ok(h.distribution(&tape))
    }

    /// Log-prob of a stored latent action, evaluated on a tape exactly as
    /// during training.
    pub fn log_prob(&self, obs: &Observation, a: &LatentAction) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let h = self.heads(&mut tape, &bound, obs)?;
        let lp = h.log_prob(&mut tape, a)?;
        Ok(tape.item(lp))
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn attention_body<R: Rng + ?Sized>(ps: &mut ParamSet, cfg: &NetConfig, rng: &mut R) -> AttentionBody {
    let d = cfg.d_model;
    let d_head = d / cfg.heads;
    let embed = Linear::new(ps, "attn.embed", TOKEN_FEATURES, d, 1.0, rng);
    let blocks = (0..cfg.heads)
        .map(|h| HeadBlock {
            q: Linear::new(ps, &format!("attn.h{h}.q"), d, d_head, 1.0, rng),
            k: Linear::new(ps, &format!("attn.h{h}.k"), d, d_head, 1.0, rng),
            v: Linear::new(ps, &format!("attn.h{h}.v"), d, d_head, 1.0, rng),
            o: Linear::new(ps, &format!("attn.h{h}.o"), d_head, d, 1.0, rng),
        })
        .collect();
    let ff = Linear::new(ps, "attn.ff", d, cfg.hidden, 1.0, rng);
    let trunk = Linear::new(ps, "attn.trunk", 2 * cfg.hidden, cfg.hidden, 1.0, rng);
    AttentionBody { embed, blocks, d_head, ff, trunk }
}
