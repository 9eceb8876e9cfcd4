use rand::seq::SliceRandom;
use rand::Rng;

use super::algo::{happo_clip_objective, pg_objective};
use super::config::{HappoConfig, Objective};
use super::rollout::AgentRecord;
use crate::autodiff::{clip_grad_norm, Adam, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nets::{d_loss, g_adv_loss, g_value_loss, ActorNet, DiscriminatorNet, GeneratorNet};

/// Shuffled index chunks covering `0..n`.
fn minibatches<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let size = n.div_ceil(count.max(1)).max(1);
    idx.chunks(size).map(<[usize]>::to_vec).collect()
}

fn ensure_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} = {v}")))
    }
}

/// Surrogate of one agent on given samples, without entropy. Used for
/// diagnostics and tests.
pub fn surrogate(
    actor: &ActorNet,
    samples: &[&AgentRecord],
    m: &[f64],
    cfg: &HappoConfig,
    objective: Objective,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = actor.params().bind(&mut tape, false);
    let mut lps = Vec::with_capacity(samples.len());
    for s in samples {
        let h = actor.heads(&mut tape, &bound, &s.obs)?;
        lps.push(h.log_prob(&mut tape, &s.latent)?);
    }
    let lp = tape.stack(&lps)?;
    let obj = match objective {
        Objective::Clip => {
            let old: Vec<f64> = samples.iter().map(|s| s.log_prob).collect();
            let old = tape.constant(Tensor::row(&old));
            let d = tape.sub(lp, old)?;
            let ratio = tape.exp(d);
            happo_clip_objective(&mut tape, ratio, m, cfg.clip)?
        }
        Objective::PolicyGradient => pg_objective(&mut tape, lp, m)?,
    };
    Ok(tape.item(obj))
}

/// Ascend the agent's surrogate weighted by `m` (one entry per sample).
/// Returns the number of optimizer steps taken.
pub fn happo_agent_update<R: Rng + ?Sized>(
    actor: &mut ActorNet,
    opt: &mut Adam,
    samples: &[&AgentRecord],
    m: &[f64],
    cfg: &HappoConfig,
    objective: Objective,
    rng: &mut R,
) -> Result<usize> {
    if samples.len() != m.len() {
        return Err(Error::Shape { op: "agent update", lhs: vec![samples.len()], rhs: vec![m.len()] });
    }
    let epochs = match objective {
        Objective::Clip => cfg.epochs,
        Objective::PolicyGradient => 1,
    };
    let mut steps = 0;
    for epoch in 0..epochs {
        for batch in minibatches(samples.len(), cfg.minibatches, rng) {
            let mut tape = Tape::new();
            let bound = actor.params().bind(&mut tape, true);
            let mut lps = Vec::with_capacity(batch.len());
            let mut ents = Vec::with_capacity(batch.len());
            for &i in &batch {
                let h = actor.heads(&mut tape, &bound, &samples[i].obs)?;
                lps.push(h.log_prob(&mut tape, &samples[i].latent)?);
                ents.push(h.entropy(&mut tape)?);
            }
            let lp = tape.stack(&lps)?;
            let mb: Vec<f64> = batch.iter().map(|&i| m[i]).collect();
            let obj = match objective {
                Objective::Clip => {
                    let old: Vec<f64> = batch.iter().map(|&i| samples[i].log_prob).collect();
                    let old = tape.constant(Tensor::row(&old));
                    let d = tape.sub(lp, old)?;
                    let ratio = tape.exp(d);
                    happo_clip_objective(&mut tape, ratio, &mb, cfg.clip)?
                }
                Objective::PolicyGradient => pg_objective(&mut tape, lp, &mb)?,
            };
            let ent = tape.stack(&ents)?;
            let ent = tape.mean(ent);
            let bonus = tape.scale(ent, cfg.entropy_coef);
            let total = tape.add(obj, bonus)?;
            let loss = tape.neg(total);
            let lv = tape.item(loss);
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!(
                    "actor loss of agent {} at epoch {epoch}: objective {}, entropy {}",
                    actor.agent().0,
                    tape.item(obj),
                    tape.item(ent)
                )));
            }
            tape.backward(loss)?;
            let mut grads = actor.params().grads(&tape, &bound);
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            opt.step(actor.params_mut().tensors_mut(), &grads);
            steps += 1;
        }
    }
    Ok(steps)
}

/// Losses seen during one critic update, averaged over minibatches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriticStats {
    pub value_loss: f64,
    pub d_loss: f64,
}

/// Discriminator side of the GAN critic.
pub struct Adversary<'a> {
    pub disc: &'a mut DiscriminatorNet,
    pub opt: &'a mut Adam,
}

fn column(v: &[f64]) -> Result<Tensor> {
    Tensor::new(vec![v.len(), 1], v.to_vec())
}

/// One discriminator step on real `(s, R̂)` against fake `(s, G(s))`.
pub fn discriminator_step(
    disc: &mut DiscriminatorNet,
    opt: &mut Adam,
    gen: &GeneratorNet,
    states: &[Vec<f64>],
    returns: &[f64],
    max_grad_norm: f64,
) -> Result<f64> {
    let fake = gen.values(states)?;
    let mut tape = Tape::new();
    let bound = disc.params().bind(&mut tape, true);
    let s = tape.constant(Tensor::from_rows(states)?);
    let real = tape.constant(column(returns)?);
    let fake = tape.constant(column(&fake)?);
    let pr = disc.forward(&mut tape, &bound, s, real)?;
    let pf = disc.forward(&mut tape, &bound, s, fake)?;
    let loss = d_loss(&mut tape, pr, pf)?;
    let lv = tape.item(loss);
    ensure_finite("discriminator loss", lv)?;
    tape.backward(loss)?;
    let mut grads = disc.params().grads(&tape, &bound);
    clip_grad_norm(&mut grads, max_grad_norm);
    opt.step(disc.params_mut().tensors_mut(), &grads);
    Ok(lv)
}

/// One generator step on `value loss + adv_weight · adversarial loss`. With
/// no adversary or zero weight this is plain value regression.
pub fn generator_step(
    gen: &mut GeneratorNet,
    opt: &mut Adam,
    disc: Option<&DiscriminatorNet>,
    states: &[Vec<f64>],
    returns: &[f64],
    adv_weight: f64,
    max_grad_norm: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = gen.params().bind(&mut tape, true);
    let s = tape.constant(Tensor::from_rows(states)?);
    let r = tape.constant(column(returns)?);
    let v = gen.forward(&mut tape, &bound, s)?;
    let vl = g_value_loss(&mut tape, v, r)?;
    let loss = match disc {
        Some(d) if adv_weight > 0.0 => {
            let dbound = d.params().bind(&mut tape, false);
            let p = d.forward(&mut tape, &dbound, s, v)?;
            let adv = g_adv_loss(&mut tape, p);
            let adv = tape.scale(adv, adv_weight);
            tape.add(vl, adv)?
        }
        _ => vl,
    };
    let value_loss = tape.item(vl);
    ensure_finite("generator loss", tape.item(loss))?;
    tape.backward(loss)?;
    let mut grads = gen.params().grads(&tape, &bound);
    clip_grad_norm(&mut grads, max_grad_norm);
    opt.step(gen.params_mut().tensors_mut(), &grads);
    Ok(value_loss)
}

/// Critic update over the whole buffer: per minibatch, a discriminator step
/// (GAN critic only) followed by a generator step.
pub fn update_critic<R: Rng + ?Sized>(
    gen: &mut GeneratorNet,
    g_opt: &mut Adam,
    mut adversary: Option<Adversary<'_>>,
    states: &[Vec<f64>],
    returns: &[f64],
    cfg: &HappoConfig,
    rng: &mut R,
) -> Result<CriticStats> {
    let mut stats = CriticStats::default();
    let mut count = 0usize;
    for _ in 0..cfg.epochs {
        for batch in minibatches(states.len(), cfg.minibatches, rng) {
            let s: Vec<Vec<f64>> = batch.iter().map(|&i| states[i].clone()).collect();
            let r: Vec<f64> = batch.iter().map(|&i| returns[i]).collect();
            if let Some(a) = adversary.as_mut() {
                stats.d_loss += discriminator_step(a.disc, a.opt, gen, &s, &r, cfg.max_grad_norm)?;
            }
            let disc = adversary.as_ref().map(|a| &*a.disc);
            stats.value_loss +=
                generator_step(gen, g_opt, disc, &s, &r, cfg.adv_weight, cfg.max_grad_norm)?;
            count += 1;
        }
    }
    stats.value_loss /= count as f64;
    stats.d_loss /= count as f64;
    Ok(stats)
}
