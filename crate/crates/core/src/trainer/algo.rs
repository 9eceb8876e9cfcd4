//! Numerical pieces of the update: GAE, advantage normalisation, agent
//! ordering, the clipped surrogate and the M-factor chain.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Advantages and value targets for one episode. `values` has one more
/// entry than `rewards`; `dones[t]` cuts the bootstrap from `t + 1`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    discount: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_len = rewards.len();
    if values.len() != t_len + 1 || dones.len() != t_len {
        return Err(Error::Shape {
            op: "compute_gae",
            lhs: vec![rewards.len(), dones.len()],
            rhs: vec![values.len()],
        });
    }
    let mut adv = vec![0.0; t_len];
    let mut gae = 0.0;
    for t in (0..t_len).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + discount * values[t + 1] * live - values[t];
        gae = delta + discount * lambda * live * gae;
        adv[t] = gae;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shift and scale to mean 0, standard deviation 1. A constant batch maps
/// to zeros.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return Vec::new();
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; adv.len()];
    }
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Uniformly random update order over `0..n`.
pub fn permute_agents<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// `mean(min(r M, clip(r, 1-ε, 1+ε) M))` on plain numbers.
pub fn clip_objective_value(ratio: &[f64], m: &[f64], eps: f64) -> f64 {
    ratio
        .iter()
        .zip(m)
        .map(|(r, m)| (r * m).min(r.clamp(1.0 - eps, 1.0 + eps) * m))
        .sum::<f64>()
        / ratio.len() as f64
}

/// Differentiable clip objective; `ratio` is a `1 × n` row on the tape.
pub fn happo_clip_objective(tape: &mut Tape, ratio: Var, m: &[f64], eps: f64) -> Result<Var> {
    let mv = tape.constant(Tensor::row(m));
    let unclipped = tape.mul(ratio, mv)?;
    let rc = tape.clamp(ratio, 1.0 - eps, 1.0 + eps);
    let clipped = tape.mul(rc, mv)?;
    let both = tape.minimum(unclipped, clipped)?;
    Ok(tape.mean(both))
}

/// Ratio-free surrogate `mean(M log π)` used by the A2C-style ablation.
pub fn pg_objective(tape: &mut Tape, log_probs: Var, m: &[f64]) -> Result<Var> {
    let mv = tape.constant(Tensor::row(m));
    let w = tape.mul(log_probs, mv)?;
    Ok(tape.mean(w))
}

/// Fold one updated agent into the chain: `M ← exp(new - old) · M`.
pub fn update_m_factor(m: &[f64], new_log_probs: &[f64], old_log_probs: &[f64]) -> Result<Vec<f64>> {
    if m.len() != new_log_probs.len() || m.len() != old_log_probs.len() {
        return Err(Error::Shape {
            op: "update_m_factor",
            lhs: vec![m.len(), new_log_probs.len()],
            rhs: vec![old_log_probs.len()],
        });
    }
    m.iter()
        .zip(new_log_probs.iter().zip(old_log_probs))
        .enumerate()
        .map(|(i, (m, (new, old)))| {
            if !old.is_finite() || *old == f64::NEG_INFINITY {
                return Err(Error::NonFinite(format!(
                    "sample {i}: old policy gives the stored action zero probability"
                )));
            }
            let out = (new - old).exp() * m;
            if out.is_finite() {
                Ok(out)
            } else {
                Err(Error::NonFinite(format!("M-factor at sample {i}")))
            }
        })
        .collect()
}
