use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Axis, Tape, Tensor, Var};
use crate::env::{AgentAction, UavAction, UsvAction};
use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)`, stable for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Heading in `[0, 2π]` from a latent value.
pub fn squash_azimuth(u: f64) -> f64 {
    PI * (1.0 + u.tanh())
}

/// Distance in `[0, k_max]` from a latent value.
pub fn squash_distance(u: f64, k_max: f64) -> f64 {
    0.5 * k_max * (1.0 + u.tanh())
}

/// `ln |dθ/du| + ln |dk/du|` for the two UAV squashes.
pub fn uav_log_det(u: [f64; 2], k_max: f64) -> f64 {
    PI.ln() + log_one_minus_tanh_sq(u[0]) + (0.5 * k_max).ln() + log_one_minus_tanh_sq(u[1])
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lz = xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
    xs.iter().map(|x| x - lz).collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Pre-squash draw from a policy. Categorical indices use 0 for "none".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatentAction {
    Usv { uav: usize, gs: usize, split: [f64; 3] },
    Uav { u: [f64; 2] },
}

/// Policy output for one agent and one observation.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    /// Two categoricals plus a logistic-normal split: a Gaussian latent
    /// mapped onto the simplex by softmax.
    Usv {
        uav_logits: Vec<f64>,
        gs_logits: Vec<f64>,
        split_mean: [f64; 3],
        split_log_std: [f64; 3],
    },
    /// Gaussian latent for (θ, k), tanh-squashed into range.
    Uav {
        mean: [f64; 2],
        log_std: [f64; 2],
        k_max: f64,
    },
}

impl ActionDistribution {
    pub fn uav_probs(&self) -> Option<Vec<f64>> {
        match self {
            Self::Usv { uav_logits, .. } => Some(softmax(uav_logits)),
            Self::Uav { .. } => None,
        }
    }

    pub fn gs_probs(&self) -> Option<Vec<f64>> {
        match self {
            Self::Usv { gs_logits, .. } => Some(softmax(gs_logits)),
            Self::Uav { .. } => None,
        }
    }

    /// Split at the latent mean.
    pub fn split_mode(&self) -> Option<[f64; 3]> {
        match self {
            Self::Usv { split_mean, .. } => {
                let p = softmax(split_mean);
                Some([p[0], p[1], p[2]])
            }
            Self::Uav { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentAction {
        match self {
            Self::Usv { uav_logits, gs_logits, split_mean, split_log_std } => {
                let uav = sample_categorical(&softmax(uav_logits), rng);
                let gs = sample_categorical(&softmax(gs_logits), rng);
                let mut split = [0.0; 3];
                for i in 0..3 {
                    let w: f64 = rng.sample(StandardNormal);
                    split[i] = split_mean[i] + split_log_std[i].exp() * w;
                }
                LatentAction::Usv { uav, gs, split }
            }
            Self::Uav { mean, log_std, .. } => {
                let mut u = [0.0; 2];
                for i in 0..2 {
                    let w: f64 = rng.sample(StandardNormal);
                    u[i] = mean[i] + log_std[i].exp() * w;
                }
                LatentAction::Uav { u }
            }
        }
    }

    /// Greedy choice: argmax categories, Gaussian means.
    pub fn mode(&self) -> LatentAction {
        match self {
            Self::Usv { uav_logits, gs_logits, split_mean, .. } => LatentAction::Usv {
                uav: argmax(uav_logits),
                gs: argmax(gs_logits),
                split: *split_mean,
            },
            Self::Uav { mean, .. } => LatentAction::Uav { u: *mean },
        }
    }

    /// Log-density of the squashed action. For USVs the split density is
    /// that of the latent.
    pub fn log_prob(&self, a: &LatentAction) -> Result<f64> {
        match (self, a) {
            (
                Self::Usv { uav_logits, gs_logits, split_mean, split_log_std },
                LatentAction::Usv { uav, gs, split },
            ) => {
                let lu = log_softmax(uav_logits);
                let lg = log_softmax(gs_logits);
                let (Some(a), Some(b)) = (lu.get(*uav), lg.get(*gs)) else {
                    return Err(Error::Contract(format!("choice ({uav}, {gs}) outside the heads")));
                };
                Ok(a + b + gaussian_log_prob(split, split_mean, split_log_std))
            }
            (Self::Uav { mean, log_std, k_max }, LatentAction::Uav { u }) => {
                Ok(gaussian_log_prob(u, mean, log_std) - uav_log_det(*u, *k_max))
            }
            _ => Err(Error::Contract("action kind does not match distribution".into())),
        }
    }

    /// Entropy of the categoricals plus the Gaussian latents.
    pub fn entropy(&self) -> f64 {
        let cat = |l: &[f64]| -> f64 {
            softmax(l).iter().zip(log_softmax(l)).map(|(p, lp)| -p * lp).sum()
        };
        let gauss = |ls: &[f64]| -> f64 { ls.iter().map(|s| s + 0.5 + HALF_LN_2PI).sum() };
        match self {
            Self::Usv { uav_logits, gs_logits, split_log_std, .. } => {
                cat(uav_logits) + cat(gs_logits) + gauss(split_log_std)
            }
            Self::Uav { log_std, .. } => gauss(log_std),
        }
    }

    /// Map a latent draw to an environment action.
    pub fn to_action(&self, a: &LatentAction) -> Result<AgentAction> {
        match (self, a) {
            (Self::Usv { .. }, LatentAction::Usv { uav, gs, split }) => {
                let p = softmax(split);
                Ok(AgentAction::Usv(UsvAction {
                    uav_choice: uav.checked_sub(1),
                    gs_choice: gs.checked_sub(1),
                    split: [p[0], p[1], p[2]],
                }))
            }
            (Self::Uav { k_max, .. }, LatentAction::Uav { u }) => Ok(AgentAction::Uav(UavAction {
                azimuth: squash_azimuth(u[0]),
                distance: squash_distance(u[1], *k_max),
            })),
            _ => Err(Error::Contract("action kind does not match distribution".into())),
        }
    }

    /// Draw, squash and score in one go.
    pub fn sample_and_squash<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(AgentAction, LatentAction, f64)> {
        let latent = self.sample(rng);
        Ok((self.to_action(&latent)?, latent, self.log_prob(&latent)?))
    }
}

/// Head outputs still on the tape, so log-probs and entropy can be
/// differentiated. All tensors are single rows.
#[derive(Debug, Clone, Copy)]
pub enum HeadVars {
    Usv { uav_logits: Var, gs_logits: Var, split_mean: Var, split_log_std: Var },
    Uav { mean: Var, log_std: Var, k_max: f64 },
}

fn row_values(tape: &Tape, v: Var) -> Vec<f64> {
    tape.value(v).data().to_vec()
}

fn gaussian_log_prob_var(tape: &mut Tape, x: &[f64], mean: Var, log_std: Var) -> Result<Var> {
    let xv = tape.constant(Tensor::row(x));
    let diff = tape.sub(xv, mean)?;
    let neg_ls = tape.neg(log_std);
    let inv = tape.exp(neg_ls);
    let z = tape.mul(diff, inv)?;
    let z2 = tape.mul(z, z)?;
    let quad = tape.sum(z2);
    let quad = tape.scale(quad, -0.5);
    let ls = tape.sum(log_std);
    let lp = tape.sub(quad, ls)?;
    Ok(tape.add_scalar(lp, -(x.len() as f64) * HALF_LN_2PI))
}

fn pick(tape: &mut Tape, logits: Var, index: usize) -> Result<Var> {
    let n = tape.value(logits).numel();
    if index >= n {
        return Err(Error::Contract(format!("choice {index} outside a head of {n}")));
    }
    let ls = tape.log_softmax(logits, Axis::Cols)?;
    tape.slice_cols(ls, index, 1)
}

impl HeadVars {
    pub fn distribution(&self, tape: &Tape) -> ActionDistribution {
        let arr3 = |v: Vec<f64>| [v[0], v[1], v[2]];
        let arr2 = |v: Vec<f64>| [v[0], v[1]];
        match *self {
            Self::Usv { uav_logits, gs_logits, split_mean, split_log_std } => ActionDistribution::Usv {
                uav_logits: row_values(tape, uav_logits),
                gs_logits: row_values(tape, gs_logits),
                split_mean: arr3(row_values(tape, split_mean)),
                split_log_std: arr3(row_values(tape, split_log_std)),
            },
            Self::Uav { mean, log_std, k_max } => ActionDistribution::Uav {
                mean: arr2(row_values(tape, mean)),
                log_std: arr2(row_values(tape, log_std)),
                k_max,
            },
        }
    }

    /// Scalar log-prob of `a`; same value as [`ActionDistribution::log_prob`].
    pub fn log_prob(&self, tape: &mut Tape, a: &LatentAction) -> Result<Var> {
        match (*self, a) {
            (
                Self::Usv { uav_logits, gs_logits, split_mean, split_log_std },
                LatentAction::Usv { uav, gs, split },
            ) => {
                let a = pick(tape, uav_logits, *uav)?;
                let b = pick(tape, gs_logits, *gs)?;
                let c = gaussian_log_prob_var(tape, split, split_mean, split_log_std)?;
                let ab = tape.add(a, b)?;
                let ab = tape.sum(ab);
                tape.add(ab, c)
            }
            (Self::Uav { mean, log_std, k_max }, LatentAction::Uav { u }) => {
                let lp = gaussian_log_prob_var(tape, u, mean, log_std)?;
                Ok(tape.add_scalar(lp, -uav_log_det(*u, k_max)))
            }
            _ => Err(Error::Contract("action kind does not match distribution".into())),
        }
    }

    pub fn entropy(&self, tape: &mut Tape) -> Result<Var> {
        let cat = |tape: &mut Tape, l: Var| -> Result<Var> {
            let p = tape.softmax(l, Axis::Cols)?;
            let lp = tape.log_softmax(l, Axis::Cols)?;
            let plp = tape.mul(p, lp)?;
            let s = tape.sum(plp);
            Ok(tape.neg(s))
        };
        let gauss = |tape: &mut Tape, ls: Var| -> Var {
            let n = tape.value(ls).numel() as f64;
            let s = tape.sum(ls);
            tape.add_scalar(s, n * (0.5 + HALF_LN_2PI))
        };
        match *self {
            Self::Usv { uav_logits, gs_logits, split_log_std, .. } => {
                let a = cat(tape, uav_logits)?;
                let b = cat(tape, gs_logits)?;
                let c = gauss(tape, split_log_std);
                tape.add_n(&[a, b, c])
            }
            Self::Uav { log_std, .. } => Ok(gauss(tape, log_std)),
        }
    }
}
