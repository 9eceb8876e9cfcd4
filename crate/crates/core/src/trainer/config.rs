use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nets::{ActorArch, NetConfig};

/// Learning hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HappoConfig {
    /// Clip range ε of the surrogate.
    pub clip: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub epochs: usize,
    /// Minibatches per epoch.
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Weight λ_adv of the adversarial term in the generator loss.
    pub adv_weight: f64,
    /// Rewards are multiplied by this before GAE and critic regression.
    pub reward_scale: f64,
    /// Training iterations K.
    pub iterations: usize,
    /// Episodes collected per iteration B.
    pub episodes_per_iteration: usize,
}

impl Default for HappoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            discount: 0.99,
            gae_lambda: 0.95,
            actor_lr: 5e-5,
            critic_lr: 1e-4,
            epochs: 5,
            minibatches: 4,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            adv_weight: 0.1,
            reward_scale: 1e-7,
            iterations: 100,
            episodes_per_iteration: 4,
        }
    }
}

impl HappoConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, f: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(f, "must be positive and finite"))
            }
        };
        pos(self.clip, "train.clip")?;
        pos(self.reward_scale, "train.reward_scale")?;
        pos(self.max_grad_norm, "train.max_grad_norm")?;
        for (v, f) in [(self.actor_lr, "train.actor_lr"), (self.critic_lr, "train.critic_lr")] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(f, "must be non-negative and finite"));
            }
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config("train.discount", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("train.gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return Err(Error::config("train.entropy_coef", "must be non-negative"));
        }
        if !(self.adv_weight.is_finite() && self.adv_weight >= 0.0) {
            return Err(Error::config("train.adv_weight", "must be non-negative"));
        }
        if self.epochs == 0 || self.minibatches == 0 || self.episodes_per_iteration == 0 {
            return Err(Error::config(
                "train",
                "epochs, minibatches and episodes_per_iteration must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    GaiHappo,
    Happo,
    GanHappo,
    TransformerHappo,
    Haa2c,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    Gan,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Clip,
    PolicyGradient,
}

/// What a variant switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wiring {
    pub actor: ActorArch,
    pub critic: CriticKind,
    pub objective: Objective,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::GaiHappo,
        Variant::Happo,
        Variant::GanHappo,
        Variant::TransformerHappo,
        Variant::Haa2c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::GaiHappo => "gai-happo",
            Variant::Happo => "happo",
            Variant::GanHappo => "gan-happo",
            Variant::TransformerHappo => "transformer-happo",
            Variant::Haa2c => "haa2c",
        }
    }

    pub fn wiring(self) -> Wiring {
        use ActorArch::*;
        let (actor, critic, objective) = match self {
            Variant::GaiHappo => (Attention, CriticKind::Gan, Objective::Clip),
            Variant::Happo => (Mlp, CriticKind::Plain, Objective::Clip),
            Variant::GanHappo => (Mlp, CriticKind::Gan, Objective::Clip),
            Variant::TransformerHappo => (Attention, CriticKind::Plain, Objective::Clip),
            Variant::Haa2c => (Mlp, CriticKind::Plain, Objective::PolicyGradient),
        };
        Wiring { actor, critic, objective }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::config("variant", format!("unknown `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// Everything a training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub seed: u64,
    pub env: EnvConfig,
    pub train: HappoConfig,
    pub nets: NetConfig,
    /// Replaces the variant's actor architecture when set.
    pub actor_override: Option<ActorArch>,
    /// Write a checkpoint every this many iterations (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::GaiHappo,
            seed: 0,
            env: EnvConfig::standard(),
            train: HappoConfig::default(),
            nets: NetConfig::default(),
            actor_override: None,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        self.nets.validate()
    }

    pub fn wiring(&self) -> Wiring {
        let mut w = self.variant.wiring();
        if let Some(a) = self.actor_override {
            w.actor = a;
        }
        w
    }
}
