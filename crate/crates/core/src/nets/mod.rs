//! Policy and value networks.
//!
//! Actors map one agent's observation to an [`ActionDistribution`]. The
//! critic is a generator `G(s)` predicting state values plus a discriminator
//! `D(s, v)` that tells empirical returns from generated values.

mod actor;
mod critic;
mod dist;
mod params;

pub use actor::{ActorArch, ActorNet, TOKEN_FEATURES};
pub use critic::{
    d_loss, d_loss_value, g_adv_loss, g_adv_loss_value, g_value_loss, DiscriminatorNet,
    GeneratorNet, P_FLOOR,
};
pub use dist::{
    log_one_minus_tanh_sq, softplus, squash_azimuth, squash_distance, uav_log_det,
    ActionDistribution, HeadVars, LatentAction,
};
pub use params::{Linear, ParamSet, TanhMlp};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub d_model: usize,
    pub heads: usize,
    pub hidden: usize,
    /// Starting log standard deviation of every Gaussian head.
    pub init_log_std: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { d_model: 32, heads: 2, hidden: 64, init_log_std: 0.0 }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.hidden == 0 || self.heads == 0 {
            return Err(Error::config("nets", "d_model, heads and hidden must be positive"));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::config("nets.heads", "must divide d_model"));
        }
        if !self.init_log_std.is_finite() {
            return Err(Error::config("nets.init_log_std", "must be finite"));
        }
        Ok(())
    }
}
