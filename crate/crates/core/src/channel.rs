//! Link budgets for the USV→UAV (probabilistic line-of-sight) and USV→GS
//! (inverse-square) channels, and the Shannon rates they induce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{distance, Vec3};

/// Radio parameters. Noise power is stored in watts; the on-disk form carries
/// it in dBm and is converted when the config is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelConfigFile", into = "ChannelConfigFile")]
pub struct ChannelConfig {
    pub carrier_freq: f64,
    pub light_speed: f64,
    pub zeta_los: f64,
    pub zeta_nlos: f64,
    pub sigmoid_a: f64,
    pub sigmoid_b: f64,
    /// Channel power gain at 1 m.
    pub ref_gain: f64,
    pub noise_power: f64,
    pub bandwidth_u2u: f64,
    pub bandwidth_u2g: f64,
    pub usv_tx_power: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ChannelConfigFile {
    carrier_freq_hz: f64,
    light_speed_mps: f64,
    zeta_los_db: f64,
    zeta_nlos_db: f64,
    sigmoid_a: f64,
    sigmoid_b: f64,
    ref_gain: f64,
    noise_power_dbm: f64,
    bandwidth_u2u_hz: f64,
    bandwidth_u2g_hz: f64,
    usv_tx_power_w: f64,
}

impl Default for ChannelConfigFile {
    fn default() -> Self {
        ChannelConfig::default().into()
    }
}

impl TryFrom<ChannelConfigFile> for ChannelConfig {
    type Error = Error;

    fn try_from(f: ChannelConfigFile) -> Result<Self> {
        let cfg = ChannelConfig {
            carrier_freq: f.carrier_freq_hz,
            light_speed: f.light_speed_mps,
            zeta_los: f.zeta_los_db,
            zeta_nlos: f.zeta_nlos_db,
            sigmoid_a: f.sigmoid_a,
            sigmoid_b: f.sigmoid_b,
            ref_gain: f.ref_gain,
            noise_power: dbm_to_watts(f.noise_power_dbm),
            bandwidth_u2u: f.bandwidth_u2u_hz,
            bandwidth_u2g: f.bandwidth_u2g_hz,
            usv_tx_power: f.usv_tx_power_w,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ChannelConfig> for ChannelConfigFile {
    fn from(c: ChannelConfig) -> Self {
        ChannelConfigFile {
            carrier_freq_hz: c.carrier_freq,
            light_speed_mps: c.light_speed,
            zeta_los_db: c.zeta_los,
            zeta_nlos_db: c.zeta_nlos,
            sigmoid_a: c.sigmoid_a,
            sigmoid_b: c.sigmoid_b,
            ref_gain: c.ref_gain,
            noise_power_dbm: watts_to_dbm(c.noise_power),
            bandwidth_u2u_hz: c.bandwidth_u2u,
            bandwidth_u2g_hz: c.bandwidth_u2g,
            usv_tx_power_w: c.usv_tx_power,
        }
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_freq: 2.0e9,
            light_speed: 3.0e8,
            zeta_los: 2.3,
            zeta_nlos: 34.0,
            sigmoid_a: 10.0,
            sigmoid_b: 0.6,
            ref_gain: 1.0e-4,
            noise_power: dbm_to_watts(-114.0),
            bandwidth_u2u: 1.0e6,
            bandwidth_u2g: 1.0e6,
            usv_tx_power: 1.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel.carrier_freq_hz", self.carrier_freq),
            ("channel.light_speed_mps", self.light_speed),
            ("channel.sigmoid_a", self.sigmoid_a),
            ("channel.sigmoid_b", self.sigmoid_b),
            ("channel.ref_gain", self.ref_gain),
            ("channel.noise_power_dbm", self.noise_power),
            ("channel.bandwidth_u2u_hz", self.bandwidth_u2u),
            ("channel.bandwidth_u2g_hz", self.bandwidth_u2g),
            ("channel.usv_tx_power_w", self.usv_tx_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        for (name, v) in [
            ("channel.zeta_los_db", self.zeta_los),
            ("channel.zeta_nlos_db", self.zeta_nlos),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Linear power gain of a loss expressed in dB.
pub fn db_loss_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn gain_to_db_loss(gain: f64) -> f64 {
    -10.0 * gain.log10()
}

fn link_distance(a: &Vec3, b: &Vec3) -> Result<f64> {
    let d = distance(a, b);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::ZeroDistance)
    }
}

fn shannon(bandwidth: f64, snr: f64) -> f64 {
    bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

/// Elevation of the UAV as seen from the USV, in degrees within [0, 90].
pub fn elevation_angle(usv: &Vec3, uav: &Vec3) -> Result<f64> {
    link_distance(usv, uav)?;
    let dz = (uav.z - usv.z).abs();
    Ok(dz.atan2(usv.horizontal_distance(uav)).to_degrees())
}

/// USV→UAV path loss in dB: a sigmoid line-of-sight excess on top of
/// free-space loss.
pub fn path_loss_u2u(usv: &Vec3, uav: &Vec3, cfg: &ChannelConfig) -> Result<f64> {
    let d = link_distance(usv, uav)?;
    let elev = elevation_angle(usv, uav)?;
    let (a, b) = (cfg.sigmoid_a, cfg.sigmoid_b);
    let los = (cfg.zeta_los - cfg.zeta_nlos) / (1.0 + a * (-b * (elev - a)).exp());
    let fspl = 20.0 * (4.0 * std::f64::consts::PI * cfg.carrier_freq * d / cfg.light_speed).log10();
    Ok(los + fspl + cfg.zeta_nlos)
}

pub fn rate_u2u(usv: &Vec3, uav: &Vec3, cfg: &ChannelConfig) -> Result<f64> {
    let gain = db_loss_to_gain(path_loss_u2u(usv, uav, cfg)?);
    Ok(shannon(
        cfg.bandwidth_u2u,
        cfg.usv_tx_power * gain / cfg.noise_power,
    ))
}

pub fn channel_gain_u2g(usv: &Vec3, gs: &Vec3, cfg: &ChannelConfig) -> Result<f64> {
    let d = link_distance(usv, gs)?;
    Ok(cfg.ref_gain / (d * d))
}

pub fn rate_u2g(usv: &Vec3, gs: &Vec3, cfg: &ChannelConfig) -> Result<f64> {
    let gain = channel_gain_u2g(usv, gs, cfg)?;
    Ok(shannon(
        cfg.bandwidth_u2g,
        cfg.usv_tx_power * gain / cfg.noise_power,
    ))
}
