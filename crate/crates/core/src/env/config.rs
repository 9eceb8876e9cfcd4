use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::workload::ComputeConfig;
use crate::world::{AreaConfig, MobilityConfig, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub usvs: usize,
    pub uavs: usize,
    pub gss: usize,
}

impl Counts {
    pub const fn new(usvs: usize, uavs: usize, gss: usize) -> Self {
        Self { usvs, uavs, gss }
    }

    /// Learning agents: every USV and every UAV.
    pub fn agents(&self) -> usize {
        self.usvs + self.uavs
    }
}

impl Default for Counts {
    fn default() -> Self {
        Self::new(6, 4, 2)
    }
}

/// Scales applied to raw quantities before they enter observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObsNormalization {
    pub queue_scale_bits: f64,
    pub task_scale_bits: f64,
}

impl Default for ObsNormalization {
    fn default() -> Self {
        Self {
            queue_scale_bits: 1.0e8,
            task_scale_bits: 3.0e7,
        }
    }
}

/// Complete scenario description. Every section has defaults; a JSON file
/// only needs the keys it changes, and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub counts: Counts,
    pub area: AreaConfig,
    pub mobility: MobilityConfig,
    pub channel: ChannelConfig,
    pub compute: ComputeConfig,
    pub horizon: usize,
    pub seed: u64,
    /// UAV start points (x, y); defaults to an even spread across the middle
    /// of the area.
    pub uav_spawn: Option<Vec<[f64; 2]>>,
    /// Ground-station sites (x, y); defaults to an even spread along y = 0.
    pub gs_positions: Option<Vec<[f64; 2]>>,
    pub observation: ObsNormalization,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            counts: Counts::default(),
            area: AreaConfig::default(),
            mobility: MobilityConfig::default(),
            channel: ChannelConfig::default(),
            compute: ComputeConfig::default(),
            horizon: 40,
            seed: 0,
            uav_spawn: None,
            gs_positions: None,
            observation: ObsNormalization::default(),
        }
    }
}

impl EnvConfig {
    /// The standard scenario: 6 USVs, 4 UAVs, 2 GSs on a 1 km square.
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn with_counts(usvs: usize, uavs: usize, gss: usize) -> Self {
        Self {
            counts: Counts::new(usvs, uavs, gss),
            ..Self::default()
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: EnvConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.counts;
        for (name, n) in [("counts.usvs", c.usvs), ("counts.uavs", c.uavs), ("counts.gss", c.gss)] {
            if n == 0 {
                return Err(Error::config(name, "must be >= 1"));
            }
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be >= 1"));
        }
        self.area.validate()?;
        self.mobility.validate()?;
        self.channel.validate()?;
        self.compute.validate(c.usvs, c.uavs, c.gss)?;
        if self.compute.slot_duration != self.area.slot_duration {
            return Err(Error::config(
                "compute.slot_duration",
                "must equal area.slot_duration",
            ));
        }
        for (name, v) in [
            ("observation.queue_scale_bits", self.observation.queue_scale_bits),
            ("observation.task_scale_bits", self.observation.task_scale_bits),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        let in_area = |p: &[f64; 2]| {
            (0.0..=self.area.x_max).contains(&p[0]) && (0.0..=self.area.y_max).contains(&p[1])
        };
        if let Some(spawn) = &self.uav_spawn {
            if spawn.len() != c.uavs {
                return Err(Error::config("uav_spawn", format!("expected {} points", c.uavs)));
            }
            if !spawn.iter().all(in_area) {
                return Err(Error::config("uav_spawn", "points must lie inside the area"));
            }
        }
        if let Some(gs) = &self.gs_positions {
            if gs.len() != c.gss {
                return Err(Error::config("gs_positions", format!("expected {} points", c.gss)));
            }
            if !gs.iter().all(in_area) {
                return Err(Error::config("gs_positions", "points must lie inside the area"));
            }
        }
        Ok(())
    }

    pub fn uav_start_positions(&self) -> Vec<Vec3> {
        let h = self.area.uav_altitude;
        match &self.uav_spawn {
            Some(pts) => pts.iter().map(|p| Vec3::new(p[0], p[1], h)).collect(),
            None => {
                let n = self.counts.uavs;
                (0..n)
                    .map(|j| {
                        let x = self.area.x_max * (j + 1) as f64 / (n + 1) as f64;
                        Vec3::new(x, self.area.y_max / 2.0, h)
                    })
                    .collect()
            }
        }
    }

    pub fn gs_sites(&self) -> Vec<Vec3> {
        match &self.gs_positions {
            Some(pts) => pts.iter().map(|p| Vec3::new(p[0], p[1], 0.0)).collect(),
            None => {
                let n = self.counts.gss;
                (0..n)
                    .map(|k| Vec3::new(self.area.x_max * (k + 1) as f64 / (n + 1) as f64, 0.0, 0.0))
                    .collect()
            }
        }
    }
}
