//! Geometry and kinematics: Gauss-Markov surface vehicles and constant-altitude
//! UAVs moving inside a rectangular service area.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn horizontal_distance(&self, other: &Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Parameters of the Gauss-Markov velocity process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    /// Memory level in [0, 1]; 1 keeps the velocity, 0 makes it memoryless.
    pub memory_level: f64,
    /// Asymptotic mean velocity (m/s) per horizontal axis.
    pub asymptotic_mean: [f64; 2],
    /// Asymptotic standard deviation of the velocity (m/s).
    pub asymptotic_std: f64,
    /// Standard deviation of the per-axis Gaussian innovation.
    pub noise_std: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            memory_level: 0.8,
            asymptotic_mean: [1.0, 1.0],
            asymptotic_std: 2.0,
            noise_std: 1.0,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.memory_level) {
            return Err(Error::config("mobility.memory_level", "must lie in [0, 1]"));
        }
        if !self.asymptotic_mean.iter().all(|v| v.is_finite()) {
            return Err(Error::config("mobility.asymptotic_mean", "must be finite"));
        }
        if !(self.asymptotic_std >= 0.0 && self.asymptotic_std.is_finite()) {
            return Err(Error::config("mobility.asymptotic_std", "must be >= 0"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("mobility.noise_std", "must be >= 0"));
        }
        Ok(())
    }
}

/// Service area, UAV flight envelope and slot length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AreaConfig {
    pub x_max: f64,
    pub y_max: f64,
    pub uav_altitude: f64,
    /// Maximum UAV flight distance per slot (m).
    pub k_max: f64,
    /// Slot duration (s).
    pub slot_duration: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            x_max: 1000.0,
            y_max: 1000.0,
            uav_altitude: 100.0,
            k_max: 30.0,
            slot_duration: 1.0,
        }
    }
}

impl AreaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("area.x_max", self.x_max),
            ("area.y_max", self.y_max),
            ("area.uav_altitude", self.uav_altitude),
            ("area.k_max", self.k_max),
            ("area.slot_duration", self.slot_duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0.0..=self.x_max).contains(&p.x) && (0.0..=self.y_max).contains(&p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvKinematics {
    pub position: Vec3,
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavKinematics {
    pub position: Vec3,
}

/// Clamp `p` into `[0, hi]`; returns the clamped value and which bound was hit
/// (-1 lower, +1 upper, 0 none).
fn clamp_axis(p: f64, hi: f64) -> (f64, i8) {
    if p < 0.0 {
        (0.0, -1)
    } else if p > hi {
        (hi, 1)
    } else {
        (p, 0)
    }
}

/// One slot of Gauss-Markov motion.
///
/// The position advances with the slot-`t` velocity, then the velocity is
/// refreshed. Exactly two standard-normal variates are drawn (x then y). A
/// position that leaves the area is clamped to the boundary and the velocity
/// component on that axis is reflected to point back inside.
pub fn gauss_markov_step<R: Rng + ?Sized>(
    usv: &UsvKinematics,
    cfg: &MobilityConfig,
    area: &AreaConfig,
    rng: &mut R,
) -> UsvKinematics {
    let mu = cfg.memory_level;
    let innovation = cfg.asymptotic_std * (1.0 - mu * mu).max(0.0).sqrt();
    let mut velocity = [0.0; 2];
    for (axis, v) in velocity.iter_mut().enumerate() {
        let w: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise_std;
        *v = mu * usv.velocity[axis] + (1.0 - mu) * cfg.asymptotic_mean[axis] + innovation * w;
    }

    let tau = area.slot_duration;
    let (x, hit_x) = clamp_axis(usv.position.x + usv.velocity[0] * tau, area.x_max);
    let (y, hit_y) = clamp_axis(usv.position.y + usv.velocity[1] * tau, area.y_max);
    for (axis, hit) in [(0, hit_x), (1, hit_y)] {
        match hit {
            -1 => velocity[axis] = velocity[axis].abs(),
            1 => velocity[axis] = -velocity[axis].abs(),
            _ => {}
        }
    }

    UsvKinematics {
        position: Vec3::new(x, y, usv.position.z),
        velocity,
    }
}

/// Fly a UAV by `distance` meters along azimuth `azimuth` (radians), then clamp
/// into the area. Altitude never changes.
pub fn apply_uav_action(
    uav: &UavKinematics,
    azimuth: f64,
    distance: f64,
    area: &AreaConfig,
) -> Result<UavKinematics> {
    if !(0.0..=std::f64::consts::TAU).contains(&azimuth) {
        return Err(Error::Contract(format!(
            "UAV azimuth {azimuth} outside [0, 2π]"
        )));
    }
    if !(0.0..=area.k_max).contains(&distance) {
        return Err(Error::Contract(format!(
            "UAV flight distance {distance} outside [0, {}]",
            area.k_max
        )));
    }
    let p = uav.position;
    let x = (p.x + distance * azimuth.cos()).clamp(0.0, area.x_max);
    let y = (p.y + distance * azimuth.sin()).clamp(0.0, area.y_max);
    Ok(UavKinematics {
        position: Vec3::new(x, y, p.z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn area() -> AreaConfig {
        AreaConfig::default()
    }

    fn usv(x: f64, y: f64, v: [f64; 2]) -> UsvKinematics {
        UsvKinematics {
            position: Vec3::new(x, y, 0.0),
            velocity: v,
        }
    }

    #[test]
    fn full_memory_keeps_velocity() {
        let cfg = MobilityConfig {
            memory_level: 1.0,
            asymptotic_mean: [5.0, -5.0],
            asymptotic_std: 0.0,
            noise_std: 1.0,
        };
        let mut rng = stream(1, &[]);
        let next = gauss_markov_step(&usv(500.0, 500.0, [1.5, -0.5]), &cfg, &area(), &mut rng);
        assert_eq!(next.velocity, [1.5, -0.5]);
    }

    #[test]
    fn memoryless_without_noise_snaps_to_mean() {
        let cfg = MobilityConfig {
            memory_level: 0.0,
            asymptotic_mean: [2.0, 3.0],
            asymptotic_std: 0.0,
            noise_std: 1.0,
        };
        let mut rng = stream(2, &[]);
        let next = gauss_markov_step(&usv(500.0, 500.0, [-9.0, 7.0]), &cfg, &area(), &mut rng);
        assert_eq!(next.velocity, [2.0, 3.0]);
    }

    #[test]
    fn half_memory_blends_and_moves_with_old_velocity() {
        let cfg = MobilityConfig {
            memory_level: 0.5,
            asymptotic_mean: [4.0, 0.0],
            asymptotic_std: 0.0,
            noise_std: 1.0,
        };
        let a = AreaConfig {
            slot_duration: 2.0,
            ..area()
        };
        let mut rng = stream(3, &[]);
        let next = gauss_markov_step(&usv(100.0, 100.0, [2.0, 0.0]), &cfg, &a, &mut rng);
        assert_eq!(next.velocity, [3.0, 0.0]);
        assert_eq!(next.position, Vec3::new(104.0, 100.0, 0.0));
    }

    #[test]
    fn boundary_clamps_and_reflects() {
        let cfg = MobilityConfig {
            memory_level: 1.0,
            asymptotic_std: 0.0,
            ..MobilityConfig::default()
        };
        let mut rng = stream(4, &[]);
        let next = gauss_markov_step(&usv(999.0, 0.5, [5.0, -3.0]), &cfg, &area(), &mut rng);
        assert_eq!(next.position, Vec3::new(1000.0, 0.0, 0.0));
        assert_eq!(next.velocity, [-5.0, 3.0]);
    }

    #[test]
    fn uav_moves_along_azimuth() {
        let h = 100.0;
        let u = UavKinematics {
            position: Vec3::new(0.0, 0.0, h),
        };
        let a = apply_uav_action(&u, 0.0, 10.0, &area()).unwrap();
        assert_eq!(a.position, Vec3::new(10.0, 0.0, h));
        let b = apply_uav_action(&u, FRAC_PI_2, 30.0, &area()).unwrap();
        assert!((b.position.x).abs() < 1e-12);
        assert!((b.position.y - 30.0).abs() < 1e-12);
        assert_eq!(b.position.z, h);
        let edge = UavKinematics {
            position: Vec3::new(995.0, 0.0, h),
        };
        let c = apply_uav_action(&edge, 0.0, 30.0, &area()).unwrap();
        assert_eq!(c.position, Vec3::new(1000.0, 0.0, h));
    }

    #[test]
    fn uav_rejects_out_of_range_actions() {
        let u = UavKinematics {
            position: Vec3::new(5.0, 5.0, 100.0),
        };
        assert!(apply_uav_action(&u, -0.1, 1.0, &area()).is_err());
        assert!(apply_uav_action(&u, 2.0 * PI + 1e-9, 1.0, &area()).is_err());
        assert!(apply_uav_action(&u, 1.0, 30.5, &area()).is_err());
        assert!(apply_uav_action(&u, 1.0, f64::NAN, &area()).is_err());
    }

    #[test]
    fn distance_cases() {
        let o = Vec3::new(0.0, 0.0, 0.0);
        assert_eq!(distance(&o, &o), 0.0);
        assert_eq!(distance(&o, &Vec3::new(3.0, 4.0, 0.0)), 5.0);
        assert_eq!(distance(&Vec3::new(0.0, 0.0, 100.0), &o), 100.0);
    }

    #[test]
    fn identical_seeds_give_identical_tracks() {
        let cfg = MobilityConfig::default();
        let run = || {
            let mut rng = stream(99, &[1]);
            let mut s = usv(10.0, 990.0, [0.0, 0.0]);
            let mut track = Vec::new();
            for _ in 0..200 {
                s = gauss_markov_step(&s, &cfg, &area(), &mut rng);
                track.push((s.position.x.to_bits(), s.position.y.to_bits()));
            }
            track
        };
        assert_eq!(run(), run());
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1e4..1e4f64
    }

    proptest! {
        #[test]
        fn triangle_inequality(ax in coord(), ay in coord(), az in coord(),
                               bx in coord(), by in coord(), bz in coord(),
                               cx in coord(), cy in coord(), cz in coord()) {
            let (a, b, c) = (Vec3::new(ax, ay, az), Vec3::new(bx, by, bz), Vec3::new(cx, cy, cz));
            prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-9);
            prop_assert_eq!(distance(&a, &b), distance(&b, &a));
        }

        #[test]
        fn positions_stay_in_area(seed in any::<u64>(), mu in 0.0..=1.0f64, std in 0.0..20.0f64,
                                  azimuths in prop::collection::vec((0.0..std::f64::consts::TAU, 0.0..=30.0f64), 1..60)) {
            let cfg = MobilityConfig { memory_level: mu, asymptotic_mean: [3.0, -2.0], asymptotic_std: std, noise_std: 1.0 };
            let a = area();
            let mut rng = stream(seed, &[]);
            let mut s = usv(500.0, 500.0, [0.0, 0.0]);
            let mut u = UavKinematics { position: Vec3::new(500.0, 500.0, a.uav_altitude) };
            for (theta, k) in azimuths {
                s = gauss_markov_step(&s, &cfg, &a, &mut rng);
                u = apply_uav_action(&u, theta, k, &a).unwrap();
                prop_assert!(a.contains(&s.position));
                prop_assert!(a.contains(&u.position));
                prop_assert_eq!(u.position.z, a.uav_altitude);
            }
        }
    }
}
