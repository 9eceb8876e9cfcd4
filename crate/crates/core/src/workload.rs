//! Task arrivals, offloading decisions, queue dynamics and the delay/reward
//! accounting of one slot.
//!
//! Units: data and backlogs in bits, compute capacity in cycles/s, delays in
//! seconds. Per-slot service in bits is `τ·f / c`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BITS_PER_MBIT: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub data_size: f64,
    pub cycles_per_bit: f64,
}

impl Task {
    pub fn new(data_size: f64, cycles_per_bit: f64) -> Self {
        Self {
            data_size,
            cycles_per_bit,
        }
    }
}

/// Fractions of a task processed locally, on the chosen UAV and on the
/// chosen GS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub local: f64,
    pub uav: f64,
    pub gs: f64,
}

impl Split {
    pub fn new(local: f64, uav: f64, gs: f64) -> Self {
        Self { local, uav, gs }
    }

    pub fn sum(&self) -> f64 {
        self.local + self.uav + self.gs
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.local, self.uav, self.gs]
    }
}

/// An offloading decision before projection: any nonnegative split with a
/// positive sum, with choices that may contradict it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDecision {
    pub uav_choice: Option<usize>,
    pub gs_choice: Option<usize>,
    pub split: Split,
}

/// A feasible decision: at most one UAV and one GS (by construction, a single
/// optional index each), and a split on the simplex that puts no work on an
/// unselected tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadDecision {
    pub uav_choice: Option<usize>,
    pub gs_choice: Option<usize>,
    pub split: Split,
}

impl OffloadDecision {
    pub fn local_only() -> Self {
        Self {
            uav_choice: None,
            gs_choice: None,
            split: Split::new(1.0, 0.0, 0.0),
        }
    }

    pub fn is_consistent(&self, tol: f64) -> bool {
        let s = self.split;
        s.local >= 0.0
            && s.uav >= 0.0
            && s.gs >= 0.0
            && (s.sum() - 1.0).abs() <= tol
            && (self.uav_choice.is_some() || s.uav == 0.0)
            && (self.gs_choice.is_some() || s.gs == 0.0)
    }
}

/// Make a raw decision feasible: zero the share of any unselected tier and
/// renormalize onto the simplex, falling back to all-local when nothing is
/// left.
pub fn project_decision(raw: &RawDecision) -> Result<OffloadDecision> {
    let s = raw.split;
    if !s.as_array().iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::Contract(format!(
            "split components must be finite and >= 0, got {:?}",
            s.as_array()
        )));
    }
    if s.sum() <= 0.0 {
        return Err(Error::Contract("split is all zero".into()));
    }

    let uav = if raw.uav_choice.is_some() { s.uav } else { 0.0 };
    let gs = if raw.gs_choice.is_some() { s.gs } else { 0.0 };
    let zeroed = uav != s.uav || gs != s.gs;
    let total = s.local + uav + gs;

    let split = if !zeroed && (total - 1.0).abs() <= 1e-12 {
        s
    } else if total > 0.0 {
        Split::new(s.local / total, uav / total, gs / total)
    } else {
        Split::new(1.0, 0.0, 0.0)
    };
    Ok(OffloadDecision {
        uav_choice: raw.uav_choice,
        gs_choice: raw.gs_choice,
        split,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueState {
    pub usv: Vec<f64>,
    pub uav: Vec<f64>,
    pub gs: Vec<f64>,
}

impl QueueState {
    pub fn zeros(usvs: usize, uavs: usize, gss: usize) -> Self {
        Self {
            usv: vec![0.0; usvs],
            uav: vec![0.0; uavs],
            gs: vec![0.0; gss],
        }
    }

    pub fn all_nonnegative(&self) -> bool {
        self.usv
            .iter()
            .chain(&self.uav)
            .chain(&self.gs)
            .all(|q| *q >= 0.0 && q.is_finite())
    }
}

/// Compute capacities and arrival statistics. Per-node vectors, when present,
/// override the scalar defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeConfig {
    pub f_usv: f64,
    pub f_uav: f64,
    pub f_gs: f64,
    /// Mean task size per slot, in Mbit.
    pub mean_arrival_mbit: f64,
    pub cycles_per_bit: f64,
    pub slot_duration: f64,
    pub f_usv_per_node: Option<Vec<f64>>,
    pub f_uav_per_node: Option<Vec<f64>>,
    pub f_gs_per_node: Option<Vec<f64>>,
    pub mean_arrival_per_usv: Option<Vec<f64>>,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            f_usv: 1.0e9,
            f_uav: 5.0e9,
            f_gs: 2.0e10,
            mean_arrival_mbit: 15.0,
            cycles_per_bit: 270.0,
            slot_duration: 1.0,
            f_usv_per_node: None,
            f_uav_per_node: None,
            f_gs_per_node: None,
            mean_arrival_per_usv: None,
        }
    }
}

fn per_node(over: &Option<Vec<f64>>, idx: usize, default: f64) -> f64 {
    over.as_ref()
        .and_then(|v| v.get(idx).copied())
        .unwrap_or(default)
}

impl ComputeConfig {
    pub fn usv_capacity(&self, i: usize) -> f64 {
        per_node(&self.f_usv_per_node, i, self.f_usv)
    }

    pub fn uav_capacity(&self, j: usize) -> f64 {
        per_node(&self.f_uav_per_node, j, self.f_uav)
    }

    pub fn gs_capacity(&self, k: usize) -> f64 {
        per_node(&self.f_gs_per_node, k, self.f_gs)
    }

    pub fn mean_arrival(&self, i: usize) -> f64 {
        per_node(&self.mean_arrival_per_usv, i, self.mean_arrival_mbit)
    }

    /// Bits a node with capacity `f` drains in one slot.
    pub fn service_bits(&self, f: f64) -> f64 {
        self.slot_duration * f / self.cycles_per_bit
    }

    pub fn validate(&self, usvs: usize, uavs: usize, gss: usize) -> Result<()> {
        for (name, v) in [
            ("compute.f_usv", self.f_usv),
            ("compute.f_uav", self.f_uav),
            ("compute.f_gs", self.f_gs),
            ("compute.cycles_per_bit", self.cycles_per_bit),
            ("compute.slot_duration", self.slot_duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        if !(self.mean_arrival_mbit >= 0.0 && self.mean_arrival_mbit.is_finite()) {
            return Err(Error::config("compute.mean_arrival_mbit", "must be finite and >= 0"));
        }
        let checks = [
            ("compute.f_usv_per_node", &self.f_usv_per_node, usvs, true),
            ("compute.f_uav_per_node", &self.f_uav_per_node, uavs, true),
            ("compute.f_gs_per_node", &self.f_gs_per_node, gss, true),
            ("compute.mean_arrival_per_usv", &self.mean_arrival_per_usv, usvs, false),
        ];
        for (name, over, n, strictly_positive) in checks {
            if let Some(v) = over {
                if v.len() != n {
                    return Err(Error::config(name, format!("expected {n} entries, got {}", v.len())));
                }
                let ok = v.iter().all(|x| {
                    x.is_finite() && if strictly_positive { *x > 0.0 } else { *x >= 0.0 }
                });
                if !ok {
                    return Err(Error::config(name, "entries out of range"));
                }
            }
        }
        Ok(())
    }
}

/// Draw the task of USV `usv` for one slot: a Poisson number of Mbit.
pub fn sample_task<R: Rng + ?Sized>(cfg: &ComputeConfig, usv: usize, rng: &mut R) -> Task {
    let lambda = cfg.mean_arrival(usv);
    let mbit = if lambda > 0.0 {
        Poisson::new(lambda)
            .expect("lambda validated positive")
            .sample(rng)
    } else {
        0.0
    };
    Task::new(mbit * BITS_PER_MBIT, cfg.cycles_per_bit)
}

/// Advance every backlog by one slot: arrivals in, `τ·f/c` bits served, floor
/// at zero. A UAV or GS receives the offloaded share of every USV that
/// selected it.
pub fn update_queues(
    q: &QueueState,
    decisions: &[OffloadDecision],
    tasks: &[Task],
    cfg: &ComputeConfig,
) -> QueueState {
    debug_assert_eq!(decisions.len(), tasks.len());
    let mut uav_in = vec![0.0; q.uav.len()];
    let mut gs_in = vec![0.0; q.gs.len()];
    for (dec, task) in decisions.iter().zip(tasks) {
        if let Some(j) = dec.uav_choice {
            uav_in[j] += dec.split.uav * task.data_size;
        }
        if let Some(k) = dec.gs_choice {
            gs_in[k] += dec.split.gs * task.data_size;
        }
    }

    let usv = q
        .usv
        .iter()
        .zip(decisions.iter().zip(tasks))
        .enumerate()
        .map(|(i, (backlog, (dec, task)))| {
            (backlog + dec.split.local * task.data_size - cfg.service_bits(cfg.usv_capacity(i))).max(0.0)
        })
        .collect();
    let uav = q
        .uav
        .iter()
        .zip(&uav_in)
        .enumerate()
        .map(|(j, (backlog, inflow))| (backlog + inflow - cfg.service_bits(cfg.uav_capacity(j))).max(0.0))
        .collect();
    let gs = q
        .gs
        .iter()
        .zip(&gs_in)
        .enumerate()
        .map(|(k, (backlog, inflow))| (backlog + inflow - cfg.service_bits(cfg.gs_capacity(k))).max(0.0))
        .collect();
    QueueState { usv, uav, gs }
}

/// Local processing time: drain the USV's backlog, then its own share.
pub fn delay_local(backlog: f64, dec: &OffloadDecision, task: &Task, f_usv: f64) -> f64 {
    backlog * task.cycles_per_bit / f_usv + dec.split.local * task.data_size * task.cycles_per_bit / f_usv
}

fn offload_delay(backlog: f64, share: f64, task: &Task, rate: f64, capacity: f64, link: &str) -> Result<f64> {
    let bits = share * task.data_size;
    let transmit = if bits > 0.0 {
        if !(rate > 0.0) {
            return Err(Error::Contract(format!("{link} rate {rate} must be > 0 to carry {bits} bits")));
        }
        bits / rate
    } else {
        0.0
    };
    Ok(backlog * task.cycles_per_bit / capacity + transmit + bits * task.cycles_per_bit / capacity)
}

/// Delay of the UAV share: backlog of the chosen UAV, uplink, and processing.
/// Zero when no UAV was selected.
pub fn delay_uav(uav_backlog: f64, dec: &OffloadDecision, task: &Task, rate_u2u: f64, f_uav: f64) -> Result<f64> {
    match dec.uav_choice {
        None => Ok(0.0),
        Some(_) => offload_delay(uav_backlog, dec.split.uav, task, rate_u2u, f_uav, "U2U"),
    }
}

pub fn delay_gs(gs_backlog: f64, dec: &OffloadDecision, task: &Task, rate_u2g: f64, f_gs: f64) -> Result<f64> {
    match dec.gs_choice {
        None => Ok(0.0),
        Some(_) => offload_delay(gs_backlog, dec.split.gs, task, rate_u2g, f_gs, "U2G"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub local: f64,
    pub uav: f64,
    pub gs: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        total_delay(self)
    }
}

pub fn total_delay(parts: &DelayBreakdown) -> f64 {
    parts.local + parts.uav + parts.gs
}

/// Total execution time over a history of per-slot, per-USV delays.
pub fn cumulative_cost<S: AsRef<[f64]>>(history: &[S]) -> f64 {
    history.iter().map(|slot| slot.as_ref().iter().sum::<f64>()).sum()
}

/// Bits processed per second of delay, summed over USVs with a nonempty task.
pub fn slot_reward(tasks: &[Task], delays: &[f64]) -> Result<f64> {
    if tasks.len() != delays.len() {
        return Err(Error::Contract(format!(
            "{} tasks but {} delays",
            tasks.len(),
            delays.len()
        )));
    }
    let mut r = 0.0;
    for (task, &delay) in tasks.iter().zip(delays) {
        if task.data_size > 0.0 {
            if !(delay > 0.0) {
                return Err(Error::Contract(format!(
                    "task of {} bits finished in {delay} s",
                    task.data_size
                )));
            }
            r += task.data_size / delay;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn dec(uav: Option<usize>, gs: Option<usize>, s: [f64; 3]) -> OffloadDecision {
        OffloadDecision {
            uav_choice: uav,
            gs_choice: gs,
            split: Split::new(s[0], s[1], s[2]),
        }
    }

    fn raw(uav: Option<usize>, gs: Option<usize>, s: [f64; 3]) -> RawDecision {
        RawDecision {
            uav_choice: uav,
            gs_choice: gs,
            split: Split::new(s[0], s[1], s[2]),
        }
    }

    /// |x - p/q| within two units in the last place of p/q.
    fn matches_rational(x: f64, p: i128, q: i128) -> bool {
        let exact = p as f64 / q as f64;
        (x - exact).abs() <= 2.0 * f64::EPSILON * exact.abs()
    }

    #[test]
    fn poisson_sizes() {
        let mut rng = stream(11, &[]);
        let zero = ComputeConfig {
            mean_arrival_mbit: 0.0,
            ..ComputeConfig::default()
        };
        for _ in 0..100 {
            assert_eq!(sample_task(&zero, 0, &mut rng).data_size, 0.0);
        }
        let cfg = ComputeConfig::default();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = sample_task(&cfg, 0, &mut rng);
            let mbit = t.data_size / BITS_PER_MBIT;
            assert!(mbit >= 0.0 && mbit.fract() == 0.0);
            assert_eq!(t.cycles_per_bit, 270.0);
            sum += mbit;
        }
        let mean = sum / n as f64;
        assert!((14.9..=15.1).contains(&mean), "mean {mean}");
    }

    #[test]
    fn projection_cases() {
        let p = project_decision(&raw(None, Some(0), [0.2, 0.5, 0.3])).unwrap();
        assert!((p.split.local - 0.4).abs() < 1e-15);
        assert_eq!(p.split.uav, 0.0);
        assert!((p.split.gs - 0.6).abs() < 1e-15);

        let input = raw(Some(1), Some(0), [0.2, 0.5, 0.3]);
        let p = project_decision(&input).unwrap();
        assert_eq!(p.split, input.split);

        let p = project_decision(&raw(None, None, [0.0, 1.0, 0.0])).unwrap();
        assert_eq!(p.split, Split::new(1.0, 0.0, 0.0));

        assert!(project_decision(&raw(None, None, [0.0, 0.0, 0.0])).is_err());
        assert!(project_decision(&raw(None, None, [-0.1, 1.0, 0.0])).is_err());
        assert!(project_decision(&raw(None, None, [f64::NAN, 1.0, 0.0])).is_err());
    }

    #[test]
    fn queue_examples() {
        let cfg = ComputeConfig {
            f_usv: 1e9,
            ..ComputeConfig::default()
        };
        let q = QueueState::zeros(1, 1, 1);
        let none = update_queues(&q, &[OffloadDecision::local_only()], &[Task::new(0.0, 270.0)], &cfg);
        assert_eq!(none, QueueState::zeros(1, 1, 1));

        let q = QueueState {
            usv: vec![5e6],
            uav: vec![0.0],
            gs: vec![0.0],
        };
        let next = update_queues(&q, &[OffloadDecision::local_only()], &[Task::new(1e6, 270.0)], &cfg);
        // 6e6 - 1e9/270 = 620_000_000 / 270
        assert!(matches_rational(next.usv[0], 620_000_000, 270), "{}", next.usv[0]);
        assert!((next.usv[0] - 2_296_296.3).abs() < 0.05);

        let q = QueueState {
            usv: vec![1e3],
            uav: vec![1e3],
            gs: vec![1e3],
        };
        let next = update_queues(&q, &[dec(Some(0), Some(0), [0.2, 0.3, 0.5])], &[Task::new(1e3, 270.0)], &cfg);
        assert_eq!(next, QueueState::zeros(1, 1, 1));
    }

    #[test]
    fn offloaded_shares_land_on_selected_nodes() {
        let cfg = ComputeConfig {
            f_usv: 1e-3,
            f_uav: 1e-3,
            f_gs: 1e-3,
            ..ComputeConfig::default()
        };
        let q = QueueState::zeros(2, 2, 1);
        let decs = [dec(Some(1), None, [0.5, 0.5, 0.0]), dec(Some(1), Some(0), [0.0, 0.25, 0.75])];
        let tasks = [Task::new(8.0e6, 270.0), Task::new(4.0e6, 270.0)];
        let next = update_queues(&q, &decs, &tasks, &cfg);
        let served = cfg.service_bits(1e-3);
        assert!((next.usv[0] - (4.0e6 - served)).abs() < 1e-6);
        assert_eq!(next.uav[0], 0.0);
        assert!((next.uav[1] - (5.0e6 - served)).abs() < 1e-6);
        assert!((next.gs[0] - (3.0e6 - served)).abs() < 1e-6);
    }

    #[test]
    fn delay_examples() {
        let task = Task::new(1e6, 270.0);
        let local = dec(None, None, [1.0, 0.0, 0.0]);
        assert!(matches_rational(delay_local(0.0, &local, &task, 1e9), 27, 100));
        assert_eq!(delay_local(0.0, &dec(Some(0), None, [0.0, 1.0, 0.0]), &task, 1e9), 0.0);
        let backlog_only = delay_local(1e6, &dec(Some(0), None, [0.0, 1.0, 0.0]), &task, 1e9);
        assert!(matches_rational(backlog_only, 27, 100));

        assert_eq!(delay_uav(5e6, &local, &task, 1e6, 1e9).unwrap(), 0.0);
        let half = dec(Some(0), None, [0.5, 0.5, 0.0]);
        // 0.5 + 0.135
        assert!(matches_rational(delay_uav(0.0, &half, &task, 1e6, 1e9).unwrap(), 635, 1000));
        let zero_share = dec(Some(0), None, [1.0, 0.0, 0.0]);
        assert!(matches_rational(delay_uav(2e6, &zero_share, &task, 0.0, 1e9).unwrap(), 54, 100));
        assert!(delay_uav(0.0, &half, &task, 0.0, 1e9).is_err());

        assert_eq!(delay_gs(5e6, &local, &task, 1e6, 2e10).unwrap(), 0.0);
        let all_gs = dec(None, Some(0), [0.0, 0.0, 1.0]);
        // 0.5 + 0.0135
        assert!(matches_rational(delay_gs(0.0, &all_gs, &task, 2e6, 2e10).unwrap(), 5135, 10000));
        let gs_zero = dec(None, Some(0), [1.0, 0.0, 0.0]);
        assert!(matches_rational(delay_gs(2e10 / 270.0, &gs_zero, &task, 2e6, 2e10).unwrap(), 1, 1));
    }

    #[test]
    fn totals_and_rewards() {
        assert_eq!(DelayBreakdown::default().total(), 0.0);
        let t = DelayBreakdown {
            local: 0.27,
            uav: 0.635,
            gs: 0.0,
        };
        assert!((t.total() - 0.905).abs() < 1e-15);

        // 3 slots x 2 USVs, summed by hand: 1+2+0.5+0.25+3+4 = 10.75
        let trace = vec![vec![1.0, 2.0], vec![0.5, 0.25], vec![3.0, 4.0]];
        let mut brute = 0.0;
        for slot in &trace {
            for d in slot {
                brute += d;
            }
        }
        assert_eq!(cumulative_cost(&trace), brute);
        assert_eq!(cumulative_cost(&trace), 10.75);

        assert_eq!(slot_reward(&[Task::new(1e6, 270.0)], &[2.0]).unwrap(), 5e5);
        assert_eq!(slot_reward(&[Task::new(0.0, 270.0), Task::new(0.0, 270.0)], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            slot_reward(&[Task::new(1e6, 270.0), Task::new(2e6, 270.0)], &[2.0, 4.0]).unwrap(),
            1e6
        );
        assert!(slot_reward(&[Task::new(1e6, 270.0)], &[0.0]).is_err());
    }

    #[test]
    fn per_node_overrides() {
        let cfg = ComputeConfig {
            f_uav_per_node: Some(vec![1.0, 2.0]),
            ..ComputeConfig::default()
        };
        assert_eq!(cfg.uav_capacity(1), 2.0);
        assert_eq!(cfg.usv_capacity(3), 1e9);
        assert!(cfg.validate(1, 2, 1).is_ok());
        let err = cfg.validate(1, 3, 1).unwrap_err().to_string();
        assert!(err.contains("f_uav_per_node"));
    }

    fn split_strategy() -> impl Strategy<Value = [f64; 3]> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_filter_map("nonzero", |(a, b, c)| {
            (a + b + c > 1e-9).then_some([a, b, c])
        })
    }

    fn choice(n: usize) -> impl Strategy<Value = Option<usize>> {
        prop::option::of(0..n)
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(s in split_strategy(), u in choice(4), g in choice(2)) {
            let p = project_decision(&raw(u, g, s)).unwrap();
            prop_assert!(p.is_consistent(1e-9));
        }

        #[test]
        fn queues_stay_nonnegative(
            steps in prop::collection::vec((split_strategy(), choice(2), choice(2), 0.0..5e7f64), 1..40)
        ) {
            let cfg = ComputeConfig::default();
            let mut q = QueueState::zeros(1, 2, 2);
            for (s, u, g, d) in steps {
                let p = project_decision(&raw(u, g, s)).unwrap();
                q = update_queues(&q, &[p], &[Task::new(d, 270.0)], &cfg);
                prop_assert!(q.all_nonnegative());
            }
        }

        #[test]
        fn uav_delay_monotone_in_share(b1 in 0.0..1.0f64, db in 0.0..1.0f64, backlog in 0.0..1e8f64,
                                       rate in 1e3..1e8f64, d in 0.0..1e8f64) {
            let b2 = (b1 + db).min(1.0);
            let task = Task::new(d, 270.0);
            let lo = delay_uav(backlog, &dec(Some(0), None, [1.0 - b1, b1, 0.0]), &task, rate, 5e9).unwrap();
            let hi = delay_uav(backlog, &dec(Some(0), None, [1.0 - b2, b2, 0.0]), &task, rate, 5e9).unwrap();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn reward_is_permutation_invariant(items in prop::collection::vec((0.0..1e8f64, 0.01..100.0f64), 1..8),
                                           rot in 0usize..8) {
            let tasks: Vec<Task> = items.iter().map(|(d, _)| Task::new(*d, 270.0)).collect();
            let delays: Vec<f64> = items.iter().map(|(_, t)| *t).collect();
            let r = slot_reward(&tasks, &delays).unwrap();
            let mut idx: Vec<usize> = (0..items.len()).collect();
            idx.rotate_left(rot % items.len());
            idx.reverse();
            let t2: Vec<Task> = idx.iter().map(|&i| tasks[i]).collect();
            let d2: Vec<f64> = idx.iter().map(|&i| delays[i]).collect();
            let r2 = slot_reward(&t2, &d2).unwrap();
            prop_assert!((r - r2).abs() <= 1e-12 * r.abs().max(1.0));
        }
    }
}
